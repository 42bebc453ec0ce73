"""Turn measured response-time samples into workload-model parameters.

At low utilization the measured response times approximate the service times
themselves, so the baseline run calibrates the short-job service time and the
under-attack run the long-job service time.  Standard deviations are reported
for documentation; the model itself treats per-class service as
deterministic.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

from .errors import ValidationError
from .stats import RunningMoments

BASELINE = "baseline"
UNDER_ATTACK = "under_attack"

#: Above this single-server utilization the measured response times stop
#: being a good proxy for service times.
LOW_UTILIZATION_LIMIT = 0.2


@dataclass(frozen=True)
class MeasurementSet:
    """A labeled set of measured response times (ms) with derived stats."""

    label: str
    samples: tuple
    mean: float
    sd: float

    @property
    def n(self) -> int:
        return len(self.samples)


def _measurement_set(label, samples) -> MeasurementSet:
    acc = RunningMoments()
    for s in samples:
        acc.update(s)
    return MeasurementSet(label=label, samples=tuple(samples), mean=acc.mean,
                          sd=acc.sd)


def load_samples(path, label) -> MeasurementSet:
    """Read one positive decimal (ms) per line from a UTF-8 CSV file.

    Blank lines and lines starting with '#' are ignored; an optional header
    line ``response_time_ms`` is allowed.  Malformed or nonpositive values
    raise a validation error naming the line number.
    """
    if label not in (BASELINE, UNDER_ATTACK):
        raise ValidationError(f"label must be baseline or under_attack, got {label!r}")
    samples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if not samples and line.lower() == "response_time_ms":
                continue
            try:
                value = float(line)
            except ValueError:
                raise ValidationError(
                    f"{path}: line {lineno}: not a number: {line!r}"
                ) from None
            if value <= 0.0:
                raise ValidationError(
                    f"{path}: line {lineno}: response time must be positive, "
                    f"got {value}"
                )
            samples.append(value)
    if not samples:
        raise ValidationError(f"{path}: no samples found")
    return _measurement_set(label, samples)


@dataclass(frozen=True)
class CalibratedParams:
    """Estimated bimodal service-time parameters (ms)."""

    ex_short: float
    ex_long: float
    sd_short: float
    sd_long: float

    @property
    def ratio(self) -> float:
        return self.ex_short / self.ex_long


def estimate_params(baseline: MeasurementSet, attack: MeasurementSet,
                    baseline_rho=None) -> CalibratedParams:
    """Identify measured response times with per-class service times.

    Warns (but still returns parameters) when the attack mean falls below the
    baseline mean, or when ``baseline_rho`` exceeds the low-utilization limit
    under which the identification is justified.
    """
    if baseline.n == 0 or attack.n == 0:
        raise ValidationError("both measurement sets must be nonempty")
    if attack.mean < baseline.mean:
        warnings.warn(
            "attack mean response time is below the baseline mean; the "
            "low-utilization calibration assumption may be violated",
            stacklevel=2,
        )
    if baseline_rho is not None and baseline_rho > LOW_UTILIZATION_LIMIT:
        warnings.warn(
            f"baseline utilization estimate {baseline_rho} exceeds "
            f"{LOW_UTILIZATION_LIMIT}; measured response times may include "
            "non-negligible waiting",
            stacklevel=2,
        )
    return CalibratedParams(
        ex_short=baseline.mean,
        ex_long=attack.mean,
        sd_short=baseline.sd,
        sd_long=attack.sd,
    )
