"""Bimodal workload model: short (regular) jobs with probability alpha, long
(attack) jobs otherwise, both with deterministic per-class service times.

All rates and service-time moments used elsewhere in the package derive from
the :class:`WorkloadSpec` built here.  Times are in milliseconds throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ValidationError

#: Relative tolerance for accepting both rho and lam as redundant inputs.
RATE_CONSISTENCY_RTOL = 1e-9


@dataclass(frozen=True)
class WorkloadSpec:
    """A validated two-point workload with all derived rates.

    ``rho`` is the utilization of the equivalent single-server system; the
    split quantities satisfy ``lambda_short + lambda_long == lambda_total``
    and ``rho_short + rho_long == rho``.
    """

    alpha: float
    ex_short: float
    ex_long: float
    rho: float
    lambda_total: float
    lambda_short: float
    lambda_long: float
    rho_short: float
    rho_long: float

    @property
    def mean_service(self) -> float:
        """E(X) = alpha*E(X_S) + (1-alpha)*E(X_L)."""
        return self.alpha * self.ex_short + (1.0 - self.alpha) * self.ex_long

    @property
    def ratio(self) -> float:
        """Short-to-long mean service-time ratio, E(X_S)/E(X_L)."""
        return self.ex_short / self.ex_long


@dataclass(frozen=True)
class MomentSet:
    """Raw and derived service-time moments of the two-point mix.

    ``residual_mean`` is the mean residual service time E(X^2)/(2 E(X)) seen
    by a Poisson arrival.
    """

    m1: float
    m2: float
    m3: float
    var: float
    residual_mean: float


@dataclass(frozen=True)
class ServerConfig:
    """Per-server quantities when fixed total capacity is split over k servers.

    Each server runs at rate ``mu_k = 1 / (k * E(X))``, so per-class service
    times scale to ``k * E(X_class)``.
    """

    k: int
    per_server_service_scale: float
    mu_k: float


def make_workload(alpha, ex_short, ex_long, rho=None, lam=None) -> WorkloadSpec:
    """Build a validated WorkloadSpec from class fractions and service times.

    Either ``rho`` (single-server utilization) or ``lam`` (total arrival rate,
    jobs/ms) must be given; when both are given they must agree to within
    1e-9 relative, since ``rho = lam * E(X)``.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValidationError(f"alpha must be in [0,1], got {alpha}")
    if ex_short <= 0.0:
        raise ValidationError(f"ex_short must be positive, got {ex_short}")
    if ex_long < ex_short:
        raise ValidationError(
            f"ex_long must be >= ex_short, got ex_long={ex_long} < ex_short={ex_short}"
        )
    mean_service = alpha * ex_short + (1.0 - alpha) * ex_long
    if rho is None and lam is None:
        raise ValidationError("one of rho or lam is required")
    if rho is not None and lam is not None:
        implied = lam * mean_service
        if abs(implied - rho) > RATE_CONSISTENCY_RTOL * max(abs(rho), abs(implied)):
            raise ValidationError(
                f"rho and lam are inconsistent: lam*E(X)={implied!r} vs rho={rho!r}"
            )
    if rho is None:
        rho = lam * mean_service
    if not 0.0 < rho < 1.0:
        raise ValidationError(f"rho must be in (0,1), got {rho}")
    lambda_total = rho / mean_service
    lambda_short = alpha * lambda_total
    lambda_long = (1.0 - alpha) * lambda_total
    return WorkloadSpec(
        alpha=float(alpha),
        ex_short=float(ex_short),
        ex_long=float(ex_long),
        rho=float(rho),
        lambda_total=lambda_total,
        lambda_short=lambda_short,
        lambda_long=lambda_long,
        rho_short=lambda_short * ex_short,
        rho_long=lambda_long * ex_long,
    )


def moments(spec: WorkloadSpec) -> MomentSet:
    """Service-time moments of the deterministic two-point mix.

    m_i = alpha * ex_short**i + (1-alpha) * ex_long**i for i in {1,2,3}.
    """
    a, s, l = spec.alpha, spec.ex_short, spec.ex_long
    m1 = a * s + (1.0 - a) * l
    m2 = a * s**2 + (1.0 - a) * l**2
    m3 = a * s**3 + (1.0 - a) * l**3
    return MomentSet(
        m1=m1,
        m2=m2,
        m3=m3,
        var=m2 - m1 * m1,
        residual_mean=m2 / (2.0 * m1),
    )


def server_config(spec: WorkloadSpec, k: int) -> ServerConfig:
    """Per-server capacity when the single-server rate is split k ways."""
    if k < 1 or int(k) != k:
        raise ValidationError(f"k must be a positive integer, got {k}")
    k = int(k)
    return ServerConfig(
        k=k,
        per_server_service_scale=float(k),
        mu_k=1.0 / (k * spec.mean_service),
    )
