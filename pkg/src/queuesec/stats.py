"""Shared numerical substrate: seedable split-able RNG streams, exponential
variates, streaming (Welford) moments, Student-t tail probabilities and
confidence-interval halfwidths.

All randomness in the package flows through :class:`RngStream` so that every
experiment is reproducible from an explicit 64-bit seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betainc

from .errors import ValidationError


class RngStream:
    """A seeded random stream with deterministic splitting.

    Wraps numpy's PCG64 generator (128-bit state, period 2^128) seeded from
    ``SeedSequence(seed, spawn_key=key)``.  Identical ``(seed, key)`` pairs
    reproduce the same draw sequence on every platform; distinct keys yield
    statistically independent streams.  ``split(*ids)`` is the documented
    splitting function: the child stream is keyed by the parent key extended
    with ``ids``.
    """

    def __init__(self, seed: int, key: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.key = tuple(int(i) for i in key)
        self._gen = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=self.key))
        )

    def split(self, *ids: int) -> "RngStream":
        """Independent child stream keyed by ``(seed, *key, *ids)``."""
        return RngStream(self.seed, self.key + tuple(int(i) for i in ids))

    def random(self, size=None):
        """Uniform draw(s) in [0, 1)."""
        return self._gen.random(size)

    def permutation(self, n: int):
        return self._gen.permutation(n)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, key={self.key})"


def exp_variate(stream: RngStream, rate: float, size=None):
    """Exponential variate(s) via the inverse CDF, ``-ln(U)/rate``.

    U is uniform on (0, 1], obtained as 1 minus the stream's uniform on
    [0, 1), so the boundary draw U=1 maps to 0 exactly.  Computed as
    ``-log1p(-u)/rate`` for accuracy near u=0.
    """
    if rate <= 0:
        raise ValidationError(f"rate must be positive, got {rate}")
    u = stream.random(size)
    return -np.log1p(-u) / rate


@dataclass
class RunningMoments:
    """Welford accumulator for streaming mean and variance.

    ``m2`` is the running sum of squared deviations; sample variance is
    ``m2 / (n - 1)``.  Accumulators merge exactly, so parallel reductions
    give the same result as a single pass.
    """

    n: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def update(self, x: float) -> None:
        self.n += 1
        delta = x - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (x - self.mean)

    def update_many(self, xs) -> None:
        xs = np.asarray(xs, dtype=float)
        if xs.size == 0:
            return
        other = RunningMoments(
            n=int(xs.size),
            mean=float(xs.mean()),
            m2=float(((xs - xs.mean()) ** 2).sum()),
        )
        merged = self.merge(other)
        self.n, self.mean, self.m2 = merged.n, merged.mean, merged.m2

    def merge(self, other: "RunningMoments") -> "RunningMoments":
        """Combine two accumulators (Chan et al. parallel update)."""
        if self.n == 0:
            return RunningMoments(other.n, other.mean, other.m2)
        if other.n == 0:
            return RunningMoments(self.n, self.mean, self.m2)
        n = self.n + other.n
        delta = other.mean - self.mean
        mean = self.mean + delta * other.n / n
        m2 = self.m2 + other.m2 + delta * delta * self.n * other.n / n
        return RunningMoments(n, mean, m2)

    @property
    def variance(self) -> float:
        """Sample variance (n-1 denominator); 0.0 for n < 2."""
        if self.n < 2:
            return 0.0
        return self.m2 / (self.n - 1)

    @property
    def sd(self) -> float:
        return math.sqrt(max(self.variance, 0.0))


def student_t_sf(t: float, dof: float) -> float:
    """Two-sided Student-t tail probability, P(|T| > |t|).

    Evaluated through the regularized incomplete beta function:
    ``I_{v/(v+t^2)}(v/2, 1/2)``.  Returns 1.0 at t=0.
    """
    if dof <= 0:
        raise ValidationError(f"dof must be positive, got {dof}")
    t = float(t)
    if t == 0.0:
        return 1.0
    x = dof / (dof + t * t)
    return float(betainc(0.5 * dof, 0.5, x))


def student_t_quantile(level: float, dof: float) -> float:
    """Two-sided critical value t* with P(|T| <= t*) = level.

    Found by bisection on :func:`student_t_sf` to an interval width of
    1e-10 (relative for large quantiles).
    """
    if not 0.0 < level < 1.0:
        raise ValidationError(f"level must be in (0,1), got {level}")
    target = 1.0 - level
    lo, hi = 0.0, 1.0
    while student_t_sf(hi, dof) > target:
        hi *= 2.0
        if hi > 1e300:
            raise ValidationError(f"quantile out of range for level={level}")
    while hi - lo > 1e-10 * max(1.0, lo):
        mid = 0.5 * (lo + hi)
        if student_t_sf(mid, dof) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def ci_halfwidth(round_means, level: float = 0.95) -> float:
    """Student-t confidence halfwidth of the mean of independent round means.

    Returns ``t_{(1+level)/2, r-1} * sd(round_means) / sqrt(r)``; requires at
    least two rounds.
    """
    means = np.asarray(list(round_means), dtype=float)
    r = means.size
    if r < 2:
        raise ValidationError(f"need at least 2 round means, got {r}")
    if not 0.0 < level < 1.0:
        raise ValidationError(f"level must be in (0,1), got {level}")
    sd = float(means.std(ddof=1))
    if sd == 0.0:
        return 0.0
    tq = student_t_quantile(level, r - 1)
    return tq * sd / math.sqrt(r)
