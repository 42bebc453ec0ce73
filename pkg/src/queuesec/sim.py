"""Event-free FIFO M/G/K simulator based on the multi-server workload-vector
recursion (the multi-server generalization of the Lindley recursion).

The state is the ascending vector of unfinished work per server.  An arrival
waits for the smallest entry, adds its service there, and the whole vector
then ages by the next interarrival time, clamped at zero.  Because only the
updated entry can change rank, each step re-sorts by a single O(K) insertion.

Per-class service times are deterministic and scale with the server count:
``k * E(X_class)`` under the fixed-total-capacity law.  Short jobs are marked
*impaired* when their sojourn interval overlaps that of at least one long job.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np
from numba import njit

from .errors import SaturationError, ValidationError
from .stats import RngStream, RunningMoments, ci_halfwidth
from .workload import WorkloadSpec


class JobClass(IntEnum):
    SHORT = 0
    LONG = 1


@dataclass(frozen=True)
class JobRecord:
    """One simulated job.  ``impaired`` is meaningful for short jobs only."""

    index: int
    job_class: JobClass
    arrival: float
    wait: float
    service: float
    departure: float
    impaired: bool
    warmup: bool


class JobTrace:
    """Column-oriented sequence of JobRecords for one simulation run.

    Supports ``len``, integer indexing (returning a :class:`JobRecord`) and
    iteration; bulk consumers read the numpy arrays directly.  ``labeled``
    is False until :func:`label_impaired` has been applied.
    """

    def __init__(self, k, arrival, wait, service, job_class, impaired, warmup,
                 labeled=False):
        self.k = int(k)
        self.arrival = arrival
        self.wait = wait
        self.service = service
        self.departure = arrival + wait + service
        self.job_class = job_class
        self.impaired = impaired
        self.warmup = warmup
        self.labeled = bool(labeled)

    def __len__(self):
        return self.arrival.size

    def __getitem__(self, i) -> JobRecord:
        i = int(i)
        if i < 0:
            i += len(self)
        return JobRecord(
            index=i,
            job_class=JobClass(int(self.job_class[i])),
            arrival=float(self.arrival[i]),
            wait=float(self.wait[i]),
            service=float(self.service[i]),
            departure=float(self.departure[i]),
            impaired=bool(self.impaired[i]),
            warmup=bool(self.warmup[i]),
        )

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def retained(self) -> "JobTrace":
        """The post-warm-up portion of the trace."""
        keep = ~self.warmup
        return JobTrace(
            self.k,
            self.arrival[keep],
            self.wait[keep],
            self.service[keep],
            self.job_class[keep],
            self.impaired[keep],
            self.warmup[keep],
            labeled=self.labeled,
        )

    @property
    def response(self):
        return self.wait + self.service

    def to_csv(self, path) -> None:
        """Write the per-job trace (fixed-point ms, 6 decimals)."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["index", "class", "arrival", "wait", "service", "departure",
                 "impaired"]
            )
            names = ("short", "long")
            for i in range(len(self)):
                writer.writerow(
                    [
                        i,
                        names[int(self.job_class[i])],
                        f"{self.arrival[i]:.6f}",
                        f"{self.wait[i]:.6f}",
                        f"{self.service[i]:.6f}",
                        f"{self.departure[i]:.6f}",
                        "true" if self.impaired[i] else "false",
                    ]
                )


def kw_step(state, service, interarrival):
    """One step of the workload-vector recursion.

    Returns ``(wait, next_state)`` where ``wait`` is the smallest entry of the
    ascending ``state`` and ``next_state`` is the re-sorted, zero-clamped
    vector after adding ``service`` to the least-loaded server and aging every
    server by ``interarrival``.
    """
    state = tuple(float(v) for v in state)
    if len(state) < 1:
        raise ValidationError("state must have at least one server entry")
    if any(b < a for a, b in zip(state, state[1:])):
        raise ValidationError(f"state must be sorted ascending, got {state}")
    if any(v < 0.0 for v in state):
        raise ValidationError(f"state entries must be nonnegative, got {state}")
    if service <= 0.0:
        raise ValidationError(f"service must be positive, got {service}")
    if interarrival < 0.0:
        raise ValidationError(f"interarrival must be nonnegative, got {interarrival}")
    wait = state[0]
    updated = [max(0.0, v - interarrival) for v in state[1:]]
    updated.append(max(0.0, wait + service - interarrival))
    updated.sort()
    return wait, tuple(updated)


@njit(cache=True)
def _kw_waits(state, services, interarrivals, waits):
    """Bulk workload-vector recursion; mutates ``state`` and fills ``waits``.

    ``interarrivals[i]`` is the gap between arrival i and arrival i+1.
    """
    k = state.shape[0]
    n = services.shape[0]
    for i in range(n):
        w = state[0]
        waits[i] = w
        tau = interarrivals[i]
        v = w + services[i] - tau
        if v < 0.0:
            v = 0.0
        j = 1
        while j < k:
            u = state[j] - tau
            if u < 0.0:
                u = 0.0
            if u < v:
                state[j - 1] = u
                j += 1
            else:
                break
        state[j - 1] = v
        while j < k:
            u = state[j] - tau
            if u < 0.0:
                u = 0.0
            state[j] = u
            j += 1


def simulate(spec: WorkloadSpec, k: int, n: int, seed, warmup_fraction: float = 0.01
             ) -> JobTrace:
    """Simulate n jobs through the k-server system.

    Interarrivals are exponential(lambda_total); each job is short with
    probability alpha; service is the deterministic ``k * E(X_class)``.  The
    first ``ceil(warmup_fraction * n)`` jobs are flagged as warm-up.  ``seed``
    may be an integer or an :class:`RngStream`.  Draw order (fixed for
    reproducibility): one block of n uniforms for interarrivals, then one
    block of n uniforms for job classes.
    """
    if spec.rho >= 1.0:
        raise SaturationError(f"rho must be below 1, got {spec.rho}")
    if k < 1 or int(k) != k:
        raise ValidationError(f"k must be a positive integer, got {k}")
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    if not 0.0 <= warmup_fraction < 1.0:
        raise ValidationError(
            f"warmup_fraction must be in [0,1), got {warmup_fraction}"
        )
    k = int(k)
    n = int(n)
    stream = seed if isinstance(seed, RngStream) else RngStream(seed)
    interarrivals = -np.log1p(-stream.random(n)) / spec.lambda_total
    short = stream.random(n) < spec.alpha
    services = np.where(short, k * spec.ex_short, k * spec.ex_long)

    arrival = np.cumsum(interarrivals)
    # the recursion consumes the gap *after* each arrival
    gaps = np.empty(n)
    gaps[:-1] = interarrivals[1:]
    gaps[-1] = 0.0
    state = np.zeros(k)
    waits = np.empty(n)
    _kw_waits(state, services, gaps, waits)

    job_class = np.where(short, JobClass.SHORT, JobClass.LONG).astype(np.uint8)
    warmup = np.zeros(n, dtype=bool)
    warmup[: math.ceil(warmup_fraction * n)] = True
    return JobTrace(k, arrival, waits, services, job_class,
                    np.zeros(n, dtype=bool), warmup)


def label_impaired(trace: JobTrace) -> JobTrace:
    """Mark each short job whose sojourn overlaps that of some long job.

    Sojourns are half-open intervals [arrival, departure); a short job is
    impaired iff some long job satisfies ``long.arrival < short.departure``
    and ``long.departure > short.arrival``.  One pass of binary searches over
    the long arrivals plus a running maximum of long departures gives
    O(n log n).
    """
    if np.any(np.diff(trace.arrival) < 0.0):
        raise ValidationError("jobs must be sorted by arrival time")
    long_mask = trace.job_class == JobClass.LONG
    impaired = np.zeros(len(trace), dtype=bool)
    if long_mask.any():
        long_arr = trace.arrival[long_mask]
        long_dep_max = np.maximum.accumulate(trace.departure[long_mask])
        short_mask = ~long_mask
        # count of long jobs arriving strictly before each short departure
        idx = np.searchsorted(long_arr, trace.departure[short_mask], side="left")
        overlapping = idx > 0
        impaired_short = np.zeros(idx.size, dtype=bool)
        impaired_short[overlapping] = (
            long_dep_max[idx[overlapping] - 1]
            > trace.arrival[short_mask][overlapping]
        )
        impaired[short_mask] = impaired_short
    return JobTrace(
        trace.k,
        trace.arrival,
        trace.wait,
        trace.service,
        trace.job_class,
        impaired,
        trace.warmup,
        labeled=True,
    )


@dataclass(frozen=True)
class SimSummary:
    """Round-aggregated statistics over the retained (post-warm-up) jobs.

    ``ci_halfwidth`` is the Student-t halfwidth over the round means of the
    response time; ``sd_ci_halfwidth`` the same over the round sds.
    """

    k: int
    rounds: int
    n_per_round: int
    n: int
    seed: int
    warmup_fraction: float
    ci_level: float
    mean_t: float
    sd_t: float
    mean_w: float
    sd_w: float
    p_wait: float
    impaired_fraction: float
    round_mean_t: tuple
    round_sd_t: tuple
    ci_halfwidth: float
    sd_ci_halfwidth: float


def run_rounds(
    spec: WorkloadSpec,
    k: int,
    rounds: int,
    n_per_round: int,
    seed,
    warmup_fraction: float = 0.01,
    ci_level: float = 0.95,
) -> SimSummary:
    """Independent replications: round r runs on the child stream (seed, r).

    Each round starts from an empty system and discards its own warm-up
    prefix.  At least two rounds are required for the confidence intervals.
    """
    if rounds < 2:
        raise ValidationError(f"rounds must be >= 2 for CIs, got {rounds}")
    base = seed if isinstance(seed, RngStream) else RngStream(seed)
    acc_t = RunningMoments()
    acc_w = RunningMoments()
    round_mean_t, round_sd_t = [], []
    n_wait = 0
    n_short = 0
    n_impaired = 0
    for r in range(rounds):
        trace = label_impaired(
            simulate(spec, k, n_per_round, base.split(r), warmup_fraction)
        )
        kept = trace.retained()
        t = kept.response
        rm = RunningMoments()
        rm.update_many(t)
        round_mean_t.append(rm.mean)
        round_sd_t.append(rm.sd)
        acc_t = acc_t.merge(rm)
        rw = RunningMoments()
        rw.update_many(kept.wait)
        acc_w = acc_w.merge(rw)
        n_wait += int((kept.wait > 0.0).sum())
        shorts = kept.job_class == JobClass.SHORT
        n_short += int(shorts.sum())
        n_impaired += int(kept.impaired[shorts].sum())
    return SimSummary(
        k=int(k),
        rounds=int(rounds),
        n_per_round=int(n_per_round),
        n=acc_t.n,
        seed=base.seed,
        warmup_fraction=float(warmup_fraction),
        ci_level=float(ci_level),
        mean_t=acc_t.mean,
        sd_t=acc_t.sd,
        mean_w=acc_w.mean,
        sd_w=acc_w.sd,
        p_wait=n_wait / acc_t.n,
        impaired_fraction=(n_impaired / n_short) if n_short else float("nan"),
        round_mean_t=tuple(round_mean_t),
        round_sd_t=tuple(round_sd_t),
        ci_halfwidth=ci_halfwidth(round_mean_t, ci_level),
        sd_ci_halfwidth=ci_halfwidth(round_sd_t, ci_level),
    )


def sim_optimal_servers(
    spec: WorkloadSpec,
    k_range,
    rounds: int,
    n_per_round: int,
    seed: int,
    warmup_fraction: float = 0.01,
    ci_level: float = 0.95,
):
    """Simulated counterpart of the analytic optimal-server search.

    Runs :func:`run_rounds` for every k in ``k_range`` (server count k uses
    the child stream ``(seed, k)``, then ``(seed, k, r)`` per round) and
    returns an :class:`queuesec.analytic.OptimalServers` whose ``per_k``
    holds the SimSummary of each k.  Ties resolve to the smaller k.
    """
    from .analytic import OptimalServers, _argmin

    ks = sorted(int(k) for k in k_range)
    if not ks:
        raise ValidationError("k_range must be nonempty")
    base = seed if isinstance(seed, RngStream) else RngStream(seed)
    summaries = tuple(
        run_rounds(spec, k, rounds, n_per_round, base.split(k),
                   warmup_fraction, ci_level)
        for k in ks
    )
    k_mu, mu_star = _argmin((s.k, s.mean_t) for s in summaries)
    k_sigma, sigma_star = _argmin((s.k, s.sd_t) for s in summaries)
    return OptimalServers(
        k_mu=k_mu,
        k_sigma=k_sigma,
        mu_star=mu_star,
        sigma_star=sigma_star,
        per_k=summaries,
    )
