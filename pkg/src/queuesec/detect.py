"""Anomaly-detection evaluation on simulated traces.

Jobs are classified from a single feature (response time or waiting time)
into short-clean / short-impaired / long.  Because the feature is
one-dimensional, every classifier reduces to ordered interval thresholds:

* ``max_margin``  - midpoint of the inter-class gap when separable, else the
  threshold with fewest training misclassifications (the 1-D reduction of a
  max-margin classifier);
* ``gaussian_nb`` - per-class Gaussians with priors; boundaries where the
  posteriors cross;
* ``stump``       - exhaustive Gini-impurity scan over midpoints of
  consecutive distinct feature values.

Feasibility of detection is probed with a Welch (unequal-variance) two-sample
t-test on the waiting times of impaired vs clean short jobs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import IntEnum
from typing import Optional

import numpy as np

from .errors import ValidationError
from .sim import JobClass, JobTrace, label_impaired, simulate
from .stats import RngStream, student_t_sf
from .workload import WorkloadSpec

#: Relative (squared-range) variance floor for zero-variance classes, which
#: deterministic per-class service times make common.
NB_VAR_FLOOR_FACTOR = 1e-9

#: Smallest reportable p-value; keeps p in (0, 1] when the tail underflows.
MIN_P_VALUE = 5e-324

TRAINERS = ("max_margin", "gaussian_nb", "stump")

RESPONSE_TIME = "response"
WAITING_TIME = "waiting"
ALL_JOBS = "all"
SHORT_ONLY = "short_only"


class Label(IntEnum):
    SHORT_CLEAN = 0
    SHORT_IMPAIRED = 1
    LONG = 2


LABEL_NAMES = ("short_clean", "short_impaired", "long")


@dataclass(frozen=True)
class LabeledSample:
    feature: float
    label: Label


class Dataset:
    """Column-oriented sequence of LabeledSamples."""

    def __init__(self, features, labels):
        self.features = np.asarray(features, dtype=float)
        self.labels = np.asarray(labels, dtype=np.uint8)
        if self.features.shape != self.labels.shape:
            raise ValidationError("features and labels must have equal length")

    def __len__(self):
        return self.features.size

    def __getitem__(self, i) -> LabeledSample:
        i = int(i)
        if i < 0:
            i += len(self)
        return LabeledSample(float(self.features[i]), Label(int(self.labels[i])))

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def class_counts(self):
        return {
            lab: int((self.labels == lab).sum()) for lab in Label
        }


def build_dataset(trace: JobTrace, feature: str = RESPONSE_TIME,
                  scope: str = ALL_JOBS) -> Dataset:
    """One sample per retained job of a labeled trace.

    ``short_only`` drops long jobs, collapsing the task to the binary
    clean/impaired distinction used for waiting-time thresholds.
    """
    if not trace.labeled:
        raise ValidationError("trace must pass label_impaired before build_dataset")
    if feature not in (RESPONSE_TIME, WAITING_TIME):
        raise ValidationError(f"unknown feature {feature!r}")
    if scope not in (ALL_JOBS, SHORT_ONLY):
        raise ValidationError(f"unknown scope {scope!r}")
    kept = trace.retained()
    feats = kept.response if feature == RESPONSE_TIME else kept.wait
    shorts = kept.job_class == JobClass.SHORT
    labels = np.full(len(kept), Label.LONG, dtype=np.uint8)
    labels[shorts & ~kept.impaired] = Label.SHORT_CLEAN
    labels[shorts & kept.impaired] = Label.SHORT_IMPAIRED
    if scope == SHORT_ONLY:
        feats, labels = feats[shorts], labels[shorts]
    return Dataset(feats, labels)


def split(dataset: Dataset, test_fraction: float, seed) -> tuple[Dataset, Dataset]:
    """Seeded uniform random split (not stratified) into (train, test).

    The test size is ``n * test_fraction`` rounded half-up, clamped so both
    parts stay nonempty; sample order within each part follows the original
    dataset order.
    """
    n = len(dataset)
    if n < 2:
        raise ValidationError(f"need at least 2 samples to split, got {n}")
    if not 0.0 < test_fraction < 1.0:
        raise ValidationError(f"test_fraction must be in (0,1), got {test_fraction}")
    stream = seed if isinstance(seed, RngStream) else RngStream(seed)
    n_test = min(max(int(n * test_fraction + 0.5), 1), n - 1)
    perm = stream.permutation(n)
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    return (
        Dataset(dataset.features[train_idx], dataset.labels[train_idx]),
        Dataset(dataset.features[test_idx], dataset.labels[test_idx]),
    )


@dataclass(frozen=True)
class ThresholdModel:
    """Interval classifier: x in [boundaries[i-1], boundaries[i]) -> classes[i].

    ``classes`` holds the predictable labels in ascending feature order;
    labels absent from training never appear.
    """

    boundaries: tuple
    classes: tuple
    trainer: str

    def predict(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(np.asarray(self.boundaries), x, side="right")
        return np.asarray(self.classes, dtype=np.uint8)[idx]


def _candidate_thresholds(values):
    vals = np.unique(values)
    mids = 0.5 * (vals[:-1] + vals[1:])
    return np.concatenate(([vals[0] - 1.0], mids, [vals[-1] + 1.0]))


def _boundary_max_margin(xlo, xhi):
    lo_max, hi_min = xlo.max(), xhi.min()
    if lo_max < hi_min:
        return 0.5 * (lo_max + hi_min)
    cand = _candidate_thresholds(np.concatenate([xlo, xhi]))
    xlo_s, xhi_s = np.sort(xlo), np.sort(xhi)
    errors = (
        xlo_s.size
        - np.searchsorted(xlo_s, cand, side="left")
        + np.searchsorted(xhi_s, cand, side="left")
    )
    return float(cand[np.argmin(errors)])


def _boundary_gaussian_nb(xlo, xhi, prior_lo, prior_hi, var_floor):
    mlo, mhi = float(xlo.mean()), float(xhi.mean())
    vlo = max(float(xlo.var()), var_floor)
    vhi = max(float(xhi.var()), var_floor)
    lo_bound = float(min(xlo.min(), xhi.min()))
    hi_bound = float(max(xlo.max(), xhi.max()))

    # log-posterior difference g(x) = A x^2 + B x + C; predict lo where g > 0
    a = 0.5 * (1.0 / vhi - 1.0 / vlo)
    b = mlo / vlo - mhi / vhi
    c = (
        mhi * mhi / (2.0 * vhi)
        - mlo * mlo / (2.0 * vlo)
        + math.log(prior_lo / prior_hi)
        + 0.5 * math.log(vhi / vlo)
    )

    def majority_boundary():
        mid = 0.5 * (lo_bound + hi_bound)
        g_mid = (a * mid + b) * mid + c
        return hi_bound + 1.0 if g_mid >= 0.0 else lo_bound - 1.0

    roots = []
    if a == 0.0:
        if b != 0.0:
            roots = [-c / b]
    else:
        disc = b * b - 4.0 * a * c
        if disc >= 0.0:
            sq = math.sqrt(disc)
            roots = [(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)]
    in_range = [r for r in roots if lo_bound <= r <= hi_bound]
    if not in_range:
        return majority_boundary()
    between = [r for r in in_range if min(mlo, mhi) <= r <= max(mlo, mhi)]
    pool = between or in_range
    center = 0.5 * (mlo + mhi)
    return float(min(pool, key=lambda r: abs(r - center)))


def _boundary_stump(xlo, xhi):
    x = np.concatenate([xlo, xhi])
    y = np.concatenate([np.zeros(xlo.size), np.ones(xhi.size)])
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    vals, first_idx = np.unique(xs, return_index=True)
    if vals.size == 1:
        # no split point; fall back to the majority class
        return vals[0] + 1.0 if xlo.size >= xhi.size else vals[0] - 1.0
    n = xs.size
    cum_hi = np.cumsum(ys)
    pos = first_idx[1:]  # left part sizes at each candidate split
    n_left = pos.astype(float)
    n_right = n - n_left
    hi_left = cum_hi[pos - 1]
    lo_left = n_left - hi_left
    hi_right = xhi.size - hi_left
    lo_right = n_right - hi_right
    gini_left = 1.0 - (lo_left / n_left) ** 2 - (hi_left / n_left) ** 2
    gini_right = 1.0 - (lo_right / n_right) ** 2 - (hi_right / n_right) ** 2
    cost = (n_left * gini_left + n_right * gini_right) / n
    mids = 0.5 * (vals[:-1] + vals[1:])
    return float(mids[np.argmin(cost)])


def train(dataset: Dataset, trainer: str = "max_margin") -> ThresholdModel:
    """Fit interval boundaries between adjacent classes (by mean feature).

    Classes missing from the training data get no interval, so the model
    never predicts them.
    """
    if trainer not in TRAINERS:
        raise ValidationError(f"trainer must be one of {TRAINERS}, got {trainer!r}")
    n = len(dataset)
    if n < 1:
        raise ValidationError("need at least 1 training sample")
    feats = dataset.features
    if not np.all(np.isfinite(feats)):
        raise ValidationError("features must be finite")

    counts = dataset.class_counts()
    present = [lab for lab in Label if counts[lab] > 0]
    present.sort(key=lambda lab: (float(feats[dataset.labels == lab].mean()), lab))
    if len(present) == 1:
        return ThresholdModel((), (present[0],), trainer)

    frange = float(feats.max() - feats.min())
    var_floor = NB_VAR_FLOOR_FACTOR * frange * frange
    if var_floor == 0.0:
        var_floor = 1e-30

    boundaries = []
    for lo, hi in zip(present, present[1:]):
        xlo = feats[dataset.labels == lo]
        xhi = feats[dataset.labels == hi]
        if trainer == "max_margin":
            bd = _boundary_max_margin(xlo, xhi)
        elif trainer == "gaussian_nb":
            bd = _boundary_gaussian_nb(
                xlo, xhi, counts[lo] / n, counts[hi] / n, var_floor
            )
        else:
            bd = _boundary_stump(xlo, xhi)
        boundaries.append(bd)
    for i in range(1, len(boundaries)):
        if boundaries[i] <= boundaries[i - 1]:
            boundaries[i] = np.nextafter(boundaries[i - 1], np.inf)
    return ThresholdModel(tuple(boundaries), tuple(present), trainer)


@dataclass(frozen=True)
class EvalReport:
    """Accuracy and 3x3 confusion matrix (rows true, columns predicted, in
    short_clean / short_impaired / long order)."""

    accuracy: float
    confusion: tuple
    n_train: int
    n_test: int
    k: Optional[int] = None
    seed: Optional[int] = None
    thresholds: tuple = ()
    impaired_fraction: Optional[float] = None
    p_value: Optional[float] = None


def evaluate(model: ThresholdModel, test: Dataset, n_train: int = 0,
             k=None, seed=None) -> EvalReport:
    """Deterministic accuracy/confusion of the model on a test set."""
    if len(test) == 0:
        raise ValidationError("test set must be nonempty")
    pred = model.predict(test.features)
    confusion = np.zeros((3, 3), dtype=np.int64)
    np.add.at(confusion, (test.labels, pred), 1)
    accuracy = float(np.trace(confusion)) / len(test)
    return EvalReport(
        accuracy=accuracy,
        confusion=tuple(tuple(int(v) for v in row) for row in confusion),
        n_train=int(n_train),
        n_test=len(test),
        k=k,
        seed=seed,
        thresholds=model.boundaries,
    )


def impaired_fraction(trace: JobTrace) -> Optional[float]:
    """Fraction of short jobs in the trace marked impaired; None if no shorts."""
    if not trace.labeled:
        raise ValidationError("trace must pass label_impaired first")
    shorts = trace.job_class == JobClass.SHORT
    n_short = int(shorts.sum())
    if n_short == 0:
        return None
    return float(trace.impaired[shorts].sum()) / n_short


@dataclass(frozen=True)
class TTestResult:
    t_stat: float
    dof: float
    p_value: float
    mean_a: float
    mean_b: float
    n_a: int
    n_b: int


def _checked_pair(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise ValidationError(
            f"both samples need >= 2 points, got {a.size} and {b.size}"
        )
    return a, b


def _degenerate_result(ma, mb, na, nb):
    if ma == mb:
        return TTestResult(0.0, float(na + nb - 2), 1.0, ma, mb, na, nb)
    t = math.inf if ma > mb else -math.inf
    return TTestResult(t, float(na + nb - 2), MIN_P_VALUE, ma, mb, na, nb)


def welch_test(a, b) -> TTestResult:
    """Welch two-sample t-test of equal means (two-sided).

    Degrees of freedom follow Welch-Satterthwaite.  Two constant, equal
    samples give t=0, p=1; constant unequal samples give an infinite
    statistic with p clamped to the smallest positive float.
    """
    a, b = _checked_pair(a, b)
    ma, mb = float(a.mean()), float(b.mean())
    sa = float(a.var(ddof=1)) / a.size
    sb = float(b.var(ddof=1)) / b.size
    se2 = sa + sb
    if se2 == 0.0:
        return _degenerate_result(ma, mb, a.size, b.size)
    t = (ma - mb) / math.sqrt(se2)
    dof = se2 * se2 / (sa * sa / (a.size - 1) + sb * sb / (b.size - 1))
    p = max(student_t_sf(t, dof), MIN_P_VALUE)
    return TTestResult(t, dof, p, ma, mb, a.size, b.size)


def pooled_t_test(a, b) -> TTestResult:
    """Classic equal-variance two-sample t-test (two-sided).

    Unlike Welch, the pooled variance lets a large high-variance class
    dominate the standard error.  With deterministic service times the clean
    class often collapses to identical values, so this variant is the one
    that loses power as the server count grows, which is exactly the
    feasibility effect the waiting-time p-value series tracks.
    """
    a, b = _checked_pair(a, b)
    ma, mb = float(a.mean()), float(b.mean())
    na, nb = a.size, b.size
    sp2 = ((na - 1) * float(a.var(ddof=1)) + (nb - 1) * float(b.var(ddof=1))) / (
        na + nb - 2
    )
    if sp2 == 0.0:
        return _degenerate_result(ma, mb, na, nb)
    t = (ma - mb) / math.sqrt(sp2 * (1.0 / na + 1.0 / nb))
    dof = float(na + nb - 2)
    p = max(student_t_sf(t, dof), MIN_P_VALUE)
    return TTestResult(t, dof, p, ma, mb, na, nb)


def accuracy_vs_k(
    spec: WorkloadSpec,
    k_from: int,
    k_to: int,
    n_samples: int = 50_000,
    trainer: str = "max_margin",
    seed: int = 0,
    test_fraction: float = 0.2,
    feature: str = RESPONSE_TIME,
    scope: str = ALL_JOBS,
    warmup_fraction: float = 0.0,
    p_test: str = "pooled",
    k_values=None,
) -> list[EvalReport]:
    """Detection pipeline per server count.

    For each k: simulate ``n_samples`` jobs on stream (seed, k, 0), label
    impairments, build the dataset, train and evaluate.  The three-class
    (``all``) scope uses a seeded 80/20-style split on stream (seed, k, 1);
    the binary ``short_only`` scope trains and evaluates on the whole dataset
    (threshold learning).  Each report also carries the impaired-short
    fraction and the t-test p-value comparing impaired vs clean short waiting
    times (``p_test``: "pooled" default, or "welch"; pooled is the variant
    whose power decays as waiting vanishes with many servers).
    """
    if p_test not in ("pooled", "welch"):
        raise ValidationError(f"p_test must be pooled|welch, got {p_test!r}")
    if k_values is None:
        if not 1 <= k_from <= k_to:
            raise ValidationError(f"need 1 <= k_from <= k_to, got {k_from}..{k_to}")
        k_values = range(int(k_from), int(k_to) + 1)
    t_test = pooled_t_test if p_test == "pooled" else welch_test
    base = RngStream(seed)
    reports = []
    for k in k_values:
        trace = label_impaired(
            simulate(spec, k, n_samples, base.split(k, 0), warmup_fraction)
        )
        kept = trace.retained()
        ds = build_dataset(trace, feature, scope)
        if scope == ALL_JOBS:
            train_ds, test_ds = split(ds, test_fraction, base.split(k, 1))
        else:
            train_ds = test_ds = ds
        model = train(train_ds, trainer)
        report = evaluate(model, test_ds, n_train=len(train_ds), k=int(k), seed=seed)

        shorts = kept.job_class == JobClass.SHORT
        clean_w = kept.wait[shorts & ~kept.impaired]
        imp_w = kept.wait[shorts & kept.impaired]
        p_value = None
        if clean_w.size >= 2 and imp_w.size >= 2:
            p_value = t_test(imp_w, clean_w).p_value
        reports.append(
            replace(
                report,
                impaired_fraction=impaired_fraction(kept),
                p_value=p_value,
            )
        )
    return reports
