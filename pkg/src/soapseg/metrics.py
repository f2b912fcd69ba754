"""Evaluation and statistics: per-class precision/recall/F1 with macro
average over a fixed label set, Cohen's kappa, Spearman's rank correlation,
and Welch's two-sample t-test.

Counting is paragraph-level: precision is true-positive labeled paragraphs
over predicted-positive, recall over gold-positive, per class. Classes
absent from both prediction and gold still contribute an F1 of zero to the
macro average (the label set is fixed, not observed).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Optional, Sequence

import numpy as np

from .errors import ContractViolation


@dataclass
class ClassScores:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class EvalReport:
    labels: list
    per_class: dict
    macro_f1: float
    confusion: np.ndarray  # (K, K) counts, rows gold, columns predicted

    def to_json(self) -> dict:
        return {
            "labels": [str(getattr(lab, "display", lab)) for lab in self.labels],
            "per_class": {
                str(getattr(lab, "display", lab)): {
                    "precision": cs.precision, "recall": cs.recall,
                    "f1": cs.f1, "support": cs.support,
                } for lab, cs in self.per_class.items()
            },
            "macro_f1": self.macro_f1,
            "confusion": self.confusion.tolist(),
        }


def evaluate(pred: Sequence[Sequence[Hashable]],
             gold: Sequence[Sequence[Hashable]],
             label_set: Sequence[Hashable]) -> EvalReport:
    """Score predicted label sequences against gold, note by note."""
    if len(pred) != len(gold):
        raise ContractViolation(f"{len(pred)} predictions for {len(gold)} notes")
    labels = list(label_set)
    index = {lab: i for i, lab in enumerate(labels)}
    k = len(labels)
    confusion = np.zeros((k, k), dtype=np.int64)
    for i, (p_seq, g_seq) in enumerate(zip(pred, gold)):
        if len(p_seq) != len(g_seq):
            raise ContractViolation(
                f"note {i}: {len(p_seq)} predictions for {len(g_seq)} labels")
        for p, g in zip(p_seq, g_seq):
            confusion[index[g], index[p]] += 1

    per_class = {}
    f1_sum = 0.0
    for lab in labels:
        i = index[lab]
        tp = int(confusion[i, i])
        fp = int(confusion[:, i].sum()) - tp
        fn = int(confusion[i, :].sum()) - tp
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class[lab] = ClassScores(precision, recall, f1, tp + fn)
        f1_sum += f1
    return EvalReport(labels=labels, per_class=per_class,
                      macro_f1=f1_sum / k, confusion=confusion)


def cohen_kappa(a: Sequence[Hashable], b: Sequence[Hashable]) -> float:
    """Chance-corrected agreement with marginal-product chance."""
    if len(a) != len(b):
        raise ContractViolation(f"length mismatch: {len(a)} vs {len(b)}")
    if len(a) == 0:
        raise ContractViolation("sequences must be nonempty")
    n = len(a)
    p_obs = sum(x == y for x, y in zip(a, b)) / n
    counts_a: dict = {}
    counts_b: dict = {}
    for x in a:
        counts_a[x] = counts_a.get(x, 0) + 1
    for y in b:
        counts_b[y] = counts_b.get(y, 0) + 1
    p_exp = sum(counts_a.get(lab, 0) * counts_b.get(lab, 0)
                for lab in counts_a) / (n * n)
    if p_exp == 1.0:
        return 1.0 if p_obs == 1.0 else 0.0
    return (p_obs - p_exp) / (1.0 - p_exp)


@dataclass
class StatResult:
    statistic: float
    p_value: Optional[float] = None
    n: tuple = ()
    degenerate: bool = False


def _average_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    i = 0
    sorted_vals = values[order]
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman_rho(x: Sequence[float], y: Sequence[float]) -> StatResult:
    """Rank correlation: Pearson correlation of average-ranked data.

    A constant input has no rank ordering; the result is 0 with the
    degenerate flag set.
    """
    if len(x) != len(y):
        raise ContractViolation(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < 2:
        raise ContractViolation("need at least two observations")
    rx = _average_ranks(np.asarray(x, dtype=np.float64))
    ry = _average_ranks(np.asarray(y, dtype=np.float64))
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    denom = math.sqrt(float(dx @ dx) * float(dy @ dy))
    if denom == 0.0:
        return StatResult(statistic=0.0, n=(len(x),), degenerate=True)
    return StatResult(statistic=float(dx @ dy) / denom, n=(len(x),))


# --------------------------------------------------------------------------
# Welch's t-test with an in-house t CDF (regularized incomplete beta via
# the Lentz continued fraction).

_CF_MAX_ITER = 300
_CF_EPS = 3e-16
_CF_TINY = 1e-300


def _beta_cont_frac(a: float, b: float, x: float) -> float:
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            break
    return h


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if not 0.0 <= x <= 1.0:
        raise ContractViolation(f"x must be in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cont_frac(a, b, x) / a
    return 1.0 - front * _beta_cont_frac(b, a, 1.0 - x) / b


def student_t_sf2(t: float, df: float) -> float:
    """Two-sided survival P(|T| >= t) for Student's t with df > 0."""
    if df <= 0:
        raise ContractViolation(f"df must be positive, got {df}")
    if math.isinf(t):
        return 0.0
    return regularized_incomplete_beta(0.5 * df, 0.5, df / (df + t * t))


def welch_t_test(a: Sequence[float], b: Sequence[float]) -> StatResult:
    """Unequal-variance two-sample t-test, two-sided.

    Degenerate cases: both samples constant with equal means gives
    (0, p=1); constant with different means gives (inf sign, p=0).
    """
    if len(a) < 2 or len(b) < 2:
        raise ContractViolation("each sample needs at least two observations")
    xa = np.asarray(a, dtype=np.float64)
    xb = np.asarray(b, dtype=np.float64)
    na, nb = len(xa), len(xb)
    va = float(xa.var(ddof=1))
    vb = float(xb.var(ddof=1))
    diff = float(xa.mean() - xb.mean())
    se_sq = va / na + vb / nb
    if se_sq == 0.0:
        if diff == 0.0:
            return StatResult(statistic=0.0, p_value=1.0, n=(na, nb),
                              degenerate=True)
        return StatResult(statistic=math.copysign(math.inf, diff),
                          p_value=0.0, n=(na, nb), degenerate=True)
    t = diff / math.sqrt(se_sq)
    # Welch-Satterthwaite, normalized to avoid underflow for tiny variances:
    # df = 1 / (u^2/(na-1) + v^2/(nb-1)) with u + v = 1.
    u = (va / na) / se_sq
    v = (vb / nb) / se_sq
    df = 1.0 / (u * u / (na - 1) + v * v / (nb - 1))
    return StatResult(statistic=t, p_value=student_t_sf2(t, df), n=(na, nb))
