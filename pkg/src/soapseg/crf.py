"""Linear-chain CRF on top of per-paragraph label scores.

A label sequence y for an n-paragraph note is scored in log space as

    start[y_0] + sum_i S[i, y_i] + sum_i trans[y_i, y_{i+1}] + stop[y_{n-1}]

with emissions S (n x K), learned transition matrix trans (K x K, entry
[j, k] scoring j -> k), and boundary vectors start/stop. The partition
function uses the forward algorithm with log-sum-exp stabilization; decoding
is exact dynamic programming with ties broken toward the lowest label index.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ContractViolation


@dataclass
class CrfParams:
    trans: np.ndarray  # (K, K)
    start: np.ndarray  # (K,)
    stop: np.ndarray   # (K,)

    @property
    def k(self) -> int:
        return self.start.shape[0]


def _check(scores: np.ndarray, crf: CrfParams) -> None:
    if scores.ndim != 2 or scores.shape[0] < 1:
        raise ContractViolation(f"scores must be (n>=1, K), got {scores.shape}")
    k = crf.k
    if scores.shape[1] != k or crf.trans.shape != (k, k) or crf.stop.shape != (k,):
        raise ContractViolation("inconsistent CRF shapes")


def _logsumexp(a: np.ndarray, axis: int = -1) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    out = m.squeeze(axis) + np.log(np.sum(np.exp(a - m), axis=axis))
    return out


def sequence_score(scores: np.ndarray, crf: CrfParams,
                   labels: Sequence[int]) -> float:
    """Log-space score of one label sequence."""
    _check(scores, crf)
    y = np.asarray(labels, dtype=np.intp)
    n, k = scores.shape
    if y.shape != (n,):
        raise ContractViolation(f"{y.shape[0]} labels for {n} rows")
    if y.min() < 0 or y.max() >= k:
        raise ContractViolation("label index out of range")
    total = crf.start[y[0]] + crf.stop[y[-1]] + scores[np.arange(n), y].sum()
    if n > 1:
        total += crf.trans[y[:-1], y[1:]].sum()
    return float(total)


def partition(scores: np.ndarray, crf: CrfParams) -> float:
    """log Z: log-sum over all label sequences of exp(sequence score)."""
    _check(scores, crf)
    alpha = crf.start + scores[0]
    for t in range(1, scores.shape[0]):
        alpha = _logsumexp(alpha[:, None] + crf.trans, axis=0) + scores[t]
    return float(_logsumexp(alpha + crf.stop))


def viterbi_decode(scores: np.ndarray, crf: CrfParams) -> list[int]:
    """Exact argmax decoding; ties resolve to the lowest label index."""
    _check(scores, crf)
    n, k = scores.shape
    delta = crf.start + scores[0]
    backptr = np.zeros((n, k), dtype=np.intp)
    for t in range(1, n):
        cand = delta[:, None] + crf.trans          # (from, to)
        backptr[t] = np.argmax(cand, axis=0)       # first max = lowest index
        delta = cand[backptr[t], np.arange(k)] + scores[t]
    last = int(np.argmax(delta + crf.stop))
    path = [last]
    for t in range(n - 1, 0, -1):
        last = int(backptr[t, last])
        path.append(last)
    path.reverse()
    return path


def forward_backward(scores: np.ndarray, crf: CrfParams
                     ) -> tuple[float, np.ndarray, np.ndarray]:
    """Return (log Z, unary marginals (n,K), pairwise marginal sums (K,K)).

    The pairwise matrix accumulates P(y_t = j, y_{t+1} = k) over all t.
    """
    _check(scores, crf)
    n, k = scores.shape
    log_alpha = np.zeros((n, k))
    log_alpha[0] = crf.start + scores[0]
    for t in range(1, n):
        log_alpha[t] = _logsumexp(log_alpha[t - 1][:, None] + crf.trans, axis=0) + scores[t]
    log_z = float(_logsumexp(log_alpha[-1] + crf.stop))

    log_beta = np.zeros((n, k))
    log_beta[-1] = crf.stop
    for t in range(n - 2, -1, -1):
        log_beta[t] = _logsumexp(crf.trans + (scores[t + 1] + log_beta[t + 1])[None, :], axis=1)

    unary = np.exp(log_alpha + log_beta - log_z)
    pairwise = np.zeros((k, k))
    for t in range(n - 1):
        log_xi = (log_alpha[t][:, None] + crf.trans
                  + (scores[t + 1] + log_beta[t + 1])[None, :] - log_z)
        pairwise += np.exp(log_xi)
    return log_z, unary, pairwise


def nll_and_grads(scores: np.ndarray, crf: CrfParams, labels: Sequence[int]
                  ) -> tuple[float, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Negative log-likelihood of the gold sequence and its gradients.

    Returns (nll, d_scores, d_trans, d_start, d_stop) where each gradient
    is expectation-under-the-model minus gold count.
    """
    y = np.asarray(labels, dtype=np.intp)
    log_z, unary, pairwise = forward_backward(scores, crf)
    gold = sequence_score(scores, crf, y)
    n, k = scores.shape

    d_scores = unary.copy()
    d_scores[np.arange(n), y] -= 1.0
    d_trans = pairwise
    if n > 1:
        np.add.at(d_trans, (y[:-1], y[1:]), -1.0)
    d_start = unary[0].copy()
    d_start[y[0]] -= 1.0
    d_stop = unary[-1].copy()
    d_stop[y[-1]] -= 1.0
    return log_z - gold, d_scores, d_trans, d_start, d_stop
