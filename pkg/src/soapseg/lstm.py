"""Stacked bidirectional LSTM over padded batches, with exact backprop.

Batches are (B, T, D) float64 arrays plus a (B, T) mask of 1.0 for real
steps and 0.0 for padding. State updates are gated by the mask so that a
padded batch computes exactly what per-note computation would: in the
forward direction padding trails the sequence and its states are never
consumed; in the reverse direction padding is processed first and the
mask holds the carried state at the zero initial value until the first
real step.

Gate layout along the 4H axis is [input, forget, candidate, output].
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import ContractViolation


def sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(x, -500.0, 500.0)))


def layer_param_names(layers: int) -> Iterator[str]:
    for layer in range(layers):
        for direction in ("fw", "bw"):
            for tensor in ("W", "U", "b"):
                yield f"lstm{layer}.{direction}.{tensor}"


def layer_input_dim(layer: int, input_dim: int, hidden: int) -> int:
    return input_dim if layer == 0 else 2 * hidden


@dataclass
class _DirectionCache:
    inp: np.ndarray      # (B, T, Din) layer input
    acts: np.ndarray     # (B, T, 4H) activated gates [i, f, g, o]
    tanh_c: np.ndarray   # (B, T, H) tanh of the candidate cell state
    c_eff: np.ndarray    # (B, T, H) mask-gated cell state
    h_eff: np.ndarray    # (B, T, H) mask-gated hidden state
    order: list[int]     # processing order of time steps


def _direction_forward(inp: np.ndarray, mask: np.ndarray, w: np.ndarray,
                       u: np.ndarray, b: np.ndarray, reverse: bool) -> _DirectionCache:
    batch, steps, _ = inp.shape
    hidden = u.shape[0]
    acts = np.zeros((batch, steps, 4 * hidden))
    tanh_c = np.zeros((batch, steps, hidden))
    c_eff = np.zeros((batch, steps, hidden))
    h_eff = np.zeros((batch, steps, hidden))
    h = np.zeros((batch, hidden))
    c = np.zeros((batch, hidden))
    order = list(range(steps - 1, -1, -1)) if reverse else list(range(steps))
    for t in order:
        a = inp[:, t, :] @ w + h @ u + b
        gate_i = sigmoid(a[:, :hidden])
        gate_f = sigmoid(a[:, hidden:2 * hidden])
        gate_g = np.tanh(a[:, 2 * hidden:3 * hidden])
        gate_o = sigmoid(a[:, 3 * hidden:])
        c_hat = gate_f * c + gate_i * gate_g
        th = np.tanh(c_hat)
        h_hat = gate_o * th
        m = mask[:, t][:, None]
        h = m * h_hat + (1.0 - m) * h
        c = m * c_hat + (1.0 - m) * c
        acts[:, t, :hidden] = gate_i
        acts[:, t, hidden:2 * hidden] = gate_f
        acts[:, t, 2 * hidden:3 * hidden] = gate_g
        acts[:, t, 3 * hidden:] = gate_o
        tanh_c[:, t] = th
        c_eff[:, t] = c
        h_eff[:, t] = h
    return _DirectionCache(inp=inp, acts=acts, tanh_c=tanh_c, c_eff=c_eff,
                           h_eff=h_eff, order=order)


def _direction_backward(cache: _DirectionCache, mask: np.ndarray,
                        w: np.ndarray, u: np.ndarray, d_h: np.ndarray
                        ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Backprop one direction; d_h is the gradient w.r.t. h_eff per step."""
    batch, steps, _ = cache.inp.shape
    hidden = u.shape[0]
    d_w = np.zeros_like(w)
    d_u = np.zeros_like(u)
    d_b = np.zeros(4 * hidden)
    d_inp = np.zeros_like(cache.inp)
    dh_rec = np.zeros((batch, hidden))
    dc = np.zeros((batch, hidden))
    zeros = np.zeros((batch, hidden))
    order = cache.order
    for idx in range(steps - 1, -1, -1):
        t = order[idx]
        prev_t = order[idx - 1] if idx > 0 else None
        h_prev = cache.h_eff[:, prev_t] if prev_t is not None else zeros
        c_prev = cache.c_eff[:, prev_t] if prev_t is not None else zeros
        gate_i = cache.acts[:, t, :hidden]
        gate_f = cache.acts[:, t, hidden:2 * hidden]
        gate_g = cache.acts[:, t, 2 * hidden:3 * hidden]
        gate_o = cache.acts[:, t, 3 * hidden:]
        th = cache.tanh_c[:, t]
        m = mask[:, t][:, None]

        dh_eff = d_h[:, t, :] + dh_rec
        dh_hat = m * dh_eff
        dh_carry = (1.0 - m) * dh_eff
        d_o = dh_hat * th
        dc_hat = dh_hat * gate_o * (1.0 - th * th) + m * dc
        dc_carry = (1.0 - m) * dc
        d_i = dc_hat * gate_g
        d_f = dc_hat * c_prev
        d_g = dc_hat * gate_i

        da = np.empty((batch, 4 * hidden))
        da[:, :hidden] = d_i * gate_i * (1.0 - gate_i)
        da[:, hidden:2 * hidden] = d_f * gate_f * (1.0 - gate_f)
        da[:, 2 * hidden:3 * hidden] = d_g * (1.0 - gate_g * gate_g)
        da[:, 3 * hidden:] = d_o * gate_o * (1.0 - gate_o)

        d_w += cache.inp[:, t, :].T @ da
        d_u += h_prev.T @ da
        d_b += da.sum(axis=0)
        d_inp[:, t, :] = da @ w.T
        dh_rec = da @ u.T + dh_carry
        dc = dc_hat * gate_f + dc_carry
    return d_inp, d_w, d_u, d_b


def forward(params: dict[str, np.ndarray], x: np.ndarray, mask: np.ndarray,
            layers: int, hidden: int) -> tuple[np.ndarray, list]:
    """Run the stack; returns (H, cache) with H of shape (B, T, 2*hidden)."""
    if x.ndim != 3 or mask.shape != x.shape[:2]:
        raise ContractViolation(
            f"expected x (B,T,D) with matching mask, got {x.shape} / {mask.shape}")
    caches = []
    inp = x
    for layer in range(layers):
        layer_caches = {}
        outputs = []
        for direction in ("fw", "bw"):
            prefix = f"lstm{layer}.{direction}"
            cache = _direction_forward(inp, mask, params[f"{prefix}.W"],
                                       params[f"{prefix}.U"], params[f"{prefix}.b"],
                                       reverse=direction == "bw")
            layer_caches[direction] = cache
            outputs.append(cache.h_eff)
        caches.append(layer_caches)
        inp = np.concatenate(outputs, axis=2)
    return inp, caches


def backward(params: dict[str, np.ndarray], caches: list, mask: np.ndarray,
             d_out: np.ndarray, layers: int, hidden: int
             ) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """Backprop through the stack; d_out matches forward's H output."""
    grads: dict[str, np.ndarray] = {}
    d_h = d_out
    for layer in range(layers - 1, -1, -1):
        d_inp_total = None
        for di, direction in enumerate(("fw", "bw")):
            prefix = f"lstm{layer}.{direction}"
            cache = caches[layer][direction]
            d_dir = d_h[:, :, di * hidden:(di + 1) * hidden]
            d_inp, d_w, d_u, d_b = _direction_backward(
                cache, mask, params[f"{prefix}.W"], params[f"{prefix}.U"], d_dir)
            grads[f"{prefix}.W"] = d_w
            grads[f"{prefix}.U"] = d_u
            grads[f"{prefix}.b"] = d_b
            d_inp_total = d_inp if d_inp_total is None else d_inp_total + d_inp
        d_h = d_inp_total
    return grads, d_h
