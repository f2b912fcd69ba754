"""The paragraph-sequence classifier: stacked BiLSTM + linear projection +
linear-chain CRF, trained by exact negative log-likelihood gradients.

All numerics are float64. Training is deterministic for a fixed seed:
initialization, per-epoch shuffles, and gradient reduction order are all
derived from the seed and note order.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from . import crf as crf_ops
from . import lstm
from .errors import ConfigError, ContractViolation, FormatError, TrainingDiverged
from .labels import LabelScheme, SoapLabel, scheme_for_k
from .metrics import evaluate
from .vectorize import NoteMatrix

CHECKPOINT_MAGIC = b"SOAPTAG1"
CHECKPOINT_VERSION = 1

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class Hyperparams:
    batch_size: int = 64
    learning_rate: float = 5e-3
    max_epochs: int = 10
    layers: int = 3
    hidden: int = 128
    grad_clip_norm: float = 5.0
    seed: int = 1

    def __post_init__(self) -> None:
        for name in ("batch_size", "learning_rate", "max_epochs", "layers",
                     "hidden", "grad_clip_norm"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")


@dataclass
class TaggerModel:
    d: int
    k: int
    layers: int
    hidden: int
    params: dict[str, np.ndarray]
    version: int = CHECKPOINT_VERSION

    def copy(self) -> "TaggerModel":
        return replace(self, params={k: v.copy() for k, v in self.params.items()})

    @property
    def scheme(self) -> LabelScheme:
        return scheme_for_k(self.k)

    def crf_params(self) -> crf_ops.CrfParams:
        return crf_ops.CrfParams(trans=self.params["crf.trans"],
                                 start=self.params["crf.start"],
                                 stop=self.params["crf.stop"])


def parameter_shapes(d: int, k: int, layers: int, hidden: int) -> dict[str, tuple]:
    shapes: dict[str, tuple] = {}
    for layer in range(layers):
        din = lstm.layer_input_dim(layer, d, hidden)
        for direction in ("fw", "bw"):
            prefix = f"lstm{layer}.{direction}"
            shapes[f"{prefix}.W"] = (din, 4 * hidden)
            shapes[f"{prefix}.U"] = (hidden, 4 * hidden)
            shapes[f"{prefix}.b"] = (4 * hidden,)
    shapes["proj.W"] = (2 * hidden, k)
    shapes["proj.b"] = (k,)
    shapes["crf.trans"] = (k, k)
    shapes["crf.start"] = (k,)
    shapes["crf.stop"] = (k,)
    return shapes


def _fan_in(name: str, shape: tuple, hidden: int, k: int) -> int:
    if name.startswith("crf."):
        return k
    if name.endswith(".b"):
        return hidden if name.startswith("lstm") else shape[0] if shape else 1
    return shape[0]


def init_model(d: int, k: int, seed: int, layers: int = 3,
               hidden: int = 128) -> TaggerModel:
    """Uniform initialization in [-1/sqrt(fan_in), +1/sqrt(fan_in)]."""
    if k not in (4, 5):
        raise ConfigError(f"label count must be 4 or 5, got {k}")
    rng = np.random.default_rng(np.random.PCG64(seed))
    params: dict[str, np.ndarray] = {}
    for name, shape in parameter_shapes(d, k, layers, hidden).items():
        bound = 1.0 / np.sqrt(_fan_in(name, shape, hidden, k))
        params[name] = rng.uniform(-bound, bound, size=shape)
    return TaggerModel(d=d, k=k, layers=layers, hidden=hidden, params=params)


def _pad_batch(matrices: Sequence[NoteMatrix | np.ndarray]
               ) -> tuple[np.ndarray, np.ndarray, list[int]]:
    arrays = [np.asarray(m.rows if isinstance(m, NoteMatrix) else m,
                         dtype=np.float64) for m in matrices]
    lengths = [a.shape[0] for a in arrays]
    if min(lengths) < 1:
        raise ContractViolation("every note needs at least one paragraph")
    dims = {a.shape[1] for a in arrays}
    if len(dims) != 1:
        raise ContractViolation(f"mixed input dimensions {sorted(dims)}")
    t_max = max(lengths)
    x = np.zeros((len(arrays), t_max, dims.pop()))
    mask = np.zeros((len(arrays), t_max))
    for i, a in enumerate(arrays):
        x[i, :a.shape[0]] = a
        mask[i, :a.shape[0]] = 1.0
    return x, mask, lengths


def _batch_scores(model: TaggerModel, matrices: Sequence[NoteMatrix | np.ndarray]
                  ) -> tuple[np.ndarray, np.ndarray, list[int], np.ndarray, list]:
    x, mask, lengths = _pad_batch(matrices)
    if x.shape[2] != model.d:
        raise ContractViolation(
            f"input dimension {x.shape[2]} != model dimension {model.d}")
    h, caches = lstm.forward(model.params, x, mask, model.layers, model.hidden)
    scores = h @ model.params["proj.W"] + model.params["proj.b"]
    return scores, mask, lengths, h, caches


def forward_scores(model: TaggerModel, x: NoteMatrix | np.ndarray) -> np.ndarray:
    """Per-paragraph label scores S for one note: (n, K)."""
    scores, _, lengths, _, _ = _batch_scores(model, [x])
    return scores[0, :lengths[0]]


def sequence_score(model: TaggerModel, scores: np.ndarray,
                   labels: Sequence[int]) -> float:
    return crf_ops.sequence_score(np.asarray(scores, dtype=np.float64),
                                  model.crf_params(), labels)


def partition(model: TaggerModel, scores: np.ndarray) -> float:
    return crf_ops.partition(np.asarray(scores, dtype=np.float64),
                             model.crf_params())


def viterbi_decode(model: TaggerModel, scores: np.ndarray) -> list[int]:
    return crf_ops.viterbi_decode(np.asarray(scores, dtype=np.float64),
                                  model.crf_params())


def nll_loss(model: TaggerModel, x: NoteMatrix | np.ndarray,
             labels: Sequence[int]) -> float:
    """Sequence negative log-likelihood: log Z - gold path score."""
    scores = forward_scores(model, x)
    crf = model.crf_params()
    return crf_ops.partition(scores, crf) - crf_ops.sequence_score(scores, crf, labels)


def batch_nll_and_grads(model: TaggerModel,
                        matrices: Sequence[NoteMatrix | np.ndarray],
                        labels: Sequence[Sequence[int]]
                        ) -> tuple[float, dict[str, np.ndarray]]:
    """Mean per-note NLL over the batch and gradients for every parameter.

    Padded steps carry no loss and no gradient; the result equals the mean
    of per-note computations (summation order fixed by note index).
    """
    if len(matrices) != len(labels):
        raise ContractViolation("one label sequence per note required")
    scores, mask, lengths, h, caches = _batch_scores(model, matrices)
    crf = model.crf_params()
    batch = len(matrices)
    d_scores = np.zeros_like(scores)
    d_trans = np.zeros_like(crf.trans)
    d_start = np.zeros_like(crf.start)
    d_stop = np.zeros_like(crf.stop)
    loss = 0.0
    for i, (length, y) in enumerate(zip(lengths, labels)):
        if len(y) != length:
            raise ContractViolation(
                f"note {i}: {len(y)} labels for {length} paragraphs")
        nll, ds, dt, da, dz = crf_ops.nll_and_grads(scores[i, :length], crf, y)
        loss += nll
        d_scores[i, :length] = ds
        d_trans += dt
        d_start += da
        d_stop += dz
    scale = 1.0 / batch
    loss *= scale
    d_scores *= scale

    flat_h = h.reshape(-1, h.shape[2])
    flat_ds = d_scores.reshape(-1, d_scores.shape[2])
    grads = {
        "proj.W": flat_h.T @ flat_ds,
        "proj.b": flat_ds.sum(axis=0),
        "crf.trans": d_trans * scale,
        "crf.start": d_start * scale,
        "crf.stop": d_stop * scale,
    }
    d_h = d_scores @ model.params["proj.W"].T
    lstm_grads, _ = lstm.backward(model.params, caches, mask, d_h,
                                  model.layers, model.hidden)
    grads.update(lstm_grads)
    return loss, grads


def backward(model: TaggerModel, x: NoteMatrix | np.ndarray,
             labels: Sequence[int]) -> dict[str, np.ndarray]:
    """Gradients of nll_loss w.r.t. every parameter, for a single note."""
    _, grads = batch_nll_and_grads(model, [x], [labels])
    return grads


def predict(model: TaggerModel, matrices: Sequence[NoteMatrix | np.ndarray],
            eval_batch: int = 128) -> list[list[int]]:
    """Viterbi decode a corpus, batched for the forward pass."""
    out: list[list[int]] = []
    crf = model.crf_params()
    for begin in range(0, len(matrices), eval_batch):
        chunk = matrices[begin:begin + eval_batch]
        scores, _, lengths, _, _ = _batch_scores(model, chunk)
        for i, length in enumerate(lengths):
            out.append(crf_ops.viterbi_decode(scores[i, :length], crf))
    return out


# --------------------------------------------------------------------------
# Optimization


class AdamState:
    """Per-parameter adaptive-moment optimizer with global-norm clipping."""

    def __init__(self, params: Mapping[str, np.ndarray], learning_rate: float,
                 clip_norm: float):
        self.lr = learning_rate
        self.clip = clip_norm
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict[str, np.ndarray],
             grads: Mapping[str, np.ndarray]) -> None:
        norm_sq = 0.0
        for name in sorted(grads):
            norm_sq += float(np.sum(grads[name] * grads[name]))
        norm = np.sqrt(norm_sq)
        scale = self.clip / norm if norm > self.clip else 1.0
        self.t += 1
        bc1 = 1.0 - ADAM_BETA1 ** self.t
        bc2 = 1.0 - ADAM_BETA2 ** self.t
        for name, g in grads.items():
            g = g * scale
            self.m[name] = ADAM_BETA1 * self.m[name] + (1 - ADAM_BETA1) * g
            self.v[name] = ADAM_BETA2 * self.v[name] + (1 - ADAM_BETA2) * g * g
            params[name] -= self.lr * (self.m[name] / bc1) / (
                np.sqrt(self.v[name] / bc2) + ADAM_EPS)


@dataclass
class EpochLog:
    epoch: int
    train_loss: float
    val_macro_f1: Optional[float] = None
    is_best: bool = False


def train(model: TaggerModel,
          train_matrices: Sequence[NoteMatrix | np.ndarray],
          train_labels: Sequence[Sequence[int]],
          hyper: Hyperparams,
          validation: Optional[tuple[Sequence[NoteMatrix | np.ndarray],
                                     Sequence[Sequence[int]]]] = None
          ) -> tuple[TaggerModel, list[EpochLog]]:
    """Mini-batch NLL training; returns the best-validation checkpoint.

    Deterministic for a fixed hyper.seed: the shuffle permutation of each
    epoch comes from one seeded generator. Without a validation set the
    final-epoch parameters are returned.
    """
    if len(train_matrices) == 0:
        raise ContractViolation("training set must be nonempty")
    model = model.copy()
    rng = np.random.default_rng(np.random.PCG64(hyper.seed))
    adam = AdamState(model.params, hyper.learning_rate, hyper.grad_clip_norm)
    label_set = list(range(model.k))
    log: list[EpochLog] = []
    best_f1 = -1.0
    best_params: Optional[dict[str, np.ndarray]] = None
    n = len(train_matrices)
    for epoch in range(1, hyper.max_epochs + 1):
        perm = rng.permutation(n)
        total = 0.0
        for batch_idx, begin in enumerate(range(0, n, hyper.batch_size)):
            idx = perm[begin:begin + hyper.batch_size]
            loss, grads = batch_nll_and_grads(
                model, [train_matrices[i] for i in idx],
                [train_labels[i] for i in idx])
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, batch {batch_idx}")
            adam.step(model.params, grads)
            total += loss * len(idx)
        entry = EpochLog(epoch=epoch, train_loss=total / n)
        if validation is not None:
            preds = predict(model, validation[0])
            entry.val_macro_f1 = evaluate(preds, validation[1], label_set).macro_f1
            if entry.val_macro_f1 > best_f1:
                best_f1 = entry.val_macro_f1
                best_params = {k: v.copy() for k, v in model.params.items()}
                entry.is_best = True
        log.append(entry)
    if best_params is not None:
        model.params = best_params
    return model, log


# --------------------------------------------------------------------------
# Transfer initialization


def transfer_init(source: TaggerModel,
                  label_map: Mapping[SoapLabel, SoapLabel]) -> TaggerModel:
    """Warm-start a target model from trained source parameters.

    label_map sends each source label to a target label (possibly merging
    several sources into one). Recurrent weights copy verbatim; projection
    columns, bias entries, transitions, and boundary vectors for a target
    label average over its mapped source labels.
    """
    src_scheme = source.scheme
    targets = []
    for lab in label_map.values():
        if lab not in targets:
            targets.append(lab)
    try:
        tgt_scheme = scheme_for_k(len(targets))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    for lab in tgt_scheme:
        if lab not in targets:
            raise ConfigError(f"target label {lab.name} has no mapped source label")
    for lab in targets:
        if lab not in tgt_scheme:
            raise ConfigError(f"mapped label {lab.name} not in the "
                              f"{tgt_scheme.size}-class scheme")

    sources_of: dict[SoapLabel, list[int]] = {lab: [] for lab in tgt_scheme}
    for src_lab in src_scheme:
        if src_lab not in label_map:
            raise ConfigError(f"source label {src_lab.name} is unmapped")
        sources_of[label_map[src_lab]].append(src_scheme.index(src_lab))

    k_tgt = tgt_scheme.size
    params = {name: arr.copy() for name, arr in source.params.items()
              if name.startswith("lstm")}
    src_w, src_b = source.params["proj.W"], source.params["proj.b"]
    src_t = source.params["crf.trans"]
    src_start, src_stop = source.params["crf.start"], source.params["crf.stop"]

    proj_w = np.zeros((src_w.shape[0], k_tgt))
    proj_b = np.zeros(k_tgt)
    start = np.zeros(k_tgt)
    stop = np.zeros(k_tgt)
    trans = np.zeros((k_tgt, k_tgt))
    for a, lab_a in enumerate(tgt_scheme):
        rows = sources_of[lab_a]
        proj_w[:, a] = src_w[:, rows].mean(axis=1)
        proj_b[a] = src_b[rows].mean()
        start[a] = src_start[rows].mean()
        stop[a] = src_stop[rows].mean()
        for b, lab_b in enumerate(tgt_scheme):
            cols = sources_of[lab_b]
            trans[a, b] = src_t[np.ix_(rows, cols)].mean()
    params.update({"proj.W": proj_w, "proj.b": proj_b, "crf.trans": trans,
                   "crf.start": start, "crf.stop": stop})
    return TaggerModel(d=source.d, k=k_tgt, layers=source.layers,
                       hidden=source.hidden, params=params)


# --------------------------------------------------------------------------
# Checkpoint serialization


def save_model(model: TaggerModel, path: str | Path) -> None:
    """Versioned little-endian binary checkpoint; load is bit-identical."""
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<5I", CHECKPOINT_VERSION, model.d, model.k,
                             model.layers, model.hidden))
        names = sorted(model.params)
        fh.write(struct.pack("<I", len(names)))
        for name in names:
            arr = np.ascontiguousarray(model.params[name], dtype=np.float64)
            name_bytes = name.encode("utf-8")
            fh.write(struct.pack("<H", len(name_bytes)))
            fh.write(name_bytes)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}q", *arr.shape))
            fh.write(arr.astype("<f8").tobytes())


def load_model(path: str | Path) -> TaggerModel:
    data = Path(path).read_bytes()
    offset = 0

    def take(n: int, what: str) -> bytes:
        nonlocal offset
        if offset + n > len(data):
            raise FormatError(f"{path}: truncated {what} at offset {offset}")
        chunk = data[offset:offset + n]
        offset += n
        return chunk

    if take(8, "magic") != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: bad magic, not a tagger checkpoint")
    version, d, k, layers, hidden = struct.unpack("<5I", take(20, "header"))
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    count = struct.unpack("<I", take(4, "tensor count"))[0]
    params: dict[str, np.ndarray] = {}
    for _ in range(count):
        name_len = struct.unpack("<H", take(2, "tensor name length"))[0]
        name = take(name_len, "tensor name").decode("utf-8")
        ndim = struct.unpack("<B", take(1, "tensor rank"))[0]
        shape = struct.unpack(f"<{ndim}q", take(8 * ndim, "tensor shape"))
        size = int(np.prod(shape)) if ndim else 1
        raw = take(8 * size, f"tensor data for {name!r}")
        params[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
    if offset != len(data):
        raise FormatError(f"{path}: {len(data) - offset} trailing bytes")
    expected = parameter_shapes(d, k, layers, hidden)
    if set(params) != set(expected):
        raise FormatError(f"{path}: tensor set does not match header dimensions")
    for name, shape in expected.items():
        if params[name].shape != shape:
            raise FormatError(
                f"{path}: tensor {name!r} has shape {params[name].shape}, "
                f"expected {shape}")
    return TaggerModel(d=d, k=k, layers=layers, hidden=hidden, params=params,
                       version=version)
