"""Experiment protocols behind the CLI: weak-supervised training with
cross-style evaluation, transfer vs. random initialization at several
target train sizes, weak-train-size ablation, and stage timing.

Every protocol consumes one ExperimentConfig and produces one RunRecord.
Records are reproducible: rerunning a config (same seeds) yields identical
metrics; only the wall-clock timing fields may differ.
"""
from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import tagger as tg
from .corpus import GeneratorConfig, LabeledNote, generate_corpus, read_corpus
from .errors import ConfigError, ContractViolation
from .labels import (MERGE_AP_MAP, SCHEME_SOAP4, SCHEME_SOAP5, LabelScheme,
                     SoapLabel, merge_assessment_plan, scheme_for_k)
from .metrics import EvalReport, evaluate, spearman_rho, welch_t_test
from .styles import builtin_style
from .vectorize import (DEFAULT_DIM, FileProvider, HashedProvider, NoteMatrix,
                        vectorize_corpus)
from .weaklabel import build_weak_corpus

# Desk-scale corpora get far fewer gradient updates per epoch than the
# original batch size of 64 was tuned for; 16 keeps 10-epoch runs trainable.
DEFAULT_PROTOCOL_BATCH = 16

DEFAULT_SEEDS = [1, 2, 3]
DEFAULT_TRANSFER_SIZES: list = [10, 25, 50, "full"]
DEFAULT_ABLATION_SIZES = [10, 50, 100, 200]


@dataclass
class CorpusSpec:
    """Where a corpus comes from: a JSONL path or a builtin/inline generator."""

    path: Optional[str] = None
    style: Optional[str] = None
    generator: Optional[GeneratorConfig] = None
    n: int = 200
    seed: int = 0

    def to_json(self) -> dict:
        out: dict = {"n": self.n, "seed": self.seed}
        if self.path:
            out["path"] = self.path
        if self.style:
            out["style"] = self.style
        if self.generator:
            out["generator"] = self.generator.to_json()
        return out

    @classmethod
    def from_json(cls, data: dict) -> "CorpusSpec":
        gen = data.get("generator")
        return cls(path=data.get("path"), style=data.get("style"),
                   generator=GeneratorConfig.from_json(gen) if gen else None,
                   n=data.get("n", 200), seed=data.get("seed", 0))

    def load(self) -> list[LabeledNote]:
        """Materialize gold-labeled notes."""
        if self.path:
            notes = read_corpus(self.path)
            if not all(isinstance(n, LabeledNote) for n in notes):
                raise ConfigError(f"{self.path}: corpus is not fully labeled")
            return notes
        if self.generator is not None:
            return generate_corpus(self.generator, self.n)[1]
        if self.style:
            return generate_corpus(builtin_style(self.style, seed=self.seed), self.n)[1]
        raise ConfigError("corpus spec needs a path, style, or generator")


@dataclass
class ExperimentConfig:
    train_corpus: CorpusSpec
    eval_corpora: dict[str, CorpusSpec] = field(default_factory=dict)
    provider: str = "hashed"
    embeddings_path: Optional[str] = None
    dim: int = DEFAULT_DIM
    hyper: tg.Hyperparams = field(
        default_factory=lambda: tg.Hyperparams(batch_size=DEFAULT_PROTOCOL_BATCH))
    seeds: list[int] = field(default_factory=lambda: list(DEFAULT_SEEDS))
    train_sizes: list = field(default_factory=lambda: list(DEFAULT_TRANSFER_SIZES))
    source_checkpoint: Optional[str] = None
    out_dir: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.seeds:
            raise ConfigError("seeds must be nonempty")

    def to_json(self) -> dict:
        h = self.hyper
        return {
            "train_corpus": self.train_corpus.to_json(),
            "eval_corpora": {k: v.to_json() for k, v in self.eval_corpora.items()},
            "provider": self.provider,
            "embeddings_path": self.embeddings_path,
            "dim": self.dim,
            "hyper": {"batch_size": h.batch_size, "learning_rate": h.learning_rate,
                      "max_epochs": h.max_epochs, "layers": h.layers,
                      "hidden": h.hidden, "grad_clip_norm": h.grad_clip_norm,
                      "seed": h.seed},
            "seeds": self.seeds,
            "train_sizes": self.train_sizes,
            "source_checkpoint": self.source_checkpoint,
        }

    @classmethod
    def from_json(cls, data: dict) -> "ExperimentConfig":
        hyper_data = dict(data.get("hyper", {}))
        hyper_data.setdefault("batch_size", DEFAULT_PROTOCOL_BATCH)
        return cls(
            train_corpus=CorpusSpec.from_json(data["train_corpus"]),
            eval_corpora={k: CorpusSpec.from_json(v)
                          for k, v in data.get("eval_corpora", {}).items()},
            provider=data.get("provider", "hashed"),
            embeddings_path=data.get("embeddings_path"),
            dim=data.get("dim", DEFAULT_DIM),
            hyper=tg.Hyperparams(**hyper_data),
            seeds=list(data.get("seeds", DEFAULT_SEEDS)),
            train_sizes=list(data.get("train_sizes", DEFAULT_TRANSFER_SIZES)),
            source_checkpoint=data.get("source_checkpoint"),
            out_dir=data.get("out_dir"),
        )

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_json(json.loads(Path(path).read_text("utf-8")))

    def config_hash(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]

    def make_provider(self):
        if self.provider == "hashed":
            return HashedProvider(self.dim)
        if self.provider == "file":
            if not self.embeddings_path:
                raise ConfigError("provider 'file' needs embeddings_path")
            return FileProvider(self.embeddings_path)
        raise ConfigError(f"unknown provider {self.provider!r}")


@dataclass
class RunRecord:
    protocol: str
    config_hash: str
    config: dict
    metrics: dict
    timing: dict[str, float] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"protocol": self.protocol, "config_hash": self.config_hash,
                "config": self.config, "metrics": self.metrics,
                "timing": self.timing}

    def json_without_timing(self) -> str:
        data = self.to_json()
        data.pop("timing")
        return json.dumps(data, sort_keys=True)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True),
                              encoding="utf-8")


class _StageClock:
    def __init__(self) -> None:
        self.times: dict[str, float] = {}

    def stage(self, name: str):
        clock = self

        class _Ctx:
            def __enter__(self_inner):
                self_inner.t0 = time.perf_counter()
                return self_inner

            def __exit__(self_inner, *exc):
                clock.times[name] = clock.times.get(name, 0.0) + (
                    time.perf_counter() - self_inner.t0)
                return False

        return _Ctx()


def split_indices(n: int, seed: int) -> tuple[list[int], list[int], list[int]]:
    """Deterministic 80/10/10 split by seeded shuffle."""
    rng = np.random.default_rng(np.random.PCG64(seed))
    perm = [int(i) for i in rng.permutation(n)]
    n_train = int(n * 0.8)
    n_val = int(n * 0.1)
    return (perm[:n_train], perm[n_train:n_train + n_val], perm[n_train + n_val:])


def nested_subsample(indices: Sequence[int], size: int, seed: int) -> list[int]:
    """Prefix-nested subsample: size k is a prefix of size k' > k."""
    if size > len(indices):
        raise ConfigError(f"train size {size} exceeds corpus size {len(indices)}")
    rng = np.random.default_rng(np.random.PCG64(seed))
    order = rng.permutation(len(indices))
    return [int(indices[i]) for i in order[:size]]


def _scheme_of(notes: Sequence[LabeledNote]) -> LabelScheme:
    merged = any(SoapLabel.ASSESSMENT_AND_PLAN in n.labels for n in notes)
    return SCHEME_SOAP4 if merged else SCHEME_SOAP5


def _report_json(report: EvalReport, scheme: LabelScheme) -> dict:
    """EvalReport JSON with scheme display names instead of tag indices."""
    data = report.to_json()
    data["labels"] = [lab.display for lab in scheme]
    data["per_class"] = {lab.display: data["per_class"][str(i)]
                         for i, lab in enumerate(scheme)}
    return data


def _eval_cross_scheme(model: tg.TaggerModel, matrices: Sequence[NoteMatrix],
                       notes: Sequence[LabeledNote],
                       scheme: LabelScheme) -> EvalReport:
    """Evaluate a model on a corpus, projecting 5-class predictions to the
    merged 4-class space when the gold labels use it."""
    preds_idx = tg.predict(model, matrices)
    model_scheme = model.scheme
    pred_labels = [model_scheme.decode(seq) for seq in preds_idx]
    if scheme.size == 4 and model_scheme.size == 5:
        pred_labels = [merge_assessment_plan(seq) for seq in pred_labels]
    if scheme.size == 5 and model_scheme.size == 4:
        raise ContractViolation("cannot evaluate a 4-class model on 5-class gold")
    return evaluate([scheme.encode(seq) for seq in pred_labels],
                    [scheme.encode(n.labels) for n in notes],
                    list(range(scheme.size)))


def _train_once(matrices, labels, k: int, dim: int, hyper: tg.Hyperparams,
                seed: int, validation, init: Optional[tg.TaggerModel] = None
                ) -> tuple[tg.TaggerModel, list[tg.EpochLog]]:
    run_hyper = tg.Hyperparams(batch_size=hyper.batch_size,
                               learning_rate=hyper.learning_rate,
                               max_epochs=hyper.max_epochs, layers=hyper.layers,
                               hidden=hyper.hidden,
                               grad_clip_norm=hyper.grad_clip_norm, seed=seed)
    model = init if init is not None else tg.init_model(
        dim, k, seed=seed, layers=hyper.layers, hidden=hyper.hidden)
    return tg.train(model, matrices, labels, run_hyper, validation)


def run_weak_train(config: ExperimentConfig) -> RunRecord:
    """Weak-label the train corpus, train per seed on an 80/10/10 split, and
    evaluate on the weak test split plus every configured gold corpus."""
    clock = _StageClock()
    with clock.stage("preprocess"):
        gold_train = config.train_corpus.load()
        weak, weak_report = build_weak_corpus([n.note for n in gold_train])
        if not weak:
            raise ConfigError("no explicitly structured notes to weak-label")
        evals = {name: spec.load() for name, spec in config.eval_corpora.items()}
    provider = config.make_provider()
    with clock.stage("vectorize"):
        mats = vectorize_corpus(weak, provider)
        eval_mats = {name: vectorize_corpus(notes, provider)
                     for name, notes in evals.items()}
    scheme = SCHEME_SOAP5
    enc = [scheme.encode(n.labels) for n in weak]
    tr, va, te = split_indices(len(weak), seed=config.seeds[0])

    per_seed: dict = {}
    models: dict[int, tg.TaggerModel] = {}
    with clock.stage("train"):
        for seed in config.seeds:
            model, log = _train_once(
                [mats[i] for i in tr], [enc[i] for i in tr], scheme.size,
                provider.dim, config.hyper, seed,
                validation=([mats[i] for i in va], [enc[i] for i in va]))
            models[seed] = model
            per_seed[str(seed)] = {
                "epochs": [{"epoch": e.epoch, "train_loss": e.train_loss,
                            "val_macro_f1": e.val_macro_f1} for e in log],
            }
    with clock.stage("predict"):
        for seed in config.seeds:
            model = models[seed]
            test_report = evaluate(
                tg.predict(model, [mats[i] for i in te]),
                [enc[i] for i in te], list(range(scheme.size)))
            per_seed[str(seed)]["weak_test"] = _report_json(test_report, scheme)
            per_seed[str(seed)]["gold_evals"] = {
                name: _report_json(
                    _eval_cross_scheme(model, eval_mats[name], notes,
                                       _scheme_of(notes)), _scheme_of(notes))
                for name, notes in evals.items()}

    weak_test_f1 = [per_seed[str(s)]["weak_test"]["macro_f1"] for s in config.seeds]
    metrics = {
        "weak_report": {"total": weak_report.total, "retained": weak_report.retained},
        "split_sizes": {"train": len(tr), "val": len(va), "test": len(te)},
        "per_seed": per_seed,
        "weak_test_macro_f1": {"mean": float(np.mean(weak_test_f1)),
                               "std": float(np.std(weak_test_f1))},
    }
    for name in evals:
        f1s = [per_seed[str(s)]["gold_evals"][name]["macro_f1"] for s in config.seeds]
        metrics.setdefault("gold_macro_f1", {})[name] = {
            "mean": float(np.mean(f1s)), "std": float(np.std(f1s))}
    return RunRecord(protocol="weak_train", config_hash=config.config_hash(),
                     config=config.to_json(), metrics=metrics, timing=clock.times)


def train_weak_source(config: ExperimentConfig, seed: int
                      ) -> tuple[tg.TaggerModel, HashedProvider]:
    """Train one weak-supervised source model (for transfer protocols)."""
    gold_train = config.train_corpus.load()
    weak, _ = build_weak_corpus([n.note for n in gold_train])
    provider = config.make_provider()
    mats = vectorize_corpus(weak, provider)
    enc = [SCHEME_SOAP5.encode(n.labels) for n in weak]
    tr, va, _ = split_indices(len(weak), seed=config.seeds[0])
    model, _ = _train_once([mats[i] for i in tr], [enc[i] for i in tr], 5,
                           provider.dim, config.hyper, seed,
                           validation=([mats[i] for i in va], [enc[i] for i in va]))
    return model, provider


def resolve_size(size, n: int) -> int:
    if size == "full":
        return n
    if not isinstance(size, int) or size < 1:
        raise ConfigError(f"bad train size {size!r}")
    if size > n:
        raise ConfigError(f"train size {size} exceeds corpus size {n}")
    return size


def run_transfer_comparison(config: ExperimentConfig,
                            sources: Optional[dict[int, tg.TaggerModel]] = None
                            ) -> RunRecord:
    """Transfer vs. random initialization on the target corpus.

    For each train size and seed, trains both arms on the same nested
    subsample and reports mean/std macro-F1 per arm, the transfer minus
    finetune delta, and a Welch p-value per size.
    """
    if "target" not in config.eval_corpora:
        raise ConfigError("transfer comparison needs an eval corpus named 'target'")
    clock = _StageClock()
    with clock.stage("source"):
        if sources is None:
            if config.source_checkpoint:
                shared = tg.load_model(config.source_checkpoint)
                sources = {seed: shared for seed in config.seeds}
            else:
                sources = {seed: train_weak_source(config, seed)[0]
                           for seed in config.seeds}
    provider = config.make_provider()
    with clock.stage("preprocess"):
        target = config.eval_corpora["target"].load()
        scheme = _scheme_of(target)
        if scheme.size != 4:
            raise ConfigError("transfer target is expected to use the merged scheme")
    with clock.stage("vectorize"):
        mats = vectorize_corpus(target, provider)
    enc = [scheme.encode(n.labels) for n in target]
    tr, va, te = split_indices(len(target), seed=config.seeds[0])
    validation = ([mats[i] for i in va], [enc[i] for i in va])
    test_m = [mats[i] for i in te]
    test_y = [enc[i] for i in te]

    rows = []
    with clock.stage("train"):
        for size_spec in config.train_sizes:
            size = resolve_size(size_spec, len(tr))
            arm_f1: dict[str, list[float]] = {"finetune": [], "transfer": []}
            for seed in config.seeds:
                sub = nested_subsample(tr, size, seed=seed)
                sub_m = [mats[i] for i in sub]
                sub_y = [enc[i] for i in sub]
                for arm in ("finetune", "transfer"):
                    if arm == "transfer":
                        source = sources[seed]
                        label_map = (MERGE_AP_MAP if source.k == 5
                                     else {lab: lab for lab in source.scheme})
                        init = tg.transfer_init(source, label_map)
                    else:
                        init = None
                    model, _ = _train_once(sub_m, sub_y, scheme.size,
                                           provider.dim, config.hyper, seed,
                                           validation, init=init)
                    report = evaluate(tg.predict(model, test_m), test_y,
                                      list(range(scheme.size)))
                    arm_f1[arm].append(100.0 * report.macro_f1)
            p_value = (welch_t_test(arm_f1["transfer"], arm_f1["finetune"]).p_value
                       if len(config.seeds) >= 2 else None)
            rows.append({
                "size": size, "size_spec": str(size_spec),
                "finetune_mean": float(np.mean(arm_f1["finetune"])),
                "finetune_std": float(np.std(arm_f1["finetune"])),
                "transfer_mean": float(np.mean(arm_f1["transfer"])),
                "transfer_std": float(np.std(arm_f1["transfer"])),
                "delta": float(np.mean(arm_f1["transfer"]) - np.mean(arm_f1["finetune"])),
                "p_value": p_value,
                "per_seed": arm_f1,
            })
    metrics = {"table": rows,
               "split_sizes": {"train": len(tr), "val": len(va), "test": len(te)}}
    return RunRecord(protocol="transfer_comparison",
                     config_hash=config.config_hash(), config=config.to_json(),
                     metrics=metrics, timing=clock.times)


def run_size_ablation(config: ExperimentConfig) -> RunRecord:
    """Train on nested subsamples of the weak train split at several sizes
    and correlate train size with macro-F1 per evaluation set."""
    clock = _StageClock()
    with clock.stage("preprocess"):
        gold_train = config.train_corpus.load()
        weak, _ = build_weak_corpus([n.note for n in gold_train])
        evals = {name: spec.load() for name, spec in config.eval_corpora.items()}
    provider = config.make_provider()
    with clock.stage("vectorize"):
        mats = vectorize_corpus(weak, provider)
        eval_mats = {name: vectorize_corpus(notes, provider)
                     for name, notes in evals.items()}
    scheme = SCHEME_SOAP5
    enc = [scheme.encode(n.labels) for n in weak]
    tr, va, te = split_indices(len(weak), seed=config.seeds[0])
    validation = ([mats[i] for i in va], [enc[i] for i in va])

    sizes = [resolve_size(s, len(tr)) for s in config.train_sizes]
    rows = []
    with clock.stage("train"):
        for size in sizes:
            cell: dict = {"size": size, "evals": {}}
            f1s_by_eval: dict[str, list[float]] = {name: [] for name in evals}
            weak_f1s = []
            for seed in config.seeds:
                sub = nested_subsample(tr, size, seed=seed)
                model, _ = _train_once([mats[i] for i in sub],
                                       [enc[i] for i in sub], scheme.size,
                                       provider.dim, config.hyper, seed, validation)
                weak_rep = evaluate(tg.predict(model, [mats[i] for i in te]),
                                    [enc[i] for i in te], list(range(scheme.size)))
                weak_f1s.append(100.0 * weak_rep.macro_f1)
                for name, notes in evals.items():
                    rep = _eval_cross_scheme(model, eval_mats[name], notes,
                                             _scheme_of(notes))
                    f1s_by_eval[name].append(100.0 * rep.macro_f1)
            cell["weak_test_mean"] = float(np.mean(weak_f1s))
            for name in evals:
                cell["evals"][name] = {"mean": float(np.mean(f1s_by_eval[name])),
                                       "std": float(np.std(f1s_by_eval[name]))}
            rows.append(cell)

    correlations = {"weak_test": spearman_rho(
        sizes, [r["weak_test_mean"] for r in rows]).statistic}
    for name in evals:
        correlations[name] = spearman_rho(
            sizes, [r["evals"][name]["mean"] for r in rows]).statistic
    metrics = {"table": rows, "spearman_rho": correlations, "sizes": sizes}
    return RunRecord(protocol="size_ablation", config_hash=config.config_hash(),
                     config=config.to_json(), metrics=metrics, timing=clock.times)


def run_timing(config: ExperimentConfig) -> RunRecord:
    """Wall-clock per pipeline stage for the configured train corpus.

    When an embeddings file is configured, vectorization is timed under
    both the hashed and the file-backed provider for comparison (reported,
    not asserted).
    """
    clock = _StageClock()
    with clock.stage("generate"):
        gold = config.train_corpus.load()
    with clock.stage("preprocess"):
        weak, _ = build_weak_corpus([n.note for n in gold])
    provider = config.make_provider()
    with clock.stage("vectorize"):
        mats = vectorize_corpus(weak, provider)
    if config.embeddings_path and config.provider != "file":
        with clock.stage("vectorize_file"):
            vectorize_corpus(weak, FileProvider(config.embeddings_path))
    scheme = SCHEME_SOAP5
    enc = [scheme.encode(n.labels) for n in weak]
    tr, va, te = split_indices(len(weak), seed=config.seeds[0])
    with clock.stage("train"):
        model, _ = _train_once([mats[i] for i in tr], [enc[i] for i in tr],
                               scheme.size, provider.dim, config.hyper,
                               config.seeds[0],
                               ([mats[i] for i in va], [enc[i] for i in va]))
    with clock.stage("predict"):
        preds = tg.predict(model, [mats[i] for i in te])
    report = evaluate(preds, [enc[i] for i in te], list(range(scheme.size)))
    total = sum(clock.times.values())
    metrics = {"stages": dict(clock.times), "total_seconds": total,
               "notes": len(gold), "weak_test_macro_f1": report.macro_f1}
    return RunRecord(protocol="timing", config_hash=config.config_hash(),
                     config=config.to_json(), metrics=metrics, timing=clock.times)
