"""Rendering of run records: plain-text tables, tab-delimited files, and
matplotlib figures saved alongside them."""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .harness import RunRecord  # noqa: E402
from .metrics import EvalReport  # noqa: E402


def format_eval_table(report: dict | EvalReport, title: str = "") -> str:
    """Render per-class F1 in the S / O / A / P / Out / Macro Avg. layout."""
    data = report.to_json() if isinstance(report, EvalReport) else report
    labels = data["labels"]
    header = " | ".join(f"{lab:>6}" for lab in labels) + " | Macro Avg."
    f1s = " | ".join(f"{100 * data['per_class'][lab]['f1']:6.2f}" for lab in labels)
    line = f"{f1s} |     {100 * data['macro_f1']:6.2f}"
    out = [header, "-" * len(header), line]
    if title:
        out.insert(0, title)
    return "\n".join(out)


def _write_tsv(path: Path, rows: list[dict], columns: list[str]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, delimiter="\t",
                                extrasaction="ignore")
        writer.writeheader()
        writer.writerows(rows)


def _weak_train_outputs(record: RunRecord, out: Path) -> list[str]:
    lines = []
    metrics = record.metrics
    wr = metrics["weak_report"]
    lines.append(f"weak labeling: {wr['retained']}/{wr['total']} notes retained")
    ss = metrics["split_sizes"]
    lines.append(f"split: {ss['train']} train / {ss['val']} val / {ss['test']} test")
    mt = metrics["weak_test_macro_f1"]
    lines.append(f"weak test macro-F1: {100 * mt['mean']:.2f} ± {100 * mt['std']:.2f}")

    epoch_rows = []
    fig, ax = plt.subplots(figsize=(6, 4))
    for seed, seed_data in metrics["per_seed"].items():
        epochs = seed_data["epochs"]
        xs = [e["epoch"] for e in epochs]
        ys = [e["val_macro_f1"] for e in epochs]
        ax.plot(xs, ys, marker="o", label=f"seed {seed}")
        for e in epochs:
            epoch_rows.append({"seed": seed, **e})
    ax.set_xlabel("epoch")
    ax.set_ylabel("validation macro-F1")
    ax.set_ylim(0, 1.02)
    ax.legend()
    ax.set_title("weak-supervised training")
    fig.tight_layout()
    fig.savefig(out / "training_curves.png", dpi=120)
    plt.close(fig)
    _write_tsv(out / "epochs.tsv", epoch_rows,
               ["seed", "epoch", "train_loss", "val_macro_f1"])

    first_seed = str(record.config["seeds"][0])
    lines.append("")
    lines.append(format_eval_table(metrics["per_seed"][first_seed]["weak_test"],
                                   f"weak test split (seed {first_seed}):"))
    gold_rows = []
    for name, stats in metrics.get("gold_macro_f1", {}).items():
        lines.append(f"gold eval {name}: macro-F1 "
                     f"{100 * stats['mean']:.2f} ± {100 * stats['std']:.2f}")
        gold_rows.append({"eval_set": name, "macro_f1_mean": stats["mean"],
                          "macro_f1_std": stats["std"]})
    if gold_rows:
        _write_tsv(out / "gold_evals.tsv", gold_rows,
                   ["eval_set", "macro_f1_mean", "macro_f1_std"])
    return lines


def _transfer_outputs(record: RunRecord, out: Path) -> list[str]:
    rows = record.metrics["table"]
    columns = ["size", "finetune_mean", "finetune_std", "transfer_mean",
               "transfer_std", "delta", "p_value"]
    _write_tsv(out / "transfer_table.tsv", rows, columns)
    lines = ["train size | finetune avg ± std | transfer avg ± std |     Δ | p-value",
             "-" * 74]
    for r in rows:
        p_txt = "n/a" if r["p_value"] is None else f"{r['p_value']:.4f}"
        lines.append(f"{r['size']:>10} | {r['finetune_mean']:11.2f} ± {r['finetune_std']:4.2f} "
                     f"| {r['transfer_mean']:11.2f} ± {r['transfer_std']:4.2f} "
                     f"| {r['delta']:5.2f} | {p_txt}")
    sizes = [r["size"] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    for arm, color in (("finetune", "tab:red"), ("transfer", "tab:blue")):
        means = [r[f"{arm}_mean"] for r in rows]
        stds = [r[f"{arm}_std"] for r in rows]
        ax.errorbar(sizes, means, yerr=stds, marker="o", capsize=3,
                    label=arm, color=color)
    ax.set_xlabel("target train size (notes)")
    ax.set_ylabel("macro-F1")
    ax.set_xscale("log")
    ax.legend()
    ax.set_title("random init vs. transferred init")
    fig.tight_layout()
    fig.savefig(out / "transfer_comparison.png", dpi=120)
    plt.close(fig)
    return lines


def _ablation_outputs(record: RunRecord, out: Path) -> list[str]:
    rows = record.metrics["table"]
    eval_names = sorted(rows[0]["evals"]) if rows else []
    tsv_rows = []
    for r in rows:
        row = {"size": r["size"], "weak_test": r["weak_test_mean"]}
        for name in eval_names:
            row[name] = r["evals"][name]["mean"]
        tsv_rows.append(row)
    _write_tsv(out / "ablation_table.tsv", tsv_rows,
               ["size", "weak_test"] + eval_names)

    lines = ["train size | weak test | " + " | ".join(f"{n:>10}" for n in eval_names),
             "-" * 60]
    for r in tsv_rows:
        vals = " | ".join(f"{r[n]:10.2f}" for n in eval_names)
        lines.append(f"{r['size']:>10} | {r['weak_test']:9.2f} | {vals}")
    lines.append("")
    for name, rho in record.metrics["spearman_rho"].items():
        lines.append(f"Spearman rho (size vs macro-F1) on {name}: {rho:+.2f}")

    fig, ax = plt.subplots(figsize=(6, 4))
    sizes = [r["size"] for r in tsv_rows]
    ax.plot(sizes, [r["weak_test"] for r in tsv_rows], marker="o", label="weak test")
    for name in eval_names:
        ax.plot(sizes, [r[name] for r in tsv_rows], marker="s", label=name)
    ax.set_xlabel("weak train size (notes)")
    ax.set_ylabel("macro-F1")
    ax.set_xscale("log")
    ax.legend()
    ax.set_title("effect of weak train size")
    fig.tight_layout()
    fig.savefig(out / "ablation_trend.png", dpi=120)
    plt.close(fig)
    return lines


def _timing_outputs(record: RunRecord, out: Path) -> list[str]:
    stages = record.metrics["stages"]
    rows = [{"stage": k, "seconds": v} for k, v in stages.items()]
    _write_tsv(out / "timing.tsv", rows, ["stage", "seconds"])
    lines = [f"{k:>12}: {v:8.2f} s" for k, v in stages.items()]
    lines.append(f"{'total':>12}: {record.metrics['total_seconds']:8.2f} s")
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.barh(list(stages), [stages[k] for k in stages], color="tab:gray")
    ax.set_xlabel("seconds")
    ax.set_title("execution time per stage")
    fig.tight_layout()
    fig.savefig(out / "timing.png", dpi=120)
    plt.close(fig)
    return lines


_RENDERERS = {
    "weak_train": _weak_train_outputs,
    "transfer_comparison": _transfer_outputs,
    "size_ablation": _ablation_outputs,
    "timing": _timing_outputs,
}


def write_run_outputs(record: RunRecord, out_dir: str | Path) -> Path:
    """Persist a run: record.json plus a text report, TSV tables, figures."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    record.save(out / "record.json")
    lines = [f"protocol: {record.protocol}", f"config hash: {record.config_hash}", ""]
    lines += _RENDERERS[record.protocol](record, out)
    text = "\n".join(lines) + "\n"
    (out / "report.txt").write_text(text, encoding="utf-8")
    return out
