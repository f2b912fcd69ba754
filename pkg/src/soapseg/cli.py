"""Command-line interface.

Stage tools operate on files:

    soapseg generate   --style styleA --n 200 --seed 0 --out notes.jsonl --gold-out gold.jsonl
    soapseg preprocess --in notes.jsonl --out paragraphs.jsonl
    soapseg weaklabel  --in notes.jsonl --lexicon headers.tsv --out weak.jsonl --report report.txt
    soapseg vectorize  --in weak.jsonl --provider hashed --dim 256 --out cache.npz
    soapseg predict    --model model.bin --in notes.jsonl --out pred.jsonl
    soapseg eval       --pred pred.jsonl --gold gold.jsonl --out-json eval.json

Experiment protocols consume a JSON config and write a run directory with
record.json, report.txt, TSV tables, and PNG figures:

    soapseg train    --config experiment.json --out-dir runs/weak
    soapseg transfer --config experiment.json --out-dir runs/transfer
    soapseg ablate   --config experiment.json --out-dir runs/ablation
    soapseg bench    --config experiment.json --out-dir runs/bench
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness, report
from .corpus import (GeneratorConfig, LabeledNote, Provenance, RawNote,
                     generate_corpus, read_corpus, write_corpus)
from .errors import SoapsegError
from .labels import SCHEMES, SoapLabel, merge_assessment_plan, scheme_for_k
from .metrics import cohen_kappa, evaluate
from .preprocess import HeaderLexicon, split_paragraphs
from .styles import BUILTIN_STYLES, builtin_style
from .tagger import load_model, save_model
from .vectorize import (DEFAULT_DIM, FileProvider, HashedProvider,
                        save_matrix_cache, vectorize_corpus)
from .weaklabel import build_weak_corpus
from . import tagger as tg


def _add_generate(sub) -> None:
    p = sub.add_parser("generate", help="generate a synthetic corpus")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--style", choices=sorted(BUILTIN_STYLES))
    group.add_argument("--gen-config", help="generator config JSON file")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="raw notes JSONL")
    p.add_argument("--gold-out", help="gold-labeled notes JSONL")


def _cmd_generate(args) -> int:
    if args.gen_config:
        config = GeneratorConfig.load(args.gen_config)
        if args.seed:
            config.seed = args.seed
    else:
        config = builtin_style(args.style, seed=args.seed)
    raw, gold = generate_corpus(config, args.n)
    write_corpus(raw, args.out)
    print(f"wrote {len(raw)} notes to {args.out}")
    if args.gold_out:
        write_corpus(gold, args.gold_out)
        print(f"wrote gold labels to {args.gold_out}")
    return 0


def _add_preprocess(sub) -> None:
    p = sub.add_parser("preprocess", help="split notes into paragraphs")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True, help="paragraph dump JSONL")


def _cmd_preprocess(args) -> int:
    notes = read_corpus(args.infile)
    count = 0
    with open(args.out, "w", encoding="utf-8") as fh:
        for note in notes:
            raw = note if isinstance(note, RawNote) else note.note
            for para in split_paragraphs(raw.text):
                fh.write(json.dumps({
                    "note_id": raw.id, "index": para.index, "text": para.text,
                    "header": para.header, "sentences": para.sentences,
                }, ensure_ascii=False) + "\n")
                count += 1
    print(f"wrote {count} paragraphs to {args.out}")
    return 0


def _add_weaklabel(sub) -> None:
    p = sub.add_parser("weaklabel", help="rule-based weak labeling")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--lexicon", help="header lexicon TSV (default: built-in)")
    p.add_argument("--out", required=True)
    p.add_argument("--report", help="plain-text summary path")


def _cmd_weaklabel(args) -> int:
    notes = read_corpus(args.infile)
    raw = [n if isinstance(n, RawNote) else n.note for n in notes]
    lexicon = HeaderLexicon.from_tsv(args.lexicon) if args.lexicon else None
    labeled, rep = build_weak_corpus(raw, lexicon)
    write_corpus(labeled, args.out)
    summary = rep.summary()
    if args.report:
        Path(args.report).write_text(summary + "\n", encoding="utf-8")
    print(summary)
    return 0


def _add_vectorize(sub) -> None:
    p = sub.add_parser("vectorize", help="compute paragraph vectors")
    p.add_argument("--in", dest="infile", required=True, help="labeled JSONL")
    p.add_argument("--provider", choices=["hashed", "file"], default="hashed")
    p.add_argument("--embeddings", help="embedding file for provider=file")
    p.add_argument("--dim", type=int, default=DEFAULT_DIM)
    p.add_argument("--out", required=True, help="matrix cache (.npz)")


def _make_provider(args):
    if args.provider == "file":
        if not args.embeddings:
            raise SoapsegError("provider 'file' needs --embeddings")
        return FileProvider(args.embeddings)
    return HashedProvider(args.dim)


def _load_labeled(path: str) -> list[LabeledNote]:
    notes = read_corpus(path)
    out = []
    for n in notes:
        if isinstance(n, LabeledNote):
            out.append(n)
        else:
            paras = split_paragraphs(n.text)
            out.append(LabeledNote(note=n, paragraphs=paras,
                                   labels=[SoapLabel.OUT] * len(paras),
                                   provenance=Provenance.WEAK))
    return out


def _cmd_vectorize(args) -> int:
    labeled = _load_labeled(args.infile)
    provider = _make_provider(args)
    matrices = vectorize_corpus(labeled, provider)
    save_matrix_cache(matrices, args.out)
    print(f"wrote {len(matrices)} note matrices (dim {provider.dim}) to {args.out}")
    return 0


def _add_predict(sub) -> None:
    p = sub.add_parser("predict", help="decode SOAP labels with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--provider", choices=["hashed", "file"], default="hashed")
    p.add_argument("--embeddings")
    p.add_argument("--dim", type=int, default=DEFAULT_DIM)
    p.add_argument("--out", required=True, help="labeled JSONL of predictions")


def _cmd_predict(args) -> int:
    model = load_model(args.model)
    if args.provider == "hashed" and args.dim != model.d:
        args.dim = model.d
    labeled = _load_labeled(args.infile)
    provider = _make_provider(args)
    if provider.dim != model.d:
        raise SoapsegError(
            f"provider dimension {provider.dim} != model dimension {model.d}")
    matrices = vectorize_corpus(labeled, provider)
    scheme = model.scheme
    preds = tg.predict(model, matrices)
    out_notes = []
    for note, seq in zip(labeled, preds):
        out_notes.append(LabeledNote(note=note.note, paragraphs=note.paragraphs,
                                     labels=scheme.decode(seq),
                                     provenance=Provenance.WEAK))
    write_corpus(out_notes, args.out)
    print(f"wrote predictions for {len(out_notes)} notes to {args.out}")
    return 0


def _add_eval(sub) -> None:
    p = sub.add_parser("eval", help="score predictions against gold labels")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--scheme", choices=sorted(SCHEMES), default=None,
                   help="label scheme of the gold corpus (default: inferred)")
    p.add_argument("--out-json", help="machine-readable report path")
    p.add_argument("--kappa", action="store_true",
                   help="also print Cohen's kappa between pred and gold")


def _cmd_eval(args) -> int:
    pred = [n for n in read_corpus(args.pred) if isinstance(n, LabeledNote)]
    gold = [n for n in read_corpus(args.gold) if isinstance(n, LabeledNote)]
    gold_by_id = {n.note.id: n for n in gold}
    pairs = [(p, gold_by_id[p.note.id]) for p in pred if p.note.id in gold_by_id]
    if len(pairs) != len(gold):
        raise SoapsegError(f"prediction covers {len(pairs)}/{len(gold)} gold notes")
    if args.scheme:
        scheme = SCHEMES[args.scheme]
    else:
        merged = any(SoapLabel.ASSESSMENT_AND_PLAN in g.labels for g in gold)
        scheme = scheme_for_k(4 if merged else 5)
    pred_seqs = []
    gold_seqs = []
    for p, g in pairs:
        labels = p.labels
        if scheme.size == 4:
            labels = merge_assessment_plan(labels)
        pred_seqs.append(scheme.encode(labels))
        gold_seqs.append(scheme.encode(g.labels))
    rep = evaluate(pred_seqs, gold_seqs, list(range(scheme.size)))
    relabeled = rep.to_json()
    relabeled["labels"] = [lab.display for lab in scheme]
    relabeled["per_class"] = {lab.display: relabeled["per_class"][str(i)]
                              for i, lab in enumerate(scheme)}
    print(report.format_eval_table(relabeled))
    if args.kappa:
        flat_p = [l for seq in pred_seqs for l in seq]
        flat_g = [l for seq in gold_seqs for l in seq]
        kappa = cohen_kappa(flat_p, flat_g)
        print(f"Cohen's kappa: {kappa:.4f} ({100 * kappa:.2f} percent-scaled)")
    if args.out_json:
        Path(args.out_json).write_text(json.dumps(relabeled, indent=2, sort_keys=True),
                                       encoding="utf-8")
    return 0


def _add_protocol(sub, name: str, help_text: str) -> None:
    p = sub.add_parser(name, help=help_text)
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, action="append", dest="seeds",
                   help="override config seeds (repeatable)")
    if name == "train":
        p.add_argument("--save-model", help="also save the first seed's checkpoint")


_PROTOCOLS = {
    "train": harness.run_weak_train,
    "transfer": harness.run_transfer_comparison,
    "ablate": harness.run_size_ablation,
    "bench": harness.run_timing,
}


def _cmd_protocol(name: str, args) -> int:
    config = harness.ExperimentConfig.load(args.config)
    if args.seeds:
        config.seeds = args.seeds
    record = _PROTOCOLS[name](config)
    out = report.write_run_outputs(record, args.out_dir)
    print((out / "report.txt").read_text(), end="")
    if name == "train" and getattr(args, "save_model", None):
        model, _ = harness.train_weak_source(config, config.seeds[0])
        save_model(model, args.save_model)
        print(f"saved checkpoint to {args.save_model}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="soapseg",
        description="Weakly supervised SOAP-section labeling toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_generate(sub)
    _add_preprocess(sub)
    _add_weaklabel(sub)
    _add_vectorize(sub)
    _add_predict(sub)
    _add_eval(sub)
    _add_protocol(sub, "train", "weak-supervised training protocol")
    _add_protocol(sub, "transfer", "transfer vs. random-init comparison")
    _add_protocol(sub, "ablate", "weak-train-size ablation")
    _add_protocol(sub, "bench", "stage timing report")

    args = parser.parse_args(argv)
    try:
        if args.command == "generate":
            return _cmd_generate(args)
        if args.command == "preprocess":
            return _cmd_preprocess(args)
        if args.command == "weaklabel":
            return _cmd_weaklabel(args)
        if args.command == "vectorize":
            return _cmd_vectorize(args)
        if args.command == "predict":
            return _cmd_predict(args)
        if args.command == "eval":
            return _cmd_eval(args)
        return _cmd_protocol(args.command, args)
    except SoapsegError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
