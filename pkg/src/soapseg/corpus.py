"""Corpus data model, JSONL I/O, and the synthetic note generator.

Corpora are JSONL files, one note per line, with fields
{id, text, source_tag, labels?, provenance?, topic_flags?}. Labeled records
carry one label per nonblank line of text.

The generator produces reproducible desk-scale corpora in configurable
house styles so that cross-style experiments (train on one style, evaluate
on another) can be run without any private clinical data. Free-text tokens
standing in for protected health information use the reserved word "UNK".
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence, Union

from .errors import ConfigError, CorpusError
from .labels import SoapLabel
from .preprocess import Paragraph, split_paragraphs


class Provenance(Enum):
    WEAK = "weak"
    GOLD = "gold"


@dataclass
class RawNote:
    id: str
    text: str
    source_tag: str = ""

    def validate(self) -> None:
        if not self.id:
            raise CorpusError("note id must be nonempty")
        if not self.text:
            raise CorpusError(f"note {self.id!r}: text must be nonempty")


@dataclass
class LabeledNote:
    """A note plus per-paragraph labels and optional topic-continuation flags."""

    note: RawNote
    paragraphs: list[Paragraph]
    labels: list[SoapLabel]
    provenance: Provenance
    topic_flags: Optional[list[bool]] = None

    def __post_init__(self) -> None:
        self.note.validate()
        if len(self.labels) != len(self.paragraphs):
            raise CorpusError(
                f"note {self.note.id!r}: {len(self.labels)} labels for "
                f"{len(self.paragraphs)} paragraphs")
        if self.topic_flags is not None and len(self.topic_flags) != len(self.paragraphs):
            raise CorpusError(
                f"note {self.note.id!r}: topic_flags length mismatch")

    @classmethod
    def from_note(cls, note: RawNote, labels: Sequence[SoapLabel],
                  provenance: Provenance,
                  topic_flags: Optional[Sequence[bool]] = None) -> "LabeledNote":
        return cls(note=note, paragraphs=split_paragraphs(note.text),
                   labels=list(labels), provenance=provenance,
                   topic_flags=list(topic_flags) if topic_flags is not None else None)


Note = Union[RawNote, LabeledNote]


def _note_to_record(note: Note) -> dict:
    if isinstance(note, RawNote):
        return {"id": note.id, "text": note.text, "source_tag": note.source_tag}
    record = {
        "id": note.note.id,
        "text": note.note.text,
        "source_tag": note.note.source_tag,
        "labels": [lab.display for lab in note.labels],
        "provenance": note.provenance.value,
    }
    if note.topic_flags is not None:
        record["topic_flags"] = list(note.topic_flags)
    return record


def _record_to_note(record: dict, lineno: int) -> Note:
    for key in ("id", "text"):
        if key not in record:
            raise CorpusError(f"line {lineno}: missing {key!r} field")
    raw = RawNote(id=record["id"], text=record["text"],
                  source_tag=record.get("source_tag", ""))
    if "labels" not in record:
        return raw
    try:
        labels = [SoapLabel.parse(tok) for tok in record["labels"]]
        provenance = Provenance(record.get("provenance", "weak"))
    except ValueError as exc:
        raise CorpusError(f"line {lineno}: {exc}") from exc
    flags = record.get("topic_flags")
    try:
        return LabeledNote.from_note(raw, labels, provenance, flags)
    except CorpusError as exc:
        raise CorpusError(f"line {lineno}: {exc}") from exc


def read_corpus(path: str | Path) -> list[Note]:
    """Read a JSONL corpus, preserving file order.

    Lines with a "labels" field load as LabeledNote, others as RawNote.
    Malformed lines and duplicate ids raise CorpusError naming the line.
    """
    notes: list[Note] = []
    seen_ids: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {lineno}: invalid JSON: {exc}") from exc
            note = _record_to_note(record, lineno)
            note_id = note.id if isinstance(note, RawNote) else note.note.id
            if not note_id:
                raise CorpusError(f"line {lineno}: note id must be nonempty")
            if note_id in seen_ids:
                raise CorpusError(f"line {lineno}: duplicate note id {note_id!r}")
            seen_ids.add(note_id)
            notes.append(note)
    return notes


def write_corpus(notes: Sequence[Note], path: str | Path) -> None:
    """Write notes as JSONL with a fixed field order (read_corpus inverts it)."""
    ids = set()
    for note in notes:
        raw = note if isinstance(note, RawNote) else note.note
        raw.validate()
        if raw.id in ids:
            raise CorpusError(f"duplicate note id {raw.id!r}")
        ids.add(raw.id)
    with open(path, "w", encoding="utf-8") as fh:
        for note in notes:
            fh.write(json.dumps(_note_to_record(note), ensure_ascii=False))
            fh.write("\n")


# --------------------------------------------------------------------------
# Synthetic corpus generation


@dataclass
class GeneratorConfig:
    """Knobs for one house style of synthetic SOAP notes.

    header_pools/vocab_pools are keyed by SoapLabel; a pool under
    ASSESSMENT_AND_PLAN switches the style to the merged four-class scheme.
    paragraphs_per_section is an inclusive (lo, hi) range of content
    paragraphs following each section header.
    """

    style_id: str
    header_pools: dict[SoapLabel, list[str]]
    vocab_pools: dict[SoapLabel, list[str]]
    section_omission_prob: float = 0.0
    list_format_prob: float = 0.15
    paragraphs_per_section: tuple[int, int] = (1, 3)
    seed: int = 0

    def __post_init__(self) -> None:
        for name, p in (("section_omission_prob", self.section_omission_prob),
                        ("list_format_prob", self.list_format_prob)):
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {p}")
        lo, hi = self.paragraphs_per_section
        if lo < 0 or hi < lo:
            raise ConfigError(f"bad paragraphs_per_section range ({lo}, {hi})")
        for label in self.section_labels():
            if not self.header_pools.get(label):
                raise ConfigError(f"empty header pool for {label.name}")
            if not self.vocab_pools.get(label):
                raise ConfigError(f"empty vocab pool for {label.name}")
        if not self.vocab_pools.get(SoapLabel.OUT):
            raise ConfigError("empty vocab pool for OUT")

    def section_labels(self) -> list[SoapLabel]:
        if SoapLabel.ASSESSMENT_AND_PLAN in self.header_pools:
            return [SoapLabel.SUBJECTIVE, SoapLabel.OBJECTIVE,
                    SoapLabel.ASSESSMENT_AND_PLAN]
        return [SoapLabel.SUBJECTIVE, SoapLabel.OBJECTIVE,
                SoapLabel.ASSESSMENT, SoapLabel.PLAN]

    def to_json(self) -> dict:
        return {
            "style_id": self.style_id,
            "header_pools": {k.display: v for k, v in self.header_pools.items()},
            "vocab_pools": {k.display: v for k, v in self.vocab_pools.items()},
            "section_omission_prob": self.section_omission_prob,
            "list_format_prob": self.list_format_prob,
            "paragraphs_per_section": list(self.paragraphs_per_section),
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, data: dict) -> "GeneratorConfig":
        try:
            return cls(
                style_id=data["style_id"],
                header_pools={SoapLabel.parse(k): list(v)
                              for k, v in data["header_pools"].items()},
                vocab_pools={SoapLabel.parse(k): list(v)
                             for k, v in data["vocab_pools"].items()},
                section_omission_prob=data.get("section_omission_prob", 0.0),
                list_format_prob=data.get("list_format_prob", 0.15),
                paragraphs_per_section=tuple(data.get("paragraphs_per_section", (1, 3))),
                seed=data.get("seed", 0),
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"bad generator config: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "GeneratorConfig":
        return cls.from_json(json.loads(Path(path).read_text("utf-8")))


_UNK_PROB = 0.10          # chance a sentence carries a masked-PHI token
_TRAILING_OUT_PROB = 0.9  # chance a note ends with signature lines


_THEME_SIZE = 6       # words recurring across one section instance
_THEME_MIX = 0.80     # chance a token comes from the section theme


def _words(rng: random.Random, pool: Sequence[str], theme: Sequence[str],
           count: int) -> list[str]:
    return [rng.choice(theme) if theme and rng.random() < _THEME_MIX
            else rng.choice(pool) for _ in range(count)]


def _sentence(rng: random.Random, pool: Sequence[str], theme: Sequence[str],
              lo: int = 6, hi: int = 10) -> str:
    words = _words(rng, pool, theme, rng.randint(lo, hi))
    if rng.random() < _UNK_PROB:
        words[rng.randrange(len(words))] = "UNK"
    return " ".join(words).capitalize() + "."


def _section_lines(rng: random.Random, config: GeneratorConfig,
                   label: SoapLabel) -> list[str]:
    pool = config.vocab_pools[label]
    theme = rng.sample(pool, min(_THEME_SIZE, len(pool)))
    header = rng.choice(config.header_pools[label])
    if rng.random() < 0.5:
        header = header.upper()
    lines = [f"{header}: {_sentence(rng, pool, theme, 5, 8)}"]
    lo, hi = config.paragraphs_per_section
    for _ in range(rng.randint(lo, hi)):
        if rng.random() < config.list_format_prob:
            for _ in range(rng.randint(2, 3)):
                items = " ".join(_words(rng, pool, theme, rng.randint(5, 8)))
                lines.append(f"- {items}")
        else:
            lines.append(" ".join(_sentence(rng, pool, theme, 7, 11)
                                  for _ in range(rng.randint(1, 2))))
    return lines


def generate_note(rng: random.Random, config: GeneratorConfig,
                  note_id: str) -> LabeledNote:
    """Generate one note with gold labels and gold topic flags."""
    lines: list[str] = []
    labels: list[SoapLabel] = []
    flags: list[bool] = []

    sections = [lab for lab in config.section_labels()
                if rng.random() >= config.section_omission_prob]
    for label in sections:
        section_lines = _section_lines(rng, config, label)
        for j, line in enumerate(section_lines):
            lines.append(line)
            labels.append(label)
            flags.append(j > 0)

    if not sections or rng.random() < _TRAILING_OUT_PROB:
        out_pool = config.vocab_pools[SoapLabel.OUT]
        for j in range(rng.randint(1, 2)):
            words = " ".join(_words(rng, out_pool, (), rng.randint(4, 7)))
            lines.append(words.capitalize())
            labels.append(SoapLabel.OUT)
            flags.append(j > 0)

    flags[0] = False
    note = RawNote(id=note_id, text="\n".join(lines), source_tag=config.style_id)
    return LabeledNote.from_note(note, labels, Provenance.GOLD, flags)


def generate_corpus(config: GeneratorConfig,
                    n: int) -> tuple[list[RawNote], list[LabeledNote]]:
    """Generate n notes; deterministic for a fixed (config, n).

    Present sections always follow the Subjective, Objective, Assessment,
    Plan order; each begins with a header from the style's pools followed
    by a colon.
    """
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    rng = random.Random(config.seed)
    labeled = [generate_note(rng, config, f"{config.style_id}-{i:05d}")
               for i in range(n)]
    return [ln.note for ln in labeled], labeled
