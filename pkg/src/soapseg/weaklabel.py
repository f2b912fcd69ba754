"""Rule-based weak labeling of preprocessed, topic-segmented notes.

Labels are assigned by a single pass over the paragraphs. A recognized
section header switches the running label; while the running label is Plan,
a topic change exits to out-of-structure (closings and signatures follow the
plan at the end of a note); otherwise a paragraph inherits the previous
paragraph's label. The running label starts as out-of-structure, so anything
before the first recognized header stays out.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .corpus import LabeledNote, Provenance, RawNote
from .errors import ContractViolation
from .labels import SoapLabel
from .preprocess import HeaderLexicon, Paragraph, is_explicitly_structured, split_paragraphs
from .topicseg import TopicFlags, segment


def label_paragraphs(headers: Sequence[Optional[str]],
                     lexicon: HeaderLexicon,
                     flags: Sequence[bool]) -> list[SoapLabel]:
    """Run the labeling state machine over extracted headers and topic flags.

    flags[i] True means paragraph i continues the previous paragraph's topic.
    """
    if len(headers) != len(flags):
        raise ContractViolation(
            f"{len(flags)} topic flags for {len(headers)} paragraphs")
    labels: list[SoapLabel] = []
    current = SoapLabel.OUT
    for header, same_topic in zip(headers, flags):
        mapped = lexicon.lookup(header)
        if mapped is not None:
            current = mapped
        elif current is SoapLabel.PLAN and not same_topic:
            current = SoapLabel.OUT
        labels.append(current)
    return labels


def weak_label(note: RawNote, lexicon: HeaderLexicon,
               flags: TopicFlags | Sequence[bool]) -> LabeledNote:
    """Weakly label one note given its topic flags."""
    paragraphs = split_paragraphs(note.text)
    flag_list = list(flags)
    if len(flag_list) != len(paragraphs):
        raise ContractViolation(
            f"note {note.id!r}: {len(flag_list)} topic flags for "
            f"{len(paragraphs)} paragraphs")
    labels = label_paragraphs([p.header for p in paragraphs], lexicon, flag_list)
    return LabeledNote(note=note, paragraphs=paragraphs, labels=labels,
                       provenance=Provenance.WEAK, topic_flags=flag_list)


@dataclass
class WeakLabelReport:
    total: int = 0
    retained: int = 0
    label_counts: Counter = field(default_factory=Counter)

    @property
    def dropped(self) -> int:
        return self.total - self.retained

    def summary(self) -> str:
        lines = [f"{self.retained}/{self.total} retained "
                 f"({self.dropped} without explicit structure)"]
        for label in SoapLabel:
            if label in self.label_counts:
                lines.append(f"  {label.display:>4}: {self.label_counts[label]} paragraphs")
        return "\n".join(lines)


def build_weak_corpus(notes: Sequence[RawNote],
                      lexicon: Optional[HeaderLexicon] = None
                      ) -> tuple[list[LabeledNote], WeakLabelReport]:
    """Weakly label every explicitly structured note in a corpus.

    Notes lacking any of the four canonical headers are dropped; the report
    carries retained/dropped counts and per-label paragraph counts.
    """
    lexicon = lexicon or HeaderLexicon.default()
    report = WeakLabelReport(total=len(notes))
    labeled: list[LabeledNote] = []
    for note in notes:
        paragraphs = split_paragraphs(note.text)
        if not paragraphs or not is_explicitly_structured(paragraphs):
            continue
        flags = segment(paragraphs)
        labels = label_paragraphs([p.header for p in paragraphs], lexicon,
                                  flags.flags)
        labeled.append(LabeledNote(note=note, paragraphs=paragraphs,
                                   labels=labels, provenance=Provenance.WEAK,
                                   topic_flags=flags.flags))
        report.retained += 1
        report.label_counts.update(labels)
    return labeled, report
