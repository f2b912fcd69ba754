"""Note preprocessing: paragraph/sentence splitting, character-run cleanup,
header extraction, and the explicit-structure check.

A note is newline-delimited; each nonblank line becomes one paragraph.
Within a paragraph, runs of a repeated special character ("====", "___")
collapse to a single occurrence and a leading section header, when present,
is uppercased.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional

from .labels import SoapLabel

# Leading header: letters, ampersand, slash, and blanks (space/tab only),
# terminated by a colon. Anchored at the start of the paragraph.
HEADER_PATTERN = re.compile(r"^[A-Za-z&/ \t]+:")

# Candidates longer than this are prose containing a colon, not headers.
MAX_HEADER_LEN = 60

# A run (>= 2) of one repeated character that is neither alphanumeric nor
# whitespace. Underscore needs listing explicitly: it is a word character.
_SPECIAL_RUN = re.compile(r"([^\w\s]|_)\1+")

_CANONICAL_HEADERS = {
    "SUBJECTIVE": SoapLabel.SUBJECTIVE,
    "OBJECTIVE": SoapLabel.OBJECTIVE,
    "ASSESSMENT": SoapLabel.ASSESSMENT,
    "PLAN": SoapLabel.PLAN,
}

_SOAP_LABELS = (SoapLabel.SUBJECTIVE, SoapLabel.OBJECTIVE,
                SoapLabel.ASSESSMENT, SoapLabel.PLAN)


@dataclass
class Paragraph:
    """One nonblank line of a note, after normalization."""

    index: int
    text: str
    sentences: list[str] = field(default_factory=list)
    header: Optional[str] = None


def _data_file(name: str) -> str:
    return resources.files("soapseg").joinpath("data", name).read_text("utf-8")


def _load_word_list(name: str) -> frozenset[str]:
    words = set()
    for line in _data_file(name).splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.add(line.lower())
    return frozenset(words)


DEFAULT_ABBREVIATIONS = _load_word_list("abbreviations.txt")


def extract_header(paragraph_text: str) -> Optional[str]:
    """Return the uppercased, colon-stripped leading header, if any.

    The candidate is the maximal run of header characters at position 0
    followed by a colon. Candidates longer than MAX_HEADER_LEN characters
    are rejected. Digits are not header characters, so "3. Plan:" has none.
    """
    m = HEADER_PATTERN.match(paragraph_text)
    if m is None:
        return None
    candidate = m.group(0)[:-1]
    if len(candidate) > MAX_HEADER_LEN:
        return None
    candidate = candidate.strip()
    if not candidate:
        return None
    return candidate.upper()


def _normalize_line(line: str) -> str:
    line = _SPECIAL_RUN.sub(r"\1", line)
    m = HEADER_PATTERN.match(line)
    if m is not None and len(m.group(0)) - 1 <= MAX_HEADER_LEN:
        line = line[:m.end()].upper() + line[m.end():]
    return line


def normalize(text: str) -> str:
    """Collapse repeated-special-character runs and uppercase headers.

    Idempotent: collapsing leaves single characters alone, and an uppercased
    header still matches the header pattern.
    """
    return "\n".join(_normalize_line(line) for line in text.split("\n"))


def split_sentences(paragraph_text: str,
                    abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS) -> list[str]:
    """Rule-based sentence split on . ! ? followed by whitespace and an
    uppercase letter or digit, guarded by an abbreviation list.

    Nonempty input always yields at least one sentence.
    """
    text = paragraph_text.strip()
    if not text:
        return []
    sentences = []
    start = 0
    for m in re.finditer(r"[.!?]+(\s+)", text):
        nxt = text[m.end():m.end() + 1]
        if "\n" not in m.group(1) and not (nxt.isupper() or nxt.isdigit()):
            continue
        end_punct = m.start(1)
        before = text[start:end_punct]
        prev_word = before.rsplit(None, 1)[-1] if before.strip() else ""
        if prev_word.lower() in abbreviations:
            continue
        chunk = before.strip()
        if chunk:
            sentences.append(chunk)
        start = m.end()
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences if sentences else [text]


def split_paragraphs(note_text: str,
                     abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS) -> list[Paragraph]:
    """Split a note on newlines into normalized paragraphs.

    Blank and whitespace-only lines are dropped; indices run 0..n-1.
    """
    paragraphs = []
    for raw_line in note_text.split("\n"):
        if not raw_line.strip():
            continue
        line = _normalize_line(raw_line)
        paragraphs.append(Paragraph(
            index=len(paragraphs),
            text=line,
            sentences=split_sentences(line, abbreviations),
            header=extract_header(line),
        ))
    return paragraphs


class HeaderLexicon:
    """Exact-match map from uppercased header strings to SOAP labels.

    The four canonical headers are always present and cannot be removed.
    Synonyms ("HISTORY" -> Subjective, "EXAMINATION" -> Objective, ...) are
    configurable, including headers that map to the out-of-structure label
    (signature blocks and the like).
    """

    def __init__(self, synonyms: Optional[dict[str, SoapLabel]] = None):
        self._map = dict(_CANONICAL_HEADERS)
        for header, label in (synonyms or {}).items():
            key = header.strip().rstrip(":").strip().upper()
            if not key:
                raise ValueError("empty header string in lexicon")
            if key in _CANONICAL_HEADERS and label is not _CANONICAL_HEADERS[key]:
                raise ValueError(f"canonical header {key} cannot be remapped")
            self._map[key] = label

    def lookup(self, header: Optional[str]) -> Optional[SoapLabel]:
        if header is None:
            return None
        hit = self._map.get(header)
        if hit is not None:
            return hit
        return self._map.get(header.strip().rstrip(":").strip().upper())

    def __contains__(self, header: str) -> bool:
        return self.lookup(header) is not None

    def __len__(self) -> int:
        return len(self._map)

    def items(self):
        return self._map.items()

    @classmethod
    def from_tsv(cls, path: str | Path) -> "HeaderLexicon":
        """Load HEADER<TAB>LABEL lines; labels by enum name or display form."""
        synonyms: dict[str, SoapLabel] = {}
        for lineno, line in enumerate(Path(path).read_text("utf-8").splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected HEADER<TAB>LABEL")
            synonyms[parts[0]] = SoapLabel.parse(parts[1])
        return cls(synonyms)

    @classmethod
    def default(cls) -> "HeaderLexicon":
        """The shipped lexicon: canonical headers plus stock synonyms."""
        with resources.as_file(resources.files("soapseg").joinpath("data", "headers.tsv")) as p:
            return cls.from_tsv(p)


def is_explicitly_structured(paragraphs: Iterable[Paragraph],
                             require_order: bool = False) -> bool:
    """True iff the note carries all four canonical section headers.

    Presence means a paragraph whose extracted header is literally one of
    SUBJECTIVE / OBJECTIVE / ASSESSMENT / PLAN. With require_order, first
    occurrences must additionally appear in S, O, A, P order.
    """
    first_seen: dict[SoapLabel, int] = {}
    for p in paragraphs:
        label = _CANONICAL_HEADERS.get(p.header) if p.header else None
        if label is not None and label not in first_seen:
            first_seen[label] = p.index
    if any(lab not in first_seen for lab in _SOAP_LABELS):
        return False
    if require_order:
        positions = [first_seen[lab] for lab in _SOAP_LABELS]
        return positions == sorted(positions)
    return True
