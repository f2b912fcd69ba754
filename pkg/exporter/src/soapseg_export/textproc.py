"""Paragraph and sentence handling mirroring the core toolkit's rules.

Duplicated here on purpose: the exporter must produce one vector per
paragraph with identical paragraph indexing and sentence boundaries, while
depending on the core only through file formats. Rules: notes split on
newlines with blank lines dropped; runs of one repeated special character
collapse; leading headers uppercase; sentences split on . ! ? followed by
whitespace and an uppercase letter or digit (or a newline), with an
abbreviation guard.
"""
from __future__ import annotations

import re

_HEADER = re.compile(r"^[A-Za-z&/ \t]+:")
_SPECIAL_RUN = re.compile(r"([^\w\s]|_)\1+")
_MAX_HEADER_LEN = 60

ABBREVIATIONS = frozenset({
    "dr.", "mr.", "mrs.", "ms.", "st.", "vs.", "e.g.", "i.e.", "etc.",
    "approx.", "dept.", "m.d.", "d.o.", "p.o.", "b.i.d.", "t.i.d.", "q.d.",
    "prn.", "no.",
})


def normalize_line(line: str) -> str:
    line = _SPECIAL_RUN.sub(r"\1", line)
    m = _HEADER.match(line)
    if m is not None and len(m.group(0)) - 1 <= _MAX_HEADER_LEN:
        line = line[:m.end()].upper() + line[m.end():]
    return line


def split_paragraphs(note_text: str) -> list[str]:
    return [normalize_line(line) for line in note_text.split("\n") if line.strip()]


def split_sentences(text: str) -> list[str]:
    text = text.strip()
    if not text:
        return []
    sentences = []
    start = 0
    for m in re.finditer(r"[.!?]+(\s+)", text):
        nxt = text[m.end():m.end() + 1]
        if "\n" not in m.group(1) and not (nxt.isupper() or nxt.isdigit()):
            continue
        before = text[start:m.start(1)]
        prev_word = before.rsplit(None, 1)[-1] if before.strip() else ""
        if prev_word.lower() in ABBREVIATIONS:
            continue
        chunk = before.strip()
        if chunk:
            sentences.append(chunk)
        start = m.end()
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences if sentences else [text]
