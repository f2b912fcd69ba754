"""Lexical-cohesion topic segmentation over paragraphs.

Adjacent paragraphs are compared by the cosine of their term-frequency
vectors; a boundary is placed where similarity falls below an adaptive
threshold (mean minus half a standard deviation of the similarity profile).
The result is a binary same-topic encoding: flags[i] is True iff paragraph
i continues the topic of paragraph i-1, with flags[0] False by convention.
"""
from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from .errors import ContractViolation
from .preprocess import Paragraph, _load_word_list

DEFAULT_STOPWORDS = _load_word_list("stopwords.txt")

_WORD = re.compile(r"[a-z0-9]+")


@dataclass
class TopicFlags:
    flags: list[bool]

    def __len__(self) -> int:
        return len(self.flags)

    def __getitem__(self, i: int) -> bool:
        return self.flags[i]

    def __iter__(self):
        return iter(self.flags)


def _term_counts(text: str, stopwords: frozenset[str]) -> Counter:
    return Counter(w for w in _WORD.findall(text.lower()) if w not in stopwords)


def _cosine(a: Counter, b: Counter) -> float:
    if not a or not b:
        return 0.0
    dot = sum(cnt * b[term] for term, cnt in a.items())
    if dot == 0:
        return 0.0
    norm_a = math.sqrt(sum(c * c for c in a.values()))
    norm_b = math.sqrt(sum(c * c for c in b.values()))
    return dot / (norm_a * norm_b)


def adjacent_similarities(paragraphs: Sequence[Paragraph],
                          stopwords: frozenset[str] = DEFAULT_STOPWORDS) -> list[float]:
    """Cosine similarity between each paragraph and its predecessor."""
    counts = [_term_counts(p.text, stopwords) for p in paragraphs]
    return [_cosine(counts[i - 1], counts[i]) for i in range(1, len(counts))]


def mean_minus_half_std(sims: Sequence[float]) -> float:
    """Default threshold policy: mean of the similarity profile minus half
    its (population) standard deviation."""
    mean = sum(sims) / len(sims)
    std = math.sqrt(sum((s - mean) ** 2 for s in sims) / len(sims))
    return mean - 0.5 * std


def segment(paragraphs: Sequence[Paragraph],
            stopwords: frozenset[str] = DEFAULT_STOPWORDS,
            threshold_policy=mean_minus_half_std) -> TopicFlags:
    """Compute same-topic flags for a paragraph sequence.

    Boundary rules, in order:
      * zero similarity (no shared terms) is always a boundary;
      * if every adjacent similarity is equal and positive, there is no
        evidence for any boundary and every flag after index 0 is True;
      * otherwise a boundary is placed where similarity < threshold_policy.
    """
    if len(paragraphs) == 0:
        raise ContractViolation("segment requires at least one paragraph")
    if len(paragraphs) == 1:
        return TopicFlags([False])

    sims = adjacent_similarities(paragraphs, stopwords)
    if all(s == sims[0] for s in sims):
        flags = [s > 0.0 for s in sims]
    else:
        tau = threshold_policy(sims)
        flags = [s > 0.0 and s >= tau for s in sims]
    return TopicFlags([False] + flags)
