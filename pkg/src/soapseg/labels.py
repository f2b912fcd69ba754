"""SOAP label enumeration and label-scheme handling.

Notes are labeled per paragraph with one of five classes (Subjective,
Objective, Assessment, Plan, or out-of-structure). Corpora that do not
separate Assessment from Plan use a merged four-class scheme instead.
"""
from __future__ import annotations

from enum import Enum
from typing import Sequence


class SoapLabel(Enum):
    SUBJECTIVE = "S"
    OBJECTIVE = "O"
    ASSESSMENT = "A"
    PLAN = "P"
    OUT = "Out"
    ASSESSMENT_AND_PLAN = "A&P"

    @property
    def display(self) -> str:
        return self.value

    @classmethod
    def parse(cls, token: str) -> "SoapLabel":
        """Accept either the enum name ("SUBJECTIVE") or display form ("S")."""
        token = token.strip()
        for label in cls:
            if token == label.value or token.upper() == label.name:
                return label
        raise ValueError(f"unknown SOAP label: {token!r}")


class LabelScheme:
    """An ordered, fixed label set. Index order defines tag indices in models."""

    def __init__(self, name: str, labels: Sequence[SoapLabel]):
        self.name = name
        self.labels = tuple(labels)
        self._index = {lab: i for i, lab in enumerate(self.labels)}
        if len(self._index) != len(self.labels):
            raise ValueError("duplicate label in scheme")

    @property
    def size(self) -> int:
        return len(self.labels)

    def index(self, label: SoapLabel) -> int:
        return self._index[label]

    def __contains__(self, label: SoapLabel) -> bool:
        return label in self._index

    def __iter__(self):
        return iter(self.labels)

    def __repr__(self) -> str:
        return f"LabelScheme({self.name})"

    def encode(self, labels: Sequence[SoapLabel]) -> list[int]:
        return [self._index[lab] for lab in labels]

    def decode(self, indices: Sequence[int]) -> list[SoapLabel]:
        return [self.labels[i] for i in indices]


SCHEME_SOAP5 = LabelScheme(
    "soap5",
    [SoapLabel.SUBJECTIVE, SoapLabel.OBJECTIVE, SoapLabel.ASSESSMENT,
     SoapLabel.PLAN, SoapLabel.OUT],
)

SCHEME_SOAP4 = LabelScheme(
    "soap4",
    [SoapLabel.SUBJECTIVE, SoapLabel.OBJECTIVE,
     SoapLabel.ASSESSMENT_AND_PLAN, SoapLabel.OUT],
)

SCHEMES = {s.name: s for s in (SCHEME_SOAP5, SCHEME_SOAP4)}

# Source-label -> target-label map for adapting a five-class model to a
# corpus that annotates Assessment and Plan as one merged section.
MERGE_AP_MAP = {
    SoapLabel.SUBJECTIVE: SoapLabel.SUBJECTIVE,
    SoapLabel.OBJECTIVE: SoapLabel.OBJECTIVE,
    SoapLabel.ASSESSMENT: SoapLabel.ASSESSMENT_AND_PLAN,
    SoapLabel.PLAN: SoapLabel.ASSESSMENT_AND_PLAN,
    SoapLabel.OUT: SoapLabel.OUT,
}


def merge_assessment_plan(labels: Sequence[SoapLabel]) -> list[SoapLabel]:
    """Project five-class labels into the merged four-class space."""
    return [MERGE_AP_MAP.get(lab, lab) for lab in labels]


def scheme_for_k(k: int) -> LabelScheme:
    if k == 5:
        return SCHEME_SOAP5
    if k == 4:
        return SCHEME_SOAP4
    raise ValueError(f"no label scheme with {k} classes")
