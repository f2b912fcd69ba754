"""Built-in generator styles for cross-corpus experiments.

styleA mimics a source hospital: canonical section headers, five-class
labels. styleB mimics a target hospital: a disjoint header inventory, a
merged Assessment & Plan section (four-class labels), partially shifted
section vocabulary, and different boilerplate around the note body. The
word inventories share a common clinical core so that a model trained on
one style retains some signal on the other, while headers and signature
conventions do not transfer at all.
"""
from __future__ import annotations

from .corpus import GeneratorConfig
from .errors import ConfigError
from .labels import SoapLabel

_S = SoapLabel.SUBJECTIVE
_O = SoapLabel.OBJECTIVE
_A = SoapLabel.ASSESSMENT
_P = SoapLabel.PLAN
_AP = SoapLabel.ASSESSMENT_AND_PLAN
_OUT = SoapLabel.OUT

# Shared clinical core, present in both styles.
_SHARED = {
    _S: ["patient", "reports", "denies", "pain", "symptoms", "onset",
         "worsening", "improved", "sleep", "appetite", "mood", "headache",
         "nausea", "cough", "fatigue", "weeks"],
    _O: ["alert", "oriented", "heart", "lungs", "clear", "regular", "rate",
         "pressure", "afebrile", "abdomen", "soft", "extremities", "edema",
         "labs", "unremarkable", "stable"],
    _A: ["diagnosis", "consistent", "likely", "chronic", "acute",
         "controlled", "improving", "moderate", "uncomplicated", "findings"],
    _P: ["continue", "start", "increase", "taper", "recheck", "monitor",
         "medication", "dose", "therapy", "referral", "imaging", "return"],
}

# Style-specific vocabulary on top of the shared core.
_A_ONLY = {
    _S: ["interval", "complaint", "describes", "episodes", "radiating",
         "intermittent", "tolerating", "dizziness", "states", "notes"],
    _O: ["auscultation", "murmur", "gallop", "palpation", "tenderness",
         "distension", "pulses", "intact", "mucosa", "turgor"],
    _A: ["reassuring", "favorable", "exacerbation", "remission",
         "attributable", "secondary", "etiology", "benign"],
    _P: ["titrate", "adherence", "counseling", "prophylaxis", "outpatient",
         "schedule", "reassess", "discontinue"],
    _OUT: ["electronically", "signed", "attending", "physician", "clinic",
           "record", "dictated", "transcribed", "confidential", "document",
           "copy", "chart"],
}
_B_ONLY = {
    _S: ["veteran", "endorses", "flareups", "baseline", "ambulatory",
         "selfreported", "duration", "triggers", "concern", "recent",
         "housing", "transport", "caregiver", "screening"],
    _O: ["telemetry", "saturation", "ventilated", "drains", "lines",
         "bladder", "output", "catheter", "weaned", "sedation",
         "dressing", "restraints", "ambulation", "intake"],
    _AP: ["prognosis", "anticipate", "goals", "disposition", "transition",
          "escalate", "wean", "consult", "standing", "orders",
          "pathway", "criteria", "huddle", "rounding"],
    _OUT: ["station", "facility", "printed", "timestamp", "wardclerk",
           "terminal", "batch", "archive", "form", "sheet", "tele", "page"],
}

_HEADERS_A = {
    _S: ["Subjective"],
    _O: ["Objective"],
    _A: ["Assessment"],
    _P: ["Plan"],
}
_HEADERS_B = {
    _S: ["Interval History", "Visit Narrative", "Patient Narrative"],
    _O: ["Exam Findings", "Measured Data", "Todays Measurements"],
    _AP: ["Assessment & Plan", "Impression and Plan of Care", "Clinical Impression"],
}


def style_a(seed: int = 0, **overrides) -> GeneratorConfig:
    """Source-hospital style: canonical headers, five-class sections."""
    vocab = {
        _S: _SHARED[_S] + _A_ONLY[_S],
        _O: _SHARED[_O] + _A_ONLY[_O],
        _A: _SHARED[_A] + _A_ONLY[_A],
        _P: _SHARED[_P] + _A_ONLY[_P],
        _OUT: _A_ONLY[_OUT],
    }
    params = dict(style_id="styleA", header_pools=_HEADERS_A, vocab_pools=vocab,
                  section_omission_prob=0.0, list_format_prob=0.15,
                  paragraphs_per_section=(1, 2), seed=seed)
    params.update(overrides)
    return GeneratorConfig(**params)


def style_b(seed: int = 0, **overrides) -> GeneratorConfig:
    """Target-hospital style: disjoint headers, merged Assessment & Plan."""
    vocab = {
        _S: _SHARED[_S] + _B_ONLY[_S],
        _O: _SHARED[_O] + _B_ONLY[_O],
        _AP: _SHARED[_A] + _SHARED[_P] + _B_ONLY[_AP],
        _OUT: _B_ONLY[_OUT],
    }
    params = dict(style_id="styleB", header_pools=_HEADERS_B, vocab_pools=vocab,
                  section_omission_prob=0.12, list_format_prob=0.35,
                  paragraphs_per_section=(1, 3), seed=seed)
    params.update(overrides)
    return GeneratorConfig(**params)


def style_shifted(seed: int = 0, **overrides) -> GeneratorConfig:
    """Adversarial style: headers and vocabulary fully disjoint from styleA."""
    vocab = {
        _S: _B_ONLY[_S],
        _O: _B_ONLY[_O],
        _AP: _B_ONLY[_AP],
        _OUT: _B_ONLY[_OUT],
    }
    headers = {
        _S: ["Narrative Input"],
        _O: ["Device Readings"],
        _AP: ["Forward Course"],
    }
    params = dict(style_id="styleX", header_pools=headers, vocab_pools=vocab,
                  section_omission_prob=0.1, list_format_prob=0.35,
                  paragraphs_per_section=(1, 2), seed=seed)
    params.update(overrides)
    return GeneratorConfig(**params)


BUILTIN_STYLES = {
    "styleA": style_a,
    "styleB": style_b,
    "styleX": style_shifted,
}


def builtin_style(name: str, seed: int = 0, **overrides) -> GeneratorConfig:
    try:
        factory = BUILTIN_STYLES[name]
    except KeyError:
        raise ConfigError(f"unknown builtin style {name!r}; "
                          f"choices: {sorted(BUILTIN_STYLES)}") from None
    return factory(seed=seed, **overrides)
