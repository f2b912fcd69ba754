"""soapseg: weakly supervised SOAP-section labeling for clinical-style notes.

Pipeline: synthetic or external JSONL corpora -> preprocessing (paragraphs,
headers, sentences) -> lexical topic segmentation -> rule-based weak labels
-> paragraph vectors -> BiLSTM-CRF tagger -> evaluation and experiment
protocols (cross-style zero-shot, transfer vs. random initialization at
several train sizes, train-size ablation, stage timing).
"""

__version__ = "0.1.0"

from .corpus import (GeneratorConfig, LabeledNote, Provenance, RawNote,
                     generate_corpus, read_corpus, write_corpus)
from .labels import (SCHEME_SOAP4, SCHEME_SOAP5, LabelScheme, SoapLabel,
                     merge_assessment_plan)
from .metrics import cohen_kappa, evaluate, spearman_rho, welch_t_test
from .preprocess import (HeaderLexicon, Paragraph, extract_header,
                         is_explicitly_structured, normalize, split_paragraphs,
                         split_sentences)
from .tagger import (Hyperparams, TaggerModel, init_model, load_model,
                     save_model, train, transfer_init)
from .topicseg import TopicFlags, segment
from .vectorize import (HashedProvider, FileProvider, NoteMatrix,
                        hashed_vectorize, load_embeddings, pool_sentences,
                        vectorize_corpus, vectorize_note, write_embeddings)
from .weaklabel import build_weak_corpus, weak_label

__all__ = [
    "GeneratorConfig", "LabeledNote", "Provenance", "RawNote",
    "generate_corpus", "read_corpus", "write_corpus",
    "SCHEME_SOAP4", "SCHEME_SOAP5", "LabelScheme", "SoapLabel",
    "merge_assessment_plan",
    "cohen_kappa", "evaluate", "spearman_rho", "welch_t_test",
    "HeaderLexicon", "Paragraph", "extract_header", "is_explicitly_structured",
    "normalize", "split_paragraphs", "split_sentences",
    "Hyperparams", "TaggerModel", "init_model", "load_model", "save_model",
    "train", "transfer_init",
    "TopicFlags", "segment",
    "HashedProvider", "FileProvider", "NoteMatrix", "hashed_vectorize",
    "load_embeddings", "pool_sentences", "vectorize_corpus", "vectorize_note",
    "write_embeddings",
    "build_weak_corpus", "weak_label",
    "__version__",
]
