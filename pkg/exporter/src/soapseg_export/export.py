"""Export jobs: one embedding-file record per note paragraph.

Two composition paths. The sentence-vector path hands each whole paragraph
to a sentence-embedding model. The contextual path splits a paragraph into
sentences, mean-pools token representations per sentence, then mean-pools
the sentence vectors; sentences beyond the token limit are truncated with a
warning. Model parameters stay frozen; exports are deterministic.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from .textproc import split_paragraphs, split_sentences
from .vecfile import write_vecfile


class ExportError(Exception):
    pass


@dataclass
class ExportJob:
    corpus_path: str
    model_id: str
    output_path: str
    max_tokens: int = 512
    batch_size: int = 16
    comment: Optional[str] = None


def iter_corpus(path: str | Path) -> Iterator[tuple[str, str]]:
    """Yield (note_id, text) from a JSONL corpus, in file order."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                yield record["id"], record["text"]
            except (json.JSONDecodeError, KeyError) as exc:
                raise ExportError(f"{path}:{lineno}: bad corpus line: {exc}") from exc


def _mean_pool(rows: np.ndarray) -> np.ndarray:
    """Float64 arithmetic mean per dimension, emitted as float32."""
    rows = np.asarray(rows, dtype=np.float64)
    return (rows.sum(axis=0) / rows.shape[0]).astype(np.float32)


def _load_sentencevec_model(model_id: str):
    try:
        from sentence_transformers import SentenceTransformer
    except ImportError as exc:
        raise ExportError(
            "sentence-transformers is required for sentencevec mode") from exc
    try:
        return SentenceTransformer(model_id)
    except Exception as exc:
        raise ExportError(f"cannot load sentence-vector model {model_id!r}: {exc}") from exc


def export_sentencevec(job: ExportJob) -> Path:
    """One model-encoded vector per paragraph, written in corpus order."""
    model = _load_sentencevec_model(job.model_id)
    entries: list[tuple[str, np.ndarray]] = []
    keys: list[str] = []
    paragraphs: list[str] = []
    for note_id, text in iter_corpus(job.corpus_path):
        for index, para in enumerate(split_paragraphs(text)):
            keys.append(f"{note_id}#{index}")
            paragraphs.append(para)
    if not paragraphs:
        raise ExportError("corpus contains no paragraphs")
    vectors = model.encode(paragraphs, batch_size=job.batch_size,
                           convert_to_numpy=True, show_progress_bar=False)
    entries = list(zip(keys, np.asarray(vectors, dtype=np.float32)))
    comment = job.comment or f"mode=sentencevec model={job.model_id}"
    write_vecfile(entries, job.output_path, comment=comment)
    return Path(job.output_path)


class ContextualEncoder:
    """Frozen transformer encoder with masked mean pooling over tokens."""

    def __init__(self, model_id: str, max_tokens: int = 512):
        try:
            import torch
            from transformers import AutoModel, AutoTokenizer
        except ImportError as exc:
            raise ExportError("torch and transformers are required") from exc
        self._torch = torch
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(model_id)
            self.model = AutoModel.from_pretrained(model_id)
        except Exception as exc:
            raise ExportError(f"cannot load model {model_id!r}: {exc}") from exc
        self.model.eval()
        model_cap = getattr(self.model.config, "max_position_embeddings", max_tokens)
        self.max_tokens = min(max_tokens, model_cap)
        self.dim = self.model.config.hidden_size

    def encode_sentences(self, sentences: list[str], batch_size: int) -> np.ndarray:
        """One mean-pooled vector per sentence, final hidden layer."""
        torch = self._torch
        out = np.zeros((len(sentences), self.dim), dtype=np.float32)
        for begin in range(0, len(sentences), batch_size):
            chunk = sentences[begin:begin + batch_size]
            lengths = [len(self.tokenizer(s)["input_ids"]) for s in chunk]
            for s, n in zip(chunk, lengths):
                if n > self.max_tokens:
                    warnings.warn(
                        f"sentence of {n} tokens truncated to {self.max_tokens}: "
                        f"{s[:40]!r}...", stacklevel=3)
            enc = self.tokenizer(chunk, return_tensors="pt", padding=True,
                                 truncation=True, max_length=self.max_tokens)
            with torch.no_grad():
                hidden = self.model(**enc).last_hidden_state
            mask = enc["attention_mask"].unsqueeze(-1).to(hidden.dtype)
            summed = (hidden * mask).sum(dim=1)
            counts = mask.sum(dim=1)
            pooled = (summed / counts).cpu().numpy().astype(np.float32)
            out[begin:begin + len(chunk)] = pooled
        return out


def export_contextual(job: ExportJob) -> Path:
    """Sentence-split, pool tokens per sentence, pool sentences per paragraph."""
    encoder = ContextualEncoder(job.model_id, job.max_tokens)
    entries: list[tuple[str, np.ndarray]] = []
    for note_id, text in iter_corpus(job.corpus_path):
        for index, para in enumerate(split_paragraphs(text)):
            sentences = split_sentences(para)
            if not sentences:
                sentences = [para]
            sent_vecs = encoder.encode_sentences(sentences, job.batch_size)
            entries.append((f"{note_id}#{index}", _mean_pool(sent_vecs)))
    if not entries:
        raise ExportError("corpus contains no paragraphs")
    comment = job.comment or (f"mode=contextual model={job.model_id} "
                              f"layer=last pooling=mean max_tokens={encoder.max_tokens}")
    write_vecfile(entries, job.output_path, comment=comment)
    return Path(job.output_path)
