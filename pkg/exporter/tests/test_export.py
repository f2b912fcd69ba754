"""Exporter behavior: record layout, determinism, pooling composition."""
import numpy as np
import pytest

from soapseg_export.export import (ContextualEncoder, ExportError, ExportJob,
                                   _mean_pool, export_contextual,
                                   export_sentencevec)
from soapseg_export.textproc import split_paragraphs, split_sentences
from soapseg_export.vecfile import read_vecfile


def test_contextual_keys_follow_corpus_order(tiny_bert_dir, small_corpus, tmp_path):
    out = tmp_path / "v.bin"
    job = ExportJob(corpus_path=small_corpus, model_id=tiny_bert_dir,
                    output_path=str(out))
    export_contextual(job)
    dim, comment, vectors = read_vecfile(out)
    assert dim == 16
    assert list(vectors) == ["n1#0", "n1#1", "n1#2", "n2#0", "n2#1"]
    assert "layer=last" in comment


def test_contextual_reexport_bit_identical(tiny_bert_dir, small_corpus, tmp_path):
    a = tmp_path / "a.bin"
    b = tmp_path / "b.bin"
    for out in (a, b):
        export_contextual(ExportJob(corpus_path=small_corpus,
                                    model_id=tiny_bert_dir,
                                    output_path=str(out)))
    assert a.read_bytes() == b.read_bytes()


def test_single_sentence_paragraph_equals_sentence_vector(tiny_bert_dir):
    encoder = ContextualEncoder(tiny_bert_dir)
    text = "patient reports pain"
    assert split_sentences(text) == [text]
    sent_vec = encoder.encode_sentences([text], batch_size=4)[0]
    para_vec = _mean_pool(encoder.encode_sentences([text], batch_size=4))
    np.testing.assert_allclose(para_vec, sent_vec, atol=1e-7)


def test_two_identical_sentences_pool_to_the_same_vector(tiny_bert_dir):
    encoder = ContextualEncoder(tiny_bert_dir)
    vecs = encoder.encode_sentences(["exam normal", "exam normal"], batch_size=4)
    pooled = _mean_pool(vecs)
    np.testing.assert_allclose(pooled, vecs[0], atol=1e-6)


def test_long_sentence_truncated_with_warning(tiny_bert_dir, tmp_path):
    corpus = tmp_path / "long.jsonl"
    long_text = " ".join(["patient"] * 100)
    corpus.write_text('{"id": "n", "text": "%s"}\n' % long_text)
    job = ExportJob(corpus_path=str(corpus), model_id=tiny_bert_dir,
                    output_path=str(tmp_path / "v.bin"))
    with pytest.warns(UserWarning, match="truncated"):
        export_contextual(job)


def test_sentencevec_mode(tiny_st_dir, small_corpus, tmp_path):
    out = tmp_path / "sv.bin"
    job = ExportJob(corpus_path=small_corpus, model_id=tiny_st_dir,
                    output_path=str(out))
    export_sentencevec(job)
    dim, comment, vectors = read_vecfile(out)
    assert dim == 16
    assert list(vectors) == ["n1#0", "n1#1", "n1#2", "n2#0", "n2#1"]
    assert "sentencevec" in comment


def test_sentencevec_deterministic(tiny_st_dir, small_corpus, tmp_path):
    a = tmp_path / "a.bin"
    b = tmp_path / "b.bin"
    for out in (a, b):
        export_sentencevec(ExportJob(corpus_path=small_corpus,
                                     model_id=tiny_st_dir,
                                     output_path=str(out)))
    assert a.read_bytes() == b.read_bytes()


def test_missing_model_is_setup_error(small_corpus, tmp_path):
    job = ExportJob(corpus_path=small_corpus,
                    model_id=str(tmp_path / "no-such-model"),
                    output_path=str(tmp_path / "v.bin"))
    with pytest.raises(ExportError):
        export_contextual(job)


def test_bad_corpus_line_reports_location(tiny_bert_dir, tmp_path):
    corpus = tmp_path / "bad.jsonl"
    corpus.write_text('{"id": "a", "text": "x"}\n{"no_text": 1}\n')
    job = ExportJob(corpus_path=str(corpus), model_id=tiny_bert_dir,
                    output_path=str(tmp_path / "v.bin"))
    with pytest.raises(ExportError, match="2"):
        export_contextual(job)


def test_paragraph_split_drops_blank_lines():
    assert split_paragraphs("a\n\n  \nb") == ["a", "b"]


def test_cli_contextual(tiny_bert_dir, small_corpus, tmp_path):
    from soapseg_export.cli import main
    out = tmp_path / "cli.bin"
    code = main(["--corpus", small_corpus, "--model", tiny_bert_dir,
                 "--mode", "contextual", "--out", str(out)])
    assert code == 0
    assert out.exists()
