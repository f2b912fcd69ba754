import json

import pytest


@pytest.fixture(scope="session")
def tiny_bert_dir(tmp_path_factory):
    """A small randomly initialized BERT saved locally, with a word-level
    vocabulary, so tests never touch the network."""
    import torch
    from transformers import BertConfig, BertModel, BertTokenizer

    d = tmp_path_factory.mktemp("tinybert")
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
             "patient", "reports", "pain", "exam", "normal", "plan", "rest",
             "alpha", "beta", "gamma", "one", "two", "weeks", "stable",
             "fine", "follow", "up", "in", ".", ",", ":", "he", "is", "well"]
    (d / "vocab.txt").write_text("\n".join(vocab))
    torch.manual_seed(0)
    config = BertConfig(vocab_size=len(vocab), hidden_size=16,
                        num_hidden_layers=1, num_attention_heads=2,
                        intermediate_size=32, max_position_embeddings=32)
    BertModel(config).save_pretrained(d)
    BertTokenizer(vocab_file=str(d / "vocab.txt")).save_pretrained(d)
    return str(d)


@pytest.fixture(scope="session")
def tiny_st_dir(tmp_path_factory, tiny_bert_dir):
    """A sentence-transformers model wrapping the tiny BERT with mean pooling."""
    from sentence_transformers import SentenceTransformer, models

    word = models.Transformer(tiny_bert_dir, max_seq_length=32)
    pool = models.Pooling(word.get_word_embedding_dimension(),
                          pooling_mode="mean")
    st = SentenceTransformer(modules=[word, pool])
    d = tmp_path_factory.mktemp("tinyst")
    st.save(str(d))
    return str(d)


@pytest.fixture
def small_corpus(tmp_path):
    notes = [
        {"id": "n1", "text": "patient reports pain\nexam normal. plan rest\n\nfollow up in two weeks"},
        {"id": "n2", "text": "alpha beta gamma\nstable and fine"},
    ]
    path = tmp_path / "corpus.jsonl"
    path.write_text("\n".join(json.dumps(n) for n in notes) + "\n")
    return str(path)
