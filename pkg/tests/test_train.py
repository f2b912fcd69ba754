"""Training loop: determinism, learning on constructed corpora, divergence
handling, and checkpoint selection."""
import numpy as np
import pytest

from soapseg.errors import ContractViolation, TrainingDiverged
from soapseg.metrics import evaluate
from soapseg.tagger import Hyperparams, init_model, predict, train


def _random_corpus(rng, n_notes, d=8, k=5):
    mats = [rng.normal(size=(int(rng.integers(2, 6)), d)) for _ in range(n_notes)]
    ys = [rng.integers(0, k, size=m.shape[0]).tolist() for m in mats]
    return mats, ys


def _separable_corpus(rng, n_notes, d=8, k=5):
    """Labels are determined by which of the first k coordinates is hot."""
    mats, ys = [], []
    for _ in range(n_notes):
        n = int(rng.integers(3, 7))
        labels = rng.integers(0, k, size=n)
        x = rng.normal(scale=0.05, size=(n, d))
        for t, lab in enumerate(labels):
            x[t, lab] += 2.0
        mats.append(x)
        ys.append(labels.tolist())
    return mats, ys


def test_loss_decreases_on_small_corpus():
    rng = np.random.default_rng(0)
    mats, ys = _random_corpus(rng, 20)
    model = init_model(8, 5, seed=1, layers=1, hidden=4)
    hyper = Hyperparams(seed=1, batch_size=8, layers=1, hidden=4)
    trained, log = train(model, mats, ys, hyper)
    assert log[-1].train_loss < log[0].train_loss
    # final train macro-F1 beats the untrained model's
    before = evaluate(predict(model, mats), ys, list(range(5))).macro_f1
    after = evaluate(predict(trained, mats), ys, list(range(5))).macro_f1
    assert after > before


def test_same_seed_is_bit_identical():
    rng = np.random.default_rng(1)
    mats, ys = _random_corpus(rng, 12)
    hyper = Hyperparams(seed=7, batch_size=4, layers=1, hidden=4)
    m1, _ = train(init_model(8, 5, seed=7, layers=1, hidden=4), mats, ys, hyper)
    m2, _ = train(init_model(8, 5, seed=7, layers=1, hidden=4), mats, ys, hyper)
    for name in m1.params:
        assert m1.params[name].tobytes() == m2.params[name].tobytes()


def test_separable_corpus_reaches_perfect_validation():
    rng = np.random.default_rng(2)
    train_mats, train_ys = _separable_corpus(rng, 40)
    val_mats, val_ys = _separable_corpus(rng, 12)
    hyper = Hyperparams(seed=3, batch_size=4, layers=1, hidden=8)
    model = init_model(8, 5, seed=3, layers=1, hidden=8)
    trained, log = train(model, train_mats, train_ys, hyper,
                         validation=(val_mats, val_ys))
    best = max(e.val_macro_f1 for e in log)
    assert best == pytest.approx(1.0)
    report = evaluate(predict(trained, val_mats), val_ys, list(range(5)))
    assert report.macro_f1 == pytest.approx(1.0)


def test_nan_loss_aborts_with_location():
    rng = np.random.default_rng(3)
    mats, ys = _random_corpus(rng, 6)
    mats[2][0, 0] = np.nan
    hyper = Hyperparams(seed=1, batch_size=6, layers=1, hidden=4)
    with pytest.raises(TrainingDiverged, match=r"epoch 1, batch 0"):
        train(init_model(8, 5, seed=1, layers=1, hidden=4), mats, ys, hyper)


def test_empty_train_set_rejected():
    hyper = Hyperparams(seed=1, layers=1, hidden=4)
    with pytest.raises(ContractViolation):
        train(init_model(8, 5, seed=1, layers=1, hidden=4), [], [], hyper)


def test_best_checkpoint_matches_logged_max():
    rng = np.random.default_rng(4)
    mats, ys = _random_corpus(rng, 16)
    val_mats, val_ys = _random_corpus(rng, 8)
    hyper = Hyperparams(seed=5, batch_size=4, max_epochs=6, layers=1, hidden=4)
    trained, log = train(init_model(8, 5, seed=5, layers=1, hidden=4),
                         mats, ys, hyper, validation=(val_mats, val_ys))
    best_logged = max(e.val_macro_f1 for e in log)
    report = evaluate(predict(trained, val_mats), val_ys, list(range(5)))
    assert report.macro_f1 == pytest.approx(best_logged)
    assert sum(e.is_best for e in log) >= 1


def test_training_does_not_mutate_input_model():
    rng = np.random.default_rng(5)
    mats, ys = _random_corpus(rng, 8)
    model = init_model(8, 5, seed=6, layers=1, hidden=4)
    snapshot = {k: v.copy() for k, v in model.params.items()}
    train(model, mats, ys, Hyperparams(seed=6, batch_size=4, layers=1, hidden=4))
    for name in snapshot:
        np.testing.assert_array_equal(model.params[name], snapshot[name])
