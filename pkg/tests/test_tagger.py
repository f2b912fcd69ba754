"""Tagger model: LSTM stack behavior, exact gradients, checkpointing, and
transfer initialization."""
import math

import numpy as np
import pytest

from soapseg import lstm
from soapseg.errors import ConfigError, ContractViolation, FormatError
from soapseg.labels import (MERGE_AP_MAP, SCHEME_SOAP4, SCHEME_SOAP5, SoapLabel)
from soapseg.tagger import (Hyperparams, TaggerModel, backward,
                            batch_nll_and_grads, forward_scores, init_model,
                            load_model, nll_loss, parameter_shapes, partition,
                            predict, save_model, sequence_score, transfer_init,
                            viterbi_decode)


def _zero_model(d=4, k=5, layers=1, hidden=2):
    params = {name: np.zeros(shape)
              for name, shape in parameter_shapes(d, k, layers, hidden).items()}
    return TaggerModel(d=d, k=k, layers=layers, hidden=hidden, params=params)


class TestForwardScores:
    def test_zero_weights_broadcast_bias(self):
        model = _zero_model()
        model.params["proj.b"] = np.array([1.0, -2.0, 0.5, 0.0, 3.0])
        scores = forward_scores(model, np.random.default_rng(0).normal(size=(3, 4)))
        for row in scores:
            np.testing.assert_allclose(row, model.params["proj.b"])

    def test_bidirectional_symmetry(self):
        """Reversing the input and swapping direction weights reverses the
        time axis and swaps the forward/backward halves of H."""
        rng = np.random.default_rng(1)
        d, hidden = 3, 2
        params = {}
        for direction in ("fw", "bw"):
            params[f"lstm0.{direction}.W"] = rng.normal(size=(d, 4 * hidden))
            params[f"lstm0.{direction}.U"] = rng.normal(size=(hidden, 4 * hidden))
            params[f"lstm0.{direction}.b"] = rng.normal(size=4 * hidden)
        swapped = {
            "lstm0.fw.W": params["lstm0.bw.W"], "lstm0.fw.U": params["lstm0.bw.U"],
            "lstm0.fw.b": params["lstm0.bw.b"],
            "lstm0.bw.W": params["lstm0.fw.W"], "lstm0.bw.U": params["lstm0.fw.U"],
            "lstm0.bw.b": params["lstm0.fw.b"],
        }
        x = rng.normal(size=(1, 5, d))
        mask = np.ones((1, 5))
        h, _ = lstm.forward(params, x, mask, layers=1, hidden=hidden)
        h_swap, _ = lstm.forward(swapped, x[:, ::-1, :].copy(), mask, layers=1,
                                 hidden=hidden)
        reversed_swapped = np.concatenate(
            [h_swap[:, ::-1, hidden:], h_swap[:, ::-1, :hidden]], axis=2)
        np.testing.assert_allclose(h, reversed_swapped, atol=1e-12)

    def test_matches_scalar_lstm_trace(self):
        """Independent scalar implementation of the gate equations, one
        hidden unit per direction, checked against the stack."""
        d, hidden, k = 4, 1, 4
        rng = np.random.default_rng(2)
        model = init_model(d, k, seed=3, layers=1, hidden=hidden)
        x = rng.normal(size=(2, d))

        def sig(v):
            return 1.0 / (1.0 + math.exp(-v))

        def scalar_direction(seq, w, u, b):
            h = c = 0.0
            out = []
            for row in seq:
                a = [float(row @ w[:, j]) + h * float(u[0, j]) + float(b[j])
                     for j in range(4)]
                i, f, g, o = sig(a[0]), sig(a[1]), math.tanh(a[2]), sig(a[3])
                c = f * c + i * g
                h = o * math.tanh(c)
                out.append(h)
            return out

        fw = scalar_direction(x, model.params["lstm0.fw.W"],
                              model.params["lstm0.fw.U"], model.params["lstm0.fw.b"])
        bw = scalar_direction(x[::-1], model.params["lstm0.bw.W"],
                              model.params["lstm0.bw.U"], model.params["lstm0.bw.b"])
        bw = bw[::-1]
        w_p, b_p = model.params["proj.W"], model.params["proj.b"]
        expected = np.array([[fw[t] * w_p[0, j] + bw[t] * w_p[1, j] + b_p[j]
                              for j in range(k)] for t in range(2)])
        got = forward_scores(model, x)
        np.testing.assert_allclose(got, expected, atol=1e-12)

    def test_dimension_mismatch(self):
        model = _zero_model(d=4)
        with pytest.raises(ContractViolation):
            forward_scores(model, np.zeros((2, 5)))


class TestModelCrfOps:
    def test_nll_uniform_single_step(self):
        model = _zero_model(d=4, k=5)
        x = np.zeros((1, 4))
        assert nll_loss(model, x, [2]) == pytest.approx(math.log(5.0), rel=1e-12)

    def test_nll_saturation(self):
        model = _zero_model(d=4, k=5)
        scores = np.zeros((3, 5))
        gold = [1, 2, 3]
        for t, y in enumerate(gold):
            scores[t, y] = 1e4
        crf = model.crf_params()
        from soapseg.crf import partition as crf_partition, sequence_score as crf_seq
        loss = crf_partition(scores, crf) - crf_seq(scores, crf, gold)
        assert loss == pytest.approx(0.0, abs=1e-8)

    def test_viterbi_and_partition_wrappers(self):
        rng = np.random.default_rng(4)
        model = init_model(4, 5, seed=5, layers=1, hidden=2)
        x = rng.normal(size=(3, 4))
        scores = forward_scores(model, x)
        path = viterbi_decode(model, scores)
        assert len(path) == 3
        best = sequence_score(model, scores, path)
        assert best >= sequence_score(model, scores, [0, 0, 0]) - 1e-12
        assert partition(model, scores) >= best


def _relative_error(a, b):
    return abs(a - b) / max(1e-2, abs(a), abs(b))


class TestGradients:
    @pytest.mark.parametrize("seed", [1, 2, 3])
    def test_full_gradient_check(self, seed):
        rng = np.random.default_rng(seed)
        model = init_model(5, 5, seed=seed, layers=3, hidden=3)
        x = rng.normal(size=(3, 5))
        y = rng.integers(0, 5, size=3).tolist()
        grads = backward(model, x, y)
        eps = 1e-5
        for name, arr in model.params.items():
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                old = arr[idx]
                arr[idx] = old + eps
                up = nll_loss(model, x, y)
                arr[idx] = old - eps
                down = nll_loss(model, x, y)
                arr[idx] = old
                fd = (up - down) / (2 * eps)
                assert _relative_error(fd, grads[name][idx]) < 1e-4, name

    def test_zero_input_annihilates_input_weight_gradients(self):
        model = init_model(4, 5, seed=7, layers=2, hidden=3)
        x = np.zeros((3, 4))
        grads = backward(model, x, [0, 1, 2])
        np.testing.assert_allclose(grads["lstm0.fw.W"], 0.0, atol=1e-15)
        np.testing.assert_allclose(grads["lstm0.bw.W"], 0.0, atol=1e-15)

    def test_one_step_descends(self):
        rng = np.random.default_rng(8)
        model = init_model(4, 5, seed=8, layers=1, hidden=3)
        x = rng.normal(size=(4, 4))
        y = [0, 1, 2, 3]
        before = nll_loss(model, x, y)
        grads = backward(model, x, y)
        for name in model.params:
            model.params[name] -= 0.05 * grads[name]
        assert nll_loss(model, x, y) < before


class TestBatching:
    def test_padded_batch_equals_per_note(self):
        rng = np.random.default_rng(9)
        model = init_model(6, 5, seed=9, layers=2, hidden=4)
        mats = [rng.normal(size=(n, 6)) for n in (2, 7, 1, 4)]
        ys = [rng.integers(0, 5, size=m.shape[0]).tolist() for m in mats]
        loss_b, grads_b = batch_nll_and_grads(model, mats, ys)
        singles = [batch_nll_and_grads(model, [m], [y])
                   for m, y in zip(mats, ys)]
        mean_loss = float(np.mean([s[0] for s in singles]))
        assert abs(loss_b - mean_loss) < 1e-10
        for name in grads_b:
            mean_grad = sum(s[1][name] for s in singles) / len(singles)
            assert np.max(np.abs(grads_b[name] - mean_grad)) < 1e-10

    def test_label_length_mismatch(self):
        model = _zero_model()
        with pytest.raises(ContractViolation):
            batch_nll_and_grads(model, [np.zeros((3, 4))], [[0, 1]])

    def test_predict_batching_consistent(self):
        rng = np.random.default_rng(10)
        model = init_model(4, 5, seed=10, layers=1, hidden=3)
        mats = [rng.normal(size=(n, 4)) for n in (3, 5, 2, 6, 1)]
        all_at_once = predict(model, mats, eval_batch=128)
        tiny_batches = predict(model, mats, eval_batch=2)
        assert all_at_once == tiny_batches


class TestCheckpoint:
    def test_roundtrip_bit_identical(self, tmp_path):
        model = init_model(8, 5, seed=11, layers=2, hidden=4)
        path = tmp_path / "m.bin"
        save_model(model, path)
        back = load_model(path)
        assert back.d == model.d and back.k == model.k
        assert back.layers == model.layers and back.hidden == model.hidden
        for name, arr in model.params.items():
            assert back.params[name].tobytes() == arr.tobytes()

    def test_roundtrip_same_decodes(self, tmp_path):
        rng = np.random.default_rng(12)
        model = init_model(6, 4, seed=12, layers=1, hidden=3)
        path = tmp_path / "m.bin"
        save_model(model, path)
        back = load_model(path)
        mats = [rng.normal(size=(4, 6)) for _ in range(3)]
        assert predict(model, mats) == predict(back, mats)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "m.bin"
        path.write_bytes(b"NOTATAG1" + b"\x00" * 64)
        with pytest.raises(FormatError, match="magic"):
            load_model(path)

    def test_corrupted_length_reports_offset(self, tmp_path):
        model = init_model(8, 5, seed=13, layers=1, hidden=2)
        path = tmp_path / "m.bin"
        save_model(model, path)
        data = path.read_bytes()
        path.write_bytes(data[:len(data) // 2])
        with pytest.raises(FormatError, match="offset"):
            load_model(path)

    def test_version_mismatch(self, tmp_path):
        model = init_model(8, 5, seed=14, layers=1, hidden=2)
        path = tmp_path / "m.bin"
        save_model(model, path)
        data = bytearray(path.read_bytes())
        data[8] = 99
        path.write_bytes(bytes(data))
        with pytest.raises(FormatError, match="version"):
            load_model(path)

    def test_k_mismatch_detectable(self, tmp_path):
        model = init_model(8, 4, seed=15, layers=1, hidden=2)
        path = tmp_path / "m.bin"
        save_model(model, path)
        back = load_model(path)
        assert back.k == 4
        assert back.scheme is SCHEME_SOAP4


class TestTransferInit:
    def test_identity_map_is_noop(self):
        model = init_model(8, 5, seed=16, layers=2, hidden=3)
        identity = {lab: lab for lab in SCHEME_SOAP5}
        out = transfer_init(model, identity)
        assert out.k == 5
        for name, arr in model.params.items():
            np.testing.assert_array_equal(out.params[name], arr)

    def test_merged_projection_is_average(self):
        model = init_model(8, 5, seed=17, layers=1, hidden=3)
        out = transfer_init(model, MERGE_AP_MAP)
        assert out.k == 4
        w, b = model.params["proj.W"], model.params["proj.b"]
        i_a = SCHEME_SOAP5.index(SoapLabel.ASSESSMENT)
        i_p = SCHEME_SOAP5.index(SoapLabel.PLAN)
        j = SCHEME_SOAP4.index(SoapLabel.ASSESSMENT_AND_PLAN)
        np.testing.assert_allclose(out.params["proj.W"][:, j],
                                   (w[:, i_a] + w[:, i_p]) / 2)
        assert out.params["proj.b"][j] == pytest.approx((b[i_a] + b[i_p]) / 2)

    def test_merged_transition_is_pair_average(self):
        model = init_model(8, 5, seed=18, layers=1, hidden=3)
        out = transfer_init(model, MERGE_AP_MAP)
        t5 = model.params["crf.trans"]
        i_s = SCHEME_SOAP5.index(SoapLabel.SUBJECTIVE)
        i_a = SCHEME_SOAP5.index(SoapLabel.ASSESSMENT)
        i_p = SCHEME_SOAP5.index(SoapLabel.PLAN)
        j_s = SCHEME_SOAP4.index(SoapLabel.SUBJECTIVE)
        j_ap = SCHEME_SOAP4.index(SoapLabel.ASSESSMENT_AND_PLAN)
        expected = (t5[i_s, i_a] + t5[i_s, i_p]) / 2
        assert out.params["crf.trans"][j_s, j_ap] == pytest.approx(expected)
        both = (t5[np.ix_([i_a, i_p], [i_a, i_p])]).mean()
        assert out.params["crf.trans"][j_ap, j_ap] == pytest.approx(both)

    def test_lstm_copied_verbatim(self):
        model = init_model(8, 5, seed=19, layers=2, hidden=3)
        out = transfer_init(model, MERGE_AP_MAP)
        for name, arr in model.params.items():
            if name.startswith("lstm"):
                np.testing.assert_array_equal(out.params[name], arr)

    def test_unmapped_source_label_rejected(self):
        model = init_model(8, 5, seed=20, layers=1, hidden=2)
        partial = dict(MERGE_AP_MAP)
        del partial[SoapLabel.OUT]
        with pytest.raises(ConfigError):
            transfer_init(model, partial)


class TestInit:
    def test_deterministic(self):
        a = init_model(16, 5, seed=21)
        b = init_model(16, 5, seed=21)
        for name in a.params:
            np.testing.assert_array_equal(a.params[name], b.params[name])

    def test_bounds(self):
        model = init_model(16, 5, seed=22, layers=1, hidden=4)
        w = model.params["lstm0.fw.W"]
        assert np.max(np.abs(w)) <= 1.0 / math.sqrt(16)

    def test_bad_k(self):
        with pytest.raises(ConfigError):
            init_model(16, 3, seed=0)

    def test_hyperparams_validation(self):
        with pytest.raises(ConfigError):
            Hyperparams(batch_size=0)
        with pytest.raises(ConfigError):
            Hyperparams(learning_rate=-1)
