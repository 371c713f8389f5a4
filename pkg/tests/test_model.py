import numpy as np
import pytest

from icnn import (BadMagicError, ModelConfig, ShapeMismatchError,
                  TruncatedModelError, UnsupportedVersionError, backward,
                  build_vocab, cross_entropy_with_grad, encode,
                  finite_difference_gradcheck, forward, init_model, load_model,
                  save_model)

from conftest import random_params, random_sentence


def hand_model():
    """d_e = d_m = 1, one width-2 kernel, all-ones weights: a two-token
    sentence with embeddings 1 and 2 must produce scores [3, -3]."""
    vocab = build_vocab(["a b"])
    config = ModelConfig(emb_dim=1, feat_dim=1, max_kernel=2, n_classes=2, seed=0)
    params = init_model(config, vocab, ["pos", "neg"])
    params.embeddings = np.array([[0.0], [0.0], [1.0], [2.0]], dtype=np.float32)
    params.kernels[2] = np.ones((2, 1, 1), dtype=np.float32)
    params.out_weights = np.array([[1.0, -1.0]], dtype=np.float32)
    return params, encode(["a", "b"], vocab)


def set_params_from_flat(params, arrays):
    params.embeddings = arrays[0]
    i = 1
    for n in params.widths:
        params.kernels[n] = arrays[i].reshape(params.kernels[n].shape)
        params.kernel_biases[n] = arrays[i + 1]
        i += 2
    params.out_weights = arrays[i]
    params.out_bias = arrays[i + 1]


def flat_param_list(params):
    arrays = [params.embeddings]
    for n in params.widths:
        arrays.append(params.kernels[n])
        arrays.append(params.kernel_biases[n])
    arrays.append(params.out_weights)
    arrays.append(params.out_bias)
    return arrays


def flat_grad_list(params, grads):
    arrays = [grads.embeddings]
    for n in params.widths:
        arrays.append(grads.kernels[n])
        arrays.append(grads.kernel_biases[n])
    arrays.append(grads.out_weights)
    arrays.append(grads.out_bias)
    return arrays


class TestInit:
    def test_same_seed_identical(self):
        vocab = build_vocab(["x y z"])
        config = ModelConfig(emb_dim=4, feat_dim=3, max_kernel=3, seed=11)
        a = init_model(config, vocab, ["p", "q"])
        b = init_model(config, vocab, ["p", "q"])
        np.testing.assert_array_equal(a.embeddings, b.embeddings)
        for n in a.widths:
            np.testing.assert_array_equal(a.kernels[n], b.kernels[n])
        np.testing.assert_array_equal(a.out_weights, b.out_weights)

    def test_different_seeds_differ(self):
        vocab = build_vocab(["x y z"])
        a = init_model(ModelConfig(emb_dim=4, feat_dim=3, max_kernel=3, seed=1),
                       vocab, ["p", "q"])
        b = init_model(ModelConfig(emb_dim=4, feat_dim=3, max_kernel=3, seed=2),
                       vocab, ["p", "q"])
        assert not np.array_equal(a.embeddings, b.embeddings)

    def test_biases_zero_and_range(self):
        vocab = build_vocab(["x y z"])
        params = init_model(ModelConfig(emb_dim=4, feat_dim=3, max_kernel=4, seed=3),
                            vocab, ["p", "q"])
        for n in params.widths:
            assert not params.kernel_biases[n].any()
        assert not params.out_bias.any()
        assert np.all(np.abs(params.embeddings) <= 0.1)

    def test_label_count_must_match(self):
        vocab = build_vocab(["x"])
        with pytest.raises(ValueError):
            init_model(ModelConfig(n_classes=3), vocab, ["a", "b"])

    def test_config_validation(self):
        with pytest.raises(ValueError):
            ModelConfig(max_kernel=1)
        with pytest.raises(ValueError):
            ModelConfig(epsilon=0.0)
        with pytest.raises(ValueError):
            ModelConfig(emb_dim=0)


class TestForward:
    def test_two_token_sentence_single_window(self):
        rng = np.random.default_rng(6)
        params = random_params(rng, max_kernel=4)
        sent = random_sentence(rng, params.vocab, min_len=2, max_len=2)
        trace = forward(params, sent)
        assert trace.n_windows == 1
        assert trace.windows == [(0, 2)]
        np.testing.assert_array_equal(trace.pooled, trace.acts[0])
        assert np.all(trace.winners == 0)

    def test_hand_model_values(self):
        params, sent = hand_model()
        trace = forward(params, sent)
        assert trace.n_windows == 1
        np.testing.assert_allclose(trace.pre_acts, [[3.0]])
        np.testing.assert_allclose(trace.pooled, [3.0])
        np.testing.assert_allclose(trace.scores, [3.0, -3.0])
        np.testing.assert_allclose(trace.probs, [0.99752738, 0.00247262], atol=1e-6)

    def test_window_count_formula(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            max_kernel = int(rng.integers(2, 7))
            params = random_params(rng, max_kernel=max_kernel)
            sent = random_sentence(rng, params.vocab, 2, 10)
            w = len(sent.ids)
            trace = forward(params, sent)
            expected = sum(w - n + 1 for n in range(2, min(max_kernel, w) + 1))
            assert trace.n_windows == expected >= 1

    def test_pool_invariants(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            params = random_params(rng)
            sent = random_sentence(rng, params.vocab)
            trace = forward(params, sent)
            np.testing.assert_array_equal(trace.pooled, trace.acts.max(axis=0))
            assert np.all(trace.pooled >= 0)
            for j, t in enumerate(trace.winners):
                assert trace.acts[t, j] == trace.pooled[j]
            assert abs(trace.probs.sum() - 1.0) < 1e-6
            assert np.argmax(trace.probs) == np.argmax(trace.scores)

    def test_deterministic(self):
        rng = np.random.default_rng(9)
        params = random_params(rng)
        sent = random_sentence(rng, params.vocab)
        a = forward(params, sent)
        b = forward(params, sent)
        np.testing.assert_array_equal(a.scores, b.scores)
        np.testing.assert_array_equal(a.acts, b.acts)

    def test_rejects_too_short(self):
        rng = np.random.default_rng(10)
        params = random_params(rng)
        from icnn import EncodedSentence
        with pytest.raises(ValueError):
            forward(params, EncodedSentence(np.array([2]), ["w0"]))


class TestBackward:
    def test_zero_upstream_gives_zero_grads(self):
        rng = np.random.default_rng(11)
        params = random_params(rng)
        trace = forward(params, random_sentence(rng, params.vocab))
        grads = backward(params, trace, np.zeros(params.n_classes))
        assert not grads.embeddings.any()
        for n in params.widths:
            assert not grads.kernels[n].any()
        assert not grads.out_weights.any()
        assert not grads.out_bias.any()

    def test_losing_windows_get_no_kernel_gradient(self):
        rng = np.random.default_rng(12)
        params = random_params(rng, feat_dim=4, max_kernel=3)
        sent = random_sentence(rng, params.vocab, 5, 7)
        trace = forward(params, sent)
        grads = backward(params, trace, rng.normal(0, 1, params.n_classes))
        # a feature dimension no width-n window won must leave that slice
        # of the width-n kernel gradient at zero
        for n in params.widths:
            won_dims = {int(j) for j, t in enumerate(trace.winners)
                        if trace.windows[t][1] == n}
            for j in range(params.feat_dim):
                if j not in won_dims:
                    assert not grads.kernels[n][:, :, j].any()
                    assert grads.kernel_biases[n][j] == 0.0

    def test_gradcheck_tiny_model(self):
        # 20-token vocab, emb 4, feat 3, two classes, widths {2, 3}, length 5
        rng = np.random.default_rng(13)
        vocab = build_vocab([" ".join(f"t{i}" for i in range(18))])
        config = ModelConfig(emb_dim=4, feat_dim=3, max_kernel=3, n_classes=2, seed=5)
        params = init_model(config, vocab, ["y", "n"], dtype=np.float64)
        for n in params.widths:
            params.kernel_biases[n] = rng.uniform(-0.05, 0.05, 3)
        params.out_bias = rng.uniform(-0.05, 0.05, 2)
        sent = encode(["t0", "t3", "t5", "t3", "t9"], vocab)
        gold = 1

        def loss_and_grad(arrays):
            set_params_from_flat(params, list(arrays))
            trace = forward(params, sent)
            loss, grad_s = cross_entropy_with_grad(trace.scores, gold)
            grads = backward(params, trace, grad_s)
            return loss, flat_grad_list(params, grads)

        err = finite_difference_gradcheck(loss_and_grad, flat_param_list(params))
        assert err <= 1e-4


class TestSerialization:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(14)
        params = random_params(rng, dtype=np.float32)
        path = tmp_path / "model.icnn"
        save_model(params, path)
        loaded = load_model(path)
        np.testing.assert_array_equal(loaded.embeddings, params.embeddings)
        for n in params.widths:
            np.testing.assert_array_equal(loaded.kernels[n], params.kernels[n])
            np.testing.assert_array_equal(loaded.kernel_biases[n],
                                          params.kernel_biases[n])
        np.testing.assert_array_equal(loaded.out_weights, params.out_weights)
        np.testing.assert_array_equal(loaded.out_bias, params.out_bias)
        assert loaded.labels == params.labels
        assert loaded.vocab.id_to_token == params.vocab.id_to_token
        assert loaded.vocab.mode == params.vocab.mode

    def test_round_trip_forward_identical(self, tmp_path):
        rng = np.random.default_rng(15)
        params = random_params(rng, dtype=np.float32)
        path = tmp_path / "model.icnn"
        save_model(params, path)
        loaded = load_model(path)
        for _ in range(100):
            sent = random_sentence(rng, params.vocab)
            a = forward(params, sent)
            b = forward(loaded, sent)
            np.testing.assert_array_equal(a.scores, b.scores)
            np.testing.assert_array_equal(a.probs, b.probs)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.icnn"
        path.write_bytes(b"NOPE" + b"\x00" * 64)
        with pytest.raises(BadMagicError):
            load_model(path)

    def test_version_mismatch(self, tmp_path):
        rng = np.random.default_rng(16)
        params = random_params(rng, dtype=np.float32)
        path = tmp_path / "model.icnn"
        save_model(params, path)
        raw = bytearray(path.read_bytes())
        raw[4:8] = (99).to_bytes(4, "little")
        path.write_bytes(bytes(raw))
        with pytest.raises(UnsupportedVersionError):
            load_model(path)

    def test_truncated(self, tmp_path):
        rng = np.random.default_rng(17)
        params = random_params(rng, dtype=np.float32)
        path = tmp_path / "model.icnn"
        save_model(params, path)
        raw = path.read_bytes()
        path.write_bytes(raw[:len(raw) // 2])
        with pytest.raises(TruncatedModelError):
            load_model(path)

    def test_trailing_garbage(self, tmp_path):
        rng = np.random.default_rng(18)
        params = random_params(rng, dtype=np.float32)
        path = tmp_path / "model.icnn"
        save_model(params, path)
        path.write_bytes(path.read_bytes() + b"\x00\x00\x00\x00")
        with pytest.raises(ShapeMismatchError):
            load_model(path)
