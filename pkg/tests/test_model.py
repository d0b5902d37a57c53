import numpy as np
import pytest

from aggnet.datasets import gen_synthetic
from aggnet.errors import ConfigError, DimensionError, InitError, NumericError
from aggnet.kmeans import kmeans
from aggnet.losses import loss_and_grads
from aggnet.datasets import sample_batch
from aggnet.model import (
    BatchNormState, HashConfig, feature_forward, gem_pool_forward, hash_backward, hash_forward,
    hash_penalty, hash_penalty_grad, load_checkpoint, netvlad_forward, netvlad_init_kmeans,
    save_checkpoint, set_starts, sum_pool_forward, vlad_residuals,
)
from aggnet.numcore import grad_check, l2_normalize, make_rng, softmax

from conftest import make_model
from gradcases import LAYER_CASES
from oracles import gem_pool_loop, netvlad_eval_loop, sum_pool_loop, vlad_matrix_loop


class TestFeatureNet:

    def test_three_four_five(self):
        params = {"feat.W0": np.eye(2), "feat.b0": np.zeros(2)}
        y, _ = feature_forward(params, np.array([[3.0, 4.0]]), 1)
        np.testing.assert_allclose(y, [[0.6, 0.8]], atol=1e-15)

    def test_unit_norm_output(self):
        model = make_model()
        x = np.random.default_rng(0).standard_normal((20, 12)) * 5
        np.testing.assert_allclose(np.linalg.norm(model.features(x), axis=1), 1.0, atol=1e-9)

    def test_wrong_input_dim(self):
        with pytest.raises(DimensionError):
            make_model().features(np.ones((2, 5)))


@pytest.mark.parametrize("layer", list(LAYER_CASES))
class TestLayerGradients:
    """Every analytic backward against central differences, five seeds, three shapes."""

    @pytest.mark.parametrize("shape", range(3))
    def test_grad_check(self, layer, shape):
        for seed in range(5):
            for name, res in LAYER_CASES[layer](seed, shape).items():
                assert res.ok, f"{layer}/{name} seed {seed}: rel error {res.max_rel_error:.2e}"


class TestNetVlad:

    @pytest.mark.parametrize("seed", range(10))
    def test_scalar_loop_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n, d, K, d_out = 3, 4, 2, 3
        X = l2_normalize(rng.standard_normal((n, d)))[0]
        params = {
            "vlad.a": rng.standard_normal((K, d)), "vlad.b": rng.standard_normal(K),
            "vlad.c": rng.standard_normal((K, d)), "fc.W": rng.standard_normal((K * d, d_out)),
            "fc.b": rng.standard_normal(d_out), "bn.gamma": rng.uniform(0.5, 2, d_out),
            "bn.beta": rng.standard_normal(d_out),
        }
        bn = BatchNormState(rng.standard_normal(d_out), rng.uniform(0.5, 2, d_out))
        h, _ = netvlad_forward(params, X, set_starts([n]), bn, train=False)
        ref = netvlad_eval_loop(X.tolist(), params["vlad.a"].tolist(), params["vlad.b"].tolist(),
                                params["vlad.c"].tolist(), params["fc.W"].tolist(), params["fc.b"].tolist(),
                                params["bn.gamma"].tolist(), params["bn.beta"].tolist(),
                                bn.running_mean.tolist(), bn.running_var.tolist(), bn.eps)
        np.testing.assert_allclose(h[0], ref, atol=1e-12, rtol=0)
        H, _, _ = vlad_residuals(X, params["vlad.a"], params["vlad.b"], params["vlad.c"], set_starts([n]))
        np.testing.assert_allclose(H[0], vlad_matrix_loop(X.tolist(), params["vlad.a"].tolist(),
                                                          params["vlad.b"].tolist(),
                                                          params["vlad.c"].tolist()), atol=1e-12, rtol=0)

    def test_single_cluster_sums_residuals(self):
        rng = np.random.default_rng(1)
        X, c = rng.standard_normal((5, 3)), rng.standard_normal((1, 3))
        H, A, _ = vlad_residuals(X, rng.standard_normal((1, 3)), rng.standard_normal(1), c, set_starts([5]))
        np.testing.assert_array_equal(A, 1.0)
        np.testing.assert_allclose(H[0, 0], np.sum(X - c[0], axis=0), atol=1e-12)

    def test_zero_residual_limit(self):
        c = np.eye(3)
        alpha = 1e3
        x = c[1:2]
        H, _, _ = vlad_residuals(x, 2 * alpha * c, -alpha * np.ones(3), c, set_starts([1]))
        assert np.max(np.abs(H)) < 1e-12

    def test_assignment_weights_sum_to_one(self):
        rng = np.random.default_rng(2)
        X = rng.standard_normal((30, 6))
        A = softmax(X @ rng.standard_normal((4, 6)).T * 5 + rng.standard_normal(4), axis=1)
        np.testing.assert_allclose(A.sum(1), 1.0, atol=1e-12)

    def test_bad_shape(self):
        model = make_model()
        with pytest.raises(DimensionError):
            model.forward(np.ones((3, 12)), [2])


class TestKMeansInit:

    def test_well_separated_clouds(self):
        rng = np.random.default_rng(0)
        sigma = 0.05
        means = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        X = np.concatenate([m + sigma * rng.standard_normal((200, 3)) for m in means])
        res = kmeans(X, 2, make_rng(1))
        for m in means:
            assert np.min(np.linalg.norm(res.centroids - m, axis=1)) < sigma

    def test_k_equals_n(self):
        X = np.random.default_rng(3).standard_normal((6, 4))
        res = kmeans(X, 6, make_rng(0))
        assert res.inertia == 0.0
        assert sorted(map(tuple, res.centroids)) == sorted(map(tuple, X))

    def test_too_few_points(self):
        with pytest.raises(InitError):
            kmeans(np.ones((3, 2)), 4, make_rng(0))

    def test_soft_assignment_near_hard(self):
        rng = np.random.default_rng(4)
        K, d = 4, 8
        centers = np.eye(d)[:K]
        X = l2_normalize(np.repeat(centers, 50, axis=0) + 0.05 * rng.standard_normal((200, d)))[0]
        model = make_model(d=d, K=K)
        netvlad_init_kmeans(model, X, make_rng(5))
        p = model.params
        A = softmax(X @ p["vlad.a"].T + p["vlad.b"], axis=1)
        nearest = np.argmin(((X[:, None, :] - p["vlad.c"][None]) ** 2).sum(-1), axis=1)
        assert np.all(A[np.arange(len(X)), nearest] >= 0.99)
        np.testing.assert_allclose(p["vlad.a"], 20 * p["vlad.c"])
        np.testing.assert_allclose(p["vlad.b"], -10 * np.sum(p["vlad.c"] ** 2, axis=1))


class TestSumAndGem:

    def test_sum_single_row_unchanged(self):
        x = l2_normalize(np.random.default_rng(0).standard_normal((1, 5)))[0]
        h, _ = sum_pool_forward(x, set_starts([1]))
        np.testing.assert_allclose(h, x, atol=1e-15)

    def test_sum_opposite_rows(self):
        x = np.array([[0.6, 0.8], [-0.6, -0.8]])
        with pytest.raises(NumericError):
            sum_pool_forward(x, set_starts([2]))

    @pytest.mark.parametrize("seed", range(5))
    def test_sum_loop_oracle(self, seed):
        X = np.random.default_rng(seed).standard_normal((4, 6))
        h, _ = sum_pool_forward(X, set_starts([4]))
        np.testing.assert_allclose(h[0], sum_pool_loop(X.tolist()), atol=1e-12)

    def test_gem_p1_is_mean(self):
        X = np.random.default_rng(1).uniform(0.1, 1, (5, 4))
        h, _ = gem_pool_forward(1.0, X, np.array([5]), set_starts([5]))
        np.testing.assert_allclose(h[0], l2_normalize(X.mean(0, keepdims=True))[0][0], atol=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_gem_loop_oracle(self, seed):
        rng = np.random.default_rng(seed)
        X, p = rng.standard_normal((4, 5)), rng.uniform(1, 5)
        h, _ = gem_pool_forward(p, X, np.array([4]), set_starts([4]))
        np.testing.assert_allclose(h[0], l2_normalize(np.array([gem_pool_loop(X.tolist(), p)]))[0][0],
                                   atol=1e-12)

    def test_gem_large_p_approaches_max(self):
        X = np.random.default_rng(2).uniform(0.1, 1, (6, 5))
        _, cache = gem_pool_forward(64.0, X, np.array([6]), set_starts([6]))
        out = cache[6][0]
        np.testing.assert_allclose(out, X.max(0), rtol=0.05)


class TestHash:

    def test_sign_tie_rule(self):
        np.testing.assert_array_equal(hash_forward(HashConfig(), np.array([0.3, -0.2, 0.0])), [1, -1, 1])

    def test_disabled_is_identity(self):
        h = np.random.default_rng(0).standard_normal(5)
        assert hash_forward(HashConfig(enabled=False), h) is h

    def test_idempotent(self):
        cfg = HashConfig()
        h = np.random.default_rng(1).standard_normal(9)
        np.testing.assert_array_equal(hash_forward(cfg, hash_forward(cfg, h)), hash_forward(cfg, h))

    def test_zero_weight_is_pure_straight_through(self):
        g = np.random.default_rng(2).standard_normal(6)
        h = np.random.default_rng(3).standard_normal(6)
        np.testing.assert_array_equal(hash_backward(HashConfig(True, 0.0), h, g), g)

    def test_on_code_penalty_vanishes(self):
        cfg = HashConfig()
        b = np.array([1.0, -1.0, 1.0, 1.0])
        assert hash_penalty(cfg, b) == 0.0
        np.testing.assert_array_equal(hash_penalty_grad(cfg, b), 0.0)

    def test_backward_adds_weighted_penalty(self):
        cfg = HashConfig(True, 0.25, 3.0)
        rng = np.random.default_rng(4)
        h, g = rng.standard_normal(5), rng.standard_normal(5)
        np.testing.assert_allclose(hash_backward(cfg, h, g), g + 0.25 * hash_penalty_grad(cfg, h))

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            HashConfig(True, -1.0)
        with pytest.raises(ConfigError):
            HashConfig(True, 0.1, 0.5)


def _batch(seed, B=3, n=2, d_in=12):
    data = gen_synthetic(40, 3, d_in, 2.0, 0.3, make_rng(seed))
    return sample_batch(data.train, B, n, make_rng(seed + 1))


class TestModelGradients:
    """Whole-pipeline gradients through the scorer and loss."""

    @pytest.mark.parametrize("pooling", ["netvlad", "gem", "sum"])
    @pytest.mark.parametrize("loss", ["wmw", "wce"])
    def test_unhashed_pipeline(self, pooling, loss):
        model = make_model(pooling=pooling, hashing=False, d=6, hidden=(7,), K=2, seed=3).train()
        batch = _batch(3)
        _, _, grads, _ = loss_and_grads(model, batch, loss, update_stats=False)
        for name, value in model.params.items():
            def f(x, name=name):
                old = model.params[name]
                model.params[name] = x
                try:
                    return loss_and_grads(model, batch, loss, update_stats=False)[0]
                finally:
                    model.params[name] = old
            res = grad_check(f, value, grads[name])
            assert res.ok, f"{name}: {res.max_rel_error:.2e}"

    def test_hashed_penalty_path(self):
        model = make_model(pooling="netvlad", hashing=True, d=6, hidden=(7,), K=2, seed=4).train()
        batch = _batch(4)
        B, n, d_in = batch.enrolled.shape
        x = batch.enrolled.reshape(B * n, d_in)
        sizes = np.full(B, n)
        codes, h, cache = model.forward(x, sizes, update_stats=False)
        grads = model.backward(cache, np.zeros_like(codes))
        w = model.hashing.penalty_weight
        for name in ("vlad.c", "fc.W", "feat.W0"):
            def f(v, name=name):
                old = model.params[name]
                model.params[name] = v
                try:
                    return w * model.penalty(model.forward(x, sizes, update_stats=False)[1])
                finally:
                    model.params[name] = old
            assert grad_check(f, model.params[name], grads[name])


class TestEmbedding:

    def test_single_member_sum_identity_head(self):
        model = make_model(pooling="sum", hashing=False)
        x = np.random.default_rng(0).standard_normal((1, 12))
        np.testing.assert_allclose(model.group_embed(x), model.features(x)[0], atol=1e-12)

    @pytest.mark.parametrize("pooling", ["netvlad", "gem", "sum"])
    @pytest.mark.parametrize("hashing", [True, False])
    def test_permutation_invariance_exact(self, pooling, hashing):
        model = make_model(pooling=pooling, hashing=hashing)
        rng = np.random.default_rng(1)
        x = rng.standard_normal((6, 12))
        ref = model.group_embed(x)
        for _ in range(5):
            assert np.array_equal(model.group_embed(x[rng.permutation(6)]), ref)

    @pytest.mark.parametrize("pooling", ["netvlad", "gem", "sum"])
    def test_query_equals_singleton_group(self, pooling):
        model = make_model(pooling=pooling)
        x = np.random.default_rng(2).standard_normal(12)
        code = model.query_embed(x)
        assert np.array_equal(code, model.group_embed(x[None]))
        assert set(np.unique(code)) <= {-1.0, 1.0}

    def test_zero_noise_identity_same_code(self):
        data = gen_synthetic(10, 2, 12, 3.0, 0.0, make_rng(0))
        model = make_model()
        rec = data.train[0]
        assert np.array_equal(model.query_embed(rec.samples[0]), model.query_embed(rec.samples[1]))

    def test_eval_mode_is_deterministic_and_pure(self):
        model = make_model().train()
        x = np.random.default_rng(3).standard_normal((8, 12))
        model.forward(x, [4, 4])  # move running stats away from the init
        before = model.param_hash()
        a = model.embed_groups(x.reshape(2, 4, 12))
        b = model.embed_groups(x.reshape(2, 4, 12))
        assert np.array_equal(a, b)
        assert model.param_hash() == before
        assert model.training

    def test_pre_hash_vectors_unit_norm(self):
        model = make_model().train()
        x = np.random.default_rng(4).standard_normal((9, 12))
        _, h, _ = model.forward(x, [3, 3, 1, 1, 1])
        np.testing.assert_allclose(np.linalg.norm(h, axis=1), 1.0, atol=1e-9)


class TestCheckpoint:

    @pytest.mark.parametrize("pooling", ["netvlad", "gem", "sum"])
    def test_round_trip_bit_exact(self, tmp_path, pooling):
        model = make_model(pooling=pooling, seed=5).train()
        model.forward(np.random.default_rng(0).standard_normal((6, 12)), [3, 3])
        path = save_checkpoint(model, tmp_path / "m.ckpt")
        loaded = load_checkpoint(path)
        assert loaded.config == model.config
        for k, v in model.state().items():
            assert loaded.state()[k].tobytes() == v.tobytes()
        assert loaded.param_hash() == model.param_hash()
        save_checkpoint(loaded, tmp_path / "again.ckpt")
        assert (tmp_path / "again.ckpt.bin").read_bytes() == (tmp_path / "m.ckpt.bin").read_bytes()
