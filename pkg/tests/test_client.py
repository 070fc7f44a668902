import numpy as np
import pytest

from floodsim import (
    Batch,
    ClientConfig,
    ConstantSchedule,
    Dataset,
    InputError,
    ModelParams,
    Scorer,
    SyntheticSpec,
    WeightSchedule,
    aggregate_confidence,
    forward,
    gen_synthetic,
    init_params,
    local_update,
    mlp_shapes,
    per_sample_loss,
    proximal_grad,
    score_batch,
    weighted_grad,
)
from floodsim.model import num_values
from floodsim.scoring import compute_mask, percentile_threshold


def small_setup(seed=0, n_per_class=12):
    rng = np.random.default_rng(seed)
    data = gen_synthetic(SyntheticSpec(3, 4, n_per_class, 1.0, 0.3), rng)
    params = init_params(mlp_shapes(4, 3, hidden=8), rng)
    return params, data


def base_cfg(**kw):
    defaults = dict(
        method="flood",
        local_epochs=2,
        batch_size=8,
        q=0.7,
        schedule=WeightSchedule("cosine", a=5.0, halt_round=50),
        scorer=Scorer("energy"),
        lr=0.05,
        momentum=0.9,
    )
    defaults.update(kw)
    return ClientConfig(**defaults)


class TestProximalGrad:
    def test_anchor_equals_params(self):
        params, _ = small_setup()
        assert np.all(proximal_grad(params, params, 0.5) == 0.0)

    def test_zero_mu(self):
        params, _ = small_setup()
        other = ModelParams(params.layer_shapes, params.values + 1.0)
        assert np.all(proximal_grad(other, params, 0.0) == 0.0)

    def test_direct_evaluation(self):
        shapes = [(1, 1)]
        a = ModelParams(shapes, np.array([1.5, -1.0]))
        b = ModelParams(shapes, np.array([0.5, 1.0]))
        np.testing.assert_allclose(proximal_grad(a, b, 0.1), [0.1, -0.2], atol=1e-15)

    def test_length_mismatch(self):
        params, _ = small_setup()
        short = ModelParams([(1, 1)], np.zeros(2))
        with pytest.raises(InputError):
            proximal_grad(params, short, 0.1)


class TestDegeneracies:
    def test_flood_with_unit_lambda_equals_fedavg(self):
        params, data = small_setup()
        flood = local_update(
            params, 3, data, base_cfg(method="flood", schedule=ConstantSchedule(1.0)),
            np.random.default_rng(7),
        )
        fedavg = local_update(
            params, 3, data, base_cfg(method="fedavg"), np.random.default_rng(7)
        )
        assert np.array_equal(flood.params.values, fedavg.params.values)
        assert flood.n == fedavg.n and flood.phi == fedavg.phi

    def test_fedprox_with_zero_mu_equals_fedavg(self):
        params, data = small_setup()
        prox = local_update(
            params, 3, data, base_cfg(method="fedprox", prox_mu=0.0), np.random.default_rng(7)
        )
        fedavg = local_update(
            params, 3, data, base_cfg(method="fedavg"), np.random.default_rng(7)
        )
        assert np.array_equal(prox.params.values, fedavg.params.values)

    def test_fedprox_with_positive_mu_differs(self):
        params, data = small_setup()
        prox = local_update(
            params, 3, data, base_cfg(method="fedprox", prox_mu=0.5), np.random.default_rng(7)
        )
        fedavg = local_update(
            params, 3, data, base_cfg(method="fedavg"), np.random.default_rng(7)
        )
        assert not np.array_equal(prox.params.values, fedavg.params.values)


class TestLocalUpdate:
    def test_single_sample_phi_is_its_score(self):
        params, data = small_setup()
        one = data.subset(np.array([0]))
        cfg = base_cfg(local_epochs=1, batch_size=1)
        update = local_update(params, 5, one, cfg, np.random.default_rng(1))
        logits = forward(update.params, Batch(one.features, one.labels))
        expected = score_batch(cfg.scorer, logits)[0]
        assert update.phi == pytest.approx(expected, abs=1e-12)
        assert update.n == 1

    def test_determinism(self):
        params, data = small_setup()
        cfg = base_cfg()
        a = local_update(params, 2, data, cfg, np.random.default_rng(11))
        b = local_update(params, 2, data, cfg, np.random.default_rng(11))
        assert np.array_equal(a.params.values, b.params.values)
        assert a.phi == b.phi

    def test_global_params_not_mutated(self):
        params, data = small_setup()
        before = params.values.copy()
        local_update(params, 2, data, base_cfg(), np.random.default_rng(3))
        assert np.array_equal(params.values, before)

    def test_scoring_does_not_touch_params(self):
        params, data = small_setup()
        before = params.values.copy()
        logits = forward(params, Batch(data.features, data.labels))
        score_batch(Scorer("energy"), logits)
        aggregate_confidence(params, data, Scorer("msp"))
        assert np.array_equal(params.values, before)

    def test_empty_dataset_rejected(self):
        params, data = small_setup()
        empty = Dataset(np.zeros((0, 4)), np.zeros(0, dtype=int), 3)
        with pytest.raises(InputError):
            local_update(params, 0, empty, base_cfg(), np.random.default_rng(0))

    def test_round_zero_masked_samples_contribute_nothing(self):
        # cosine schedule at round 0 gives lambda = 0; the gradient must
        # match the same batch with the pseudo-OOD samples removed
        params, data = small_setup()
        batch = Batch(data.features[:10], data.labels[:10])
        scorer = Scorer("energy")
        logits = forward(params, batch)
        scores = score_batch(scorer, logits)
        tau = percentile_threshold(scores, 0.7)
        lam = WeightSchedule("cosine", a=5.0, halt_round=50).value(0)
        assert lam == 0.0
        mask = compute_mask(scores, tau, lam)
        keep = mask == 1.0
        grad_masked = weighted_grad(params, batch, mask)
        kept_batch = Batch(batch.features[keep], batch.labels[keep])
        # weighted mean normalizes by the full batch size, so rescale
        grad_kept = weighted_grad(params, kept_batch, np.ones(int(keep.sum())))
        np.testing.assert_allclose(
            grad_masked, grad_kept * keep.sum() / len(mask), atol=1e-10
        )


class TestClientConfigValidation:
    def test_unknown_method(self):
        with pytest.raises(Exception):
            base_cfg(method="scaffold")

    def test_bad_q(self):
        with pytest.raises(Exception):
            base_cfg(q=1.0)

    def test_bad_epochs(self):
        with pytest.raises(Exception):
            base_cfg(local_epochs=0)
