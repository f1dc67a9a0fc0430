import math

import numpy as np
import pytest

from lus.model import (
    Dataset,
    ModelParams,
    accuracy,
    batch_probs,
    gradient,
    hessian,
    logits,
    nll,
    predict_labels,
    predict_proba,
)

from conftest import random_dataset, random_params


def test_logits_zero_params_zero_vector():
    params = ModelParams.zeros(k=3, d=2)
    assert np.array_equal(logits(params, np.array([1.0, -2.0])), np.zeros(2))


def test_logits_zero_model_passes_offsets_through():
    params = ModelParams.zeros(k=3, d=2)
    out = logits(params, np.array([0.4, 0.1]), offsets=np.array([0.3, -0.2]))
    assert np.allclose(out, [0.3, -0.2], atol=0, rtol=0)


def test_logits_affine_evaluation():
    params = ModelParams(np.array([[1.0, 2.0]]))
    assert logits(params, np.array([3.0]))[0] == pytest.approx(7.0, abs=0)


def test_logits_dimension_mismatch():
    params = ModelParams.zeros(k=3, d=2)
    with pytest.raises(ValueError):
        logits(params, np.array([1.0]))
    with pytest.raises(ValueError):
        logits(params, np.array([1.0, 2.0]), offsets=np.array([0.1]))


def test_predict_proba_symmetry():
    params = ModelParams.zeros(k=3, d=1)
    assert np.allclose(predict_proba(params, np.array([0.0])), np.full(3, 1 / 3), atol=1e-15)


def test_predict_proba_binary_odds():
    params = ModelParams(np.array([[math.log(3.0), 0.0]]))
    probs = predict_proba(params, np.array([0.0]))
    assert np.allclose(probs, [0.75, 0.25], atol=1e-15)


def test_predict_proba_extreme_logits_match_high_precision():
    # oracle: exact ratios exp(g_k - 500) computed with mpmath
    from mpmath import mp, mpf

    mp.dps = 60
    g = (mpf(500), mpf(400))
    denom = mp.exp(g[0] - 500) + mp.exp(g[1] - 500) + mp.exp(-500)
    expected = np.array(
        [float(mp.exp(gk - 500) / denom) for gk in g] + [float(mp.exp(-500) / denom)]
    )
    params = ModelParams(np.array([[500.0, 0.0], [400.0, 0.0]]))
    probs = predict_proba(params, np.array([0.0]))
    assert np.isfinite(probs).all()
    assert np.abs(probs - expected).max() < 1e-12
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)


def test_prob_vector_sums_to_one(rng):
    for _ in range(25):
        params = random_params(rng, d=3, k=4, scale=3.0)
        probs = predict_proba(params, rng.normal(size=3))
        assert abs(probs.sum() - 1.0) < 1e-12
        assert np.all(probs >= 0)


def test_reference_class_pins_gauge(rng):
    # shifting every non-reference logit changes the distribution
    params = random_params(rng, d=2, k=3)
    shifted = ModelParams(params.coefficients + np.array([[0.5, 0, 0], [0.5, 0, 0]]))
    x = rng.normal(size=2)
    assert not np.allclose(predict_proba(params, x), predict_proba(shifted, x))


def _fixture_k3():
    features = np.array([[0.5], [-1.0], [2.0], [0.0]])
    labels = np.array([1, 2, 3, 1])
    return Dataset(features, labels, 3)


def test_nll_uniform_model_is_log2():
    data = Dataset(np.array([[0.3], [-0.4], [2.0]]), np.array([1, 2, 1]), 2)
    assert nll(ModelParams.zeros(2, 1), data) == pytest.approx(math.log(2.0), abs=1e-15)


def test_nll_all_weights_zero():
    data = _fixture_k3()
    params = ModelParams(np.array([[0.3, -0.2], [0.1, 0.4]]))
    assert nll(params, data, weights=np.zeros(4)) == 0.0


def test_nll_matches_per_point_probability_product():
    # oracle: naive softmax per point, objective = -(1/n) log prod p_i(c_i)
    data = _fixture_k3()
    params = ModelParams(np.array([[0.3, -0.2], [0.1, 0.4]]))
    offsets = np.array([[0.2, -0.1], [0.0, 0.3], [-0.5, 0.2], [0.1, 0.0]])
    log_prod = 0.0
    for i in range(data.n):
        g = np.array(
            [
                params.coefficients[j, 0]
                + params.coefficients[j, 1] * data.features[i, 0]
                + offsets[i, j]
                for j in range(2)
            ]
            + [0.0]
        )
        p = np.exp(g) / np.exp(g).sum()
        log_prod += math.log(p[data.labels[i] - 1])
    expected = -log_prod / data.n
    assert nll(params, data, offsets=offsets) == pytest.approx(expected, rel=1e-13)


def test_nll_rejects_non_binary_weights():
    data = _fixture_k3()
    with pytest.raises(ValueError):
        nll(ModelParams.zeros(3, 1), data, weights=np.full(4, 0.5))


def test_nll_rejects_misaligned_offsets():
    data = _fixture_k3()
    with pytest.raises(ValueError):
        nll(ModelParams.zeros(3, 1), data, offsets=np.zeros((3, 2)))


def _fd_gradient(params, data, offsets, weights, h=1e-5):
    base = params.coefficients
    out = np.zeros_like(base)
    for idx in np.ndindex(base.shape):
        plus, minus = base.copy(), base.copy()
        plus[idx] += h
        minus[idx] -= h
        out[idx] = (
            nll(ModelParams(plus), data, offsets, weights)
            - nll(ModelParams(minus), data, offsets, weights)
        ) / (2 * h)
    return out


def test_gradient_matches_finite_differences(rng):
    data = random_dataset(rng, n=8, d=2, k=3)
    offsets = rng.normal(scale=0.5, size=(8, 2))
    weights = (rng.random(8) < 0.8).astype(float)
    for offs, w in [(None, None), (offsets, None), (offsets, weights)]:
        params = random_params(rng)
        g = gradient(params, data, offs, w)
        g_fd = _fd_gradient(params, data, offs, w)
        assert np.allclose(g, g_fd, rtol=1e-6, atol=1e-9)


def test_gradient_zero_at_mle():
    from lus.estimation import fit_mle

    data = random_dataset(np.random.default_rng(5), n=40, d=2, k=3)
    fit = fit_mle(data)
    assert fit.converged
    assert np.abs(gradient(fit.params, data)).max() < 1e-8


def test_gradient_balanced_counts_zero_intercept():
    data = Dataset(np.zeros((2, 1)), np.array([1, 2]), 2)
    g = gradient(ModelParams.zeros(2, 1), data)
    assert g[0, 0] == pytest.approx(0.0, abs=0)


def test_hessian_symmetric_and_psd(rng):
    for _ in range(10):
        data = random_dataset(rng, n=10, d=2, k=3)
        params = random_params(rng)
        h = hessian(params, data)
        assert np.array_equal(h, h.T)
        assert np.linalg.eigvalsh(h).min() >= -1e-10


def test_hessian_matches_gradient_differences(rng):
    data = random_dataset(rng, n=8, d=2, k=3)
    params = random_params(rng)
    offsets = rng.normal(scale=0.3, size=(8, 2))
    h = hessian(params, data, offsets)
    step = 1e-5
    base = params.coefficients
    fd = np.zeros_like(h)
    for col, idx in enumerate(np.ndindex(base.shape)):
        plus, minus = base.copy(), base.copy()
        plus[idx] += step
        minus[idx] -= step
        diff = gradient(ModelParams(plus), data, offsets) - gradient(
            ModelParams(minus), data, offsets
        )
        fd[:, col] = diff.ravel() / (2 * step)
    assert np.allclose(h, fd, rtol=1e-5, atol=1e-8)


def test_zero_offsets_unit_weights_bit_identical(rng):
    data = random_dataset(rng, n=9, d=2, k=3)
    params = random_params(rng)
    zeros = np.zeros((9, 2))
    ones = np.ones(9)
    assert nll(params, data) == nll(params, data, zeros, ones)
    assert np.array_equal(gradient(params, data), gradient(params, data, zeros, ones))
    assert np.array_equal(hessian(params, data), hessian(params, data, zeros, ones))


def test_nll_convex_along_segments(rng):
    data = random_dataset(rng, n=12, d=2, k=3)
    for _ in range(20):
        a, b = random_params(rng, scale=2.0), random_params(rng, scale=2.0)
        t = rng.random()
        mix = ModelParams(t * a.coefficients + (1 - t) * b.coefficients)
        bound = t * nll(a, data) + (1 - t) * nll(b, data)
        assert nll(mix, data) <= bound + 1e-10


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(np.array([[np.inf]]), np.array([1]), 2)
    with pytest.raises(ValueError):
        Dataset(np.zeros((2, 1)), np.array([1, 3]), 2)
    with pytest.raises(ValueError):
        Dataset(np.zeros((2, 1)), np.array([1]), 2)


def test_dataset_csv_round_trip(tmp_path, rng):
    data = random_dataset(rng, n=7, d=3, k=3)
    path = tmp_path / "data.csv"
    data.to_csv(path)
    back = Dataset.from_csv(path)
    assert back.k == 3
    assert np.array_equal(back.labels, data.labels)
    assert np.array_equal(back.features, data.features)


def test_params_json_round_trip(tmp_path, rng):
    params = random_params(rng, d=4, k=3)
    path = tmp_path / "model.json"
    params.to_json(path)
    back = ModelParams.from_json(path)
    assert np.array_equal(back.coefficients, params.coefficients)
    assert back.k == params.k and back.d == params.d


def test_predict_labels_and_accuracy():
    params = ModelParams(np.array([[2.0, 1.0]]))
    features = np.array([[1.0], [-5.0]])
    labels = predict_labels(params, features)
    assert labels.tolist() == [1, 2]
    data = Dataset(features, np.array([1, 1]), 2)
    assert accuracy(params, data) == 0.5


def test_batch_probs_matches_single_point(rng):
    params = random_params(rng, d=2, k=3)
    features = rng.normal(size=(5, 2))
    batched = batch_probs(params, features)
    for i in range(5):
        assert np.allclose(batched[i], predict_proba(params, features[i]), rtol=1e-14, atol=0)
