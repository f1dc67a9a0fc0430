import numpy as np
import pytest

from lus.model import Dataset
from lus.rng import point_uniforms
from lus.sampling import (
    A_FLOOR,
    Q_CLAMP,
    AcceptanceVector,
    Subsample,
    acceptance_plan_dict,
    case_control_plan,
    draw_subsample,
    expected_fraction,
    expected_fractions,
    lus_acceptance,
    lus_acceptance_probs,
    uniform_acceptance,
)

from conftest import random_simplex


def two_case_acceptance(q, gamma, k, top):
    """Independent oracle: the two-branch piecewise formulas."""
    a = np.empty(k)
    if gamma >= 2 * q:
        a[:] = 2 * q / gamma
        a[top] = 2 * (1 - q) / gamma
    else:
        a[:] = 1.0
        a[top] = (1 - q) / (gamma - q)
    return a


def test_lus_case1_example():
    av = lus_acceptance(np.array([0.9, 0.05, 0.05]), 2.0)
    assert np.allclose(av.a, [0.1, 0.9, 0.9], atol=1e-15)
    assert av.q_tilde == pytest.approx(0.9)


def test_lus_case2_example():
    av = lus_acceptance(np.array([0.9, 0.05, 0.05]), 1.2)
    assert np.allclose(av.a, [1.0 / 3.0, 1.0, 1.0], atol=1e-15)


def test_lus_degenerates_to_uniform_at_half():
    for gamma in (1.0, 1.7, 4.0):
        av = lus_acceptance(np.array([0.5, 0.5]), gamma)
        assert np.allclose(av.a, np.full(2, 1.0 / gamma), atol=1e-15)


def test_unified_formula_matches_two_case_on_grid():
    qs = np.arange(0.5, 0.9995, 0.01)
    gammas = np.arange(1.0, 5.0001, 0.05)
    worst = 0.0
    for q in qs:
        p = np.array([q, (1 - q) * 0.7, (1 - q) * 0.3])
        for gamma in gammas:
            a = lus_acceptance(p, gamma).a
            expected = two_case_acceptance(q, gamma, 3, 0)
            worst = max(worst, np.abs(a - expected).max())
    assert worst < 1e-12


def test_lus_rejects_bad_gamma_and_probs():
    with pytest.raises(ValueError):
        lus_acceptance(np.array([0.5, 0.5]), 0.99)
    with pytest.raises(ValueError):
        lus_acceptance(np.array([0.9, 0.3]), 2.0)


def test_lus_acceptance_in_unit_interval(rng):
    for _ in range(300):
        k = int(rng.integers(2, 6))
        p = random_simplex(rng, k)
        gamma = 1.0 + 9.0 * rng.random()
        a = lus_acceptance(p, gamma).a
        assert np.all(a > 0) and np.all(a <= 1)


def test_lus_confident_point_clamped():
    av = lus_acceptance(np.array([1.0, 0.0]), 1.0)
    assert np.isfinite(av.offsets()).all()
    assert av.q_tilde == pytest.approx(1.0 - Q_CLAMP)
    assert av.a[1] >= A_FLOOR


def test_lus_lcc_coincidence_binary():
    # for two classes and gamma >= 2 the majority/minority split is
    # (2(1-q)/gamma, 2q/gamma)
    for q in np.arange(0.5, 0.999, 0.017):
        for gamma in (2.0, 2.5, 4.0):
            a = lus_acceptance(np.array([q, 1 - q]), gamma).a
            assert a[0] == pytest.approx(2 * (1 - q) / gamma, abs=1e-15)
            assert a[1] == pytest.approx(min(1.0, 2 * q / gamma), abs=1e-15)


def test_lus_monotone_in_gamma():
    p = np.array([0.75, 0.2, 0.05])
    gammas = np.arange(1.0, 6.0, 0.1)
    acc = np.stack([lus_acceptance(p, g).a for g in gammas])
    assert np.all(np.diff(acc, axis=0) <= 1e-15)


def test_lus_branch_continuity_at_half():
    for gamma in (1.0, 1.3, 2.0, 3.5):
        a = lus_acceptance(np.array([0.5, 0.25, 0.25]), gamma).a
        assert np.allclose(a, np.full(3, min(1.0, 1.0 / gamma)), atol=1e-15)


def test_uniform_acceptance():
    assert np.allclose(uniform_acceptance(1.0, 3).a, np.ones(3))
    assert np.allclose(uniform_acceptance(4.0, 2).a, np.full(2, 0.25))
    assert np.allclose(uniform_acceptance(4.0, 2).offsets(), [0.0])
    with pytest.raises(ValueError):
        uniform_acceptance(0.5, 2)


def _counts_dataset(counts):
    labels = np.concatenate([np.full(c, i + 1) for i, c in enumerate(counts)])
    return Dataset(np.zeros((labels.size, 1)), labels, len(counts))


def test_case_control_equal_split():
    plan = case_control_plan(_counts_dataset([100, 100, 100]), 150)
    assert np.allclose(plan, [0.5, 0.5, 0.5], atol=1e-15)


def test_case_control_minority_redistribution():
    # oracle: class 1 keeps all 10, remaining 290 split 145/145
    plan = case_control_plan(_counts_dataset([10, 500, 490]), 300)
    assert np.allclose(plan, [1.0, 145.0 / 500.0, 145.0 / 490.0], atol=1e-12)


def test_case_control_full_budget():
    plan = case_control_plan(_counts_dataset([10, 500, 490]), 1000)
    assert np.allclose(plan, [1.0, 1.0, 1.0])


def test_case_control_budget_validation():
    data = _counts_dataset([10, 10])
    with pytest.raises(ValueError):
        case_control_plan(data, 21)
    with pytest.raises(ValueError):
        case_control_plan(data, 0)


def _toy_dataset(rng, n=200, k=3):
    features = rng.normal(size=(n, 2))
    labels = rng.integers(1, k + 1, size=n)
    return Dataset(features, labels, k)


def test_draw_accept_all_keeps_everything(rng):
    data = _toy_dataset(rng)
    sub = draw_subsample(data, np.ones(3), seed=5)
    assert np.array_equal(sub.indices, np.arange(data.n))
    assert np.array_equal(sub.features, data.features)
    assert np.array_equal(sub.offsets, np.zeros((data.n, 2)))


def test_draw_offsets_follow_formula(rng):
    # observed classes all have a = 1 so every point is kept; the
    # reference class acceptance of 0.5 shifts both offsets by log 2
    features = rng.normal(size=(30, 2))
    labels = rng.integers(1, 3, size=30)
    data = Dataset(features, labels, 3)
    sub = draw_subsample(data, np.array([1.0, 1.0, 0.5]), seed=5)
    assert sub.size == 30
    assert np.allclose(sub.offsets, np.log(2.0), atol=1e-15)


def test_draw_accept_none_is_empty(rng):
    data = _toy_dataset(rng)
    sub = draw_subsample(data, np.zeros((data.n, data.k)), seed=5)
    assert sub.size == 0
    assert sub.fraction == 0.0


def test_draw_binomial_concentration():
    n = 100_000
    data = Dataset(np.zeros((n, 1)), np.ones(n, dtype=int) * 2, 2)
    sub = draw_subsample(data, np.array([0.3, 0.3]), seed=99)
    sigma = np.sqrt(n * 0.3 * 0.7)
    assert abs(sub.size - 0.3 * n) < 4 * sigma


def test_draw_deterministic(rng):
    data = _toy_dataset(rng)
    a = np.full((data.n, data.k), 0.4)
    s1 = draw_subsample(data, a, seed=123)
    s2 = draw_subsample(data, a, seed=123)
    assert np.array_equal(s1.indices, s2.indices)
    assert np.array_equal(s1.offsets, s2.offsets)
    s3 = draw_subsample(data, a, seed=124)
    assert not np.array_equal(s1.indices, s3.indices)


def test_point_uniforms_chunk_independent():
    whole = point_uniforms(7, 0, 1000)
    parts = np.concatenate([point_uniforms(7, 0, 300), point_uniforms(7, 300, 700)])
    assert np.array_equal(whole, parts)


def test_expected_fraction_examples():
    assert expected_fraction(np.array([0.9, 0.1]), 2.0) == pytest.approx(0.18)
    assert expected_fraction(np.array([0.9, 0.1]), 1.2) == pytest.approx(0.4)
    assert expected_fraction(np.array([0.5, 0.5]), 3.0) == pytest.approx(1.0 / 3.0)


def test_expected_fraction_matches_inner_product():
    # oracle: sum_k a_k p_k with the acceptance vector itself
    worst = 0.0
    for q in np.arange(0.5, 0.9995, 0.013):
        p = np.array([q, 1 - q])
        for gamma in np.arange(1.0, 5.0001, 0.05):
            closed = expected_fraction(p, gamma)
            inner = float(lus_acceptance(p, gamma).a @ p)
            worst = max(worst, abs(closed - inner))
    assert worst < 1e-12


def test_expected_fraction_bounded_by_budget(rng):
    for _ in range(500):
        k = int(rng.integers(2, 6))
        p = random_simplex(rng, k)
        gamma = 1.0 + 9.0 * rng.random()
        assert expected_fraction(p, gamma) <= 1.0 / gamma + 1e-12


def test_expected_fractions_vectorized_matches_scalar(rng):
    probs = np.stack([random_simplex(rng, 3) for _ in range(50)])
    vec = expected_fractions(probs, 1.7)
    scalar = np.array([expected_fraction(p, 1.7) for p in probs])
    assert np.array_equal(vec, scalar)


def test_lus_matrix_matches_per_point(rng):
    probs = np.stack([random_simplex(rng, 4) for _ in range(40)])
    matrix = lus_acceptance_probs(probs, 2.3)
    for i in range(40):
        assert np.array_equal(matrix[i], lus_acceptance(probs[i], 2.3).a)


def test_subsample_csv_round_trip(tmp_path, rng):
    data = _toy_dataset(rng, n=50)
    a = np.full((50, 3), 0.5)
    sub = draw_subsample(data, a, seed=3, gamma=2.0)
    path = tmp_path / "sub.csv"
    sub.to_csv(path)
    back = Subsample.from_csv(path, n_original=50, gamma=2.0)
    assert np.array_equal(back.indices, sub.indices)
    assert np.array_equal(back.labels, sub.labels)
    assert np.array_equal(back.offsets, sub.offsets)
    assert np.array_equal(back.features, sub.features)


def test_subsample_validation():
    with pytest.raises(ValueError):
        Subsample(
            indices=np.array([2, 1]),
            features=np.zeros((2, 1)),
            labels=np.array([1, 2]),
            offsets=np.zeros((2, 1)),
            n_original=5,
        )
    with pytest.raises(ValueError):
        Subsample(
            indices=np.array([0]),
            features=np.zeros((1, 1)),
            labels=np.array([1]),
            offsets=np.array([[np.inf]]),
            n_original=5,
        )


def test_acceptance_plan_dict():
    plan = acceptance_plan_dict("cc", 2.0, np.array([1.0, 0.25]))
    assert plan == {"gamma": 2.0, "scheme": "cc", "per_class": [1.0, 0.25]}
    with pytest.raises(ValueError):
        acceptance_plan_dict("nope", 2.0)


def test_acceptance_vector_validation():
    with pytest.raises(ValueError):
        AcceptanceVector(a=np.array([0.0, 0.5]))
    with pytest.raises(ValueError):
        AcceptanceVector(a=np.array([0.5, 1.5]))
