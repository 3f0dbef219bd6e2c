import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lfmix import (DataError, ShiftParams, argmin_label_weight, label_shift, mix,
                   mixup_label_weight, remix_label_weight, sample_mix_weight)
from lfmix.seeds import derive_rng
from lfmix import verify


class FixedUniform:
    """Generator stand-in returning a preset uniform draw."""

    def __init__(self, value):
        self.value = value

    def random(self):
        return self.value


@pytest.mark.parametrize("alpha", [0.0, 0.5, 2.0])
def test_equal_counts_leave_weight_unchanged(alpha):
    assert label_shift(0.37, alpha, 250, 250) == pytest.approx(0.37, abs=1e-15)


def test_zero_alpha_is_identity():
    lam = np.linspace(0, 1, 11)
    assert np.array_equal(label_shift(lam, 0.0, 500, 3), lam)


def test_clamp_engages_on_heavy_head():
    # 0.4 - 1 * 400/600 = -0.2667 -> clamped to 0
    assert label_shift(0.4, 1.0, 500, 100) == 0.0


@pytest.mark.parametrize("bad", [
    dict(lambda_x=1.2, alpha=1.0, n_i=5, n_j=5),
    dict(lambda_x=0.5, alpha=-0.1, n_i=5, n_j=5),
    dict(lambda_x=0.5, alpha=1.0, n_i=0, n_j=5),
])
def test_label_shift_rejects_bad_inputs(bad):
    with pytest.raises(DataError):
        label_shift(**bad)


@settings(max_examples=300, deadline=None)
@given(
    lam=st.floats(min_value=0.0, max_value=1.0),
    alpha=st.floats(min_value=0.0, max_value=5.0),
    n_i=st.integers(min_value=1, max_value=10_000),
    n_j=st.integers(min_value=1, max_value=10_000),
)
def test_label_shift_range_and_direction(lam, alpha, n_i, n_j):
    out = label_shift(lam, alpha, n_i, n_j)
    assert 0.0 <= out <= 1.0
    if n_i > n_j:
        assert out <= lam
    elif n_i < n_j:
        assert out >= lam
    else:
        assert out == pytest.approx(lam, abs=1e-15)


def test_argmin_degenerates_at_balanced_prior():
    for lam in (0.0, 0.31, 0.5, 1.0):
        assert argmin_label_weight(lam, 1.7, 0.5) == pytest.approx(lam, abs=1e-7)


def test_argmin_hits_boundary_under_strong_shift():
    assert argmin_label_weight(0.5, 5.0, 0.99) == pytest.approx(0.0, abs=1e-7)
    assert argmin_label_weight(0.5, 5.0, 0.01) == pytest.approx(1.0, abs=1e-7)


def test_argmin_rejects_degenerate_prior():
    with pytest.raises(DataError):
        argmin_label_weight(0.5, 1.0, 1.0)


def test_argmin_matches_closed_form_on_random_triples():
    rng = derive_rng(0, "unit", "shift_argmin")
    n = 2000
    lam = rng.random(n)
    alpha = 2.0 * rng.random(n)
    n_i = rng.integers(1, 10_001, size=n)
    n_j = rng.integers(1, 10_001, size=n)
    numeric = argmin_label_weight(lam, alpha, n_i / (n_i + n_j))
    closed = label_shift(lam, alpha, n_i, n_j)
    assert np.abs(numeric - closed).max() <= 1e-6


def pair(dim=4, y_i=0, y_j=1):
    x_i = np.zeros(dim)
    x_i[0] = 1.0
    x_j = np.zeros(dim)
    x_j[1] = 1.0
    return (x_i, y_i), (x_j, y_j)


def test_mix_full_weight_returns_first_feature():
    counts = np.array([50, 50, 50])
    out = mix(pair(), counts, ShiftParams(alpha=1.0), FixedUniform(1.0))
    assert out.lambda_x == 1.0
    assert np.array_equal(out.feature, pair()[0][0])
    assert out.soft_label.tolist() == [1.0, 0.0, 0.0]


def test_mix_even_weight_even_counts():
    counts = np.array([50, 50, 50])
    out = mix(pair(), counts, ShiftParams(alpha=2.0), FixedUniform(0.5))
    assert out.lambda_x == pytest.approx(0.5, abs=1e-12)
    assert np.allclose(out.soft_label, [0.5, 0.5, 0.0], atol=1e-12)
    assert out.source == (0, 1)


def test_mix_feature_is_exact_blend_and_not_renormalized():
    counts = np.array([500, 5, 50])
    rng = derive_rng(9, "mixblend")
    stub = FixedUniform(float(rng.random()))
    (x_i, y_i), (x_j, y_j) = pair()
    out = mix(((x_i, y_i), (x_j, y_j)), counts, ShiftParams(alpha=1.0), stub)
    expect = out.lambda_x * x_i + (1 - out.lambda_x) * x_j
    assert np.array_equal(out.feature, expect)
    assert np.linalg.norm(out.feature) < 1.0  # blend of orthogonal units shrinks


def test_mix_of_identical_features_is_identity():
    x = np.array([0.6, 0.8, 0.0])
    out = mix(((x, 0), (x, 1)), np.array([10, 20]), ShiftParams(), FixedUniform(0.3))
    assert np.allclose(out.feature, x, atol=1e-12)


def test_mix_rejects_dim_mismatch():
    with pytest.raises(DataError, match="dims differ"):
        mix(((np.ones(3), 0), (np.ones(4), 1)), np.array([1, 1]), ShiftParams(),
            FixedUniform(0.5))


def test_mix_soft_label_is_two_point_simplex():
    rng = derive_rng(4, "mixsimplex")
    counts = np.array([500, 5, 50, 7])
    for _ in range(50):
        stub = FixedUniform(float(rng.random()))
        out = mix(pair(y_i=3, y_j=1), counts, ShiftParams(alpha=1.3), stub)
        assert out.soft_label.sum() == pytest.approx(1.0, abs=1e-12)
        assert (out.soft_label != 0).sum() <= 2
        assert np.all(out.soft_label >= 0)


def test_mix_weight_matches_arcsine_distribution():
    result = verify.check_mix_weight_distribution(n=100_000, seed=0)
    assert result.passed, result.detail


def test_mix_weight_general_beta_falls_back():
    rng = derive_rng(1, "betafallback")
    draws = np.array([sample_mix_weight(rng, 2.0, 5.0) for _ in range(2000)])
    assert 0 < draws.min() and draws.max() < 1
    assert abs(draws.mean() - 2.0 / 7.0) < 0.02


def test_shift_params_validation():
    with pytest.raises(DataError):
        ShiftParams(alpha=-1.0)
    with pytest.raises(DataError):
        ShiftParams(beta_a=0.0)


def test_mixup_label_weight_is_identity():
    lam = np.array([0.0, 0.25, 1.0])
    assert np.array_equal(mixup_label_weight(lam), lam)
    assert mixup_label_weight(0.3) == 0.3


def test_remix_label_weight_thresholds():
    # heavy first class & low blend weight -> full label to the rare class
    assert remix_label_weight(0.4, 300, 10) == 0.0
    # light first class & high blend weight -> full label to the rare class
    assert remix_label_weight(0.6, 10, 300) == 1.0
    # balanced counts keep the mixup weight
    assert remix_label_weight(0.4, 100, 100) == 0.4
    # ratio below kappa keeps the mixup weight
    assert remix_label_weight(0.4, 200, 100) == 0.4
    # blend weight above tau keeps the mixup weight even for heavy ratios
    assert remix_label_weight(0.7, 300, 10) == 0.7
    assert np.array_equal(
        remix_label_weight(np.array([0.4, 0.7]), np.array([300, 300]), np.array([10, 10])),
        np.array([0.0, 0.7]),
    )
