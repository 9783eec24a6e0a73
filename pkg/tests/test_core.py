import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import erf_series
from privleak.core import (
    ClassificationChannel,
    DataPoint,
    Dataset,
    EmpiricalDistribution,
    ErrorStats,
    FiniteClassification,
    GaussianLinear,
    LossSpec,
    RegressionChannel,
    derive_stream,
    draw_challenge,
    encode_features,
    erf,
    erf_array,
    loss_eval,
    loss_values,
)
from privleak.errors import ContractError, DomainError, LossTypeError, PreconditionError
from privleak.models import ConstantModel


# --- erf -------------------------------------------------------------------


def test_erf_grid_against_series_oracle():
    xs = np.linspace(-6.0, 6.0, 1000)
    worst = max(abs(erf(x) - erf_series(x)) for x in xs)
    assert worst <= 1e-12


def test_erf_array_matches_scalar():
    xs = np.linspace(-6.0, 6.0, 1000)
    np.testing.assert_allclose(erf_array(xs), [erf(x) for x in xs], rtol=0, atol=1e-15)


def test_erf_known_values():
    assert erf(0.0) == 0.0
    assert erf(1.0) == pytest.approx(0.8427007929497149, abs=1e-15)
    assert erf(6.0) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_erf_rejects_non_finite(bad):
    with pytest.raises(DomainError):
        erf(bad)
    with pytest.raises(DomainError):
        erf_array([0.0, bad])


@given(st.floats(-50, 50, allow_nan=False))
def test_erf_odd_and_bounded(x):
    assert erf(-x) == -erf(x)
    assert -1.0 <= erf(x) <= 1.0


@given(st.floats(-8, 8), st.floats(0, 8))
def test_erf_monotone(x, dx):
    assert erf(x + dx) >= erf(x)


# --- random streams ------------------------------------------------------------


def test_derive_stream_reproducible_and_label_sensitive():
    a = derive_stream(7, "exp", "env", 3).random(5)
    b = derive_stream(7, "exp", "env", 3).random(5)
    c = derive_stream(7, "exp", "env", 4).random(5)
    d = derive_stream(8, "exp", "env", 3).random(5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)


def test_derive_stream_rejects_negative_seed():
    with pytest.raises(DomainError):
        derive_stream(-1)


# --- data model ----------------------------------------------------------------


def test_encode_features_drop_first():
    v = np.array([0.5, -1.0])
    np.testing.assert_array_equal(encode_features(v, "a", ("a", "b", "c")), [0.5, -1.0, 0.0, 0.0])
    np.testing.assert_array_equal(encode_features(v, "c", ("a", "b", "c")), [0.5, -1.0, 0.0, 1.0])
    np.testing.assert_array_equal(encode_features(v, None, None), v)
    with pytest.raises(DomainError):
        encode_features(v, "z", ("a", "b"))
    with pytest.raises(PreconditionError):
        encode_features(v, None, ("a", "b"))


def test_dataset_design_matches_encode_features():
    ds = Dataset(np.arange(6.0).reshape(3, 2), [1.0, 2.0, 3.0], [0, 2, 1], ("a", "b", "c"))
    for i in range(3):
        z = ds.point(i)
        np.testing.assert_array_equal(ds.X[i], encode_features(z.v, z.t, ds.targets))


def test_dataset_membership_and_subsets():
    ds = Dataset(np.arange(4.0)[:, None], [0.0, 1.0, 2.0, 3.0])
    assert ds.contains(ds.point(2))
    assert not ds.contains(DataPoint(np.array([2.0]), 2.5))
    rest = ds.without(2)
    assert len(rest) == 3 and not rest.contains(ds.point(2))
    ext = ds.extended([[9.0]], [9.0])
    assert ext.n == 5 and ext.contains(DataPoint(np.array([9.0]), 9.0))


def test_dataset_validation():
    with pytest.raises(DomainError):
        Dataset(np.zeros((3, 1)), [1.0, 2.0])
    with pytest.raises(DomainError):
        Dataset(np.zeros((2, 1)), [1.0, 2.0], [0, 5], ("a", "b"))
    with pytest.raises(DomainError):
        Dataset(np.zeros((2, 1)), [1.0, 2.0], [0, 1])


# --- distributions -------------------------------------------------------------


def test_gaussian_linear_moments():
    D = GaussianLinear([2.0, -1.0], 0.5, tau=[0.0, 3.0], prior=[0.25, 0.75])
    S = D.sample_n(100_000, derive_stream(0, "moments"))
    assert np.mean(S.t) == pytest.approx(0.75, abs=0.01)
    resid = S.y - D.mean(S.V, S.t)
    assert np.std(resid) == pytest.approx(0.5, rel=0.02)


def test_regression_channel_sigma_is_population_noise():
    D = RegressionChannel(sigma_S=1.0, sigma_D=2.0)
    assert D.sigma == 2.0 and D.ratio == 2.0
    with pytest.raises(DomainError):
        RegressionChannel(sigma_S=0.0, sigma_D=1.0)


def test_classification_channel_error_rate():
    D = ClassificationChannel(0.1, 0.3, n_labels=3)
    S = D.sample_n(60_000, derive_stream(1, "cc"))
    assert np.mean(S.y != D.clean_label(S.V)) == pytest.approx(0.3, abs=0.01)


def test_classification_channel_warns_on_underfit():
    with pytest.warns(UserWarning):
        ClassificationChannel(0.4, 0.1)


def test_finite_classification_grid_is_deterministic():
    D = FiniteClassification.grid(4, 3, n_labels=4)
    assert D.size == 64 and D.deterministic_labels and not D.continuous
    assert not FiniteClassification.random_labels(4, 2).deterministic_labels


def test_empirical_distribution_prior():
    ds = Dataset(np.zeros((4, 1)), [0.0, 1.0, 2.0, 3.0], [0, 0, 0, 1], ("a", "b"))
    D = EmpiricalDistribution(ds)
    np.testing.assert_allclose(D.prior, [0.75, 0.25])


# --- losses --------------------------------------------------------------------


def test_loss_spec_contracts():
    assert LossSpec.zero_one().bound == 1.0
    assert not LossSpec.squared().bounded
    with pytest.raises(DomainError):
        LossSpec("squared-error", 4.0)
    with pytest.raises(DomainError):
        LossSpec("bounded-custom", math.inf)
    with pytest.raises(DomainError):
        LossSpec("hinge")


def test_loss_values_types():
    assert loss_values(LossSpec.zero_one(), [1, 0], [1, 1], "categorical").tolist() == [0.0, 1.0]
    assert loss_values(LossSpec.squared(), [1.0], [3.0], "real").tolist() == [4.0]
    assert loss_values(LossSpec.truncated_squared(2.0), [1.0], [3.0], "real").tolist() == [2.0]
    with pytest.raises(LossTypeError):
        loss_values(LossSpec.zero_one(), [1.0], [1.0], "real")
    with pytest.raises(LossTypeError):
        loss_values(LossSpec.squared(), [1], [1], "categorical")


def test_custom_loss_out_of_range_is_contract_error():
    bad = LossSpec("bounded-custom", 1.0, fn=lambda p, y: 5.0)
    with pytest.raises(ContractError):
        loss_values(bad, [0.0], [0.0], "real")


def test_loss_eval_single_point():
    model = ConstantModel(1.0)
    assert loss_eval(model, DataPoint(np.zeros(1), 3.0), LossSpec.squared()) == 4.0


def test_error_stats_ratio():
    assert ErrorStats(1.0, 2.0).ratio == 2.0
    assert ErrorStats(0.0, 1.0).ratio == math.inf
    with pytest.raises(DomainError):
        ErrorStats(1.0, 0.0)


# --- challenges ----------------------------------------------------------------


def test_draw_challenge_balanced_and_members_from_S():
    D = GaussianLinear([1.0], 1.0)
    S = D.sample_n(10, derive_stream(0, "S"))
    rng = derive_stream(0, "challenge")
    bits = []
    for _ in range(4000):
        b, z = draw_challenge(S, D, rng)
        bits.append(b)
        assert S.contains(z) == (b == 0)
    assert np.mean(bits) == pytest.approx(0.5, abs=0.03)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 20))
def test_member_challenge_is_in_S(seed, n):
    D = FiniteClassification.grid(3, 2)
    S = D.sample_n(n, derive_stream(seed, "S"))
    rng = derive_stream(seed, "c")
    for _ in range(10):
        b, z = draw_challenge(S, D, rng)
        if b == 0:
            assert S.contains(z)
