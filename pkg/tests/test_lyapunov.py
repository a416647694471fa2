import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bdrate.lyapunov import (
    SpectrumEstimate,
    cluster_exponents,
    linear_exponents,
    lyapunov_spectrum,
    positive_sum,
    srb_start,
)
from bdrate.maps import cat_map, make_map

LAM = math.log((3 + math.sqrt(5)) / 2)


def test_cat_map_spectrum():
    s = lyapunov_spectrum(cat_map(), (0.1234, 0.5678), n_iter=10_000)
    assert s.multiplicities == (1, 1)
    assert s.exponents[0] == pytest.approx(LAM, abs=1e-6)
    assert s.exponents[1] == pytest.approx(-LAM, abs=1e-6)
    assert abs(s.total) <= 1e-6
    assert s.residual < 1e-6
    assert positive_sum(s) == pytest.approx(LAM, abs=1e-6)


def test_squared_cat_map_doubles():
    s = lyapunov_spectrum(make_map([[5, 3], [3, 2]]), (0.31, 0.77), n_iter=10_000)
    assert np.allclose(s.exponents, [2 * LAM, -2 * LAM], atol=1e-6)


def test_three_dimensional_oracle_and_sum_rule():
    mat = np.array([[2, 1, 0], [1, 1, 1], [0, 1, 1]])
    s = lyapunov_spectrum(make_map(mat), (0.1, 0.2, 0.3), n_iter=10_000)
    oracle = np.sort(np.log(np.abs(np.roots(np.poly(mat.astype(float))))))[::-1]
    assert np.allclose(linear_exponents(mat), oracle, atol=1e-12)
    assert np.allclose(s.raw, oracle, atol=1e-6)
    assert abs(s.total) <= 1e-6


def test_zero_delta_matches_linear():
    a = lyapunov_spectrum(cat_map(), (0.2, 0.4), n_iter=2000, seed=3)
    b = lyapunov_spectrum(make_map([[2, 1], [1, 1]], 0.0), (0.2, 0.4), n_iter=2000, seed=3)
    assert np.allclose(a.raw, b.raw, atol=1e-9)


def test_independent_starts_agree():
    rng = np.random.default_rng(99)
    a = lyapunov_spectrum(cat_map(), rng.random(2), n_iter=100_000, reorth_every=5, seed=1)
    b = lyapunov_spectrum(cat_map(), rng.random(2), n_iter=100_000, reorth_every=5, seed=2)
    assert np.allclose(a.raw, b.raw, atol=1e-3)


def test_perturbed_map_spectrum_is_hyperbolic():
    m = make_map([[2, 1], [1, 1]], 0.05)
    s = lyapunov_spectrum(m, srb_start(m, 5), n_iter=20_000, reorth_every=5)
    assert s.exponents[0] > 0.9 and s.exponents[1] < -0.9
    # the default perturbation is not area preserving, the sum is a (small) dissipation rate
    assert s.total < 0.01


def test_preconditions():
    with pytest.raises(ValueError):
        lyapunov_spectrum(cat_map(), (0.1, 0.2), n_iter=999)
    with pytest.raises(ValueError):
        lyapunov_spectrum(cat_map(), (0.1, 0.2), reorth_every=21)


def test_positive_sum_examples():
    assert positive_sum(SpectrumEstimate((1.0, -1.0), (1, 1), 1000, 0.0)) == 1.0
    assert positive_sum(SpectrumEstimate((-0.2,), (2,), 1000, 0.0)) == 0.0
    assert positive_sum(SpectrumEstimate((0.5, -0.3), (2, 1), 1000, 0.0)) == 1.0


@given(
    st.lists(st.floats(0.01, 5.0), min_size=1, max_size=4, unique=True),
    st.lists(st.floats(-5.0, 0.0), min_size=0, max_size=4, unique=True),
)
def test_positive_sum_ignores_nonpositive(pos, nonpos):
    vals_a, mult_a = cluster_exponents(pos, 0.0)
    a = SpectrumEstimate(vals_a, mult_a, 1000, 0.0)
    vals_b, mult_b = cluster_exponents(pos + nonpos, 0.0)
    b = SpectrumEstimate(vals_b, mult_b, 1000, 0.0)
    assert positive_sum(b) == pytest.approx(positive_sum(a), rel=1e-12)


def test_clustering():
    vals, mult = cluster_exponents([0.5, 0.5004, -0.3])
    assert mult == (2, 1)
    assert vals[0] == pytest.approx(0.5002)
    with pytest.raises(ValueError):
        SpectrumEstimate((-1.0, 1.0), (1, 1), 1000, 0.0)
