import math
from dataclasses import asdict

import numpy as np
import pytest

from bdrate.distortion import (
    DistortionSample,
    Schedule,
    distortion_curve,
    error_trend_ok,
    estimate_distortion,
    k_of_eps,
    rate_cap,
    rung_seed,
)
from bdrate.evolution import BudgetExceeded
from bdrate.maps import cat_map, lipschitz_constant, make_map

LAM = math.log((3 + math.sqrt(5)) / 2)


def test_schedule_examples():
    s = Schedule(0.5, 1.0, 1)
    assert k_of_eps(s, math.exp(-16)) == 4
    assert k_of_eps(s, math.exp(-100)) == 10
    assert Schedule(0.5, 1.0, 3).k(0.5) == 3
    for bad in [(0.0, 1.0, 1), (1.0, 1.0, 1), (0.5, 0.0, 1), (0.5, 1.0, 0)]:
        with pytest.raises(ValueError):
            Schedule(*bad)
    with pytest.raises(ValueError):
        s.k(1.5)


@pytest.mark.parametrize("theta,scale", [(0.5, 1.0), (0.5, 2.3), (0.3, 4.0), (0.9, 0.5)])
def test_schedule_validity_on_dyadic_grid(theta, scale):
    s = Schedule(theta, scale, 1)
    ks = [s.k(2.0**-j) for j in range(1, 400)]
    assert all(b >= a for a, b in zip(ks, ks[1:]))
    assert ks[-1] > ks[0]
    # k / ln(1/eps) along eps = exp(-2^j); exp underflows past j = 9
    ratios = [s.k(math.exp(-(2.0**j))) / 2.0**j for j in range(4, 10)]
    assert all(b <= a for a, b in zip(ratios, ratios[1:]))
    assert ratios[-1] < ratios[0]


def test_shipped_schedule_ladder():
    s = Schedule(0.5, 2.3, 1)
    assert [s.k(2.0**-j) for j in range(6, 11)] == [4, 5, 5, 5, 6]


def test_sample_rate_and_se():
    d = DistortionSample(0.01, 2, 4 * math.pi * 1e-4, 1e-6, math.pi * 1e-4)
    assert d.rate == pytest.approx(math.log(4) / 2, rel=1e-14)
    assert d.rate_se == pytest.approx(1e-6 / (4 * math.pi * 1e-4 * 2), rel=1e-14)


def test_rate_cap():
    assert rate_cap(2.0, 1, 2) == pytest.approx(2 * math.log(3))


def test_rejects_k_zero_and_small_mc():
    with pytest.raises(ValueError):
        estimate_distortion(cat_map(), (0.3, 0.3), 2**-6, k=0, mc_samples=10**4)
    with pytest.raises(ValueError):
        estimate_distortion(cat_map(), (0.3, 0.3), 2**-6, k=1, mc_samples=9999)
    with pytest.raises(ValueError):
        estimate_distortion(cat_map(), (0.3, 0.3), 0.3, k=1)
    with pytest.raises(ValueError):
        estimate_distortion(cat_map(), (0.3, 0.3), 2**-6)


def test_cat_map_rung():
    s = Schedule(0.5, 1.7, 1)
    assert s.k(2**-8) == 4
    d = estimate_distortion(cat_map(), (0.3, 0.3), 2**-8, s, mc_samples=10**6, seed=1)
    assert d.k == 4
    assert 0.75 <= d.rate <= 1.15
    assert d.numerator >= d.denominator - 4 * d.numerator_se
    assert d.rate <= rate_cap(lipschitz_constant(cat_map()), d.k)
    assert d.denominator == math.pi * 2.0**-16


def test_zero_delta_identical_to_linear():
    kw = dict(k=3, mc_samples=50_000, seed=5)
    a = estimate_distortion(cat_map(), (0.3, 0.3), 2**-7, **kw)
    b = estimate_distortion(make_map([[2, 1], [1, 1]], 0.0), (0.3, 0.3), 2**-7, **kw)
    for key, va in asdict(a).items():
        assert va == pytest.approx(asdict(b)[key], abs=1e-12)


def test_replay_and_workers_are_bitwise_stable():
    kw = dict(k=3, mc_samples=100_000, seed=8, batch_size=1 << 14)
    a = estimate_distortion(cat_map(), (0.7, 0.2), 2**-7, **kw)
    b = estimate_distortion(cat_map(), (0.7, 0.2), 2**-7, **kw)
    c = estimate_distortion(cat_map(), (0.7, 0.2), 2**-7, workers=3, **kw)
    assert a == b == c


def test_perturbed_map_rung():
    m = make_map([[2, 1], [1, 1]], 0.05)
    d = estimate_distortion(m, (0.3, 0.3), 2**-8, k=4, mc_samples=200_000, seed=2)
    assert abs(d.rate - LAM) <= 0.2
    assert d.rate <= rate_cap(lipschitz_constant(m), d.k)


def test_three_dimensional_smoke():
    m = make_map([[2, 1, 0], [1, 1, 1], [0, 1, 1]])
    d = estimate_distortion(m, (0.3, 0.3, 0.3), 2**-4, k=1, mc_samples=20_000, seed=0)
    assert d.denominator == pytest.approx(4 / 3 * math.pi * 2.0**-12)
    assert 0 < d.rate <= rate_cap(lipschitz_constant(m), 1, 3)


def test_curve_singleton():
    s = Schedule(0.5, 2.3, 1)
    curve = distortion_curve(cat_map(), (0.3, 0.3), [2**-7], s, mc_samples=50_000, seed=4)
    single = estimate_distortion(cat_map(), (0.3, 0.3), 2**-7, s, mc_samples=50_000, seed=rung_seed(4, 0))
    assert curve == [single]


def test_curve_preconditions():
    s = Schedule()
    with pytest.raises(ValueError):
        distortion_curve(cat_map(), (0.3, 0.3), [], s)
    with pytest.raises(ValueError):
        distortion_curve(cat_map(), (0.3, 0.3), [2**-8, 2**-7], s)


def test_curve_budget_names_rung():
    s = Schedule(0.5, 2.3, 1)
    with pytest.raises(BudgetExceeded, match=r"rung 1 \(eps=0.0078125\)"):
        distortion_curve(cat_map(), (0.3, 0.3), [2**-6, 2**-7], s, mc_samples=10**4, budget=2000)


def test_curve_two_seeds_agree():
    s = Schedule(0.5, 2.3, 1)
    ladder = [2**-8, 2**-9, 2**-10]
    a = distortion_curve(cat_map(), (0.3, 0.3), ladder, s, mc_samples=200_000, seed=1)
    b = distortion_curve(cat_map(), (0.3, 0.3), ladder, s, mc_samples=200_000, seed=2)
    for sa, sb in zip(a, b):
        assert sa.k == sb.k
        assert abs(sa.rate - sb.rate) <= 4 * math.hypot(sa.rate_se, sb.rate_se)


def test_error_trend_helper():
    mk = lambda r: DistortionSample(0.01, 1, math.exp(r) * 1.0, 1e-9, 1.0)  # noqa: E731
    assert error_trend_ok([mk(1.3), mk(1.1), mk(1.0)], 1.0)
    assert not error_trend_ok([mk(1.0), mk(1.3)], 1.0)
