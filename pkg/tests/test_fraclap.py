import math

import mpmath as mp
import numpy as np
import pytest

from cylstable.errors import PointBelowHyperplane
from cylstable.fraclap import (
    Hyperplane,
    coordinate_terms,
    ctest_constant,
    ctest_constant_pv,
    cyl_op_hyperplane,
    find_sign_change,
    frac_lap_power,
    frac_lap_power_pv,
)
from cylstable.stable_core import AlphaParam, cd_alpha


def beta_closed_form(p, alpha):
    """Independent oracle: the reduced integral as a difference of Beta functions."""
    mp.mp.dps = 30
    p, a = mp.mpf(p), mp.mpf(alpha)
    if a == 1:
        br = mp.limit(lambda e: mp.gamma(1 - a - e) * (mp.gamma(a + e - p) / mp.gamma(1 - p)
                                                      - mp.gamma(p) / mp.gamma(1 - a - e + p)), 0)
    else:
        br = mp.gamma(1 - a) * (mp.gamma(a - p) / mp.gamma(1 - p) - mp.gamma(p) / mp.gamma(1 - a + p))
    return float(p * cd_alpha(AlphaParam(float(a), 1)) / a * br)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_trichotomy(alpha):
    assert abs(ctest_constant(alpha / 2, alpha)) < 1e-8
    assert ctest_constant(0.9 * alpha, alpha) > 0
    assert ctest_constant(0.1 * alpha, alpha) < 0


def test_spec_examples():
    assert abs(ctest_constant(0.5, 1.0)) < 1e-8
    assert ctest_constant(0.9 * 1.4, 1.4) > 0
    assert ctest_constant(0.1 * 0.6, 0.6) < 0


@pytest.mark.parametrize("alpha", [0.3, 0.7, 1.0, 1.3, 1.8])
@pytest.mark.parametrize("frac", [0.1, 0.3, 0.6, 0.9])
def test_against_beta_closed_form(alpha, frac):
    p = frac * alpha
    assert ctest_constant(p, alpha) == pytest.approx(beta_closed_form(p, alpha), rel=1e-9, abs=1e-12)


def test_reduced_vs_pv_grid():
    for alpha in np.linspace(0.3, 1.9, 5):
        for frac in np.linspace(0.1, 0.9, 5):
            p = frac * alpha
            c, v = ctest_constant(p, alpha), ctest_constant_pv(p, alpha)
            assert abs(c - v) <= 1e-6 * abs(c) + 1e-12


def test_pv_at_spec_point():
    assert frac_lap_power_pv(0.8, 1.2, 1.5) == pytest.approx(frac_lap_power(0.8, 1.2, 1.5), rel=1e-6)


def test_power_scaling():
    p, a = 0.7, 1.3
    assert frac_lap_power(p, a, 2.0) == pytest.approx(2 ** (p - a) * frac_lap_power(p, a, 1.0), rel=1e-14)
    assert frac_lap_power(0.65, 1.3, 3.0) == pytest.approx(0.0, abs=1e-12)


def test_zero_located_by_bisection():
    for alpha in (0.5, 1.0, 1.5):
        assert find_sign_change(alpha) == pytest.approx(alpha / 2, abs=1e-6)


def test_continuity_in_p():
    alpha = 1.2
    ps = np.linspace(0.05, 1.15, 45)
    vals = np.array([ctest_constant(p, alpha) for p in ps])
    slopes = np.diff(vals) / np.diff(ps)
    assert np.all(np.isfinite(slopes))
    assert np.max(np.abs(np.diff(slopes))) < 10 * np.max(np.abs(slopes))
    # exactly one sign change on the grid
    assert np.count_nonzero(np.diff(np.sign(vals[np.abs(vals) > 1e-12])) != 0) == 1


def test_invalid_parameters():
    with pytest.raises(ValueError):
        ctest_constant(1.2, 1.0)
    with pytest.raises(ValueError):
        frac_lap_power(0.5, 1.0, -1.0)


def test_hyperplane_axis_normal_reduces_to_1d():
    h = Hyperplane((1.0, 0.0), (0.0, 0.0))
    x = (0.7, -3.0)
    assert cyl_op_hyperplane(h, 0.4, 1.1, x) == pytest.approx(frac_lap_power(0.4, 1.1, 0.7), rel=1e-10)


def test_hyperplane_vanishes_at_half_alpha():
    h = Hyperplane((1 / math.sqrt(2), 1 / math.sqrt(2)), (0.0, 0.0))
    assert abs(cyl_op_hyperplane(h, 0.65, 1.3, (1.0, 0.5))) < 1e-10


def test_hyperplane_diagonal_band():
    h = Hyperplane((1.0, 1.0), (0.0, 0.0))
    alpha, p, d = 1.0, 0.7, 2
    x = np.array([0.4, 0.9])
    ratio = cyl_op_hyperplane(h, p, alpha, x) / h.distance(x) ** (p - alpha)
    c = ctest_constant(p, alpha)
    assert c * d ** (-alpha / 2) <= ratio <= c * d
    # the exact norm ratio sum|a_k|^alpha / |a|^alpha lies in [1, d^(1-alpha/2)]
    assert c * (1 - 1e-12) <= ratio <= c * d ** (1 - alpha / 2) * (1 + 1e-12)


def test_hyperplane_sum_identity(rng):
    for _ in range(10):
        a = rng.normal(size=3)
        x0 = rng.normal(size=3)
        h = Hyperplane(tuple(a), tuple(x0))
        x = x0 + a * rng.uniform(0.1, 2.0)
        total = cyl_op_hyperplane(h, 0.9, 1.4, x)
        assert total == pytest.approx(coordinate_terms(h, 0.9, 1.4, x).sum(), rel=1e-9)


def test_below_hyperplane():
    h = Hyperplane((0.0, 1.0), (0.0, 0.0))
    with pytest.raises(PointBelowHyperplane):
        cyl_op_hyperplane(h, 0.5, 1.2, (0.0, -0.1))
    with pytest.raises(ValueError):
        Hyperplane((0.0, 0.0), (0.0, 0.0))
