import math

import mpmath as mp
import numpy as np
import pytest
from scipy import integrate

from cylstable.errors import SingularArguments
from cylstable.stable_core import (
    AlphaParam,
    bound_envelope,
    cd_alpha,
    density_1d,
    density_table,
    envelope_constant,
    levy_density_axis,
    levy_tail_mass,
    product_kernel,
    tail_series,
)


def zolotarev_density(alpha, x):
    """Independent oracle: Zolotarev's integral representation (alpha != 1, x > 0)."""
    a, x = mp.mpf(alpha), mp.mpf(x)

    def v(th):
        return (mp.cos(th) / mp.sin(a * th)) ** (a / (a - 1)) * mp.cos((a - 1) * th) / mp.cos(th)

    c = x ** (a / (a - 1))
    val = mp.quad(lambda th: v(th) * mp.exp(-c * v(th)), [0, mp.pi / 4, mp.pi / 2])
    return float(a * x ** (1 / (a - 1)) / (mp.pi * abs(a - 1)) * val)


def test_alpha_param_validation():
    with pytest.raises(ValueError):
        AlphaParam(2.0)
    with pytest.raises(ValueError):
        AlphaParam(0.0)
    with pytest.raises(ValueError):
        AlphaParam(1.0, 0)


def test_cd_alpha_closed_forms():
    assert cd_alpha(AlphaParam(1.0, 1)) == pytest.approx(1 / math.pi, rel=1e-14)
    assert cd_alpha(AlphaParam(1.0, 2)) == pytest.approx(1 / (2 * math.pi), rel=1e-14)


@pytest.mark.parametrize("alpha,d", [(0.5, 1), (1.3, 2), (1.9, 3)])
def test_cd_alpha_against_high_precision(alpha, d):
    mp.mp.dps = 40
    a = mp.mpf(alpha)
    ref = a * 2 ** (a - 1) * mp.gamma((d + a) / 2) / (mp.pi ** (mp.mpf(d) / 2) * mp.gamma(1 - a / 2))
    assert cd_alpha(AlphaParam(alpha, d)) == pytest.approx(float(ref), rel=1e-13)


def test_cauchy_closed_form():
    z = np.linspace(-10, 10, 401)
    for t in (0.5, 1.0, 3.0):
        exact = t / (math.pi * (t * t + z * z))
        assert np.max(np.abs(density_1d(1.0, t, z) / exact - 1)) < 1e-8


@pytest.mark.parametrize("alpha", [0.5, 0.7, 1.3, 1.7])
def test_value_at_origin(alpha):
    assert density_1d(alpha, 1.0, 0.0) == pytest.approx(math.gamma(1 + 1 / alpha) / math.pi, rel=1e-8)


@pytest.mark.parametrize("alpha", [0.5, 0.8, 1.3, 1.7])
@pytest.mark.parametrize("x", [0.3, 1.0, 2.5, 7.0])
def test_zolotarev_oracle(alpha, x):
    assert density_1d(alpha, 1.0, x) == pytest.approx(zolotarev_density(alpha, x), rel=1e-9)


def test_self_similarity_1d():
    lhs = density_1d(1.5, 2.0, 3.0)
    rhs = 2 ** (-1 / 1.5) * density_1d(1.5, 1.0, 3.0 * 2 ** (-1 / 1.5))
    assert lhs == pytest.approx(rhs, rel=1e-12)


@pytest.mark.parametrize("alpha", [0.6, 1.0, 1.6])
def test_density_integrates_to_one(alpha):
    f = lambda z: density_1d(alpha, 1.0, z)
    zmax = 200.0
    body, _ = integrate.quad(f, 0, zmax, limit=400, points=[1, 5, 20])
    tail = zmax ** (-alpha) / alpha  # bound on int_zmax^inf z**(-1-alpha), the tail envelope
    total = 2 * body
    assert abs(total - 1) < 1e-6 + 2 * tail * envelope_constant(AlphaParam(alpha, 1))


def test_density_symmetric():
    z = np.array([0.1, 2.0, 13.0])
    assert np.array_equal(density_1d(1.2, 1.0, z), density_1d(1.2, 1.0, -z))


@pytest.mark.parametrize("alpha", [0.5, 0.9, 1.0, 1.4, 1.9])
def test_table_matches_quadrature(alpha):
    x = np.concatenate([[0.0], np.geomspace(1e-3, 300, 60)])
    tab = density_table(alpha).standard(x)
    exact = density_1d(alpha, 1.0, x)
    assert np.max(np.abs(tab / exact - 1)) < 1e-8


@pytest.mark.parametrize("alpha", [0.5, 0.8])
def test_tail_series_convergent_branch(alpha):
    x = np.array([10.0, 30.0])
    assert np.allclose(tail_series(alpha, x), density_1d(alpha, 1.0, x), rtol=1e-10)


def test_product_kernel_cauchy_diagonal():
    p = AlphaParam(1.0, 2)
    assert product_kernel(p, 1.0, [0.3, -1.0], [0.3, -1.0]) == pytest.approx(1 / math.pi**2, rel=1e-10)


def test_product_kernel_origin_d3():
    p = AlphaParam(0.7, 3)
    expected = (math.gamma(1 + 1 / 0.7) / math.pi) ** 3
    assert product_kernel(p, 1.0, np.zeros(3), np.zeros(3)) == pytest.approx(expected, rel=1e-8)


def test_product_kernel_scaling_and_symmetry(rng):
    p = AlphaParam(1.2, 2)
    for _ in range(100):
        lam = rng.uniform(0.5, 4.0)
        t = rng.uniform(0.1, 3.0)
        x, y = rng.normal(size=2) * 2, rng.normal(size=2) * 2
        lhs = lam ** (-2) * product_kernel(p, t * lam ** (-1.2), x / lam, y / lam)
        assert lhs == pytest.approx(product_kernel(p, t, x, y), rel=1e-8)
        assert product_kernel(p, t, x, y) == product_kernel(p, t, y, x)


def test_product_kernel_matches_quadrature_product():
    p = AlphaParam(1.3, 2)
    x, y = np.array([0.2, 1.0]), np.array([-0.5, 3.0])
    exact = density_1d(1.3, 0.7, 0.7) * density_1d(1.3, 0.7, 2.0)
    assert product_kernel(p, 0.7, x, y) == pytest.approx(exact, rel=1e-9)


def test_envelope_diagonal_and_crossover():
    p = AlphaParam(1.5, 2)
    c = envelope_constant(p)
    low, high = bound_envelope(p, 2.0, [0, 0], [0, 0])
    assert low == pytest.approx(2.0 ** (-2 / 1.5) / c)
    assert high == pytest.approx(2.0 ** (-2 / 1.5) * c)
    assert low <= product_kernel(p, 2.0, [0, 0], [0, 0]) <= high
    r = 2.0 ** (1 / 1.5)
    low, high = bound_envelope(p, 2.0, [0, 0], [r, -r])
    assert low == pytest.approx(high / c**2)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_envelope_never_violated(alpha, rng):
    p = AlphaParam(alpha, 2)
    t = 10 ** rng.uniform(-2, 1, 1000)
    x = rng.standard_cauchy((1000, 2))
    y = rng.standard_cauchy((1000, 2))
    val = product_kernel(p, t, x, y)
    low, high = bound_envelope(p, t, x, y)
    assert np.all(low <= val) and np.all(val <= high)


def test_levy_density():
    assert levy_density_axis(1.0, 0.0, 1.0) == pytest.approx(1 / math.pi)
    assert levy_density_axis(1.4, 0.0, 2.0) == pytest.approx(2 ** (-2.4) * levy_density_axis(1.4, 0.0, 1.0))
    assert levy_density_axis(1.4, 0.3, -1.0) == levy_density_axis(1.4, -1.0, 0.3)
    with pytest.raises(SingularArguments):
        levy_density_axis(1.0, 0.5, 0.5)


def test_levy_tail_mass_by_quadrature():
    eps, alpha = 0.5, 1.3
    half, _ = integrate.quad(lambda th: levy_density_axis(alpha, 0.0, th), eps, np.inf)
    assert levy_tail_mass(alpha, eps) == pytest.approx(2 * half, rel=1e-10)
