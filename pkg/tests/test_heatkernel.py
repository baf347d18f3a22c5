import math

import numpy as np
import pytest

from cylstable.errors import DecayNotResolved, ZeroSurvivors
from cylstable.geometry import ball_domain, paper_domain
from cylstable.heatkernel import (
    boundary_weight,
    bootstrap_mean_se,
    bound_ratio_diagnostics,
    default_bandwidth,
    epanechnikov,
    estimate_lambda1,
    estimate_pd,
    estimate_pd_bridge,
    estimate_pd_subtraction,
    estimate_pd_survivor_kde,
    kernel_pair_sums,
)
from cylstable.heatkernel import _fit_window, _survival_curve, _wls_slope
from cylstable.simulator import SimConfig, simulate_paths
from cylstable.stable_core import AlphaParam, product_kernel

CAUCHY = AlphaParam(1.0, 2)
DISC = ball_domain(1.0)


def joint(a, b):
    return math.hypot(a.stderr, b.stderr)


def test_epanechnikov_integrates_to_one():
    eps = 0.3
    u = np.linspace(-eps, eps, 4001)
    uu = np.stack(np.meshgrid(u, u, indexing="ij"), axis=-1)
    w = epanechnikov(uu, eps)
    du = u[1] - u[0]
    assert w.sum() * du * du == pytest.approx(1.0, abs=2e-3)
    assert epanechnikov(np.array([eps, 0.0]), eps) == 0.0


def test_default_bandwidth_rate():
    assert default_bandwidth(CAUCHY, 1.0, 10**6) == pytest.approx(0.8 * 1e-1)
    assert default_bandwidth(AlphaParam(0.5, 2), 0.5, 1) == pytest.approx(0.8 * 0.25)


def test_pair_sums_match_brute_force(rng):
    xs = rng.normal(size=(400, 2))
    ys = rng.normal(size=(300, 2))
    eps = 0.4
    a, b = kernel_pair_sums(xs, ys, eps)
    full = epanechnikov(xs[:, None, :] - ys[None, :, :], eps)
    np.testing.assert_allclose(a, full.sum(axis=1), rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(b, full.sum(axis=0), rtol=1e-12, atol=1e-15)


def test_pair_sums_three_dimensions(rng):
    xs = rng.uniform(-1, 1, size=(200, 3))
    ys = rng.uniform(-1, 1, size=(150, 3))
    a, _ = kernel_pair_sums(xs, ys, 0.3)
    full = epanechnikov(xs[:, None, :] - ys[None, :, :], 0.3)
    np.testing.assert_allclose(a, full.sum(axis=1), rtol=1e-12, atol=1e-15)


def test_bootstrap_helper_matches_formula(rng):
    n = 20_000
    vals = rng.exponential(size=500)
    se = bootstrap_mean_se(vals, n, rng, n_boot=2000)
    full = np.zeros(n)
    full[:500] = vals
    assert se == pytest.approx(full.std() / math.sqrt(n), rel=0.1)
    assert bootstrap_mean_se(np.zeros(0), n, rng) == 0.0


def test_free_kernel_recovered_by_kde_without_domain():
    # a huge ball kills nothing before t, so the KDE estimates the free kernel
    big = ball_domain(100.0)
    t, x, y = 0.5, (0.0, 0.0), (0.3, -0.2)
    est = estimate_pd_survivor_kde(big, CAUCHY, t, x, y, SimConfig(n_paths=100_000, seed=3))
    free = float(product_kernel(CAUCHY, t, np.array(x), np.array(y)))
    assert abs(est.value - free) < 3 * est.stderr + 0.02 * free


@pytest.mark.parametrize("t,x,y", [(0.5, (0.0, 0.0), (0.3, 0.0)), (0.3, (0.2, -0.2), (-0.3, 0.4))])
def test_three_methods_agree(t, x, y):
    cfg = SimConfig(dt=1e-3, n_paths=60_000, seed=11)
    kde = estimate_pd_survivor_kde(DISC, CAUCHY, t, x, y, cfg)
    bri = estimate_pd_bridge(DISC, CAUCHY, t, x, y, cfg, path0=10**6)
    sub = estimate_pd_subtraction(DISC, CAUCHY, t, x, y, cfg, path0=3 * 10**6)
    for a, b in ((kde, bri), (kde, sub), (bri, sub)):
        assert abs(a.value - b.value) < 3 * joint(a, b) + 0.03 * abs(a.value)
    assert all(e.stderr > 0 for e in (kde, bri, sub))


def test_symmetry_in_x_and_y():
    cfg = SimConfig(dt=1e-3, n_paths=60_000, seed=5)
    t, x, y = 0.4, (0.4, 0.1), (-0.2, -0.3)
    a = estimate_pd_survivor_kde(DISC, CAUCHY, t, x, y, cfg)
    b = estimate_pd_survivor_kde(DISC, CAUCHY, t, y, x, cfg, path0=10**6)
    assert abs(a.value - b.value) < 3 * joint(a, b) + 0.03 * a.value


def test_killed_kernel_below_free_kernel():
    cfg = SimConfig(dt=1e-3, n_paths=40_000, seed=2)
    t, x, y = 0.5, (0.5, 0.0), (-0.5, 0.2)
    est = estimate_pd_survivor_kde(DISC, CAUCHY, t, x, y, cfg)
    free = float(product_kernel(CAUCHY, t, np.array(x), np.array(y)))
    assert est.value <= free + 3 * est.stderr


def test_chapman_kolmogorov_closure():
    # int p_D(t/2, x, z) p_D(t/2, z, y) dz over a mesh of KDE cells against p_D(t, x, y)
    t, x, y = 0.4, np.array([0.2, 0.0]), np.array([-0.2, 0.1])
    cfg = SimConfig(dt=1e-3, t_end=0.5 * t, n_paths=200_000, seed=4)
    rx = simulate_paths(CAUCHY, x, cfg, DISC)
    ry = simulate_paths(CAUCHY, y, cfg, DISC, path0=10**6)
    h = 0.05
    edges = np.arange(-1.0, 1.0 + h / 2, h)

    def density(res):
        alive = res.final[~res.killed]
        hist, _, _ = np.histogram2d(alive[:, 0], alive[:, 1], bins=[edges, edges])
        return hist / (res.n_paths * h * h)

    ck = float(np.sum(density(rx) * density(ry)) * h * h)
    direct = estimate_pd_survivor_kde(DISC, CAUCHY, t, x, y,
                                      SimConfig(dt=1e-3, n_paths=200_000, seed=4), path0=3 * 10**6)
    # the histogram product is biased by O(h^2) curvature; allow 5% on top of 3 stderr
    assert abs(ck - direct.value) < 3 * direct.stderr + 0.05 * direct.value


def test_zero_kernel_between_rook_classes():
    d = paper_domain("diagonal_balls_6_3")
    x, y = d.marked["x"], d.marked["y"]
    cfg = SimConfig(dt=1e-3, n_paths=20_000, seed=1)
    est = estimate_pd_survivor_kde(d, CAUCHY, 1.0, x, y, cfg)
    # a cross-component hit needs a discrete step that tunnels through the gap corner
    assert est.value < 0.02 * estimate_pd_survivor_kde(d, CAUCHY, 1.0, x, x, cfg).value


def test_zero_survivors_raise():
    tiny = ball_domain(0.01)
    with pytest.raises(ZeroSurvivors):
        estimate_pd_survivor_kde(tiny, CAUCHY, 1.0, (0.0, 0.0), (0.0, 0.0), SimConfig(n_paths=50, seed=0))


def test_estimate_pd_dispatch():
    cfg = SimConfig(n_paths=2000, seed=0)
    for m, full in (("kde", "survivor_kde"), ("sub", "subtraction"), ("bridge", "bridge")):
        est = estimate_pd(m, DISC, CAUCHY, 0.2, (0.0, 0.0), (0.1, 0.0), cfg)
        assert est.method == full
        assert set(est.to_dict()) >= {"value", "stderr", "method", "t", "x", "y"}
    with pytest.raises(ValueError):
        estimate_pd("magic", DISC, CAUCHY, 0.2, (0.0, 0.0), (0.1, 0.0), cfg)
    with pytest.raises(ValueError):
        estimate_pd("kde", DISC, CAUCHY, 0.2, (2.0, 0.0), (0.1, 0.0), cfg)


def test_survival_curve_and_window():
    tau = np.array([0.1, 0.2, 0.3, 0.4, np.inf])
    np.testing.assert_allclose(_survival_curve(tau, np.array([0.0, 0.2, 1.0])), [1.0, 0.6, 0.2])
    rng = np.random.default_rng(0)
    tau = rng.exponential(1 / 2.0, size=100_000)
    grid = _fit_window(tau)
    assert grid[0] == pytest.approx(np.log(5) / 2.0, rel=0.02)
    assert grid[-1] <= 3 * grid[0] + 1e-12
    assert _wls_slope([tau], [grid]) == pytest.approx(2.0, rel=0.02)


def test_lambda1_positive_and_start_independent():
    cfg = SimConfig(dt=1e-3, t_end=1.0, n_paths=40_000, seed=7)
    est = estimate_lambda1(DISC, CAUCHY, [(0.0, 0.0), (0.3, 0.3)], cfg, n_boot=50)
    assert est.lambda1 > 0 and est.stderr > 0
    (_, l0, s0, *_), (_, l1, s1, *_) = est.per_start
    assert abs(l0 - l1) < 3 * math.hypot(s0, s1)
    # a disc sits between the inscribed and circumscribed products of intervals
    assert 2 * 1.1577738 < est.lambda1 < 2 * 1.1577738 * math.sqrt(2)


def test_lambda1_flat_curve_rejected():
    cfg = SimConfig(dt=1e-3, t_end=0.2, n_paths=2000, seed=0)
    with pytest.raises(DecayNotResolved):
        estimate_lambda1(DISC, CAUCHY, [(0.0, 0.0)], cfg, t_grid=[0.001, 0.002], n_boot=5)


def test_boundary_weight():
    w = boundary_weight(DISC, CAUCHY, 0.25, np.array([[0.0, 0.0], [0.99, 0.0]]))
    np.testing.assert_allclose(w, [1.0, math.sqrt(0.01) / 0.5])


def test_bound_ratio_diagnostics_small():
    cfg = SimConfig(dt=1e-3, n_paths=20_000, seed=3)
    pairs = [((0.0, 0.0), (0.3, 0.0)), ((0.8, 0.0), (0.0, 0.5))]
    diag = bound_ratio_diagnostics(DISC, CAUCHY, [0.2, 0.4], pairs, cfg, method="survivor_kde")
    assert len(diag.rows) == 4
    assert diag.ratio_min > 0 and diag.band < 50
    assert diag.n_zero == 0
