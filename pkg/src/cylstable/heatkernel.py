"""Monte Carlo estimators of the Dirichlet heat kernel ``p_D(t, x, y)`` and of ``lambda_1(D)``.

Three estimators of ``p_D``:

``survivor_kde``  kernel density of the surviving endpoints of paths from ``x``
``bridge``        ``int p_D(t/2, x, z) p_D(t/2, y, z) dz`` from two ensembles
                  (paths from ``x`` and from ``y``) matched in the middle
``subtraction``   ``p(t, x, y) - E_x[p(t - tau, X_tau, y); tau < t]`` with the
                  exact free kernel and simulated exits

All smoothing uses the product Epanechnikov kernel.  Standard errors come
from a path-level bootstrap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numba as nb
import numpy as np

from .errors import DecayNotResolved, ZeroSurvivors
from .geometry import Domain
from .simulator import SimConfig, SimResult, run_until_exit, simulate_paths, steps_for
from .stable_core import AlphaParam, product_kernel

N_BOOTSTRAP = 200
METHODS = ("survivor_kde", "bridge", "subtraction")


@dataclass
class KernelEstimate:
    t: float
    x: tuple
    y: tuple
    value: float
    stderr: float
    method: str
    bandwidth: float | None
    dt: float
    n_paths: int
    n_survivors: int = 0
    sensitivity: dict = field(default_factory=dict)

    @property
    def flagged(self) -> bool:
        """Negative subtraction estimate (allowed within two standard errors)."""
        return self.value < 0

    def to_dict(self) -> dict:
        return {
            "t": self.t, "x": list(self.x), "y": list(self.y), "value": self.value,
            "stderr": self.stderr, "method": self.method, "bandwidth": self.bandwidth,
            "dt": self.dt, "n_paths": self.n_paths, "n_survivors": self.n_survivors,
            "sensitivity": self.sensitivity,
        }


def default_bandwidth(params: AlphaParam, t: float, n: int) -> float:
    """``0.8 t**(1/alpha) n**(-1/(d+4))`` per coordinate."""
    return 0.8 * t ** (1.0 / params.alpha) * n ** (-1.0 / (params.dim + 4))


def epanechnikov(u: np.ndarray, eps: float) -> np.ndarray:
    """Product Epanechnikov kernel with half-width ``eps`` along the last axis."""
    v = np.clip(1.0 - (np.asarray(u) / eps) ** 2, 0.0, None) * (0.75 / eps)
    return np.prod(v, axis=-1)


def _bootstrap_rng(seed: int, tag: int) -> np.random.Generator:
    return np.random.default_rng([int(seed) & 0xFFFFFFFF, int(seed) >> 32, tag])


def bootstrap_mean_se(values: np.ndarray, n_total: int, rng: np.random.Generator,
                      n_boot: int = N_BOOTSTRAP) -> float:
    """Bootstrap standard error of ``sum(values) / n_total``.

    ``values`` holds only the nonzero per-path contributions; the other
    ``n_total - len(values)`` paths contribute zero.  A resample then needs
    only the number of draws landing on the nonzero set (binomial) and their
    spread over it (multinomial), which is exactly the multinomial bootstrap.
    """
    m = len(values)
    if m == 0:
        return 0.0
    means = np.empty(n_boot)
    for b in range(n_boot):
        k = rng.binomial(n_total, m / n_total)
        counts = rng.multinomial(k, np.full(m, 1.0 / m))
        means[b] = counts @ values / n_total
    return float(means.std(ddof=1))


# ---------------------------------------------------------------------------
# pair sums for the bridge
# ---------------------------------------------------------------------------

@nb.njit(cache=True)
def _pair_sums(xs, ys, eps, a_out, b_out):
    n1, d = xs.shape
    n2 = ys.shape[0]
    if n1 == 0 or n2 == 0:
        return
    mult = np.empty(d, dtype=np.int64)
    for k in range(d):
        mult[k] = np.int64(1000003) ** k * np.int64(2654435761) + np.int64(k * 97)
    keys = np.empty(n2, dtype=np.int64)
    for j in range(n2):
        key = np.int64(0)
        for k in range(d):
            key += np.int64(math.floor(ys[j, k] / eps)) * mult[k]
        keys[j] = key
    order = np.argsort(keys)
    skeys = keys[order]
    n_off = 3 ** d
    cell = np.empty(d, dtype=np.int64)
    norm = (0.75 / eps) ** d
    for i in range(n1):
        for k in range(d):
            cell[k] = np.int64(math.floor(xs[i, k] / eps))
        for o in range(n_off):
            rem = o
            key = np.int64(0)
            for k in range(d):
                key += (cell[k] + (rem % 3) - 1) * mult[k]
                rem //= 3
            lo = np.searchsorted(skeys, key)
            hi = np.searchsorted(skeys, key, side="right")
            for q in range(lo, hi):
                j = order[q]
                w = norm
                for k in range(d):
                    u = (xs[i, k] - ys[j, k]) / eps
                    if u >= 1.0 or u <= -1.0:
                        w = 0.0
                        break
                    w *= 1.0 - u * u
                if w > 0.0:
                    a_out[i] += w
                    b_out[j] += w


def kernel_pair_sums(xs: np.ndarray, ys: np.ndarray, eps: float):
    """Row and column sums of ``K_eps(x_i - y_j)`` over all pairs (cell lists)."""
    xs = np.ascontiguousarray(xs, dtype=float)
    ys = np.ascontiguousarray(ys, dtype=float)
    a = np.zeros(len(xs))
    b = np.zeros(len(ys))
    _pair_sums(xs, ys, float(eps), a, b)
    return a, b


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------

def _check_points(domain, x, y):
    for p in (x, y):
        if not domain.contains(np.asarray(p, dtype=float)):
            raise ValueError(f"{list(p)} is not in the domain")


def _survivors(res: SimResult, t: float) -> np.ndarray:
    if steps_for(t, res.dt) == res.n_steps:
        return res.final[~res.killed]
    snap = res.snapshot(t)
    return snap[res.alive_at(t)]


def kde_from_samples(params, t, x, y, res: SimResult, bandwidth=None, cfg_seed=0) -> KernelEstimate:
    """Survivor KDE from an existing ensemble started at ``x``."""
    n = res.n_paths
    pts = _survivors(res, t)
    if len(pts) == 0:
        raise ZeroSurvivors(f"no path from {list(x)} survived to t={t}")
    eps = default_bandwidth(params, t, n) if bandwidth is None else float(bandwidth)
    w = epanechnikov(pts - np.asarray(y, dtype=float), eps)
    nz = w[w > 0]
    value = float(nz.sum() / n)
    se = bootstrap_mean_se(nz, n, _bootstrap_rng(cfg_seed, 1))
    sens = {f"{f:g}": float(epanechnikov(pts - np.asarray(y), f * eps).sum() / n) for f in (0.5, 2.0)}
    return KernelEstimate(t, tuple(map(float, x)), tuple(map(float, y)), value, se, "survivor_kde",
                          eps, res.dt, n, len(pts), sens)


def estimate_pd_survivor_kde(domain: Domain, params: AlphaParam, t: float, x, y, cfg: SimConfig,
                             bandwidth: float | None = None, path0: int = 0) -> KernelEstimate:
    """``(1/n) sum_i K_eps(X_t^i - y)`` over the paths from ``x`` alive at ``t``."""
    _check_points(domain, x, y)
    res = simulate_paths(params, x, replace(cfg, t_end=t), domain, path0=path0)
    return kde_from_samples(params, t, x, y, res, bandwidth, cfg.seed + path0)


def bridge_from_samples(params, t, x, y, res_x: SimResult, res_y: SimResult, bandwidth=None,
                        cfg_seed=0, sensitivity: bool = False) -> KernelEstimate:
    """Bridge estimate from ensembles started at ``x`` and ``y`` (snapshots at ``t/2``)."""
    n1, n2 = res_x.n_paths, res_y.n_paths
    px = _survivors(res_x, 0.5 * t)
    py = _survivors(res_y, 0.5 * t)
    if len(px) == 0 or len(py) == 0:
        raise ZeroSurvivors(f"no path survived to t/2={0.5 * t}")
    n = min(n1, n2)
    eps = default_bandwidth(params, t, n) if bandwidth is None else float(bandwidth)
    a, b = kernel_pair_sums(px, py, eps)
    value = float(a.sum() / (n1 * n2))
    # linearised (Hoeffding projection) bootstrap: U* - U ~ mean(a_i*) + mean(b_j*) - 2U
    ga, gb = a / n2, b / n1
    rng = _bootstrap_rng(cfg_seed, 2)
    se = math.hypot(bootstrap_mean_se(ga[ga > 0], n1, rng), bootstrap_mean_se(gb[gb > 0], n2, rng))
    sens = {}
    for f in (0.5, 2.0) if sensitivity else ():
        aa, _ = kernel_pair_sums(px, py, f * eps)
        sens[f"{f:g}"] = float(aa.sum() / (n1 * n2))
    return KernelEstimate(t, tuple(map(float, x)), tuple(map(float, y)), value, se, "bridge",
                          eps, res_x.dt, n1 + n2, len(px) + len(py), sens)


def estimate_pd_bridge(domain: Domain, params: AlphaParam, t: float, x, y, cfg: SimConfig,
                       bandwidth: float | None = None, path0: int = 0,
                       sensitivity: bool = False) -> KernelEstimate:
    """Semigroup bridge: ``n`` paths from ``x`` (indices ``path0 + [0, n)``) and
    ``n`` from ``y`` (``path0 + [n, 2n)``), each run to ``t/2``; all pairs are
    matched with ``K_eps``.  Uses ``p_D(t/2, y, z) = p_D(t/2, z, y)``."""
    _check_points(domain, x, y)
    half = replace(cfg, t_end=0.5 * t)
    res_x = simulate_paths(params, x, half, domain, path0=path0)
    res_y = simulate_paths(params, y, half, domain, path0=path0 + cfg.n_paths)
    return bridge_from_samples(params, t, x, y, res_x, res_y, bandwidth, cfg.seed + path0, sensitivity)


def subtraction_from_samples(params, t, x, y, res: SimResult, cfg_seed=0) -> KernelEstimate:
    n = res.n_paths
    k_t = steps_for(t, res.dt)
    hit = res.killed & (res.kill_step <= k_t)
    tau = (res.kill_step[hit] - 0.5) * res.dt
    y = np.asarray(y, dtype=float)
    contrib = product_kernel(params, t - tau, res.exit_point[hit], y) if hit.any() else np.zeros(0)
    contrib = np.atleast_1d(contrib)
    free = product_kernel(params, t, np.asarray(x, dtype=float), y)
    nz = contrib[contrib > 0]
    value = float(free - nz.sum() / n)
    se = bootstrap_mean_se(nz, n, _bootstrap_rng(cfg_seed, 3))
    return KernelEstimate(t, tuple(map(float, x)), tuple(map(float, y)), value, se, "subtraction",
                          None, res.dt, n, int(n - hit.sum()))


def estimate_pd_subtraction(domain: Domain, params: AlphaParam, t: float, x, y, cfg: SimConfig,
                            path0: int = 0) -> KernelEstimate:
    """``p(t,x,y) - (1/n) sum_{tau_i < t} p(t - tau_i, X_{tau_i}, y)`` with ``tau_i`` the
    exit-interval midpoint and ``X_{tau_i}`` the first outside state."""
    _check_points(domain, x, y)
    res = simulate_paths(params, x, replace(cfg, t_end=t), domain, path0=path0)
    return subtraction_from_samples(params, t, x, y, res, cfg.seed + path0)


def estimate_pd(method: str, domain, params, t, x, y, cfg, bandwidth=None, path0=0) -> KernelEstimate:
    method = {"kde": "survivor_kde", "sub": "subtraction"}.get(method, method)
    if method == "survivor_kde":
        return estimate_pd_survivor_kde(domain, params, t, x, y, cfg, bandwidth, path0)
    if method == "bridge":
        return estimate_pd_bridge(domain, params, t, x, y, cfg, bandwidth, path0)
    if method == "subtraction":
        return estimate_pd_subtraction(domain, params, t, x, y, cfg, path0)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


# ---------------------------------------------------------------------------
# principal eigenvalue
# ---------------------------------------------------------------------------

@dataclass
class Lambda1Estimate:
    lambda1: float
    stderr: float
    per_start: list  # (x, lambda, stderr, t_lo, t_hi)
    dt: float
    n_paths: int


def _survival_curve(tau: np.ndarray, ts: np.ndarray) -> np.ndarray:
    srt = np.sort(tau)
    return 1.0 - np.searchsorted(srt, ts, side="right") / len(tau)


def _fit_window(tau: np.ndarray, t_grid=None, n_grid: int = 12,
                s_start: float = 0.2, s_stop: float = 0.02):
    """Fit window ``[t0, min(3 t0, t_stop)]`` with ``S(t0) = s_start`` and
    ``S(t_stop) = s_stop``.

    Starting at 20% survival skips the transient in which higher modes
    still bend ``log S``; from the centre of a disc that transient lasts
    until ``S`` is roughly 0.25.
    """
    if t_grid is not None:
        return np.asarray(t_grid, dtype=float)
    t0 = float(np.quantile(tau, 1.0 - s_start))
    t_stop = float(np.quantile(tau, 1.0 - s_stop))  # inf entries (survivors) sort last
    return np.linspace(t0, min(3.0 * t0, t_stop), n_grid)


def _wls_slope(tau_sets, grids):
    """Common slope of ``log S`` (one intercept per start), inverse-variance weighted."""
    rows, ys, ws = [], [], []
    m = len(tau_sets)
    for i, (tau, ts_i) in enumerate(zip(tau_sets, grids)):
        s = _survival_curve(tau, ts_i)
        n = len(tau)
        ok = s > 0
        if not ok.all():
            raise DecayNotResolved("survival reached zero inside the fit window")
        var = (1.0 - s) / (n * s)
        for t, si, vi in zip(ts_i, s, var):
            r = np.zeros(m + 1)
            r[i] = 1.0
            r[m] = t
            rows.append(r)
            ys.append(math.log(si))
            ws.append(1.0 / max(vi, 1e-300))
    A = np.array(rows)
    sw = np.sqrt(np.array(ws))
    coef, *_ = np.linalg.lstsq(A * sw[:, None], np.array(ys) * sw, rcond=None)
    return -float(coef[m])


def _check_resolved(tau, grid):
    s = _survival_curve(tau, np.array([grid[0], grid[-1]]))
    n = len(tau)
    if s[1] * n < 30:
        raise DecayNotResolved(f"only {s[1] * n:.0f} survivors at the end of the fit window")
    drop = s[0] - s[1]
    noise = math.sqrt(s[0] * (1 - s[0]) / n) + math.sqrt(s[1] * (1 - s[1]) / n)
    if drop < 3 * noise or math.log(s[0] / s[1]) < 0.5:
        raise DecayNotResolved("survival curve is flat over the fit window")


def estimate_lambda1(domain: Domain, params: AlphaParam, x_list, cfg: SimConfig, t_grid=None,
                     n_boot: int = N_BOOTSTRAP) -> Lambda1Estimate:
    """Decay rate of ``P_x(tau_D > t)``: weighted least squares of ``-log S(t)`` on
    the fit window, pooled over the starts in ``x_list`` (common slope).

    Start ``i`` uses path indices ``[i n, (i+1) n)``.  Standard errors come
    from a path bootstrap that redoes the window choice and the fit.
    """
    n = cfg.n_paths
    taus, grids, per = [], [], []
    rng = _bootstrap_rng(cfg.seed, 4)
    for i, x in enumerate(x_list):
        if t_grid is None:
            res = run_until_exit(domain, params, x, cfg, path0=i * n)
        else:
            horizon = replace(cfg, t_end=float(np.max(t_grid)))
            res = simulate_paths(params, x, horizon, domain, path0=i * n)
        tau = res.tau_hat()
        grid = _fit_window(tau, t_grid)
        _check_resolved(tau, grid)
        lam = _wls_slope([tau], [grid])
        boots = []
        for _ in range(n_boot):
            tb = tau[rng.integers(0, n, n)]
            boots.append(_wls_slope([tb], [_fit_window(tb, t_grid)]))
        per.append((tuple(map(float, x)), lam, float(np.std(boots, ddof=1)),
                    float(grid[0]), float(grid[-1])))
        taus.append(tau)
        grids.append(grid)
    lam = _wls_slope(taus, grids)
    boots = []
    for _ in range(n_boot):
        tbs = [t[rng.integers(0, n, n)] for t in taus]
        boots.append(_wls_slope(tbs, [_fit_window(tb, t_grid) for tb in tbs]))
    return Lambda1Estimate(lam, float(np.std(boots, ddof=1)), per, cfg.dt, n)


# ---------------------------------------------------------------------------
# two-sided bound diagnostics
# ---------------------------------------------------------------------------

def boundary_weight(domain: Domain, params: AlphaParam, t, z) -> np.ndarray:
    """``w_t(z) = 1 ^ delta_D(z)**(alpha/2) / sqrt(t)``."""
    delta = np.maximum(domain.sdf(z), 0.0)
    return np.minimum(1.0, delta ** (params.alpha / 2.0) / np.sqrt(t))


@dataclass
class BoundDiagnostics:
    rows: list
    ratio_min: float
    ratio_max: float
    n_zero: int

    @property
    def band(self) -> float:
        return self.ratio_max / self.ratio_min if self.ratio_min > 0 else math.inf


def bound_ratio_diagnostics(domain: Domain, params: AlphaParam, times, pairs, cfg: SimConfig,
                            method: str = "bridge", bandwidth_scale: float = 1.0) -> BoundDiagnostics:
    """Ratios ``p_D_hat / (w_t(x) w_t(y) p(t,x,y))`` over ``times x pairs``.

    Every distinct point is simulated once (to ``max(times)`` or half of it for
    the bridge) with snapshots at the needed times; ensembles from different
    points use disjoint path indices.
    """
    times = sorted(float(t) for t in times)
    pts = []
    for x, y in pairs:
        for p in (tuple(map(float, x)), tuple(map(float, y))):
            if p not in pts:
                pts.append(p)
    factor = 0.5 if method == "bridge" else 1.0
    horizon = factor * times[-1]
    snaps = [factor * t for t in times]
    runs = {}
    for i, p in enumerate(pts):
        if not domain.contains(np.asarray(p)):
            raise ValueError(f"{list(p)} is not in the domain")
        runs[p] = simulate_paths(params, p, replace(cfg, t_end=horizon), domain,
                                 path0=i * cfg.n_paths, snapshot_times=snaps)
    rows = []
    for t in times:
        for x, y in pairs:
            x, y = tuple(map(float, x)), tuple(map(float, y))
            bw = bandwidth_scale * default_bandwidth(params, t, cfg.n_paths)
            if method == "bridge":
                est = bridge_from_samples(params, t, x, y, runs[x], runs[y], bw, cfg.seed)
            elif method == "survivor_kde":
                est = kde_from_samples(params, t, x, y, runs[x], bw, cfg.seed)
            else:
                est = subtraction_from_samples(params, t, x, y, runs[x], cfg.seed)
            ref = float(boundary_weight(domain, params, t, np.array(x)) *
                        boundary_weight(domain, params, t, np.array(y)) *
                        product_kernel(params, t, np.array(x), np.array(y)))
            rows.append({"t": t, "x": x, "y": y, "estimate": est.value, "stderr": est.stderr,
                         "reference": ref, "ratio": est.value / ref if ref > 0 else math.inf,
                         "delta_x": float(domain.sdf(np.array(x))), "delta_y": float(domain.sdf(np.array(y)))})
    ratios = np.array([r["ratio"] for r in rows])
    # zero estimates enter as ratio 0 and are counted in n_zero
    return BoundDiagnostics(rows, float(ratios.min()), float(ratios.max()), int(np.sum(ratios <= 0)))
