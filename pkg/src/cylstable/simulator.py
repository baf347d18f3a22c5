"""Time-discretised simulation of the cylindrical process, free or killed.

Paths move on the grid ``t_k = k dt`` with exact stable increments
``dt**(1/alpha) Z`` per coordinate.  A killed path dies at the first grid
time whose state lies outside the domain; its exit time is bracketed by
``(tau_lo, tau_hi) = ((k-1) dt, k dt)`` and reported as the midpoint.

The random input of path ``i``, coordinate ``j``, step ``s`` is the counter
``(seed, i, j, s)``, so every path can be regenerated alone, and results do
not depend on the number of worker threads.  Occupation histograms are
integer counts (in half-steps), so reductions are exact.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numba as nb
import numpy as np

from .errors import StartOutsideDomain, TruncationBudgetExceeded
from .geometry import Domain, inside_point
from .rng import stable_variate
from .stable_core import AlphaParam, cd_alpha

RECORD_MODES = ("endpoint_only", "full_path", "exit_only")
_CHUNK = 8192


@dataclass(frozen=True)
class SimConfig:
    """Discretisation and Monte Carlo budget.

    ``workers`` threads share the paths; ``max_t_end`` caps the automatic
    horizon extension used by :func:`mean_exit_time`.
    """

    dt: float = 1e-3
    t_end: float = 1.0
    n_paths: int = 10_000
    seed: int = 0
    record_mode: str = "endpoint_only"
    workers: int = 1
    max_t_end: float | None = None

    def __post_init__(self):
        if self.dt <= 0 or self.t_end <= 0:
            raise ValueError("dt and t_end must be positive")
        if self.dt > self.t_end * (1 + 1e-12):
            raise ValueError("dt must not exceed t_end")
        if self.n_paths < 1:
            raise ValueError("n_paths must be at least 1")
        if self.record_mode not in RECORD_MODES:
            raise ValueError(f"record_mode must be one of {RECORD_MODES}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def n_steps(self) -> int:
        return steps_for(self.t_end, self.dt)


def steps_for(t: float, dt: float) -> int:
    n = int(round(t / dt))
    if abs(n * dt - t) > 1e-9 * max(t, 1.0):
        raise ValueError(f"t={t} is not a multiple of dt={dt}")
    return n


@dataclass(frozen=True)
class Mesh:
    """Regular cell grid ``origin + h * (index + [0, 1))``."""

    origin: tuple
    h: float
    shape: tuple

    @classmethod
    def covering(cls, lo, hi, h: float) -> "Mesh":
        lo = np.asarray(lo, dtype=float)
        n = np.maximum(np.ceil((np.asarray(hi, dtype=float) - lo) / h - 1e-9).astype(int), 1)
        return cls(tuple(lo.tolist()), float(h), tuple(int(v) for v in n))

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def cell_volume(self) -> float:
        return self.h ** self.dim

    def centers(self) -> np.ndarray:
        axes = [self.origin[k] + self.h * (np.arange(n) + 0.5) for k, n in enumerate(self.shape)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def index(self, pts) -> np.ndarray:
        """Flat cell index of each point, -1 outside the mesh."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        finite = np.all(np.isfinite(pts), axis=1)
        rel = np.where(finite[:, None], (pts - np.asarray(self.origin)) / self.h, -1.0)
        idx = np.floor(np.clip(rel, -1.0, float(max(self.shape)))).astype(np.int64)
        ok = np.all((idx >= 0) & (idx < np.asarray(self.shape)), axis=1)
        flat = np.full(len(pts), -1, dtype=np.int64)
        flat[ok] = np.ravel_multi_index(tuple(idx[ok].T), self.shape)
        return flat

    def histogram(self, pts) -> np.ndarray:
        idx = self.index(pts)
        return np.bincount(idx[idx >= 0], minlength=int(np.prod(self.shape))).reshape(self.shape)


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

@nb.njit(cache=True, nogil=True)
def _occ_add(occ, x, origin, h, shape, w):
    flat = 0
    for k in range(x.shape[0]):
        c = math.floor((x[k] - origin[k]) / h)
        if c < 0 or c >= shape[k]:
            return
        flat = flat * shape[k] + c
    occ[flat] += w


@nb.njit(cache=True, nogil=True)
def _run_paths(alpha, dt, seed, path0, step0, n_steps, x_init, alive, kinds, offs, counts, fp,
               use_domain, snap_steps, snaps, kill_step, exit_pt, pre_pt, final,
               occ_origin, occ_h, occ_shape, occ, use_occ):
    n, d = x_init.shape
    scale = dt ** (1.0 / alpha)
    x = np.empty(d)
    prev = np.empty(d)
    m = snap_steps.shape[0]
    for i in range(n):
        if not alive[i]:
            continue
        path = path0 + i
        for j in range(d):
            x[j] = x_init[i, j]
        if use_occ:
            _occ_add(occ, x, occ_origin, occ_h, occ_shape, 1)
        q = 0
        while q < m and snap_steps[q] < step0:
            q += 1
        killed = False
        for s in range(step0, step0 + n_steps):
            while q < m and snap_steps[q] == s:
                for j in range(d):
                    snaps[q, i, j] = x[j]
                q += 1
            for j in range(d):
                prev[j] = x[j]
                x[j] = x[j] + scale * stable_variate(alpha, seed, path, j, s)
            if use_domain and not inside_point(x, kinds, offs, counts, fp):
                kill_step[i] = s + 1
                for j in range(d):
                    exit_pt[i, j] = x[j]
                    pre_pt[i, j] = prev[j]
                killed = True
                break
            if use_occ:
                w = 2 if s + 1 < step0 + n_steps else 1
                _occ_add(occ, x, occ_origin, occ_h, occ_shape, w)
        if not killed:
            s_end = step0 + n_steps
            while q < m and snap_steps[q] == s_end:
                for j in range(d):
                    snaps[q, i, j] = x[j]
                q += 1
        for j in range(d):
            final[i, j] = x[j]


@nb.njit(cache=True, nogil=True)
def _trajectory(alpha, dt, seed, path, n_steps, x0, kinds, offs, counts, fp, use_domain, states):
    d = x0.shape[0]
    scale = dt ** (1.0 / alpha)
    x = x0.copy()
    for j in range(d):
        states[0, j] = x[j]
    for s in range(n_steps):
        for j in range(d):
            x[j] = x[j] + scale * stable_variate(alpha, seed, path, j, s)
            states[s + 1, j] = x[j]
        if use_domain and not inside_point(x, kinds, offs, counts, fp):
            return s + 1
    return -1


_NO_DOMAIN = (np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(1))


# ---------------------------------------------------------------------------
# single paths
# ---------------------------------------------------------------------------

@dataclass
class PathSample:
    """One discretised trajectory.

    ``states[k]`` is the position at ``times[k]``; for a killed path the last
    state is the first one outside the domain.
    """

    times: np.ndarray
    states: np.ndarray
    killed: bool
    tau_lo: float | None
    tau_hi: float | None
    exit_point: np.ndarray | None
    pre_exit_point: np.ndarray | None = None

    @property
    def tau_hat(self) -> float | None:
        return None if not self.killed else 0.5 * (self.tau_lo + self.tau_hi)


def _check_start(domain, x0):
    if domain is not None and not domain.contains(np.asarray(x0, dtype=float)):
        raise StartOutsideDomain(f"start point {np.asarray(x0).tolist()} is not in the domain")


def simulate_path(params: AlphaParam, x0, cfg: SimConfig, path_index: int,
                  domain: Domain | None = None) -> PathSample:
    """Full trajectory of path ``path_index`` on ``[0, t_end]`` (stopped at the kill)."""
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (params.dim,):
        raise ValueError(f"x0 must have dimension {params.dim}")
    _check_start(domain, x0)
    n = cfg.n_steps
    states = np.empty((n + 1, params.dim))
    comp = domain.compiled if domain is not None else _NO_DOMAIN
    k = _trajectory(params.alpha, cfg.dt, cfg.seed, int(path_index), n, x0, *comp,
                    domain is not None, states)
    if k < 0:
        return PathSample(np.arange(n + 1) * cfg.dt, states, False, None, None, None)
    return PathSample(np.arange(k + 1) * cfg.dt, states[: k + 1].copy(), True,
                      (k - 1) * cfg.dt, k * cfg.dt, states[k].copy(), states[k - 1].copy())


# ---------------------------------------------------------------------------
# ensembles
# ---------------------------------------------------------------------------

@dataclass
class SimResult:
    """Per-path outcome of an ensemble run.

    ``kill_step[i] = k > 0`` means path ``i`` was first seen outside the
    domain at time ``k dt``; ``-1`` means it survived to ``n_steps``.
    ``snapshots[q, i]`` is the state at ``snapshot_steps[q]`` if the path was
    still alive then, NaN otherwise.  ``occupation`` counts half-steps.
    """

    alpha: float
    dt: float
    seed: int
    path0: int
    n_steps: int
    kill_step: np.ndarray
    final: np.ndarray
    exit_point: np.ndarray
    pre_exit_point: np.ndarray
    snapshot_steps: np.ndarray
    snapshots: np.ndarray
    mesh: Mesh | None = None
    occupation: np.ndarray | None = None
    extensions: int = 0

    @property
    def n_paths(self) -> int:
        return self.kill_step.shape[0]

    @property
    def killed(self) -> np.ndarray:
        return self.kill_step > 0

    def tau_hat(self) -> np.ndarray:
        """Exit-time midpoints; ``inf`` for paths alive at the horizon."""
        return np.where(self.killed, (self.kill_step - 0.5) * self.dt, np.inf)

    def alive_at(self, t: float) -> np.ndarray:
        k = steps_for(t, self.dt)
        if k > self.n_steps:
            raise ValueError("t beyond the simulated horizon")
        return ~self.killed | (self.kill_step > k)

    def snapshot(self, t: float) -> np.ndarray:
        k = steps_for(t, self.dt)
        hits = np.nonzero(self.snapshot_steps == k)[0]
        if hits.size == 0:
            raise KeyError(f"no snapshot recorded at t={t}")
        return self.snapshots[hits[0]]


def _resolve_workers(workers: int) -> int:
    if workers <= 0:
        return os.cpu_count() or 1
    return int(workers)


def simulate_paths(params: AlphaParam, x0, cfg: SimConfig, domain: Domain | None = None,
                   path0: int = 0, snapshot_times=(), mesh: Mesh | None = None) -> SimResult:
    """Run ``cfg.n_paths`` paths (indices ``path0 ..``) to ``cfg.t_end``.

    ``x0`` is one start point or an ``(n_paths, d)`` array of them.
    """
    n, d = cfg.n_paths, params.dim
    x0 = np.asarray(x0, dtype=float)
    starts = np.ascontiguousarray(np.broadcast_to(x0, (n, d)), dtype=float)
    if domain is not None:
        if domain.dim != d:
            raise ValueError("domain and process dimensions differ")
        uniq = x0.reshape(-1, d)
        if not np.all(domain.contains(uniq)):
            raise StartOutsideDomain("start point is not in the domain")
    snap_steps = np.array(sorted({steps_for(t, cfg.dt) for t in snapshot_times}), dtype=np.int64)
    if snap_steps.size and snap_steps[-1] > cfg.n_steps:
        raise ValueError("snapshot time beyond t_end")
    res = SimResult(
        params.alpha, cfg.dt, cfg.seed, path0, cfg.n_steps,
        kill_step=np.full(n, -1, dtype=np.int64),
        final=np.empty((n, d)),
        exit_point=np.full((n, d), np.nan),
        pre_exit_point=np.full((n, d), np.nan),
        snapshot_steps=snap_steps,
        snapshots=np.full((snap_steps.size, n, d), np.nan),
        mesh=mesh,
        occupation=None if mesh is None else np.zeros(int(np.prod(mesh.shape)), dtype=np.int64),
    )
    _advance(params, cfg, domain, res, starts, np.ones(n, dtype=np.bool_), 0, cfg.n_steps)
    return res


def _advance(params, cfg, domain, res, starts, alive, step0, n_steps):
    """Move the alive paths of ``res`` forward ``n_steps`` from ``step0``."""
    n, d = starts.shape
    comp = domain.compiled if domain is not None else _NO_DOMAIN
    use_occ = res.mesh is not None
    if use_occ:
        occ_origin = np.asarray(res.mesh.origin, dtype=float)
        occ_shape = np.asarray(res.mesh.shape, dtype=np.int64)
        occ_h = res.mesh.h
    else:
        occ_origin, occ_shape, occ_h = np.zeros(d), np.ones(d, dtype=np.int64), 1.0
    bounds = [(a, min(a + _CHUNK, n)) for a in range(0, n, _CHUNK)]
    partial = {}

    def work(ab):
        a, b = ab
        occ = np.zeros(res.occupation.size if use_occ else 1, dtype=np.int64)
        _run_paths(params.alpha, cfg.dt, cfg.seed, res.path0 + a, step0, n_steps,
                   starts[a:b], alive[a:b], *comp, domain is not None,
                   res.snapshot_steps, res.snapshots[:, a:b], res.kill_step[a:b],
                   res.exit_point[a:b], res.pre_exit_point[a:b], res.final[a:b],
                   occ_origin, occ_h, occ_shape, occ, use_occ)
        partial[a] = occ

    workers = _resolve_workers(cfg.workers)
    if workers == 1 or len(bounds) == 1:
        for ab in bounds:
            work(ab)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(work, bounds))
    if use_occ:
        for a, _ in bounds:  # fixed order; integer sums are exact anyway
            res.occupation += partial[a]


def extend(params: AlphaParam, cfg: SimConfig, domain: Domain, res: SimResult, extra_steps: int) -> None:
    """Continue the surviving paths of ``res`` by ``extra_steps`` grid steps.

    Counters continue from the current step, so the outcome equals a single
    longer run.
    """
    alive = np.ascontiguousarray(~res.killed)
    starts = np.ascontiguousarray(res.final)
    _advance(params, cfg, domain, res, starts, alive, res.n_steps, extra_steps)
    res.n_steps += extra_steps
    res.extensions += 1


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------

def survival_probability(domain: Domain, params: AlphaParam, x, t: float, cfg: SimConfig):
    """``P_x(tau_D > t)`` with its binomial standard error."""
    res = simulate_paths(params, x, replace(cfg, t_end=t), domain)
    s = float(np.mean(~res.killed))
    return s, math.sqrt(max(s * (1 - s), 0.0) / res.n_paths)


def run_until_exit(domain: Domain, params: AlphaParam, x, cfg: SimConfig, fraction: float = 0.999,
                   mesh: Mesh | None = None, snapshot_times=(), path0: int = 0) -> SimResult:
    """Simulate until ``fraction`` of the paths are killed, doubling the horizon.

    Raises :class:`TruncationBudgetExceeded` past ``cfg.max_t_end``
    (default ``1000 t_end``).
    """
    max_t = cfg.max_t_end if cfg.max_t_end is not None else 1000.0 * cfg.t_end
    max_steps = steps_for_floor(max_t, cfg.dt)
    res = simulate_paths(params, x, cfg, domain, path0=path0, mesh=mesh, snapshot_times=snapshot_times)
    while np.mean(res.killed) < fraction:
        extra = min(res.n_steps, max_steps - res.n_steps)
        if extra <= 0:
            raise TruncationBudgetExceeded(
                f"{np.mean(~res.killed):.4f} of paths still alive at t={res.n_steps * cfg.dt:g}")
        extend(params, cfg, domain, res, extra)
    return res


def steps_for_floor(t: float, dt: float) -> int:
    return int(math.floor(t / dt + 1e-9))


def mean_exit_time(domain: Domain, params: AlphaParam, x, cfg: SimConfig):
    """``E_x[tau_D]`` from interval midpoints (bias at most ``dt/2``) and its standard error.

    Survivors at the final horizon (at most 0.1%) are counted at the horizon.
    """
    res = run_until_exit(domain, params, x, cfg)
    tau = np.minimum(res.tau_hat(), res.n_steps * cfg.dt)
    return float(tau.mean()), float(tau.std(ddof=1) / math.sqrt(tau.size))


@dataclass
class ExitRecord:
    """Discrete exit law: first outside states and the states just before."""

    mesh: Mesh
    counts: np.ndarray
    n_paths: int
    n_exited: int
    exit_points: np.ndarray
    pre_exit_points: np.ndarray
    second_displacement_median: float
    dt: float

    @property
    def outside_mesh(self) -> int:
        return self.n_exited - int(self.counts.sum())


def exit_distribution(domain: Domain, params: AlphaParam, x, cfg: SimConfig, mesh: Mesh,
                      until_exit: bool = False) -> ExitRecord:
    """Histogram of exit points over ``mesh`` (paths killed by ``t_end``).

    The killing step of a cylindrical path moves one coordinate by a jump
    while the others only diffuse by ``O(dt**(1/alpha))``;
    ``second_displacement_median`` is the median of the second-largest
    coordinate displacement over the killing step.
    """
    res = run_until_exit(domain, params, x, cfg) if until_exit else simulate_paths(params, x, cfg, domain)
    k = res.killed
    ex, pre = res.exit_point[k], res.pre_exit_point[k]
    disp = np.sort(np.abs(ex - pre), axis=1)
    second = float(np.median(disp[:, -2])) if (ex.shape[1] > 1 and len(ex)) else 0.0
    return ExitRecord(mesh, mesh.histogram(ex), res.n_paths, int(k.sum()), ex, pre, second, cfg.dt)


@dataclass
class OccupationRecord:
    """Expected time spent per cell before exit, per path.

    ``mass[c]`` estimates ``E_x int_0^{tau_D ^ T} 1{X_s in c} ds``; divided by
    the cell volume it is a cell average of the Green function.
    """

    mesh: Mesh
    mass: np.ndarray
    n_paths: int
    horizon: float

    @property
    def green(self) -> np.ndarray:
        return self.mass / self.mesh.cell_volume

    @property
    def total_mass(self) -> float:
        return float(self.mass.sum())


def occupation_from(res: SimResult) -> OccupationRecord:
    mass = res.occupation.reshape(res.mesh.shape) * (0.5 * res.dt) / res.n_paths
    return OccupationRecord(res.mesh, mass, res.n_paths, res.n_steps * res.dt)


def occupation_green(domain: Domain, params: AlphaParam, x, cfg: SimConfig, mesh: Mesh,
                     until_exit: bool = True) -> OccupationRecord:
    """Occupation measure before ``tau_D`` (trapezoid rule in time)."""
    if until_exit:
        res = run_until_exit(domain, params, x, cfg, mesh=mesh)
    else:
        res = simulate_paths(params, x, cfg, domain, mesh=mesh)
    return occupation_from(res)


def levy_far_exit_rate(occupation: OccupationRecord, params: AlphaParam, radius: float) -> float:
    """Expected number of jumps landing outside ``B(0, radius)``, via the Levy system.

    Sums, over occupied cells ``z``, the time spent times the axis jump
    intensity ``sum_k int 1{|z + theta e_k| > radius} C_{1,alpha} |theta|^(-1-alpha) dtheta``.
    """
    a = params.alpha
    c1 = cd_alpha(AlphaParam(a, 1))
    z = occupation.mesh.centers().reshape(-1, params.dim)
    m = occupation.mass.ravel()
    keep = m > 0
    z, m = z[keep], m[keep]
    rate = np.zeros(len(z))
    r2 = np.sum(z * z, axis=1)
    for k in range(params.dim):
        rest = r2 - z[:, k] ** 2
        half = np.sqrt(np.maximum(radius * radius - rest, 0.0))
        up = np.maximum(half - z[:, k], 1e-300)
        down = np.maximum(half + z[:, k], 1e-300)
        rate += c1 / a * (up ** (-a) + down ** (-a))
    return float(np.sum(m * rate))


@dataclass
class RefinementStudy:
    """Estimates at successive step sizes with a Richardson-style trend."""

    dts: list
    estimates: list
    stderrs: list

    @property
    def richardson(self) -> float:
        """First-order extrapolation ``2 e(dt/2) - e(dt)`` from the two finest levels."""
        return 2.0 * self.estimates[-1] - self.estimates[-2]

    def to_rows(self, quantity: str) -> list:
        return [{"quantity": quantity, "dt": dt, "estimate": e, "stderr": s}
                for dt, e, s in zip(self.dts, self.estimates, self.stderrs)]


def refinement_study(estimator, cfg: SimConfig, levels: int = 3) -> RefinementStudy:
    """Run ``estimator(cfg)`` at ``dt, dt/2, dt/4, ..``; it returns ``(estimate, stderr)``."""
    dts, est, err = [], [], []
    for lev in range(levels):
        c = replace(cfg, dt=cfg.dt / 2**lev)
        e, s = estimator(c)
        dts.append(c.dt)
        est.append(e)
        err.append(s)
    return RefinementStudy(dts, est, err)
