"""Rook-move connectivity of grid-discretised domains and the swap-chain check.

Two points of ``D`` are rook-linked when a chain of points in ``D`` joins
them with consecutive points differing in a single coordinate; the segment
between them may leave ``D``.  On a grid this means every occupied cell is
linked to every other occupied cell on the same axis-parallel line, so the
union-find pass below unions whole lines rather than neighbours.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from .errors import (
    CombinatorialBudget,
    GridTooLarge,
    PointOutsideDomain,
    PreconditionViolated,
    SamplingExhausted,
)
from .geometry import Domain

DEFAULT_CELL_BUDGET = 50_000_000
MAX_PERMUTATION_DIM = 8


@nb.njit(cache=True)
def _find(parent, i):
    root = i
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:  # path compression
        nxt = parent[i]
        parent[i] = root
        i = nxt
    return root


@nb.njit(cache=True)
def _union_lines(occ, shape, strides, axis_order, line_orders):
    n = occ.shape[0]
    parent = np.arange(n)
    for a in range(axis_order.shape[0]):
        k = axis_order[a]
        step = strides[k]
        length = shape[k]
        bases = line_orders[k]
        for b in range(bases.shape[0]):
            base = bases[b]
            first = -1
            for j in range(length):
                f = base + j * step
                if occ[f]:
                    if first < 0:
                        first = f
                    else:
                        ra = _find(parent, first)
                        rb = _find(parent, f)
                        # the smaller index is kept as root, so roots are class minima
                        if ra < rb:
                            parent[rb] = ra
                        elif rb < ra:
                            parent[ra] = rb
    labels = np.full(n, -1, dtype=np.int64)
    for f in range(n):
        if occ[f]:
            labels[f] = _find(parent, f)
    return labels


def _line_bases(shape, strides, axis):
    idx = np.arange(int(np.prod(shape)), dtype=np.int64)
    return idx[(idx // strides[axis]) % shape[axis] == 0]


def label_rook_components(occupancy: np.ndarray, shuffle_seed: int | None = None) -> np.ndarray:
    """Rook-class labels of a boolean occupancy array (-1 where unoccupied).

    Each class is labelled by its smallest flat (C-order) index.  With
    ``shuffle_seed`` the axes and lines are processed in a random order,
    which must not change the result.
    """
    occ = np.ascontiguousarray(occupancy, dtype=np.bool_)
    shape = np.array(occ.shape, dtype=np.int64)
    strides = np.array([s // occ.itemsize for s in occ.strides], dtype=np.int64)
    axes = np.arange(occ.ndim, dtype=np.int64)
    orders = [_line_bases(shape, strides, k) for k in range(occ.ndim)]
    if shuffle_seed is not None:
        g = np.random.default_rng(shuffle_seed)
        axes = g.permutation(axes)
        orders = [g.permutation(o) for o in orders]
    labels = _union_lines(occ.ravel(), shape, strides, axes, nb.typed.List(orders))
    return labels.reshape(occ.shape)


def bfs_rook_partition(occupancy: np.ndarray) -> set:
    """Reference partition by breadth-first search on the rook graph.

    Quadratic in the line length and meant for checking
    :func:`label_rook_components` on small grids.  Returns a set of
    frozensets of flat indices.
    """
    occ = np.asarray(occupancy, dtype=bool)
    seen = np.zeros(occ.shape, dtype=bool)
    classes = set()
    for start in zip(*np.nonzero(occ)):
        if seen[start]:
            continue
        seen[start] = True
        members, queue = [], deque([start])
        while queue:
            cell = queue.popleft()
            members.append(int(np.ravel_multi_index(cell, occ.shape)))
            for k in range(occ.ndim):
                line = list(cell)
                for j in range(occ.shape[k]):
                    line[k] = j
                    q = tuple(line)
                    if occ[q] and not seen[q]:
                        seen[q] = True
                        queue.append(q)
        classes.add(frozenset(members))
    return classes


def label_partition(labels: np.ndarray) -> set:
    """Partition (set of frozensets of flat indices) encoded by a label array."""
    flat = np.asarray(labels).ravel()
    idx = np.nonzero(flat >= 0)[0]
    groups = {}
    for f, lab in zip(idx.tolist(), flat[idx].tolist()):
        groups.setdefault(lab, []).append(f)
    return {frozenset(v) for v in groups.values()}


@dataclass
class RookGrid:
    """Cell-centre occupancy of a domain and its rook-class labels."""

    domain: Domain
    h: float
    origin: np.ndarray
    occupancy: np.ndarray
    labels: np.ndarray
    n_components: int = field(init=False)

    def __post_init__(self):
        self.n_components = int(np.unique(self.labels[self.labels >= 0]).size)

    def cell_centers(self) -> np.ndarray:
        axes = [self.origin[k] + self.h * (np.arange(n) + 0.5) for k, n in enumerate(self.occupancy.shape)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def label_of(self, x) -> int:
        """Label of the occupied cell nearest to ``x``."""
        x = np.asarray(x, dtype=float)
        idx = np.floor((x - self.origin) / self.h).astype(np.int64)
        if np.all(idx >= 0) and np.all(idx < self.occupancy.shape) and self.occupancy[tuple(idx)]:
            return int(self.labels[tuple(idx)])
        occ = np.argwhere(self.occupancy)
        centers = self.origin + self.h * (occ + 0.5)
        j = int(np.argmin(np.sum((centers - x) ** 2, axis=1)))
        return int(self.labels[tuple(occ[j])])


def rook_components(domain: Domain, h: float | None = None,
                    budget: int = DEFAULT_CELL_BUDGET, shuffle_seed: int | None = None) -> RookGrid:
    """Rook-class decomposition of ``domain`` on a grid of spacing ``h``.

    ``h`` defaults to one eighth of the smallest primitive radius or
    half-width.  Raises :class:`GridTooLarge` past ``budget`` cells.
    """
    h = domain.default_spacing() if h is None else float(h)
    if h <= 0:
        raise ValueError("grid spacing must be positive")
    lo, hi = domain.bbox
    shape = np.maximum(np.ceil((hi - lo) / h).astype(np.int64), 1)
    n_cells = int(np.prod(shape.astype(float)))
    if n_cells > budget:
        raise GridTooLarge(f"{n_cells} cells at h={h:g} exceeds the budget of {budget}")
    axes = [lo[k] + h * (np.arange(n) + 0.5) for k, n in enumerate(shape)]
    centers = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, domain.dim)
    occ = (domain.sdf(centers) > 0).reshape(tuple(shape))
    labels = label_rook_components(occ, shuffle_seed)
    return RookGrid(domain, h, np.asarray(lo, dtype=float), occ, labels)


def same_class(grid: RookGrid, x, y) -> bool:
    """Whether ``x`` and ``y`` fall in the same rook class of ``grid``."""
    for p in (x, y):
        if not grid.domain.contains(np.asarray(p, dtype=float)):
            raise PointOutsideDomain(f"{list(p)} is not in the domain")
    return grid.label_of(x) == grid.label_of(y)


# ---------------------------------------------------------------------------
# swap chains
# ---------------------------------------------------------------------------

@dataclass
class SwapChainVerdict:
    holds: bool
    permutation: tuple | None
    failing_step: int | None = None  # first failing swap of the first permutation

    def __iter__(self):
        return iter((self.holds, self.permutation))


def swap_chain(x, y, permutation):
    """Points obtained from ``x`` by copying ``y``'s coordinates in the given order."""
    z = np.array(x, dtype=float)
    out = []
    for k in permutation:
        z = z.copy()
        z[k] = y[k]
        out.append(z)
    return out


def check_hgamma_pair(domain: Domain, gamma: float, x, y, r: float, tol: float = 1e-12) -> SwapChainVerdict:
    """Search the coordinate orders for a swap chain keeping ``B(z, gamma r)`` inside.

    Permutations are tried in lexicographic order and the first success is
    returned.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = x.shape[0]
    if d > MAX_PERMUTATION_DIM:
        raise CombinatorialBudget(f"{d}! permutations is beyond the enumeration budget")
    if not 0.0 < gamma <= 1.0:
        raise ValueError("gamma must lie in (0, 1]")
    clearance = min(domain.sdf(x), domain.sdf(y))
    if r <= 0 or clearance < r - tol:
        raise PreconditionViolated(f"clearance {clearance:.6g} is below r={r:.6g}")
    radius = gamma * r
    failing = None
    for perm in itertools.permutations(range(d)):
        for step, z in enumerate(swap_chain(x, y, perm)):
            if domain.sdf(z) < radius - tol and not domain.ball_inside(z, radius):
                if failing is None:
                    failing = step
                break
        else:
            return SwapChainVerdict(True, perm)
    return SwapChainVerdict(False, None, failing)


@dataclass
class ConnectivityReport:
    n_components: int
    condition_1_13: bool
    hgamma_gamma: float
    hgamma_holds: bool
    counterexample: dict | None
    h: float
    pairs_tested: int

    def to_dict(self) -> dict:
        return {
            "n_components": self.n_components,
            "irreducible": self.condition_1_13,
            "gamma": self.hgamma_gamma,
            "hgamma_holds": self.hgamma_holds,
            "counterexample": self.counterexample,
            "h": self.h,
            "pairs_tested": self.pairs_tested,
        }


def sample_interior(domain: Domain, n: int, rng: np.random.Generator, max_batches: int = 200) -> np.ndarray:
    """``n`` uniform points of ``domain`` by rejection from its bounding box."""
    lo, hi = domain.bbox
    found = []
    total = 0
    for _ in range(max_batches):
        cand = rng.uniform(lo, hi, size=(max(4 * n, 1024), domain.dim))
        keep = cand[domain.sdf(cand) > 0]
        found.append(keep)
        total += len(keep)
        if total >= n:
            return np.concatenate(found)[:n]
    raise SamplingExhausted(f"only {total} of {n} interior points found")


def check_hgamma_domain(domain: Domain, gamma: float, n_pairs: int, seed=0, h: float | None = None) -> ConnectivityReport:
    """Empirical (H_gamma) check on random interior pairs, plus the rook verdict.

    Only falsification is conclusive: ``hgamma_holds`` is True when no
    counterexample turned up among ``n_pairs`` samples.
    """
    if n_pairs < 1:
        raise ValueError("n_pairs must be at least 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    grid = rook_components(domain, h)
    pts = sample_interior(domain, 2 * n_pairs, rng)
    clear = domain.sdf(pts)
    counter = None
    tested = 0
    for i in range(n_pairs):
        x, y = pts[2 * i], pts[2 * i + 1]
        r = float(min(clear[2 * i], clear[2 * i + 1]))
        tested += 1
        verdict = check_hgamma_pair(domain, gamma, x, y, r)
        if not verdict.holds:
            counter = {"x": x.tolist(), "y": y.tolist(), "r": r,
                       "failing_swap": verdict.failing_step}
            break
    return ConnectivityReport(grid.n_components, grid.n_components == 1, float(gamma),
                              counter is None, counter, grid.h, tested)
