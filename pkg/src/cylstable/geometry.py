"""Signed-distance domains.

A :class:`Domain` is an open set described by primitives (balls, rounded
boxes, rotated rounded boxes, polygons with filleted corners) combined by
union.  The signed distance is positive inside and, when ``exact_sdf`` is
set, equals ``dist(x, D^c)`` for interior points.

Primitives are compiled into flat arrays so that numba kernels (the path
simulator, the rook grid) can evaluate membership without Python calls;
:func:`sdf_point` and :func:`inside_point` are those kernels.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numba as nb
import numpy as np

from .errors import UnknownDomain

BALL, ROUNDED_BOX, ROTATED_BOX, ROUNDED_POLYGON = 0, 1, 2, 3
_KIND_CODES = {"ball": BALL, "rounded_box": ROUNDED_BOX,
               "rotated_rounded_box": ROTATED_BOX, "rounded_polygon": ROUNDED_POLYGON}
_POLY_STRIDE = 9  # Vx Vy Tin_x Tin_y Tout_x Tout_y Cx Cy unused


# ---------------------------------------------------------------------------
# numba evaluators
# ---------------------------------------------------------------------------

@nb.njit(cache=True, nogil=True, inline="always")
def _rbox_sdf(q0, q1, h0, h1, rho):
    # IQ rounded-box distance (negative inside), returned with our sign
    a0 = abs(q0) - (h0 - rho)
    a1 = abs(q1) - (h1 - rho)
    o0 = max(a0, 0.0)
    o1 = max(a1, 0.0)
    dist = math.sqrt(o0 * o0 + o1 * o1) + min(max(a0, a1), 0.0) - rho
    return -dist


@nb.njit(cache=True, nogil=True)
def _ball_sdf(x, fp, off, d):
    s = 0.0
    for k in range(d):
        z = x[k] - fp[off + k]
        s += z * z
    return fp[off + d] - math.sqrt(s)


@nb.njit(cache=True, nogil=True)
def _box_sdf(x, fp, off, d):
    rho = fp[off + 2 * d]
    outside = 0.0
    inner = -np.inf
    for k in range(d):
        a = abs(x[k] - fp[off + k]) - (fp[off + d + k] - rho)
        if a > 0.0:
            outside += a * a
        if a > inner:
            inner = a
    return -(math.sqrt(outside) + min(inner, 0.0) - rho)


@nb.njit(cache=True, nogil=True)
def _rot_sdf(x, fp, off):
    px = x[0] - fp[off]
    py = x[1] - fp[off + 1]
    c = fp[off + 5]
    s = fp[off + 6]
    q0 = c * px + s * py
    q1 = -s * px + c * py
    return _rbox_sdf(q0, q1, fp[off + 2], fp[off + 3], fp[off + 4])


@nb.njit(cache=True, nogil=True, inline="always")
def _cross(ax, ay, bx, by):
    return ax * by - ay * bx


@nb.njit(cache=True, nogil=True)
def _in_kite(px, py, fp, b):
    # quadrilateral V, Tin, C, Tout (convex); orientation-agnostic test
    vx, vy = fp[b], fp[b + 1]
    ix, iy = fp[b + 2], fp[b + 3]
    ox, oy = fp[b + 4], fp[b + 5]
    cx, cy = fp[b + 6], fp[b + 7]
    c1 = _cross(ix - vx, iy - vy, px - vx, py - vy)
    c2 = _cross(cx - ix, cy - iy, px - ix, py - iy)
    c3 = _cross(ox - cx, oy - cy, px - cx, py - cy)
    c4 = _cross(vx - ox, vy - oy, px - ox, py - oy)
    if (c1 >= 0 and c2 >= 0 and c3 >= 0 and c4 >= 0) or (c1 <= 0 and c2 <= 0 and c3 <= 0 and c4 <= 0):
        dx = px - cx
        dy = py - cy
        rho = fp[b + 8]
        return dx * dx + dy * dy > rho * rho
    return False


@nb.njit(cache=True, nogil=True)
def _poly_inside(px, py, fp, off, n):
    inside = False
    j = n - 1
    for i in range(n):
        bi = off + _POLY_STRIDE * i
        bj = off + _POLY_STRIDE * j
        xi, yi = fp[bi], fp[bi + 1]
        xj, yj = fp[bj], fp[bj + 1]
        if (yi > py) != (yj > py):
            xc = xj + (py - yj) * (xi - xj) / (yi - yj)
            if px < xc:
                inside = not inside
        j = i
    for i in range(n):
        if _in_kite(px, py, fp, off + _POLY_STRIDE * i):
            # convex corner: region cut away; concave corner: region filled in
            return not inside
    return inside


@nb.njit(cache=True, nogil=True)
def _poly_sdf(x, fp, off, n):
    px, py = x[0], x[1]
    best = np.inf
    for i in range(n):
        b = off + _POLY_STRIDE * i
        bn = off + _POLY_STRIDE * ((i + 1) % n)
        # trimmed edge Tout_i -> Tin_{i+1}
        ax, ay = fp[b + 4], fp[b + 5]
        ex, ey = fp[bn + 2] - ax, fp[bn + 3] - ay
        ll = ex * ex + ey * ey
        s = ((px - ax) * ex + (py - ay) * ey) / ll if ll > 0 else 0.0
        s = min(max(s, 0.0), 1.0)
        dx = px - ax - s * ex
        dy = py - ay - s * ey
        dd = math.sqrt(dx * dx + dy * dy)
        if dd < best:
            best = dd
        # fillet arc around C_i between Tin_i and Tout_i
        cx, cy = fp[b + 6], fp[b + 7]
        ux, uy = fp[b + 2] - cx, fp[b + 3] - cy
        vx, vy = fp[b + 4] - cx, fp[b + 5] - cy
        wx, wy = px - cx, py - cy
        ref = _cross(ux, uy, vx, vy)
        if _cross(ux, uy, wx, wy) * ref >= 0 and _cross(wx, wy, vx, vy) * ref >= 0:
            dd = abs(math.sqrt(wx * wx + wy * wy) - fp[b + 8])
            if dd < best:
                best = dd
    return best if _poly_inside(px, py, fp, off, n) else -best


@nb.njit(cache=True, nogil=True)
def sdf_point(x, kinds, offs, counts, fp):
    """Signed distance of one point (max over union members)."""
    d = x.shape[0]
    best = -np.inf
    for m in range(kinds.shape[0]):
        k = kinds[m]
        if k == BALL:
            v = _ball_sdf(x, fp, offs[m], d)
        elif k == ROUNDED_BOX:
            v = _box_sdf(x, fp, offs[m], d)
        elif k == ROTATED_BOX:
            v = _rot_sdf(x, fp, offs[m])
        else:
            v = _poly_sdf(x, fp, offs[m], counts[m])
        if v > best:
            best = v
    return best


@nb.njit(cache=True, nogil=True)
def inside_point(x, kinds, offs, counts, fp):
    """``sdf_point(x) > 0`` with a cheaper path for polygons."""
    d = x.shape[0]
    for m in range(kinds.shape[0]):
        k = kinds[m]
        if k == ROUNDED_POLYGON:
            if _poly_inside(x[0], x[1], fp, offs[m], counts[m]):
                # boundary points are excluded by the exact distance
                if _poly_sdf(x, fp, offs[m], counts[m]) > 0.0:
                    return True
        else:
            if k == BALL:
                v = _ball_sdf(x, fp, offs[m], d)
            elif k == ROUNDED_BOX:
                v = _box_sdf(x, fp, offs[m], d)
            else:
                v = _rot_sdf(x, fp, offs[m])
            if v > 0.0:
                return True
    return False


@nb.njit(cache=True, nogil=True)
def _sdf_batch(pts, kinds, offs, counts, fp, out):
    for i in range(pts.shape[0]):
        out[i] = sdf_point(pts[i], kinds, offs, counts, fp)


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------

def _fillet_table(vertices: np.ndarray, rho: float) -> np.ndarray:
    """Per-corner tangent points and fillet centers for a simple polygon."""
    v = np.asarray(vertices, dtype=float)
    n = len(v)
    area2 = np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1])
    if area2 < 0:  # orient counter-clockwise
        v = v[::-1]
    rows = np.zeros((n, _POLY_STRIDE))
    tangent = np.zeros(n)
    for i in range(n):
        p, c, q = v[i - 1], v[i], v[(i + 1) % n]
        a = (p - c) / np.linalg.norm(p - c)
        b = (q - c) / np.linalg.norm(q - c)
        cosang = np.clip(a @ b, -1.0, 1.0)
        ang = math.acos(cosang)  # angle of the wedge smaller than pi
        if abs(math.pi - ang) < 1e-12:
            raise ValueError(f"collinear polygon vertex at {c.tolist()}")
        t = rho / math.tan(ang / 2.0)
        bis = (a + b) / np.linalg.norm(a + b)
        center = c + bis * (rho / math.sin(ang / 2.0))
        rows[i, :] = [c[0], c[1], *(c + a * t), *(c + b * t), *center, rho]
        tangent[i] = t
    edges = np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1)
    if np.any(tangent + np.roll(tangent, -1) > edges + 1e-12):
        raise ValueError("corner radius too large for the polygon edges")
    return rows


@dataclass(frozen=True)
class Primitive:
    """One union member: ``kind`` plus its JSON parameters."""

    kind: str
    params: dict

    def __post_init__(self):
        if self.kind not in _KIND_CODES:
            raise ValueError(f"unknown primitive kind {self.kind!r}")
        p = self.params
        if self.kind in ("rounded_box", "rotated_rounded_box"):
            half = np.asarray(p["half_widths"], dtype=float)
            if not 0.0 < p["rho"] < half.min():
                raise ValueError("corner radius must lie in (0, min half-width)")
        if self.kind == "ball" and p["radius"] <= 0:
            raise ValueError("ball radius must be positive")
        if self.kind == "rounded_polygon" and p["rho"] <= 0:
            raise ValueError("corner radius must be positive")

    @property
    def dim(self) -> int:
        if self.kind in ("rotated_rounded_box", "rounded_polygon"):
            return 2
        return len(self.params["center"])

    def flat(self) -> tuple[int, np.ndarray]:
        p = self.params
        if self.kind == "ball":
            return 0, np.array([*p["center"], p["radius"]], dtype=float)
        if self.kind == "rounded_box":
            return 0, np.array([*p["center"], *p["half_widths"], p["rho"]], dtype=float)
        if self.kind == "rotated_rounded_box":
            th = p["angle"]
            return 0, np.array([*p["center"], *p["half_widths"], p["rho"],
                                math.cos(th), math.sin(th)], dtype=float)
        verts = np.asarray(p["vertices"], dtype=float)
        return len(verts), _fillet_table(verts, p["rho"]).ravel()

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        p = self.params
        if self.kind == "ball":
            c = np.asarray(p["center"], dtype=float)
            return c - p["radius"], c + p["radius"]
        if self.kind == "rounded_box":
            c = np.asarray(p["center"], dtype=float)
            h = np.asarray(p["half_widths"], dtype=float)
            return c - h, c + h
        if self.kind == "rotated_rounded_box":
            c = np.asarray(p["center"], dtype=float)
            h = np.asarray(p["half_widths"], dtype=float) - p["rho"]
            cs, sn = abs(math.cos(p["angle"])), abs(math.sin(p["angle"]))
            ext = np.array([cs * h[0] + sn * h[1], sn * h[0] + cs * h[1]]) + p["rho"]
            return c - ext, c + ext
        v = np.asarray(p["vertices"], dtype=float)
        return v.min(axis=0), v.max(axis=0)

    def feature_size(self) -> float:
        p = self.params
        if self.kind == "ball":
            return float(p["radius"])
        if self.kind in ("rounded_box", "rotated_rounded_box"):
            return float(min(p["half_widths"]))
        v = np.asarray(p["vertices"], dtype=float)
        return 0.5 * float(np.min(np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1)))

    def c11_radius(self) -> float:
        p = self.params
        if self.kind == "ball":
            return float(p["radius"])
        if self.kind in ("rounded_box", "rotated_rounded_box"):
            return float(p["rho"])
        v = np.asarray(p["vertices"], dtype=float)
        n = len(v)
        gap = np.inf
        for i in range(n):
            for j in range(i + 2, n):
                if i == 0 and j == n - 1:
                    continue
                gap = min(gap, _segment_distance(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]))
        return float(min(p["rho"], 0.5 * gap))

    def scaled(self, lam: float) -> "Primitive":
        p = dict(self.params)
        for key in ("center", "half_widths", "vertices"):
            if key in p:
                p[key] = (np.asarray(p[key], dtype=float) * lam).tolist()
        for key in ("radius", "rho"):
            if key in p:
                p[key] = float(p[key]) * lam
        return Primitive(self.kind, p)


def _segment_distance(a, b, c, e):
    def point_seg(p, s0, s1):
        d = s1 - s0
        s = np.clip((p - s0) @ d / (d @ d), 0.0, 1.0)
        return float(np.linalg.norm(p - s0 - s * d))

    return min(point_seg(a, c, e), point_seg(b, c, e), point_seg(c, a, b), point_seg(e, a, b))


def _closures_disjoint(p: Primitive, q: Primitive) -> bool | None:
    """True if provably disjoint, False if provably intersecting, None if unknown."""
    if p.kind == q.kind == "ball":
        gap = np.linalg.norm(np.subtract(p.params["center"], q.params["center"]))
        return bool(gap > p.params["radius"] + q.params["radius"])
    lo1, hi1 = p.bbox()
    lo2, hi2 = q.bbox()
    if np.any(hi1 < lo2) or np.any(hi2 < lo1):
        return True
    return None


# ---------------------------------------------------------------------------
# Domain
# ---------------------------------------------------------------------------

@dataclass
class Domain:
    """Open set given as a union of primitives.

    Attributes
    ----------
    components : union members
    exact_sdf : whether :meth:`sdf` is the exact interior distance
    c11_radius, c11_lambda : uniform interior/exterior ball radius ``R`` and
        Lipschitz constant ``Lambda`` of the boundary description
    marked : named points of interest (catalog domains only)
    """

    components: tuple
    name: str = "custom"
    marked: dict = field(default_factory=dict)

    def __post_init__(self):
        self.components = tuple(self.components)
        if not self.components:
            raise ValueError("a domain needs at least one primitive")
        dims = {c.dim for c in self.components}
        if len(dims) != 1:
            raise ValueError("all primitives must share one dimension")
        self.dim = dims.pop()
        kinds, offs, counts, chunks, pos = [], [], [], [], 0
        for c in self.components:
            count, flat = c.flat()
            kinds.append(_KIND_CODES[c.kind])
            offs.append(pos)
            counts.append(count)
            chunks.append(flat)
            pos += len(flat)
        self.compiled = (np.array(kinds, dtype=np.int64), np.array(offs, dtype=np.int64),
                         np.array(counts, dtype=np.int64), np.concatenate(chunks))
        boxes = [c.bbox() for c in self.components]
        self.bbox = (np.min([b[0] for b in boxes], axis=0), np.max([b[1] for b in boxes], axis=0))
        self._analyse_union()

    def _analyse_union(self):
        n = len(self.components)
        parent = list(range(n))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        exact = True
        gap = np.inf
        for i in range(n):
            for j in range(i + 1, n):
                verdict = _closures_disjoint(self.components[i], self.components[j])
                if verdict is not True:
                    exact = False
                    parent[find(i)] = find(j)
                else:
                    gap = min(gap, self._member_gap(i, j))
        self.exact_sdf = exact
        self.n_components = len({find(i) for i in range(n)})
        radius = min(c.c11_radius() for c in self.components)
        if np.isfinite(gap):
            radius = min(radius, 0.5 * gap)
        self.c11_radius = float(min(radius, 1.0)) if exact else None
        self.c11_lambda = float(max(1.0 / self.c11_radius, 1.0)) if exact else None

    def _member_gap(self, i, j):
        p, q = self.components[i], self.components[j]
        if p.kind == q.kind == "ball":
            return float(np.linalg.norm(np.subtract(p.params["center"], q.params["center"]))
                         - p.params["radius"] - q.params["radius"])
        lo1, hi1 = p.bbox()
        lo2, hi2 = q.bbox()
        sep = np.maximum(lo2 - hi1, lo1 - hi2)
        return float(np.linalg.norm(np.maximum(sep, 0.0)))

    # -- queries -------------------------------------------------------------

    def sdf(self, x):
        """Signed distance, positive inside; ``x`` has shape ``(d,)`` or ``(n, d)``."""
        pts = np.asarray(x, dtype=float)
        single = pts.ndim == 1
        pts = np.ascontiguousarray(np.atleast_2d(pts))
        if pts.shape[1] != self.dim:
            raise ValueError(f"points must have dimension {self.dim}")
        out = np.empty(pts.shape[0])
        _sdf_batch(pts, *self.compiled, out)
        return float(out[0]) if single else out

    def contains(self, x):
        s = self.sdf(x)
        return bool(s > 0) if np.ndim(s) == 0 else s > 0

    def ball_inside(self, center, radius: float) -> bool:
        """Whether ``B(center, radius)`` lies in the domain.

        Exact for ``exact_sdf`` domains.  Otherwise a positive answer from the
        distance lower bound is trusted and a negative one is re-examined on
        256 boundary samples of the ball (a one-sided check).
        """
        if radius <= 0:
            raise ValueError("radius must be positive")
        s = self.sdf(np.asarray(center, dtype=float))
        if s >= radius:
            return True
        if self.exact_sdf or s <= 0:
            return False
        pts = np.asarray(center, dtype=float) + radius * _sphere_samples(self.dim, 256)
        return bool(np.all(self.sdf(pts) > 0))

    @property
    def diameter_bound(self) -> float:
        return float(np.linalg.norm(self.bbox[1] - self.bbox[0]))

    @property
    def min_feature(self) -> float:
        return min(c.feature_size() for c in self.components)

    def default_spacing(self) -> float:
        return self.min_feature / 8.0

    def scaled(self, lam: float) -> "Domain":
        marked = {k: (np.asarray(v, dtype=float) * lam).tolist() for k, v in self.marked.items()}
        return Domain(tuple(c.scaled(lam) for c in self.components), self.name, marked)

    # -- serialisation -------------------------------------------------------

    def to_dict(self) -> dict:
        children = [{"kind": c.kind, "params": c.params, "children": []} for c in self.components]
        if len(children) == 1:
            return children[0]
        return {"kind": "union", "params": {}, "children": children}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, desc: dict, name: str = "custom") -> "Domain":
        return cls(tuple(_flatten(desc)), name)

    @classmethod
    def from_json(cls, text: str, name: str = "custom") -> "Domain":
        return cls.from_dict(json.loads(text), name)


def _flatten(desc: dict):
    kind = desc.get("kind")
    if kind == "union":
        for child in desc.get("children", []):
            yield from _flatten(child)
    else:
        yield Primitive(kind, dict(desc.get("params", {})))


def _sphere_samples(d: int, n: int) -> np.ndarray:
    if d == 1:
        return np.array([[-1.0], [1.0]])
    if d == 2:
        th = 2.0 * np.pi * np.arange(n) / n
        return np.column_stack([np.cos(th), np.sin(th)])
    g = np.random.default_rng(0).normal(size=(n, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


# module-level spellings of the queries
def signed_distance(domain: Domain, x):
    return domain.sdf(x)


def contains(domain: Domain, x):
    return domain.contains(x)


def ball_inside(domain: Domain, center, radius: float) -> bool:
    return domain.ball_inside(center, radius)


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------

def _ball(c, r):
    return Primitive("ball", {"center": list(map(float, c)), "radius": float(r)})


def _rbox(c, h, rho):
    return Primitive("rounded_box", {"center": list(map(float, c)),
                                     "half_widths": [float(h)] * len(c), "rho": float(rho)})


# Channel of width 2 winding around a 6x6 block: bottom strip, left column,
# top strip, right column.  The marked points sit at opposite ends; a rook
# path needs three axis-parallel moves to connect them.
_CHANNEL = [(1, -1), (-5, -1), (-5, 9), (5, 9), (5, 3), (3, 3), (3, 7), (-3, 7), (-3, 1), (1, 1)]


def _catalog():
    s2 = math.sqrt(2.0)
    return {
        "disc": ([_ball((0, 0), 1)], {"center": [0.0, 0.0]}),
        "parallel_balls": ([_ball((-1.3, 1.1), 1), _ball((1.3, 1.1), 1)],
                           {"x": [-1.3, 1.1], "y": [1.3, 1.1]}),
        "rounded_square": ([_rbox((0, 0), 1, 0.25)], {"center": [0.0, 0.0]}),
        "four_squares": ([_rbox(c, 1, 0.25) for c in ((0, 0), (3, 0), (3, 3), (6, 3))],
                         {"x": [0.0, 0.0], "y": [6.0, 3.0]}),
        "nested_channel_6_1": ([Primitive("rounded_polygon",
                                          {"vertices": [list(map(float, v)) for v in _CHANNEL],
                                           "rho": 0.25})],
                               {"x": [0.0, 0.0], "y": [4.0, 4.0]}),
        "tilted_rect_6_2": ([Primitive("rotated_rounded_box",
                                       {"center": [0.0, 0.0], "half_widths": [6.0 * s2, 2.0],
                                        "rho": 0.5, "angle": math.pi / 4})],
                            {"x": [-4.0, -4.0], "y": [4.0, 4.0]}),
        "diagonal_balls_6_3": ([_ball((-1.1, -1.1), 1), _ball((1.1, 1.1), 1)],
                               {"x": [-1.1, -1.1], "y": [1.1, 1.1]}),
    }


CATALOG_NAMES = tuple(_catalog())


def paper_domain(name: str, scale: float = 1.0) -> Domain:
    """Catalog domain ``name`` scaled by ``scale``.

    ``disc``                 B(0, 1)
    ``parallel_balls``       B((-1.3, 1.1), 1) u B((1.3, 1.1), 1)
    ``rounded_square``       [-1, 1]^2 with corner radius 1/4
    ``four_squares``         squares of half-width 1 centred at (0,0), (3,0), (3,3), (6,3)
    ``nested_channel_6_1``   width-2 channel polygon, corner radius 1/4
    ``tilted_rect_6_2``      45-degree rectangle, half-sizes 6*sqrt(2) x 2, corner radius 1/2
    ``diagonal_balls_6_3``   B((-1.1,-1.1), 1) u B((1.1, 1.1), 1)
    """
    cat = _catalog()
    if name not in cat:
        raise UnknownDomain(name)
    prims, marked = cat[name]
    dom = Domain(tuple(prims), name, marked)
    return dom if scale == 1.0 else dom.scaled(float(scale))


def load_domain(spec: str, scale: float = 1.0) -> Domain:
    """Catalog id or path to a JSON descriptor ``{kind, params, children}``."""
    if spec in CATALOG_NAMES:
        return paper_domain(spec, scale)
    path = Path(spec)
    if path.suffix == ".json" or path.exists():
        if not path.exists():
            raise UnknownDomain(spec)
        dom = Domain.from_json(path.read_text(), path.stem)
        return dom if scale == 1.0 else dom.scaled(scale)
    raise UnknownDomain(spec)


def ball_domain(radius: float = 1.0, dim: int = 2, center=None) -> Domain:
    c = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
    return Domain((_ball(c, radius),), f"ball_r{radius:g}")
