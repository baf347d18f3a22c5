"""Fractional Laplacian of one-sided power functions and of hyperplane distances.

For ``w_p(x) = max(x, 0)**p`` with ``0 < p < alpha`` one has
``Delta^{alpha/2} w_p(x) = C(p, alpha) x**(p - alpha)`` for ``x > 0`` with

    C(p, alpha) = p C_{1,alpha} / alpha
                  * int_0^inf t**(-alpha) (1+t)**(p-1) (1 - (1+t)**(alpha-2p)) dt.

``C`` is positive for ``p > alpha/2``, zero at ``alpha/2`` and negative below.
Two quadratures are provided: the reduced integral above (used for values)
and the second-difference principal-value form (used for cross-checks).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import binom

from .errors import PointBelowHyperplane, QuadratureNonConvergence
from .stable_core import AlphaParam, cd_alpha

_EPSABS = 1e-14
_EPSREL = 1e-12


def _check(p, alpha):
    if not 0.0 < alpha < 2.0:
        raise ValueError("alpha must lie in (0, 2)")
    if not 0.0 < p < alpha:
        raise ValueError("p must lie in (0, alpha)")


def _quad(f, a, b, wvar, label):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(f, a, b, weight="alg", wvar=wvar,
                                      epsabs=_EPSABS, epsrel=_EPSREL, limit=200)
        except integrate.IntegrationWarning as exc:
            raise QuadratureNonConvergence(f"{label}: {exc}") from None
    return val, err


def _accept(value, err, label):
    # absolute 1e-8 for values up to 1, relative 1e-8 beyond
    if err > 1e-8 * max(1.0, abs(value)):
        raise QuadratureNonConvergence(f"{label}: error estimate {err:.2e}")


def _reduced_integral(p, alpha):
    """``int_0^inf t^-a (1+t)^(p-1) (1 - (1+t)^(a-2p)) dt`` after ``u = t/(1+t)``.

    The transformed integrand ``u^-a [(1-u)^(a-p-1) - (1-u)^(p-1)]`` has
    algebraic end-point singularities only, which the weighted QUADPACK rule
    integrates directly; no cutoff is needed at either end.
    """
    q = 2.0 * p - alpha

    def head(u):  # u**(alpha-1) * integrand on [0, 1/2]; smooth
        if u == 0.0:
            return q
        return (1.0 - u) ** (alpha - p - 1.0) * -math.expm1(q * math.log1p(-u)) / u

    v0, e0 = _quad(head, 0.0, 0.5, (1.0 - alpha, 0.0), "reduced integral near 0")
    g = lambda u: u ** (-alpha)
    v1, e1 = _quad(g, 0.5, 1.0, (0.0, alpha - p - 1.0), "reduced integral near 1")
    v2, e2 = _quad(g, 0.5, 1.0, (0.0, p - 1.0), "reduced integral near 1")
    return v0 + (v1 - v2), e0 + e1 + e2


def ctest_constant(p: float, alpha: float) -> float:
    """``C(p, alpha) = (Delta^{alpha/2} w_p)(1)``."""
    _check(p, alpha)
    val, err = _reduced_integral(p, alpha)
    scale = p * cd_alpha(AlphaParam(alpha, 1)) / alpha
    _accept(scale * val, scale * err, "ctest_constant")
    return scale * val


def ctest_constant_pv(p: float, alpha: float) -> float:
    """``C(p, alpha)`` from the principal-value second-difference integral

    ``C_{1,alpha} int_0^inf (w_p(1+s) + w_p(1-s) - 2) s**(-1-alpha) ds``.
    Independent of the reduced form; used to cross-check it.
    """
    _check(p, alpha)
    k = np.arange(1, 40)
    coef = 2.0 * binom(p, 2 * k)

    def near(s):  # ((1+s)^p + (1-s)^p - 2) / s^2 by its even power series
        return float(np.sum(coef * s ** (2 * k - 2)))

    i1, e1 = _quad(near, 0.0, 0.5, (1.0 - alpha, 0.0), "pv near 0")
    smooth = lambda s: ((1.0 + s) ** p - 2.0) * s ** (-1.0 - alpha)
    i2, e2 = integrate.quad(smooth, 0.5, 1.0, epsabs=_EPSABS, epsrel=_EPSREL)
    i3, e3 = _quad(lambda s: s ** (-1.0 - alpha), 0.5, 1.0, (0.0, p), "pv kink at 1")
    # s > 1 via s = 1/v: int_0^1 (1+v)^p v^(alpha-p-1) dv - 2/alpha
    i4, e4 = _quad(lambda v: (1.0 + v) ** p, 0.0, 1.0, (alpha - p - 1.0, 0.0), "pv tail")
    total = i1 + i2 + i3 + i4 - 2.0 / alpha
    c1 = cd_alpha(AlphaParam(alpha, 1))
    _accept(c1 * total, c1 * (e1 + e2 + e3 + e4), "ctest_constant_pv")
    return c1 * total


def frac_lap_power(p: float, alpha: float, x: float) -> float:
    """``(Delta^{alpha/2} w_p)(x) = C(p, alpha) x**(p - alpha)`` for ``x > 0``."""
    if x <= 0:
        raise ValueError("x must be positive")
    return ctest_constant(p, alpha) * x ** (p - alpha)


def frac_lap_power_pv(p: float, alpha: float, x: float) -> float:
    """Second-difference quadrature at ``x``, via ``s = x sigma``."""
    if x <= 0:
        raise ValueError("x must be positive")
    return ctest_constant_pv(p, alpha) * x ** (p - alpha)


def find_sign_change(alpha: float, tol: float = 1e-10) -> float:
    """Zero of ``p -> C(p, alpha)`` on ``(0, alpha)`` by bisection."""
    lo, hi = 0.05 * alpha, 0.95 * alpha
    f_lo = ctest_constant(lo, alpha)
    if f_lo * ctest_constant(hi, alpha) > 0:
        raise ValueError("no sign change bracketed")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        f_mid = ctest_constant(mid, alpha)
        if f_mid == 0.0:
            return mid
        if (f_mid < 0) == (f_lo < 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# hyperplanes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Hyperplane:
    """``Phi(x) = <a, x - x0>``; ``delta(x) = Phi(x)/|a|`` above the plane."""

    normal: tuple
    base: tuple

    def __post_init__(self):
        a = np.asarray(self.normal, dtype=float)
        if a.ndim != 1 or not np.linalg.norm(a) > 0:
            raise ValueError("normal must be a nonzero vector")
        if np.shape(self.base) != a.shape:
            raise ValueError("base and normal must have the same dimension")

    def phi(self, x) -> float:
        return float(np.dot(self.normal, np.asarray(x, dtype=float) - np.asarray(self.base, dtype=float)))

    def distance(self, x) -> float:
        return self.phi(x) / float(np.linalg.norm(self.normal))


def coordinate_terms(h: Hyperplane, p: float, alpha: float, x) -> np.ndarray:
    """Per-axis fractional Laplacians of ``delta^p`` (one 1-D problem each).

    Along axis ``k`` the function ``delta^p`` is ``(|a_k|/|a|)^p`` times a
    one-sided power of the distance ``Phi/|a_k|`` to the plane along that
    axis; axes with ``a_k = 0`` see a constant and contribute nothing.
    """
    phi = h.phi(x)
    if phi <= 0:
        raise PointBelowHyperplane(f"Phi(x) = {phi:.6g} <= 0")
    a = np.abs(np.asarray(h.normal, dtype=float))
    norm = float(np.linalg.norm(a))
    out = np.zeros(a.shape)
    for k, ak in enumerate(a):
        if ak > 0:
            out[k] = (ak / norm) ** p * frac_lap_power(p, alpha, phi / ak)
    return out


def cyl_op_hyperplane(h: Hyperplane, p: float, alpha: float, x) -> float:
    """Cylindrical operator applied to ``delta_Pi^p`` at ``x`` above the plane:

    ``C(p, alpha) Phi(x)**(p-alpha) |a|**(-p) sum_k |a_k|**alpha``.
    """
    phi = h.phi(x)
    if phi <= 0:
        raise PointBelowHyperplane(f"Phi(x) = {phi:.6g} <= 0")
    a = np.asarray(h.normal, dtype=float)
    return (ctest_constant(p, alpha) * phi ** (p - alpha)
            * float(np.linalg.norm(a)) ** (-p) * float(np.sum(np.abs(a) ** alpha)))


def fraclap_report(alpha: float, p: float, x: float = 1.0) -> dict:
    """Value and cross-check diagnostics, as emitted by the command line."""
    c = ctest_constant(p, alpha)
    c_pv = ctest_constant_pv(p, alpha)
    return {
        "alpha": alpha,
        "p": p,
        "x": x,
        "constant": c,
        "value": c * x ** (p - alpha),
        "constant_pv": c_pv,
        "abs_diff": abs(c - c_pv),
        "rel_diff": abs(c - c_pv) / max(abs(c), 1e-300),
        "sign": int(np.sign(c)) if abs(c) > 1e-8 else 0,
    }
