"""Two-point kernel integrals: Q(b), the Regime V constant D and its bounds.

``Q(b)`` is reduced by rotational symmetry to a double integral over the
radius ``r = |x|`` and ``rho = |x + U|``.  For fixed ``r`` the law of
``|x + U|`` is noncentral chi with ``d`` degrees of freedom, so the angular
Gaussian average is carried out exactly by its Bessel-function density.
"""
from __future__ import annotations

import math
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import integrate, special as sps

from .exceptions import ConvergenceError, DomainError, RegimeError
from .params import Regime, classify_regime
from .quadrature import QuadratureSpec
from .special import _check_dp, q_limit_infinity, q_limit_zero, sphere_area

_DEFAULT_QUAD = QuadratureSpec(rel_tol=1e-6, abs_tol=1e-12)


def noncentral_chi_pdf(rho, lam: float, d: int):
    """Density of ``|lam*e + U|`` for ``U ~ N(0, I_d)`` at ``rho >= 0``."""
    rho = np.asarray(rho, dtype=float)
    if lam < 1e-8:
        logc = (1 - d / 2) * math.log(2) - math.lgamma(d / 2)
        with np.errstate(divide="ignore"):
            return np.exp(logc + (d - 1) * np.log(rho) - rho * rho / 2)
    nu = d / 2 - 1
    z = lam * rho
    with np.errstate(divide="ignore", invalid="ignore"):
        out = rho ** (d / 2) * lam ** (1 - d / 2) * np.exp(-((rho - lam) ** 2) / 2) * sps.ive(nu, z)
    return np.where(rho > 0, out, 0.0 if d > 1 else math.sqrt(2 / math.pi) * math.exp(-lam * lam / 2))


@lru_cache(maxsize=64)
def _gl(n: int):
    return np.polynomial.legendre.leggauss(n)


@lru_cache(maxsize=64)
def _jacobi(n: int, beta: float):
    # weight (1+x)^beta on [-1, 1]
    return sps.roots_jacobi(n, 0.0, beta)


def _panel_edges(lo: float, hi: float) -> np.ndarray:
    # geometric panels below 1, unit panels above
    parts = []
    edge = lo
    if lo < 1.0:
        stop = min(1.0, hi)
        # lo == 0 leaves [0, 2^-12] to the Gauss-Jacobi end panel
        start = lo if lo > 0 else 2.0 ** -12
        if start < stop:
            k = max(1, int(math.ceil(math.log2(stop / start))))
            parts.append(np.geomspace(start, stop, k + 1))
        edge = stop
    if edge < hi:
        k = max(1, int(math.ceil(hi - edge)))
        parts.append(np.linspace(edge, hi, k + 1))
    if not parts:
        return np.array([lo, hi]) if lo > 0 else np.array([])
    return np.unique(np.concatenate(parts))


def _panel_rule(lo: float, hi: float, expo: float, n: int):
    """Nodes and weights for ``int_lo^hi s^expo g(s) ds`` with smooth ``g``.

    The returned weights include the ``s^expo`` factor.  Below 1 the range
    is cut into geometric panels (plus a Gauss-Jacobi panel on
    ``[0, 2^-12]`` when ``lo == 0``); further out panels have unit width.
    """
    x, w = _gl(n)
    nodes, weights = [], []
    if lo == 0.0:
        top = min(2.0 ** -12, hi)
        xj, wj = _jacobi(n, expo)
        nodes.append(0.5 * top * (xj + 1))
        weights.append((0.5 * top) ** (1 + expo) * wj)
    edges = _panel_edges(lo, hi)
    if edges.size >= 2:
        a, b = edges[:-1, None], edges[1:, None]
        s = 0.5 * (b - a) * x + 0.5 * (b + a)
        nodes.append(s.ravel())
        weights.append((0.5 * (b - a) * w * s ** expo).ravel())
    return np.concatenate(nodes), np.concatenate(weights)


def _chi_over_power(s, r, d: int):
    """Noncentral chi density at ``s`` (noncentrality ``r``) times ``s^(1-d)``."""
    s, r = np.broadcast_arrays(np.asarray(s, float), np.asarray(r, float))
    nu = d / 2 - 1
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = (s * r) ** (-nu) * np.exp(-((s - r) ** 2) / 2) * sps.ive(nu, r * s)
    # small-argument limit of I_nu(z) z^-nu is 2^-nu / Gamma(nu+1)
    lim = 2 ** (-nu) / math.gamma(nu + 1) * np.exp(-(r * r + s * s) / 2)
    return np.where(s * r > 1e-12, out, lim)


def _inner(r: float, b: float, d: int, p: float, n: int) -> float:
    """``E[|x+U|^-p ; |x+U| >= b]`` for ``|x| = r``."""
    lo = max(b, r - 12.0)
    hi = max(r, b) + 12.0
    s, w = _panel_rule(lo, hi, d - 1 - p, n)
    return float(np.dot(w, _chi_over_power(s, r, d)))


def _tail(R: float, d: int, p: float) -> float:
    # int_R^inf r^(d-1-p) h(r) dr with h(r) = r^-p (1 + p(p+2-d)/(2 r^2) + ...)
    return R ** (d - 2 * p) / (2 * p - d) + p * (p + 2 - d) / 2 * R ** (d - 2 * p - 2) / (2 * p + 2 - d)


def _q_value(d: int, p: float, b: float, n: int) -> float:
    R = b + 40.0
    r, w = _panel_rule(b, R, d - 1 - p, n)
    # all inner rules concatenated so the Bessel factor is one vector call
    parts = [_panel_rule(max(b, ri - 12.0), max(ri, b) + 12.0, d - 1 - p, n) for ri in r]
    sizes = np.array([len(s) for s, _ in parts])
    s_all = np.concatenate([s for s, _ in parts])
    w_all = np.concatenate([wi for _, wi in parts])
    r_all = np.repeat(r, sizes)
    vals = w_all * _chi_over_power(s_all, r_all, d)
    h = np.add.reduceat(vals, np.concatenate(([0], np.cumsum(sizes)[:-1])))
    return sphere_area(d) * (float(np.dot(w, h)) + _tail(R, d, p))


def Q_of_b(d: int, p: float, b: float, quad: Optional[QuadratureSpec] = None) -> float:
    """Two-point kernel integral ``Q(b)``.

    ``Q(b) = int_{|x|>=b} |x|^-p E[1{|x+U|>=b} |x+U|^-p] dx`` with
    ``U ~ N(0, I_d)``.

    The radial integral over ``r = |x|`` and the integral over
    ``rho = |x+U|`` use composite Gauss rules (Gauss-Jacobi at an
    algebraic endpoint); beyond ``r = b + 40`` a two-term expansion of
    ``E|x+U|^-p`` is integrated in closed form.  The error estimate is the
    difference between 16- and 24-node panel rules.

    Parameters
    ----------
    d, p : int, float
        Dimension and shape exponent, ``d/2 < p < d``.
    b : float
        Truncation radius, ``b >= 0``.
    quad : QuadratureSpec, optional
        Only ``rel_tol`` is used.

    Raises
    ------
    ConvergenceError
        If the two panel rules disagree by more than ``rel_tol``.
    """
    d, p = _check_dp(d, p)
    if not b >= 0:
        raise DomainError("b must be non-negative")
    quad = quad or _DEFAULT_QUAD
    return _q_cached(d, p, float(b), float(quad.rel_tol))


@lru_cache(maxsize=4096)
def _q_cached(d: int, p: float, b: float, tol: float) -> float:
    coarse = _q_value(d, p, b, 16)
    fine = _q_value(d, p, b, 24)
    if abs(fine - coarse) > tol * abs(fine):
        raise ConvergenceError(
            f"Q({b}) panel rules disagree: {coarse!r} vs {fine!r} (rel_tol {tol})"
        )
    return fine


def D_constant(d: int, p: float, sigma: float, quad: Optional[QuadratureSpec] = None,
               s_cut: float = 60.0, n_nodes: int = 8, n_panels: int = 4) -> float:
    """``D(d,p,sigma^2) = 4 sigma^-2 int_0^inf s^(2p-d-3) Q(s) ds``.

    The integral over ``[1e-10, s_cut]`` uses Gauss-Legendre panels in
    ``log s`` (``Q(0+)`` covers the sliver below 1e-10); beyond ``s_cut``
    the large-``b`` law ``Q(s) ~ d omega_d s^-(2p-d) / (2p-d)`` is integrated in closed form.

    Parameters
    ----------
    s_cut : float
        Start of the asymptotic tail.
    n_nodes : int
        Gauss nodes per panel.
    n_panels : int
        Panels on each of ``[1e-10, 0.05]`` and ``[0.05, s_cut]``.
    """
    d, p = _check_dp(d, p)
    if classify_regime(d, p) is not Regime.V:
        raise RegimeError("D(d,p,sigma^2) is finite only for p > max(2, (d+2)/2)")
    if sigma <= 0:
        raise DomainError("sigma must be positive")
    return 4.0 / sigma ** 2 * _cached_d(d, p, float(s_cut), int(n_nodes), int(n_panels))


@lru_cache(maxsize=64)
def _cached_d(d, p, s_cut, n_nodes, n_panels):
    return _d_integral(d, p, s_cut, n_nodes, n_panels)


def _d_integral(d, p, s_cut, n_nodes, n_panels):
    a = 2 * p - d - 3  # > -1 in Regime V
    # Q(s) = Q(0+) - O(s^(d-p)) near 0, which no polynomial rule absorbs;
    # in l = log s both powers are smooth, so panels are Gauss-Legendre in l
    s0, e0 = 1e-10, 0.05
    total = q_limit_zero(d, p) * s0 ** (1 + a) / (1 + a)
    x, w = _gl(n_nodes)
    small = np.linspace(math.log(s0), math.log(e0), n_panels + 1)
    large = np.linspace(math.log(e0), math.log(s_cut), n_panels + 1)
    for edges in (small, large):
        for lo, hi in zip(edges[:-1], edges[1:]):
            for xi, wi in zip(x, w):
                s = math.exp(0.5 * (hi - lo) * xi + 0.5 * (hi + lo))
                total += 0.5 * (hi - lo) * wi * s ** (1 + a) * _q_value(d, p, s, 16)
    # tail: s^a * c s^-(2p-d) = c s^-3
    return total + q_limit_infinity(d, p) * s_cut ** -2 / 2


def rho5_upper_constant(d: int, p: float, D1: float) -> float:
    """``K(d,p)``: minimum over ``a > 0`` of ``D1 a^-alpha + c a^beta``.

    Here ``alpha = 2p-d-2``, ``beta = d-p`` and ``c = d omega_d / (d-p)``;
    the upper constant is then ``K * sigma^(-2(d-p)/(p-2))``.
    """
    alpha, beta = 2 * p - d - 2, d - p
    c = sphere_area(d) / (d - p)
    q = p - 2
    return (q / beta) * (beta / alpha) ** (alpha / q) * D1 ** (beta / q) * c ** (alpha / q)


def rho5_upper_constant_alternative(d: int, p: float, D1: float) -> float:
    """An alternative closed form for ``K(d,p)``.

    Kept for comparison only: its ``D1`` exponent ``(2p-d-2)/(d-p)`` does
    not reproduce the sigma-scaling ``sigma^(-2(d-p)/(p-2))`` it is
    combined with, so :func:`rho5_upper_constant` is used instead.
    """
    alpha, beta = 2 * p - d - 2, d - p
    c = sphere_area(d) / (d - p)
    q = p - 2
    brace = (beta / alpha) ** (alpha / q) + (alpha / q) ** (alpha / beta)
    return brace * D1 ** (alpha / beta) * c ** (alpha / q)


def rho5_bounds(d: int, p: float, theta: float, sigma: float,
                C1_estimate: Optional[float] = None,
                quad: Optional[QuadratureSpec] = None) -> tuple[float, float]:
    """Interval ``[C1 theta^e, C2 theta^e]`` with ``e = (d-2)/(p-2)``.

    ``C2 = K(d,p) sigma^(-2(d-p)/(p-2))`` with ``D1 = sigma^2 D / 2``.
    Without ``C1_estimate`` the lower end is ``0.0`` (unestimated).
    """
    d, p = _check_dp(d, p)
    if classify_regime(d, p) is not Regime.V:
        raise RegimeError(f"(d={d}, p={p}) is not in regime V")
    if theta <= 0 or sigma <= 0:
        raise DomainError("theta and sigma must be positive")
    D1 = sigma ** 2 * D_constant(d, p, sigma, quad) / 2
    C2 = rho5_upper_constant(d, p, D1) * sigma ** (-2 * (d - p) / (p - 2))
    e = (d - 2) / (p - 2)
    upper = C2 * theta ** e
    lower = 0.0 if C1_estimate is None else C1_estimate * theta ** e
    if lower > upper:
        raise ValueError(f"lower bound {lower} exceeds upper bound {upper}")
    return lower, upper


def convolution_integral(y, z, p: float, tol: float = 1e-9) -> float:
    """Adaptive-quadrature value of ``int |x-y|^-p |x-z|^-p dx``.

    Centered at ``y``, with ``L = |y-z|`` and ``u`` the cosine between ``x-y``
    and ``z-y``; the angular measure is ``(1-u^2)^((d-3)/2)`` times the area
    of the ``(d-2)``-sphere.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    z = np.atleast_1d(np.asarray(z, dtype=float))
    d = y.size
    if d < 2:
        raise DomainError("use d >= 2")
    L = float(np.linalg.norm(y - z))
    if L == 0:
        raise DomainError("y and z must differ")
    area = 2 * math.pi ** ((d - 1) / 2) / math.gamma((d - 1) / 2)

    def ang(r):
        # w = 1 - u; the integrand peaks within w ~ (r-L)^2 / (2 r L) of 0,
        # so the w range is split geometrically from that scale up to 2
        a2, c = (r - L) ** 2, 2 * r * L
        g = lambda w: (a2 + c * w) ** (-p / 2) * (w * (2 - w)) ** ((d - 3) / 2)
        w0 = min(max(a2 / c, 1e-14), 1.0)
        edges = [0.0] + [x for x in np.geomspace(w0, 2.0, 8)]
        v = 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            if hi > lo:
                v += integrate.quad(g, lo, hi, epsabs=0, epsrel=tol, limit=200)[0]
        return area * r ** (d - 1 - p) * v

    segs = [(0, L / 2), (L / 2, L), (L, 2 * L), (2 * L, np.inf)]
    total = 0.0
    for lo, hi in segs:
        v, _ = integrate.quad(ang, lo, hi, epsabs=0, epsrel=tol, limit=400)
        total += v
    return total
