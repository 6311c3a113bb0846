"""Radial Hardy-inequality numerics.

Profiles are radial functions ``g(|x|)`` on ``R^d``.  Every integral is a
one-dimensional radial integral carrying the surface factor
``d omega_d r^(d-1)`` and is computed exactly per segment: piecewise
linear profiles give closed forms in powers of the breakpoints, and the
three-piece family ``gM`` has its own closed forms.

Quantities:

* ``hardy_ratio``     ``int g^2 |x|^-2 / int |grad g|^2`` (d = 3; at most 4),
* ``hardy_objective`` ``theta sigma^-p int g^2 |x|^-p - int |grad g|^2 / 2``
  for ``||g||_2 = 1``,
* ``estimate_gamma_dp`` a lower bound for the best constant of
  ``int g^2 |x|^-p <= gamma ||g||_2^(2-p) ||grad g||_2^p``.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy import integrate, optimize

from .exceptions import ConvergenceWarning, DegenerateProfileError, DomainError
from .parallel import map_ordered
from .sampler import as_seed
from .special import sphere_area


def _powers(r0, r1, m, kmax=2):
    """``int_{r0}^{r1} r^(m+k) dr`` for k = 0..kmax (needs m > -1)."""
    out = []
    for k in range(kmax + 1):
        e = m + k + 1
        out.append((r1 ** e - r0 ** e) / e)
    return out


@dataclass(frozen=True)
class RadialProfile:
    """Piecewise linear radial profile vanishing at and beyond the last node.

    Parameters
    ----------
    nodes : sequence of float
        ``0 = r_0 < r_1 < ... < r_n``.
    values : sequence of float
        ``g(r_i)``; the last one must be 0 (compact support).
    d : int
    """

    nodes: tuple
    values: tuple
    d: int = 3

    def __post_init__(self):
        r = np.asarray(self.nodes, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if r.ndim != 1 or r.size < 2 or r.size != v.size:
            raise DomainError("need matching node and value arrays with at least 2 entries")
        if r[0] != 0 or np.any(np.diff(r) <= 0):
            raise DomainError("nodes must start at 0 and increase strictly")
        if v[-1] != 0:
            raise DomainError("profile must vanish at the last node")
        if not np.all(np.isfinite(v)):
            raise DomainError("values must be finite")
        if self.d < 1:
            raise DomainError("d must be positive")
        object.__setattr__(self, "nodes", tuple(float(x) for x in r))
        object.__setattr__(self, "values", tuple(float(x) for x in v))

    # quadratic forms -------------------------------------------------------
    def _arrays(self):
        return np.asarray(self.nodes), np.asarray(self.values)

    def _segment_forms(self, m: float):
        """Per-segment 2x2 Gram entries of the hat functions under ``r^m``."""
        r, _ = self._arrays()
        r0, r1 = r[:-1], r[1:]
        h = r1 - r0
        P0, P1, P2 = _powers(r0, r1, m)
        uu = (r1 * r1 * P0 - 2 * r1 * P1 + P2) / h ** 2
        uv = (-r0 * r1 * P0 + (r0 + r1) * P1 - P2) / h ** 2
        vv = (r0 * r0 * P0 - 2 * r0 * P1 + P2) / h ** 2
        return uu, uv, vv

    def gram(self, kind: str, p: float = 0.0) -> np.ndarray:
        """Matrix ``M`` with ``g^T M g`` equal to the named integral.

        ``kind`` is ``"l2"`` (int g^2), ``"grad"`` (int |g'|^2) or
        ``"weighted"`` (int g^2 |x|^-p).  Surface factor included.
        """
        r, _ = self._arrays()
        n = r.size
        s = sphere_area(self.d)
        M = np.zeros((n, n))
        idx = np.arange(n - 1)
        if kind == "grad":
            h = np.diff(r)
            (Q,) = _powers(r[:-1], r[1:], self.d - 1, 0)
            c = Q / h ** 2
            M[idx, idx] += c
            M[idx + 1, idx + 1] += c
            M[idx, idx + 1] -= c
            M[idx + 1, idx] -= c
            return s * M
        m = self.d - 1 - (p if kind == "weighted" else 0.0)
        if kind not in ("l2", "weighted"):
            raise ValueError(f"unknown kind {kind!r}")
        if m <= -1:
            raise DomainError("weight |x|^-p is not integrable at the origin (need p < d)")
        uu, uv, vv = self._segment_forms(m)
        M[idx, idx] += uu
        M[idx + 1, idx + 1] += vv
        M[idx, idx + 1] += uv
        M[idx + 1, idx] += uv
        return s * M

    def l2(self) -> float:
        _, v = self._arrays()
        return float(v @ self.gram("l2") @ v)

    def grad2(self) -> float:
        _, v = self._arrays()
        return float(v @ self.gram("grad") @ v)

    def weighted(self, p: float) -> float:
        _, v = self._arrays()
        return float(v @ self.gram("weighted", p) @ v)

    def __call__(self, r):
        rr, vv = self._arrays()
        return np.interp(r, rr, vv, right=0.0)

    def scaled(self, a: float, amplitude: Optional[float] = None) -> "RadialProfile":
        """``amplitude * g(a r)``; the default amplitude ``a^(d/2)`` keeps the L2 norm."""
        amp = a ** (self.d / 2) if amplitude is None else amplitude
        r, v = self._arrays()
        return RadialProfile(tuple(r / a), tuple(amp * v), self.d)

    def normalized(self) -> "RadialProfile":
        n = self.l2()
        if not n > 0:
            raise DegenerateProfileError("zero profile")
        r, v = self._arrays()
        return RadialProfile(tuple(r), tuple(v / math.sqrt(n)), self.d)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r", "g"])
        for r, g in zip(self.nodes, self.values):
            w.writerow([repr(r), repr(g)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, d: int = 3) -> "RadialProfile":
        rows = list(csv.reader(io.StringIO(text)))
        body = rows[1:] if rows and rows[0][0] == "r" else rows
        r = [float(a) for a, _ in body]
        g = [float(b) for _, b in body]
        return cls(tuple(r), tuple(g), d)


@dataclass(frozen=True)
class GMProfile:
    """The three-piece profile in d = 3, optionally rescaled.

    ``g(r) = sqrt(M)`` on ``[0, 1/M]``, ``r^-1/2`` on ``(1/M, M]``,
    ``(2M - r)/M^(3/2)`` on ``(M, 2M]`` and 0 beyond; the stored profile is
    ``amplitude * g(scale * r)``.
    """

    M: float
    scale: float = 1.0
    amplitude: float = 1.0
    d: int = 3

    def __post_init__(self):
        if not self.M > 1:
            raise DomainError("M must exceed 1")
        if not (self.scale > 0 and self.amplitude != 0):
            raise DomainError("scale must be positive and amplitude non-zero")

    def __call__(self, r):
        x = self.scale * np.asarray(r, dtype=float)
        M = self.M
        with np.errstate(divide="ignore"):
            g = np.where(x <= 1 / M, math.sqrt(M),
                         np.where(x <= M, np.abs(x) ** -0.5,
                                  np.where(x <= 2 * M, (2 * M - x) / M ** 1.5, 0.0)))
        return self.amplitude * g

    @property
    def breakpoints(self) -> tuple:
        M = self.M
        return tuple(b / self.scale for b in (0.0, 1 / M, M, 2 * M))

    def l2(self) -> float:
        M = self.M
        # int_0^{1/M} M r^2 + int_{1/M}^M r + int_M^{2M} (2M-r)^2 r^2 / M^3
        val = 1 / (3 * M ** 2) + (M * M - M ** -2) / 2 + 8 * M ** 2 / 15
        return 4 * math.pi * val * self.amplitude ** 2 / self.scale ** 3

    def grad2(self) -> float:
        L = math.log(self.M)
        return 4 * math.pi * (L / 2 + 7 / 3) * self.amplitude ** 2 / self.scale

    def weighted(self, p: float) -> float:
        if p != 2:
            return _generic_weighted(self, p)
        L = math.log(self.M)
        return 4 * math.pi * (2 * L + 4 / 3) * self.amplitude ** 2 / self.scale

    def scaled(self, a: float, amplitude: Optional[float] = None) -> "GMProfile":
        amp = a ** 1.5 if amplitude is None else amplitude
        return GMProfile(self.M, self.scale * a, self.amplitude * amp, self.d)

    def normalized(self) -> "GMProfile":
        return GMProfile(self.M, self.scale, self.amplitude / math.sqrt(self.l2()), self.d)

    def segments(self):
        """``(lo, hi, g, g')`` per piece, for generic segment integration."""
        M, a, c = self.M, self.scale, self.amplitude
        b = self.breakpoints
        return [
            (b[0], b[1], lambda r: c * math.sqrt(M) + 0 * r, lambda r: 0 * r),
            (b[1], b[2], lambda r: c * (a * r) ** -0.5, lambda r: -0.5 * c * a * (a * r) ** -1.5),
            (b[2], b[3], lambda r: c * (2 * M - a * r) / M ** 1.5, lambda r: -c * a / M ** 1.5 + 0 * r),
        ]


def _generic_weighted(profile: GMProfile, p: float) -> float:
    s = sphere_area(profile.d)
    tot = 0.0
    for lo, hi, g, _ in profile.segments():
        v, _ = integrate.quad(lambda r: g(r) ** 2 * r ** (profile.d - 1 - p), lo, hi,
                              epsabs=0, epsrel=1e-12, limit=200)
        tot += v
    return s * tot


def segment_integrals(profile: GMProfile) -> dict:
    """Generic per-segment adaptive integration of the three integrals."""
    s = sphere_area(profile.d)
    out = {"l2": 0.0, "grad": 0.0, "weighted": 0.0}
    for lo, hi, g, dg in profile.segments():
        kw = dict(epsabs=0, epsrel=1e-13, limit=200)
        out["l2"] += integrate.quad(lambda r: g(r) ** 2 * r ** 2, lo, hi, **kw)[0]
        out["grad"] += integrate.quad(lambda r: dg(r) ** 2 * r ** 2, lo, hi, **kw)[0]
        # log substitution handles the wide middle piece
        out["weighted"] += integrate.quad(lambda u: g(math.exp(u)) ** 2 * math.exp(u),
                                          math.log(lo), math.log(hi), **kw)[0] if lo > 0 else \
            integrate.quad(lambda r: g(r) ** 2, lo, hi, **kw)[0]
    return {k: s * v for k, v in out.items()}


def gM_profile(M: float) -> GMProfile:
    """The three-piece family in d = 3 whose Hardy ratio tends to 4."""
    return GMProfile(float(M))


def gM_ratio_closed_form(M: float) -> float:
    """``4 - 16/(log M + 14/3)``."""
    if not M > 1:
        raise DomainError("M must exceed 1")
    return 4 - 16 / (math.log(M) + 14 / 3)


def hardy_ratio(profile) -> float:
    """``int g^2/|x|^2 dx / int |grad g|^2 dx`` in d = 3."""
    if profile.d != 3:
        raise DomainError("hardy_ratio is defined for d = 3")
    den = profile.grad2()
    if not den > 0:
        raise DegenerateProfileError("zero gradient norm")
    return profile.weighted(2.0) / den


def hardy_objective(profile, theta: float, sigma: float = 1.0, p: float = 2.0) -> float:
    """``theta sigma^-p int g^2 |x|^-p - int |grad g|^2 / 2`` after L2 normalization."""
    n = profile.l2()
    if not n > 0:
        raise DegenerateProfileError("zero profile")
    return (theta * sigma ** -p * profile.weighted(p) - 0.5 * profile.grad2()) / n


@dataclass
class DichotomyReport:
    theta: float
    sigma: float
    best_M: float
    base_objective: float
    scales: List[float]
    objectives: List[float]

    @property
    def max_objective(self) -> float:
        return max(self.objectives)


def hardy_dichotomy(theta: float, sigma: float = 1.0,
                    M_values: Sequence[float] = tuple(math.exp(k) for k in range(1, 31)),
                    scales: Sequence[float] = tuple(10.0 ** k for k in range(0, 7))) -> DichotomyReport:
    """Best ``gM`` objective and its growth under ``g -> a^(3/2) g(a .)``.

    The objective of a rescaled profile is ``a^2`` times the base one, so a
    single positive value already yields arbitrarily large ones.
    """
    objs = [hardy_objective(gM_profile(M), theta, sigma) for M in M_values]
    k = int(np.argmax(objs))
    base = gM_profile(M_values[k])
    vals = [hardy_objective(base.scaled(a), theta, sigma) for a in scales]
    return DichotomyReport(theta, sigma, float(M_values[k]), float(objs[k]), list(scales), vals)


def random_profile(rng: np.random.Generator, n: int = 12, d: int = 3,
                   positive: bool = False) -> RadialProfile:
    """Random piecewise linear profile on random increasing nodes."""
    r = np.concatenate([[0.0], np.cumsum(rng.exponential(1.0, n))])
    v = rng.standard_normal(n + 1)
    if positive:
        v = np.abs(v)
    v[-1] = 0.0
    return RadialProfile(tuple(r), tuple(v), d)


# --- gamma(d, p) lower bound ------------------------------------------------------

def gamma_functional(profile: RadialProfile, p: float) -> float:
    """``int g^2 |x|^-p / (||g||_2^(2-p) ||grad g||_2^p)``."""
    l2, g2 = profile.l2(), profile.grad2()
    if not (l2 > 0 and g2 > 0):
        raise DegenerateProfileError("zero norm")
    return profile.weighted(p) / (l2 ** ((2 - p) / 2) * g2 ** (p / 2))


@dataclass
class GammaEstimate:
    """Best value of the interpolation functional found; a lower bound only."""

    value: float
    d: int
    p: float
    restarts: List[float]
    history: List[float]
    profile: Optional[RadialProfile] = None
    is_lower_bound: bool = True
    notes: str = "lower bound from a finite-dimensional search; not the best constant"

    def to_dict(self) -> dict:
        return {"value": self.value, "d": self.d, "p": self.p, "restarts": self.restarts,
                "history": self.history, "is_lower_bound": True, "notes": self.notes}


def _ascent(nodes: np.ndarray, v0: np.ndarray, d: int, p: float, sweeps: int, tol: float):
    """Coordinate ascent on node values; the last value stays 0."""
    prof = RadialProfile(tuple(nodes), tuple(v0), d)
    ML, MG, MW = prof.gram("l2"), prof.gram("grad"), prof.gram("weighted", p)
    v = v0.copy()

    def J(vec):
        a, b, c = vec @ MW @ vec, vec @ ML @ vec, vec @ MG @ vec
        if not (b > 0 and c > 0):
            return -math.inf
        return a / (b ** ((2 - p) / 2) * c ** (p / 2))

    best = J(v)
    hist = [best]
    n = v.size - 1
    for _ in range(sweeps):
        start = best
        for i in range(n):
            # each form is quadratic in v_i: alpha x^2 + 2 beta x + gamma
            coef = []
            for Mx in (MW, ML, MG):
                al = Mx[i, i]
                be = Mx[i] @ v - al * v[i]
                ga = v @ Mx @ v - 2 * v[i] * (Mx[i] @ v) + al * v[i] ** 2
                coef.append((al, be, ga))

            def f(x, coef=coef):
                a, b, c = (al * x * x + 2 * be * x + ga for al, be, ga in coef)
                if not (b > 0 and c > 0):
                    return math.inf
                return -a / (b ** ((2 - p) / 2) * c ** (p / 2))

            x0 = v[i]
            span = max(abs(x0), np.abs(v).max(), 1e-12)
            res = optimize.minimize_scalar(f, bracket=(x0 - span, x0, x0 + span)) \
                if f(x0) <= min(f(x0 - span), f(x0 + span)) else \
                optimize.minimize_scalar(f, bounds=(x0 - 4 * span, x0 + 4 * span), method="bounded")
            if -res.fun > best:
                v[i] = res.x
                best = -res.fun
        hist.append(best)
        if best - start <= tol * abs(best):
            break
    return v, best, hist


def _refine(nodes: np.ndarray, v: np.ndarray):
    """Insert geometric midpoints (arithmetic next to the origin)."""
    mids = np.sqrt(nodes[1:-1] * nodes[2:])
    new_r = np.sort(np.concatenate([nodes, [nodes[1] / 2], mids]))
    return new_r, np.interp(new_r, nodes, v)


def _one_restart(args):
    d, p, n_nodes, levels, sweeps, tol, seed_i = args
    rng = seed_i.generator("gamma-restart")
    ratio = math.exp(rng.uniform(0.25, 0.6))
    r_min = math.exp(rng.uniform(-4, -2))
    nodes = np.concatenate([[0.0], r_min * ratio ** np.arange(n_nodes)])
    v = np.exp(-nodes / nodes[-1] * rng.uniform(2, 6)) * (1 + 0.3 * rng.random(nodes.size))
    v[-1] = 0.0
    hist: List[float] = []
    for lev in range(levels):
        v, best, h = _ascent(nodes, v, d, p, sweeps, tol)
        hist.extend(h if not hist else h[1:])
        if lev + 1 < levels:
            nodes, v = _refine(nodes, v)
    return best, hist, RadialProfile(tuple(nodes), tuple(v), d)


def estimate_gamma_dp(d: int, p: float, restarts: int = 10, n_nodes: int = 16,
                      levels: int = 2, sweeps: int = 30, tol: float = 1e-7, seed=0,
                      workers: Optional[int] = None) -> GammaEstimate:
    """Lower bound for the interpolation constant ``gamma(d, p)``.

    Maximizes :func:`gamma_functional` over piecewise linear profiles on a
    geometric node grid by coordinate ascent, refining the grid
    ``levels - 1`` times, from ``restarts`` random starts.  The best value
    wins (ties go to the lower restart index).

    Warns
    -----
    ConvergenceWarning
        If the restart optima differ by more than 5%.
    """
    if not (d / 2 < p < min(2, d)):
        raise DomainError("need d/2 < p < min(2, d)")
    seed = as_seed(seed)
    jobs = [(d, p, n_nodes, levels, sweeps, tol, seed.child(k)) for k in range(restarts)]
    results = map_ordered(_one_restart, jobs, workers)
    vals = [r[0] for r in results]
    k = int(np.argmax(vals))
    if (max(vals) - min(vals)) > 0.05 * max(vals):
        warnings.warn("restarts disagree by more than 5%", ConvergenceWarning, stacklevel=2)
    return GammaEstimate(float(vals[k]), d, p, [float(x) for x in vals],
                         [float(x) for x in results[k][1]], results[k][2])
