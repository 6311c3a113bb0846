"""Shape functions and the time-integrated occupation kernel.

The occupation of a point ``x`` by a path ``Y`` on a uniform grid is the
trapezoid sum ``A(x) = sum_k w_k K(x + Y_k)``.  For the singular power
kernel the value is capped at ``delta**-p`` inside distance ``delta``, and
steps that pass close to the pole relative to their own length are refined
into eight linearly interpolated sub-steps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import integrate, interpolate, special as sps

from .exceptions import DomainError, SingularityError
from .special import sphere_area, unit_ball_volume

KINDS = ("power", "bounded-indicator", "custom-radial")

#: refine a step when the pole is closer than this many step lengths
REFINE_RATIO = 4.0
N_SUB = 8


@dataclass(frozen=True)
class KernelSpec:
    """Radial shape function ``K``.

    Parameters
    ----------
    kind : str
        ``"power"`` for ``|y|^-p``, ``"bounded-indicator"`` for
        ``amplitude * 1{|y| <= support_radius}``, or ``"custom-radial"``
        for linear interpolation of ``table = (radii, values)`` (zero past
        the last radius).
    inner_cutoff : float
        Power kind only: drop the kernel on ``|y| <= inner_cutoff``.  Used
        for the far half of a convexity split.
    """

    kind: str = "power"
    p: Optional[float] = None
    amplitude: float = 1.0
    support_radius: float = 1.0
    table: Optional[tuple] = None
    inner_cutoff: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "power":
            if self.p is None or not self.p > 0:
                raise ValueError("power kernel needs p > 0")
        elif self.amplitude < 0:
            raise ValueError("kernel must be non-negative")
        if self.kind == "bounded-indicator" and not self.support_radius > 0:
            raise ValueError("support_radius must be positive")
        if self.kind == "custom-radial":
            if self.table is None:
                raise ValueError("custom-radial kernel needs a table")
            r, v = (np.asarray(a, float) for a in self.table)
            if r.ndim != 1 or r.shape != v.shape or np.any(np.diff(r) <= 0) or r[0] != 0:
                raise ValueError("table radii must start at 0 and increase")
            if np.any(v < 0):
                raise ValueError("kernel must be non-negative")
            object.__setattr__(self, "table", (tuple(r), tuple(v)))

    @classmethod
    def power(cls, p: float) -> "KernelSpec":
        return cls("power", p=float(p))

    @classmethod
    def indicator(cls, amplitude: float = 1.0, radius: float = 1.0) -> "KernelSpec":
        return cls("bounded-indicator", amplitude=float(amplitude), support_radius=float(radius))

    @property
    def is_bounded(self) -> bool:
        return self.kind != "power" or self.inner_cutoff > 0

    @property
    def support(self) -> float:
        if self.kind == "bounded-indicator":
            return self.support_radius
        if self.kind == "custom-radial":
            return self.table[0][-1]
        return math.inf

    @property
    def is_zero(self) -> bool:
        if self.kind == "power":
            return False
        if self.kind == "bounded-indicator":
            return self.amplitude == 0
        return not any(self.table[1])

    def radial(self, r, cap: Optional[float] = None):
        """``K`` at distance ``r``; ``cap`` bounds the power kernel near 0."""
        r = np.asarray(r, dtype=float)
        if self.kind == "power":
            if cap is None:
                if np.any(r == 0):
                    raise SingularityError("kernel evaluated at its pole with capping disabled")
                out = r ** -self.p
            else:
                out = np.maximum(r, cap) ** -self.p
            if self.inner_cutoff > 0:
                out = np.where(r > self.inner_cutoff, out, 0.0)
            return out
        if self.kind == "bounded-indicator":
            return np.where(r <= self.support_radius, self.amplitude, 0.0)
        rr, vv = self.table
        return np.interp(r, rr, vv, right=0.0)

    def total_integral(self, d: int) -> float:
        """``int K(y) dy`` over R^d (finite for bounded kinds only)."""
        if self.kind == "bounded-indicator":
            return self.amplitude * unit_ball_volume(d) * self.support_radius ** d
        if self.kind == "custom-radial":
            rr, vv = (np.asarray(a) for a in self.table)
            f = lambda r: np.interp(r, rr, vv) * r ** (d - 1)
            v, _ = integrate.quad(f, 0, rr[-1], points=list(rr[1:-1])[:50], limit=400)
            return sphere_area(d) * v
        raise DomainError("the power kernel is not integrable")

    def ball_potential(self, c, R: float, d: int, cap: Optional[float] = None):
        """``int_{|x|<R} K(x + c) dx`` for offsets with ``|c| + support <= R``.

        For the power kernel ``|c| <= 0.95 R`` is required instead, and the
        cap subtracts ``d omega_d delta^(d-p) p / (d (d-p))``.
        """
        c = np.asarray(c, dtype=float)
        if self.kind == "power":
            if self.inner_cutoff > 0:
                raise DomainError("ball potential of a cut-off power kernel is not tabulated")
            u = c / R
            if np.any(u > 0.95 + 1e-12):
                raise DomainError("offset too close to the ball boundary")
            p = self.p
            g = R ** (d - p) * _unit_ball_potential(d, p)(u)
            if cap is not None:
                g = g - sphere_area(d) * cap ** (d - p) * p / (d * (d - p))
            return g
        if np.any(c + self.support > R * (1 + 1e-12)):
            raise DomainError("kernel support leaves the ball")
        return np.full(c.shape, self.total_integral(d))

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "power":
            out["p"] = self.p
            if self.inner_cutoff:
                out["inner_cutoff"] = self.inner_cutoff
        elif self.kind == "bounded-indicator":
            out.update(amplitude=self.amplitude, support_radius=self.support_radius)
        else:
            out["table"] = [list(self.table[0]), list(self.table[1])]
        return out


def _cap_fraction(cos0, d: int):
    """Fraction of the unit sphere in R^d with polar cosine above ``cos0``."""
    cos0 = np.clip(cos0, -1.0, 1.0)
    if d == 2:
        return np.arccos(cos0) / math.pi
    half = 0.5 * sps.betainc((d - 1) / 2, 0.5, 1 - cos0 ** 2)
    return np.where(cos0 >= 0, half, 1 - half)


def unit_ball_potential_quad(u: float, d: int, p: float) -> float:
    """``int_{|x|<1} |x + u e|^-p dx`` by adaptive quadrature (d >= 2)."""
    if u == 0:
        return sphere_area(d) / (d - p)
    full = sphere_area(d) * (1 - u) ** (d - p) / (d - p)

    def f(r):
        cos0 = (r * r + u * u - 1) / (2 * r * u)
        return r ** (d - 1 - p) * _cap_fraction(cos0, d)

    v, _ = integrate.quad(f, 1 - u, 1 + u, epsabs=0, epsrel=1e-12, limit=200)
    return full + sphere_area(d) * v


@lru_cache(maxsize=32)
def _unit_ball_potential(d: int, p: float):
    if d == 1:
        return lambda u: ((1 + u) ** (1 - p) + (1 - u) ** (1 - p)) / (1 - p)
    # the potential is even and smooth in u on [0, 0.95]; spline in u^2
    u = np.linspace(0.0, 0.96, 193)
    vals = np.array([unit_ball_potential_quad(float(x), d, p) for x in u])
    spline = interpolate.CubicSpline(u ** 2, vals)
    return lambda x: spline(np.asarray(x, float) ** 2)


def _capped(dist, p, cap):
    return np.maximum(dist, cap) ** -p


def occupation_batch(points: np.ndarray, Y: np.ndarray, weights: np.ndarray,
                     kernel: KernelSpec, cap, refine: bool = True):
    """Occupation ``A(x)`` for many points and one path.

    Parameters
    ----------
    points : ndarray, shape (m, d)
    Y : ndarray, shape (n+1, d)
        Path offsets; the kernel is evaluated at ``x + Y_k``.
    weights : ndarray, shape (n+1,)
        Trapezoid weights of a uniform grid.
    kernel : KernelSpec
    cap : float or sequence of float
        Singular cap(s) for the power kernel; ignored otherwise.
    refine : bool
        Refine near-pole steps (power kernel only).

    Returns
    -------
    A, A_trap : ndarray
        Shape ``(m,)`` or ``(len(cap), m)`` when several caps are given.
        ``A_trap`` is the plain capped trapezoid sum without refinement.
    """
    points = np.atleast_2d(points)
    diff = points[:, None, :] + Y[None, :, :]
    A, A_trap = occupation_pairs(diff, weights, kernel, cap, refine)
    return A, A_trap


def occupation_pairs(diff: np.ndarray, weights: np.ndarray, kernel: KernelSpec, cap,
                     refine: bool = True):
    """Occupation for pre-combined offsets, one path per row.

    ``diff[m, k]`` is the argument of the kernel at grid time ``k`` for
    pair ``m``; otherwise as :func:`occupation_batch`.
    """
    dist = np.sqrt(np.einsum("mkd,mkd->mk", diff, diff))
    if kernel.kind != "power":
        A = kernel.radial(dist) @ weights
        return (A, A) if np.ndim(cap) == 0 else (A[None, :], A[None, :])
    caps = np.atleast_1d(np.asarray(cap, dtype=float))
    p = kernel.p
    A_trap = np.empty((caps.size, diff.shape[0]))
    for j, c in enumerate(caps):
        K = _capped(dist, p, c)
        if kernel.inner_cutoff > 0:
            K[dist <= kernel.inner_cutoff] = 0.0
        A_trap[j] = K @ weights
    A = A_trap.copy()
    if refine:
        dd = np.diff(diff, axis=1)
        step = np.sqrt(np.einsum("mkd,mkd->mk", dd, dd))
        near = np.minimum(dist[:, :-1], dist[:, 1:]) < REFINE_RATIO * step
        mi, ki = np.nonzero(near)
        if mi.size:
            h = weights[1] if weights.size > 2 else 2 * weights[0]
            frac = np.linspace(0.0, 1.0, N_SUB + 1)
            sub_w = np.full(N_SUB + 1, h / N_SUB)
            sub_w[[0, -1]] = h / (2 * N_SUB)
            seg = diff[mi, ki][:, None, :] + frac[None, :, None] * dd[mi, ki][:, None, :]
            sd = np.linalg.norm(seg, axis=2)
            for j, c in enumerate(caps):
                Ks = _capped(sd, p, c)
                if kernel.inner_cutoff > 0:
                    Ks[sd <= kernel.inner_cutoff] = 0.0
                fine = Ks @ sub_w
                coarse = 0.5 * h * (_capped(dist[mi, ki], p, c) * (dist[mi, ki] > kernel.inner_cutoff)
                                     + _capped(dist[mi, ki + 1], p, c) * (dist[mi, ki + 1] > kernel.inner_cutoff))
                np.add.at(A[j], mi, fine - coarse)
    if np.ndim(cap) == 0:
        return A[0], A_trap[0]
    return A, A_trap
