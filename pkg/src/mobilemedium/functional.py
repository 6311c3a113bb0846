"""Exponent functionals of the mobile medium and their estimators.

For an obstacle path ``X`` (volatility sigma, started at 0) and a
deterministic path ``b`` write ``Y = X - b`` and
``A(x) = int_0^t K(x + Y(s)) ds``.  The two functionals are

    psi_bar_t(b) = int E psi(theta A(x)) dx,
    Psi_bar_t(b) = int E Psi(theta A(x)) dx.

Each obstacle path contributes one spatial integral; the estimate is the
mean over ``n_mc`` paths with its standard error.

Spatial scheme (``"radial-MC hybrid"``), per path, around the centre
``z = -mean(Y)``:

* inner ball ``|x - z| < R_in`` (contains the path with margin): since
  ``psi(a) = a - (1 - exp(-a))`` the linear part integrates exactly to
  ``theta * L`` with ``L = sum_k w_k G(|Y_k - mean Y|)``, ``G`` the ball
  potential of the kernel; only the bounded remainder is sampled
  (stratified in radius, random directions).
* shell ``R_in <= |x - z| <= r_max``: Gauss-Legendre in ``log r`` times a
  randomly rotated cross of ``2d`` directions.
* beyond ``r_max``: the path-free tail ``int psi(theta t |x|^-p) dx``,
  whose size is reported in ``bias_note``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np
from scipy import integrate

from .exceptions import (ConvergenceError, DivergenceWarning, OverflowSignal, RegimeError,
                         SingularityError)
from .kernels import KernelSpec, occupation_batch
from .parallel import chunks, map_ordered
from .params import ModelParams, Regime
from .quadrature import QuadratureSpec
from .sampler import PathSample, SeedSpec, TimeGrid, as_seed, sample_brownian
from .special import (
    Psi_big,
    catalytic_threshold,
    convolution_constant,
    gaussian_inverse_moment,
    psi,
    psi_radial_integral,
    sphere_area,
    time_pair_integral,
    unit_ball_volume,
)

#: work-item size (obstacle paths per task) for the thread pool
BATCH = 32


@dataclass
class EstimateCI:
    """Monte Carlo estimate with its standard error.

    ``stderr`` is the sample standard deviation over ``sqrt(n)``.
    ``extras`` holds named side results (separate pieces, diagnostics).
    """

    mean: float
    stderr: float
    n: int
    seed: Optional[SeedSpec] = None
    bias_note: str = ""
    extras: dict = field(default_factory=dict)

    @classmethod
    def from_samples(cls, values, seed=None, bias_note: str = "", **extras) -> "EstimateCI":
        v = np.asarray(values, dtype=float)
        n = v.size
        if n == 0:
            raise ValueError("no samples")
        se = float(v.std(ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
        return cls(float(v.mean()), se, n, seed, bias_note, dict(extras))

    @property
    def sd(self) -> float:
        return self.stderr * math.sqrt(self.n)

    def merge(self, other: "EstimateCI") -> "EstimateCI":
        """Pool two estimates from disjoint streams (exact pooled moments)."""
        n1, n2 = self.n, other.n
        n = n1 + n2
        m = (n1 * self.mean + n2 * other.mean) / n
        ss = (n1 - 1) * self.sd ** 2 + (n2 - 1) * other.sd ** 2
        ss += n1 * n2 / n * (self.mean - other.mean) ** 2
        sd = math.sqrt(ss / (n - 1))
        note = "; ".join(x for x in (self.bias_note, other.bias_note) if x)
        return EstimateCI(m, sd / math.sqrt(n), n, self.seed, note, {})

    def z_against(self, other: "EstimateCI") -> float:
        se = math.hypot(self.stderr, other.stderr)
        return (self.mean - other.mean) / se if se > 0 else math.copysign(math.inf, self.mean - other.mean) if self.mean != other.mean else 0.0

    def to_dict(self) -> dict:
        out = {
            "mean": self.mean,
            "stderr": self.stderr,
            "n": self.n,
            "seed": self.seed.to_dict() if self.seed else None,
            "bias_note": self.bias_note,
        }
        if self.extras:
            out["extras"] = _jsonable(self.extras)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "EstimateCI":
        seed = SeedSpec.from_dict(data["seed"]) if data.get("seed") else None
        return cls(data["mean"], data["stderr"], data["n"], seed, data.get("bias_note", ""),
                   dict(data.get("extras", {})))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, EstimateCI):
        return obj.to_dict()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


# --- single-point kernel -----------------------------------------------------

def occupation_kernel(x, X: PathSample, b: Optional[PathSample], p: float,
                      cap: Optional[float] = None, refine: bool = True) -> float:
    """Trapezoid value of ``int_0^t |x + X(s) - b(s)|^-p ds``.

    Parameters
    ----------
    x : array_like
        Spatial point.
    X, b : PathSample
        Paths on a common grid; ``b=None`` means the zero path.
    cap : float, optional
        Singular cap ``delta``; ``None`` disables capping, in which case a
        grid point sitting exactly on the pole raises SingularityError.
    refine : bool
        Subdivide steps that pass close to the pole.
    """
    Y = X.points if b is None else (X - b).points
    w = X.grid.trapezoid_weights()
    if cap is None:
        # a zero cap leaves the kernel untouched except at an exact hit
        diff = np.asarray(x, float)[None, :] + Y
        if np.any(np.all(diff == 0, axis=1)):
            raise SingularityError("grid point on the pole with capping disabled")
    A, _ = occupation_batch(np.atleast_2d(np.asarray(x, float)), Y, w,
                            KernelSpec.power(p), 0.0 if cap is None else cap,
                            refine=refine)
    return float(A[0])


# --- per-path spatial integral ---------------------------------------------

def _directions(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    if d == 1:
        return np.where(rng.random((n, 1)) < 0.5, -1.0, 1.0)
    g = rng.standard_normal((n, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _rotated_cross(rng: np.random.Generator, d: int) -> np.ndarray:
    """``+-`` columns of a Haar-random rotation: ``2d`` directions."""
    if d == 1:
        return np.array([[1.0], [-1.0]])
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    q = q * np.sign(np.diag(r))
    return np.concatenate([q.T, -q.T])


def _F(which: str, a):
    if which == "psi":
        return np.expm1(-a) + a
    with np.errstate(over="ignore"):
        return np.expm1(a) - a


def _tail_series(which: str, d: int, p: float, a0: float, r: float) -> float:
    # sum_n (-+1)^n a0^n / (n! (pn - d)) times |S^(d-1)| r^d, for a0 <= 1/2
    sgn = -1.0 if which == "psi" else 1.0
    total, term_fact = 0.0, 1.0
    for n in range(2, 60):
        term_fact *= n
        term = (sgn ** n) * a0 ** n / term_fact / (p * n - d)
        total += term
        if abs(term) < 1e-17 * abs(total):
            break
    return sphere_area(d) * r ** d * total


def static_tail(which: str, d: int, p: float, theta_t: float, r: float) -> float:
    """``int_{|x|>r} F(theta_t |x|^-p) dx`` with ``F`` = psi or Psi."""
    a0 = theta_t * r ** -p
    if a0 <= 0.5:
        return _tail_series(which, d, p, a0, r)
    # quadrature in log |x| out to where the argument falls to 1/2, series beyond
    r1 = (2.0 * theta_t) ** (1.0 / p)
    f = lambda u: float(_F(which, theta_t * math.exp(-p * u))) * math.exp(d * u)
    v, _ = integrate.quad(f, math.log(r), math.log(r1), epsabs=0, epsrel=1e-12, limit=200)
    return sphere_area(d) * v + _tail_series(which, d, p, 0.5, r1)


@dataclass
class _PathResult:
    value: np.ndarray  # one entry per cap
    inner: np.ndarray
    outer: np.ndarray
    tail: float


def _indicator_exact_1d(Y, w, amp, rho, theta, which) -> float:
    """Exact ``int F(theta O(x)) dx`` for the d=1 indicator kernel."""
    lo = -Y[:, 0] - rho
    hi = -Y[:, 0] + rho
    xs = np.concatenate([lo, hi])
    dw = np.concatenate([w, -w]) * amp
    order = np.argsort(xs, kind="stable")
    xs, dw = xs[order], dw[order]
    occ = np.cumsum(dw)[:-1]
    lengths = np.diff(xs)
    occ = np.maximum(occ, 0.0)
    return float(np.dot(lengths, _F(which, theta * occ)))


#: share of inner points drawn around the path, and the radial law exponent
NEAR_SHARE = 0.5
NEAR_BETA = 0.5
NEAR_STEPS = 4.0


def _inner_points(Y, z, R_in, vol, n, step_len, rng, mixture=True):
    """Inner-ball sample points and their inverse mixture density.

    Without ``mixture`` the points are volume-uniform, stratified in
    radius.  With it, a share ``NEAR_SHARE`` is drawn around the path
    points ``-Y_k`` (``k`` stratified over time) with radius
    ``h * Beta(NEAR_BETA, 1)``, ``h = NEAR_STEPS`` step lengths, and the
    estimator divides by the full mixture density (balance heuristic),
    restricted to the ball.
    """
    d = Y.shape[1]
    if not mixture:
        u = (np.arange(n) + rng.random(n)) / n
        pts = z + (R_in * u ** (1.0 / d))[:, None] * _directions(rng, n, d)
        return pts, np.full(n, vol)
    n_near = int(round(NEAR_SHARE * n))
    n_uni = n - n_near
    lam = n_uni / n
    u = (np.arange(n_uni) + rng.random(n_uni)) / n_uni
    uni = z + (R_in * u ** (1.0 / d))[:, None] * _directions(rng, n_uni, d)
    N = Y.shape[0]
    h = min(NEAR_STEPS * step_len, R_in)
    k = np.minimum(((np.arange(n_near) + rng.random(n_near)) * N / n_near).astype(int), N - 1)
    r = h * rng.random(n_near) ** (1.0 / NEAR_BETA)
    near = -Y[k] + r[:, None] * _directions(rng, n_near, d)
    pts = np.concatenate([uni, near])
    # mixture density: uniform part plus average of radial laws around -Y_k
    s_d = sphere_area(d)
    q = np.where(np.linalg.norm(pts - z, axis=1) < R_in, lam / vol, 0.0)
    acc = np.zeros(n)
    for j in range(0, N, 512):
        diff = pts[:, None, :] + Y[None, j:j + 512, :]
        rr = np.sqrt(np.einsum("ikd,ikd->ik", diff, diff))
        with np.errstate(divide="ignore"):
            g = np.where(rr < h, NEAR_BETA * (rr / h) ** (NEAR_BETA - 1) / (h * s_d * rr ** (d - 1)), 0.0)
        acc += g.sum(axis=1)
    q += (1 - lam) * acc / N
    inside = np.linalg.norm(pts - z, axis=1) < R_in
    inv_q = np.where(inside, 1.0 / q, 0.0)
    return pts, inv_q


def _path_integral(Y: np.ndarray, w: np.ndarray, t: float, theta: float, sigma: float,
                   kernel: KernelSpec, quad: QuadratureSpec, caps: np.ndarray,
                   rng: np.random.Generator, which: str, refine: bool = True) -> _PathResult:
    d = Y.shape[1]
    if kernel.kind == "bounded-indicator" and d == 1:
        v = _indicator_exact_1d(Y, w, kernel.amplitude, kernel.support_radius, theta, which)
        arr = np.full(caps.size, v)
        return _PathResult(arr, arr.copy(), np.zeros(caps.size), 0.0)
    ybar = Y.mean(axis=0)
    C = Y - ybar
    rad_c = np.sqrt(np.einsum("kd,kd->k", C, C))
    rho = float(rad_c.max())
    ell = sigma * math.sqrt(t)
    z = -ybar
    if kernel.kind == "power":
        R_in = 1.25 * rho + 0.25 * ell
    else:
        R_in = (rho + kernel.support) * (1 + 1e-9)
    vol = unit_ball_volume(d) * R_in ** d
    singular = kernel.kind == "power" and kernel.inner_cutoff == 0
    pts, inv_q = _inner_points(Y, z, R_in, vol, quad.n_x, sigma * math.sqrt(t / (Y.shape[0] - 1)),
                               rng, mixture=singular)
    A, A_trap = occupation_batch(pts, Y, w, kernel, caps, refine)
    A = np.atleast_2d(A)
    A_trap = np.atleast_2d(A_trap)
    with np.errstate(over="ignore", invalid="ignore"):
        if singular:
            L = np.array([np.dot(w, kernel.ball_potential(rad_c, R_in, d, c)) for c in caps])
            if which == "psi":
                core = theta * (A - A_trap) + np.expm1(-theta * A)
                inner = theta * L + (core * inv_q).mean(axis=1)
            else:
                core = np.expm1(theta * A) - theta * (A - A_trap)
                inner = (core * inv_q).mean(axis=1) - theta * L
        else:
            inner = (_F(which, theta * A) * inv_q).mean(axis=1)
    if kernel.kind != "power":
        return _PathResult(inner, inner, np.zeros(caps.size), 0.0)
    # shell: Gauss-Legendre in log r on four geometric panels
    p = kernel.p
    natural = (theta * t) ** (1.0 / p)
    r_max = quad.r_max if quad.r_max is not None else 20.0 * max(R_in, natural)
    if r_max <= R_in:
        r_max = 2.0 * R_in
    n_panel = 4
    m = max(2, quad.n_x // n_panel)
    gx, gw = np.polynomial.legendre.leggauss(m)
    edges = np.linspace(math.log(R_in), math.log(r_max), n_panel + 1)
    lr = (0.5 * (edges[1:] - edges[:-1])[:, None] * gx + 0.5 * (edges[1:] + edges[:-1])[:, None]).ravel()
    lw = (0.5 * (edges[1:] - edges[:-1])[:, None] * gw).ravel()
    r = np.exp(lr)
    dirs = _rotated_cross(rng, d)
    shell_pts = (z + r[:, None, None] * dirs[None, :, :]).reshape(-1, d)
    A_out, _ = occupation_batch(shell_pts, Y, w, kernel, caps, refine=False)
    A_out = np.atleast_2d(A_out).reshape(caps.size, r.size, dirs.shape[0])
    with np.errstate(over="ignore"):
        vals = _F(which, theta * A_out).mean(axis=2)
    outer = sphere_area(d) * (vals * (r ** d * lw)[None, :]).sum(axis=1)
    tail = static_tail(which, d, p, theta * t, r_max)
    return _PathResult(inner + outer + tail, inner, outer, tail)


def _check_b(b: Optional[PathSample], t: float, d: int, n_steps: int):
    if b is None:
        return TimeGrid(t, n_steps), None
    if abs(b.grid.t_end - t) > 1e-12 * t:
        raise ValueError(f"path b covers [0, {b.grid.t_end}], not [0, {t}]")
    if b.d != d:
        raise ValueError("path b has the wrong dimension")
    return b.grid, b.points


def _resolve_caps(kernel, quad, grid, which, theta, caps=None):
    if kernel.kind != "power":
        return np.array([0.0])
    if caps is not None:
        return np.asarray(caps, dtype=float)
    base = quad.cap_for(grid.spacing)
    if which == "Psi" and quad.singular_cap is None:
        # keep theta * dt * delta^-p <= 1 so exp(theta A) stays finite
        base = max(base, (theta * grid.spacing) ** (1.0 / kernel.p))
    return np.array([base])


def _functional(which, t, b, params, quad, n_mc, seed, kernel, workers, caps=None,
                refine=True):
    quad = quad or QuadratureSpec()
    seed = as_seed(seed)
    kernel = kernel or KernelSpec.power(params.p)
    d, theta, sigma = params.d, params.theta, params.sigma
    grid, b_pts = _check_b(b, t, d, quad.n_steps)
    w = grid.trapezoid_weights()
    cap_arr = _resolve_caps(kernel, quad, grid, which, theta, caps)
    if kernel.is_zero:
        zero = np.zeros((n_mc, cap_arr.size))
        return zero, zero, zero, np.zeros(n_mc), grid, cap_arr

    def work(block):
        res = []
        for i in block:
            s = seed.child(i)
            X = sample_brownian(grid, np.zeros(d), sigma, s, "obstacle").points
            Y = X if b_pts is None else X - b_pts
            res.append(_path_integral(Y, w, t, theta, sigma, kernel, quad, cap_arr,
                                      s.generator("spatial"), which, refine))
        return res

    results = [r for blk in map_ordered(work, chunks(n_mc, BATCH), workers) for r in blk]
    vals = np.array([r.value for r in results])
    inner = np.array([r.inner for r in results])
    outer = np.array([r.outer for r in results])
    tail = np.array([r.tail for r in results])
    return vals, inner, outer, tail, grid, cap_arr


def _bias_note(which, params, quad, grid, caps, tail, kernel):
    if kernel.kind != "power":
        return "bounded kernel: spatial integral exact up to sampling (no truncation)"
    d, p = params.d, params.p
    tt = params.theta * grid.t_end
    note = (
        f"tail beyond r_max replaced by path-free int F(theta t|x|^-p), mean size {np.mean(tail):.3g}"
        f" (<= (theta t)^2 d omega_d r_max^(d-2p)/(2(2p-d)) for psi); "
        f"singular cap delta={caps[0]:.3g} on {grid.n_steps} steps"
    )
    return note


def psi_bar(t: float, b: Optional[PathSample], params: ModelParams,
            quad: Optional[QuadratureSpec] = None, n_mc: int = 64, seed=0,
            kernel: Optional[KernelSpec] = None, workers: Optional[int] = None) -> EstimateCI:
    """Estimate ``int E psi(theta int_0^t K(x + X(s) - b(s)) ds) dx``.

    Parameters
    ----------
    t : float
        Horizon.
    b : PathSample or None
        Deterministic path on a grid over ``[0, t]``; ``None`` is ``b = 0``
        on a grid of ``quad.n_steps`` steps.
    params : ModelParams
        Uses ``d, p, theta, sigma``.
    quad : QuadratureSpec, optional
    n_mc : int
        Number of obstacle paths.
    seed : SeedSpec or int
        Obstacle path ``i`` uses ``seed.child(i)``.
    kernel : KernelSpec, optional
        Defaults to ``|y|^-p``; the coupling ``theta`` multiplies it.
    workers : int, optional
        Thread count (default from the environment).

    Returns
    -------
    EstimateCI
        ``extras`` holds ``inner``, ``outer`` and ``tail`` mean pieces.
    """
    vals, inner, outer, tail, grid, caps = _functional("psi", t, b, params, quad, n_mc,
                                                      seed, kernel, workers)
    kernel = kernel or KernelSpec.power(params.p)
    note = _bias_note("psi", params, quad or QuadratureSpec(), grid, caps, tail, kernel)
    return EstimateCI.from_samples(vals[:, 0], as_seed(seed), note,
                                   inner=float(inner[:, 0].mean()),
                                   outer=float(outer[:, 0].mean()),
                                   tail=float(tail.mean()),
                                   cap=float(caps[0]), n_steps=grid.n_steps)


def psi_bar_zero(t: float, params: ModelParams, quad: Optional[QuadratureSpec] = None,
                 n_mc: int = 64, seed=0, workers: Optional[int] = None) -> EstimateCI:
    """``psi_bar(t, 0)``: the Pascal upper bound of the exponent."""
    return psi_bar(t, None, params, quad, n_mc, seed, workers=workers)


def jensen_bound(t: float, params: ModelParams) -> float:
    """``(theta t)^(d/p) int psi(|x|^-p) dx``, an upper bound of ``psi_bar(t, .)``."""
    return (params.theta * t) ** (params.d / params.p) * psi_radial_integral(params.d, params.p)


def _psi_finiteness_check(params: ModelParams):
    reg = params.regime
    if reg is Regime.I:
        return
    if reg is Regime.II and params.theta < catalytic_threshold(params.sigma):
        return
    warnings.warn(
        f"Psi_bar is expected to be infinite for (d={params.d}, p={params.p}, "
        f"theta={params.theta}, sigma={params.sigma}); estimates depend on the cap",
        DivergenceWarning, stacklevel=3)


def convexity_far_piece(t: float, params: ModelParams, quad: Optional[QuadratureSpec] = None,
                        n_mc: int = 64, seed=0, gamma: float = 0.5,
                        workers: Optional[int] = None) -> tuple:
    """Far half of the convexity split of ``Psi_bar_t(0)`` and its Jensen bound.

    Returns ``(estimate, bound)`` where ``estimate`` is
    ``int E Psi(theta/(1-gamma) int_0^t 1{|x+X|>t^(1/p)} |x+X|^-p ds) dx``
    and ``bound`` is ``int_{|x|>=t^(1/p)} Psi(theta t/((1-gamma)|x|^p)) dx``.
    """
    d, p = params.d, params.p
    cut = t ** (1.0 / p)
    kern = replace(KernelSpec.power(p), inner_cutoff=cut)
    th = params.theta / (1 - gamma)
    sub = params.with_(theta=th)
    vals, *_ = _functional("Psi", t, None, sub, quad, n_mc, seed, kern, workers)
    est = EstimateCI.from_samples(vals[:, 0], as_seed(seed),
                                  "kernel cut at t^(1/p); same quadrature as Psi_bar")
    bound = static_tail("Psi", d, p, th * t, cut)
    return est, bound


def Psi_bar(t: float, b: Optional[PathSample], params: ModelParams,
            quad: Optional[QuadratureSpec] = None, n_mc: int = 64, seed=0,
            kernel: Optional[KernelSpec] = None, workers: Optional[int] = None,
            split_diagnostics: bool = False) -> EstimateCI:
    """Estimate ``int E Psi(theta int_0^t K(x + X(s) - b(s)) ds) dx``.

    The value is reported as a near piece (inner ball around the path) and
    a far piece (shell plus path-free tail) in ``extras``.  With
    ``split_diagnostics`` the far half of the gamma = 1/2 convexity split
    and its Jensen bound are added as ``convex_far`` / ``jensen_far``.

    Without an explicit ``quad.singular_cap`` the cap defaults to
    ``max(1e-3 sqrt(dt), (theta dt)^(1/p))`` so that a single capped step
    cannot overflow ``exp``.

    Warns
    -----
    DivergenceWarning
        When the parameters are outside the finiteness range
        (p < 2, or p = 2 with theta < sigma^2/8).
    """
    kernel = kernel or KernelSpec.power(params.p)
    if kernel.kind == "power":
        _psi_finiteness_check(params)
    vals, inner, outer, tail, grid, caps = _functional("Psi", t, b, params, quad, n_mc,
                                                      seed, kernel, workers)
    v = vals[:, 0]
    if not np.all(np.isfinite(v)):
        warnings.warn("Psi_bar overflowed on some paths; mapped to +inf", OverflowSignal,
                      stacklevel=2)
    note = _bias_note("Psi", params, quad or QuadratureSpec(), grid, caps, tail, kernel)
    est = EstimateCI.from_samples(v, as_seed(seed), note,
                                  near=float(inner[:, 0].mean()),
                                  far=float(outer[:, 0].mean() + tail.mean()),
                                  cap=float(caps[0]), n_steps=grid.n_steps)
    if split_diagnostics and kernel.kind == "power":
        far, bound = convexity_far_piece(t, params, quad, n_mc, seed, workers=workers)
        est.extras["convex_far"] = far.to_dict()
        est.extras["jensen_far"] = bound
    return est


@dataclass
class CapSweep:
    """Psi_bar estimates on common random numbers over decreasing caps."""

    caps: List[float]
    estimates: List[EstimateCI]
    increments: List[float]
    paired_stderr: List[float]
    pooled_stderr: List[float]
    verdict: str

    @property
    def increment_ratios(self) -> List[float]:
        """Successive increment ratios; below 1 means the refinements shrink."""
        inc = self.increments
        return [b / a if a != 0 else math.inf for a, b in zip(inc, inc[1:])]

    def to_dict(self) -> dict:
        return {
            "caps": list(self.caps),
            "estimates": [e.to_dict() for e in self.estimates],
            "increments": list(self.increments),
            "paired_stderr": list(self.paired_stderr),
            "pooled_stderr": list(self.pooled_stderr),
            "increment_ratios": self.increment_ratios,
            "verdict": self.verdict,
        }


def classify_trend(means, increments, paired_se, pooled_se, stab_factor: float = 2.0,
                   sig: float = 2.0) -> str:
    """``"stabilizing"``, ``"diverging"`` or ``"inconclusive"``.

    Stabilizing: every successive difference is within ``stab_factor``
    pooled standard errors.  Diverging: every increment is positive and
    significant against its paired standard error, and the increments do
    not shrink (last >= first).
    """
    inc = np.asarray(increments)
    if np.all(np.abs(inc) <= stab_factor * np.asarray(pooled_se)):
        return "stabilizing"
    if np.all(inc > sig * np.asarray(paired_se)) and inc[-1] >= inc[0]:
        return "diverging"
    return "inconclusive"


def Psi_bar_cap_sweep(t: float, params: ModelParams, caps: Sequence[float],
                      quad: Optional[QuadratureSpec] = None, n_mc: int = 1000, seed=0,
                      b: Optional[PathSample] = None, workers: Optional[int] = None,
                      near_only: bool = True) -> CapSweep:
    """Refine the singular cap on common random numbers and classify the trend.

    Parameters
    ----------
    caps : sequence of float
        Decreasing caps; all share the obstacle paths and spatial points.
    near_only : bool
        Track only the near piece (inner ball), which carries all of the
        cap dependence; the far piece is cap-independent.

    Warns
    -----
    DivergenceWarning
        When the verdict is ``"diverging"``.
    """
    caps = [float(c) for c in caps]
    if any(c2 >= c1 for c1, c2 in zip(caps, caps[1:])):
        raise ValueError("caps must decrease")
    vals, inner, *_ = _functional("Psi", t, b, params, quad, n_mc, seed,
                                  KernelSpec.power(params.p), workers, caps=caps)
    data = inner if near_only else vals
    seed = as_seed(seed)
    ests = [EstimateCI.from_samples(data[:, j], seed, f"cap {c:.4g}") for j, c in enumerate(caps)]
    diffs = np.diff(data, axis=1)
    inc = diffs.mean(axis=0)
    paired = diffs.std(axis=0, ddof=1) / math.sqrt(data.shape[0])
    pooled = [math.hypot(a.stderr, b_.stderr) for a, b_ in zip(ests, ests[1:])]
    verdict = classify_trend([e.mean for e in ests], inc, paired, pooled)
    if verdict == "diverging":
        warnings.warn("Psi_bar grows under cap refinement without stabilizing",
                      DivergenceWarning, stacklevel=2)
    return CapSweep(caps, ests, inc.tolist(), paired.tolist(), pooled, verdict)


# --- Pascal principle ----------------------------------------------------------

@dataclass
class PascalReport:
    labels: List[str]
    shifted: List[EstimateCI]
    zero: EstimateCI
    margins: List[float]
    passed: List[bool]
    moment2_passed: List[bool] = field(default_factory=list)
    which: str = "psi"

    @property
    def all_passed(self) -> bool:
        return all(self.passed) and all(self.moment2_passed)

    def to_dict(self) -> dict:
        return {
            "which": self.which,
            "labels": self.labels,
            "zero": self.zero.to_dict(),
            "shifted": [e.to_dict() for e in self.shifted],
            "margins": self.margins,
            "passed": self.passed,
            "moment2_passed": self.moment2_passed,
        }


def pascal_check(t: float, b_paths: Sequence[PathSample], params: ModelParams,
                 quad: Optional[QuadratureSpec] = None, n_mc: int = 64, seed=0,
                 labels: Optional[Sequence[str]] = None, which: str = "psi",
                 with_moment2: bool = False, n_moment: int = 20000,
                 workers: Optional[int] = None) -> PascalReport:
    """Check ``F(t, b) <= F(t, 0) + 3 combined stderr`` for each test path.

    ``F`` is :func:`psi_bar` (``which="psi"``) or :func:`Psi_bar`.  All
    evaluations share the obstacle paths (common random numbers).  The
    margin is ``F(t,0) + 3 se - F(t,b)``; failures are reported, not raised.
    """
    fn = psi_bar if which == "psi" else Psi_bar
    labels = list(labels) if labels is not None else [f"b{i}" for i in range(len(b_paths))]
    grid = b_paths[0].grid if b_paths else TimeGrid(t, (quad or QuadratureSpec()).n_steps)
    zero_path = PathSample.zero(grid, params.d)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DivergenceWarning)
        zero = fn(t, zero_path, params, quad, n_mc, seed, workers=workers)
        shifted = [fn(t, b, params, quad, n_mc, seed, workers=workers) for b in b_paths]
    margins, passed = [], []
    for est in shifted:
        margin = zero.mean + 3 * math.hypot(zero.stderr, est.stderr) - est.mean
        margins.append(margin)
        passed.append(margin >= 0)
    m2 = []
    if with_moment2:
        base = moment2_shifted(t, None, params, quad, n_moment, seed)
        for b in b_paths:
            sh = moment2_shifted(t, b, params, quad, n_moment, seed)
            m2.append(sh.mean <= base.mean + 3 * math.hypot(sh.stderr, base.stderr))
    return PascalReport(labels, shifted, zero, margins, passed, m2, which)


def standard_test_paths(t: float, d: int, n_steps: int, seed=0, n_brownian: int = 8,
                        n_lines: int = 6, n_sines: int = 6) -> tuple:
    """Frozen Brownian paths, straight lines and sinusoids from the origin."""
    grid = TimeGrid(t, n_steps)
    seed = as_seed(seed)
    paths, labels = [], []
    for i in range(n_brownian):
        paths.append(sample_brownian(grid, np.zeros(d), 1.0, seed.child(i), "test-path"))
        labels.append(f"brownian-{i}")
    rng = seed.generator("test-path-shapes")
    for i in range(n_lines):
        v = rng.standard_normal(d)
        v *= (0.25 * (i + 1)) / np.linalg.norm(v)
        paths.append(PathSample.from_function(grid, lambda s, v=v: v * s, d))
        labels.append(f"line-speed-{np.linalg.norm(v):.2f}")
    for i in range(n_sines):
        a = rng.standard_normal(d)
        a *= 0.3 * (i + 1) / np.linalg.norm(a)
        omega = 2 * math.pi * (i + 1) / t
        paths.append(PathSample.from_function(grid, lambda s, a=a, om=omega: a * math.sin(om * s), d))
        labels.append(f"sine-{i + 1}")
    return paths, labels


# --- second moment -----------------------------------------------------------

def moment2_shifted(t: float, b: Optional[PathSample], params: ModelParams,
                    quad: Optional[QuadratureSpec] = None, n: int = 20000,
                    seed=0) -> EstimateCI:
    """``int E[int_0^t |x+X(s)-b(s)|^-p ds]^2 dx`` by increment sampling.

    The convolution identity reduces the value to
    ``C(d,p) E int int |X(r)-X(s)-(b(r)-b(s))|^-(2p-d) dr ds``.  The lag
    ``u = |r-s|`` is drawn from the density proportional to
    ``(t-u) u^(-(2p-d)/2)`` (a scaled Beta law), the start uniformly, and
    the Brownian increment exactly; ``b`` is interpolated linearly.

    ``extras["pair_mean"]`` is the double time integral before the
    ``C(d,p)`` factor.
    """
    d, p, sigma = params.d, params.p, params.sigma
    alpha = 2 * p - d
    a = alpha / 2
    if not 0 < a < 1:
        raise RegimeError("need 0 < 2p-d < 2 for the second moment")
    rng = as_seed(seed).generator("moment2")
    u = t * rng.beta(1 - a, 2.0, size=n)
    s = (t - u) * rng.random(n)
    U = rng.standard_normal((n, d))
    Z2 = 2 * t ** (2 - a) / ((1 - a) * (2 - a))  # int int |r-s|^-a
    inc = sigma * np.sqrt(u)[:, None] * U
    if b is not None:
        if abs(b.grid.t_end - t) > 1e-12 * t:
            raise ValueError("b must cover [0, t]")
        times = b.grid.times
        bs = np.stack([np.interp(s, times, b.points[:, j]) for j in range(d)], axis=1)
        br = np.stack([np.interp(s + u, times, b.points[:, j]) for j in range(d)], axis=1)
        inc = inc - (br - bs)
    vals = Z2 * u ** a * np.linalg.norm(inc, axis=1) ** -alpha
    pair = EstimateCI.from_samples(vals, as_seed(seed))
    C = convolution_constant(d, p)
    note = "unbiased; variance finite iff 2(2p-d) < d"
    return EstimateCI(C * pair.mean, C * pair.stderr, n, as_seed(seed), note,
                      {"pair_mean": pair.mean, "pair_stderr": pair.stderr, "C": C})


def moment2_closed_form(t: float, params: ModelParams) -> float:
    """``C(d,p) sigma^-(2p-d) E|U|^-(2p-d) int int |r-s|^-(2p-d)/2``, b = 0."""
    d, p, s = params.d, params.p, params.sigma
    alpha = 2 * p - d
    return (convolution_constant(d, p) * s ** -alpha * gaussian_inverse_moment(d, alpha)
            * time_pair_integral(alpha / 2, t))


def pair_moment_closed_form(t: float, d: int, alpha: float, sigma: float = 1.0) -> float:
    """``E int int |X(r)-X(s)|^-alpha dr ds`` for sigma-Brownian X in R^d."""
    return sigma ** -alpha * gaussian_inverse_moment(d, alpha) * time_pair_integral(alpha / 2, t)


# --- exponential moment --------------------------------------------------------

def _log_mean_exp(v: np.ndarray) -> tuple[float, float]:
    """``log mean exp(v)`` and its delta-method standard error."""
    v = np.asarray(v, dtype=float)
    m = v.max()
    if not np.isfinite(m):
        return math.inf, math.nan
    e = np.exp(v - m)
    mu = e.mean()
    se = e.std(ddof=1) / math.sqrt(v.size) / mu if v.size > 1 else math.nan
    return float(m + math.log(mu)), float(se)


def _jackknife_log_exp(samples: np.ndarray) -> float:
    """Jackknife-corrected ``log exp(mean(samples))``.

    Falls back to the plain plug-in value when the correction factor is
    not positive (inner noise too large).
    """
    n = samples.size
    m = samples.mean()
    if n < 2:
        return float(m)
    loo = (n * m - samples) / (n - 1)
    factor = n - (n - 1) * np.mean(np.exp(loo - m))
    if factor <= 0:
        return float(m)
    return float(m + math.log(factor))


def identity_log_samples(t: float, params: ModelParams, n_outer: int, n_mc: int,
                         quad: Optional[QuadratureSpec] = None, seed=0, which: str = "psi",
                         kernel: Optional[KernelSpec] = None,
                         workers: Optional[int] = None) -> tuple:
    """Per-particle-path exponents for the moment identity.

    Returns ``(logs, raw)``: jackknife-corrected logs of ``exp(F_t(B_j))``
    and the plain inner means ``F_t(B_j)``, for ``F`` = psi_bar or Psi_bar
    and ``B_j`` Brownian with diffusivity ``kappa`` (variance ``2 kappa t``
    per coordinate).  Particle path ``j`` uses ``seed.child(1).child(j)``
    and its obstacle paths ``seed.child(2).child(j)``.
    """
    quad = quad or QuadratureSpec()
    seed = as_seed(seed)
    kernel = kernel or KernelSpec.power(params.p)
    grid = TimeGrid(t, quad.n_steps)
    vol_B = math.sqrt(2 * params.kappa)
    outer_seed = seed.child(1)
    inner_seed = seed.child(2)
    logs = np.empty(n_outer)
    raw = np.empty(n_outer)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DivergenceWarning)
        for j in range(n_outer):
            B = sample_brownian(grid, np.zeros(params.d), vol_B, outer_seed.child(j), "particle")
            vals, *_ = _functional(which, t, B, params, quad, n_mc, inner_seed.child(j),
                                   kernel, workers)
            v = vals[:, 0]
            raw[j] = v.mean()
            logs[j] = _jackknife_log_exp(v)
    return logs, raw


def exponential_moment_via_identity(t: float, params: ModelParams, n_outer: int = 256,
                                    n_mc: int = 64, quad: Optional[QuadratureSpec] = None,
                                    seed=0, sign: str = "negative",
                                    kernel: Optional[KernelSpec] = None,
                                    workers: Optional[int] = None) -> EstimateCI:
    """``log E exp(-+ theta int V_bar(s, B_s) ds)`` through the moment identity.

    For each of ``n_outer`` particle paths ``B`` (diffusivity ``kappa``)
    the exponent ``psi_bar_t(B)`` (or ``Psi_bar_t(B)`` for
    ``sign="positive"``) is estimated from ``n_mc`` obstacle paths and
    exponentiated with a jackknife bias correction; the log is taken after
    averaging over ``B``.  The Pascal bound ``psi_bar(t, 0)`` (same inner
    budget) is reported in ``extras["pascal_bound"]``.

    Returns
    -------
    EstimateCI
        ``mean`` is the log moment; ``stderr`` its delta-method error.
    """
    if sign not in ("negative", "positive"):
        raise ValueError("sign must be 'negative' or 'positive'")
    quad = quad or QuadratureSpec()
    seed = as_seed(seed)
    kernel = kernel or KernelSpec.power(params.p)
    which = "psi" if sign == "negative" else "Psi"
    if which == "Psi" and kernel.kind == "power":
        _psi_finiteness_check(params)
    logs, raw = identity_log_samples(t, params, n_outer, n_mc, quad, seed, which, kernel,
                                     workers)
    est, se = _log_mean_exp(logs)
    if not math.isfinite(est):
        warnings.warn("exponential moment overflowed; reported as +inf", OverflowSignal,
                      stacklevel=2)
    pascal = None
    if which == "psi":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DivergenceWarning)
            pz = psi_bar(t, None, params, quad, n_mc, seed.child(3), kernel,
                         workers)
        pascal = pz.to_dict()
    note = "jackknife-corrected exp of inner means; log after averaging over B"
    return EstimateCI(est, se, n_outer, seed, note,
                      {"pascal_bound": pascal, "plugin_log": _log_mean_exp(raw)[0],
                       "exponent_mean": float(raw.mean())})
