"""Closed-form special functions and regime constants.

Everything here is a pure function of its arguments.  Gamma values come
from :func:`math.gamma` (correctly rounded to a few ulp), which is more
than enough for the 1e-6 cross-checks the constants are used for.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy import integrate

from .exceptions import ConvergenceError, DomainError, OverflowSignal, RegimeError
from .params import D_MAX, ModelParams, Regime, classify_regime

_SERIES_CUT = 1e-4

ArrayLike = Union[float, Sequence[float], np.ndarray]


def _as_nonneg(a: ArrayLike, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise DomainError(f"{name} is defined for a >= 0 only")
    return arr


def _ret(arr: np.ndarray, like):
    return float(arr) if np.ndim(like) == 0 else arr


def psi(a: ArrayLike):
    """``exp(-a) - 1 + a`` for ``a >= 0``, cancellation-free near 0."""
    arr = _as_nonneg(a, "psi")
    out = np.empty_like(arr)
    small = arr < _SERIES_CUT
    s = arr[small]
    out[small] = s * s * (0.5 - s * (1.0 / 6 - s * (1.0 / 24 - s / 120)))
    big = arr[~small]
    out[~small] = np.expm1(-big) + big
    return _ret(out, a)


def Psi_big(a: ArrayLike):
    """``exp(a) - 1 - a`` for ``a >= 0``; returns ``inf`` past the float range."""
    arr = _as_nonneg(a, "Psi")
    out = np.empty_like(arr)
    small = arr < _SERIES_CUT
    s = arr[small]
    out[small] = s * s * (0.5 + s * (1.0 / 6 + s * (1.0 / 24 + s / 120)))
    big = arr[~small]
    with np.errstate(over="ignore"):
        out[~small] = np.expm1(big) - big
    if np.isinf(out).any():
        warnings.warn("Psi overflow, returning +inf", OverflowSignal, stacklevel=2)
    return _ret(out, a)


def _check_d(d: int) -> int:
    if isinstance(d, bool) or int(d) != d or not 1 <= d <= D_MAX:
        raise DomainError(f"dimension must be an integer in [1, {D_MAX}], got {d!r}")
    return int(d)


def _check_dp(d: int, p: float) -> tuple[int, float]:
    d = _check_d(d)
    p = float(p)
    if not d / 2 < p < d:
        raise DomainError(f"need d/2 < p < d, got d={d}, p={p}")
    return d, p


def unit_ball_volume(d: int) -> float:
    """Volume of the unit ball in R^d."""
    d = _check_d(d)
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def sphere_area(d: int) -> float:
    """Surface area ``d * omega_d`` of the unit sphere in R^d."""
    return d * unit_ball_volume(d)


def psi_radial_integral(d: int, p: float) -> float:
    """Closed form of the integral of ``psi(|x|^-p)`` over R^d."""
    d, p = _check_dp(d, p)
    return unit_ball_volume(d) * p / (d - p) * math.gamma((2 * p - d) / p)


def psi_radial_quadrature(d: int, p: float, epsrel: float = 1e-11) -> float:
    """Adaptive-quadrature value of the integral of ``psi(|x|^-p)`` over R^d.

    Independent of :func:`psi_radial_integral`.  With ``u = r**-p`` the radial
    integral becomes ``(1/p) * int_0^inf psi(u) u^(-d/p-1) du``; both halves
    carry an algebraic endpoint singularity that QUADPACK's ``alg`` weight
    absorbs exactly.
    """
    d, p = _check_dp(d, p)
    q = d / p
    # [0, 1]: psi(u)/u^2 is smooth, weight u^(1-q)
    lo, e1 = integrate.quad(
        lambda u: psi(u) / (u * u) if u > 0 else 0.5,
        0.0, 1.0, weight="alg", wvar=(1.0 - q, 0.0), epsabs=0, epsrel=epsrel, limit=200,
    )
    # [1, inf) with u = 1/v: smooth factor (1 - v + v e^{-1/v}), weight v^(q-2)
    hi, e2 = integrate.quad(
        lambda v: 1.0 - v + (v * math.exp(-1.0 / v) if v > 0 else 0.0),
        0.0, 1.0, weight="alg", wvar=(q - 2.0, 0.0), epsabs=0, epsrel=epsrel, limit=200,
    )
    total = sphere_area(d) * (lo + hi) / p
    if e1 + e2 > 1e-8 * abs(lo + hi):
        raise ConvergenceError(f"radial quadrature error {e1 + e2:.3g} too large")
    return total


def _require(d: int, p: float, *regimes: Regime) -> Regime:
    reg = classify_regime(d, p)
    if reg not in regimes:
        names = "/".join(r.value for r in regimes)
        raise RegimeError(f"(d={d}, p={p}) is in regime {reg.value}, not {names}")
    return reg


def rho1(d: int, p: float, theta: float) -> float:
    """Regime I constant ``theta^(d/p) * int psi(|x|^-p) dx``."""
    _require(d, p, Regime.I)
    return theta ** (d / p) * psi_radial_integral(d, p)


def rho2_upper_bound(theta: float) -> float:
    """Upper bound ``(8/3) pi^(3/2) theta^(3/2)`` for the Regime II constant."""
    if theta <= 0:
        raise DomainError("theta must be positive")
    return 8.0 / 3.0 * math.pi ** 1.5 * theta ** 1.5


def rho3(d: int, p: float, theta: float, sigma: float) -> float:
    """Regime III constant (second-moment dominated)."""
    _require(d, p, Regime.III)
    g = math.gamma
    head = 2 ** ((2 + d - 2 * p) / 2) * theta ** 2 * sphere_area(d)
    den = (2 + d - 2 * p) * (4 + d - 2 * p) * sigma ** (2 * p - d)
    gam = g((d - p) / 2) ** 2 * g((2 * p - d) / 2) / g(p / 2) ** 2
    return head / den * gam


def rho4(d: int, theta: float, sigma: float) -> float:
    """Regime IV constant, p = (d+2)/2 with d >= 3."""
    p = (d + 2) / 2
    _require(d, p, Regime.IV)
    return 2 ** ((d + 4) / 2) * sphere_area(d) * (theta / ((d - 2) * sigma)) ** 2


def regime4_second_moment_coefficient(d: int, theta: float, sigma: float) -> float:
    """``theta^2 sigma^-2 Q(0+)`` at p = (d+2)/2.

    This is the t log t coefficient that the second-moment bound actually
    produces; it equals ``4 d omega_d theta^2 / ((d-2) sigma)^2``, i.e.
    ``rho4 * 2^(-d/2)``.
    """
    p = (d + 2) / 2
    _require(d, p, Regime.IV)
    return theta ** 2 / sigma ** 2 * q_limit_zero(d, p)


def convolution_constant(d: int, p: float) -> float:
    """C(d,p) with  int |x-y|^-p |x-z|^-p dx = C(d,p) |y-z|^-(2p-d)."""
    d, p = _check_dp(d, p)
    g = math.gamma
    return (
        math.pi ** (d / 2)
        * g((d - p) / 2) ** 2
        * g((2 * p - d) / 2)
        / (g(p / 2) ** 2 * g(d - p))
    )


def gaussian_inverse_moment(d: int, a: float) -> float:
    """``E |U|^-a`` for ``U ~ N(0, I_d)``, ``0 <= a < d``."""
    d = _check_d(d)
    if not 0 <= a < d:
        raise DomainError(f"E|U|^-a is finite only for 0 <= a < d, got a={a}")
    return 2 ** (-a / 2) * math.gamma((d - a) / 2) / math.gamma(d / 2)


def q_limit_zero(d: int, p: float) -> float:
    """``lim_{b->0+} Q(b) = C(d,p) E|U|^-(2p-d)``."""
    d, p = _check_dp(d, p)
    return convolution_constant(d, p) * gaussian_inverse_moment(d, 2 * p - d)


def q_limit_infinity(d: int, p: float) -> float:
    """``lim_{b->inf} b^(2p-d) Q(b) = d omega_d / (2p-d)``."""
    d, p = _check_dp(d, p)
    return sphere_area(d) / (2 * p - d)


def time_pair_integral(a: float, t: float = 1.0) -> float:
    """``int_0^t int_0^t |r-s|^-a dr ds`` for ``a < 1``."""
    if a >= 1:
        raise DomainError("double time integral diverges for a >= 1")
    return 2 * t ** (2 - a) / ((1 - a) * (2 - a))


def catalytic_rate(d: int, p: float, theta: float, sigma: float, gamma_dp: float) -> float:
    """Double-exponential growth rate of the positive moment for p < 2."""
    d, p = _check_dp(d, p)
    if not p < 2:
        raise RegimeError("catalytic rate is defined for p < 2 only")
    if gamma_dp <= 0:
        raise DomainError("gamma_dp must be positive")
    return (2 - p) / 2 * (p / sigma ** 2) ** (p / (2 - p)) * (theta * gamma_dp) ** (2 / (2 - p))


def catalytic_threshold(sigma: float, kappa: Optional[float] = None) -> float:
    """Critical coupling at d=3, p=2: sigma^2/8, or sigma^2/(16 kappa)."""
    if sigma <= 0:
        raise DomainError("sigma must be positive")
    if kappa is None:
        return sigma ** 2 / 8
    return sigma ** 2 / (16 * kappa)


def rho5_bounds(d, p, theta, sigma, C1_estimate=None, quad=None):
    """Interval bounds for the Regime V constant; see :mod:`.twopoint`."""
    from .twopoint import rho5_bounds as _impl

    return _impl(d, p, theta, sigma, C1_estimate=C1_estimate, quad=quad)


@dataclass
class ConstantsReport:
    regime: Regime
    value: Union[float, tuple]
    formula_id: str
    inputs: dict = field(default_factory=dict)
    scale: str = ""
    notes: list = field(default_factory=list)

    @property
    def is_interval(self) -> bool:
        return isinstance(self.value, tuple)

    def to_dict(self) -> dict:
        out = {
            "regime": self.regime.value,
            "formula_id": self.formula_id,
            "inputs": dict(self.inputs),
            "scale": self.scale,
        }
        if self.is_interval:
            out["value"] = [self.value[0], self.value[1]]
        else:
            out["value"] = self.value
        if self.notes:
            out["notes"] = list(self.notes)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ConstantsReport":
        value = data["value"]
        if isinstance(value, list):
            value = (value[0], value[1])
        return cls(
            regime=Regime(data["regime"]),
            value=value,
            formula_id=data["formula_id"],
            inputs=dict(data.get("inputs", {})),
            scale=data.get("scale", ""),
            notes=list(data.get("notes", [])),
        )


def constants_report(params: ModelParams, C1_estimate=None, quad=None) -> ConstantsReport:
    """The regime constant (or bounds) applicable to ``params``."""
    d, p, th, sg = params.d, params.p, params.theta, params.sigma
    reg = classify_regime(d, p)
    inputs = {"d": d, "p": p, "theta": th, "sigma": sg}
    notes = []
    if reg is Regime.I:
        rep = ConstantsReport(reg, rho1(d, p, th), "rho1", inputs)
    elif reg is Regime.II:
        rep = ConstantsReport(reg, (0.0, rho2_upper_bound(th)), "rho2_upper_bound", inputs)
        notes.append(f"catalytic threshold sigma^2/8 = {catalytic_threshold(sg):.6g}")
    elif reg is Regime.III:
        rep = ConstantsReport(reg, rho3(d, p, th, sg), "rho3", inputs)
    elif reg is Regime.IV:
        rep = ConstantsReport(reg, rho4(d, th, sg), "rho4", inputs)
    else:
        lo, hi = rho5_bounds(d, p, th, sg, C1_estimate=C1_estimate, quad=quad)
        rep = ConstantsReport(reg, (lo, hi), "rho5_bounds", inputs)
        if C1_estimate is None:
            notes.append("lower end unestimated")
    rep.scale = reg.scale
    rep.notes = notes
    return rep
