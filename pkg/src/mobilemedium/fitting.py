"""Least-squares fits of growth laws in t."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .exceptions import FitDegenerateError, RegimeError
from .params import ModelParams, Regime

MODELS = ("power", "power-log")


@dataclass
class FitResult:
    """``a * t^alpha`` (power) or ``a * t log t`` (power-log)."""

    model: str
    prefactor: float
    exponent: Optional[float]
    r_squared: float
    residuals: List[float]
    t: List[float] = field(default_factory=list)
    y: List[float] = field(default_factory=list)
    theory_exponent: Optional[float] = None
    theory_prefactor: Optional[float] = None

    def predict(self, t):
        t = np.asarray(t, dtype=float)
        if self.model == "power":
            return self.prefactor * t ** self.exponent
        return self.prefactor * t * np.log(t)

    @property
    def exponent_deviation(self) -> Optional[float]:
        if self.exponent is None or self.theory_exponent is None:
            return None
        return self.exponent / self.theory_exponent - 1

    @property
    def prefactor_deviation(self) -> Optional[float]:
        if self.theory_prefactor is None:
            return None
        return self.prefactor / self.theory_prefactor - 1

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "prefactor": self.prefactor,
            "exponent": self.exponent,
            "r_squared": self.r_squared,
            "residuals": list(self.residuals),
            "t": list(self.t),
            "y": list(self.y),
            "theory_exponent": self.theory_exponent,
            "theory_prefactor": self.theory_prefactor,
        }


def _arrays(t, y, min_points):
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise FitDegenerateError("t and y must be matching 1-D sequences")
    if t.size < min_points:
        raise FitDegenerateError(f"need at least {min_points} points, got {t.size}")
    if np.any(t <= 0) or np.any(y <= 0):
        raise FitDegenerateError("t and y must be positive")
    if np.unique(t).size < 2:
        raise FitDegenerateError("need at least two distinct times")
    return t, y


def fit_power(t: Sequence[float], y: Sequence[float], min_points: int = 2) -> FitResult:
    """Ordinary least squares of ``log y`` on ``log t``; r^2 in log space."""
    t, y = _arrays(t, y, min_points)
    lt, ly = np.log(t), np.log(y)
    alpha, loga = np.polyfit(lt, ly, 1)
    res = ly - (loga + alpha * lt)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(res ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return FitResult("power", float(math.exp(loga)), float(alpha), min(max(r2, 0.0), 1.0),
                     res.tolist(), t.tolist(), y.tolist())


def fit_power_log(t: Sequence[float], y: Sequence[float], min_points: int = 2) -> FitResult:
    """Prefactor as the mean of ``y / (t log t)``; needs ``t > 1``."""
    t, y = _arrays(t, y, min_points)
    if np.any(t <= 1):
        raise FitDegenerateError("power-log fit needs t > 1")
    ratio = y / (t * np.log(t))
    a = float(ratio.mean())
    fitted = a * t * np.log(t)
    res = y - fitted
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(res ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return FitResult("power-log", a, None, min(max(r2, 0.0), 1.0), res.tolist(),
                     t.tolist(), y.tolist())


def theory_exponent(params: ModelParams) -> Optional[float]:
    """Growth exponent of the log negative moment; ``None`` for the t log t regime."""
    d, p = params.d, params.p
    reg = params.regime
    return {
        Regime.I: d / p,
        Regime.II: 1.5,
        Regime.III: (4 + d - 2 * p) / 2,
        Regime.IV: None,
        Regime.V: 1.0,
    }[reg]


def fit_scaling(t: Sequence[float], y: Sequence[float], params: ModelParams,
                model: Optional[str] = None, min_points: int = 4,
                min_decades: float = 2.0, allow_power_in_iv: bool = False) -> FitResult:
    """Fit the model appropriate to the regime of ``params``.

    Regime IV defaults to power-log, and a pure power fit there is refused
    unless ``allow_power_in_iv`` is set.

    Raises
    ------
    FitDegenerateError
        Fewer than ``min_points`` points or a span under ``min_decades``.
    RegimeError
        Pure power requested in Regime IV without the override.
    """
    t_arr, _ = _arrays(t, y, min_points)
    span = math.log10(t_arr.max() / t_arr.min())
    if span < min_decades - 1e-12:
        raise FitDegenerateError(f"times span {span:.2f} decades, need {min_decades}")
    reg = params.regime
    if model is None:
        model = "power-log" if reg is Regime.IV else "power"
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}")
    if model == "power" and reg is Regime.IV and not allow_power_in_iv:
        raise RegimeError("Regime IV grows like t log t; refusing a pure power fit")
    fit = fit_power(t, y, min_points) if model == "power" else fit_power_log(t, y, min_points)
    fit.theory_exponent = theory_exponent(params) if model == "power" else None
    return fit
