"""Model parameters, regime classification and the diffusivity rescaling."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Mapping

from .exceptions import DimensionError, PositivityError, ShapeExponentError

#: relative tolerance for the p = 2 and p = (d+2)/2 boundary tests
EPS_REGIME = 1e-9
D_MAX = 8


class Regime(str, Enum):
    I = "I"
    II = "II"
    III = "III"
    IV = "IV"
    V = "V"

    @property
    def scale(self) -> str:
        """Human-readable growth scale of the log negative moment."""
        return {
            "I": "t^(d/p)",
            "II": "t^(3/2)",
            "III": "t^((4+d-2p)/2)",
            "IV": "t log t",
            "V": "t",
        }[self.value]


@dataclass(frozen=True)
class ModelParams:
    """Full parameterization of the mobile Poisson medium model.

    ``sigma`` is the obstacle volatility (``Var X(1) = sigma**2`` per
    coordinate), ``kappa`` the particle diffusivity.
    """

    d: int
    p: float
    theta: float
    sigma: float
    t: float = 1.0
    kappa: float = 0.5

    def __post_init__(self):
        d, p = _check_dp(self.d, self.p)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "p", p)
        for name in ("theta", "sigma", "t", "kappa"):
            object.__setattr__(self, name, _positive(name, getattr(self, name)))

    @property
    def regime(self) -> Regime:
        return classify_regime(self.d, self.p)

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "p": self.p,
            "theta": self.theta,
            "sigma": self.sigma,
            "t": self.t,
            "kappa": self.kappa,
        }

    def with_(self, **changes) -> "ModelParams":
        return validate({**self.to_dict(), **changes})


def _positive(name: str, value: Any) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise PositivityError(f"{name} must be a real number, got {value!r}") from None
    if not math.isfinite(v) or v <= 0:
        raise PositivityError(f"{name} must be positive and finite, got {value!r}")
    return v


def _check_dp(d: Any, p: Any) -> tuple[int, float]:
    if isinstance(d, bool) or not isinstance(d, (int, float)) or float(d) != int(d):
        raise DimensionError(f"d must be an integer, got {d!r}")
    d = int(d)
    if not 1 <= d <= D_MAX:
        raise DimensionError(f"d must satisfy 1 <= d <= {D_MAX}, got {d}")
    try:
        p = float(p)
    except (TypeError, ValueError):
        raise ShapeExponentError(f"p must be a real number, got {p!r}") from None
    if not (d / 2 < p < d):
        raise ShapeExponentError(f"p must satisfy d/2 < p < d; got d={d}, p={p}")
    return d, p


def validate(raw: Mapping[str, Any] | ModelParams) -> ModelParams:
    """Validate a raw parameter record.

    Raises a subclass of :class:`~mobilemedium.exceptions.ParameterError`
    naming the violated invariant.
    """
    if isinstance(raw, ModelParams):
        raw = raw.to_dict()
    if "d" not in raw:
        raise DimensionError("missing d")
    if "p" not in raw:
        raise ShapeExponentError("missing p")
    return ModelParams(
        d=raw["d"],
        p=raw["p"],
        theta=raw.get("theta", 1.0),
        sigma=raw.get("sigma", 1.0),
        t=raw.get("t", 1.0),
        kappa=raw.get("kappa", 0.5),
    )


def _near(a: float, b: float) -> bool:
    return abs(a - b) <= EPS_REGIME * max(1.0, abs(b))


def classify_regime(d: int, p: float) -> Regime:
    """Return the regime tag of ``(d, p)``.

    Values of ``p`` within ``EPS_REGIME`` of 2 or of (d+2)/2 are assigned
    to the boundary regime (II or IV).
    """
    d, p = _check_dp(d, p)
    crit = (d + 2) / 2
    if _near(p, 2.0):
        return Regime.II
    if p < 2:
        return Regime.I
    if _near(p, crit):
        return Regime.IV
    if p < crit:
        return Regime.III
    return Regime.V


def canonicalize(params: ModelParams) -> ModelParams:
    """Rescale to unit-half diffusivity.

    theta -> theta/(2 kappa), sigma^2 -> sigma^2/(2 kappa), t -> 2 kappa t.
    """
    k2 = 2.0 * params.kappa
    if k2 == 1.0:
        return params
    return replace(
        params,
        theta=params.theta / k2,
        sigma=params.sigma / math.sqrt(k2),
        t=params.t * k2,
        kappa=0.5,
    )
