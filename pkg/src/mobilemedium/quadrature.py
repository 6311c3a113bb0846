"""Quadrature settings shared by the spatial integrators."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

SCHEMES = ("radial-MC hybrid", "full MC", "product quadrature")


@dataclass(frozen=True)
class QuadratureSpec:
    """Knobs for the spatial and time integrals.

    Parameters
    ----------
    spatial_scheme : str
        One of ``"radial-MC hybrid"`` (default), ``"full MC"`` or
        ``"product quadrature"``.
    n_x : int
        Number of radial Gauss-Legendre nodes per path (hybrid scheme) or
        spatial samples per path (full MC).
    r_max : float, optional
        Outer truncation radius.  ``None`` picks the smallest radius whose
        quadratic tail bound is below ``abs_tol``.
    singular_cap : float, optional
        Distance ``delta`` at which the kernel is capped at ``delta**-p``.
        ``None`` means ``1e-3 * sqrt(dt)``.
    abs_tol, rel_tol : float
        Tolerances for adaptive quadrature and tail truncation.
    n_steps : int
        Time steps of the path grid on ``[0, t]``.
    n_dirs : int
        Random directions per obstacle path (hybrid scheme); used in
        antithetic pairs so it should be even.
    """

    spatial_scheme: str = "radial-MC hybrid"
    n_x: int = 48
    r_max: Optional[float] = None
    singular_cap: Optional[float] = None
    abs_tol: float = 1e-6
    rel_tol: float = 1e-6
    n_steps: int = 256
    n_dirs: int = 2

    def __post_init__(self):
        if self.spatial_scheme not in SCHEMES:
            raise ValueError(f"unknown spatial_scheme {self.spatial_scheme!r}")
        if self.r_max is not None and not self.r_max > 0:
            raise ValueError("r_max must be positive")
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.singular_cap is not None and not self.singular_cap > 0:
            raise ValueError("singular_cap must be positive")
        if self.n_x < 1 or self.n_steps < 1 or self.n_dirs < 1:
            raise ValueError("node counts must be positive")

    def cap_for(self, dt: float) -> float:
        """Resolved singular cap for time step ``dt``."""
        if self.singular_cap is not None:
            return float(self.singular_cap)
        return 1e-3 * dt ** 0.5

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "QuadratureSpec":
        return cls(**data)
