"""Seeded generation of Brownian paths and Poisson obstacle clouds.

Every draw is a pure function of its inputs and a :class:`SeedSpec`.  A
generator for a given purpose is derived from
``(master_seed, stream_id, *sub, crc32(tag))`` through
:class:`numpy.random.SeedSequence` and the counter-based Philox bit
generator, so results never depend on how work is split across threads.
"""
from __future__ import annotations

import math
import struct
import zlib
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, List, Optional, Sequence

import numpy as np

from .special import unit_ball_volume


@dataclass(frozen=True)
class SeedSpec:
    """Address of an independent random stream.

    ``sub`` extends the address for nested work items (for example one
    inner batch of one outer path) without colliding with other streams.
    """

    master_seed: int = 0
    stream_id: int = 0
    sub: tuple = ()

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < 2 ** 64:
            raise ValueError("master_seed must fit in 64 unsigned bits")
        if int(self.stream_id) < 0:
            raise ValueError("stream_id must be non-negative")
        object.__setattr__(self, "master_seed", int(self.master_seed))
        object.__setattr__(self, "stream_id", int(self.stream_id))
        object.__setattr__(self, "sub", tuple(int(s) for s in self.sub))

    def child(self, index: int) -> "SeedSpec":
        return SeedSpec(self.master_seed, self.stream_id, self.sub + (int(index),))

    def stream(self, stream_id: int) -> "SeedSpec":
        return SeedSpec(self.master_seed, int(stream_id))

    def generator(self, tag: str = "") -> np.random.Generator:
        key = (self.stream_id,) + self.sub + (zlib.crc32(tag.encode()),)
        ss = np.random.SeedSequence(entropy=self.master_seed, spawn_key=key)
        return np.random.Generator(np.random.Philox(ss))

    def to_dict(self) -> dict:
        return {"master_seed": self.master_seed, "stream_id": self.stream_id, "sub": list(self.sub)}

    @classmethod
    def from_dict(cls, data: dict) -> "SeedSpec":
        return cls(data["master_seed"], data.get("stream_id", 0), tuple(data.get("sub", ())))


def as_seed(seed) -> SeedSpec:
    """Accept an int, a SeedSpec or None (seed 0)."""
    if seed is None:
        return SeedSpec(0)
    if isinstance(seed, SeedSpec):
        return seed
    return SeedSpec(int(seed))


@dataclass(frozen=True)
class TimeGrid:
    t_end: float
    n_steps: int

    def __post_init__(self):
        if not (self.t_end > 0 and math.isfinite(self.t_end)):
            raise ValueError("t_end must be positive and finite")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError("n_steps must be a positive integer")
        object.__setattr__(self, "n_steps", int(self.n_steps))
        object.__setattr__(self, "t_end", float(self.t_end))

    @property
    def spacing(self) -> float:
        return self.t_end / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, self.n_steps + 1)

    def trapezoid_weights(self) -> np.ndarray:
        w = np.full(self.n_steps + 1, self.spacing)
        w[0] = w[-1] = self.spacing / 2
        return w


@dataclass
class PathSample:
    """Positions of a trajectory at every grid time, shape ``(n_steps+1, d)``."""

    grid: TimeGrid
    points: np.ndarray
    volatility: float = 1.0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.shape[0] != self.grid.n_steps + 1:
            raise ValueError("points must have n_steps+1 rows")
        self.points = pts

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @classmethod
    def zero(cls, grid: TimeGrid, d: int) -> "PathSample":
        return cls(grid, np.zeros((grid.n_steps + 1, d)), 0.0)

    @classmethod
    def from_function(cls, grid: TimeGrid, fn, d: int) -> "PathSample":
        """Deterministic path ``s -> fn(s)`` sampled on ``grid``."""
        pts = np.array([np.broadcast_to(np.asarray(fn(s), float), (d,)) for s in grid.times])
        return cls(grid, pts, 0.0)

    def scaled(self, space: float, time: float) -> "PathSample":
        """Same path with positions times ``space`` on a grid stretched by ``time``."""
        return PathSample(TimeGrid(self.grid.t_end * time, self.grid.n_steps),
                          self.points * space, self.volatility)

    def __sub__(self, other: "PathSample") -> "PathSample":
        if other.grid != self.grid:
            raise ValueError("paths live on different grids")
        return PathSample(self.grid, self.points - other.points, self.volatility)


@dataclass
class PoissonCloud:
    radius: float
    centers: np.ndarray = field(default_factory=lambda: np.zeros((0, 1)))

    @property
    def d(self) -> int:
        return self.centers.shape[1]

    def __len__(self) -> int:
        return self.centers.shape[0]


def brownian_increments(rng: np.random.Generator, n_steps: int, d: int, size: Optional[int] = None):
    """Standard normal increments, shape ``(n_steps, d)`` or ``(size, n_steps, d)``."""
    shape = (n_steps, d) if size is None else (size, n_steps, d)
    return rng.standard_normal(shape)


def sample_brownian(grid: TimeGrid, start, volatility: float, seed,
                    tag: str = "brownian") -> PathSample:
    """Gaussian random walk with per-step variance ``volatility**2 * dt``.

    Parameters
    ----------
    grid : TimeGrid
    start : array_like
        Starting point; its length sets the dimension.
    volatility : float
        Must be positive (zero is accepted to get a constant path).
    seed : SeedSpec or int
    tag : str
        Purpose tag mixed into the stream address.
    """
    if volatility < 0:
        raise ValueError("volatility must be non-negative")
    start = np.atleast_1d(np.asarray(start, dtype=float))
    d = start.size
    rng = as_seed(seed).generator(tag)
    steps = brownian_increments(rng, grid.n_steps, d) * (volatility * math.sqrt(grid.spacing))
    pts = np.empty((grid.n_steps + 1, d))
    pts[0] = start
    np.cumsum(steps, axis=0, out=pts[1:])
    pts[1:] += start
    return PathSample(grid, pts, volatility)


def sample_brownian_batch(grid: TimeGrid, d: int, n: int, volatility: float, seed,
                          tag: str = "brownian") -> np.ndarray:
    """``n`` independent paths from the origin, shape ``(n, n_steps+1, d)``.

    Path ``i`` equals ``sample_brownian(grid, 0, volatility, seed.child(i), tag)``.
    """
    seed = as_seed(seed)
    out = np.zeros((n, grid.n_steps + 1, d))
    for i in range(n):
        out[i] = sample_brownian(grid, np.zeros(d), volatility, seed.child(i), tag).points
    return out


def sample_cloud(d: int, radius: float, seed, tag: str = "cloud") -> PoissonCloud:
    """Poisson cloud of unit intensity on the ball ``B(0, radius)``."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    rng = as_seed(seed).generator(tag)
    n = rng.poisson(unit_ball_volume(d) * radius ** d)
    return PoissonCloud(float(radius), uniform_in_ball(rng, n, d, radius))


def uniform_in_ball(rng: np.random.Generator, n: int, d: int, radius: float) -> np.ndarray:
    g = rng.standard_normal((n, d))
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    r = radius * rng.random((n, 1)) ** (1.0 / d)
    return g / norms * r


def evolve_obstacles(cloud: PoissonCloud, grid: TimeGrid, sigma: float, seed,
                     tag: str = "obstacles") -> List[PathSample]:
    """One independent sigma-Brownian path per cloud point, started at that point."""
    seed = as_seed(seed)
    return [
        sample_brownian(grid, c, sigma, seed.child(i), tag) for i, c in enumerate(cloud.centers)
    ]


def evolve_obstacles_array(cloud: PoissonCloud, grid: TimeGrid, sigma: float, seed,
                           tag: str = "obstacles") -> np.ndarray:
    """Vectorized :func:`evolve_obstacles`; shape ``(n_obstacles, n_steps+1, d)``.

    Draws all increments from one stream, so it is reproducible but not
    path-for-path identical to the list version.
    """
    rng = as_seed(seed).generator(tag)
    n, d = cloud.centers.shape
    steps = brownian_increments(rng, grid.n_steps, d, size=n) * (sigma * math.sqrt(grid.spacing))
    out = np.empty((n, grid.n_steps + 1, d))
    out[:, 0] = cloud.centers
    out[:, 1:] = cloud.centers[:, None, :] + np.cumsum(steps, axis=1)
    return out


# --- binary dump -----------------------------------------------------------

_MAGIC = b"MMPS"
_HEADER = struct.Struct("<4sIIdQQI")


def dump_paths(fh: BinaryIO, paths: Sequence[PathSample], seed: SeedSpec) -> None:
    """Write paths as a fixed header then little-endian float64, row-major."""
    if not paths:
        raise ValueError("nothing to dump")
    grid = paths[0].grid
    d = paths[0].d
    fh.write(_HEADER.pack(_MAGIC, d, grid.n_steps, grid.t_end, seed.master_seed,
                          seed.stream_id, len(paths)))
    for path in paths:
        fh.write(np.ascontiguousarray(path.points, dtype="<f8").tobytes())


def load_paths(fh: BinaryIO) -> tuple[list, SeedSpec]:
    magic, d, n_steps, t_end, master, stream, n = _HEADER.unpack(fh.read(_HEADER.size))
    if magic != _MAGIC:
        raise ValueError("not a path dump")
    grid = TimeGrid(t_end, n_steps)
    paths = []
    for _ in range(n):
        raw = np.frombuffer(fh.read(8 * d * (n_steps + 1)), dtype="<f8")
        paths.append(PathSample(grid, raw.reshape(n_steps + 1, d).copy()))
    return paths, SeedSpec(master, stream)
