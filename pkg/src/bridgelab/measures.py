"""Regular grids and the discrete measures living on them.

Everything downstream (kernels, ensembles, transport plans) is discretized
on a regular box grid with the same number of nodes per axis.  Weights of a
:class:`DiscreteMeasure` are stored as densities relative to the Lebesgue
volume element ``cell_volume = prod(spacing)``, so refining the grid changes
stored values predictably: the mass attached to node ``i`` is
``weights[i] * cell_volume``.  Pair measures follow the same convention with
``cell_volume ** 2``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

__all__ = [
    "Grid",
    "DiscreteMeasure",
    "PairMeasure",
    "DistanceResult",
    "build_grid",
    "relative_entropy",
    "marginals",
    "measure_distance",
]

_MASS_TOL = 1e-12


@dataclass(frozen=True)
class Grid:
    """Regular box grid in dimension 1 or 2.

    Nodes are ordered lexicographically: for d=2 the flat index of node
    ``(i, j)`` is ``i * n + j`` where axis 0 is the slowest.
    """

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    points_per_axis: int

    def __post_init__(self) -> None:
        d = len(self.lower)
        if d not in (1, 2):
            raise ValueError(f"grid dimension must be 1 or 2, got {d}")
        if len(self.upper) != d:
            raise ValueError("lower and upper must have the same length")
        if self.points_per_axis < 2:
            raise ValueError(
                f"points_per_axis must be >= 2, got {self.points_per_axis}"
            )
        for lo, hi in zip(self.lower, self.upper):
            if not (np.isfinite(lo) and np.isfinite(hi)) or hi <= lo:
                raise ValueError(f"degenerate interval [{lo}, {hi}]")

    @property
    def dimension(self) -> int:
        return len(self.lower)

    @property
    def spacing(self) -> tuple[float, ...]:
        n = self.points_per_axis
        return tuple((hi - lo) / (n - 1) for lo, hi in zip(self.lower, self.upper))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def n_nodes(self) -> int:
        return self.points_per_axis ** self.dimension

    def axis(self, k: int) -> np.ndarray:
        """Node coordinates along axis ``k``."""
        return np.linspace(self.lower[k], self.upper[k], self.points_per_axis)

    @cached_property
    def nodes(self) -> np.ndarray:
        """All node coordinates, shape ``(n_nodes, dimension)``."""
        axes = [self.axis(k) for k in range(self.dimension)]
        mesh = np.meshgrid(*axes, indexing="ij")
        out = np.stack([m.ravel() for m in mesh], axis=1)
        out.setflags(write=False)
        return out

    def nearest_node(self, points: np.ndarray) -> np.ndarray:
        """Flat index of the grid node nearest to each point (clipped to the box)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        n = self.points_per_axis
        idx = np.zeros(pts.shape[0], dtype=np.int64)
        for k in range(self.dimension):
            h = self.spacing[k]
            ik = np.rint((pts[:, k] - self.lower[k]) / h).astype(np.int64)
            np.clip(ik, 0, n - 1, out=ik)
            idx = idx * n + ik
        return idx

    def boundary_mask(self) -> np.ndarray:
        """Boolean mask (flat) of nodes lying on the boundary of the box."""
        n = self.points_per_axis
        edge = np.zeros(n, dtype=bool)
        edge[0] = edge[-1] = True
        if self.dimension == 1:
            return edge.copy()
        m = edge[:, None] | edge[None, :]
        return m.ravel()


def build_grid(bounds: Sequence, n: int) -> Grid:
    """Build a regular grid from per-axis bounds.

    ``bounds`` is either a single ``(lower, upper)`` pair or a sequence of
    such pairs, one per axis.
    """
    arr = np.asarray(bounds, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("bounds must be one (lo, hi) pair per axis")
    lower = tuple(float(v) for v in arr[:, 0])
    upper = tuple(float(v) for v in arr[:, 1])
    return Grid(lower=lower, upper=upper, points_per_axis=int(n))


def _check_weights(weights: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.shape != shape:
        raise ValueError(f"weights must have shape {shape}, got {w.shape}")
    if not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    return w.copy()


@dataclass(frozen=True)
class DiscreteMeasure:
    """Nonnegative measure on the nodes of a grid.

    ``weights`` are densities relative to the volume element; the mass of
    node ``i`` is ``weights[i] * grid.cell_volume``.
    """

    grid: Grid
    weights: np.ndarray
    is_probability: bool = False

    def __post_init__(self) -> None:
        w = _check_weights(self.weights, (self.grid.n_nodes,))
        object.__setattr__(self, "weights", w)
        if self.is_probability:
            total = w.sum() * self.grid.cell_volume
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"probability measure has mass {total}")
        self.weights.setflags(write=False)

    @classmethod
    def probability(cls, grid: Grid, weights: np.ndarray) -> "DiscreteMeasure":
        """Normalize ``weights`` to a probability measure on ``grid``."""
        w = _check_weights(np.asarray(weights, dtype=float), (grid.n_nodes,))
        total = w.sum() * grid.cell_volume
        if total <= 0:
            raise ValueError("cannot normalize a zero measure")
        return cls(grid=grid, weights=w / total, is_probability=True)

    @classmethod
    def lebesgue(cls, grid: Grid) -> "DiscreteMeasure":
        """Density one at every node (discrete Lebesgue measure)."""
        return cls(grid=grid, weights=np.ones(grid.n_nodes))

    @property
    def masses(self) -> np.ndarray:
        return self.weights * self.grid.cell_volume

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum() * self.grid.cell_volume)

    def sample_nodes(self, k: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``k`` node indices with probability proportional to node mass."""
        p = self.masses
        total = p.sum()
        if total <= 0:
            raise ValueError("cannot sample from a zero measure")
        return rng.choice(self.grid.n_nodes, size=k, p=p / total)


@dataclass(frozen=True)
class PairMeasure:
    """Nonnegative measure on ordered node pairs of one grid.

    ``weights[i, j]`` is a density relative to ``cell_volume ** 2``.
    """

    grid: Grid
    weights: np.ndarray
    is_probability: bool = False

    def __post_init__(self) -> None:
        n = self.grid.n_nodes
        w = _check_weights(self.weights, (n, n))
        object.__setattr__(self, "weights", w)
        if self.is_probability:
            total = w.sum() * self.grid.cell_volume ** 2
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"probability pair measure has mass {total}")
        self.weights.setflags(write=False)

    @classmethod
    def probability(cls, grid: Grid, weights: np.ndarray) -> "PairMeasure":
        w = np.asarray(weights, dtype=float)
        total = w.sum() * grid.cell_volume ** 2
        if total <= 0:
            raise ValueError("cannot normalize a zero pair measure")
        return cls(grid=grid, weights=w / total, is_probability=True)

    @property
    def masses(self) -> np.ndarray:
        return self.weights * self.grid.cell_volume ** 2

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum() * self.grid.cell_volume ** 2)

    def max_asymmetry(self) -> float:
        return float(np.max(np.abs(self.weights - self.weights.T)))


def _same_grid(a: Grid, b: Grid) -> bool:
    return (
        a.lower == b.lower
        and a.upper == b.upper
        and a.points_per_axis == b.points_per_axis
    )


def relative_entropy(q: PairMeasure, r: PairMeasure) -> float:
    """Relative entropy H(q | r) of two pair probability measures.

    Uses the convention 0 log 0 = 0 and returns +inf when q is not
    absolutely continuous with respect to r.
    """
    if not _same_grid(q.grid, r.grid):
        raise ValueError("measures live on different grids")
    if not (q.is_probability and r.is_probability):
        raise ValueError("relative entropy requires probability measures")
    qm = q.masses
    rm = r.masses
    pos = qm > 0
    if np.any(rm[pos] == 0):
        return float("inf")
    val = float(np.sum(qm[pos] * (np.log(qm[pos]) - np.log(rm[pos]))))
    # Clamp the tiny negative rounding left by nearly identical measures.
    if val < 0 and val > -1e-12:
        val = 0.0
    return val


def marginals(q: PairMeasure) -> tuple[DiscreteMeasure, DiscreteMeasure]:
    """First and second marginals of a pair measure, as node densities."""
    vol = q.grid.cell_volume
    first = q.weights.sum(axis=1) * vol
    second = q.weights.sum(axis=0) * vol
    flag = q.is_probability
    return (
        DiscreteMeasure(q.grid, first, is_probability=flag),
        DiscreteMeasure(q.grid, second, is_probability=flag),
    )


@dataclass(frozen=True)
class DistanceResult:
    """Total-variation distance, plus Wasserstein-1 in dimension one."""

    tv: float
    wasserstein1: float | None


def measure_distance(p: DiscreteMeasure, r: DiscreteMeasure) -> DistanceResult:
    """Distance between two probability measures on the same grid.

    Total variation is ``0.5 * sum |p_i - r_i|`` over node masses.  In
    dimension one the Wasserstein-1 distance is computed from cumulative
    masses; both serve as computable stand-ins for weak-convergence
    diagnostics on a fixed grid.
    """
    if not _same_grid(p.grid, r.grid):
        raise ValueError("measures live on different grids")
    diff = p.masses - r.masses
    tv = 0.5 * float(np.abs(diff).sum())
    w1 = None
    if p.grid.dimension == 1:
        h = p.grid.spacing[0]
        w1 = float(np.abs(np.cumsum(diff)[:-1]).sum() * h)
    return DistanceResult(tv=tv, wasserstein1=w1)
