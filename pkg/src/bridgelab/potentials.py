"""Trap potentials confining the bridge ensembles.

Three kinds are supported: a hard-wall box (value 0 inside, +inf outside),
a quadratic well ``offset + sum_k coeff_k x_k**2`` and a tabulated potential
interpolated linearly from grid values.  All potentials are nonnegative.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .measures import Grid

__all__ = ["TrapPotential"]

_KINDS = ("hard_wall", "quadratic", "tabulated")


@dataclass(frozen=True)
class TrapPotential:
    """Confining potential W on R^d, d in {1, 2}."""

    kind: str
    box: tuple[tuple[float, float], ...] | None = None
    coeffs: tuple[float, ...] | None = None
    offset: float = 0.0
    table_grid: Grid | None = None
    table_values: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.kind == "hard_wall":
            if self.box is None:
                raise ValueError("hard_wall requires a box")
            for lo, hi in self.box:
                if hi <= lo:
                    raise ValueError(f"degenerate wall interval [{lo}, {hi}]")
        elif self.kind == "quadratic":
            if self.coeffs is None:
                raise ValueError("quadratic requires coefficients")
            if any(c < 0 for c in self.coeffs) or self.offset < 0:
                raise ValueError("quadratic potential must be nonnegative")
        else:
            if self.table_grid is None or self.table_values is None:
                raise ValueError("tabulated requires a grid and values")
            vals = np.asarray(self.table_values, dtype=float)
            if vals.shape != (self.table_grid.n_nodes,):
                raise ValueError("table values must match the grid")
            if not np.all(np.isfinite(vals)):
                raise ValueError("tabulated values must be finite")
            if np.any(vals < 0):
                raise ValueError("tabulated values must be nonnegative")
            object.__setattr__(self, "table_values", vals.copy())
            self.table_values.setflags(write=False)

    @classmethod
    def hard_wall(cls, box) -> "TrapPotential":
        arr = np.asarray(box, dtype=float)
        if arr.ndim == 1:
            arr = arr[None, :]
        return cls(kind="hard_wall", box=tuple((float(a), float(b)) for a, b in arr))

    @classmethod
    def quadratic(cls, coeffs, offset: float = 0.0) -> "TrapPotential":
        c = np.atleast_1d(np.asarray(coeffs, dtype=float))
        return cls(kind="quadratic", coeffs=tuple(float(v) for v in c), offset=float(offset))

    @classmethod
    def tabulated(cls, grid: Grid, values) -> "TrapPotential":
        return cls(kind="tabulated", table_grid=grid,
                   table_values=np.asarray(values, dtype=float))

    @property
    def dimension(self) -> int:
        if self.kind == "hard_wall":
            return len(self.box)
        if self.kind == "quadratic":
            return len(self.coeffs)
        return self.table_grid.dimension

    @property
    def is_hard_wall(self) -> bool:
        return self.kind == "hard_wall"

    def __call__(self, points: np.ndarray) -> np.ndarray:
        """Evaluate W at ``points`` of shape ``(..., d)`` (or ``(...,)`` for d=1)."""
        pts = np.asarray(points, dtype=float)
        scalar = pts.ndim == 0
        if pts.ndim == 0:
            pts = pts[None, None]
        elif pts.shape[-1] != self.dimension or pts.ndim == 1 and self.dimension == 1:
            # 1-d convenience: a bare (...) array of coordinates
            if self.dimension == 1:
                pts = pts[..., None]
        out = self._evaluate(pts)
        return float(out[0]) if scalar else out

    def _evaluate(self, pts: np.ndarray) -> np.ndarray:
        if self.kind == "hard_wall":
            inside = np.ones(pts.shape[:-1], dtype=bool)
            for k, (lo, hi) in enumerate(self.box):
                inside &= (pts[..., k] >= lo) & (pts[..., k] <= hi)
            out = np.where(inside, 0.0, np.inf)
            return out
        if self.kind == "quadratic":
            c = np.asarray(self.coeffs)
            return self.offset + np.sum(c * pts ** 2, axis=-1)
        return self._interp_table(pts)

    def _interp_table(self, pts: np.ndarray) -> np.ndarray:
        g = self.table_grid
        if g.dimension == 1:
            return np.interp(pts[..., 0], g.axis(0), self.table_values)
        from scipy.interpolate import RegularGridInterpolator

        n = g.points_per_axis
        vals = self.table_values.reshape(n, n)
        itp = RegularGridInterpolator(
            (g.axis(0), g.axis(1)), vals, bounds_error=False, fill_value=None
        )
        shape = pts.shape[:-1]
        out = itp(pts.reshape(-1, 2)).reshape(shape)
        # Linear extrapolation may dip below zero just outside the table.
        return np.maximum(out, 0.0)

    def on_grid(self, grid: Grid) -> np.ndarray:
        """Values at all grid nodes (flat, lexicographic)."""
        return self._evaluate(grid.nodes)
