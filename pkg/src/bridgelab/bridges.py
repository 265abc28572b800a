"""Brownian bridges with generator Delta and their Feynman-Kac weights.

Conventions
-----------
The free motion has generator Delta (not Delta/2): the transition density
over time t is ``(4 pi t)^(-d/2) exp(-|x-y|^2 / (4 t))`` and each coordinate
of an increment has variance ``2 t``.  A bridge from x at time 0 to y at
time beta therefore has marginal mean ``x + (t/beta)(y - x)`` and
per-coordinate variance ``2 t (beta - t) / beta``.

Path weights are ``exp(-int_0^beta W(omega_s) ds)`` with the integral
approximated by the trapezoid rule on the path's own time mesh.  For
hard-wall traps the weight additionally carries, per step and per wall
face, the exact probability that the continuous bridge between two
consecutive sampled points stays off the wall; this removes the
O(sqrt(dt)) survival bias of monitoring the wall only at mesh times.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .measures import Grid
from .potentials import TrapPotential

__all__ = [
    "PathSample",
    "FKKernel",
    "gauss_kernel",
    "gaussian_pair_matrix",
    "sample_bridge",
    "feynman_kac_weight",
    "attach_weight",
    "bridge_fk_mc",
    "fk_kernel_grid",
    "default_fk_steps",
]


@dataclass(frozen=True)
class PathSample:
    """Discretized path: times ``(M+1,)``, positions ``(M+1, d)``.

    ``log_weight`` is ``-int W`` along the path (0 when no potential has
    been applied); it is ``-inf`` exactly when the path is killed by a
    hard wall.
    """

    times: np.ndarray
    positions: np.ndarray
    log_weight: float = 0.0

    def __post_init__(self) -> None:
        t = np.asarray(self.times, dtype=float)
        p = np.asarray(self.positions, dtype=float)
        if p.ndim == 1:
            p = p[:, None]
        if t.ndim != 1 or p.shape[0] != t.shape[0]:
            raise ValueError("times and positions are inconsistent")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "positions", p)

    @property
    def dimension(self) -> int:
        return self.positions.shape[1]

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])


def _as_points(x, d: int | None = None) -> np.ndarray:
    """Coerce scalars / arrays to shape (N, d)."""
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        a = a[None, None]
    elif a.ndim == 1:
        a = a[None, :] if d is None or d == a.shape[0] else a[:, None]
    if d is not None and a.shape[1] != d:
        raise ValueError(f"expected points of dimension {d}, got {a.shape[1]}")
    return a


def gauss_kernel(x, y, beta: float):
    """Free transition density p_beta(x, y) for the generator-Delta motion."""
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    scalar = xa.ndim == 0 and ya.ndim == 0
    if xa.ndim == 0:
        xa = xa[None]
    if ya.ndim == 0:
        ya = ya[None]
    if xa.ndim == 1 and ya.ndim == 1 and xa.shape == ya.shape:
        # interpret matching 1-d arrays as single points in dimension len(x)
        d = xa.shape[0]
        sq = float(np.sum((xa - ya) ** 2))
        val = (4.0 * math.pi * beta) ** (-d / 2) * math.exp(-sq / (4.0 * beta))
        return val if not scalar else float(val)
    xa = np.atleast_2d(xa)
    ya = np.atleast_2d(ya)
    d = xa.shape[-1]
    sq = np.sum((xa - ya) ** 2, axis=-1)
    out = (4.0 * math.pi * beta) ** (-d / 2) * np.exp(-sq / (4.0 * beta))
    return float(out[0]) if scalar else out


def gaussian_pair_matrix(grid: Grid, beta: float) -> np.ndarray:
    """Matrix of p_beta values between every ordered pair of grid nodes."""
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    pts = grid.nodes
    d = grid.dimension
    sq = np.zeros((grid.n_nodes, grid.n_nodes))
    for k in range(d):
        diff = pts[:, k][:, None] - pts[:, k][None, :]
        sq += diff * diff
    return (4.0 * math.pi * beta) ** (-d / 2) * np.exp(-sq / (4.0 * beta))


def _bridge_batch(
    starts: np.ndarray,
    ends: np.ndarray,
    beta: float,
    n_steps: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Sample exact bridges start -> end; returns (times, positions (B, M+1, d))."""
    B, d = starts.shape
    times = np.linspace(0.0, beta, n_steps + 1)
    pos = np.empty((B, n_steps + 1, d))
    pos[:, 0] = starts
    x = starts
    for k in range(n_steps - 1):
        dt = times[k + 1] - times[k]
        rem = beta - times[k]
        mean = x + (dt / rem) * (ends - x)
        var = 2.0 * dt * (beta - times[k + 1]) / rem
        x = mean + math.sqrt(var) * rng.standard_normal((B, d))
        pos[:, k + 1] = x
    pos[:, n_steps] = ends
    return times, pos


def sample_bridge(x, y, beta: float, n_steps: int, rng: np.random.Generator) -> PathSample:
    """Sample one bridge from x to y over [0, beta] on a uniform mesh.

    Endpoints are pinned exactly; intermediate points follow the exact
    Gaussian conditional law, so no time-discretization error enters the
    path itself.
    """
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    xs = _as_points(x)
    ys = _as_points(y, xs.shape[1])
    times, pos = _bridge_batch(xs, ys, beta, n_steps, rng)
    return PathSample(times=times, positions=pos[0])


def _wall_log_survival(
    times: np.ndarray, pos: np.ndarray, box
) -> np.ndarray:
    """Log-probability that bridges through the sampled points avoid the walls.

    ``pos`` has shape (B, M+1, d).  Points outside or exactly on a wall give
    -inf.  For interior consecutive points the per-step, per-face crossing
    probability of the connecting bridge is exp(-(a-x0)(a-x1)/dt) for the
    variance-2t motion.
    """
    B = pos.shape[0]
    out = np.zeros(B)
    dts = np.diff(times)
    for k, (lo, hi) in enumerate(box):
        xk = pos[:, :, k]
        d_lo = xk - lo
        d_hi = hi - xk
        dead = np.any((d_lo <= 0) | (d_hi <= 0), axis=1)
        for dist in (d_lo, d_hi):
            prod = dist[:, :-1] * dist[:, 1:]
            with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
                p_cross = np.exp(-prod / dts[None, :])
                step_log = np.log1p(-np.minimum(p_cross, 1.0))
                contrib = step_log.sum(axis=1)
            out += np.where(dead, 0.0, contrib)
        out[dead] = -np.inf
    return out


def _log_weight_batch(times: np.ndarray, pos: np.ndarray, W: TrapPotential | None) -> np.ndarray:
    """log of the Feynman-Kac weight for a batch of paths, shape (B,)."""
    B = pos.shape[0]
    if W is None:
        return np.zeros(B)
    if W.is_hard_wall:
        return _wall_log_survival(times, pos, W.box)
    vals = W._evaluate(pos)
    dts = np.diff(times)
    integral = 0.5 * ((vals[:, :-1] + vals[:, 1:]) * dts[None, :]).sum(axis=1)
    return -integral


def feynman_kac_weight(path: PathSample, W: TrapPotential) -> float:
    """Trapezoid-rule weight exp(-int W) of one path, in [0, 1] for W >= 0."""
    logw = _log_weight_batch(path.times, path.positions[None, :, :], W)[0]
    return float(np.exp(logw))


def attach_weight(path: PathSample, W: TrapPotential) -> PathSample:
    """Copy of ``path`` carrying its log-weight under ``W``."""
    logw = _log_weight_batch(path.times, path.positions[None, :, :], W)[0]
    return replace(path, log_weight=float(logw))


def bridge_fk_mc(
    x,
    y,
    beta: float,
    W: TrapPotential,
    n_samples: int,
    rng: np.random.Generator,
    n_steps: int = 128,
    chunk: int = 20000,
) -> tuple[float, float]:
    """Monte Carlo estimate of E[exp(-int W)] over bridges from x to y.

    Returns the sample mean and its standard error.
    """
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    xs = _as_points(x)
    ys = _as_points(y, xs.shape[1])
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < n_samples:
        b = min(chunk, n_samples - done)
        starts = np.repeat(xs, b, axis=0)
        ends = np.repeat(ys, b, axis=0)
        times, pos = _bridge_batch(starts, ends, beta, n_steps, rng)
        w = np.exp(_log_weight_batch(times, pos, W))
        total += w.sum()
        total_sq += (w * w).sum()
        done += b
    mean = total / n_samples
    var = max(total_sq / n_samples - mean * mean, 0.0) * n_samples / (n_samples - 1)
    return float(mean), float(math.sqrt(var / n_samples))


def check_wall_alignment(W: TrapPotential, grid: Grid) -> None:
    """Reject hard-wall boxes whose faces fall between grid nodes."""
    if not W.is_hard_wall:
        return
    for k, (lo, hi) in enumerate(W.box):
        axis = grid.axis(k)
        h = grid.spacing[k]
        for face in (lo, hi):
            if axis[0] - h * 1e-9 <= face <= axis[-1] + h * 1e-9:
                if np.min(np.abs(axis - face)) > 1e-9 * max(1.0, abs(face)) + 1e-12:
                    raise ValueError(
                        f"hard-wall face {face} on axis {k} does not align with a grid node"
                    )


def default_fk_steps(beta: float, grid: Grid) -> int:
    """Default number of Strang steps: max(100, beta/h^2), capped at 10**4."""
    h = min(grid.spacing)
    return min(max(100, math.ceil(beta / (h * h))), 10_000)


@dataclass(frozen=True)
class FKKernel:
    """Feynman-Kac kernel K_beta(x, y) tabulated on a grid.

    ``matrix[i, j]`` approximates the density (with respect to dy) of the
    motion killed at rate W, between nodes i and j.  ``undermixed`` is set
    when one Strang step mixes over less than one grid spacing, i.e.
    sqrt(2 beta / steps) < h, which degrades the one-step quadrature.
    """

    grid: Grid
    beta: float
    steps: int
    matrix: np.ndarray
    undermixed: bool = False

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=float)
        n = self.grid.n_nodes
        if m.shape != (n, n):
            raise ValueError(f"kernel matrix must be {n} x {n}")
        object.__setattr__(self, "matrix", m)
        self.matrix.setflags(write=False)


def fk_kernel_grid(
    W: TrapPotential | None,
    beta: float,
    grid: Grid,
    steps: int | None = None,
) -> FKKernel:
    """Transfer-matrix approximation of the Feynman-Kac kernel on a grid.

    Symmetric Strang splitting: each of ``steps`` factors is
    ``exp(-dt W / 2) . G_dt . exp(-dt W / 2)`` with G_dt the free kernel,
    composed with the grid quadrature (weight ``cell_volume`` per node).
    Hard walls are Dirichlet: nodes on or off the wall faces are zeroed,
    the same convention as the eigensolver's strictly interior unknowns
    (and the one that keeps the effective absorbing wall at the face).
    """
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    if steps is None:
        steps = default_fk_steps(beta, grid)
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if W is not None:
        if W.dimension != grid.dimension:
            raise ValueError("potential and grid dimensions differ")
        check_wall_alignment(W, grid)
    delta = beta / steps
    vol = grid.cell_volume
    G = gaussian_pair_matrix(grid, delta)
    if W is None:
        half = np.ones(grid.n_nodes)
    elif W.is_hard_wall:
        alive = np.ones(grid.n_nodes, dtype=bool)
        tol = min(grid.spacing) * 1e-6
        for k, (lo, hi) in enumerate(W.box):
            alive &= (grid.nodes[:, k] > lo + tol) & (grid.nodes[:, k] < hi - tol)
        half = alive.astype(float)
    else:
        wvals = W.on_grid(grid)
        with np.errstate(over="ignore"):
            half = np.exp(-0.5 * delta * wvals)
        half[~np.isfinite(wvals)] = 0.0
    step_matrix = (half[:, None] * G * half[None, :]) * vol
    with np.errstate(over="ignore", invalid="ignore"):
        K = np.linalg.matrix_power(step_matrix, steps) / vol
    if not np.all(np.isfinite(K)):
        # A severely undermixed step has diagonal quadrature weight > 1 and
        # its powers grow geometrically; the result would be pure noise.
        raise ValueError(
            f"steps={steps} is too large for this grid: one-step quadrature "
            "diverges (sqrt(2 beta/steps) far below the grid spacing)"
        )
    undermixed = math.sqrt(2.0 * delta) < min(grid.spacing)
    return FKKernel(grid=grid, beta=beta, steps=steps, matrix=K, undermixed=undermixed)
