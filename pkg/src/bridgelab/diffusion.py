"""Ground-state diffusions, Girsanov reweighting and path sampling.

The h-transformed process solves dX = 2 (grad phi / phi)(X) dt + sqrt(2) dB
(noise variance 2 dt per coordinate, matching the generator-Delta
convention); its stationary density is phi^2.  The drift factor 2 is forced
by that convention: the generator is Delta + 2 (grad phi / phi) . grad.

The exponential martingale attached to an eigenpair (lambda, phi) of
-Delta + W is

    D_beta = exp(-int_0^beta (W - lambda)(B_s) ds) phi(B_beta) / phi(B_0)

with E_x[D_beta] = 1 for every starting point x.  For hard walls the path
integral carries the same bridge crossing corrections as the Feynman-Kac
weights, so free Brownian paths monitored at finitely many times do not
overestimate survival.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .bridges import FKKernel, PathSample, _bridge_batch, _log_weight_batch, gauss_kernel
from .measures import DiscreteMeasure, Grid, PairMeasure
from .potentials import TrapPotential
from .spectral import SpectralResult

__all__ = [
    "DriftField",
    "SDEResult",
    "PathCollection",
    "ground_state_drift",
    "simulate_ergodic_sde",
    "simulate_sde_ensemble",
    "girsanov_density",
    "martingale_check",
    "schrodinger_process_sampler",
    "systematic_resample",
]


@dataclass(frozen=True)
class DriftField:
    """Drift vectors tabulated on a grid, shape (n_nodes, d)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        expected = (self.grid.n_nodes, self.grid.dimension)
        if vals.shape != expected:
            raise ValueError(f"drift values must have shape {expected}, got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("drift values must be finite")
        object.__setattr__(self, "values", vals)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        g = self.grid
        if g.dimension == 1:
            return np.interp(pts[:, 0], g.axis(0), self.values[:, 0])[:, None]
        from scipy.interpolate import RegularGridInterpolator

        n = g.points_per_axis
        out = np.empty((pts.shape[0], 2))
        for k in range(2):
            itp = RegularGridInterpolator(
                (g.axis(0), g.axis(1)),
                self.values[:, k].reshape(n, n),
                bounds_error=False,
                fill_value=None,
            )
            out[:, k] = itp(pts)
        return out


def ground_state_drift(res: SpectralResult, phi_floor_ratio: float = 1e-12) -> DriftField:
    """Drift 2 grad(phi)/phi by central differences.

    One-sided differences at the grid edges; wherever phi falls below
    ``phi_floor_ratio * max(phi)`` the drift magnitude is clamped to 2/h,
    pointing along the local gradient, so walls never produce overflow.
    """
    g = res.grid
    n = g.points_per_axis
    floor = phi_floor_ratio * float(np.max(res.phi))
    if g.dimension == 1:
        phi = res.phi
        grad = np.gradient(phi, g.axis(0))
        grads = [grad]
        shape_phi = phi
    else:
        phi2 = res.phi.reshape(n, n)
        grads = list(np.gradient(phi2, g.axis(0), g.axis(1)))
        grads = [gr.ravel() for gr in grads]
        shape_phi = res.phi
    vals = np.empty((g.n_nodes, g.dimension))
    for k, grad in enumerate(grads):
        h = g.spacing[k]
        cap = 2.0 / h
        safe = np.maximum(shape_phi, floor if floor > 0 else 1e-300)
        b = 2.0 * grad / safe
        low = shape_phi < floor
        b[low] = np.clip(b[low], -cap, cap)
        vals[:, k] = b
    return DriftField(grid=g, values=vals)


@dataclass(frozen=True)
class SDEResult:
    """Thinned trajectory plus occupation statistics of one long run."""

    times: np.ndarray
    positions: np.ndarray
    occupation: DiscreteMeasure
    rejection_rate: float
    flagged: bool


@numba.njit(cache=True)
def _euler_1d(x0, n_steps, dt, grid_lo, grid_h, drift_vals, has_wall, wall_lo,
              wall_hi, occ_lo, occ_h, occ_n, counts, seed, store_every, stored):
    np.random.seed(seed)
    x = x0
    n = drift_vals.shape[0]
    sq = math.sqrt(2.0 * dt)
    rejected = 0
    si = 0
    for k in range(n_steps):
        u = (x - grid_lo) / grid_h
        if u <= 0.0:
            b = drift_vals[0]
        elif u >= n - 1:
            b = drift_vals[n - 1]
        else:
            i = int(u)
            frac = u - i
            b = drift_vals[i] * (1.0 - frac) + drift_vals[i + 1] * frac
        mean = x + b * dt
        xn = mean + sq * np.random.normal()
        if has_wall:
            tries = 0
            while (xn <= wall_lo or xn >= wall_hi) and tries < 100:
                rejected += 1
                xn = mean + sq * np.random.normal()
                tries += 1
            if xn <= wall_lo or xn >= wall_hi:
                xn = x
        x = xn
        j = int((x - occ_lo) / occ_h + 0.5)
        if j < 0:
            j = 0
        if j >= occ_n:
            j = occ_n - 1
        counts[j] += 1.0
        if store_every > 0 and (k + 1) % store_every == 0:
            stored[si] = x
            si += 1
    return rejected


def simulate_ergodic_sde(
    drift: DriftField,
    init: DiscreteMeasure,
    T_total: float,
    dt: float,
    rng: np.random.Generator,
    trap: TrapPotential | None = None,
    occupation_grid: Grid | None = None,
    store_every: int | None = None,
) -> SDEResult:
    """One long Euler trajectory of the drift SDE with its occupation law.

    One Euler step must not leap across the drift table: the typical
    increment sqrt(2 dt) is required to stay below 4 grid spacings.  Hard
    walls are handled by re-drawing the Gaussian increment when the
    proposal leaves the box (counted; a rejection rate above 50% flags
    the result).
    """
    g = drift.grid
    if g.dimension != 1:
        raise NotImplementedError("ergodic runs are implemented for d=1 traps")
    h = min(g.spacing)
    if math.sqrt(2.0 * dt) > 4.0 * h:
        raise ValueError(
            f"dt={dt} too coarse for the drift grid: sqrt(2 dt) exceeds 4h={4 * h:.3e}"
        )
    n_steps = int(round(T_total / dt))
    if n_steps < 1:
        raise ValueError("T_total must cover at least one step")
    occ = occupation_grid if occupation_grid is not None else g
    if store_every is None:
        store_every = max(1, n_steps // 10000)
    has_wall = trap is not None and trap.is_hard_wall
    wall_lo, wall_hi = (trap.box[0] if has_wall else (0.0, 0.0))
    x0_idx = init.sample_nodes(1, rng)[0]
    x0 = float(init.grid.nodes[x0_idx, 0])
    counts = np.zeros(occ.n_nodes)
    n_stored = n_steps // store_every
    stored = np.zeros(n_stored)
    seed = int(rng.integers(0, 2**31 - 1))
    rejected = _euler_1d(
        x0,
        n_steps,
        dt,
        g.lower[0],
        g.spacing[0],
        np.ascontiguousarray(drift.values[:, 0]),
        has_wall,
        wall_lo,
        wall_hi,
        occ.lower[0],
        occ.spacing[0],
        occ.points_per_axis,
        counts,
        seed,
        store_every,
        stored,
    )
    rate = rejected / n_steps
    occupation = DiscreteMeasure.probability(occ, counts / occ.cell_volume)
    times = dt * store_every * np.arange(1, n_stored + 1)
    return SDEResult(
        times=times,
        positions=stored[:, None],
        occupation=occupation,
        rejection_rate=float(rate),
        flagged=rate > 0.5,
    )


def _outside_box(pts: np.ndarray, box) -> np.ndarray:
    bad = np.zeros(pts.shape[0], dtype=bool)
    for k, (lo, hi) in enumerate(box):
        bad |= (pts[:, k] <= lo) | (pts[:, k] >= hi)
    return bad


def simulate_sde_ensemble(
    drift: DriftField,
    x0: np.ndarray,
    T: float,
    dt: float,
    rng: np.random.Generator,
    trap: TrapPotential | None = None,
) -> np.ndarray:
    """Euler-evolve a batch of independent walkers; returns final positions."""
    x = np.asarray(x0, dtype=float).reshape(-1, drift.grid.dimension).copy()
    n_steps = int(round(T / dt))
    sq = math.sqrt(2.0 * dt)
    has_wall = trap is not None and trap.is_hard_wall
    for _ in range(n_steps):
        mean = x + drift(x) * dt
        prop = mean + sq * rng.standard_normal(x.shape)
        if has_wall:
            bad = _outside_box(prop, trap.box)
            tries = 0
            while np.any(bad) and tries < 100:
                nb = int(bad.sum())
                prop[bad] = mean[bad] + sq * rng.standard_normal((nb, x.shape[1]))
                bad = _outside_box(prop, trap.box)
                tries += 1
            prop[bad] = x[bad]
        x = prop
    return x


def girsanov_density(
    path: PathSample,
    lam: float,
    phi: SpectralResult,
    W: TrapPotential,
) -> float:
    """Martingale density exp(-int (W - lambda)) phi(end)/phi(start)."""
    start = phi.interp(path.positions[0])
    end = phi.interp(path.positions[-1])
    start = float(np.atleast_1d(start)[0])
    end = float(np.atleast_1d(end)[0])
    if start <= 1e-300:
        raise ValueError("phi vanishes at the starting point; density undefined")
    logw = float(_log_weight_batch(path.times, path.positions[None, :, :], W)[0])
    return math.exp(path.duration * lam + logw) * end / start if np.isfinite(logw) else 0.0


def _default_mart_steps(beta: float, W: TrapPotential) -> int:
    base = 512 if W.is_hard_wall else 64
    return max(base, int(base * beta))


def martingale_check(
    x,
    beta: float,
    lam: float,
    phi: SpectralResult,
    W: TrapPotential,
    n_samples: int,
    rng: np.random.Generator,
    n_steps: int | None = None,
    chunk: int = 20000,
) -> tuple[float, float]:
    """Monte Carlo mean and standard error of D_beta over free paths from x.

    Free Brownian increments are exact Gaussians; only the potential
    integral is discretized (trapezoid plus wall crossing corrections).
    """
    if n_steps is None:
        n_steps = _default_mart_steps(beta, W)
    d = phi.grid.dimension
    x_arr = np.atleast_1d(np.asarray(x, dtype=float)).reshape(1, d)
    start_val = float(np.atleast_1d(phi.interp(x_arr[0]))[0])
    if start_val <= 1e-300:
        raise ValueError("phi vanishes at the starting point")
    dt = beta / n_steps
    sq = math.sqrt(2.0 * dt)
    total = 0.0
    total_sq = 0.0
    done = 0
    is_wall = W.is_hard_wall
    while done < n_samples:
        b = min(chunk, n_samples - done)
        cur = np.repeat(x_arr, b, axis=0)
        log_acc = np.zeros(b)
        if not is_wall:
            w_cur = W._evaluate(cur)
        for _ in range(n_steps):
            nxt = cur + sq * rng.standard_normal((b, d))
            if is_wall:
                for k, (lo, hi) in enumerate(W.box):
                    d0l, d1l = cur[:, k] - lo, nxt[:, k] - lo
                    d0h, d1h = hi - cur[:, k], hi - nxt[:, k]
                    for d0, d1 in ((d0l, d1l), (d0h, d1h)):
                        dead = (d0 <= 0) | (d1 <= 0)
                        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
                            cross = np.exp(-d0 * d1 / dt)
                            add = np.log1p(-np.minimum(cross, 1.0))
                        log_acc += np.where(dead, -np.inf, add)
            else:
                w_nxt = W._evaluate(nxt)
                log_acc -= 0.5 * dt * (w_cur + w_nxt)
                w_cur = w_nxt
            cur = nxt
        end_vals = np.atleast_1d(phi.interp(cur if d > 1 else cur[:, 0]))
        with np.errstate(over="ignore", invalid="ignore"):
            dens = np.exp(beta * lam + log_acc) * np.maximum(end_vals, 0.0) / start_val
        dens = np.where(np.isfinite(dens), dens, 0.0)
        total += dens.sum()
        total_sq += (dens * dens).sum()
        done += b
    mean = total / n_samples
    var = max(total_sq / n_samples - mean * mean, 0.0) * n_samples / max(n_samples - 1, 1)
    return float(mean), float(math.sqrt(var / n_samples))


def systematic_resample(weights: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """Systematic resampling: n indices with expected multiplicity n*w."""
    w = np.asarray(weights, dtype=float)
    total = w.sum()
    if total <= 0:
        raise ValueError("weights sum to zero")
    cum = np.cumsum(w / total)
    cum[-1] = 1.0
    u = (rng.random() + np.arange(n)) / n
    return np.searchsorted(cum, u)


@dataclass(frozen=True)
class PathCollection:
    """Equal-weight bridge paths from the optimal path measure."""

    times: np.ndarray
    positions: np.ndarray  # (n_paths, M+1, d)
    ess: float
    flagged: bool

    def marginal(self, t: float, grid: Grid) -> DiscreteMeasure:
        k = int(np.argmin(np.abs(self.times - t)))
        pts = self.positions[:, k, :]
        idx = grid.nearest_node(pts)
        masses = np.bincount(idx, minlength=grid.n_nodes).astype(float)
        return DiscreteMeasure.probability(grid, masses / grid.cell_volume)


def schrodinger_process_sampler(
    q_star: PairMeasure,
    K: FKKernel,
    W: TrapPotential | None,
    beta: float,
    n_steps: int,
    n_paths: int,
    rng: np.random.Generator,
    oversample: int = 10,
) -> PathCollection:
    """Sample the optimal path measure: endpoints from q*, bridges between.

    Bridge proposals are importance-corrected by exp(-int W) relative to
    the per-pair normalizer K/p_beta, then reduced to ``n_paths`` equally
    weighted paths by systematic resampling (10x oversampling by default).
    An effective sample size below 10% of the request is flagged.
    """
    grid = q_star.grid
    probs = q_star.masses.ravel()
    probs = probs / probs.sum()
    n_prop = oversample * n_paths
    flat = rng.choice(probs.size, size=n_prop, p=probs)
    xi, yi = np.unravel_index(flat, q_star.weights.shape)
    starts = grid.nodes[xi]
    ends = grid.nodes[yi]
    times, pos = _bridge_batch(starts, ends, beta, n_steps, rng)
    log_fk = _log_weight_batch(times, pos, W)
    p_free = gauss_kernel(starts, ends, beta)
    k_vals = K.matrix[xi, yi]
    if np.any(k_vals <= 0):
        raise ValueError("q_star charges a pair where the kernel vanishes")
    log_w = log_fk + np.log(p_free) - np.log(k_vals)
    log_w -= log_w.max()
    w = np.exp(log_w)
    ess = float(w.sum() ** 2 / np.sum(w * w))
    idx = systematic_resample(w, n_paths, rng)
    return PathCollection(
        times=times,
        positions=pos[idx],
        ess=ess,
        flagged=ess < 0.1 * n_paths,
    )
