"""Symmetrized bridge ensembles and the cycle-sum partition recursion.

An ensemble sample is drawn in two steps: a uniform permutation sigma of
{1..N}, then N bridges x_i -> x_sigma(i) whose starts are i.i.d. from a
probability measure m.  The sample weight is exp(-sum_i int W(omega_i)),
so plain averages of the weight estimate the symmetrized partition ratio
Z_N and weight-normalized histograms estimate the tilted path statistics
(empirical time-t marginals L and occupation Y).

The exact counterpart of Z_N on a grid is the cycle recursion

    h_0 = 1,   h_N = (1/N) sum_{l=1..N} Tr(A^l) h_{N-l}

applied to the appropriate one-step matrix A; run in the log domain it is
stable out to large N.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .bridges import FKKernel, PathSample, _bridge_batch, _log_weight_batch
from .measures import DiscreteMeasure, Grid
from .potentials import TrapPotential

__all__ = [
    "EnsembleSample",
    "EnsembleEstimates",
    "EstimationError",
    "sample_permutation",
    "sample_sym_ensemble",
    "ensemble_estimates",
    "cycle_log_partition",
    "sym_trace_exact",
    "free_energy_curve",
]


class EstimationError(RuntimeError):
    """All sample weights vanished; estimates are undefined."""


def sample_permutation(N: int, rng: np.random.Generator) -> tuple[np.ndarray, tuple[int, ...]]:
    """Uniform permutation of range(N) plus its sorted cycle type."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    sigma = rng.permutation(N)
    seen = np.zeros(N, dtype=bool)
    lengths = []
    for i in range(N):
        if seen[i]:
            continue
        length = 0
        j = i
        while not seen[j]:
            seen[j] = True
            j = sigma[j]
            length += 1
        lengths.append(length)
    return sigma, tuple(sorted(lengths))


@dataclass(frozen=True)
class EnsembleSample:
    """One draw of the symmetrized N-bridge ensemble.

    Positions are stored as one array (N, M+1, d); ``paths`` materializes
    per-particle :class:`PathSample` values on demand.
    """

    permutation: np.ndarray
    cycle_type: tuple[int, ...]
    starts: np.ndarray
    times: np.ndarray
    positions: np.ndarray
    path_log_weights: np.ndarray
    log_weight: float

    @property
    def n_particles(self) -> int:
        return self.positions.shape[0]

    @property
    def paths(self) -> list[PathSample]:
        return [
            PathSample(
                times=self.times,
                positions=self.positions[i],
                log_weight=float(self.path_log_weights[i]),
            )
            for i in range(self.n_particles)
        ]


def sample_sym_ensemble(
    m: DiscreteMeasure,
    N: int,
    beta: float,
    n_steps: int,
    W: TrapPotential | None,
    rng: np.random.Generator,
) -> EnsembleSample:
    """Draw one symmetrized ensemble: permutation, starts i.i.d. ~ m, bridges."""
    if not m.is_probability:
        raise ValueError("initial measure m must be a probability")
    sigma, ctype = sample_permutation(N, rng)
    idx = m.sample_nodes(N, rng)
    starts = m.grid.nodes[idx]
    ends = starts[sigma]
    times, pos = _bridge_batch(starts, ends, beta, n_steps, rng)
    logw = _log_weight_batch(times, pos, W)
    total = float(logw.sum())
    return EnsembleSample(
        permutation=sigma,
        cycle_type=ctype,
        starts=starts,
        times=times,
        positions=pos,
        path_log_weights=logw,
        log_weight=total,
    )


@dataclass(frozen=True)
class EnsembleEstimates:
    """Weighted estimates extracted from a batch of ensemble samples."""

    z_hat: float
    z_se: float
    l_marginals: dict[float, DiscreteMeasure]
    y_hat: DiscreteMeasure
    n_samples: int
    ess: float


def _weighted_histogram(grid: Grid, points: np.ndarray, weights: np.ndarray) -> DiscreteMeasure:
    idx = grid.nearest_node(points)
    masses = np.bincount(idx, weights=weights, minlength=grid.n_nodes)
    return DiscreteMeasure.probability(grid, masses / grid.cell_volume)


def ensemble_estimates(
    samples: list[EnsembleSample],
    grid: Grid,
    time_marks: list[float],
) -> EnsembleEstimates:
    """Partition estimate and weighted marginal/occupation histograms.

    ``z_hat`` is the plain average of exp(log_weight) with its standard
    error.  The L-marginals and occupation Y are weight-normalized nearest-
    node histograms; Y uses trapezoid weights in time, normalized by the
    total duration.
    """
    if not samples:
        raise ValueError("no samples given")
    S = len(samples)
    logw = np.array([s.log_weight for s in samples])
    w = np.exp(logw)
    if not np.any(w > 0):
        raise EstimationError("all ensemble weights are zero")
    z_hat = float(w.mean())
    z_se = float(w.std(ddof=1) / math.sqrt(S)) if S > 1 else 0.0
    wn = w / w.sum()
    ess = float(1.0 / np.sum(wn ** 2))

    times = samples[0].times
    N = samples[0].n_particles
    d = samples[0].positions.shape[2]
    pos = np.stack([s.positions for s in samples])  # (S, N, M+1, d)

    l_marginals: dict[float, DiscreteMeasure] = {}
    for t in time_marks:
        k = int(np.argmin(np.abs(times - t)))
        pts = pos[:, :, k, :].reshape(S * N, d)
        wts = np.repeat(w, N)
        l_marginals[float(t)] = _weighted_histogram(grid, pts, wts)

    dts = np.diff(times)
    tau = np.zeros(times.shape[0])
    tau[:-1] += dts / 2.0
    tau[1:] += dts / 2.0
    pts = pos.reshape(S * N * times.shape[0], d)
    wts = (w[:, None, None] * tau[None, None, :]).repeat(N, axis=1).reshape(-1)
    y_hat = _weighted_histogram(grid, pts, wts)

    return EnsembleEstimates(
        z_hat=z_hat,
        z_se=z_se,
        l_marginals=l_marginals,
        y_hat=y_hat,
        n_samples=S,
        ess=ess,
    )


def _log_traces(A: np.ndarray, N_max: int) -> np.ndarray:
    """log Tr(A^l) for l = 1..N_max via the spectrum of A.

    A must be similar to a symmetric nonnegative operator, so its spectrum
    is real and the traces are positive.
    """
    if A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    asym = np.max(np.abs(A - A.T))
    if asym <= 1e-12 * max(1.0, np.max(np.abs(A))):
        eig = np.linalg.eigvalsh((A + A.T) / 2.0)
    else:
        eig = np.linalg.eigvals(A)
        if np.max(np.abs(eig.imag)) > 1e-10 * max(1.0, np.max(np.abs(eig.real))):
            raise ValueError("matrix has genuinely complex spectrum")
        eig = eig.real
    out = np.empty(N_max)
    for ell in range(1, N_max + 1):
        t = float(np.sum(eig ** ell))
        if t <= 0:
            raise ValueError(f"nonpositive trace at power {ell}")
        out[ell - 1] = math.log(t)
    return out


def cycle_log_partition(A: np.ndarray, N_max: int) -> np.ndarray:
    """log h_N for N = 1..N_max from the cycle recursion, in the log domain."""
    if N_max < 1:
        raise ValueError(f"N_max must be >= 1, got {N_max}")
    log_tr = _log_traces(A, N_max)
    log_h = np.zeros(N_max + 1)  # log h_0 = 0
    for N in range(1, N_max + 1):
        terms = [log_tr[ell - 1] + log_h[N - ell] for ell in range(1, N + 1)]
        log_h[N] = logsumexp(terms) - math.log(N)
    return log_h[1:]


def sym_trace_exact(K: FKKernel, N: int) -> float:
    """Exact symmetrized trace h_N of the grid kernel (A = K * cell_volume)."""
    A = K.matrix * K.grid.cell_volume
    return float(np.exp(cycle_log_partition(A, N)[N - 1]))


def free_energy_curve(K: FKKernel, N_max: int) -> np.ndarray:
    """-(1/N) log h_N for N = 1..N_max; converges to beta * lambda(W)."""
    log_h = cycle_log_partition(K.matrix * K.grid.cell_volume, N_max)
    N = np.arange(1, N_max + 1, dtype=float)
    return -log_h / N
