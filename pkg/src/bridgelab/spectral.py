"""Finite-difference principal eigenpairs of -Delta + W, and the
Donsker-Varadhan rate with its Legendre duality check.

The Hamiltonian acts on functions vanishing at the grid boundary and at
hard-wall faces (Dirichlet rows are eliminated, not kept): the unknowns are
the strictly interior, finite-potential nodes.  The Laplacian uses the
central [-1, 2, -1] / h^2 stencil per axis (5-point stencil in d=2), so the
quadratic form of the operator equals the forward-difference Dirichlet
energy used by :func:`dv_rate` on densities vanishing at the boundary; the
Rayleigh bound dv_rate(phi^2) >= lambda then holds exactly up to rounding.

``lambda(W)`` always denotes the bottom of the spectrum: the variational
value inf over normalized phi of ||grad phi||^2 + <W, phi^2>.  (Some texts
write the corresponding sup-form with the opposite sign; the inf form is
used consistently here.)
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .measures import DiscreteMeasure, Grid
from .potentials import TrapPotential
from .bridges import check_wall_alignment

__all__ = [
    "HamiltonianOperator",
    "SpectralResult",
    "EigenSolveError",
    "OptimizationError",
    "discretize_hamiltonian",
    "principal_eigenpair",
    "shifted_principal_eigenpair",
    "dv_rate",
    "dv_duality_check",
]


class EigenSolveError(RuntimeError):
    """Raised when inverse iteration hits its cap; carries the last iterate."""

    def __init__(self, message: str, lam: float, phi: np.ndarray, residual: float):
        super().__init__(message)
        self.lam = lam
        self.phi = phi
        self.residual = residual


class OptimizationError(RuntimeError):
    """Raised when no gradient-ascent start converges."""


@dataclass(frozen=True)
class HamiltonianOperator:
    """Sparse -Delta_h + diag(values) over the active nodes of a grid."""

    matrix: sp.csr_matrix
    grid: Grid
    active: np.ndarray            # flat node indices carrying unknowns
    diagonal_values: np.ndarray   # potential values at the active nodes
    # smallest soft-trap value on the grid boundary; +inf for hard walls,
    # where truncation is exact rather than approximate
    boundary_potential_min: float = np.inf

    @property
    def n_active(self) -> int:
        return self.active.shape[0]


@dataclass(frozen=True)
class SpectralResult:
    """Principal eigenpair: phi is defined on the full grid, zero off the
    active set, nonnegative, and normalized so sum(phi^2) * cell_volume = 1."""

    lam: float
    phi: np.ndarray
    residual: float
    grid: Grid
    boundary_adequate: bool = True

    def interp(self, points: np.ndarray) -> np.ndarray:
        """Linear interpolation of phi at arbitrary points."""
        pts = np.asarray(points, dtype=float)
        g = self.grid
        if g.dimension == 1:
            x = pts[..., 0] if pts.ndim > 1 else pts
            return np.interp(x, g.axis(0), self.phi)
        from scipy.interpolate import RegularGridInterpolator

        n = g.points_per_axis
        itp = RegularGridInterpolator(
            (g.axis(0), g.axis(1)),
            self.phi.reshape(n, n),
            bounds_error=False,
            fill_value=0.0,
        )
        return itp(np.atleast_2d(pts))


def _active_mask(W: TrapPotential, grid: Grid) -> np.ndarray:
    wvals = W.on_grid(grid)
    mask = ~grid.boundary_mask()
    finite = np.isfinite(wvals)
    if not W.is_hard_wall:
        if not np.all(finite[mask]):
            raise ValueError("potential is infinite at an interior node")
        return mask
    check_wall_alignment(W, grid)
    nodes = grid.nodes
    tol = min(grid.spacing) * 1e-6
    for k, (lo, hi) in enumerate(W.box):
        mask &= (nodes[:, k] > lo + tol) & (nodes[:, k] < hi - tol)
    return mask


def _assemble(grid: Grid, active_mask: np.ndarray, diag_values: np.ndarray) -> tuple[sp.csr_matrix, np.ndarray]:
    """Sparse operator over active nodes; diag_values indexed by flat node."""
    n = grid.points_per_axis
    d = grid.dimension
    shape = (n,) * d
    active = np.flatnonzero(active_mask)
    pos_of = -np.ones(grid.n_nodes, dtype=np.int64)
    pos_of[active] = np.arange(active.size)

    inv_h2 = [1.0 / h ** 2 for h in grid.spacing]
    diag = np.full(active.size, 2.0 * sum(inv_h2))
    diag += diag_values[active]

    rows, cols, vals = [list(range(0)) for _ in range(3)]
    multi = np.array(np.unravel_index(active, shape))
    for k in range(d):
        nb = multi.copy()
        nb[k] += 1
        ok = nb[k] < n
        nb_flat = np.ravel_multi_index(tuple(nb[:, ok]), shape)
        src = active[ok]
        good = pos_of[nb_flat] >= 0
        r = pos_of[src[good]]
        c = pos_of[nb_flat[good]]
        v = np.full(r.size, -inv_h2[k])
        rows.extend([r, c])
        cols.extend([c, r])
        vals.extend([v, v])
    rows.append(np.arange(active.size))
    cols.append(np.arange(active.size))
    vals.append(diag)
    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(active.size, active.size),
    ).tocsr()
    return mat, active


def discretize_hamiltonian(W: TrapPotential, grid: Grid) -> HamiltonianOperator:
    """Finite-difference -Delta + W with Dirichlet elimination."""
    if W.dimension != grid.dimension:
        raise ValueError("potential and grid dimensions differ")
    mask = _active_mask(W, grid)
    if not np.any(mask):
        raise ValueError("no active nodes: grid entirely absorbed")
    wvals = W.on_grid(grid)
    boundary_min = np.inf
    if not W.is_hard_wall:
        boundary_min = float(np.min(wvals[grid.boundary_mask()]))
    wvals = np.where(np.isfinite(wvals), wvals, 0.0)
    mat, active = _assemble(grid, mask, wvals)
    return HamiltonianOperator(
        matrix=mat,
        grid=grid,
        active=active,
        diagonal_values=wvals[active],
        boundary_potential_min=boundary_min,
    )


def _inverse_iteration(
    mat: sp.csr_matrix,
    grid: Grid,
    tol: float,
    max_iter: int,
) -> tuple[float, np.ndarray, float]:
    m = mat.shape[0]
    vol = grid.cell_volume
    # Gershgorin lower bound: shifting below the whole spectrum makes the
    # bottom eigenvalue the one nearest sigma, so the first sweeps lock onto
    # it before Rayleigh shifts take over.
    diag = mat.diagonal()
    offdiag = np.asarray(abs(mat).sum(axis=1)).ravel() - np.abs(diag)
    sigma = float(np.min(diag - offdiag)) - 1.0
    ident = sp.identity(m, format="csc")
    lu = splu((mat - sigma * ident).tocsc())
    v = np.ones(m) / np.sqrt(m)
    rho_prev = np.inf
    rho, resid = np.nan, np.inf
    for it in range(max_iter):
        try:
            w = lu.solve(v)
        except RuntimeError:
            sigma -= 1e-10 * max(1.0, abs(sigma))
            lu = splu((mat - sigma * ident).tocsc())
            w = lu.solve(v)
        nw = np.linalg.norm(w)
        if not np.isfinite(nw) or nw == 0.0:
            sigma -= 1e-8 * max(1.0, abs(sigma))
            lu = splu((mat - sigma * ident).tocsc())
            continue
        v = w / nw
        Av = mat @ v
        rho = float(v @ Av)
        resid = float(np.linalg.norm(Av - rho * v) * np.sqrt(vol))
        if (
            abs(rho - rho_prev) <= tol * max(abs(rho), 1e-300)
            and resid <= 1e-8 * abs(rho) + 1e-10
        ):
            break
        rho_prev = rho
        # Rayleigh-quotient shift after the first sweep: cubic convergence.
        if it >= 1:
            sigma = rho
            lu = splu((mat - sigma * ident).tocsc())
    else:
        raise EigenSolveError(
            f"inverse iteration did not converge in {max_iter} iterations",
            lam=rho,
            phi=v,
            residual=resid,
        )
    if v.sum() < 0:
        v = -v
    v = v / np.sqrt((v @ v) * vol)
    Av = mat @ v
    rho = float(v @ Av * vol)
    resid = float(np.linalg.norm(Av - rho * v) * np.sqrt(vol))
    return rho, v, resid


def principal_eigenpair(
    op: HamiltonianOperator,
    tol: float = 1e-12,
    max_iter: int = 200,
) -> SpectralResult:
    """Smallest eigenvalue and nonnegative eigenvector by shifted inverse
    power iteration (LU-factorized solves, Rayleigh-quotient shifts)."""
    lam, vec, resid = _inverse_iteration(op.matrix, op.grid, tol, max_iter)
    phi = np.zeros(op.grid.n_nodes)
    phi[op.active] = vec
    # Truncation diagnostic for soft traps: the box must dominate lambda,
    # otherwise the artificial Dirichlet boundary contaminates the eigenpair.
    boundary_ok = op.boundary_potential_min >= lam + 10.0
    return SpectralResult(
        lam=lam, phi=phi, residual=resid, grid=op.grid, boundary_adequate=boundary_ok
    )


def shifted_principal_eigenpair(op: HamiltonianOperator, f) -> SpectralResult:
    """Principal eigenpair of -Delta + W - f for a bounded grid function f."""
    fv = np.asarray(f, dtype=float)
    if fv.shape != (op.grid.n_nodes,):
        raise ValueError("f must provide one value per grid node")
    shifted = (op.matrix - sp.diags(fv[op.active])).tocsr()
    lam, vec, resid = _inverse_iteration(shifted, op.grid, 1e-12, 200)
    phi = np.zeros(op.grid.n_nodes)
    phi[op.active] = vec
    return SpectralResult(lam=lam, phi=phi, residual=resid, grid=op.grid)


def dv_rate(p: DiscreteMeasure, W: TrapPotential, grid: Grid) -> float:
    """Donsker-Varadhan rate of a probability density p on the grid.

    Computes ||grad_h phi||^2 + <W, phi^2> with phi = sqrt(dp/dx) and
    forward differences over grid edges.  Returns +inf when p charges a
    node where W is infinite.
    """
    if p.grid is not grid and (
        p.grid.lower != grid.lower
        or p.grid.upper != grid.upper
        or p.grid.points_per_axis != grid.points_per_axis
    ):
        raise ValueError("measure and grid disagree")
    if abs(p.total_mass - 1.0) > 1e-9:
        raise ValueError("dv_rate expects a probability measure")
    wvals = W.on_grid(grid)
    charged = p.weights > 0
    if np.any(~np.isfinite(wvals) & charged):
        return float("inf")
    phi = np.sqrt(p.weights)
    vol = grid.cell_volume
    n = grid.points_per_axis
    energy = 0.0
    if grid.dimension == 1:
        h = grid.spacing[0]
        energy = float(np.sum(np.diff(phi) ** 2) / h ** 2 * vol)
    else:
        f = phi.reshape(n, n)
        for k, h in enumerate(grid.spacing):
            energy += float(np.sum(np.diff(f, axis=k) ** 2) / h ** 2 * vol)
    pot = float(np.sum(np.where(charged, wvals, 0.0) * p.weights) * vol)
    return energy + pot


def _rayleigh_minimize(
    mat: sp.csr_matrix,
    rng: np.random.Generator,
    n_starts: int = 5,
    max_iter: int = 40000,
    gtol: float = 1e-10,
) -> tuple[float, np.ndarray]:
    """Minimize the Rayleigh quotient by normalized gradient descent.

    Barzilai-Borwein step sizes on the unit sphere, multi-start; returns the
    lowest converged value (ties resolved by the objective itself).
    """
    m = mat.shape[0]
    lmax_bound = float(np.max(np.abs(mat).sum(axis=1)))
    best: tuple[float, np.ndarray] | None = None
    converged_any = False
    for _ in range(n_starts):
        v = rng.standard_normal(m)
        v /= np.linalg.norm(v)
        g_prev = None
        v_prev = None
        alpha = 1.0 / lmax_bound
        for _ in range(max_iter):
            Av = mat @ v
            rho = float(v @ Av)
            g = Av - rho * v
            gn = np.linalg.norm(g)
            if gn <= gtol * (1.0 + abs(rho)):
                converged_any = True
                if best is None or rho < best[0]:
                    best = (rho, v.copy())
                break
            if v_prev is not None:
                s = v - v_prev
                y = g - g_prev
                sy = float(s @ y)
                alpha = float(s @ s) / sy if sy > 0 else 1.0 / lmax_bound
            v_prev = v.copy()
            g_prev = g.copy()
            v = v - alpha * g
            v /= np.linalg.norm(v)
        else:
            # keep the best non-converged value as a fallback candidate
            if best is None:
                best = (rho, v.copy())
    if not converged_any:
        raise OptimizationError("no gradient-descent start converged")
    return best


def dv_duality_check(
    f,
    W: TrapPotential,
    grid: Grid,
    rng: np.random.Generator | None = None,
    n_starts: int = 5,
) -> float:
    """Gap between the two sides of the Legendre duality for dv_rate.

    Side (a): minus the bottom eigenvalue of -Delta + W - f (eigensolver).
    Side (b): sup over probability densities p of <f, p> - dv_rate(p),
    computed by direct multi-start gradient ascent over sqrt-densities.
    Returns |a - b|.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    fvals = f(grid.nodes) if callable(f) else np.asarray(f, dtype=float)
    if fvals.shape != (grid.n_nodes,):
        raise ValueError("f must provide one value per grid node")
    op = discretize_hamiltonian(W, grid)
    shifted = op.matrix - sp.diags(fvals[op.active])
    lam_minus, _, _ = _inverse_iteration(shifted.tocsr(), grid, 1e-12, 200)

    rho_opt, v_opt = _rayleigh_minimize(shifted.tocsr(), rng, n_starts=n_starts)
    phi_full = np.zeros(grid.n_nodes)
    phi_full[op.active] = v_opt
    p_hat = DiscreteMeasure.probability(grid, phi_full ** 2)
    value_b = float(np.sum(fvals * p_hat.masses)) - dv_rate(p_hat, W, grid)
    return abs((-lam_minus) - value_b)
