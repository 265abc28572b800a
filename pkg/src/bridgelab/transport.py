"""Entropic transport built on Feynman-Kac kernels.

Two independent routes to the optimal pair measure are implemented and
cross-checked against each other:

* the eigen route: the positive operator
  ``T f(x) = int f(y) (K/p_beta)(x,y) g(x,y) m(dy)`` has a Perron
  eigenpair (lambda_T, phi_T); the minimizer is
  ``q*(x,y) = phi_T(x) phi_T(y) (K/p_beta)(x,y) g(x,y) m(dx) m(dy) / lambda_T``
  with both marginals phi_T^2 m and optimal objective value -log lambda_T;

* iterative proportional fitting (Sinkhorn): given both marginals, scale
  rows and columns of a kernel until the marginals match.

The objective being minimized over pair probability measures q is
``H(q | qbar x m) - <q, log(K/p_beta)> - <q, log g>`` where qbar is the
first marginal of q itself.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .bridges import FKKernel, gaussian_pair_matrix
from .measures import DiscreteMeasure, PairMeasure

__all__ = [
    "SchrodingerSolution",
    "TransportError",
    "ReducibleOperatorError",
    "SupportMismatchError",
    "SinkhornError",
    "build_T_operator",
    "t_eigenpair",
    "minimizing_pair_measure",
    "schrodinger_objective",
    "sinkhorn_bridge",
    "factorization_check",
    "eigen_schrodinger_solution",
]


class TransportError(RuntimeError):
    pass


class ReducibleOperatorError(TransportError):
    """The operator's support graph is disconnected."""


class SupportMismatchError(TransportError):
    """A marginal puts mass where the kernel cannot deliver any."""


class SinkhornError(TransportError):
    """IPFP failed to reach the requested marginal tolerance."""


@dataclass(frozen=True)
class SchrodingerSolution:
    """Solution bundle; eigen-route fields or IPFP potentials may be None."""

    q_star: PairMeasure
    lambda_T: float | None = None
    phi_T: np.ndarray | None = None
    objective: float | None = None
    potentials: tuple[np.ndarray, np.ndarray] | None = None
    iterations: int = 0
    marginal_error: float = 0.0
    error_history: np.ndarray | None = None
    damped: bool = False


def _normalized_ratio(K: FKKernel) -> np.ndarray:
    """K / p_beta entry-wise; equals E[exp(-int W)] over each bridge."""
    p = gaussian_pair_matrix(K.grid, K.beta)
    with np.errstate(invalid="ignore"):
        ratio = np.where(p > 0, K.matrix / np.where(p > 0, p, 1.0), 0.0)
    return ratio


def _check_g(g: np.ndarray | None, n: int) -> np.ndarray | None:
    if g is None:
        return None
    garr = np.asarray(g, dtype=float)
    if garr.shape != (n, n):
        raise ValueError(f"g must be an {n} x {n} matrix")
    if np.any(garr <= 0) or not np.all(np.isfinite(garr)):
        raise ValueError("g must be strictly positive and finite")
    return garr


def build_T_operator(K: FKKernel, g: np.ndarray | None, m: DiscreteMeasure) -> np.ndarray:
    """Matrix of T: column j carries the m-mass of node j.

    ``g = None`` means g identically one; passing g = p_beta reduces T to
    K * cell_volume for Lebesgue m.
    """
    n = K.grid.n_nodes
    if m.grid.n_nodes != n:
        raise ValueError("m lives on a different grid")
    garr = _check_g(g, n)
    ratio = _normalized_ratio(K)
    if garr is not None:
        ratio = ratio * garr
    return ratio * (m.masses)[None, :]


def t_eigenpair(
    T: np.ndarray,
    m: DiscreteMeasure,
    tol: float = 1e-12,
    max_iter: int = 100000,
) -> tuple[float, np.ndarray]:
    """Perron eigenvalue and m-normalized eigenfunction by power iteration.

    Convergence requires both a relative eigenvalue increment below ``tol``
    and a fixed-point residual ||T phi - lambda phi||_inf / lambda below
    1e-10.  A disconnected support graph is rejected.
    """
    n = T.shape[0]
    support = (T > 0) | (T.T > 0)
    incident = support.any(axis=1)
    if incident.sum() == 0:
        raise ReducibleOperatorError("operator is identically zero")
    graph = sp.csr_matrix(support[np.ix_(incident, incident)])
    n_comp, _ = connected_components(graph, directed=False)
    if n_comp > 1:
        raise ReducibleOperatorError(
            f"operator support splits into {n_comp} components"
        )
    D = m.masses
    v = incident.astype(float)
    lam_prev = np.inf
    lam = np.nan
    for it in range(1, max_iter + 1):
        u = T @ v
        norm = math.sqrt(float(np.sum(u * u * D)))
        if norm == 0.0 or not np.isfinite(norm):
            raise ReducibleOperatorError("power iteration collapsed to zero")
        u /= norm
        Tu = T @ u
        lam = float(np.sum(u * Tu * D) / np.sum(u * u * D))
        resid = float(np.max(np.abs(Tu - lam * u)))
        v = u
        if (
            abs(lam - lam_prev) <= tol * abs(lam)
            and resid <= 1e-10 * abs(lam)
        ):
            break
        lam_prev = lam
    else:
        raise TransportError(f"power iteration did not converge in {max_iter} iterations")
    phi = v / math.sqrt(float(np.sum(v * v * D)))
    if phi.sum() < 0:
        phi = -phi
    return lam, phi


def minimizing_pair_measure(
    lambda_T: float,
    phi_T: np.ndarray,
    K: FKKernel,
    g: np.ndarray | None,
    m: DiscreteMeasure,
) -> PairMeasure:
    """Optimal pair measure of the eigen route, normalized to mass one."""
    n = K.grid.n_nodes
    garr = _check_g(g, n)
    ratio = _normalized_ratio(K)
    if garr is not None:
        ratio = ratio * garr
    fm = phi_T * m.weights
    q = np.outer(fm, fm) * ratio / lambda_T
    total = q.sum() * K.grid.cell_volume ** 2
    if abs(total - 1.0) > 1e-6:
        raise TransportError(f"eigen pair measure has mass {total}, expected 1")
    return PairMeasure(K.grid, q / total, is_probability=True)


def schrodinger_objective(
    q: PairMeasure,
    m: DiscreteMeasure,
    K: FKKernel,
    g: np.ndarray | None,
) -> float:
    """H(q | qbar x m) - <q, log K/p_beta> - <q, log g>; +inf off support."""
    if not q.is_probability:
        raise ValueError("objective expects a probability pair measure")
    n = K.grid.n_nodes
    garr = _check_g(g, n)
    vol = K.grid.cell_volume
    qm = q.masses
    pos = qm > 0
    qbar = q.weights.sum(axis=1) * vol  # first-marginal density
    ref = np.outer(qbar, m.weights)
    if np.any(ref[pos] <= 0):
        return float("inf")
    ratio = _normalized_ratio(K)
    if np.any(ratio[pos] <= 0):
        return float("inf")
    ent = float(np.sum(qm[pos] * (np.log(q.weights[pos]) - np.log(ref[pos]))))
    kern = float(np.sum(qm[pos] * np.log(ratio[pos])))
    gterm = 0.0
    if garr is not None:
        gterm = float(np.sum(qm[pos] * np.log(garr[pos])))
    return ent - kern - gterm


def sinkhorn_bridge(
    K_eff: np.ndarray,
    nu1: DiscreteMeasure,
    nu2: DiscreteMeasure,
    tol: float = 1e-10,
    max_iter: int = 100000,
) -> SchrodingerSolution:
    """IPFP scaling of K_eff to the prescribed marginals.

    Marginal errors are measured in density units (sup norm).  No damping
    is used until the error grows twice, after which geometric 0.5 damping
    in the log domain stabilizes the remaining iterations.
    """
    K_arr = np.asarray(K_eff, dtype=float)
    n = K_arr.shape[0]
    if K_arr.shape != (n, n) or np.any(K_arr < 0):
        raise ValueError("K_eff must be a square nonnegative matrix")
    for nu in (nu1, nu2):
        if abs(nu.total_mass - 1.0) > 1e-9:
            raise ValueError("marginals must be probability measures")
    vol = nu1.grid.cell_volume
    r = nu1.masses
    c = nu2.masses
    Ir = np.flatnonzero(r > 0)
    Ic = np.flatnonzero(c > 0)
    sub = K_arr[np.ix_(Ir, Ic)]
    if np.any(sub.sum(axis=1) == 0) or np.any(sub.sum(axis=0) == 0):
        raise SupportMismatchError(
            "a marginal requires mass where the kernel has empty support"
        )
    rI = r[Ir]
    cI = c[Ic]
    u = np.ones(Ir.size)
    v = np.ones(Ic.size)
    errors = []
    damped = False
    increases = 0
    it = 0
    for it in range(1, max_iter + 1):
        u_raw = rI / (sub @ v)
        u = np.sqrt(u * u_raw) if damped else u_raw
        v_raw = cI / (sub.T @ u)
        v = np.sqrt(v * v_raw) if damped else v_raw
        row = u * (sub @ v)
        col = v * (sub.T @ u)
        err = max(
            float(np.max(np.abs(row - rI))), float(np.max(np.abs(col - cI)))
        ) / vol
        errors.append(err)
        if err < tol:
            break
        if len(errors) >= 2 and errors[-1] > errors[-2]:
            increases += 1
            if increases >= 2:
                damped = True
    else:
        raise SinkhornError(
            f"IPFP stalled at marginal error {errors[-1]:.3e} after {max_iter} iterations"
        )
    P = np.zeros((n, n))
    P[np.ix_(Ir, Ic)] = u[:, None] * sub * v[None, :]
    with np.errstate(divide="ignore"):
        log_u = np.full(n, -np.inf)
        log_u[Ir] = np.log(u)
        log_v = np.full(n, -np.inf)
        log_v[Ic] = np.log(v)
    q = PairMeasure.probability(nu1.grid, P / vol ** 2)
    return SchrodingerSolution(
        q_star=q,
        potentials=(log_u, log_v),
        iterations=it,
        marginal_error=errors[-1],
        error_history=np.array(errors),
        damped=damped,
    )


def factorization_check(
    q: PairMeasure,
    K_eff: np.ndarray,
    n_quadruples: int = 4096,
    rng: np.random.Generator | None = None,
) -> float:
    """Largest log-domain rank-one violation of q relative to K_eff.

    For q(x,y) = a(x) K_eff(x,y) b(y) the residual r = log q - log K_eff
    satisfies r(x,y) + r(x',y') - r(x,y') - r(x',y) = 0.  The check scans
    all quadruples anchored at the heaviest entry of q plus a sampled batch
    of random quadruples, and returns the largest absolute violation.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    K_arr = np.asarray(K_eff, dtype=float)
    supp = q.weights > 0
    if np.any(supp & ~(K_arr > 0)):
        raise ValueError("q has mass where K_eff vanishes")
    safe_q = np.where(supp, q.weights, 1.0)
    safe_k = np.where(K_arr > 0, K_arr, 1.0)
    r = np.where(supp, np.log(safe_q) - np.log(safe_k), np.nan)
    i0, j0 = np.unravel_index(np.argmax(q.weights), q.weights.shape)
    e = r - r[:, [j0]] - r[[i0], :] + r[i0, j0]
    valid = np.isfinite(e)
    worst = float(np.max(np.abs(e[valid]))) if np.any(valid) else 0.0

    ii, jj = np.nonzero(supp)
    if ii.size >= 2 and n_quadruples > 0:
        a = rng.integers(0, ii.size, size=n_quadruples)
        b = rng.integers(0, ii.size, size=n_quadruples)
        x, y = ii[a], jj[a]
        xp, yp = ii[b], jj[b]
        vals = r[x, y] + r[xp, yp] - r[x, yp] - r[xp, y]
        ok = np.isfinite(vals)
        if np.any(ok):
            worst = max(worst, float(np.max(np.abs(vals[ok]))))
    return worst


def eigen_schrodinger_solution(
    K: FKKernel,
    g: np.ndarray | None,
    m: DiscreteMeasure,
    tol: float = 1e-12,
) -> SchrodingerSolution:
    """Bundle the eigen route: Perron pair, q*, and its objective value."""
    T = build_T_operator(K, g, m)
    lam, phi = t_eigenpair(T, m, tol=tol)
    q = minimizing_pair_measure(lam, phi, K, g, m)
    obj = schrodinger_objective(q, m, K, g)
    return SchrodingerSolution(
        q_star=q, lambda_T=lam, phi_T=phi, objective=obj
    )
