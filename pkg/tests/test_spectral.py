import math

import numpy as np
import pytest

from bridgelab import (
    DiscreteMeasure,
    TrapPotential,
    build_grid,
    discretize_hamiltonian,
    dv_duality_check,
    dv_rate,
    principal_eigenpair,
    shifted_principal_eigenpair,
)


def _wall_pair(n=201):
    g = build_grid((0.0, math.pi), n)
    W = TrapPotential.hard_wall(((0.0, math.pi),))
    return g, W, principal_eigenpair(discretize_hamiltonian(W, g))


def test_wall_ground_state():
    g, _, res = _wall_pair()
    assert abs(res.lam - 1.0) < 1e-3
    phi_exact = math.sqrt(2.0 / math.pi) * np.sin(g.nodes[:, 0])
    assert np.max(np.abs(res.phi - phi_exact)) < 1e-3
    assert res.residual < 1e-8
    assert res.boundary_adequate


def test_harmonic_ground_state():
    g = build_grid((-8.0, 8.0), 401)
    W = TrapPotential.quadratic((1.0,))
    res = principal_eigenpair(discretize_hamiltonian(W, g))
    assert abs(res.lam - 1.0) < 1e-3
    phi_exact = math.pi ** -0.25 * np.exp(-g.nodes[:, 0] ** 2 / 2.0)
    assert np.max(np.abs(res.phi - phi_exact)) < 1e-3


def test_eigenvector_normalized_nonnegative():
    g, _, res = _wall_pair(101)
    assert float(np.sum(res.phi ** 2)) * g.cell_volume == pytest.approx(1.0, abs=1e-12)
    assert np.min(res.phi) >= -1e-12


def test_constant_shift_moves_eigenvalue_exactly():
    g = build_grid((-6.0, 6.0), 201)
    res1 = principal_eigenpair(discretize_hamiltonian(TrapPotential.quadratic((1.0,)), g))
    res2 = principal_eigenpair(
        discretize_hamiltonian(TrapPotential.quadratic((1.0,), offset=0.7), g)
    )
    assert res2.lam - res1.lam == pytest.approx(0.7, abs=1e-9)
    assert np.max(np.abs(res2.phi - res1.phi)) < 1e-9


def test_eigenvalue_monotone_in_potential():
    g = build_grid((-7.0, 7.0), 201)
    lam_soft = principal_eigenpair(
        discretize_hamiltonian(TrapPotential.quadratic((0.5,)), g)
    ).lam
    lam_hard = principal_eigenpair(
        discretize_hamiltonian(TrapPotential.quadratic((1.0,)), g)
    ).lam
    assert lam_soft <= lam_hard + 1e-12


def test_grid_refinement_is_second_order():
    errs = []
    for n in (51, 101, 201):
        _, _, res = _wall_pair(n)
        errs.append(abs(res.lam - 1.0))
    order1 = math.log2(errs[0] / errs[1])
    order2 = math.log2(errs[1] / errs[2])
    assert order1 > 1.8
    assert order2 > 1.8


def test_boundary_adequacy_flag():
    # box too small for the harmonic trap: boundary potential 4 < lam + 10
    g = build_grid((-2.0, 2.0), 101)
    res = principal_eigenpair(discretize_hamiltonian(TrapPotential.quadratic((1.0,)), g))
    assert not res.boundary_adequate
    g2 = build_grid((-8.0, 8.0), 101)
    res2 = principal_eigenpair(discretize_hamiltonian(TrapPotential.quadratic((1.0,)), g2))
    assert res2.boundary_adequate


def test_misaligned_wall_rejected():
    g = build_grid((0.0, 1.0), 11)
    with pytest.raises(ValueError):
        discretize_hamiltonian(TrapPotential.hard_wall(((0.05, 0.95),)), g)


def test_wall_inside_grid_restricts_unknowns():
    g = build_grid((0.0, 1.0), 11)
    op = discretize_hamiltonian(TrapPotential.hard_wall(((0.2, 0.8),)), g)
    # strictly interior wall nodes only: 0.3 ... 0.7
    assert op.n_active == 5
    res = principal_eigenpair(op)
    # ground state of the 0.6-wide box: (pi / 0.6)^2, on a coarse grid
    assert res.lam == pytest.approx((math.pi / 0.6) ** 2, rel=0.05)
    outside = np.abs(g.nodes[:, 0] - 0.5) >= 0.3
    assert np.all(res.phi[outside] == 0.0)


def test_interp_matches_nodes():
    g, _, res = _wall_pair(101)
    probe = g.nodes[[3, 50, 97], 0]
    assert np.allclose(res.interp(probe), res.phi[[3, 50, 97]])


def test_dv_rate_equals_rayleigh_quotient_of_eigenvector():
    for trap, bounds, n in (
        (TrapPotential.quadratic((1.0,)), (-8.0, 8.0), 301),
        (TrapPotential.hard_wall(((0.0, math.pi),)), (0.0, math.pi), 201),
    ):
        g = build_grid(bounds, n)
        res = principal_eigenpair(discretize_hamiltonian(trap, g))
        p = DiscreteMeasure.probability(g, res.phi ** 2)
        # the forward-difference energy matches the eliminated-Dirichlet
        # quadratic form, so the minimum is attained exactly at phi^2
        assert dv_rate(p, trap, g) == pytest.approx(res.lam, abs=1e-9)


def test_dv_rate_dominates_eigenvalue():
    g = build_grid((-8.0, 8.0), 201)
    W = TrapPotential.quadratic((1.0,))
    res = principal_eigenpair(discretize_hamiltonian(W, g))
    rng = np.random.default_rng(0)
    for _ in range(5):
        bump = np.exp(-((g.nodes[:, 0] - rng.uniform(-1, 1)) ** 2))
        p = DiscreteMeasure.probability(g, bump)
        assert dv_rate(p, W, g) >= res.lam - 1e-12


def test_dv_rate_infinite_off_wall():
    g = build_grid((-1.0, 1.0), 21)
    W = TrapPotential.hard_wall(((-0.5, 0.5),))
    p = DiscreteMeasure.probability(g, np.ones(21))
    assert dv_rate(p, W, g) == float("inf")


def test_dv_rate_requires_probability():
    g = build_grid((-1.0, 1.0), 21)
    W = TrapPotential.quadratic((1.0,))
    with pytest.raises(ValueError):
        dv_rate(DiscreteMeasure.lebesgue(g), W, g)


def test_shifted_eigenpair_constant_shift():
    g = build_grid((-7.0, 7.0), 201)
    W = TrapPotential.quadratic((1.0,))
    op = discretize_hamiltonian(W, g)
    base = principal_eigenpair(op)
    res = shifted_principal_eigenpair(op, np.full(g.n_nodes, 0.3))
    assert res.lam == pytest.approx(base.lam - 0.3, abs=1e-9)
    with pytest.raises(ValueError):
        shifted_principal_eigenpair(op, np.zeros(3))


def test_dv_duality_gap_small():
    g = build_grid((-6.0, 6.0), 121)
    W = TrapPotential.quadratic((1.0,))
    rng = np.random.default_rng(11)
    gap0 = dv_duality_check(np.zeros(g.n_nodes), W, g, rng=rng)
    assert gap0 < 1e-4
    gapc = dv_duality_check(np.full(g.n_nodes, 0.9), W, g, rng=rng)
    assert gapc < 1e-4
    smooth = 0.4 * np.cos(0.7 * g.nodes[:, 0]) + 0.4
    gap_s = dv_duality_check(smooth, W, g, rng=rng)
    assert gap_s < 1e-4


def test_dv_duality_accepts_callable():
    g = build_grid((-6.0, 6.0), 81)
    W = TrapPotential.quadratic((1.0,))
    gap = dv_duality_check(lambda pts: 0.2 * np.sin(pts[:, 0]) + 0.3, W, g)
    assert gap < 1e-4
