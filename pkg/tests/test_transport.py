import math

import numpy as np
import pytest

from bridgelab import (
    DiscreteMeasure,
    PairMeasure,
    ReducibleOperatorError,
    SupportMismatchError,
    TrapPotential,
    build_grid,
    build_T_operator,
    eigen_schrodinger_solution,
    factorization_check,
    fk_kernel_grid,
    gaussian_pair_matrix,
    marginals,
    minimizing_pair_measure,
    schrodinger_objective,
    sinkhorn_bridge,
    t_eigenpair,
)


def _harmonic_setup(beta=0.5, n=41):
    g = build_grid((-4.0, 4.0), n)
    W = TrapPotential.quadratic((0.5,))
    K = fk_kernel_grid(W, beta, g, steps=64)
    return g, K


def test_t_operator_reduces_to_kernel_for_free_pair_weight():
    g, K = _harmonic_setup()
    m = DiscreteMeasure.lebesgue(g)
    p = gaussian_pair_matrix(g, K.beta)
    T = build_T_operator(K, p, m)
    np.testing.assert_allclose(T, K.matrix * g.cell_volume, rtol=1e-12)


def test_t_operator_validation():
    g, K = _harmonic_setup(n=21)
    m = DiscreteMeasure.lebesgue(g)
    with pytest.raises(ValueError):
        build_T_operator(K, np.ones((3, 3)), m)
    with pytest.raises(ValueError):
        build_T_operator(K, np.zeros((21, 21)), m)
    other = DiscreteMeasure.lebesgue(build_grid((-4.0, 4.0), 31))
    with pytest.raises(ValueError):
        build_T_operator(K, None, other)


def test_t_eigenpair_2x2_oracle():
    g = build_grid((0.0, 1.0), 2)
    m = DiscreteMeasure.lebesgue(g)  # two nodes, unit masses
    T = np.array([[2.0, 1.0], [1.0, 2.0]])
    lam, phi = t_eigenpair(T, m)
    assert lam == pytest.approx(3.0, abs=1e-11)
    np.testing.assert_allclose(phi, [1 / math.sqrt(2)] * 2, atol=1e-10)
    # m-normalization: sum phi^2 m = 1
    assert float(np.sum(phi ** 2 * m.masses)) == pytest.approx(1.0, abs=1e-12)


def test_t_eigenpair_rejects_reducible_support():
    g = build_grid((0.0, 1.0), 2)
    m = DiscreteMeasure.lebesgue(g)
    with pytest.raises(ReducibleOperatorError):
        t_eigenpair(np.diag([1.0, 2.0]), m)
    with pytest.raises(ReducibleOperatorError):
        t_eigenpair(np.zeros((2, 2)), m)


def test_minimizing_pair_measure_marginals():
    g, K = _harmonic_setup()
    m = DiscreteMeasure.lebesgue(g)
    T = build_T_operator(K, None, m)
    lam, phi = t_eigenpair(T, m)
    q = minimizing_pair_measure(lam, phi, K, None, m)
    assert q.is_probability
    assert q.max_asymmetry() < 1e-14
    mu1, mu2 = marginals(q)
    target = phi ** 2 * m.masses
    np.testing.assert_allclose(mu1.masses, target, atol=1e-11)
    np.testing.assert_allclose(mu2.masses, target, atol=1e-11)


def test_objective_value_at_optimum_is_neg_log_perron_root():
    g, K = _harmonic_setup()
    m = DiscreteMeasure.lebesgue(g)
    sol = eigen_schrodinger_solution(K, None, m)
    assert sol.objective == pytest.approx(-math.log(sol.lambda_T), abs=1e-9)


def test_objective_dominated_by_optimum():
    g, K = _harmonic_setup(n=31)
    m = DiscreteMeasure.lebesgue(g)
    sol = eigen_schrodinger_solution(K, None, m)
    rng = np.random.default_rng(4)
    x = g.nodes[:, 0]
    for _ in range(6):
        a = np.exp(-((x - rng.uniform(-1, 1)) ** 2) / rng.uniform(0.5, 2.0))
        b = np.exp(-((x - rng.uniform(-1, 1)) ** 2) / rng.uniform(0.5, 2.0))
        q = PairMeasure.probability(g, np.outer(a, b))
        assert schrodinger_objective(q, m, K, None) >= sol.objective - 1e-10


def test_objective_requires_probability():
    g, K = _harmonic_setup(n=21)
    m = DiscreteMeasure.lebesgue(g)
    q = PairMeasure(g, np.ones((21, 21)))
    with pytest.raises(ValueError):
        schrodinger_objective(q, m, K, None)


def test_sinkhorn_rank_one_kernel_gives_product_measure():
    g = build_grid((0.0, 1.0), 9)
    x = g.nodes[:, 0]
    nu1 = DiscreteMeasure.probability(g, np.exp(-x))
    nu2 = DiscreteMeasure.probability(g, 1.0 + x)
    a = np.exp(0.3 * x)
    b = 1.0 + 0.5 * x ** 2
    sol = sinkhorn_bridge(np.outer(a, b), nu1, nu2)
    np.testing.assert_allclose(
        sol.q_star.masses, np.outer(nu1.masses, nu2.masses), atol=1e-12
    )
    assert sol.marginal_error < 1e-10


def test_sinkhorn_identity_kernel_equal_marginals_is_diagonal():
    g = build_grid((0.0, 1.0), 7)
    nu = DiscreteMeasure.probability(g, 1.0 + g.nodes[:, 0])
    sol = sinkhorn_bridge(np.eye(7), nu, nu)
    np.testing.assert_allclose(sol.q_star.masses, np.diag(nu.masses), atol=1e-12)


def test_sinkhorn_matches_eigen_route():
    g, K = _harmonic_setup()
    m = DiscreteMeasure.lebesgue(g)
    sol = eigen_schrodinger_solution(K, None, m)
    nu = DiscreteMeasure.probability(g, sol.phi_T ** 2 * m.weights)
    T = build_T_operator(K, None, m)
    ipfp = sinkhorn_bridge(T, nu, nu)
    assert ipfp.marginal_error < 1e-10
    tv = 0.5 * float(np.sum(np.abs(ipfp.q_star.masses - sol.q_star.masses)))
    assert tv < 1e-9
    mu1, mu2 = marginals(ipfp.q_star)
    np.testing.assert_allclose(mu1.masses, nu.masses, atol=1e-10)
    np.testing.assert_allclose(mu2.masses, nu.masses, atol=1e-10)


def test_sinkhorn_support_mismatch():
    g = build_grid((0.0, 1.0), 2)
    nu1 = DiscreteMeasure(g, np.array([1.0, 0.0]), is_probability=True)
    nu2 = DiscreteMeasure(g, np.array([0.0, 1.0]), is_probability=True)
    with pytest.raises(SupportMismatchError):
        sinkhorn_bridge(np.eye(2), nu1, nu2)


def test_sinkhorn_validation():
    g = build_grid((0.0, 1.0), 3)
    nu = DiscreteMeasure.probability(g, np.ones(3))
    with pytest.raises(ValueError):
        sinkhorn_bridge(-np.ones((3, 3)), nu, nu)
    with pytest.raises(ValueError):
        sinkhorn_bridge(np.ones((3, 3)), DiscreteMeasure.lebesgue(g), nu)


def test_factorization_check_rank_one_exact():
    g = build_grid((0.0, 1.0), 6)
    rng = np.random.default_rng(6)
    K_eff = rng.uniform(0.2, 1.0, size=(6, 6))
    a = rng.uniform(0.5, 2.0, size=6)
    b = rng.uniform(0.5, 2.0, size=6)
    q = PairMeasure.probability(g, a[:, None] * K_eff * b[None, :])
    assert factorization_check(q, K_eff) < 1e-12


def test_factorization_check_detects_perturbation():
    g = build_grid((0.0, 1.0), 6)
    rng = np.random.default_rng(6)
    K_eff = rng.uniform(0.2, 1.0, size=(6, 6))
    w = np.outer(rng.uniform(0.5, 2.0, size=6), rng.uniform(0.5, 2.0, size=6)) * K_eff
    w[2, 4] *= 2.0
    q = PairMeasure.probability(g, w)
    assert factorization_check(q, K_eff) >= math.log(2.0) - 1e-9


def test_factorization_check_rejects_support_violation():
    g = build_grid((0.0, 1.0), 3)
    K_eff = np.eye(3)
    q = PairMeasure.probability(g, np.ones((3, 3)))
    with pytest.raises(ValueError):
        factorization_check(q, K_eff)


def test_eigen_bundle_fields():
    g, K = _harmonic_setup(n=31)
    m = DiscreteMeasure.lebesgue(g)
    sol = eigen_schrodinger_solution(K, None, m)
    assert sol.lambda_T is not None and 0 < sol.lambda_T < math.inf
    assert sol.phi_T.shape == (31,)
    assert sol.q_star.is_probability
    assert sol.potentials is None
