import itertools
import math

import numpy as np
import pytest

from bridgelab import (
    DiscreteMeasure,
    EstimationError,
    TrapPotential,
    build_grid,
    cycle_log_partition,
    ensemble_estimates,
    fk_kernel_grid,
    free_energy_curve,
    sample_permutation,
    sample_sym_ensemble,
    sym_trace_exact,
)


def test_permutation_uniform_over_s3():
    rng = np.random.default_rng(7)
    counts: dict[tuple[int, ...], int] = {}
    trials = 12000
    for _ in range(trials):
        sigma, _ = sample_permutation(3, rng)
        counts[tuple(sigma)] = counts.get(tuple(sigma), 0) + 1
    assert len(counts) == 6
    for c in counts.values():
        # binomial(12000, 1/6): sd ~ 34
        assert abs(c - trials / 6) < 5 * math.sqrt(trials * (1 / 6) * (5 / 6))


def test_cycle_type_structure():
    rng = np.random.default_rng(3)
    four_cycles = 0
    trials = 8000
    for _ in range(trials):
        _, ctype = sample_permutation(4, rng)
        assert sum(ctype) == 4
        assert ctype == tuple(sorted(ctype))
        if ctype == (4,):
            four_cycles += 1
    # P(4-cycle) = 1/4
    assert abs(four_cycles / trials - 0.25) < 4 * math.sqrt(0.25 * 0.75 / trials)


def test_permutation_n1():
    rng = np.random.default_rng(0)
    sigma, ctype = sample_permutation(1, rng)
    assert sigma.tolist() == [0]
    assert ctype == (1,)
    with pytest.raises(ValueError):
        sample_permutation(0, rng)


def _uniform_start(grid):
    return DiscreteMeasure.probability(grid, np.ones(grid.n_nodes))


def test_ensemble_ends_are_permuted_starts():
    g = build_grid((-2.0, 2.0), 21)
    rng = np.random.default_rng(5)
    s = sample_sym_ensemble(_uniform_start(g), 6, 0.4, 16, None, rng)
    assert s.positions.shape == (6, 17, 1)
    np.testing.assert_array_equal(s.positions[:, 0, :], s.starts)
    np.testing.assert_array_equal(s.positions[:, -1, :], s.starts[s.permutation])
    assert s.log_weight == pytest.approx(float(s.path_log_weights.sum()))
    assert len(s.paths) == 6


def test_ensemble_requires_probability_start():
    g = build_grid((-2.0, 2.0), 21)
    rng = np.random.default_rng(5)
    with pytest.raises(ValueError):
        sample_sym_ensemble(DiscreteMeasure.lebesgue(g), 3, 0.4, 16, None, rng)


def test_constant_potential_weight_is_deterministic():
    g = build_grid((-2.0, 2.0), 21)
    W = TrapPotential.quadratic((), offset=1.3)
    rng = np.random.default_rng(9)
    N, beta = 4, 0.6
    samples = [sample_sym_ensemble(_uniform_start(g), N, beta, 32, W, rng) for _ in range(50)]
    est = ensemble_estimates(samples, g, [0.0, beta])
    assert est.z_hat == pytest.approx(math.exp(-N * 1.3 * beta), rel=1e-12)
    assert est.z_se == pytest.approx(0.0, abs=1e-15)
    assert est.ess == pytest.approx(50.0)


def test_z_hat_matches_cycle_recursion():
    # harmonic trap, modest grid; MC estimate within 4 standard errors
    g = build_grid((-4.0, 4.0), 41)
    W = TrapPotential.quadratic((0.5,))
    beta, N = 0.5, 3
    h = g.spacing[0]
    steps = max(2, min(10_000, math.ceil(2.0 * beta / h ** 2)))
    K = fk_kernel_grid(W, beta, g, steps=steps)
    # the MC weights integrate W along bridges between grid nodes drawn
    # from uniform m; the matching exact object replaces each bridge by the
    # ratio of trapped to free transition kernels and averages over sigma
    # and starts.  With m uniform over n nodes, that is h_N of the matrix
    # A[i, j] = K[i, j] / (n * p_free(i, j)) summed against ones, which the
    # cycle recursion evaluates through traces of A.
    from bridgelab import gaussian_pair_matrix

    p_free = gaussian_pair_matrix(g, beta)
    A = K.matrix / (p_free * g.n_nodes)
    z_exact = float(np.exp(cycle_log_partition(A, N)[N - 1]))

    rng = np.random.default_rng(42)
    m = _uniform_start(g)
    samples = [sample_sym_ensemble(m, N, beta, steps, W, rng) for _ in range(1600)]
    est = ensemble_estimates(samples, g, [0.0, beta])
    assert est.z_se > 0
    assert abs(est.z_hat - z_exact) < 4 * est.z_se


def test_start_and_end_marginals_coincide():
    # ends are a permutation of starts, so the two histograms are equal
    # sample by sample, not just in distribution
    g = build_grid((-3.0, 3.0), 31)
    rng = np.random.default_rng(13)
    W = TrapPotential.quadratic((1.0,))
    samples = [sample_sym_ensemble(_uniform_start(g), 5, 0.3, 16, W, rng) for _ in range(40)]
    est = ensemble_estimates(samples, g, [0.0, 0.3])
    l0 = est.l_marginals[0.0]
    lb = est.l_marginals[0.3]
    np.testing.assert_allclose(l0.masses, lb.masses, atol=1e-14)


def test_occupation_is_probability():
    g = build_grid((-3.0, 3.0), 31)
    rng = np.random.default_rng(1)
    samples = [
        sample_sym_ensemble(_uniform_start(g), 3, 0.5, 24, TrapPotential.quadratic((1.0,)), rng)
        for _ in range(30)
    ]
    est = ensemble_estimates(samples, g, [0.25])
    assert est.y_hat.total_mass == pytest.approx(1.0, abs=1e-9)
    assert est.l_marginals[0.25].total_mass == pytest.approx(1.0, abs=1e-9)


def test_all_weights_zero_raises():
    # starts drawn outside the wall make every path weight vanish
    g = build_grid((-2.0, 2.0), 21)
    W = TrapPotential.hard_wall(((10.0, 11.0),))
    rng = np.random.default_rng(2)
    samples = [sample_sym_ensemble(_uniform_start(g), 2, 0.2, 8, W, rng) for _ in range(5)]
    with pytest.raises(EstimationError):
        ensemble_estimates(samples, g, [0.0])
    with pytest.raises(ValueError):
        ensemble_estimates([], g, [0.0])


def _brute_force_sym_trace(A: np.ndarray, N: int) -> float:
    """h_N by direct enumeration: (1/N!) sum_sigma prod over cycles Tr(A^len)."""
    traces = {ell: float(np.trace(np.linalg.matrix_power(A, ell))) for ell in range(1, N + 1)}
    total = 0.0
    for sigma in itertools.permutations(range(N)):
        seen = [False] * N
        prod = 1.0
        for i in range(N):
            if seen[i]:
                continue
            length, j = 0, i
            while not seen[j]:
                seen[j] = True
                j = sigma[j]
                length += 1
            prod *= traces[length]
        total += prod
    return total / math.factorial(N)


def test_cycle_recursion_matches_brute_force():
    rng = np.random.default_rng(8)
    B = rng.uniform(0.1, 1.0, size=(5, 5))
    A = (B + B.T) / 2.0
    log_h = cycle_log_partition(A, 5)
    for N in range(1, 6):
        assert math.exp(log_h[N - 1]) == pytest.approx(_brute_force_sym_trace(A, N), rel=1e-12)


def test_sym_trace_n2_closed_form():
    g = build_grid((0.0, math.pi), 41)
    W = TrapPotential.hard_wall(((0.0, math.pi),))
    K = fk_kernel_grid(W, 0.4, g, steps=200)
    A = K.matrix * g.cell_volume
    expected = 0.5 * (np.trace(A) ** 2 + np.trace(A @ A))
    assert sym_trace_exact(K, 2) == pytest.approx(float(expected), rel=1e-12)


def test_cycle_recursion_validation():
    with pytest.raises(ValueError):
        cycle_log_partition(np.eye(3), 0)
    with pytest.raises(ValueError):
        cycle_log_partition(np.ones((2, 3)), 2)
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])
    with pytest.raises(ValueError):
        cycle_log_partition(rot, 2)


def test_free_energy_tail_approaches_ground_state():
    g = build_grid((-6.0, 6.0), 121)
    W = TrapPotential.quadratic((1.0,))
    beta = 0.5
    K = fk_kernel_grid(W, beta, g, steps=64)
    f = free_energy_curve(K, 40)
    # converges to beta * lambda from below as N grows
    assert abs(f[-1] - beta * 1.0) < 0.02
    tail = f[-6:]
    assert np.all(np.diff(np.abs(tail - beta * 1.0)) <= 1e-12)
