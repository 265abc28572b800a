"""Configuration-driven experiment orchestration.

A config is a JSON object naming one experiment plus its numeric
parameters.  ``run_experiment`` executes it, writes CSV artifacts and a
``report.json`` into the output directory, and returns the report.  The
seed is mandatory: there is no wall-clock fallback, so two runs of the
same config produce bit-identical CSV files.  The ``full-suite``
experiment runs reduced-scale versions of every other experiment (its
trap/size fields come from built-in reference setups; only seed, output
directory and thread count are taken from the config).
"""
from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import diffusion as diff
from .bridges import fk_kernel_grid, gaussian_pair_matrix
from .ensemble import cycle_log_partition, ensemble_estimates, free_energy_curve, sample_sym_ensemble
from .fileio import save_measure, save_report, write_table
from .measures import DiscreteMeasure, Grid, build_grid, marginals, measure_distance
from .potentials import TrapPotential
from .spectral import (
    discretize_hamiltonian,
    dv_duality_check,
    dv_rate,
    principal_eigenpair,
    shifted_principal_eigenpair,
)
from .transport import (
    build_T_operator,
    eigen_schrodinger_solution,
    factorization_check,
    sinkhorn_bridge,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "CheckResult",
    "RunReport",
    "load_config",
    "config_from_dict",
    "run_experiment",
    "EXPERIMENTS",
]

EXPERIMENTS = (
    "spectral",
    "transport",
    "ensemble",
    "diffusion",
    "dv-check",
    "trace",
    "full-suite",
)

_ALLOWED_KEYS = {
    "experiment",
    "trap",
    "bounds",
    "n",
    "beta",
    "N",
    "M",
    "n_samples",
    "dt",
    "T_total",
    "tol",
    "seed",
    "out_dir",
}

_TRAP_KEYS = {
    "hard_wall": {"kind", "box"},
    "quadratic": {"kind", "coeffs", "offset"},
}


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    trap: TrapPotential
    bounds: tuple[tuple[float, float], ...]
    n: int
    beta: float
    N: int
    M: int
    n_samples: int
    dt: float
    T_total: float
    tol: float | None
    seed: int
    out_dir: str
    trap_spec: dict = field(default_factory=dict)

    def echo(self) -> dict:
        return {
            "experiment": self.experiment,
            "trap": self.trap_spec,
            "bounds": [list(b) for b in self.bounds],
            "n": self.n,
            "beta": self.beta,
            "N": self.N,
            "M": self.M,
            "n_samples": self.n_samples,
            "dt": self.dt,
            "T_total": self.T_total,
            "tol": self.tol,
            "seed": self.seed,
            "out_dir": self.out_dir,
        }


def _require_number(value, path: str, positive: bool = True) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"config field '{path}': expected a number, got {value!r}")
    v = float(value)
    if not math.isfinite(v):
        raise ConfigError(f"config field '{path}': expected a finite number, got {value!r}")
    if positive and v <= 0:
        raise ConfigError(f"config field '{path}': expected a positive number, got {value!r}")
    return v


def _require_int(value, path: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"config field '{path}': expected an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(f"config field '{path}': expected an integer >= {minimum}, got {value}")
    return value


def _trap_from_spec(spec) -> TrapPotential:
    if not isinstance(spec, dict):
        raise ConfigError(f"config field 'trap': expected an object, got {spec!r}")
    kind = spec.get("kind")
    if kind not in _TRAP_KEYS:
        raise ConfigError(
            f"config field 'trap.kind': expected one of {sorted(_TRAP_KEYS)}, got {kind!r}"
        )
    for key in spec:
        if key not in _TRAP_KEYS[kind]:
            raise ConfigError(f"unknown config key: 'trap.{key}'")
    if kind == "hard_wall":
        box = spec.get("box")
        if box is None:
            raise ConfigError("config field 'trap.box': required for hard_wall")
        try:
            arr = np.asarray(box, dtype=float)
            if arr.ndim == 1:
                arr = arr[None, :]
            if arr.ndim != 2 or arr.shape[1] != 2:
                raise ValueError("expected one [lo, hi] pair per axis")
            return TrapPotential.hard_wall(arr)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"config field 'trap.box': {e}") from e
    coeffs = spec.get("coeffs")
    if coeffs is None:
        raise ConfigError("config field 'trap.coeffs': required for quadratic")
    try:
        offset = float(spec.get("offset", 0.0))
        return TrapPotential.quadratic(np.asarray(coeffs, dtype=float), offset=offset)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"config field 'trap.coeffs': {e}") from e


def _bounds_from_spec(spec, trap: TrapPotential) -> tuple[tuple[float, float], ...]:
    if spec is None:
        if trap.is_hard_wall:
            return trap.box
        return tuple((-8.0, 8.0) for _ in range(trap.dimension))
    try:
        arr = np.asarray(spec, dtype=float)
        if arr.ndim == 1:
            arr = arr[None, :]
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError("expected one [lo, hi] pair per axis")
        return tuple((float(a), float(b)) for a, b in arr)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"config field 'bounds': {e}") from e


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    for key in data:
        if key not in _ALLOWED_KEYS:
            raise ConfigError(f"unknown config key: {key!r}")
    if "seed" not in data:
        raise ConfigError("seed required")
    seed = _require_int(data["seed"], "seed", minimum=0)
    experiment = data.get("experiment", "full-suite")
    if experiment not in EXPERIMENTS:
        raise ConfigError(
            f"config field 'experiment': expected one of {list(EXPERIMENTS)}, got {experiment!r}"
        )
    trap_spec = data.get("trap", {"kind": "hard_wall", "box": [[0.0, math.pi]]})
    trap = _trap_from_spec(trap_spec)
    bounds = _bounds_from_spec(data.get("bounds"), trap)
    n = _require_int(data.get("n", 201), "n", minimum=1)
    # surface grid construction problems (n=1, degenerate interval) at load time
    try:
        build_grid(bounds, n)
    except ValueError as e:
        raise ConfigError(f"config field 'n': {e}") from e
    tol = data.get("tol")
    if tol is not None:
        tol = _require_number(tol, "tol")
    return ExperimentConfig(
        experiment=experiment,
        trap=trap,
        bounds=bounds,
        n=n,
        beta=_require_number(data.get("beta", 1.0), "beta"),
        N=_require_int(data.get("N", 8), "N"),
        M=_require_int(data.get("M", 32), "M"),
        n_samples=_require_int(data.get("n_samples", 2000), "n_samples"),
        dt=_require_number(data.get("dt", 1e-3), "dt"),
        T_total=_require_number(data.get("T_total", 200.0), "T_total"),
        tol=tol,
        seed=seed,
        out_dir=str(data.get("out_dir", "out")),
        trap_spec=trap_spec if isinstance(trap_spec, dict) else {},
    )


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path) as f:
            data = json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read config file: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from e
    return config_from_dict(data)


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    tolerance: float
    passed: bool


@dataclass
class RunReport:
    config: dict
    checks: list[CheckResult]
    artifacts: list[str]
    timings: dict[str, float]
    results: dict

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def as_dict(self) -> dict:
        return {
            "config": self.config,
            "checks": [
                {
                    "name": c.name,
                    "value": c.value,
                    "tolerance": c.tolerance,
                    "passed": c.passed,
                }
                for c in sorted(self.checks, key=lambda c: c.name)
            ],
            "artifacts": sorted(self.artifacts),
            "results": self.results,
            "timings": self.timings,
            "all_passed": self.all_passed,
        }


def _bound_check(name: str, value: float, tolerance: float) -> CheckResult:
    ok = bool(np.isfinite(value)) and bool(value <= tolerance)
    return CheckResult(name=name, value=float(value), tolerance=float(tolerance), passed=ok)


def _grid_of(cfg: ExperimentConfig) -> Grid:
    return build_grid(cfg.bounds, cfg.n)


def _tv(p: DiscreteMeasure, r: DiscreteMeasure) -> float:
    return measure_distance(p, r).tv


# ---------------------------------------------------------------------------
# individual experiments: each returns (checks, artifact files, results)


def _exp_spectral(cfg: ExperimentConfig, rng, out):
    grid = _grid_of(cfg)
    op = discretize_hamiltonian(cfg.trap, grid)
    res = principal_eigenpair(op)
    vol = grid.cell_volume
    checks = [
        _bound_check("spectral.residual", res.residual, 1e-8 * abs(res.lam) + 1e-10),
        _bound_check("spectral.normalization", abs(float(np.sum(res.phi ** 2)) * vol - 1.0), 1e-12),
        _bound_check("spectral.nonnegative", max(0.0, -float(np.min(res.phi))), 1e-12),
        _bound_check("spectral.boundary_adequate", 0.0 if res.boundary_adequate else 1.0, 0.5),
    ]
    cols = {"node": np.arange(grid.n_nodes)}
    for k in range(grid.dimension):
        cols[f"x{k}"] = grid.nodes[:, k]
    cols["phi"] = res.phi
    write_table(os.path.join(out, "phi.csv"), cols, {"kind": "eigenfunction", "lam": res.lam})
    save_measure(
        os.path.join(out, "density.csv"),
        DiscreteMeasure(grid, res.phi ** 2, is_probability=True),
    )
    results = {"lam": res.lam, "residual": res.residual}
    return checks, ["phi.csv", "density.csv"], results


def _exp_transport(cfg: ExperimentConfig, rng, out):
    grid = _grid_of(cfg)
    beta = cfg.beta
    res = principal_eigenpair(discretize_hamiltonian(cfg.trap, grid))
    K = fk_kernel_grid(cfg.trap, beta, grid)
    g = gaussian_pair_matrix(grid, beta)
    m = DiscreteMeasure.lebesgue(grid)
    sol = eigen_schrodinger_solution(K, g, m)
    neg_log = -math.log(sol.lambda_T)
    ref = DiscreteMeasure(grid, sol.phi_T ** 2 * m.weights, is_probability=True)
    row, col = marginals(sol.q_star)
    marg_tv = max(_tv(row, ref), _tv(col, ref))

    K_eff = m.masses[:, None] * build_T_operator(K, g, m)
    sink = sinkhorn_bridge(K_eff, ref, ref, tol=1e-12)
    pair_tv = 0.5 * float(np.abs(sink.q_star.masses - sol.q_star.masses).sum())
    fact = factorization_check(sol.q_star, K_eff, rng=rng)

    checks = [
        _bound_check(
            "transport.eigen_trace_gap",
            abs(neg_log - beta * res.lam) / abs(beta * res.lam),
            0.02,
        ),
        _bound_check("transport.marginal_tv", marg_tv, 1e-8),
        _bound_check("transport.objective_gap", abs(sol.objective - neg_log), 1e-6),
        _bound_check("transport.sinkhorn_eigen_tv", pair_tv, 1e-6),
        _bound_check("transport.factorization", fact, 1e-6),
        _bound_check(
            "transport.symmetry",
            sol.q_star.max_asymmetry() * grid.cell_volume ** 2,
            1e-10,
        ),
    ]
    save_measure(os.path.join(out, "q_marginal.csv"), row)
    cols = {"node": np.arange(grid.n_nodes)}
    for k in range(grid.dimension):
        cols[f"x{k}"] = grid.nodes[:, k]
    cols["phi_T"] = sol.phi_T
    write_table(
        os.path.join(out, "phi_T.csv"), cols, {"kind": "perron", "lambda_T": sol.lambda_T}
    )
    write_table(
        os.path.join(out, "sinkhorn_errors.csv"),
        {
            "iteration": np.arange(1, sink.error_history.size + 1),
            "marginal_error": sink.error_history,
        },
        {"kind": "ipfp_history", "damped": sink.damped},
    )
    results = {
        "lambda_T": sol.lambda_T,
        "neg_log_lambda_T": neg_log,
        "beta_lambda": beta * res.lam,
        "objective": sol.objective,
        "sinkhorn_iterations": sink.iterations,
    }
    return checks, ["q_marginal.csv", "phi_T.csv", "sinkhorn_errors.csv"], results


def _null_tv_scale(
    weights: np.ndarray, points: np.ndarray, grid: Grid, rng, n_pairs: int = 16
) -> float:
    """Mean TV between two bootstrap copies of the same weighted histogram.

    ``points`` has shape (S, N, d); resampling acts on whole samples so the
    within-sample correlation of the N particles is preserved.
    """
    S, N, d = points.shape
    vals = []
    for _ in range(n_pairs):
        hists = []
        for _ in range(2):
            idx = rng.integers(0, S, size=S)
            hm = np.bincount(
                grid.nearest_node(points[idx].reshape(-1, d)),
                weights=np.repeat(weights[idx], N),
                minlength=grid.n_nodes,
            )
            total = hm.sum()
            hists.append(hm / total if total > 0 else hm)
        vals.append(0.5 * float(np.abs(hists[0] - hists[1]).sum()))
    return float(np.mean(vals))


def _exp_ensemble(cfg: ExperimentConfig, rng, out):
    grid = _grid_of(cfg)
    beta = cfg.beta
    m = DiscreteMeasure.probability(grid, np.ones(grid.n_nodes))
    samples = [
        sample_sym_ensemble(m, cfg.N, beta, cfg.M, cfg.trap, rng)
        for _ in range(cfg.n_samples)
    ]
    marks = [0.0, beta / 4.0, beta / 2.0, 3.0 * beta / 4.0, beta]
    est = ensemble_estimates(samples, grid, marks)

    # One Strang step must mix over at least one grid spacing, so coarse
    # grids get delta = h^2/2 rather than the (finer) default step count.
    h = min(grid.spacing)
    steps = max(2, min(10_000, math.ceil(2.0 * beta / (h * h))))
    K = fk_kernel_grid(cfg.trap, beta, grid, steps=steps)
    B = build_T_operator(K, None, m)
    z_exact = float(np.exp(cycle_log_partition(B, cfg.N)[cfg.N - 1]))
    z_score = abs(est.z_hat - z_exact) / est.z_se if est.z_se > 0 else 0.0

    # Time reversal maps the ensemble to itself, so the marginal laws at
    # beta/4 and 3 beta/4 coincide.  (At 0 and beta the point multisets are
    # equal sample by sample, which would make the comparison vacuous.)
    tv_rev = _tv(est.l_marginals[beta / 4.0], est.l_marginals[3.0 * beta / 4.0])
    w = np.exp(np.array([s.log_weight for s in samples]))
    k_q = int(np.argmin(np.abs(samples[0].times - beta / 4.0)))
    q_pts = np.stack([s.positions[:, k_q, :] for s in samples])
    null_scale = _null_tv_scale(w, q_pts, grid, rng)

    range_ok = 0.0 if 0.0 < est.z_hat <= 1.0 + 1e-12 else 1.0
    checks = [
        _bound_check("ensemble.z_zscore", z_score, 3.0),
        _bound_check("ensemble.z_in_range", range_ok, 0.5),
        _bound_check("ensemble.reversal_tv", tv_rev, 3.0 * null_scale),
    ]
    save_measure(os.path.join(out, "y_hat.csv"), est.y_hat)
    save_measure(os.path.join(out, "l_t0.csv"), est.l_marginals[0.0])
    save_measure(os.path.join(out, "l_mid.csv"), est.l_marginals[beta / 2.0])
    save_measure(os.path.join(out, "l_tbeta.csv"), est.l_marginals[beta])
    results = {
        "z_hat": est.z_hat,
        "z_se": est.z_se,
        "z_exact": z_exact,
        "ess": est.ess,
        "reversal_null_scale": null_scale,
    }
    return checks, ["y_hat.csv", "l_t0.csv", "l_mid.csv", "l_tbeta.csv"], results


def _cell_masses(fine: DiscreteMeasure, coarse: Grid) -> np.ndarray:
    """Exact coarse-cell integrals of the piecewise-constant fine density.

    Nearest-node binning of fine nodes would quantize the coarse cell
    edges to the fine grid and alias mass between neighbouring cells;
    spreading each fine-node mass uniformly over its own cell and clipping
    against the coarse cells avoids that.  The outermost coarse cells are
    open-ended, matching the clipped histogram of the SDE runs.
    """
    xf = fine.grid.nodes[:, 0]
    hf = fine.grid.spacing[0]
    lo_f = xf - hf / 2.0
    hi_f = xf + hf / 2.0
    xc = coarse.nodes[:, 0]
    hc = coarse.spacing[0]
    edges = np.concatenate(([-np.inf], (xc[:-1] + xc[1:]) / 2.0, [np.inf]))
    masses = np.empty(coarse.n_nodes)
    dens = fine.masses / hf
    for j in range(coarse.n_nodes):
        overlap = np.minimum(hi_f, edges[j + 1]) - np.maximum(lo_f, edges[j])
        masses[j] = float(np.sum(dens * np.clip(overlap, 0.0, None)))
    total = masses.sum()
    return masses / total


def _exp_diffusion(cfg: ExperimentConfig, rng, out):
    grid = _grid_of(cfg)
    res = principal_eigenpair(discretize_hamiltonian(cfg.trap, grid))
    drift = diff.ground_state_drift(res)
    init = DiscreteMeasure(grid, res.phi ** 2, is_probability=True)
    occ_grid = build_grid(cfg.bounds, 17)
    sde = diff.simulate_ergodic_sde(
        drift,
        init,
        cfg.T_total,
        cfg.dt,
        rng,
        trap=cfg.trap if cfg.trap.is_hard_wall else None,
        occupation_grid=occ_grid,
    )
    ref = _cell_masses(init, occ_grid)
    l1 = float(np.abs(sde.occupation.masses - ref).sum())

    x0 = grid.nodes[int(np.argmax(res.phi))]
    mart_mean, mart_se = diff.martingale_check(
        x0, cfg.beta, res.lam, res, cfg.trap, cfg.n_samples, rng
    )
    mart_z = abs(mart_mean - 1.0) / mart_se if mart_se > 0 else 0.0

    occupation_tol = cfg.tol if cfg.tol is not None else 0.05
    checks = [
        _bound_check("diffusion.occupation_l1", l1, occupation_tol),
        _bound_check("diffusion.rejection_rate", sde.rejection_rate, 0.5),
        _bound_check("diffusion.martingale_z", mart_z, 3.0),
    ]
    save_measure(os.path.join(out, "occupation.csv"), sde.occupation)
    write_table(
        os.path.join(out, "trajectory.csv"),
        {"time": sde.times, "x0": sde.positions[:, 0]},
        {"kind": "thinned_trajectory", "dt": cfg.dt},
    )
    results = {
        "rejection_rate": sde.rejection_rate,
        "martingale_mean": mart_mean,
        "martingale_se": mart_se,
        "occupation_l1": l1,
    }
    return checks, ["occupation.csv", "trajectory.csv"], results


def _smooth_fields(grid: Grid, count: int, rng) -> list[np.ndarray]:
    """Bounded smooth test functions: low-order cosines with random phases."""
    spans = [hi - lo for lo, hi in zip(grid.lower, grid.upper)]
    out = []
    for _ in range(count):
        f = np.full(grid.n_nodes, float(rng.uniform(-0.5, 0.5)))
        for k in range(grid.dimension):
            x = grid.nodes[:, k]
            for j in range(1, 4):
                amp = rng.uniform(-0.5, 0.5) / j
                phase = rng.uniform(0.0, 2.0 * math.pi)
                f = f + amp * np.cos(j * math.pi * (x - grid.lower[k]) / spans[k] + phase)
        out.append(f)
    return out


def _exp_dv_check(cfg: ExperimentConfig, rng, out):
    grid = _grid_of(cfg)
    W = cfg.trap
    fields = [np.zeros(grid.n_nodes), np.full(grid.n_nodes, 0.7)]
    fields.extend(_smooth_fields(grid, 10, rng))
    kinds = ["zero", "constant"] + [f"random{i}" for i in range(10)]

    op = discretize_hamiltonian(W, grid)
    gaps = []
    identity_errs = []
    for fvals in fields:
        gaps.append(dv_duality_check(fvals, W, grid, rng=rng))
        # eigen identity: dv_rate(phi_f^2) = lam(W - f) + <f, phi_f^2>
        res_f = shifted_principal_eigenpair(op, fvals)
        p_hat = DiscreteMeasure(grid, res_f.phi ** 2, is_probability=True)
        lin = float(np.sum(fvals * p_hat.masses))
        identity_errs.append(abs(dv_rate(p_hat, W, grid) - (res_f.lam + lin)))

    gap_tol = cfg.tol if cfg.tol is not None else 1e-4
    checks = [
        _bound_check("dv.gap_max", max(gaps), gap_tol),
        _bound_check("dv.rayleigh_identity", max(identity_errs), 1e-8),
    ]
    write_table(
        os.path.join(out, "gaps.csv"),
        {
            "index": np.arange(len(gaps)),
            "gap": np.array(gaps),
            "eigen_identity_error": np.array(identity_errs),
        },
        {"kind": "dv_gaps"},
    )
    results = {"gap_max": max(gaps), "kinds": kinds}
    return checks, ["gaps.csv"], results


def _exp_trace(cfg: ExperimentConfig, rng, out):
    grid = _grid_of(cfg)
    res = principal_eigenpair(discretize_hamiltonian(cfg.trap, grid))
    K = fk_kernel_grid(cfg.trap, cfg.beta, grid)
    curve = free_energy_curve(K, cfg.N)
    target = cfg.beta * res.lam
    errs = np.abs(curve - target)
    tail = errs[cfg.N // 2 :]
    max_increase = float(np.max(np.diff(tail))) if tail.size > 1 else 0.0
    checks = [
        _bound_check("trace.final_error_rel", errs[-1] / abs(target), 0.05),
        _bound_check("trace.tail_monotone", max_increase, 1e-12),
    ]
    write_table(
        os.path.join(out, "free_energy.csv"),
        {
            "N": np.arange(1, cfg.N + 1),
            "value": curve,
            "abs_error": errs,
        },
        {"kind": "free_energy", "beta_lambda": target},
    )
    results = {"beta_lambda": target, "final_value": float(curve[-1])}
    return checks, ["free_energy.csv"], results


_RUNNERS = {
    "spectral": _exp_spectral,
    "transport": _exp_transport,
    "ensemble": _exp_ensemble,
    "diffusion": _exp_diffusion,
    "dv-check": _exp_dv_check,
    "trace": _exp_trace,
}


def _suite_configs(cfg: ExperimentConfig) -> list[ExperimentConfig]:
    """Reduced-scale reference setups for the composite run."""
    pi = math.pi
    wall = TrapPotential.hard_wall([[0.0, pi]])
    harmonic = TrapPotential.quadratic([1.0])
    soft = TrapPotential.quadratic([0.5])
    base = dict(tol=None, out_dir=cfg.out_dir)

    def mk(i, experiment, trap, trap_spec, bounds, **kw):
        params = dict(
            n=201, beta=1.0, N=8, M=32, n_samples=2000, dt=1e-3, T_total=200.0
        )
        params.update(base)
        params.update(kw)
        return ExperimentConfig(
            experiment=experiment,
            trap=trap,
            bounds=bounds,
            seed=cfg.seed + i,
            trap_spec=trap_spec,
            **params,
        )

    wall_spec = {"kind": "hard_wall", "box": [[0.0, pi]]}
    harm_spec = {"kind": "quadratic", "coeffs": [1.0]}
    soft_spec = {"kind": "quadratic", "coeffs": [0.5]}
    return [
        mk(1, "spectral", wall, wall_spec, ((0.0, pi),)),
        mk(2, "trace", wall, wall_spec, ((0.0, pi),), N=8),
        mk(3, "transport", harmonic, harm_spec, ((-6.0, 6.0),), n=121),
        mk(4, "dv-check", harmonic, harm_spec, ((-6.0, 6.0),), n=161),
        mk(
            5,
            "ensemble",
            soft,
            soft_spec,
            ((-4.0, 4.0),),
            n=41,
            beta=0.5,
            N=3,
            M=16,
            n_samples=400,
        ),
        mk(
            6,
            "diffusion",
            harmonic,
            harm_spec,
            ((-5.0, 5.0),),
            n=101,
            T_total=300.0,
            tol=0.2,
            n_samples=20000,
        ),
    ]


def _run_single(cfg: ExperimentConfig, name: str, out_sub: str):
    os.makedirs(out_sub, exist_ok=True)
    rng = np.random.default_rng(cfg.seed)
    t0 = time.perf_counter()
    try:
        checks, files, results = _RUNNERS[name](cfg, rng, out_sub)
    except Exception as e:  # captured per-experiment so siblings still run
        checks = [
            CheckResult(
                name=f"{name}.completed", value=float("inf"), tolerance=0.0, passed=False
            )
        ]
        files = []
        results = {"error": f"{type(e).__name__}: {e}"}
    elapsed = time.perf_counter() - t0
    return checks, files, results, elapsed


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> RunReport:
    """Execute the configured experiment; write artifacts and report.json."""
    os.makedirs(cfg.out_dir, exist_ok=True)
    checks: list[CheckResult] = []
    artifacts: list[str] = []
    results: dict = {}
    timings: dict[str, float] = {}

    if cfg.experiment == "full-suite":
        subs = _suite_configs(cfg)
        jobs = [
            (sub, sub.experiment, os.path.join(cfg.out_dir, sub.experiment))
            for sub in subs
        ]
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                outcomes = list(pool.map(lambda j: _run_single(*j), jobs))
        else:
            outcomes = [_run_single(*j) for j in jobs]
        for (sub, name, out_sub), (cks, files, res, elapsed) in zip(jobs, outcomes):
            checks.extend(cks)
            artifacts.extend(os.path.join(name, f) for f in files)
            results[name] = res
            timings[name] = elapsed
    else:
        cks, files, res, elapsed = _run_single(cfg, cfg.experiment, cfg.out_dir)
        checks.extend(cks)
        artifacts.extend(files)
        results[cfg.experiment] = res
        timings[cfg.experiment] = elapsed

    report = RunReport(
        config=cfg.echo(),
        checks=checks,
        artifacts=artifacts,
        timings=timings,
        results=results,
    )
    save_report(os.path.join(cfg.out_dir, "report.json"), report.as_dict())
    return report
