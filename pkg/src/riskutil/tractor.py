"""Online projected gradient descent over discretized utilities."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .caty import _expert_dist, planning_env
from .discretization import Grid
from .errors import InfeasibleError, InputError
from .planner import enlarged_return_distribution, plan
from .returns import index_frequencies, rollout_indices
from .utility import DiscretizedUtility, builtin_utility, discretize_utility, polytope_violation, project_polytope

# empirical step sizes: large steps for a single small environment, small ones for random suites.
# with several environments the best step tends to be much smaller than either.
ALPHA_PRESETS = {"survey": 100.0, "random": 1.0}
FEASIBILITY_TOL = 1e-8


@dataclass
class TractorConfig:
    T: int = 70
    K: int = 10_000
    alpha: float | str = 100.0  # a number, a preset name, or "theory"
    epsilon0: float = 0.01
    L: float | None = 10.0
    seed: int = 0
    U0: DiscretizedUtility | None = None  # linear utility when omitted
    variant: str = "strict"
    projection: str = "chain"
    exact_gradient: bool = False  # exact return law of the planned policy instead of K rollouts

    def __post_init__(self):
        if self.T < 1 or self.K < 1:
            raise InputError("T and K must be at least 1")
        if isinstance(self.alpha, str):
            if self.alpha != "theory" and self.alpha not in ALPHA_PRESETS:
                raise InputError(f"unknown step size {self.alpha!r}")
        elif not self.alpha > 0:
            raise InputError("alpha must be positive")


@dataclass
class LearnRecord:
    utilities: np.ndarray  # (T, d): the iterates U_0 .. U_{T-1}
    grad_norms: np.ndarray  # (T,)
    compat: np.ndarray  # (T,): sum over environments of J*(U_t) - <U_t, eta_E>
    final: DiscretizedUtility
    final_compat: float
    alpha: float
    grid: Grid
    per_env_final: list = field(default_factory=list)


def theory_step_size(grid: Grid, N: int, T: int) -> float:
    """D / (G sqrt(T)) with diameter D = H sqrt(d - 2) and gradient bound G = 2N."""
    if grid.d < 3:
        raise InputError(f"step size undefined for a grid with d={grid.d} < 3 points")
    if T < 1 or N < 1:
        raise InputError("N and T must be at least 1")
    return grid.horizon * math.sqrt(grid.d - 2) / (2.0 * N * math.sqrt(T))


def _resolve_alpha(cfg: TractorConfig, grid: Grid, N: int) -> float:
    if cfg.alpha == "theory":
        return theory_step_size(grid, N, cfg.T)
    if isinstance(cfg.alpha, str):
        return ALPHA_PRESETS[cfg.alpha]
    return float(cfg.alpha)


def _sum_compat(ubar: DiscretizedUtility, planned, etas, grid):
    total, rows, policies = 0.0, [], []
    for env, eta in zip(planned, etas):
        J_star, psi, _ = plan(ubar, env, grid)
        J_E = ubar.expectation(eta)
        rows.append((J_E, J_star, J_star - J_E))
        policies.append(psi)
        total += J_star - J_E
    return total, rows, policies


def learn(demo_sets, envs, models, config: TractorConfig) -> LearnRecord:
    """Projected gradient descent on the summed compatibility; returns the averaged iterate.

    demo_sets entries may be DemoDataset or exact ReturnDistribution objects; models entries
    are EmpiricalModel or "exact".
    """
    if not (len(demo_sets) == len(envs) == len(models)) or not envs:
        raise InputError("demo_sets, envs and models must be non-empty and of equal length")
    H = envs[0].H
    if any(env.H != H for env in envs):
        raise InputError("all environments must share the horizon H")
    grid = Grid(config.epsilon0, H)
    N = len(envs)
    alpha = _resolve_alpha(config, grid, N)
    if config.U0 is None:
        u0 = discretize_utility(builtin_utility("linear", H), grid).values
    else:
        if config.U0.grid.d != grid.d:
            raise InputError("initial utility lives on a different grid")
        u0 = config.U0.values
    if polytope_violation(u0, grid, config.L, config.variant) > FEASIBILITY_TOL:
        raise InfeasibleError("initial utility is outside the constraint polytope")
    etas = [_expert_dist(D, env, grid) for D, env in zip(demo_sets, envs)]
    eta_E = np.sum([e.weights for e in etas], axis=0)
    planned = [planning_env(env, m, grid) for env, m in zip(envs, models)]
    seeds = np.random.SeedSequence(config.seed)
    T = config.T
    iterates = np.empty((T, grid.d))
    grad_norms = np.empty(T)
    compat = np.empty(T)
    u = np.array(u0, dtype=float)
    for t in range(T):
        ubar = DiscretizedUtility(grid, u, config.L)
        iterates[t] = u
        compat[t], _, policies = _sum_compat(ubar, planned, etas, grid)
        step_seeds = seeds.spawn(1)[0].spawn(N)
        g = -eta_E.copy()
        for psi, env, ss in zip(policies, planned, step_seeds):
            if config.exact_gradient:
                g += enlarged_return_distribution(psi, env).weights
            else:
                idx = rollout_indices(psi, env, config.K, np.random.default_rng(ss))
                g += index_frequencies(idx, grid).weights
        grad_norms[t] = float(np.linalg.norm(g))
        u = project_polytope(u - alpha * g, grid, config.L, config.variant, config.projection).values.copy()
    final = DiscretizedUtility(grid, iterates.mean(axis=0), config.L)
    final_compat, rows, _ = _sum_compat(final, planned, etas, grid)
    return LearnRecord(iterates, grad_norms, compat, final, final_compat, alpha, grid, rows)
