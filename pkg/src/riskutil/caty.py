"""Compatibility of candidate utilities with demonstrations, and threshold classification."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .discretization import Grid, ReturnDistribution, discretize_reward, project_categorical
from .errors import InputError
from .mdp import HistoryPolicy, Mdp, exact_return_distribution
from .planner import plan
from .returns import DemoDataset, erd
from .utility import DiscretizedUtility, discretize_utility

TOL = 1e-9
EXACT = "exact"


def expert_distribution(env: Mdp, expert: HistoryPolicy, grid: Grid) -> ReturnDistribution:
    """Categorical projection of the exact return law of the expert."""
    law = exact_return_distribution(env, expert)
    return project_categorical(law.items(), grid)


def _expert_dist(demos, env: Mdp, grid: Grid) -> ReturnDistribution:
    if isinstance(demos, ReturnDistribution):
        if demos.grid.d != grid.d:
            raise InputError("expert distribution lives on a different grid")
        return demos
    if isinstance(demos, DemoDataset):
        return erd(demos, env, grid)
    raise InputError("demonstrations must be a DemoDataset or a ReturnDistribution")


def planning_env(env: Mdp, model, grid: Grid) -> Mdp:
    """env with empirical transitions (unless model is 'exact') and grid-snapped rewards."""
    base = env if model is None or model == EXACT else model.apply(env)
    return discretize_reward(base, grid)


def _as_discrete(utility, grid: Grid) -> DiscretizedUtility:
    if isinstance(utility, DiscretizedUtility):
        return utility
    return discretize_utility(utility, grid)


def compatibility(utility, demos, env: Mdp, model, grid: Grid):
    """(J_E, J*, C) with J_E = <U, erd(demos)>, J* planned on (p-hat, r-bar) and C = J* - J_E."""
    ubar = _as_discrete(utility, grid)
    eta = _expert_dist(demos, env, grid)
    J_E = ubar.expectation(eta)
    J_star, _, _ = plan(ubar, planning_env(env, model, grid), grid)
    return J_E, J_star, J_star - J_E


@dataclass
class CompatibilityReport:
    per_env: list  # (J_E, J_star, C) per environment
    threshold: float
    utility_id: str = ""
    env_ids: list = field(default_factory=list)

    @property
    def total(self) -> float:
        return float(sum(c for _, _, c in self.per_env))

    @property
    def accepted(self) -> bool:
        return self.total <= self.threshold + TOL


def classify(utilities, demo_sets, envs, models, delta: float, grid: Grid, utility_ids=None,
             env_ids=None) -> list[CompatibilityReport]:
    """Accept a utility when its summed compatibility over environments is at most delta.

    The grid may be a single Grid or one per environment.
    """
    if not (len(demo_sets) == len(envs) == len(models)):
        raise InputError("demo_sets, envs and models must have equal length")
    grids = list(grid) if isinstance(grid, (list, tuple)) else [grid] * len(envs)
    if len(grids) != len(envs):
        raise InputError("need one grid per environment")
    utility_ids = utility_ids or [str(i) for i in range(len(utilities))]
    env_ids = env_ids or [str(i) for i in range(len(envs))]
    etas = [_expert_dist(D, env, g) for D, env, g in zip(demo_sets, envs, grids)]
    planned = [planning_env(env, m, g) for env, m, g in zip(envs, models, grids)]
    reports = []
    for uid, u in zip(utility_ids, utilities):
        rows = []
        for eta, env, g in zip(etas, planned, grids):
            ubar = _as_discrete(u, g)
            J_E = ubar.expectation(eta)
            J_star, _, _ = plan(ubar, env, g)
            rows.append((J_E, J_star, J_star - J_E))
        reports.append(CompatibilityReport(rows, float(delta), uid, list(env_ids)))
    return reports


def relative_compatibility(utility, demos, env: Mdp, model, grid: Grid) -> float:
    J_E, J_star, C = compatibility(utility, demos, env, model, grid)
    if J_star <= TOL:
        raise InputError(f"optimal value {J_star!r} too small for a relative compatibility")
    return C / J_star


def report_rows(reports) -> list[tuple]:
    """Flat (utility_id, env_id, J_E, J_star, C, C_rel) rows; C_rel is NaN when J* vanishes."""
    rows = []
    for rep in reports:
        for env_id, (J_E, J_star, C) in zip(rep.env_ids, rep.per_env):
            rel = C / J_star if J_star > TOL else math.nan
            rows.append((rep.utility_id, env_id, J_E, J_star, C, rel))
    return rows


def percent_table(reports) -> str:
    """Relative compatibilities as percentages, one line per utility and one column per env."""
    if not reports:
        return ""
    env_ids = reports[0].env_ids
    width = max(8, *(len(r.utility_id) for r in reports))
    lines = ["".ljust(width) + "".join(e.rjust(10) for e in env_ids)]
    for rep in reports:
        cells = []
        for J_E, J_star, C in rep.per_env:
            cells.append(f"{100.0 * C / J_star:9.1f}%" if J_star > TOL else "       n/a")
        lines.append(rep.utility_id.ljust(width) + "".join(cells))
    return "\n".join(lines)
