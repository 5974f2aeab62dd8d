"""Demonstration datasets and the return-distribution estimators (ERD and ROLLOUT)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .discretization import Grid, ReturnDistribution, projection_weights, snap_rewards
from .errors import CoverageError, InputError
from .mdp import HistoryPolicy, Mdp, Trajectory, episode_returns, sample_episodes


@dataclass(frozen=True, eq=False)
class DemoDataset:
    """tau^E expert trajectories stored as arrays: states (n, H+1) and actions (n, H)."""

    states: np.ndarray
    actions: np.ndarray
    env_id: int = 0

    def __post_init__(self):
        st = np.array(self.states, dtype=np.int64)
        ac = np.array(self.actions, dtype=np.int64)
        if st.ndim != 2 or ac.ndim != 2 or st.shape[0] != ac.shape[0] or st.shape[1] != ac.shape[1] + 1:
            raise InputError("demonstrations must be states (n, H+1) and actions (n, H)")
        st.setflags(write=False)
        ac.setflags(write=False)
        object.__setattr__(self, "states", st)
        object.__setattr__(self, "actions", ac)

    @property
    def count(self) -> int:
        return self.states.shape[0]

    @property
    def trajectories(self) -> list[Trajectory]:
        return [Trajectory(tuple(zip(s[:-1], a)), s[-1]) for s, a in zip(self.states, self.actions)]

    @classmethod
    def from_trajectories(cls, trajs, env_id: int = 0) -> DemoDataset:
        trajs = list(trajs)
        if not trajs:
            return cls(np.zeros((0, 1), dtype=np.int64), np.zeros((0, 0), dtype=np.int64), env_id)
        H = len(trajs[0].steps)
        if any(len(t.steps) != H for t in trajs):
            raise InputError("trajectories have different lengths")
        states = [[s for s, _ in t.steps] + [t.terminal_state] for t in trajs]
        actions = [[a for _, a in t.steps] for t in trajs]
        return cls(np.array(states), np.array(actions).reshape(len(trajs), H), env_id)

    def check(self, mdp: Mdp):
        if self.count and self.actions.shape[1] != mdp.H:
            raise InputError(f"demonstrations have length {self.actions.shape[1]}, environment H={mdp.H}")
        if np.any((self.states < 0) | (self.states >= mdp.S)) or np.any((self.actions < 0) | (self.actions >= mdp.A)):
            raise InputError("demonstration index out of range for the environment")

    def to_json(self) -> dict:
        return {"trajs": [t.to_json() for t in self.trajectories]}

    @classmethod
    def from_json(cls, data: dict, env_id: int = 0) -> DemoDataset:
        if "trajs" not in data:
            raise InputError("trajectory file missing key 'trajs'")
        return cls.from_trajectories([Trajectory.from_json(t) for t in data["trajs"]], env_id)


def sample_demos(mdp: Mdp, policy: HistoryPolicy, n: int, rng_seed, env_id: int = 0) -> DemoDataset:
    states, actions = sample_episodes(mdp, policy, n, rng_seed)
    return DemoDataset(states, actions, env_id)


def erd(demos: DemoDataset, mdp: Mdp, grid: Grid) -> ReturnDistribution:
    """Categorical projection of the empirical return distribution of the demonstrations."""
    if demos.count == 0:
        raise InputError("cannot estimate a return distribution from an empty dataset")
    demos.check(mdp)
    g = episode_returns(mdp, demos.states, demos.actions)
    w = projection_weights(g, np.full(len(g), 1.0 / len(g)), grid)
    return ReturnDistribution(grid, w / w.sum())


def rollout_indices(policy, mdp: Mdp, K: int, rng_seed) -> np.ndarray:
    """Grid indices of the accumulated discretized return of K episodes of an enlarged policy."""
    if K < 1:
        raise InputError("K must be at least 1")
    grid = policy.grid
    rng = np.random.default_rng(rng_seed)
    rk = snap_rewards(mdp.r, grid)
    s = np.full(K, mdp.s0, dtype=np.int64)
    y = np.zeros(K, dtype=np.int64)
    for h in range(mdp.H):
        a = policy.actions[h, s, y]
        if np.any(a < 0):
            i = int(np.argmax(a < 0))
            raise CoverageError(f"enlarged policy undefined at (h={h}, s={s[i]}, y={y[i] * grid.epsilon0:.6g})")
        y = y + rk[h, s, a]
        if np.any(y >= grid.d):
            i = int(np.argmax(y >= grid.d))
            raise CoverageError(f"accumulated return {y[i] * grid.epsilon0:.6g} leaves the grid at h={h}")
        cum = np.cumsum(mdp.p[h, s, a], axis=1)
        u = rng.random(K)
        s = np.minimum((u[:, None] >= cum).sum(axis=1), mdp.S - 1)
    return y


def rollout(policy, mdp: Mdp, K: int, rng_seed) -> np.ndarray:
    return rollout_indices(policy, mdp, K, rng_seed) * policy.grid.epsilon0


def empirical_distribution(returns, grid: Grid) -> ReturnDistribution:
    """Exact frequencies of on-grid returns; off-grid values signal a discretization bug."""
    g = np.asarray(returns, dtype=float).ravel()
    if g.size == 0:
        raise InputError("no returns given")
    if not np.all(grid.on_grid(g)):
        bad = g[~grid.on_grid(g)][0]
        raise InputError(f"return {bad!r} is not a grid point")
    idx = np.rint(g / grid.epsilon0).astype(np.int64)
    return index_frequencies(idx, grid)


def index_frequencies(idx: np.ndarray, grid: Grid) -> ReturnDistribution:
    counts = np.bincount(idx, minlength=grid.d).astype(float)
    return ReturnDistribution(grid, counts / counts.sum())
