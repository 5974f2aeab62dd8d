"""Finite-horizon tabular MDPs, trajectories, history policies and exact/Monte-Carlo evaluation.

Stages are 0-based throughout the code: stage h = 0 is the first decision.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import CapExceededError, CoverageError, InputError, resolve_cap

PROB_TOL = 1e-12
EVAL_CAP = 10**6


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Mdp:
    p: np.ndarray  # (H, S, A, S)
    r: np.ndarray  # (H, S, A)
    s0: int = 0
    labels: dict = field(default_factory=dict)

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        r = np.array(self.r, dtype=float)
        if p.ndim != 4 or p.shape[1] != p.shape[3]:
            raise InputError(f"transitions must have shape (H, S, A, S), got {p.shape}")
        H, S, A, _ = p.shape
        if H < 1 or S < 1 or A < 1:
            raise InputError("S, A and H must be positive")
        if r.shape != (H, S, A):
            raise InputError(f"rewards must have shape {(H, S, A)}, got {r.shape}")
        if np.any(p < 0):
            h, s, a, _ = np.argwhere(p < 0)[0]
            raise InputError(f"negative transition probability at (h={h}, s={s}, a={a})")
        sums = p.sum(axis=3)
        if np.any(np.abs(sums - 1.0) > PROB_TOL):
            h, s, a = np.argwhere(np.abs(sums - 1.0) > PROB_TOL)[0]
            raise InputError(f"transition row (h={h}, s={s}, a={a}) sums to {sums[h, s, a]!r}")
        if np.any(~np.isfinite(r)) or np.any(r < 0) or np.any(r > 1):
            h, s, a = np.argwhere(~((r >= 0) & (r <= 1)))[0]
            raise InputError(f"reward at (h={h}, s={s}, a={a}) is {r[h, s, a]!r}, outside [0, 1]")
        if not (0 <= int(self.s0) < S):
            raise InputError(f"initial state {self.s0} out of range for S={S}")
        object.__setattr__(self, "p", _readonly(p))
        object.__setattr__(self, "r", _readonly(r))
        object.__setattr__(self, "s0", int(self.s0))
        object.__setattr__(self, "labels", dict(self.labels or {}))

    @property
    def H(self) -> int:
        return self.p.shape[0]

    @property
    def S(self) -> int:
        return self.p.shape[1]

    @property
    def A(self) -> int:
        return self.p.shape[2]

    def with_transitions(self, p) -> Mdp:
        return replace(self, p=p)

    def with_rewards(self, r) -> Mdp:
        return replace(self, r=r)

    def state_label(self, s: int) -> str:
        names = self.labels.get("states")
        return str(names[s]) if names else str(s)

    def action_label(self, a: int) -> str:
        names = self.labels.get("actions")
        return str(names[a]) if names else str(a)

    def sample_next(self, h: int, s: int, a: int, n: int, rng: np.random.Generator) -> np.ndarray:
        """Generative access: n independent draws from p_h(.|s, a)."""
        return rng.choice(self.S, size=n, p=self.p[h, s, a])

    def to_json(self) -> dict:
        out = {"S": self.S, "A": self.A, "H": self.H, "s0": self.s0,
               "p": self.p.tolist(), "r": self.r.tolist()}
        if self.labels:
            out["labels"] = self.labels
        return out

    @classmethod
    def from_json(cls, data: dict) -> Mdp:
        for key in ("S", "A", "H", "s0", "p", "r"):
            if key not in data:
                raise InputError(f"MDP file missing key {key!r}")
        try:
            p = np.asarray(data["p"], dtype=float)
            r = np.asarray(data["r"], dtype=float)
        except ValueError as exc:
            raise InputError(f"MDP arrays are ragged or non-numeric: {exc}") from exc
        expect = (int(data["H"]), int(data["S"]), int(data["A"]))
        if p.shape != expect + (expect[1],):
            raise InputError(f"key 'p' has shape {p.shape}, expected {expect + (expect[1],)}")
        if r.shape != expect:
            raise InputError(f"key 'r' has shape {r.shape}, expected {expect}")
        return cls(p, r, int(data["s0"]), data.get("labels") or {})


@dataclass(frozen=True)
class Trajectory:
    steps: tuple  # ((s, a), ...) of length H
    terminal_state: int

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple((int(s), int(a)) for s, a in self.steps))
        object.__setattr__(self, "terminal_state", int(self.terminal_state))

    def to_json(self) -> list:
        return [[s, a] for s, a in self.steps] + [self.terminal_state]

    @classmethod
    def from_json(cls, row) -> Trajectory:
        if not isinstance(row, list) or not row:
            raise InputError("trajectory must be a non-empty list")
        *steps, last = row
        if not all(isinstance(x, list) and len(x) == 2 for x in steps):
            raise InputError("trajectory steps must be [s, a] pairs")
        return cls(tuple(tuple(x) for x in steps), last)


def _check_trajectory(mdp: Mdp, traj: Trajectory):
    if len(traj.steps) != mdp.H:
        raise InputError(f"malformed trajectory: {len(traj.steps)} steps, expected H={mdp.H}")
    for h, (s, a) in enumerate(traj.steps):
        if not (0 <= s < mdp.S and 0 <= a < mdp.A):
            raise InputError(f"malformed trajectory: (s={s}, a={a}) out of range at h={h}")
    if not (0 <= traj.terminal_state < mdp.S):
        raise InputError(f"malformed trajectory: terminal state {traj.terminal_state} out of range")


def trajectory_return(mdp: Mdp, traj: Trajectory) -> float:
    _check_trajectory(mdp, traj)
    return float(sum(mdp.r[h, s, a] for h, (s, a) in enumerate(traj.steps)))


def _nearest_sorted(points: np.ndarray, y) -> np.ndarray:
    """Index of the nearest entry of sorted `points`, ties to the lower entry."""
    y = np.asarray(y, dtype=float)
    j = np.searchsorted(points, y, side="left")
    j = np.clip(j, 1, max(len(points) - 1, 1))
    if len(points) == 1:
        return np.zeros(y.shape, dtype=np.int64)
    left = points[j - 1]
    right = points[j]
    take_right = (right - y) < (y - left) - 1e-12
    return np.where(take_right, j, j - 1).astype(np.int64)


@dataclass(frozen=True, eq=False)
class HistoryPolicy:
    """Policy that depends on the history only through (h, s, accumulated reward y).

    probs[h, s, k] is the action distribution used when y is nearest to y_points[k]
    (ties to the lower point). An all-zero row marks an undefined entry. When
    reward_table is given, y accumulates those rewards instead of the true ones,
    which is how a policy planned on discretized rewards is executed.
    """

    y_points: np.ndarray
    probs: np.ndarray  # (H, S, n_y, A)
    reward_table: np.ndarray | None = None

    def __post_init__(self):
        y = np.array(self.y_points, dtype=float).ravel()
        pr = np.array(self.probs, dtype=float)
        if pr.ndim != 4 or pr.shape[2] != len(y):
            raise InputError("policy table must have shape (H, S, len(y_points), A)")
        if len(y) > 1 and np.any(np.diff(y) <= 0):
            raise InputError("y_points must be strictly increasing")
        if np.any(pr < 0):
            raise InputError("negative action probability")
        sums = pr.sum(axis=3)
        if np.any((np.abs(sums - 1.0) > 1e-9) & (sums != 0.0)):
            raise InputError("action distributions must sum to 1 (or be all zero for undefined)")
        object.__setattr__(self, "y_points", _readonly(y))
        object.__setattr__(self, "probs", _readonly(pr))
        if self.reward_table is not None:
            rt = np.array(self.reward_table, dtype=float)
            if rt.shape != pr.shape[:2] + (pr.shape[3],):
                raise InputError("reward_table must have shape (H, S, A)")
            object.__setattr__(self, "reward_table", _readonly(rt))

    @property
    def H(self) -> int:
        return self.probs.shape[0]

    @property
    def S(self) -> int:
        return self.probs.shape[1]

    @property
    def A(self) -> int:
        return self.probs.shape[3]

    @classmethod
    def deterministic(cls, y_points, actions, reward_table=None, num_actions=None) -> HistoryPolicy:
        """actions[h, s, k] in [0, A) or -1 for undefined."""
        act = np.asarray(actions, dtype=np.int64)
        A = int(num_actions if num_actions is not None else act.max() + 1)
        if np.any(act >= A) or np.any(act < -1):
            raise InputError("action index out of range")
        probs = np.zeros(act.shape + (A,))
        defined = act >= 0
        idx = np.nonzero(defined)
        probs[idx + (act[defined],)] = 1.0
        return cls(y_points, probs, reward_table)

    @classmethod
    def markov(cls, probs_hsa) -> HistoryPolicy:
        """A Markov (possibly stochastic) policy, given as probs[h, s, a]."""
        pr = np.asarray(probs_hsa, dtype=float)
        return cls(np.zeros(1), pr[:, :, None, :])

    @classmethod
    def constant(cls, H: int, S: int, A: int, action: int) -> HistoryPolicy:
        return cls.deterministic([0.0], np.full((H, S, 1), action), num_actions=A)

    def check_compatible(self, mdp: Mdp):
        if (self.H, self.S, self.A) != (mdp.H, mdp.S, mdp.A):
            raise InputError(f"policy shape {(self.H, self.S, self.A)} does not match "
                             f"MDP {(mdp.H, mdp.S, mdp.A)}")

    def distribution(self, h: int, s: int, y: float) -> np.ndarray:
        k = int(_nearest_sorted(self.y_points, y))
        row = self.probs[h, s, k]
        if row.sum() == 0.0:
            raise CoverageError(f"policy undefined at (h={h}, s={s}, y={y:.6g})")
        return row

    def act(self, h: int, s: int, y: float, rng: np.random.Generator | None = None) -> int:
        row = self.distribution(h, s, y)
        if rng is None:
            return int(np.argmax(row))
        return int(min(np.searchsorted(np.cumsum(row), rng.random(), side="right"), self.A - 1))

    def act_batch(self, h: int, s: np.ndarray, y: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        k = _nearest_sorted(self.y_points, y)
        rows = self.probs[h, s, k]
        bad = rows.sum(axis=1) == 0.0
        if np.any(bad):
            i = int(np.argmax(bad))
            raise CoverageError(f"policy undefined at (h={h}, s={int(s[i])}, y={float(y[i]):.6g})")
        u = rng.random(len(s))
        a = (u[:, None] >= np.cumsum(rows, axis=1)).sum(axis=1)
        return np.minimum(a, self.A - 1)


@dataclass(frozen=True, eq=False)
class RsMdp:
    mdp: Mdp
    utility: object  # riskutil.utility.Utility

    def __post_init__(self):
        if float(self.utility.horizon) < self.mdp.H - 1e-9:
            raise InputError(f"utility defined on [0, {self.utility.horizon}] "
                             f"does not cover [0, H={self.mdp.H}]")


def _policy_increment(policy: HistoryPolicy, mdp: Mdp) -> np.ndarray:
    return mdp.r if policy.reward_table is None else policy.reward_table


def _key(y: float) -> float:
    return round(y, 12)


def exact_return_distribution(mdp: Mdp, policy: HistoryPolicy, cap: int | None = None) -> dict:
    """Exact law of the return under policy, as {return: probability}.

    Forward recursion over (s, true y, policy y); entries are merged after rounding y to 12 decimals.
    """
    policy.check_compatible(mdp)
    cap = resolve_cap(EVAL_CAP) if cap is None else cap
    inc = _policy_increment(policy, mdp)
    layer = {(mdp.s0, 0.0, 0.0): 1.0}
    for h in range(mdp.H):
        nxt: dict = {}
        for (s, y, yp), mass in layer.items():
            row = policy.distribution(h, s, yp)
            for a in np.nonzero(row)[0]:
                pa = mass * row[a]
                y2 = _key(y + mdp.r[h, s, a])
                yp2 = _key(yp + inc[h, s, a])
                for s2 in np.nonzero(mdp.p[h, s, a])[0]:
                    key = (int(s2), y2, yp2)
                    nxt[key] = nxt.get(key, 0.0) + pa * mdp.p[h, s, a, s2]
        if len(nxt) > cap:
            raise CapExceededError(f"exact evaluation exceeds {cap} (s, y) entries at stage {h}; "
                                   "use Monte-Carlo evaluation instead")
        layer = nxt
    out: dict = {}
    for (_, y, _), mass in layer.items():
        out[y] = out.get(y, 0.0) + mass
    return dict(sorted(out.items()))


def expected_utility_exact(rsmdp: RsMdp, policy: HistoryPolicy, cap: int | None = None) -> float:
    law = exact_return_distribution(rsmdp.mdp, policy, cap)
    ys = np.fromiter(law.keys(), dtype=float)
    ps = np.fromiter(law.values(), dtype=float)
    return float(np.dot(ps, rsmdp.utility(ys)))


def sample_episodes(mdp: Mdp, policy: HistoryPolicy, n: int, rng_seed) -> tuple[np.ndarray, np.ndarray]:
    """Simulate n episodes; returns states (n, H+1) and actions (n, H)."""
    policy.check_compatible(mdp)
    rng = np.random.default_rng(rng_seed)
    inc = _policy_increment(policy, mdp)
    states = np.empty((n, mdp.H + 1), dtype=np.int64)
    actions = np.empty((n, mdp.H), dtype=np.int64)
    states[:, 0] = mdp.s0
    yp = np.zeros(n)
    for h in range(mdp.H):
        s = states[:, h]
        a = policy.act_batch(h, s, yp, rng)
        actions[:, h] = a
        yp = yp + inc[h, s, a]
        cum = np.cumsum(mdp.p[h, s, a], axis=1)
        u = rng.random(n)
        states[:, h + 1] = np.minimum((u[:, None] >= cum).sum(axis=1), mdp.S - 1)
    return states, actions


def simulate(mdp: Mdp, policy: HistoryPolicy, rng_seed) -> Trajectory:
    states, actions = sample_episodes(mdp, policy, 1, rng_seed)
    return Trajectory(tuple(zip(states[0, :-1], actions[0])), states[0, -1])


def episode_returns(mdp: Mdp, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
    h = np.arange(mdp.H)
    return mdp.r[h[None, :], states[:, :-1], actions].sum(axis=1)


def expected_utility_mc(rsmdp: RsMdp, policy: HistoryPolicy, n: int, rng_seed) -> float:
    states, actions = sample_episodes(rsmdp.mdp, policy, n, rng_seed)
    return float(np.mean(rsmdp.utility(episode_returns(rsmdp.mdp, states, actions))))


def risk_neutral_optimal(mdp: Mdp) -> tuple[float, np.ndarray, np.ndarray]:
    """Classic finite-horizon value iteration on expected return.

    Returns (J*, V of shape (H+1, S), greedy actions of shape (H, S)), ties to the lowest action.
    """
    V = np.zeros((mdp.H + 1, mdp.S))
    act = np.zeros((mdp.H, mdp.S), dtype=np.int64)
    for h in reversed(range(mdp.H)):
        Q = mdp.r[h] + mdp.p[h] @ V[h + 1]
        best = Q.max(axis=1)
        act[h] = np.argmax(Q >= best[:, None] - 1e-12, axis=1)
        V[h] = best
    return float(V[0, mdp.s0]), V, act


def build_mdp(H: int, S: int, A: int, edges: Sequence, rewards: Sequence, s0: int = 0,
              labels: dict | None = None, stationary_rewards: bool = False) -> Mdp:
    """Assemble an MDP from sparse descriptions.

    edges: (h, s, a, {s': prob}); h may be None for all stages. Unlisted rows self-loop.
    rewards: (h, s, a, value); h or a may be None meaning every stage/action.
    """
    p = np.zeros((H, S, A, S))
    listed = np.zeros((H, S, A), dtype=bool)
    for h, s, a, row in edges:
        hs = range(H) if h is None else [h]
        acts = range(A) if a is None else [a]
        for hh in hs:
            for aa in acts:
                p[hh, s, aa] = 0.0
                for s2, q in row.items():
                    p[hh, s, aa, s2] = q
                listed[hh, s, aa] = True
    for h, s, a in np.argwhere(~listed):
        p[h, s, a, s] = 1.0
    r = np.zeros((H, S, A))
    for h, s, a, v in rewards:
        hs = range(H) if h is None else [h]
        acts = range(A) if a is None else [a]
        for hh in hs:
            for aa in acts:
                r[hh, s, aa] = v
    return Mdp(p, r, s0, labels or {})


Sampler = Callable[[int, int, int, int, np.random.Generator], np.ndarray]
