"""Planning on the enlarged state space (s, accumulated discretized reward) and exact oracles."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .discretization import Grid, ReturnDistribution, snap_rewards
from .errors import CapExceededError, InputError, resolve_cap
from .mdp import HistoryPolicy, Mdp, RsMdp, expected_utility_exact
from .utility import DiscretizedUtility

TIE = 1e-12
ENUM_CAP = 10**5


@dataclass(frozen=True, eq=False)
class EnlargedPolicy:
    grid: Grid
    actions: np.ndarray  # (H, S, d), entries in [0, A)

    def __post_init__(self):
        act = np.array(self.actions, dtype=np.int64)
        if act.ndim != 3 or act.shape[2] != self.grid.d:
            raise InputError(f"enlarged policy table must have shape (H, S, {self.grid.d})")
        act.setflags(write=False)
        object.__setattr__(self, "actions", act)

    def __call__(self, h: int, s: int, y: float) -> int:
        return int(self.actions[h, s, int(self.grid.index_of(y))])

    def to_json(self) -> dict:
        return {"H": int(self.actions.shape[0]), "d": self.grid.d, "epsilon0": self.grid.epsilon0,
                "actions": self.actions.tolist()}

    @classmethod
    def from_json(cls, data: dict, horizon: float | None = None) -> EnlargedPolicy:
        for key in ("H", "d", "actions"):
            if key not in data:
                raise InputError(f"policy file missing key {key!r}")
        act = np.asarray(data["actions"], dtype=np.int64)
        d = int(data["d"])
        eps = float(data.get("epsilon0", (horizon or data["H"]) / (d - 1)))
        grid = Grid(eps, float(horizon if horizon is not None else data["H"]))
        if grid.d != d:
            raise InputError(f"policy file d={d} inconsistent with epsilon0={eps}")
        return cls(grid, act)


@dataclass(frozen=True, eq=False)
class ValueTable:
    V: np.ndarray  # (H+1, S, d); V[H] is the terminal utility
    Q: np.ndarray  # (H, S, d, A)


def _check_grid(utility: DiscretizedUtility, grid: Grid | None) -> Grid:
    if grid is None:
        return utility.grid
    if grid.d != utility.grid.d or abs(grid.epsilon0 - utility.grid.epsilon0) > 1e-15:
        raise InputError("utility was discretized on a different grid")
    return grid


def plan(utility: DiscretizedUtility, mdp: Mdp, grid: Grid | None = None):
    """Backward induction on the enlarged MDP. Returns (J*, EnlargedPolicy, ValueTable).

    Rewards are snapped to the grid first, so mdp need not be discretized already.
    """
    grid = _check_grid(utility, grid)
    if grid.horizon < mdp.H - 1e-9:
        raise InputError(f"grid up to {grid.horizon} does not cover returns up to H={mdp.H}")
    H, S, A, d = mdp.H, mdp.S, mdp.A, grid.d
    rk = snap_rewards(mdp.r, grid)
    base = np.arange(d)
    V = np.empty((H + 1, S, d))
    V[H] = utility.values[None, :]
    Q = np.empty((H, S, d, A))
    act = np.empty((H, S, d), dtype=np.int64)
    for h in reversed(range(H)):
        Qh = np.empty((S, A, d))
        for k in np.unique(rk[h]):
            mask = rk[h] == k
            shifted = V[h + 1][:, np.minimum(base + k, d - 1)]
            Qh[mask] = mdp.p[h][mask] @ shifted
        best = Qh.max(axis=1)
        act[h] = np.argmax(Qh >= best[:, None, :] - TIE, axis=1)
        V[h] = best
        Q[h] = Qh.transpose(0, 2, 1)
    policy = EnlargedPolicy(grid, act)
    return float(V[0, mdp.s0, 0]), policy, ValueTable(V, Q)


def lift_policy(policy: EnlargedPolicy, mdp: Mdp, grid: Grid | None = None) -> HistoryPolicy:
    """History policy that tracks accumulated discretized reward and delegates to the table."""
    grid = grid or policy.grid
    rbar = snap_rewards(mdp.r, grid) * grid.epsilon0
    return HistoryPolicy.deterministic(grid.points, policy.actions, reward_table=rbar, num_actions=mdp.A)


def enlarged_return_distribution(policy: EnlargedPolicy, mdp: Mdp) -> ReturnDistribution:
    """Exact law of the discretized return when the enlarged policy runs on mdp."""
    grid = policy.grid
    d = grid.d
    rk = snap_rewards(mdp.r, grid)
    mass = np.zeros((mdp.S, d))
    mass[mdp.s0, 0] = 1.0
    for h in range(mdp.H):
        nxt = np.zeros_like(mass)
        s_idx, y_idx = np.nonzero(mass)
        a = policy.actions[h, s_idx, y_idx]
        y2 = np.minimum(y_idx + rk[h, s_idx, a], d - 1)
        contrib = mdp.p[h, s_idx, a] * mass[s_idx, y_idx][:, None]  # (n, S')
        for j in range(mdp.S):
            np.add.at(nxt[j], y2, contrib[:, j])
        mass = nxt
    w = mass.sum(axis=0)
    return ReturnDistribution(grid, w / w.sum())


def _rkey(y: float) -> float:
    return round(y, 12)


@dataclass
class _Tree:
    """Reachable (h, s, y) triples with exact y, in stage order."""

    triples: list
    children: list  # children[t][a] = (child indices, probs), or (None, final return) at the last stage
    H: int
    A: int


def reachable_tree(mdp: Mdp, cap: int | None = None) -> _Tree:
    cap = resolve_cap(ENUM_CAP * 10) if cap is None else cap
    triples = [(0, mdp.s0, 0.0)]
    children = []
    start = 0
    for h in range(mdp.H):
        nxt: dict = {}
        stage = triples[start:]
        start = len(triples)
        for (_, s, y) in stage:
            per_action = []
            for a in range(mdp.A):
                y2 = _rkey(y + mdp.r[h, s, a])
                if h == mdp.H - 1:
                    per_action.append((None, y2))
                    continue
                support = np.nonzero(mdp.p[h, s, a])[0]
                idx = []
                for s2 in support:
                    key = (int(s2), y2)
                    if key not in nxt:
                        nxt[key] = len(triples)
                        triples.append((h + 1, int(s2), y2))
                    idx.append(nxt[key])
                per_action.append((np.array(idx), mdp.p[h, s, a, support]))
            children.append(per_action)
        if len(triples) > cap:
            raise CapExceededError(f"more than {cap} reachable (h, s, y) triples")
    return _Tree(triples, children, mdp.H, mdp.A)


def _tree_dp(tree: _Tree, U):
    n = len(tree.triples)
    V = np.zeros(n)
    Q = np.zeros((n, tree.A))
    for t in reversed(range(n)):
        for a, (kids, w) in enumerate(tree.children[t]):
            Q[t, a] = float(U(w)) if kids is None else float(w @ V[kids])
        V[t] = Q[t].max()
    return V, Q


def reachable_optimal(rsmdp: RsMdp, cap: int | None = None):
    """Exact optimum by dynamic programming over reachable (h, s, y) with unrounded rewards.

    Returns (J*, {(h, s, y): greedy action}). Independent of the grid machinery.
    """
    tree = reachable_tree(rsmdp.mdp, cap)
    V, Q = _tree_dp(tree, rsmdp.utility)
    greedy = {}
    for t, triple in enumerate(tree.triples):
        greedy[triple] = int(np.argmax(Q[t] >= V[t] - TIE))
    return float(V[0]), greedy


def root_action_values(rsmdp: RsMdp, cap: int | None = None) -> np.ndarray:
    """Optimal expected utility of each first action, acting optimally afterwards."""
    tree = reachable_tree(rsmdp.mdp, cap)
    _, Q = _tree_dp(tree, rsmdp.utility)
    return Q[0].copy()


def enumerate_policy_values(mdp: Mdp, utilities, cap: int | None = None, chunk: int = 20000):
    """Values of every deterministic (h, s, y)-measurable policy, for each utility.

    Policies are coded in mixed radix A over the reachable triples. Returns
    (tree, values) with values of shape (len(utilities), A ** n).
    """
    cap = resolve_cap(ENUM_CAP) if cap is None else cap
    tree = reachable_tree(mdp)
    n, A = len(tree.triples), tree.A
    if n * math.log(max(A, 1)) > math.log(cap) + 1e-9:
        raise CapExceededError(f"{A}^{n} policies exceed the enumeration cap {cap}")
    total = A**n
    out = np.empty((len(utilities), total))
    radix = A ** np.arange(n, dtype=np.int64)
    for lo in range(0, total, chunk):
        codes = np.arange(lo, min(total, lo + chunk), dtype=np.int64)
        digits = (codes[:, None] // radix[None, :]) % A
        for u_i, U in enumerate(utilities):
            V = np.empty((len(codes), n))
            for t in reversed(range(n)):
                q = np.empty((len(codes), A))
                for a, (kids, w) in enumerate(tree.children[t]):
                    q[:, a] = float(U(w)) if kids is None else V[:, kids] @ w
                V[:, t] = q[np.arange(len(codes)), digits[:, t]]
            out[u_i, lo:lo + len(codes)] = V[:, 0]
    return tree, out


def policy_from_code(tree: _Tree, code: int, grid: Grid, S: int) -> EnlargedPolicy:
    act = np.zeros((tree.H, S, grid.d), dtype=np.int64)
    for t, (h, s, y) in enumerate(tree.triples):
        act[h, s, int(grid.index_of(y))] = (code // tree.A**t) % tree.A
    return EnlargedPolicy(grid, act)


def brute_force_optimal(rsmdp: RsMdp, grid: Grid, cap: int | None = None):
    """Independent optimum: exhaustive policy enumeration when under the cap, else reachable DP."""
    mdp = rsmdp.mdp
    try:
        tree, values = enumerate_policy_values(mdp, [rsmdp.utility], cap)
    except CapExceededError:
        J, greedy = reachable_optimal(rsmdp)
        act = np.zeros((mdp.H, mdp.S, grid.d), dtype=np.int64)
        for (h, s, y), a in greedy.items():
            act[h, s, int(grid.index_of(y))] = a
        return J, EnlargedPolicy(grid, act)
    vals = values[0]
    best = int(np.argmax(vals >= vals.max() - TIE))
    return float(vals[best]), policy_from_code(tree, best, grid, mdp.S)


@dataclass(frozen=True, eq=False)
class MarkovianOptimum:
    value: float
    probs: np.ndarray  # (H, S, A)
    deterministic_value: float


def _decision_points(mdp: Mdp, stationary: bool):
    """Reachable decision points at which the action choice changes (p, r)."""
    reach = np.zeros((mdp.H, mdp.S), dtype=bool)
    reach[0, mdp.s0] = True
    for h in range(mdp.H - 1):
        nxt = (mdp.p[h] * reach[h][:, None, None]).sum(axis=(0, 1)) > 0
        reach[h + 1] = nxt
    differs = np.zeros((mdp.H, mdp.S), dtype=bool)
    for h in range(mdp.H):
        for s in range(mdp.S):
            rows = np.concatenate([mdp.p[h, s], mdp.r[h, s][:, None]], axis=1)
            differs[h, s] = np.ptp(rows, axis=0).max() > 0
    live = reach & differs
    if stationary:
        return [(None, s) for s in range(mdp.S) if live[:, s].any()]
    return [(h, s) for h, s in zip(*np.nonzero(live))]


def _markov_table(mdp: Mdp, points, choices) -> np.ndarray:
    probs = np.zeros((mdp.H, mdp.S, mdp.A))
    probs[:, :, 0] = 1.0
    for (h, s), row in zip(points, choices):
        hs = range(mdp.H) if h is None else [h]
        for hh in hs:
            probs[hh, s] = row
    return probs


def _simplex_grid(A: int, step: float):
    m = int(round(1.0 / step))
    for combo in itertools.product(range(m + 1), repeat=A - 1):
        if sum(combo) <= m:
            yield np.array(list(combo) + [m - sum(combo)], dtype=float) / m


def search_markovian(rsmdp: RsMdp, stationary: bool = False, mixing_step: float | None = None,
                     cap: int | None = None) -> MarkovianOptimum:
    """Best Markov policy by enumeration of deterministic maps, optionally refined over mixtures."""
    cap = resolve_cap(ENUM_CAP) if cap is None else cap
    mdp = rsmdp.mdp
    points = _decision_points(mdp, stationary)
    eye = np.eye(mdp.A)
    if mdp.A ** len(points) > cap:
        raise CapExceededError(f"{mdp.A}^{len(points)} Markov policies exceed the cap {cap}")
    best_val, best_probs = -math.inf, None
    for combo in itertools.product(range(mdp.A), repeat=len(points)):
        probs = _markov_table(mdp, points, [eye[a] for a in combo])
        val = expected_utility_exact(rsmdp, HistoryPolicy.markov(probs))
        if val > best_val + TIE:
            best_val, best_probs = val, probs
    det_val = best_val
    if mixing_step is not None and points:
        rows = list(_simplex_grid(mdp.A, mixing_step))
        if len(rows) ** len(points) > cap:
            raise CapExceededError(f"mixing grid of {len(rows)}^{len(points)} policies exceeds the cap {cap}")
        for combo in itertools.product(rows, repeat=len(points)):
            probs = _markov_table(mdp, points, combo)
            val = expected_utility_exact(rsmdp, HistoryPolicy.markov(probs))
            if val > best_val + TIE:
                best_val, best_probs = val, probs
    if best_probs is None:
        best_probs = _markov_table(mdp, [], [])
        best_val = det_val = expected_utility_exact(rsmdp, HistoryPolicy.markov(best_probs))
    return MarkovianOptimum(best_val, best_probs, det_val)


def best_markovian(rsmdp: RsMdp, stationary: bool = False, mixing_step: float | None = None) -> float:
    return search_markovian(rsmdp, stationary, mixing_step).value
