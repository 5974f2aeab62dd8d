"""Feasible-set analytics, utility elicitation by environment design, and transfer diagnostics."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .caty import EXACT, compatibility, expert_distribution
from .discretization import Grid, snap_rewards
from .errors import ElicitationError, InputError
from .mdp import HistoryPolicy, Mdp, RsMdp, build_mdp, expected_utility_exact
from .planner import enumerate_policy_values, plan, reachable_optimal, reachable_tree, root_action_values
from .utility import Utility, discretize_utility

MEMBER_TOL = 1e-9
INDIFFERENCE_TOL = 1e-10


@dataclass(frozen=True)
class Membership:
    member: bool
    slack: float  # exact compatibility; zero when the utility is feasible

    def __bool__(self):
        return self.member


def feasible_membership(utility: Utility, env: Mdp, expert: HistoryPolicy, grid: Grid) -> Membership:
    eta = expert_distribution(env, expert, grid)
    _, _, C = compatibility(utility, eta, env, EXACT, grid)
    return Membership(bool(C <= MEMBER_TOL), float(C))


@dataclass(frozen=True)
class FeasibleSetCertificate:
    covered: tuple  # (h, s, y index) visited by the expert with positive probability
    constraints: tuple  # (h, s, y index, expert action, other action): Q*(expert) >= Q*(other)
    grid: Grid


def feasible_set_certificate(env: Mdp, expert: HistoryPolicy, grid: Grid) -> FeasibleSetCertificate:
    """Triples covered by the expert and the optimality conditions required there.

    The expert's y is the accumulated grid-snapped reward, as in the planner.
    """
    rk = snap_rewards(env.r, grid)
    layer = {(env.s0, 0)}
    covered, constraints = [], []
    for h in range(env.H):
        nxt = set()
        for s, k in sorted(layer):
            covered.append((h, s, k))
            row = expert.distribution(h, s, k * grid.epsilon0)
            for a in np.nonzero(row)[0]:
                for b in range(env.A):
                    if b != a:
                        constraints.append((h, s, k, int(a), b))
                for s2 in np.nonzero(env.p[h, s, a])[0]:
                    nxt.add((int(s2), min(k + int(rk[h, s, a]), grid.d - 1)))
        layer = nxt
    return FeasibleSetCertificate(tuple(covered), tuple(constraints), grid)


def certificate_holds(cert: FeasibleSetCertificate, utility: Utility, env: Mdp) -> bool:
    ubar = discretize_utility(utility, cert.grid)
    _, _, values = plan(ubar, env, cert.grid)
    for h, s, k, a, b in cert.constraints:
        if values.Q[h, s, k, a] < values.Q[h, s, k, b] - MEMBER_TOL:
            return False
    return True


# elicitation --------------------------------------------------------------------------------

def _split(total: float, steps: int) -> list[float]:
    out = []
    for _ in range(steps):
        r = min(1.0, max(0.0, total))
        out.append(r)
        total -= r
    if total > 1e-12:
        raise InputError("return too large for the corridor length")
    return out


def gadget_mdp(H: int, returns: tuple[float, float, float], q: float) -> Mdp:
    """Three corridors from s_init. Action 0 yields returns[0] surely; action 1 yields
    returns[2] with probability q and returns[1] otherwise. Both stochastic corridors
    share the first-step reward."""
    if H < 2:
        raise InputError("elicitation environments need H >= 2")
    if not 0.0 <= q <= 1.0:
        raise InputError("q must lie in [0, 1]")
    g1, g2, g3 = (float(g) for g in returns)
    if not (0 <= g1 <= H and 0 <= g2 <= H and 0 <= g3 <= H):
        raise InputError("gadget returns must lie in [0, H]")
    rest = H - 1
    shared = max(0.0, g2 - rest, g3 - rest)
    if shared > min(1.0, g2, g3) + 1e-12:
        raise InputError(f"returns {returns} cannot share a first reward within [0, 1]")
    first = {1: min(1.0, g1), 2: shared, 3: shared}
    S = 1 + 3 * rest

    def state(corridor: int, h: int) -> int:  # h = 1 .. H-1
        return 1 + (corridor - 1) * rest + (h - 1)

    edges = [(0, 0, 0, {state(1, 1): 1.0})]
    lottery = {state(2, 1): 1.0 - q}
    lottery[state(3, 1)] = lottery.get(state(3, 1), 0.0) + q
    edges.append((0, 0, 1, lottery))
    rewards = [(0, 0, 0, first[1]), (0, 0, 1, shared)]
    for c, g in ((1, g1), (2, g2), (3, g3)):
        steps = _split(g - first[c], rest)
        for h in range(1, H):
            if h < H - 1:
                edges.append((h, state(c, h), None, {state(c, h + 1): 1.0}))
            rewards.append((h, state(c, h), None, steps[h - 1]))
    return build_mdp(H, S, 2, edges, rewards)


def planner_oracle(utility: Utility, tol: float = INDIFFERENCE_TOL) -> Callable[[Mdp], frozenset]:
    """Simulated agent: the set of optimal first actions at s_init under utility."""

    def oracle(mdp: Mdp) -> frozenset:
        q = root_action_values(RsMdp(mdp, utility))
        return frozenset(int(a) for a in np.nonzero(q >= q.max() - tol)[0])

    return oracle


@dataclass(frozen=True)
class Elicitation:
    utility: Utility
    anchors: tuple  # (G, U(G)) pairs that were queried
    bootstrap_q: tuple
    condition: float
    queries: int


def elicit_utility(oracle, target_returns, q_tolerance: float, H: int) -> Elicitation:
    """Recover U at each target return through indifference probabilities of lottery gadgets."""
    if not q_tolerance > 0:
        raise InputError("q_tolerance must be positive")
    if H < 2:
        raise InputError("elicitation needs H >= 2")
    calls = [0]

    def ask(q, returns):
        calls[0] += 1
        ans = frozenset(oracle(gadget_mdp(H, returns, q)))
        if not ans or not ans <= {0, 1}:
            raise ElicitationError(f"oracle returned {set(ans)} for returns {returns} at q={q}")
        return ans

    def indifference(returns) -> float:
        if ask(0.0, returns) == {1} or ask(1.0, returns) == {0}:
            raise ElicitationError(f"answers for returns {returns} contradict a monotone utility")
        lo, hi = 0.0, 1.0
        while hi - lo > q_tolerance:
            mid = 0.5 * (lo + hi)
            ans = ask(mid, returns)
            if ans == {0, 1}:
                return mid
            if ans == {0}:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    q1 = indifference((1.5, 1.0, float(H)))
    q2 = indifference((1.0, 0.5, 1.5))
    q3 = indifference((0.5, 0.0, 1.0))
    M = np.array([[0.0, -(1.0 - q1), 1.0],
                  [-(1.0 - q2), 1.0, -q2],
                  [1.0, -q3, 0.0]])
    b = np.array([q1 * H, 0.0, 0.0])
    try:
        u05, u1, u15 = np.linalg.solve(M, b)
    except np.linalg.LinAlgError as exc:
        raise ElicitationError("bootstrap system is singular") from exc
    anchors = []
    for g in sorted(set(float(x) for x in target_returns)):
        if not 0.0 < g <= H:
            raise InputError(f"target return {g} outside (0, H]")
        if g == H:
            val = float(H)
        elif abs(g - 1.0) < 1e-12:
            val = u1
        elif g > 1.0:
            q = indifference((g, 1.0, float(H)))
            val = q * H + (1.0 - q) * u1
        else:
            q = indifference((g, 0.0, 1.0))
            val = q * u1
        anchors.append((g, float(val)))
    us = [u for _, u in anchors]
    if any(b < a - 1e-9 for a, b in zip(us, us[1:])) or any(u < -1e-9 or u > H + 1e-9 for u in us):
        raise ElicitationError("recovered anchors are not monotone in [0, H]")
    utility = Utility.from_anchors(H, [(g, min(max(u, 0.0), H)) for g, u in anchors if g < H])
    return Elicitation(utility, tuple(anchors), (q1, q2, q3), float(np.linalg.cond(M)), calls[0])


# diagnostics --------------------------------------------------------------------------------

@dataclass(frozen=True)
class TransferReport:
    values1: np.ndarray  # value of every enumerated deterministic policy under u1
    values2: np.ndarray
    optimal1: frozenset  # policy codes within 1e-10 of the optimum
    optimal2: frozenset
    d_all: float
    witness: int  # policy code attaining d_all

    @property
    def intersect(self) -> bool:
        return bool(self.optimal1 & self.optimal2)


def transfer_diagnostic(u1: Utility, u2: Utility, env: Mdp) -> TransferReport:
    """Optimal policy sets of two utilities in env, and the largest value gap over all policies.

    Values are exact (unrounded returns), so no grid is involved.
    """
    _, vals = enumerate_policy_values(env, [u1, u2])
    v1, v2 = vals
    opt1 = frozenset(np.nonzero(v1 >= v1.max() - INDIFFERENCE_TOL)[0].tolist())
    opt2 = frozenset(np.nonzero(v2 >= v2.max() - INDIFFERENCE_TOL)[0].tolist())
    gap = np.abs(v1 - v2)
    w = int(np.argmax(gap))
    return TransferReport(v1, v2, opt1, opt2, float(gap[w]), w)


def suboptimality(rsmdp: RsMdp, policy: HistoryPolicy) -> float:
    """J* - J^pi, both computed exactly."""
    J_star, _ = reachable_optimal(rsmdp)
    return J_star - expected_utility_exact(rsmdp, policy)


def return_support(env: Mdp) -> np.ndarray:
    """All returns reachable under some policy."""
    tree = reachable_tree(env)
    finals = {w for t in range(len(tree.triples)) for kids, w in tree.children[t] if kids is None}
    return np.array(sorted(finals))
