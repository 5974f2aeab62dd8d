"""Built-in environments with golden values, random MDPs and survey answer ingestion."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .discretization import Grid
from .errors import InputError
from .mdp import HistoryPolicy, Mdp, RsMdp, build_mdp, expected_utility_exact
from .planner import EnlargedPolicy, lift_policy, plan, search_markovian
from .utility import Utility, builtin_utility, discretize_utility


@dataclass(frozen=True)
class Golden:
    quantity: str
    value: float
    provenance: str
    compute: Callable[[], float]
    tol: float = 1e-9


@dataclass
class ZooEntry:
    id: str
    description: str
    mdp: Mdp
    epsilon0: float
    expert: HistoryPolicy | None = None
    utilities: dict = field(default_factory=dict)
    variants: dict = field(default_factory=dict)  # related environments (shifted dynamics or rewards)
    golden: list = field(default_factory=list)

    @property
    def grid(self) -> Grid:
        return Grid(self.epsilon0, self.mdp.H)

    def check(self) -> list[tuple[str, float, float, bool]]:
        out = []
        for g in self.golden:
            got = float(g.compute())
            out.append((g.quantity, g.value, got, abs(got - g.value) <= g.tol))
        return out


def _constant(mdp: Mdp, a: int) -> HistoryPolicy:
    return HistoryPolicy.constant(mdp.H, mdp.S, mdp.A, a)


def _first_action(mdp: Mdp, first: int, probs=None) -> HistoryPolicy:
    """Markov policy choosing `first` (or the mixture probs) at stage 0 and action 0 afterwards."""
    table = np.zeros((mdp.H, mdp.S, mdp.A))
    table[:, :, 0] = 1.0
    table[0, mdp.s0] = np.eye(mdp.A)[first] if probs is None else probs
    return HistoryPolicy.markov(table)


def _J(mdp, u, policy) -> float:
    return expected_utility_exact(RsMdp(mdp, u), policy)


def _plan_value(mdp, u, eps) -> float:
    grid = Grid(eps, mdp.H)
    return plan(discretize_utility(u, grid), mdp, grid)[0]


def wallet() -> ZooEntry:
    """Take money or not, then choose a safe or a risky bet; optimal choice depends on wealth."""
    H, S, A = 3, 5, 2
    s0, s, win, lose, safe = range(5)
    edges = [(0, s0, None, {s: 1.0}),
             (1, s, 0, {win: 0.5, lose: 0.5}), (1, s, 1, {safe: 1.0})]
    rewards = [(0, s0, 1, 1.0), (2, win, None, 0.15), (2, safe, None, 0.05)]
    labels = {"states": ["s0", "s", "s1", "s2", "s3"], "actions": ["a0", "a1"]}
    mdp = build_mdp(H, S, A, edges, rewards, labels=labels)
    u = builtin_utility("sqrt", H)
    eps = 0.05

    def act_at(y):
        grid = Grid(eps, H)
        _, psi, _ = plan(discretize_utility(u, grid), mdp, grid)
        return psi(1, s, y)

    golden = [Golden("bet action with nothing banked (1 = safe)", 1, "optimality check by hand", lambda: act_at(0.0)),
              Golden("bet action with 1 banked (0 = risky)", 0, "optimality check by hand", lambda: act_at(1.0))]
    return ZooEntry("wallet", wallet.__doc__, mdp, eps, utilities={"sqrt": u}, golden=golden)


def lottery() -> ZooEntry:
    """Two-stage choice between a sure-ish and a lottery-like action; feasible set is a half-plane."""
    H, S, A = 2, 4, 2
    edges = [(0, 0, 0, {1: 0.4, 2: 0.5, 3: 0.1}), (0, 0, 1, {2: 0.2, 3: 0.8})]
    rewards = [(0, 0, 0, 1.0), (0, 0, 1, 0.5), (1, 2, None, 0.5), (1, 3, None, 1.0)]
    mdp = build_mdp(H, S, A, edges, rewards, labels={"states": ["s0", "s1", "s2", "s3"], "actions": ["a1", "a2"]})
    u_red = Utility.from_anchors(2, [(1, 0.1), (1.5, 0.7)])
    u_bad = Utility.from_anchors(2, [(0.5, 0.0), (1, 0.0), (1.5, 2.0)])
    expert = _constant(mdp, 0)
    eps = 0.5

    def compat(u):
        from .caty import EXACT, compatibility, expert_distribution

        grid = Grid(eps, H)
        return compatibility(u, expert_distribution(mdp, expert, grid), mdp, EXACT, grid)

    golden = [Golden("J*(U_red)", 0.59, "two-outcome enumeration", lambda: _plan_value(mdp, u_red, eps)),
              Golden("J(a2, U_red)", 0.58, "two-outcome enumeration", lambda: _J(mdp, u_red, _constant(mdp, 1))),
              Golden("C(U_bad)", 0.4, "two-policy enumeration", lambda: compat(u_bad)[2]),
              Golden("C_rel(U_bad)", 0.25, "ratio", lambda: compat(u_bad)[2] / compat(u_bad)[1])]
    return ZooEntry("lottery", lottery.__doc__, mdp, eps, expert, {"red": u_red, "bad": u_bad}, golden=golden)


def markov_gap(x: float = 2.6) -> ZooEntry:
    """History dependence matters: the best Markov policy loses a constant to the optimum."""
    H, S, A = 4, 7, 2
    edges = [(0, 0, None, {1: 0.5, 2: 0.5}), (1, 1, None, {3: 1.0}), (1, 2, None, {3: 1.0}),
             (2, 3, 0, {4: x / 3.99, 5: 1.0 - x / 3.99}), (2, 3, 1, {6: 1.0})]
    rewards = [(1, 1, None, 1.0), (3, 4, None, 1.0), (3, 6, None, 0.5)]
    mdp = build_mdp(H, S, A, edges, rewards)
    u = Utility.from_anchors(4, [(0.5, x - 0.1), (1, x), (1.5, x + 0.1), (2, 3.99)])
    eps = 0.5
    rs = RsMdp(mdp, u)
    golden = [Golden("best Markov value", x, "closed form (U(1.5)+U(0.5))/2", lambda: search_markovian(rs).value),
              Golden("optimum minus best Markov", 0.5 * (x - x * x / 3.99 - 0.1), "closed form",
                     lambda: _plan_value(mdp, u, eps) - search_markovian(rs).value, 1e-9)]
    return ZooEntry("markov_gap", markov_gap.__doc__, mdp, eps, utilities={"U": u}, golden=golden)


def stationary_mixing() -> ZooEntry:
    """Stationary dynamics where the best Markov policy is non-stationary and the best
    stationary one is stochastic."""
    H, S, A = 4, 4, 2
    edges = [(None, 0, 0, {2: 1 / 3, 3: 2 / 3}), (None, 0, 1, {1: 1.0}),
             (None, 1, None, {0: 1.0}), (None, 2, None, {0: 1.0}), (None, 3, None, {0: 1.0})]
    rewards = [(None, 1, None, 0.5), (None, 2, None, 1.0)]
    mdp = build_mdp(H, S, A, edges, rewards)
    u = Utility.from_anchors(4, [(0.5, 0.15), (1, 0.2), (1.5, 1.8), (2, 2.0)])
    rs = RsMdp(mdp, u)
    golden = [Golden("best Markov value", 0.7, "bilinear value -8/9 ab + (a+b)/2 + 1/5 at a vertex",
                     lambda: search_markovian(rs).value),
              Golden("best stationary deterministic value", 0.2 + 1 / 9, "same closed form",
                     lambda: search_markovian(rs, stationary=True).value),
              Golden("best stationary value", 0.48125, "maximum of -8/9 a^2 + a + 1/5 at a = 9/16",
                     lambda: search_markovian(rs, stationary=True, mixing_step=1e-3).value, 1e-6)]
    return ZooEntry("stationary_mixing", stationary_mixing.__doc__, mdp, 0.5, utilities={"U": u}, golden=golden)


def transition_transfer() -> ZooEntry:
    """Two utilities that agree on the demonstrations but disagree once the dynamics change."""
    H, S, A = 2, 5, 2
    base = [(0, 0, 0, {1: 0.25, 2: 0.25, 3: 0.25, 4: 0.25})]
    rewards = [(1, 2, None, 0.25), (1, 3, None, 0.75), (1, 4, None, 1.0)]
    mdp = build_mdp(H, S, A, base + [(0, 0, 1, {2: 0.5, 3: 0.5})], rewards)
    shifted = build_mdp(H, S, A, base + [(0, 0, 1, {1: 0.7, 4: 0.3})], rewards)
    u1 = Utility.from_anchors(2, [(0.25, 0.01), (0.75, 0.02), (1, 1.99)])
    u2 = Utility.from_anchors(2, [(0.25, 0.01), (0.75, 0.99), (1, 1.99)])
    e, other = _constant(mdp, 0), _constant(mdp, 1)
    golden = [Golden("J(expert, U1) shifted", 0.505, "2.02/4", lambda: _J(shifted, u1, e), 1e-12),
              Golden("J(other, U1) shifted", 0.597, "0.3 * 1.99", lambda: _J(shifted, u1, other), 1e-12),
              Golden("J(expert, U2) shifted", 0.7475, "2.99/4", lambda: _J(shifted, u2, e), 1e-12),
              Golden("J(other, U2) shifted", 0.597, "0.3 * 1.99", lambda: _J(shifted, u2, other), 1e-12)]
    return ZooEntry("transition_transfer", transition_transfer.__doc__, mdp, 0.25, e,
                    {"U1": u1, "U2": u2}, {"shifted": shifted}, golden)


def reward_transfer() -> ZooEntry:
    """Two utilities that agree on the demonstrations but disagree once the rewards change."""
    H, S, A = 2, 3, 2
    edges = [(0, 0, 0, {1: 0.5, 2: 0.5}), (0, 0, 1, {1: 0.9, 2: 0.1})]
    mdp = build_mdp(H, S, A, edges, [(0, 0, 1, 0.5), (1, 2, None, 1.0)])
    shifted = build_mdp(H, S, A, edges, [(0, 0, 0, 0.5), (1, 1, None, 1.0)])
    u1 = Utility.from_anchors(2, [(0.5, 0.1), (1, 0.9), (1.5, 1.5)])
    u2 = Utility.from_anchors(2, [(0.5, 0.1), (1, 0.8), (1.5, 1.5)])
    e, other = _constant(mdp, 0), _constant(mdp, 1)
    golden = [Golden("J(expert, U1) shifted", 0.8, "0.5 U(0.5) + 0.5 U(1.5)", lambda: _J(shifted, u1, e), 1e-12),
              Golden("J(other, U1) shifted", 0.81, "0.9 U(1)", lambda: _J(shifted, u1, other), 1e-12),
              Golden("J(expert, U2) shifted", 0.8, "0.5 U(0.5) + 0.5 U(1.5)", lambda: _J(shifted, u2, e), 1e-12),
              Golden("J(other, U2) shifted", 0.72, "0.9 U(1)", lambda: _J(shifted, u2, other), 1e-12)]
    return ZooEntry("reward_transfer", reward_transfer.__doc__, mdp, 0.5, e,
                    {"U1": u1, "U2": u2}, {"shifted": shifted}, golden)


def imitation_gap() -> ZooEntry:
    """A policy close to the expert can be nearly optimal under one feasible utility and
    far from optimal under another."""
    H, S, A = 2, 4, 3
    edges = [(0, 0, 0, {2: 1.0}), (0, 0, 1, {1: 0.91, 3: 0.09}), (0, 0, 2, {1: 1.0})]
    mdp = build_mdp(H, S, A, edges, [(1, 2, None, 0.5), (1, 3, None, 1.0)])
    u1 = Utility.from_anchors(2, [(0.5, 0.1), (1, 0.1 / 0.09)])
    u2 = Utility.from_anchors(2, [(0.5, 1.099), (1, 1.1)])

    def sub(u, alpha):
        from .identifiability import suboptimality

        return suboptimality(RsMdp(mdp, u), _first_action(mdp, 0, [0.0, 1 - alpha, alpha]))

    golden = [Golden("suboptimality U1, alpha=0.5", 0.05, "0.1 alpha", lambda: sub(u1, 0.5), 1e-12),
              Golden("suboptimality U2, alpha=0.5", 1.0495, "1 + 0.099 alpha", lambda: sub(u2, 0.5), 1e-12)]
    return ZooEntry("imitation_gap", imitation_gap.__doc__, mdp, 0.5, _constant(mdp, 0),
                    {"U1": u1, "U2": u2}, golden=golden)


def assessment_gap() -> ZooEntry:
    """Two feasible utilities whose values differ by 1 on some policy."""
    H, S, A = 2, 3, 3
    edges = [(0, 0, 0, {1: 1.0}), (0, 0, 1, {2: 1.0}), (0, 0, 2, {2: 1.0})]
    mdp = build_mdp(H, S, A, edges, [(0, 0, 2, 1.0), (1, 2, None, 1.0)])
    u1 = Utility.from_anchors(2, [(1, 0.1)])
    u2 = Utility.from_anchors(2, [(1, 1.1)])

    def d_all():
        from .identifiability import transfer_diagnostic

        return transfer_diagnostic(u1, u2, mdp).d_all

    golden = [Golden("d_all(U1, U2)", 1.0, "value gap of the middle action", d_all)]
    return ZooEntry("assessment_gap", assessment_gap.__doc__, mdp, 0.5, _constant(mdp, 2),
                    {"U1": u1, "U2": u2}, golden=golden)


def elicitation_gadget(H: int = 2, q: float = 0.5) -> ZooEntry:
    """Sure return 1.5 against a lottery over {1, H}; indifference reveals U(1.5)."""
    from .identifiability import gadget_mdp

    mdp = gadget_mdp(H, (1.5, 1.0, float(H)), q)
    lin = builtin_utility("linear", H)

    def q_star():
        from .identifiability import elicit_utility, planner_oracle

        res = elicit_utility(planner_oracle(lin), [1.5], 1e-6, H)
        return dict(res.anchors)[1.5]

    golden = [Golden("recovered U(1.5) for a linear agent", 1.5, "1.5 = 2q + (1-q) at q = 1/2", q_star)]
    return ZooEntry("elicitation_gadget", elicitation_gadget.__doc__, mdp, 0.5, utilities={"linear": lin},
                    golden=golden)


SURVEY_STATES = ["L", "M", "H", "T"]
SURVEY_ACTIONS = ["a0", "a+", "a-"]


def survey(epsilon0: float = 0.01) -> ZooEntry:
    """Four wealth levels and three actions (hold, invest, cash out) over five stages."""
    L, M, Hs, T = range(4)
    a0, ap, am = range(3)
    third = 1.0 / 3.0
    rows = {
        (L, a0): {L: 1.0}, (L, ap): {L: 1 - third, M: third}, (L, am): {L: 1.0},
        (M, a0): {M: 1.0}, (M, ap): {M: 1 - third, Hs: third}, (M, am): {L: 0.2, M: 0.8},
        (Hs, a0): {Hs: 1.0}, (Hs, ap): {Hs: 1 - third, T: third}, (Hs, am): {M: 0.2, Hs: 0.8},
        (T, a0): {T: 1.0}, (T, ap): {T: 1.0}, (T, am): {Hs: 0.2, T: 0.8},
    }
    euros = {a0: [0, 30, 100, 500], ap: [0, 0, 0, 0], am: [0, 60, 200, 1000]}
    edges = [(None, s, a, row) for (s, a), row in rows.items()]
    rewards = [(None, s, a, euros[a][s] / 1000.0) for a in euros for s in range(4)]
    mdp = build_mdp(5, 4, 3, edges, rewards, s0=M,
                    labels={"states": SURVEY_STATES, "actions": SURVEY_ACTIONS, "reward_unit_eur": 1000})
    utilities = {name: builtin_utility(name, 5) for name in ("linear", "sqrt", "square")}
    golden = [Golden("p(H | M, a+)", third, "transition table", lambda: mdp.p[0, M, ap, Hs], 1e-15),
              Golden("r(H, a-)", 0.2, "200 EUR / 1000", lambda: mdp.r[0, Hs, am], 1e-15),
              Golden("r(T, a-)", 1.0, "1000 EUR / 1000", lambda: mdp.r[0, T, am], 1e-15)]
    return ZooEntry("survey", survey.__doc__, mdp, epsilon0, utilities=utilities, golden=golden)


REGISTRY = {
    "wallet": wallet,
    "lottery": lottery,
    "markov_gap": markov_gap,
    "stationary_mixing": stationary_mixing,
    "transition_transfer": transition_transfer,
    "reward_transfer": reward_transfer,
    "imitation_gap": imitation_gap,
    "assessment_gap": assessment_gap,
    "elicitation_gadget": elicitation_gadget,
    "survey": survey,
}


def zoo(entry_id: str) -> ZooEntry:
    if entry_id not in REGISTRY:
        raise InputError(f"unknown environment {entry_id!r}; known: {', '.join(REGISTRY)}")
    return REGISTRY[entry_id]()


def random_mdp(S: int, A: int, H: int, sparsity: int | None = None, rng_seed=0, epsilon0: float = 0.1) -> Mdp:
    """Dirichlet(1) transition rows kept on their `sparsity` largest entries; rewards uniform on
    the multiples of epsilon0 in [0, 1]."""
    if min(S, A, H) < 1:
        raise InputError("S, A and H must be positive")
    if sparsity is not None and not 1 <= sparsity <= S:
        raise InputError("sparsity must lie in [1, S]")
    rng = np.random.default_rng(rng_seed)
    p = rng.dirichlet(np.ones(S), size=(H, S, A))
    if sparsity is not None and sparsity < S:
        cut = np.sort(p, axis=3)[..., S - sparsity][..., None]
        keep = p >= cut
        # guard against ties at the cut keeping more than k entries
        order = np.argsort(-p, axis=3, kind="stable")
        ranks = np.argsort(order, axis=3, kind="stable")
        p = np.where(keep & (ranks < sparsity), p, 0.0)
    p = p / p.sum(axis=3, keepdims=True)
    levels = int(np.floor(1.0 / epsilon0 + 1e-9))
    r = np.minimum(rng.integers(0, levels + 1, size=(H, S, A)) * epsilon0, 1.0)
    return Mdp(p, r, 0)


def noisy_expert(policy: EnlargedPolicy, mdp: Mdp, noise: float = 0.05) -> HistoryPolicy:
    """With probability `noise` per decision, replace the planned action by a uniform one."""
    base = lift_policy(policy, mdp)
    probs = (1.0 - noise) * base.probs + noise / mdp.A
    return HistoryPolicy(base.y_points, probs, base.reward_table)


def _parse_token(value: str, names: list[str], what: str) -> int:
    v = value.strip()
    aliases = {n.replace("+", "_plus").replace("-", "_minus"): i for i, n in enumerate(names)}
    if v in names:
        return names.index(v)
    if v in aliases:
        return aliases[v]
    raise InputError(f"unknown {what} {value!r}; expected one of {names}")


def ingest_survey_policy(source, epsilon0: float = 0.01, closure: bool = True) -> HistoryPolicy:
    """Build a policy from survey answers (CSV with header s,h,y_eur,action; h counts from 1).

    At each (s, h) the answer for the nearest listed y is used (ties to the lower y). Closure
    rules: in state L play a+, at the last stage play a-. Unlisted (s, h) pairs stay undefined.
    """
    if isinstance(source, str) and "\n" not in source and not source.lstrip().startswith("s,"):
        with open(source, newline="") as fh:
            text = fh.read()
    elif hasattr(source, "read"):
        text = source.read()
    else:
        text = source
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["s", "h", "y_eur", "action"]:
        raise InputError("survey file must have header s,h,y_eur,action")
    H = 5
    answers: dict = {}
    for line, row in enumerate(reader, start=2):
        s = _parse_token(row["s"], SURVEY_STATES, "state")
        try:
            h = int(row["h"]) - 1
            y = float(row["y_eur"]) / 1000.0
        except (TypeError, ValueError) as exc:
            raise InputError(f"line {line}: bad stage or y value") from exc
        if not 0 <= h < H:
            raise InputError(f"line {line}: stage {h + 1} outside 1..{H}")
        a = _parse_token(row["action"], SURVEY_ACTIONS, "action")
        key = (s, h, round(y, 9))
        if answers.get(key, a) != a:
            raise InputError(f"line {line}: contradictory answer for {(row['s'], h + 1, row['y_eur'])}")
        answers[key] = a
    grid = Grid(epsilon0, H)
    act = np.full((H, 4, grid.d), -1, dtype=np.int64)
    listed: dict = {}
    for (s, h, y), a in answers.items():
        listed.setdefault((s, h), []).append((y, a))
    for (s, h), pairs in listed.items():
        pairs.sort()
        ys = np.array([y for y, _ in pairs])
        acts = np.array([a for _, a in pairs])
        j = np.searchsorted(ys, grid.points)
        j = np.clip(j, 1, max(len(ys) - 1, 1))
        if len(ys) == 1:
            act[h, s] = acts[0]
        else:
            left, right = ys[j - 1], ys[j]
            take_right = (right - grid.points) < (grid.points - left) - 1e-12
            act[h, s] = np.where(take_right, acts[j], acts[j - 1])
    if closure:
        act[:, 0, :] = 1  # state L: a+
        act[H - 1, :, :] = 2  # last stage: a-
    return HistoryPolicy.deterministic(grid.points, act, num_actions=3)
