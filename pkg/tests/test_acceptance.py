"""Acceptance criteria, one test each. Every test records a PASS/FAIL line that is printed in the
pytest terminal summary; running this file directly prints the same lines.
"""
import json
import math
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
from scipy.stats import spearmanr, wasserstein_distance

sys.path.insert(0, str(Path(__file__).parent))

from oracles import qp_projection, random_utility  # noqa: E402
from riskutil import (Grid, HistoryPolicy, RsMdp, TractorConfig, Utility, brute_force_optimal,  # noqa: E402
                      builtin_utility, classify, discretize_utility, elicit_utility, erd, expected_utility_exact,
                      expert_distribution, explore, learn, lift_policy, plan, planner_oracle, project_categorical,
                      project_polytope, random_mdp, transfer_diagnostic, zoo)
from riskutil.caty import EXACT  # noqa: E402
from riskutil.cli import main as cli_main  # noqa: E402
from riskutil.identifiability import suboptimality  # noqa: E402
from riskutil.mdp import exact_return_distribution  # noqa: E402
from riskutil.planner import search_markovian  # noqa: E402
from riskutil.returns import sample_demos  # noqa: E402
from riskutil.utility import polytope_violation  # noqa: E402
from riskutil.zoo import REGISTRY, noisy_expert  # noqa: E402

RESULTS = {}


def record(n, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    RESULTS[n] = line
    print(line)
    assert ok, line


# 1 -------------------------------------------------------------------------------------------

def criterion_1():
    start = time.time()
    worst, cases = 0.0, 0
    rng = np.random.default_rng(2024)
    for key in REGISTRY:
        e = zoo(key)
        grid = e.grid
        us = list(e.utilities.values()) + [random_utility(rng, Grid(e.epsilon0, e.mdp.H)) for _ in range(3)]
        for u in us:
            J = plan(discretize_utility(u, grid), e.mdp, grid)[0]
            J_bf = brute_force_optimal(RsMdp(e.mdp, u), grid)[0]
            worst, cases = max(worst, abs(J - J_bf)), cases + 1
    for seed in range(100):
        r = np.random.default_rng(seed)
        S, A, H = int(r.integers(1, 6)), int(r.integers(1, 4)), int(r.integers(1, 5))
        mdp = random_mdp(S, A, H, None, seed, epsilon0=0.25)
        grid = Grid(0.25, H)
        u = random_utility(r, grid)
        J = plan(discretize_utility(u, grid), mdp, grid)[0]
        J_bf = brute_force_optimal(RsMdp(mdp, u), grid)[0]
        worst, cases = max(worst, abs(J - J_bf)), cases + 1
    elapsed = time.time() - start
    return worst <= 1e-9 and elapsed < 60, f"plan vs brute force on {cases} instances, max |dJ|={worst:.2e}, {elapsed:.1f}s"


def test_criterion_1():
    record(1, *criterion_1())


# 2 -------------------------------------------------------------------------------------------

def criterion_2():
    x = 2.6
    e = zoo("markov_gap")
    u = e.utilities["U"]
    J = plan(discretize_utility(u, e.grid), e.mdp, e.grid)[0]
    markov = search_markovian(RsMdp(e.mdp, u)).value
    gap, target = J - markov, 0.5 * (x - x * x / 3.99 - 0.1)
    ok = abs(gap - target) <= 1e-6
    return ok, f"history-dependent optimum minus best Markov = {gap:.9f} (closed form {target:.9f}; 0.5 not reproduced)"


def test_criterion_2():
    record(2, *criterion_2())


# 3 -------------------------------------------------------------------------------------------

def criterion_3():
    e = zoo("stationary_mixing")
    rs = RsMdp(e.mdp, e.utilities["U"])
    best = search_markovian(rs)
    stat = search_markovian(rs, stationary=True, mixing_step=1e-3)
    nonstationary = best.value > stat.value + 1e-6 and not np.allclose(best.probs[0, 0], best.probs[2, 0])
    stochastic = stat.value > stat.deterministic_value + 1e-6 and stat.probs[0, 0].max() < 1.0
    return nonstationary and stochastic, (
        f"best Markov {best.value:.6f} > best stationary {stat.value:.6f} "
        f"(mixing {stat.probs[0, 0].round(3).tolist()}) > best stationary deterministic {stat.deterministic_value:.6f}")


def test_criterion_3():
    record(3, *criterion_3())


# 4 -------------------------------------------------------------------------------------------

def lottery_utility(a, b, c=0.0):
    return Utility([0, 0.5, 1, 1.5, 2], [0, c, a, b, 2])


def criterion_4():
    e = zoo("lottery")
    eta = expert_distribution(e.mdp, e.expert, e.grid)
    rng = np.random.default_rng(4)
    us, margins = [], []
    for _ in range(1000):
        a, b = np.sort(rng.uniform(0, 2, 2))
        us.append(lottery_utility(a, b, rng.uniform(0, a)))
        margins.append(2 / 3 + 2 / 3 * a - b)
    margins = np.array(margins)
    got = np.array([r.accepted for r in classify(us, [eta], [e.mdp], [EXACT], 0.0, e.grid)])
    decided = np.abs(margins) > 1e-9
    disagreements = int(np.sum(got[decided] != (margins[decided] >= 0)))
    vertices = [lottery_utility(0, 0), lottery_utility(0, 2 / 3), lottery_utility(2, 2)]
    outside = [lottery_utility(0, 2 / 3 + 1e-6), lottery_utility(1, 1.5)]
    v_ok = all(r.accepted for r in classify(vertices, [eta], [e.mdp], [EXACT], 0.0, e.grid))
    o_ok = not any(r.accepted for r in classify(outside, [eta], [e.mdp], [EXACT], 0.0, e.grid))
    return disagreements == 0 and v_ok and o_ok, (
        f"{disagreements} disagreements with U(1.5) <= 2/3 + 2/3 U(1) on 1000 utilities; "
        f"vertices (0,0),(0,2/3),(2,2) accepted={v_ok}, outside points rejected={o_ok}")


def test_criterion_4():
    record(4, *criterion_4())


# 5 -------------------------------------------------------------------------------------------

def criterion_5():
    def J(mdp, u, a):
        return expected_utility_exact(RsMdp(mdp, u), HistoryPolicy.constant(mdp.H, mdp.S, mdp.A, a))

    t = zoo("transition_transfer")
    r = zoo("reward_transfer")
    ts, rs = t.variants["shifted"], r.variants["shifted"]
    got = [J(ts, t.utilities["U1"], 0), J(ts, t.utilities["U1"], 1), J(ts, t.utilities["U2"], 0),
           J(ts, t.utilities["U2"], 1), J(rs, r.utilities["U1"], 0), J(rs, r.utilities["U1"], 1),
           J(rs, r.utilities["U2"], 0), J(rs, r.utilities["U2"], 1)]
    want = [0.505, 0.597, 0.7475, 0.597, 0.8, 0.81, 0.8, 0.72]
    err = max(abs(g - w) for g, w in zip(got, want))
    return err <= 1e-12, f"shifted-dynamics and shifted-reward values {np.round(got, 4).tolist()}, max error {err:.1e}"


def test_criterion_5():
    record(5, *criterion_5())


# 6 -------------------------------------------------------------------------------------------

def criterion_6():
    e = zoo("imitation_gap")
    err = 0.0
    for eps in (0.01, 0.05, 0.1):
        alpha = eps / 0.1
        pol = HistoryPolicy.markov(np.array([[[0.0, 1 - alpha, alpha]] * 4, [[1.0, 0.0, 0.0]] * 4]))
        s1 = suboptimality(RsMdp(e.mdp, e.utilities["U1"]), pol)
        s2 = suboptimality(RsMdp(e.mdp, e.utilities["U2"]), pol)
        err = max(err, abs(s1 - 0.1 * alpha), abs(s2 - (1 + 0.099 * alpha)))
    return err <= 1e-12, f"suboptimality 0.1a under U1 and 1+0.099a under U2 for eps in 0.01, 0.05, 0.1; max error {err:.1e}"


def test_criterion_6():
    record(6, *criterion_6())


# 7 -------------------------------------------------------------------------------------------

def criterion_7():
    e = zoo("assessment_gap")
    rep = transfer_diagnostic(e.utilities["U1"], e.utilities["U2"], e.mdp)
    ok = abs(rep.d_all - 1.0) <= 1e-12 and bool(rep.optimal1 & rep.optimal2)
    return ok, f"d_all(U1, U2) = {rep.d_all:.12g} by enumeration; both utilities share the expert as optimal"


def test_criterion_7():
    record(7, *criterion_7())


# 8 -------------------------------------------------------------------------------------------

def projection_case(rng):
    d = int(rng.integers(3, 7))
    H = float(rng.integers(1, 4))
    eps = H / (d - 1)
    L = H / ((d - 1) * eps) * rng.uniform(1.0, 3.0)
    return rng.normal(H / 2, H, d), Grid(eps, H), L


def criterion_8():
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(200):
        v, grid, L = projection_case(rng)
        out = project_polytope(v, grid, L, method="dykstra").values
        worst = max(worst, float(np.linalg.norm(out - qp_projection(v, grid.epsilon0, grid.horizon, L))))
    failures = 0
    for _ in range(1000):
        v, grid, L = projection_case(rng)
        w = v + rng.normal(0, 1, len(v))
        for method in ("chain", "dykstra"):
            pv = project_polytope(v, grid, L, method=method).values
            pw = project_polytope(w, grid, L, method=method).values
            ppv = project_polytope(pv, grid, L, method=method).values
            ok = (polytope_violation(pv, grid, L) <= 1e-8 and np.linalg.norm(ppv - pv) <= 1e-8
                  and np.linalg.norm(pv - pw) <= np.linalg.norm(v - w) + 1e-8)
            failures += not ok
    return worst <= 1e-6 and failures == 0, (
        f"Dykstra vs QP oracle max 2-norm gap {worst:.1e} on 200 inputs; "
        f"{failures} property failures on 1000 cases x 2 methods")


def test_criterion_8():
    record(8, *criterion_8())


# 9 -------------------------------------------------------------------------------------------

def criterion_9():
    rng = np.random.default_rng(9)
    mass_err, w_ratio = 0.0, 0.0
    for _ in range(500):
        H = int(rng.integers(1, 6))
        eps = float(rng.choice([0.05, 0.1, 0.25, 0.5]))
        n = int(rng.integers(1, 20))
        values, weights = rng.uniform(0, H, n), rng.dirichlet(np.ones(n))
        grid = Grid(eps, H)
        proj = project_categorical(list(zip(values, weights)), grid)
        mass_err = max(mass_err, abs(proj.weights.sum() - 1.0))
        w = wasserstein_distance(values, grid.points, weights, proj.weights)
        w_ratio = max(w_ratio, w / math.sqrt(2 * H * eps))
    e = zoo("survey")
    grid = Grid(0.25, 5)
    pol = HistoryPolicy.markov(np.full((5, 4, 3), 1 / 3))
    u = np.sqrt(5 * grid.points)
    target = project_categorical(list(exact_return_distribution(e.mdp, pol).items()), grid).expectation(u)
    vals = np.array([erd(sample_demos(e.mdp, pol, 30, seed), e.mdp, grid).expectation(u) for seed in range(1000)])
    se = vals.std(ddof=1) / math.sqrt(len(vals))
    z = abs(vals.mean() - target) / se
    ok = mass_err <= 1e-9 and w_ratio <= 1.0 and z <= 3.0
    return ok, (f"mass error {mass_err:.1e}, max w1/sqrt(2 H eps0) = {w_ratio:.3f} on 500 distributions, "
                f"ERD bias {abs(vals.mean() - target):.2e} = {z:.2f} standard errors over 1000 resamples")


def test_criterion_9():
    record(9, *criterion_9())


# 10 ------------------------------------------------------------------------------------------

def criterion_10():
    slowest = 0.0
    e = zoo("survey")
    grid = e.grid
    _, psi, _ = plan(discretize_utility(builtin_utility("sqrt", 5), grid), e.mdp, grid)
    expert = lift_policy(psi, e.mdp)
    survey_final = []
    for seed in range(5):
        demos = sample_demos(e.mdp, expert, 10_000, 100 + seed)
        t = time.time()
        rec = learn([demos], [e.mdp], [EXACT], TractorConfig(T=70, K=10_000, alpha=100.0, epsilon0=0.01, L=10.0,
                                                             seed=seed))
        slowest = max(slowest, time.time() - t)
        survey_final.append(rec.final_compat)
    reached = sum(c <= 0.05 for c in survey_final)
    curves, finals = [], []
    for seed in range(5):
        mdp = random_mdp(20, 5, 5, 3, seed, epsilon0=0.05)
        g = Grid(0.05, 5)
        _, psi, _ = plan(discretize_utility(builtin_utility("s_shaped", 5), g), mdp, g)
        demos = sample_demos(mdp, noisy_expert(psi, mdp, 0.05), 10_000, 1000 + seed)
        t = time.time()
        rec = learn([demos], [mdp], [EXACT], TractorConfig(T=70, K=10_000, alpha=1.0, epsilon0=0.05, L=10.0,
                                                           seed=seed))
        slowest = max(slowest, time.time() - t)
        curves.append(rec.compat)
        finals.append(rec.final_compat)
    rho = spearmanr(np.arange(70), np.mean(curves, axis=0)).correlation
    ok = reached >= 4 and rho < -0.8 and max(finals) <= 0.1 and slowest < 300
    return ok, (f"survey final compatibility {np.round(survey_final, 4).tolist()} ({reached}/5 <= 0.05); "
                f"random suite Spearman rho {rho:.3f}, finals {np.round(finals, 3).tolist()}; "
                f"slowest run {slowest:.1f}s")


def test_criterion_10():
    record(10, *criterion_10())


# 11 ------------------------------------------------------------------------------------------

def criterion_11():
    H = 3
    mdp = random_mdp(10, 2, H, 3, 5, epsilon0=0.1)
    grid = Grid(0.1, H)
    _, psi, _ = plan(discretize_utility(builtin_utility("s_shaped", H), grid), mdp, grid)
    expert = noisy_expert(psi, mdp, 0.3)
    eta = expert_distribution(mdp, expert, grid)
    us = [builtin_utility(n, H) for n in ("linear", "sqrt", "square", "s_shaped")]
    exact = np.array([r.total for r in classify(us, [eta], [mdp], [EXACT], 0.0, grid)])
    err_tau, err_demo = [], []
    for tau in (10**3, 10**4, 10**5):
        a, b = [], []
        for seed in range(50):
            model = explore(mdp, tau, seed)
            est = np.array([r.total for r in classify(us, [eta], [mdp], [model], 0.0, grid)])
            a.append(np.abs(est - exact).mean())
            demos = sample_demos(mdp, expert, tau, seed)
            est = np.array([r.total for r in classify(us, [demos], [mdp], [EXACT], 0.0, grid)])
            b.append(np.abs(est - exact).mean())
        err_tau.append(np.mean(a))
        err_demo.append(np.mean(b))
    ok = err_tau[0] > err_tau[1] > err_tau[2] and err_demo[0] > err_demo[1] > err_demo[2]
    return ok, (f"mean |C_hat - C| over tau = 1e3, 1e4, 1e5: {np.round(err_tau, 4).tolist()}; "
                f"over demonstration counts: {np.round(err_demo, 4).tolist()}")


def test_criterion_11():
    record(11, *criterion_11())


# 12 ------------------------------------------------------------------------------------------

def criterion_12():
    H = 5
    targets = [0.25 * k for k in range(1, 21)]
    lin = elicit_utility(planner_oracle(builtin_utility("linear", H)), targets, 1e-4, H)
    lin_err = max(abs(u - g) for g, u in lin.anchors)
    sq = builtin_utility("sqrt", H)
    errs, bound_ok = [], True
    for qtol in (1e-3, 1e-4, 1e-5, 1e-6):
        res = elicit_utility(planner_oracle(sq), targets, qtol, H)
        err = max(abs(u - sq(g)) for g, u in res.anchors)
        errs.append(err)
        bound_ok &= err <= H * qtol * (1 + res.condition)
    slope = np.polyfit(np.log10([1e-3, 1e-4, 1e-5, 1e-6]), np.log10(errs), 1)[0]
    ok = lin_err <= 1e-9 and errs[1] <= 1e-3 and bound_ok and 0.75 <= slope <= 1.25
    return ok, (f"linear max error {lin_err:.1e}; sqrt max error {errs[1]:.2e} at q-tolerance 1e-4; "
                f"log-log slope of error vs q-tolerance over 1e-3..1e-6 = {slope:.2f}, within H*qtol*(1+cond): {bound_ok}")


def test_criterion_12():
    record(12, *criterion_12())


# 13 ------------------------------------------------------------------------------------------

def criterion_13():
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        env, demos = tmp / "env.json", tmp / "demos.json"
        assert cli_main(["zoo", "--export", "survey", "--out", str(env), "--demos-out", str(demos),
                         "--expert-utility", "sqrt", "--noise", "0.05", "--n-demos", "3000", "--seed", "1"]) == 0
        outputs = {"classify": [], "learn": []}
        for k in range(2):
            out = tmp / f"classify{k}.csv"
            cli_main(["classify", "--env", str(env), "--demos", str(demos), "--utility", "sqrt", "--utility",
                      "square", "--utility", "linear", "--tau", "60000", "--seed", "7", "--epsilon0", "0.01",
                      "--out", str(out)])
            outputs["classify"].append(out.read_bytes())
            run = tmp / f"learn{k}"
            cli_main(["learn", "--env", str(env), "--demos", str(demos), "--T", "10", "--K", "2000", "--tau",
                      "60000", "--seed", "7", "--epsilon0", "0.01", "--alpha", "100", "--out-dir", str(run)])
            outputs["learn"].append((run / "curve.csv").read_bytes() + (run / "utility.json").read_bytes())
        same = {k: v[0] == v[1] and len(v[0]) > 0 for k, v in outputs.items()}
    return all(same.values()), f"byte-identical outputs with equal seeds: {json.dumps(same)}"


def test_criterion_13():
    record(13, *criterion_13())


if __name__ == "__main__":
    failed = 0
    for n in range(1, 14):
        try:
            ok, detail = globals()[f"criterion_{n}"]()
        except Exception as exc:  # report and keep going
            ok, detail = False, f"raised {exc!r}"
        print(f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}", flush=True)
        failed += not ok
    sys.exit(1 if failed else 0)
