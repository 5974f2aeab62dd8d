import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from riskutil import (DiscretizedUtility, Grid, InfeasibleError, InputError, TractorConfig, builtin_utility,
                      discretize_utility, expert_distribution, learn, plan, random_mdp, theory_step_size)
from riskutil.caty import EXACT
from riskutil.planner import enlarged_return_distribution
from riskutil.returns import sample_demos
from riskutil.utility import polytope_violation
from riskutil.zoo import noisy_expert


def test_theory_step_size():
    assert theory_step_size(Grid(1.0, 2), 1, 1) == pytest.approx(1.0)
    assert theory_step_size(Grid(0.1, 5), 2, 7) == pytest.approx(theory_step_size(Grid(0.1, 5), 1, 7) / 2)
    assert theory_step_size(Grid(0.1, 5), 1, 100) == pytest.approx(1.75)
    with pytest.raises(InputError):
        theory_step_size(Grid(1.0, 1), 1, 1)


def test_config_validation():
    with pytest.raises(InputError):
        TractorConfig(T=0)
    with pytest.raises(InputError):
        TractorConfig(alpha=-1.0)
    with pytest.raises(InputError):
        TractorConfig(alpha="fast")


def suite(seed, noise=0.05, H=4, eps=0.1):
    mdp = random_mdp(8, 3, H, 3, seed, epsilon0=eps)
    grid = Grid(eps, H)
    _, psi, _ = plan(discretize_utility(builtin_utility("s_shaped", H), grid), mdp, grid)
    expert = noisy_expert(psi, mdp, noise)
    return mdp, grid, expert


def test_fixed_point_gives_flat_curve():
    mdp, grid, _ = suite(0)
    u0 = discretize_utility(builtin_utility("linear", 4), grid)
    _, psi, _ = plan(u0, mdp, grid)
    eta = enlarged_return_distribution(psi, mdp)
    rec = learn([eta], [mdp], [EXACT], TractorConfig(T=5, alpha=1.0, epsilon0=0.1, exact_gradient=True))
    assert np.allclose(rec.grad_norms, 0.0, atol=1e-12)
    assert np.allclose(rec.utilities, u0.values[None, :], atol=1e-12)
    assert np.allclose(rec.compat, rec.compat[0], atol=1e-12)


@settings(max_examples=10)
@given(st.integers(0, 10**6))
def test_gradient_bound_and_feasible_iterates(seed):
    envs, etas = [], []
    for k in range(2):
        mdp, grid, expert = suite(seed + k)
        envs.append(mdp)
        etas.append(sample_demos(mdp, expert, 200, seed))
    rec = learn(etas, envs, [EXACT, EXACT], TractorConfig(T=8, K=200, alpha=5.0, epsilon0=0.1, seed=seed))
    assert np.all(rec.grad_norms <= 2 * len(envs) + 1e-12)
    for u in rec.utilities:
        assert polytope_violation(u, rec.grid, 10.0) <= 1e-8
    assert polytope_violation(rec.final.values, rec.grid, 10.0) <= 1e-8


def test_reproducible_given_seed():
    mdp, grid, expert = suite(3)
    demos = sample_demos(mdp, expert, 300, 0)
    cfg = TractorConfig(T=5, K=500, alpha=1.0, epsilon0=0.1, seed=9)
    a, b = learn([demos], [mdp], [EXACT], cfg), learn([demos], [mdp], [EXACT], cfg)
    assert np.array_equal(a.utilities, b.utilities) and np.array_equal(a.compat, b.compat)


def test_averaged_compatibility_decreases_in_T():
    totals = {T: 0.0 for T in (2, 10, 40)}
    for seed in range(8):
        mdp, grid, expert = suite(seed)
        eta = expert_distribution(mdp, expert, grid)
        for T in totals:
            cfg = TractorConfig(T=T, alpha=1.0, epsilon0=0.1, exact_gradient=True)
            totals[T] += learn([eta], [mdp], [EXACT], cfg).final_compat
    assert totals[2] >= totals[10] >= totals[40]


def test_infeasible_start_rejected():
    mdp, grid, expert = suite(0)
    bad = DiscretizedUtility(grid, np.concatenate([[0.0], np.full(grid.d - 1, 4.0)]))
    with pytest.raises(InfeasibleError):
        learn([expert_distribution(mdp, expert, grid)], [mdp], [EXACT],
              TractorConfig(T=2, epsilon0=0.1, U0=bad))


def test_theory_preset_and_free_variant():
    mdp, grid, expert = suite(1)
    eta = expert_distribution(mdp, expert, grid)
    rec = learn([eta], [mdp], [EXACT], TractorConfig(T=4, alpha="theory", epsilon0=0.1, exact_gradient=True,
                                                     variant="free"))
    assert rec.alpha == pytest.approx(theory_step_size(grid, 1, 4))
    assert polytope_violation(rec.final.values, grid, 10.0, "free") <= 1e-8
