import numpy as np
import pytest

from riskutil import BudgetError, EmpiricalModel, explore, random_mdp, zoo


def test_samples_per_triple():
    mdp = random_mdp(2, 2, 5, None, 0)
    model = explore(mdp, 100, 0)
    assert model.n_per_triple == 5
    assert np.all(model.counts.sum(axis=3) == 5)
    assert model.counts.sum() == 5 * 2 * 2 * 5


def test_budget_below_triples():
    with pytest.raises(BudgetError):
        explore(random_mdp(2, 2, 5, None, 0), 19, 0)


def test_deterministic_dynamics_recovered_exactly():
    mdp = random_mdp(4, 3, 3, 1, 2)
    assert np.array_equal(explore(mdp, 36, 0).p_hat, mdp.p)


def test_lottery_branch_frequency():
    mdp = zoo("lottery").mdp
    model = explore(mdp, 10_000 * mdp.S * mdp.A * mdp.H, 1)
    assert abs(model.p_hat[0, 0, 0, 3] - 0.1) <= 0.02


def test_reproducible():
    mdp = random_mdp(3, 2, 2, None, 4)
    assert np.array_equal(explore(mdp, 1200, 9).counts, explore(mdp, 1200, 9).counts)


def test_l1_error_shrinks_with_budget():
    mdp = random_mdp(5, 2, 3, None, 0)
    triples = mdp.S * mdp.A * mdp.H
    errs = []
    for n in (10, 100, 1000):
        e = [np.abs(explore(mdp, n * triples, seed).p_hat - mdp.p).sum(axis=3).mean() for seed in range(50)]
        errs.append(np.mean(e))
    assert errs[0] > errs[1] > errs[2]


def test_model_json_roundtrip():
    mdp = random_mdp(3, 2, 2, None, 4)
    model = explore(mdp, 120, 0)
    again = EmpiricalModel.from_json(model.to_json())
    assert np.array_equal(again.counts, model.counts) and again.n_per_triple == model.n_per_triple
    assert np.allclose(model.apply(mdp).p, model.p_hat)
