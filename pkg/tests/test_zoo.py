import numpy as np
import pytest
from hypothesis import given, strategies as st

from riskutil import CoverageError, InputError, Mdp, ingest_survey_policy, random_mdp, zoo
from riskutil.zoo import REGISTRY

L, M, H, T = range(4)
A0, AP, AM = range(3)


@pytest.mark.parametrize("entry", sorted(REGISTRY))
def test_golden_values(entry):
    for quantity, expected, got, ok in zoo(entry).check():
        assert ok, f"{entry}: {quantity} expected {expected}, got {got}"


def test_unknown_entry():
    with pytest.raises(InputError, match="unknown environment"):
        zoo("nope")


def test_survey_tables():
    e = zoo("survey")
    assert (e.mdp.S, e.mdp.A, e.mdp.H, e.mdp.s0) == (4, 3, 5, M)
    assert np.allclose(e.mdp.p[0, M, AP], [0, 2 / 3, 1 / 3, 0])
    assert e.mdp.r[0, H, AM] == pytest.approx(0.2)
    assert e.mdp.r[2, M, A0] == pytest.approx(0.03)


def test_imitation_utilities():
    e = zoo("imitation_gap")
    assert e.utilities["U1"](1.0) == pytest.approx(0.1 / 0.09)


def test_random_mdp_properties():
    assert np.all(np.isin(random_mdp(5, 2, 3, 1, 0).p, [0.0, 1.0]))
    a, b = random_mdp(5, 2, 3, 2, 7), random_mdp(5, 2, 3, 2, 7)
    assert np.array_equal(a.p, b.p) and np.array_equal(a.r, b.r)
    assert np.all((a.p > 0).sum(axis=3) <= 2)


@given(st.integers(1, 6), st.integers(1, 3), st.integers(1, 4), st.integers(0, 10**6))
def test_random_mdp_is_valid(S, A, H, seed):
    mdp = random_mdp(S, A, H, None, seed)
    assert np.allclose(mdp.p.sum(axis=3), 1.0)
    Mdp(mdp.p, mdp.r, mdp.s0)


def test_survey_closure_only():
    pol = ingest_survey_policy("s,h,y_eur,action\n")
    assert pol.act(2, L, 0.1) == AP
    assert pol.act(4, M, 0.3) == AM
    assert pol.act(4, L, 0.3) == AM
    with pytest.raises(CoverageError):
        pol.distribution(1, M, 0.0)


def test_survey_row_and_nearest_lookup():
    text = "s,h,y_eur,action\nM,2,30,a-\nM,2,100,a0\n"
    pol = ingest_survey_policy(text)
    assert pol.act(1, M, 0.03) == AM
    assert pol.act(1, M, 0.045) == AM
    assert pol.act(1, M, 0.07) == A0


def test_survey_errors():
    with pytest.raises(InputError, match="unknown action"):
        ingest_survey_policy("s,h,y_eur,action\nM,2,30,a9\n")
    with pytest.raises(InputError, match="contradictory"):
        ingest_survey_policy("s,h,y_eur,action\nM,2,30,a0\nM,2,30,a-\n")
    with pytest.raises(InputError, match="header"):
        ingest_survey_policy("state,h,y,action\n")
