import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import dense_feasible, qp_projection
from riskutil import (Grid, InfeasibleError, InputError, Utility, builtin_utility, discretize_utility,
                      project_polytope)
from riskutil.utility import polytope_violation


def test_discretize_examples():
    assert np.allclose(discretize_utility(builtin_utility("linear", 2), Grid(1.0, 2)).values, [0, 1, 2])
    assert builtin_utility("sqrt", 5)(1.25) == pytest.approx(2.5)
    assert builtin_utility("square", 5)(5.0) == pytest.approx(5.0)
    assert builtin_utility("linear", 5)(1.0) == 1.0
    assert builtin_utility("sqrt", 5)(0.0) == 0.0 and builtin_utility("sqrt", 5)(5.0) == 5.0


def test_linear_discretizes_to_grid():
    grid = Grid(0.1, 5)
    assert np.allclose(discretize_utility(builtin_utility("linear", 5), grid).values, grid.points)


def test_s_shaped_convex_then_concave():
    u = builtin_utility("s_shaped", 4)
    x = np.linspace(0, 4, 401)
    second = np.diff(u(x), 2)
    assert np.all(second[:195] >= -1e-12) and np.all(second[205:] <= 1e-12)


def test_sg_anchors_rescaled():
    u = builtin_utility("sg", 5, anchors=[(1000, 0.5), (5000, 1.0)])
    assert u(1.0) == pytest.approx(2.5) and u(5.0) == pytest.approx(5.0)


def test_utility_invariants():
    with pytest.raises(InputError, match="U\\(H\\)=H"):
        Utility([0, 1, 2], [0, 1, 1.5])
    with pytest.raises(InputError, match="non-decreasing"):
        Utility([0, 1, 1.5, 2], [0, 1.5, 1.0, 2])
    with pytest.raises(InputError):
        builtin_utility("s_shaped", 4, 4.0)
    with pytest.raises(InputError):
        builtin_utility("cara", 4)


def test_lipschitz_violation_detected():
    with pytest.raises(InputError, match="exceeds L"):
        Utility.from_anchors(2, [(1, 0.0)], L=1.5)
    u = builtin_utility("square", 2, L=2.0)
    object.__setattr__(u, "lipschitz", 1.2)
    with pytest.raises(InputError, match="violates"):
        discretize_utility(u, Grid(1.0, 2))


def test_utility_json_roundtrip():
    u = Utility.from_anchors(2, [(0.5, 0.1), (1.5, 1.0)], L=3.0)
    v = Utility.from_json(u.to_json())
    x = np.linspace(0, 2, 17)
    assert np.allclose(u(x), v(x)) and v.lipschitz == 3.0


def test_projection_worked_example():
    out = project_polytope([0, 2.5, 2], Grid(1.0, 2), 2.0)
    assert np.allclose(out.values, [0, 2, 2], atol=1e-12)


def test_projection_infeasible():
    with pytest.raises(InfeasibleError):
        project_polytope([0, 0, 0], Grid(1.0, 2), 0.9)


@pytest.mark.parametrize("method", ["chain", "dykstra"])
def test_projection_of_negative_input(method):
    grid = Grid(1.0, 4)
    out = project_polytope(np.full(5, -3.0), grid, 2.0, method=method)
    ref = qp_projection(np.full(5, -3.0), 1.0, 4, 2.0)
    assert np.linalg.norm(out.values - ref) <= 1e-6


def random_case(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(3, 7))
    H = float(rng.integers(1, 4))
    eps = H / (d - 1)
    L = H / ((d - 1) * eps) * rng.uniform(1.0, 3.0)
    v = rng.normal(H / 2, H, d)
    return v, Grid(eps, H), L


@given(st.integers(0, 10**6), st.sampled_from(["chain", "dykstra"]), st.sampled_from(["strict", "free"]))
def test_projection_matches_qp_oracle(seed, method, variant):
    v, grid, L = random_case(seed)
    out = project_polytope(v, grid, L, variant=variant, method=method)
    ref = qp_projection(v, grid.epsilon0, grid.horizon, L, variant)
    assert np.linalg.norm(out.values - ref) <= 1e-6
    assert dense_feasible(out.values, grid.epsilon0, grid.horizon, L, variant, tol=1e-8)


@given(st.integers(0, 10**6))
def test_projection_idempotent_and_nonexpansive(seed):
    v, grid, L = random_case(seed)
    w = v + np.random.default_rng(seed + 1).normal(0, 1, len(v))
    pv = project_polytope(v, grid, L).values
    pw = project_polytope(w, grid, L).values
    assert np.allclose(project_polytope(pv, grid, L).values, pv, atol=1e-9)
    assert np.linalg.norm(pv - pw) <= np.linalg.norm(v - w) + 1e-9
    assert polytope_violation(pv, grid, L) <= 1e-8


def test_chain_projection_scales():
    grid = Grid(0.01, 5)
    v = np.random.default_rng(0).normal(2.5, 3, grid.d)
    out = project_polytope(v, grid, 10.0)
    assert polytope_violation(out.values, grid, 10.0) <= 1e-8
