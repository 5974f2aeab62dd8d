import numpy as np
import pytest
from hypothesis import given, strategies as st

from riskutil import Grid, InputError, ReturnDistribution, cramer2, discretize_reward, project_categorical, wasserstein1
from riskutil.mdp import build_mdp


def one_step(r):
    return build_mdp(1, 1, 1, [], [(0, 0, 0, r)])


def test_grid_cardinality_counts_both_ends():
    g = Grid(0.1, 5)
    assert g.d == 51 and g.points[0] == 0.0 and g.points[-1] == pytest.approx(5.0)
    g = Grid(0.3, 1)
    assert g.d == 4 and g.top == pytest.approx(0.9)


@pytest.mark.parametrize("r,expected", [(0.0, 0.0), (0.26, 0.3), (0.25, 0.2), (1.0, 1.0)])
def test_discretize_reward_examples(r, expected):
    assert discretize_reward(one_step(r), Grid(0.1, 1)).r[0, 0, 0] == pytest.approx(expected, abs=1e-12)


@given(st.floats(0, 1), st.sampled_from([0.05, 0.1, 0.25, 0.3]))
def test_discretize_reward_is_close_and_idempotent(r, eps):
    grid = Grid(eps, 1)
    once = discretize_reward(one_step(r), grid)
    assert abs(once.r[0, 0, 0] - r) <= eps / 2 + 1e-12
    assert discretize_reward(once, grid).r[0, 0, 0] == once.r[0, 0, 0]


def test_projection_examples():
    grid = Grid(1.0, 2)
    assert np.allclose(project_categorical([(1.0, 1.0)], grid).weights, [0, 1, 0])
    assert np.allclose(project_categorical([(0.25, 1.0)], grid).weights, [0.75, 0.25, 0])
    assert np.allclose(project_categorical([(2.7, 1.0)], grid).weights, [0, 0, 1])
    assert np.allclose(project_categorical([(-0.5, 1.0)], grid).weights, [1, 0, 0])


def test_projection_rejects_negative_weight():
    with pytest.raises(InputError, match="negative"):
        project_categorical([(0.0, 1.5), (1.0, -0.5)], Grid(1.0, 2))


def test_distances_examples():
    grid = Grid(1.0, 2)
    a = ReturnDistribution(grid, [0.5, 0.5, 0.0])
    b = ReturnDistribution(grid, [0.0, 0.5, 0.5])
    assert wasserstein1(a, a) == 0.0 and cramer2(a, a) == 0.0
    assert wasserstein1(a, b) == pytest.approx(1.0)
    assert wasserstein1(ReturnDistribution.dirac(grid, 0), ReturnDistribution.dirac(grid, 2)) == pytest.approx(2.0)
    assert cramer2(ReturnDistribution.dirac(grid, 0), ReturnDistribution.dirac(grid, 1)) == pytest.approx(1.0)


def test_distances_require_same_grid():
    with pytest.raises(InputError):
        wasserstein1(ReturnDistribution.dirac(Grid(1.0, 2), 0), ReturnDistribution.dirac(Grid(0.5, 2), 0))


def random_atoms(seed, H, n=8):
    rng = np.random.default_rng(seed)
    values = rng.uniform(0, H, n)
    weights = rng.dirichlet(np.ones(n))
    return values, weights


@given(st.integers(0, 10**6), st.sampled_from([0.05, 0.1, 0.3, 0.7]), st.integers(1, 5))
def test_projection_mass_and_mean(seed, eps, H):
    values, weights = random_atoms(seed, H)
    grid = Grid(eps, H)
    proj = project_categorical(list(zip(values, weights)), grid)
    assert abs(proj.weights.sum() - 1.0) <= 1e-9
    assert abs(proj.mean() - float(values @ weights)) <= eps + 1e-12


@given(st.integers(0, 10**6), st.sampled_from([0.05, 0.1, 0.25]), st.integers(1, 5))
def test_projection_wasserstein_bound(seed, eps, H):
    values, weights = random_atoms(seed, H)
    grid = Grid(eps, H)
    proj = project_categorical(list(zip(values, weights)), grid)
    # w1 against the continuous atoms via scipy as an independent oracle
    from scipy.stats import wasserstein_distance

    w = wasserstein_distance(values, grid.points, weights, proj.weights)
    assert w <= np.sqrt(2 * H * eps) + 1e-12


@given(st.integers(0, 10**6), st.sampled_from([0.1, 0.5, 1.0]), st.integers(1, 5))
def test_w1_matches_scipy_and_cramer_bound(seed, eps, H):
    grid = Grid(eps, H)
    rng = np.random.default_rng(seed)
    a = ReturnDistribution(grid, rng.dirichlet(np.ones(grid.d)))
    b = ReturnDistribution(grid, rng.dirichlet(np.ones(grid.d)))
    from scipy.stats import wasserstein_distance

    assert wasserstein1(a, b) == pytest.approx(
        wasserstein_distance(grid.points, grid.points, a.weights, b.weights), abs=1e-9)
    assert wasserstein1(a, b) <= np.sqrt(H) * cramer2(a, b) + 1e-12


def test_return_distribution_json_roundtrip():
    grid = Grid(0.5, 2)
    a = ReturnDistribution(grid, [0.1, 0.2, 0.3, 0.2, 0.2])
    b = ReturnDistribution.from_json(a.to_json())
    assert b.grid == grid and np.array_equal(a.weights, b.weights)


def test_return_distribution_rejects_bad_mass():
    with pytest.raises(InputError):
        ReturnDistribution(Grid(1.0, 2), [0.5, 0.4, 0.0])
