"""Uniform return grids, reward snapping, categorical projection and grid distances."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InputError

# slack used when deciding whether a float sits on a grid point
_SNAP = 1e-9


def nearest_index(t, upper: int | None = None):
    """Round grid coordinates t (in units of epsilon0) to the nearest integer, ties down."""
    t = np.asarray(t, dtype=float)
    lo = np.floor(t)
    frac = t - lo
    idx = np.where(frac <= 0.5 + _SNAP, lo, lo + 1.0).astype(np.int64)
    idx = np.maximum(idx, 0)
    if upper is not None:
        idx = np.minimum(idx, upper)
    return idx


@dataclass(frozen=True)
class Grid:
    epsilon0: float
    horizon: float

    def __post_init__(self):
        if not (self.epsilon0 > 0 and math.isfinite(self.epsilon0)):
            raise InputError(f"epsilon0 must be a positive real, got {self.epsilon0}")
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise InputError(f"horizon must be positive, got {self.horizon}")

    @cached_property
    def d(self) -> int:
        return int(math.floor(self.horizon / self.epsilon0 + _SNAP)) + 1

    @cached_property
    def points(self) -> np.ndarray:
        pts = np.arange(self.d, dtype=float) * self.epsilon0
        pts.setflags(write=False)
        return pts

    @property
    def top(self) -> float:
        return float(self.points[-1])

    @cached_property
    def reward_levels(self) -> int:
        """Index of the largest point of R, the grid restricted to [0, 1]."""
        return int(math.floor(1.0 / self.epsilon0 + _SNAP))

    def stage_size(self, h: int) -> int:
        """Number of points of Y_h for a 0-based stage h (accumulated reward after h steps)."""
        return min(self.d, int(math.floor(h / self.epsilon0 + _SNAP)) + 1)

    def index_of(self, y):
        """Nearest grid index of y (ties to the lower point), clipped to the grid."""
        return nearest_index(np.asarray(y, dtype=float) / self.epsilon0, self.d - 1)

    def on_grid(self, y) -> np.ndarray:
        t = np.asarray(y, dtype=float) / self.epsilon0
        k = np.rint(t)
        return (np.abs(t - k) <= _SNAP) & (k >= 0) & (k <= self.d - 1)

    def to_json(self) -> dict:
        return {"epsilon0": self.epsilon0, "H": self.horizon}


def theory_epsilon0(eps: float, H: float, L: float, N: int) -> float:
    """Discretization level eps^2 / (72 H L^2 N^2) used by the sample-complexity analysis."""
    return eps**2 / (72.0 * H * L**2 * N**2)


@dataclass(frozen=True, eq=False)
class ReturnDistribution:
    grid: Grid
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.shape != (self.grid.d,):
            raise InputError(f"expected {self.grid.d} weights, got shape {w.shape}")
        if np.any(w < -_SNAP):
            raise InputError("return distribution has negative weights")
        if abs(w.sum() - 1.0) > _SNAP:
            raise InputError(f"return distribution sums to {w.sum()!r}, not 1")
        w = np.maximum(w, 0.0)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def expectation(self, values) -> float:
        return float(np.dot(np.asarray(values, dtype=float), self.weights))

    def mean(self) -> float:
        return self.expectation(self.grid.points)

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.weights)

    @classmethod
    def dirac(cls, grid: Grid, index: int) -> ReturnDistribution:
        w = np.zeros(grid.d)
        w[index] = 1.0
        return cls(grid, w)

    def to_json(self) -> dict:
        return {"epsilon0": self.grid.epsilon0, "H": self.grid.horizon,
                "weights": [float(x) for x in self.weights]}

    @classmethod
    def from_json(cls, data: dict) -> ReturnDistribution:
        try:
            grid = Grid(float(data["epsilon0"]), float(data["H"]))
            return cls(grid, np.asarray(data["weights"], dtype=float))
        except KeyError as exc:
            raise InputError(f"return distribution missing key {exc}") from exc


def projection_weights(values, weights, grid: Grid) -> np.ndarray:
    """Unnormalized Proj_C of the atomic measure sum_k weights[k] delta_{values[k]}."""
    values = np.asarray(values, dtype=float).ravel()
    weights = np.asarray(weights, dtype=float).ravel()
    if values.shape != weights.shape:
        raise InputError("values and weights differ in length")
    if np.any(weights < 0):
        raise InputError("negative weight in distribution")
    out = np.zeros(grid.d)
    t = values / grid.epsilon0
    top = grid.d - 1
    k = np.rint(t)
    exact = np.abs(t - k) <= _SNAP
    # below the first point or beyond the last one: all mass to the boundary point
    below = t <= 0
    above = (t >= top) & ~below
    inside = ~(below | above)
    np.add.at(out, 0, weights[below].sum())
    np.add.at(out, top, weights[above].sum())
    snapped = inside & exact
    np.add.at(out, k[snapped].astype(np.int64), weights[snapped])
    split = inside & ~exact
    lo = np.floor(t[split]).astype(np.int64)
    frac = t[split] - lo
    np.add.at(out, lo, weights[split] * (1.0 - frac))
    np.add.at(out, lo + 1, weights[split] * frac)
    return out


def project_categorical(dist, grid: Grid) -> ReturnDistribution:
    """Categorical projection of a finite mixture given as (value, weight) pairs."""
    pairs = list(dist)
    if not pairs:
        raise InputError("empty distribution")
    values, weights = zip(*pairs)
    w = projection_weights(values, weights, grid)
    total = w.sum()
    if abs(total - 1.0) > _SNAP:
        raise InputError(f"distribution weights sum to {total!r}, not 1")
    return ReturnDistribution(grid, w / total)


def _check_same_grid(a: ReturnDistribution, b: ReturnDistribution):
    if a.grid.d != b.grid.d or abs(a.grid.epsilon0 - b.grid.epsilon0) > 1e-12:
        raise InputError("distributions live on different grids")


def wasserstein1(a: ReturnDistribution, b: ReturnDistribution) -> float:
    _check_same_grid(a, b)
    gap = np.abs(a.cdf() - b.cdf())[:-1]
    return float(gap.sum() * a.grid.epsilon0)


def cramer2(a: ReturnDistribution, b: ReturnDistribution) -> float:
    _check_same_grid(a, b)
    gap = (a.cdf() - b.cdf())[:-1]
    return float(math.sqrt(np.sum(gap**2) * a.grid.epsilon0))


def snap_rewards(r, grid: Grid) -> np.ndarray:
    """Nearest point of R = {0, eps0, ..., floor(1/eps0) eps0} for each reward, ties downward."""
    idx = nearest_index(np.asarray(r, dtype=float) / grid.epsilon0, grid.reward_levels)
    return idx


def discretize_reward(mdp, grid: Grid):
    """Copy of mdp with every reward replaced by its nearest point of R."""
    idx = snap_rewards(mdp.r, grid)
    return mdp.with_rewards(np.minimum(idx * grid.epsilon0, 1.0))
