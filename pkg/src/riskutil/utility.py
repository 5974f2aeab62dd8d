"""Utility functions, their grid discretization and projection onto the monotone Lipschitz polytope."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .discretization import Grid, ReturnDistribution
from .errors import InfeasibleError, InputError

TOL = 1e-9


def _closed_form(family: str, params: tuple, H: float):
    if family == "linear":
        return lambda g: g
    if family == "sqrt":
        return lambda g: np.sqrt(H * g)
    if family == "square":
        return lambda g: g**2 / H
    if family == "s_shaped":
        (m,) = params

        def s_curve(g):
            lo = m * (g / m) ** 2
            hi = m + (H - m) * (1.0 - (1.0 - (g - m) / (H - m)) ** 2)
            return np.where(g <= m, lo, hi)

        return s_curve
    raise InputError(f"unknown utility family {family!r}")


@dataclass(frozen=True, eq=False)
class Utility:
    """Continuous utility on [0, H], piecewise linear through anchors unless a closed form is attached."""

    xs: np.ndarray
    us: np.ndarray
    lipschitz: float | None = None
    family: str | None = None
    params: tuple = ()

    def __post_init__(self):
        xs = np.array(self.xs, dtype=float).ravel()
        us = np.array(self.us, dtype=float).ravel()
        if xs.shape != us.shape or len(xs) < 2:
            raise InputError("utility needs at least two anchors of matching length")
        if np.any(np.diff(xs) <= 0):
            raise InputError("utility anchors must have strictly increasing x")
        H = xs[-1]
        if abs(xs[0]) > TOL or abs(us[0]) > TOL:
            raise InputError(f"utility must satisfy U(0)=0, got U({xs[0]})={us[0]}")
        if abs(us[-1] - H) > TOL:
            raise InputError(f"utility must satisfy U(H)=H, got U({H})={us[-1]}")
        if np.any(np.diff(us) < -TOL):
            raise InputError("utility anchors must be non-decreasing")
        if self.lipschitz is not None:
            if not self.lipschitz > 0:
                raise InputError("Lipschitz bound must be positive")
            slopes = np.diff(us) / np.diff(xs)
            if slopes.max() > self.lipschitz + TOL:
                raise InputError(f"utility chord slope {slopes.max():.6g} exceeds L={self.lipschitz}")
        xs.setflags(write=False)
        us.setflags(write=False)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "us", us)
        object.__setattr__(self, "params", tuple(self.params))
        if self.family is not None:
            _closed_form(self.family, self.params, H)

    @property
    def horizon(self) -> float:
        return float(self.xs[-1])

    def __call__(self, g):
        g = np.clip(np.asarray(g, dtype=float), 0.0, self.horizon)
        if self.family is not None:
            return _closed_form(self.family, self.params, self.horizon)(g)
        return np.interp(g, self.xs, self.us)

    def is_strict(self, slack: float = 1e-12) -> bool:
        return bool(np.all(np.diff(self.us) > slack))

    @classmethod
    def from_anchors(cls, H: float, anchors: Sequence, L: float | None = None) -> Utility:
        """Anchors may omit the endpoints (0, 0) and (H, H); they are added when missing."""
        pts = sorted((float(x), float(u)) for x, u in anchors)
        if not pts or pts[0][0] > TOL:
            pts.insert(0, (0.0, 0.0))
        if pts[-1][0] < H - TOL:
            pts.append((float(H), float(H)))
        xs, us = zip(*pts)
        return cls(np.array(xs), np.array(us), L)

    @classmethod
    def from_values(cls, grid: Grid, values, L: float | None = None) -> Utility:
        xs = list(grid.points)
        us = list(np.asarray(values, dtype=float))
        if grid.top < grid.horizon - TOL:
            xs.append(grid.horizon)
            us.append(grid.horizon)
        return cls(np.array(xs), np.array(us), L)

    def to_json(self) -> dict:
        out = {"H": self.horizon, "anchors": [[float(x), float(u)] for x, u in zip(self.xs, self.us)],
               "L": self.lipschitz}
        if self.family is not None:
            out["family"] = self.family
            out["params"] = list(self.params)
        return out

    @classmethod
    def from_json(cls, data: dict) -> Utility:
        for key in ("H", "anchors"):
            if key not in data:
                raise InputError(f"utility file missing key {key!r}")
        H = float(data["H"])
        L = data.get("L")
        if data.get("family"):
            return builtin_utility(data["family"], H, *data.get("params", []), L=L)
        anchors = data["anchors"]
        if not all(isinstance(a, (list, tuple)) and len(a) == 2 for a in anchors):
            raise InputError("utility anchors must be [x, U(x)] pairs")
        return cls.from_anchors(H, anchors, None if L is None else float(L))


def builtin_utility(name: str, H: float = 5.0, *params, L: float | None = None,
                    anchors: Sequence | None = None, scale: float = 1000.0) -> Utility:
    """Named utility families on [0, H].

    linear, sqrt (sqrt(H g)), square (g^2 / H), s_shaped (convex below the inflection
    point, concave above; params: inflection, default H/2) and sg, which takes standard
    gamble anchors (money, u) with u in [0, 1] and money/scale on the return axis and
    rescales u to [0, H].
    """
    H = float(H)
    if name == "sg":
        if anchors is None:
            raise InputError("sg utility needs anchors")
        pts = [(float(x) / scale, float(u) * H) for x, u in anchors]
        return Utility.from_anchors(H, pts, L)
    if name == "s_shaped":
        m = float(params[0]) if params else H / 2
        if not 0 < m < H:
            raise InputError("s_shaped inflection must lie in (0, H)")
        params = (m,)
    elif params:
        raise InputError(f"utility {name!r} takes no parameters")
    if name not in ("linear", "sqrt", "square", "s_shaped"):
        raise InputError(f"unknown utility {name!r}")
    xs = np.linspace(0.0, H, 1001)
    us = _closed_form(name, params, H)(xs)
    us[-1] = H
    return Utility(xs, us, L, name, params)


@dataclass(frozen=True, eq=False)
class DiscretizedUtility:
    grid: Grid
    values: np.ndarray
    lipschitz: float | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        if v.shape != (self.grid.d,):
            raise InputError(f"expected {self.grid.d} utility values, got {v.shape}")
        if np.any(np.diff(v) < -TOL) or v.max() > self.grid.horizon + TOL or v.min() < -TOL:
            raise InputError("discretized utility must be non-decreasing within [0, H]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def expectation(self, dist: ReturnDistribution) -> float:
        return dist.expectation(self.values)

    def to_utility(self) -> Utility:
        return Utility.from_values(self.grid, self.values, self.lipschitz)


def discretize_utility(u: Utility, grid: Grid) -> DiscretizedUtility:
    if u.horizon < grid.top - TOL:
        raise InputError(f"utility on [0, {u.horizon}] does not cover the grid up to {grid.top}")
    values = np.asarray(u(grid.points), dtype=float)
    if u.lipschitz is not None and grid.d > 1:
        worst = np.max(np.diff(values)) / grid.epsilon0
        if worst > u.lipschitz + TOL:
            raise InputError(f"sampled utility violates L={u.lipschitz} (slope {worst:.6g})")
    return DiscretizedUtility(grid, values, u.lipschitz)


def polytope_violation(v, grid: Grid, L: float | None, variant: str = "strict") -> float:
    """Largest violation of any polytope constraint (pairwise Lipschitz included)."""
    v = np.asarray(v, dtype=float)
    H = grid.horizon
    worst = max(0.0, -v.min(), v.max() - H)
    if variant == "strict":
        worst = max(worst, abs(v[0]), abs(v[-1] - H))
    worst = max(worst, float(np.max(-np.diff(v), initial=0.0)))
    if L is not None and len(v) > 1:
        idx = np.arange(len(v))
        gap = np.abs(v[None, :] - v[:, None]) - L * np.abs(idx[None, :] - idx[:, None]) * grid.epsilon0
        worst = max(worst, float(gap.max()))
    return worst


def _check_variant(grid: Grid, L: float | None, variant: str):
    if variant not in ("strict", "free"):
        raise InputError(f"unknown polytope variant {variant!r}")
    if variant == "strict":
        if grid.d < 2:
            raise InfeasibleError("strict polytope needs at least two grid points")
        if L is not None and L * (grid.d - 1) * grid.epsilon0 < grid.horizon - 1e-12:
            raise InfeasibleError(f"empty polytope: L*(d-1)*eps0 = {L * (grid.d - 1) * grid.epsilon0:.6g} "
                                  f"< H = {grid.horizon}")


def project_polytope(v, grid: Grid, L: float | None, variant: str = "strict", method: str = "chain",
                     tol: float = 1e-10, max_sweeps: int = 100_000) -> DiscretizedUtility:
    """Euclidean projection onto the discretized utility polytope.

    method="chain" solves the problem exactly by dynamic programming on the chain of
    adjacent differences; method="dykstra" runs Dykstra's algorithm over all pairwise
    constraints. Both give the same point up to the Dykstra stopping tolerance.
    """
    v = np.asarray(v, dtype=float).ravel()
    if v.shape != (grid.d,):
        raise InputError(f"expected a vector of length {grid.d}, got {v.shape}")
    if not np.all(np.isfinite(v)):
        raise InputError("cannot project a vector with non-finite entries")
    _check_variant(grid, L, variant)
    if method == "chain":
        x = _project_chain(v, grid, L, variant)
    elif method == "dykstra":
        x = _project_dykstra(v, grid, L, variant, tol, max_sweeps)
    else:
        raise InputError(f"unknown projection method {method!r}")
    x = np.maximum.accumulate(np.clip(x, 0.0, grid.horizon))
    if variant == "strict":
        x[0] = 0.0
        x[-1] = grid.horizon
    return DiscretizedUtility(grid, x, L)


def _slab_pairs(d: int):
    """Rounds of disjoint index pairs covering every pair i < j exactly once (circle method)."""
    n = d if d % 2 == 0 else d + 1
    ring = list(range(n))
    rounds = []
    for _ in range(n - 1):
        pairs = []
        for k in range(n // 2):
            a, b = ring[k], ring[n - 1 - k]
            if a < d and b < d:
                pairs.append((min(a, b), max(a, b)))
        rounds.append(np.array(pairs, dtype=np.int64).reshape(-1, 2))
        ring = [ring[0]] + [ring[-1]] + ring[1:-1]
    return rounds


def _project_dykstra(v, grid: Grid, L, variant, tol, max_sweeps) -> np.ndarray:
    d, H, eps = grid.d, grid.horizon, grid.epsilon0
    c = math.inf if L is None else L * eps
    # each block is a product of disjoint sets, so its projection is exact and vectorized
    blocks = []
    for pairs in _slab_pairs(d):
        i, j = pairs[:, 0], pairs[:, 1]
        gap = j - i
        lo = np.where(gap == 1, 0.0, -c * gap)  # monotonicity only binds adjacent points
        hi = c * gap
        blocks.append(("slab", i, j, lo, hi))
    blocks.append(("box",))
    if variant == "strict":
        blocks.append(("ends",))
    x = v.copy()
    incr = [np.zeros(d) for _ in blocks]
    for _ in range(max_sweeps):
        start = x.copy()
        moved = 0.0
        for b, block in enumerate(blocks):
            y = x + incr[b]
            if block[0] == "slab":
                _, i, j, lo, hi = block
                diff = y[j] - y[i]
                shift = (np.clip(diff, lo, hi) - diff) / 2.0
                xn = y.copy()
                xn[i] -= shift
                xn[j] += shift
            elif block[0] == "box":
                xn = np.clip(y, 0.0, H)
            else:
                xn = y.copy()
                xn[0] = 0.0
                xn[-1] = H
            new_incr = y - xn
            moved = max(moved, float(np.max(np.abs(new_incr - incr[b]))))
            incr[b] = new_incr
            x = xn
        # x alone can stall for a sweep while the increments are still moving
        if max(moved, float(np.max(np.abs(x - start)))) < tol:
            break
    return x


def _project_chain(v, grid: Grid, L, variant) -> np.ndarray:
    """Exact projection: minimize sum (x_k - v_k)^2 / 2 with 0 <= x_{k+1} - x_k <= c.

    Forward pass keeps the derivative of the partial value function f_k as a
    piecewise-linear map (segment starts/ends, slope, intercept); the window minimum
    min_{x' in [x-c, x]} f(x') splits f' at its root and shifts the right part by c.
    """
    n, H = grid.d, grid.horizon
    c = math.inf if L is None else L * grid.epsilon0
    if variant == "strict":
        first, last = (0.0, 0.0), (H, H)
    else:
        first, last = (0.0, H), (0.0, H)
    doms = []
    mins = []
    lo, hi = first
    seg = np.array([[lo, hi, 1.0, -v[0]]])  # columns: start, end, slope, intercept
    for k in range(n):
        if k > 0:
            m = mins[-1]
            left = seg[seg[:, 0] < m].copy()
            left[:, 1] = np.minimum(left[:, 1], m)
            right = seg[seg[:, 1] > m].copy()
            right[:, 0] = np.maximum(right[:, 0], m)
            if math.isinf(c):
                right = np.empty((0, 4))
                flat = np.array([[m, math.inf, 0.0, 0.0]])
            else:
                right[:, :2] += c
                right[:, 3] -= right[:, 2] * c
                flat = np.array([[m, m + c, 0.0, 0.0]])
            seg = np.vstack([left, flat, right])
            seg[:, 2] += 1.0
            seg[:, 3] -= v[k]
            lo, hi = doms[-1][0], doms[-1][1] + c
        # feasibility window: stay inside [0, H] and keep the last point reachable
        reach_lo = last[0] - (n - 1 - k) * c if not math.isinf(c) else -math.inf
        lo = max(lo, reach_lo, 0.0 if k else lo)
        hi = min(hi, last[1])
        if k == n - 1:
            lo, hi = max(lo, last[0]), min(hi, last[1])
        if lo > hi + 1e-12:
            raise InfeasibleError("empty polytope")
        hi = max(hi, lo)
        seg = seg[(seg[:, 1] > lo) & (seg[:, 0] < hi)].copy()
        if len(seg):
            seg[:, 0] = np.maximum(seg[:, 0], lo)
            seg[:, 1] = np.minimum(seg[:, 1], hi)
            seg = seg[seg[:, 1] > seg[:, 0]]
        doms.append((lo, hi))
        mins.append(_argmin_from_derivative(seg, lo, hi))
    x = np.empty(n)
    x[-1] = mins[-1]
    for k in range(n - 2, -1, -1):
        lo, hi = doms[k]
        x[k] = min(max(mins[k], x[k + 1] - c, lo), x[k + 1], hi)
    return x


def _argmin_from_derivative(seg: np.ndarray, lo: float, hi: float) -> float:
    """Minimizer on [lo, hi] of a convex function with nondecreasing piecewise-linear derivative."""
    if len(seg) == 0:
        return lo
    start_val = seg[:, 2] * seg[:, 0] + seg[:, 3]
    end_val = seg[:, 2] * seg[:, 1] + seg[:, 3]
    ok = np.nonzero(end_val >= 0)[0]
    if len(ok) == 0:
        return hi
    k = ok[0]
    if start_val[k] >= 0:
        return float(seg[k, 0])
    return float(-seg[k, 3] / seg[k, 2])
