"""Uniform exploration with a generative model and the resulting empirical transition model."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BudgetError, InputError
from .mdp import Mdp


@dataclass(frozen=True, eq=False)
class EmpiricalModel:
    counts: np.ndarray  # (H, S, A, S) integer counts
    n_per_triple: int

    def __post_init__(self):
        c = np.array(self.counts, dtype=np.int64)
        if c.ndim != 4 or c.shape[1] != c.shape[3]:
            raise InputError("counts must have shape (H, S, A, S)")
        if self.n_per_triple < 1 or np.any(c.sum(axis=3) != self.n_per_triple):
            raise InputError("every (h, s, a) must hold exactly n_per_triple samples")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @property
    def p_hat(self) -> np.ndarray:
        return self.counts / float(self.n_per_triple)

    def apply(self, mdp: Mdp) -> Mdp:
        """mdp with its transitions replaced by the empirical ones."""
        if self.counts.shape != mdp.p.shape:
            raise InputError("empirical model does not match the environment")
        return mdp.with_transitions(self.p_hat)

    def to_json(self) -> dict:
        H, S, A, _ = self.counts.shape
        return {"S": S, "A": A, "H": H, "p": self.p_hat.tolist(),
                "counts": self.counts.tolist(), "n": self.n_per_triple}

    @classmethod
    def from_json(cls, data: dict) -> EmpiricalModel:
        for key in ("counts", "n"):
            if key not in data:
                raise InputError(f"empirical model missing key {key!r}")
        return cls(np.asarray(data["counts"]), int(data["n"]))


def explore(sampler, budget: int, rng_seed, shape: tuple[int, int, int] | None = None) -> EmpiricalModel:
    """Spend floor(budget / (S A H)) generative samples on every (h, s, a); the rest is discarded.

    sampler is an Mdp or any object with S, A, H and sample_next(h, s, a, n, rng).
    """
    if shape is None:
        H, S, A = sampler.H, sampler.S, sampler.A
    else:
        H, S, A = shape
    triples = S * A * H
    if budget < triples:
        raise BudgetError(f"budget {budget} is below S*A*H = {triples}; no samples per triple")
    n = budget // triples
    rng = np.random.default_rng(rng_seed)
    counts = np.zeros((H, S, A, S), dtype=np.int64)
    for h in range(H):
        for s in range(S):
            for a in range(A):
                draws = np.asarray(sampler.sample_next(h, s, a, n, rng))
                counts[h, s, a] = np.bincount(draws, minlength=S)
    return EmpiricalModel(counts, n)
