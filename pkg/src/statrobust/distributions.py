"""Finite discrete distributions: Gibbs conditionals, exact sampling, divergences.

All divergences are in nats.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, ShapeMismatch

PMF_SUM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Pmf:
    """Probability mass over support indices ``0 .. support_size - 1``."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64).copy()
        if probs.ndim != 1 or probs.size == 0:
            raise InvalidInput("Pmf needs a non-empty 1-d probability vector")
        if not np.all(np.isfinite(probs)) or np.any(probs < 0):
            raise InvalidInput("Pmf entries must be finite and non-negative")
        total = math.fsum(probs)
        if abs(total - 1.0) > PMF_SUM_TOL:
            raise InvalidInput(f"Pmf entries sum to {total!r}, not 1")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def support_size(self) -> int:
        return self.probs.size

    @classmethod
    def from_counts(cls, counts) -> "Pmf":
        counts = np.asarray(counts, dtype=np.int64)
        total = int(counts.sum())
        if total <= 0:
            raise InvalidInput("counts must have a positive total")
        return cls(counts / total)

    def __len__(self):
        return self.support_size

    def __repr__(self):
        return f"Pmf({np.array2string(self.probs, precision=6)})"


def pmf_from_energies(energies, temperature: float = 1.0) -> Pmf:
    """Boltzmann distribution ``exp(-E/T)`` normalized over the support."""
    e = np.asarray(energies, dtype=np.float64)
    if e.ndim != 1 or e.size == 0:
        raise InvalidInput("energies must be a non-empty vector")
    if not np.all(np.isfinite(e)):
        raise InvalidInput("energies must be finite")
    if not (temperature > 0 and math.isfinite(temperature)):
        raise InvalidInput(f"temperature must be positive, got {temperature!r}")
    w = np.exp(-(e - e.min()) / temperature)
    return Pmf(w / w.sum())


def _check_pair(p: Pmf, q: Pmf):
    if p.support_size != q.support_size:
        raise ShapeMismatch(
            f"support sizes differ: {p.support_size} vs {q.support_size}"
        )


def kl_divergence(p: Pmf, q: Pmf) -> float:
    """KL(p || q) in nats; ``math.inf`` when p puts mass where q has none."""
    _check_pair(p, q)
    pp, qq = p.probs, q.probs
    mask = pp > 0
    if np.any(qq[mask] == 0):
        return math.inf
    return math.fsum(pp[mask] * np.log(pp[mask] / qq[mask]))


def js_divergence(p: Pmf, q: Pmf) -> float:
    """Jensen-Shannon divergence in nats, bounded by ln 2."""
    _check_pair(p, q)
    pp, qq = p.probs, q.probs
    m = 0.5 * (pp + qq)
    total = 0.0
    for a in (pp, qq):
        mask = a > 0
        total += math.fsum(a[mask] * np.log(a[mask] / m[mask]))
    # rounding can leave tiny negatives or overshoot the bound
    return min(max(0.5 * total, 0.0), math.log(2.0))


def sample_exact(pmf: Pmf, uniform: float) -> int:
    """Inverse-CDF draw: smallest index whose cumulative mass exceeds ``uniform``."""
    if not 0.0 <= uniform < 1.0:
        raise InvalidInput(f"uniform must lie in [0, 1), got {uniform!r}")
    cdf = np.cumsum(pmf.probs)
    i = int(np.searchsorted(cdf, uniform, side="right"))
    # cdf[-1] may round below 1; fall back to the last index with mass
    if i >= cdf.size:
        i = int(np.flatnonzero(pmf.probs)[-1])
    return i
