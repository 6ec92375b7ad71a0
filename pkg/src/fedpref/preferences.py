"""Per-client objective preference vectors and generators for them.

A preference vector is a convex-combination weight vector over the m
objectives. Three generation schemes are supported: Dirichlet sampling,
clamped Gaussian sampling around the uniform weight, and a deterministic
equidistant lattice on the simplex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

__all__ = ["PreferenceVector", "PrefDistribution", "generate_preferences", "simplex_lattice"]


class PreferenceVector:
    """Nonnegative weights over m objectives, renormalised to sum to 1.

    Negative inputs are rejected rather than clamped; individual zero
    weights are allowed (a single-objective client is just the one-hot
    edge case).
    """

    __slots__ = ("_weights",)

    def __init__(self, weights):
        w = np.array(weights, dtype=np.float64, copy=True).reshape(-1)
        if w.size < 1:
            raise ValueError("preference vector must have at least one weight")
        if not np.isfinite(w).all():
            raise ValueError("preference weights must be finite")
        if (w < 0).any():
            raise ValueError(f"preference weights must be nonnegative, got {w.tolist()}")
        total = w.sum()
        if total <= 0.0:
            raise ValueError("preference weights must not all be zero")
        w = w / total
        w.flags.writeable = False
        self._weights = w

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    @property
    def num_objectives(self) -> int:
        return self._weights.size

    def __len__(self):
        return self._weights.size

    def __eq__(self, other):
        if not isinstance(other, PreferenceVector):
            return NotImplemented
        return np.array_equal(self._weights, other._weights)

    def __hash__(self):
        return hash(self._weights.tobytes())

    def __repr__(self):
        return f"PreferenceVector({self._weights.tolist()})"


@dataclass(frozen=True)
class PrefDistribution:
    """Preference generation scheme: dirichlet(alpha), gaussian(sigma) or equidistant."""

    kind: str
    num_objectives: int
    alpha: float = 1.0
    sigma: float = 0.2

    def __post_init__(self):
        if self.kind not in ("dirichlet", "gaussian", "equidistant"):
            raise ValueError(f"unknown preference distribution '{self.kind}'")
        if self.num_objectives < 2:
            raise ValueError("need at least 2 objectives")
        if self.kind == "dirichlet" and self.alpha <= 0:
            raise ValueError("dirichlet concentration must be positive")
        if self.kind == "gaussian" and self.sigma <= 0:
            raise ValueError("gaussian sigma must be positive")


def simplex_lattice(m: int, resolution: int) -> np.ndarray:
    """All weight vectors with entries k/resolution summing to 1, lexicographic order."""
    points = []
    for cuts in combinations(range(resolution + m - 1), m - 1):
        prev = -1
        parts = []
        for c in cuts:
            parts.append(c - prev - 1)
            prev = c
        parts.append(resolution + m - 2 - prev)
        points.append(parts)
    arr = np.array(sorted(points), dtype=np.float64) / resolution
    return arr


def _equidistant(m: int, n: int) -> np.ndarray:
    if n == 1:
        return np.full((1, m), 1.0 / m)
    # Smallest lattice resolution holding at least n points; if the lattice
    # is finer than needed, take an evenly strided subset.
    resolution = 1
    while math.comb(resolution + m - 1, m - 1) < n:
        resolution += 1
    lattice = simplex_lattice(m, resolution)
    if len(lattice) == n:
        return lattice
    idx = np.round(np.linspace(0, len(lattice) - 1, n)).astype(int)
    return lattice[idx]


def generate_preferences(
    dist: PrefDistribution, n: int, rng: np.random.Generator
) -> list[PreferenceVector]:
    """Draw n preference vectors; deterministic given the generator state."""
    if n < 1:
        raise ValueError("need at least one client")
    m = dist.num_objectives
    if dist.kind == "dirichlet":
        samples = rng.dirichlet(np.full(m, dist.alpha), size=n)
        return [PreferenceVector(row) for row in samples]
    if dist.kind == "gaussian":
        out = []
        for _ in range(n):
            while True:
                raw = np.clip(rng.normal(1.0 / m, dist.sigma, size=m), 0.0, None)
                if raw.sum() > 0.0:
                    out.append(PreferenceVector(raw))
                    break
        return out
    return [PreferenceVector(row) for row in _equidistant(m, n)]
