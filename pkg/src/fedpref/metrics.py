"""Solution-set metrics for multi-objective analysis (maximisation convention).

Provides Pareto-front extraction with duplicate collapsing, an exact
hypervolume via recursive dimension sweep, a Monte Carlo hypervolume
oracle, sparsity (mean squared gap between consecutive front points per
objective), inverted generational distance against a reference front, and
cardinality (number of distinct front points).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ShapeError

__all__ = [
    "SolutionSet",
    "pareto_front",
    "hypervolume",
    "hypervolume_mc",
    "sparsity",
    "igd",
    "cardinality",
]

log = logging.getLogger(__name__)

# Objective vectors equal after rounding to this many decimals count as one
# distinct solution.
DEDUP_DECIMALS = 9


def _as_points(solutions) -> np.ndarray:
    pts = np.asarray(solutions, dtype=np.float64)
    if pts.size == 0:
        return pts.reshape(0, 0)
    if pts.ndim == 1:
        pts = pts.reshape(1, -1)
    if pts.ndim != 2:
        raise ShapeError(f"expected a (n, m) array of objective vectors, got {pts.shape}")
    return pts


def pareto_front(solutions) -> np.ndarray:
    """Maximal nondominated subset, duplicates collapsed to one representative.

    A point is dominated if some other point is at least as good in every
    objective and strictly better in at least one. Representatives keep
    their first-appearance order.
    """
    pts = _as_points(solutions)
    if pts.shape[0] == 0:
        return pts
    rounded = np.round(pts, DEDUP_DECIMALS)
    _, first_idx = np.unique(rounded, axis=0, return_index=True)
    keep = np.sort(first_idx)
    pts = pts[keep]
    n = pts.shape[0]
    dominated = np.zeros(n, dtype=bool)
    for i in range(n):
        if dominated[i]:
            continue
        ge = (pts >= pts[i]).all(axis=1)
        gt = (pts > pts[i]).any(axis=1)
        dominated[i] = bool((ge & gt).any())
    return pts[~dominated]


def _hv_recursive(pts: np.ndarray, ref: np.ndarray) -> float:
    # pts are mutually nondominated and strictly dominate ref.
    m = ref.size
    if pts.shape[0] == 0:
        return 0.0
    if m == 1:
        return float(pts[:, 0].max() - ref[0])
    if m == 2:
        order = np.argsort(-pts[:, 0], kind="stable")
        total = 0.0
        prev_y = ref[1]
        prev_x = None
        for x, y in pts[order]:
            if y > prev_y:
                total += (x - ref[0]) * (y - prev_y)
                prev_y = y
            prev_x = x
        return float(total)
    # Dimension sweep on the last objective: between consecutive levels the
    # cross-section is the (m-1)-dimensional hypervolume of the points alive
    # at that level.
    order = np.argsort(-pts[:, -1], kind="stable")
    sorted_pts = pts[order]
    levels = sorted_pts[:, -1]
    total = 0.0
    for k in range(len(sorted_pts)):
        depth = levels[k] - (levels[k + 1] if k + 1 < len(sorted_pts) else ref[-1])
        if depth <= 0.0:
            continue
        slab = pareto_front(sorted_pts[: k + 1, :-1])
        total += depth * _hv_recursive(slab, ref[:-1])
    return float(total)


def _admissible(pts: np.ndarray, ref: np.ndarray) -> np.ndarray:
    if pts.shape[0] == 0:
        return pts
    bad = (pts < ref[None, :]).any(axis=1)
    if bad.any():
        log.warning(
            "%d solution(s) fall below the reference point; clipping them", int(bad.sum())
        )
        pts = np.maximum(pts, ref[None, :])
    keep = (pts > ref[None, :]).all(axis=1)
    return pts[keep]


def hypervolume(solutions, ref_point) -> float:
    """Exact measure of the union of boxes [ref_point, s] over all solutions.

    Computed with a recursive dimension sweep over the Pareto front.
    Solutions that do not strictly dominate the reference point contribute
    nothing.
    """
    pts = _as_points(solutions)
    ref = np.asarray(ref_point, dtype=np.float64).reshape(-1)
    if pts.shape[0] and pts.shape[1] != ref.size:
        raise ShapeError(
            f"solutions have {pts.shape[1]} objectives but reference point has {ref.size}"
        )
    pts = _admissible(pts, ref)
    if pts.shape[0] == 0:
        return 0.0
    return _hv_recursive(pareto_front(pts), ref)


class McEstimate(NamedTuple):
    value: float
    stderr: float


def hypervolume_mc(
    solutions, ref_point, samples: int = 1_000_000, seed: int = 0
) -> McEstimate:
    """Monte Carlo hypervolume oracle: dominated fraction of the bounding box.

    Draws uniform samples in the box spanned by the reference point and the
    per-objective maxima, counts those weakly dominated by some solution,
    and scales by the box volume. Returns the estimate and its standard
    error.
    """
    pts = _as_points(solutions)
    ref = np.asarray(ref_point, dtype=np.float64).reshape(-1)
    pts = _admissible(pts, ref)
    if pts.shape[0] == 0:
        return McEstimate(0.0, 0.0)
    upper = pts.max(axis=0)
    box = float(np.prod(upper - ref))
    if box <= 0.0:
        return McEstimate(0.0, 0.0)
    rng = np.random.default_rng(seed)
    hits = 0
    chunk = 200_000
    remaining = samples
    while remaining > 0:
        size = min(chunk, remaining)
        u = rng.uniform(ref, upper, size=(size, ref.size))
        dominated = np.zeros(size, dtype=bool)
        for p in pts:
            dominated |= (u <= p[None, :]).all(axis=1)
        hits += int(dominated.sum())
        remaining -= size
    frac = hits / samples
    stderr = box * float(np.sqrt(frac * (1.0 - frac) / samples))
    return McEstimate(box * frac, stderr)


def sparsity(solutions) -> float:
    """Mean squared gap between consecutive Pareto-front points per objective.

    Zero by definition when the front holds at most one point. Lower values
    mean a more tightly packed front; the value scales quadratically with
    the objective scale.
    """
    front = pareto_front(solutions)
    p = front.shape[0]
    if p <= 1:
        return 0.0
    total = 0.0
    for j in range(front.shape[1]):
        col = np.sort(front[:, j])
        total += float(np.sum(np.diff(col) ** 2))
    return total / (p - 1)


def igd(solutions, ref_front) -> float:
    """Mean distance from each reference-front point to its nearest solution."""
    pts = _as_points(solutions)
    ref = _as_points(ref_front)
    if ref.shape[0] == 0:
        raise ShapeError("reference front must be nonempty")
    if pts.shape[0] == 0:
        raise ShapeError("solution set must be nonempty")
    diffs = ref[:, None, :] - pts[None, :, :]
    dists = np.sqrt(np.sum(diffs**2, axis=2))
    return float(dists.min(axis=1).mean())


def cardinality(solutions) -> int:
    """Number of distinct nondominated solutions."""
    return int(pareto_front(solutions).shape[0])


@dataclass(frozen=True)
class SolutionSet:
    """Per-client objective vectors plus metric context.

    ``reference_point`` anchors the hypervolume; ``reference_front`` (when
    known) anchors IGD.
    """

    objectives: np.ndarray
    reference_point: np.ndarray | None = None
    reference_front: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "objectives", _as_points(self.objectives))
        if self.reference_point is not None:
            object.__setattr__(
                self,
                "reference_point",
                np.asarray(self.reference_point, dtype=np.float64).reshape(-1),
            )
        if self.reference_front is not None:
            object.__setattr__(self, "reference_front", _as_points(self.reference_front))

    def summary(self) -> dict:
        out = {
            "cardinality": cardinality(self.objectives),
            "sparsity": sparsity(self.objectives),
            "hypervolume": None,
            "igd": None,
        }
        if self.reference_point is not None:
            out["hypervolume"] = hypervolume(self.objectives, self.reference_point)
        if self.reference_front is not None:
            out["igd"] = igd(pareto_front(self.objectives), self.reference_front)
        return out
