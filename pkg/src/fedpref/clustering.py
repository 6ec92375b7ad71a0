"""Spectral bipartition of a cluster from its similarity matrix.

Similarities in [-1, 1] are shifted to nonnegative affinities via
``A = (S + 1) / 2``, which preserves the ordering information carried by
anti-similar pairs. The symmetric normalised Laplacian of the affinity
graph is diagonalised with deterministic cyclic Jacobi sweeps, and the
sign pattern of the Fiedler vector (second-smallest eigenpair) yields the
two-way split. An exhaustive minimum-normalised-cut search over all proper
bipartitions is provided as a test oracle for small inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from collections.abc import Sequence

import numpy as np

from .errors import NumericError, ShapeError

__all__ = [
    "Bipartition",
    "eigen_smallest_two",
    "jacobi_eigh",
    "spectral_bipartition",
    "brute_force_min_cut",
]

_SYMMETRY_TOL = 1e-10


@dataclass(frozen=True)
class Bipartition:
    """A proper two-way split of a member set; both sides sorted and nonempty."""

    left: tuple[int, ...]
    right: tuple[int, ...]

    def __post_init__(self):
        if not self.left or not self.right:
            raise ValueError("both sides of a bipartition must be nonempty")
        if set(self.left) & set(self.right):
            raise ValueError("bipartition sides must be disjoint")
        object.__setattr__(self, "left", tuple(sorted(self.left)))
        object.__setattr__(self, "right", tuple(sorted(self.right)))

    def as_sets(self) -> frozenset[frozenset[int]]:
        return frozenset({frozenset(self.left), frozenset(self.right)})


def _check_symmetric(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {m.shape}")
    tol = _SYMMETRY_TOL * max(1.0, float(np.abs(m).max(initial=0.0)))
    if float(np.abs(m - m.T).max(initial=0.0)) > tol:
        raise ShapeError("matrix is not symmetric within tolerance")
    return (m + m.T) / 2.0


def jacobi_eigh(m: np.ndarray, *, tol: float = 1e-12, max_sweeps: int = 100):
    """Full eigendecomposition of a symmetric matrix by cyclic Jacobi sweeps.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues ascending and
    eigenvectors in matching columns. Entirely deterministic: rotations are
    applied in a fixed (row, column) order with no randomised start, so
    repeated calls on the same input produce bit-identical output.

    Raises ``NumericError`` (carrying the sweep count) if the off-diagonal
    mass has not vanished after ``max_sweeps`` sweeps.
    """
    a = _check_symmetric(m).copy()
    n = a.shape[0]
    v = np.eye(n)
    scale = float(np.linalg.norm(a))
    if scale == 0.0 or n == 1:
        idx = np.argsort(np.diag(a), kind="stable")
        return np.diag(a)[idx].copy(), v[:, idx].copy()
    for sweep in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2) * 2.0)
        if off <= tol * scale:
            vals = np.diag(a).copy()
            idx = np.argsort(vals, kind="stable")
            return vals[idx], v[:, idx].copy()
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-20 * scale:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                a[p, q] = a[q, p] = 0.0
                vec_p = v[:, p].copy()
                vec_q = v[:, q].copy()
                v[:, p] = c * vec_p - s * vec_q
                v[:, q] = s * vec_p + c * vec_q
    raise NumericError(
        f"Jacobi sweeps did not converge after {max_sweeps} sweeps",
        iterations=max_sweeps,
    )


def eigen_smallest_two(m: np.ndarray, *, max_sweeps: int = 100):
    """The two algebraically smallest eigenpairs of a symmetric matrix.

    Returns ``(values, vectors)`` with ``values`` shape (2,) ascending and
    ``vectors`` shape (n, 2), columns matching values.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.shape[0] < 2:
        raise ShapeError("need a matrix of size >= 2")
    vals, vecs = jacobi_eigh(m, max_sweeps=max_sweeps)
    return vals[:2].copy(), vecs[:, :2].copy()


def _affinity(s: np.ndarray) -> np.ndarray:
    return (np.clip(s, -1.0, 1.0) + 1.0) / 2.0


def _balanced_sign_split(members: Sequence[int], fiedler: np.ndarray) -> tuple[list[int], list[int]]:
    # Zero entries (within a tolerance scaled to the vector) carry no side
    # information; they are dealt out afterwards, lower index first, always
    # to the currently smaller side.
    tol = 1e-12 * max(1.0, float(np.abs(fiedler).max(initial=0.0)))
    left = [m for m, f in zip(members, fiedler) if f > tol]
    right = [m for m, f in zip(members, fiedler) if f < -tol]
    undecided = [m for m, f in zip(members, fiedler) if -tol <= f <= tol]
    for m in undecided:
        if len(left) <= len(right):
            left.append(m)
        else:
            right.append(m)
    return left, right


def spectral_bipartition(members: Sequence[int], s: np.ndarray) -> Bipartition:
    """Split a member set in two along the sign of the Fiedler vector.

    ``s`` is the members' pairwise similarity matrix (entries in [-1, 1],
    symmetric), indexed consistently with ``members``. If the sign split
    leaves one side empty, the single member with the lowest average
    affinity to the rest is moved into its own cluster instead.
    """
    members = [int(m) for m in members]
    if len(members) < 2:
        raise ShapeError("cannot bipartition fewer than 2 members")
    if len(set(members)) != len(members):
        raise ValueError("duplicate member ids")
    s = _check_symmetric(s)
    if s.shape[0] != len(members):
        raise ShapeError(
            f"similarity matrix size {s.shape[0]} does not match {len(members)} members"
        )
    a = _affinity(s)
    deg = a.sum(axis=1)
    deg = np.where(deg > 0.0, deg, 1.0)  # isolated node: leave its row untouched
    inv_sqrt = 1.0 / np.sqrt(deg)
    lap = np.eye(len(members)) - inv_sqrt[:, None] * a * inv_sqrt[None, :]
    _, vecs = eigen_smallest_two(lap)
    fiedler = vecs[:, 1]
    # Canonical sign: first entry above tolerance is positive, so equivalent
    # eigenvectors always produce the same split.
    for f in fiedler:
        if abs(f) > 1e-12:
            if f < 0:
                fiedler = -fiedler
            break
    left, right = _balanced_sign_split(members, fiedler)
    if not left or not right:
        avg_aff = (a.sum(axis=1) - np.diag(a)) / max(len(members) - 1, 1)
        loner = members[int(np.argmin(avg_aff))]
        rest = [m for m in members if m != loner]
        return Bipartition((loner,), tuple(rest))
    return Bipartition(tuple(left), tuple(right))


def _normalised_cut(a: np.ndarray, mask: np.ndarray) -> float:
    deg = a.sum(axis=1)
    cut = float(a[mask][:, ~mask].sum())
    vol_left = float(deg[mask].sum())
    vol_right = float(deg[~mask].sum())
    total = 0.0
    for vol in (vol_left, vol_right):
        if vol > 0.0:
            total += cut / vol
        elif cut > 0.0:
            return np.inf
    return total


def brute_force_min_cut(s: np.ndarray) -> Bipartition:
    """Exhaustive minimum-normalised-cut bipartition (test oracle, n <= 12).

    Enumerates every proper bipartition of the index set {0..n-1} on the
    affinity graph ``(S + 1) / 2`` and returns the one with the smallest
    normalised cut. Ties are broken by the lexicographically smallest side
    containing index 0.
    """
    s = _check_symmetric(s)
    n = s.shape[0]
    if not 2 <= n <= 12:
        raise ValueError(f"brute force oracle supports 2 <= n <= 12, got {n}")
    a = _affinity(s)
    best_cost = np.inf
    best_left: tuple[int, ...] | None = None
    # Index 0 always on the left: enumerates each unordered split once.
    for bits in range(2 ** (n - 1)):
        mask = np.zeros(n, dtype=bool)
        mask[0] = True
        for i in range(1, n):
            if bits & (1 << (i - 1)):
                mask[i] = True
        if mask.all():
            continue
        cost = _normalised_cut(a, mask)
        left = tuple(int(i) for i in np.flatnonzero(mask))
        if cost < best_cost - 1e-15 or (
            abs(cost - best_cost) <= 1e-15 and (best_left is None or left < best_left)
        ):
            best_cost = cost
            best_left = left
    assert best_left is not None
    right = tuple(i for i in range(n) if i not in set(best_left))
    return Bipartition(best_left, right)
