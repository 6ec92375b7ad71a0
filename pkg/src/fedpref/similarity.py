"""Sparsified, layer-averaged cosine similarity between model updates.

The metric compares two parameter deltas layer by layer: each layer is
first sparsified, keeping only its largest-magnitude entries, then the
cosine similarities of the sparsified layers are averaged over layers.
Keeping only the most impactful coordinates makes the comparison less
sensitive to the near-noise bulk of high-dimensional updates.
"""

from __future__ import annotations

import math
from collections.abc import Sequence

import numpy as np

from .errors import ShapeError
from .params import ParamDelta

__all__ = ["top_r", "cos_sim", "model_sim", "similarity_matrix"]


def top_r(v: np.ndarray, r: float) -> np.ndarray:
    """Keep the ``ceil(dim(v) * r)`` largest-magnitude entries of ``v``, zero the rest.

    Retained entries keep their sign and magnitude. Ties at the cutoff rank
    are broken deterministically in favour of the lower index.
    """
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if v.size == 0:
        raise ShapeError("top_r needs a nonempty vector")
    if not 0.0 < r <= 1.0:
        raise ValueError(f"retention ratio must be in (0, 1], got {r}")
    k = math.ceil(v.size * r)
    if k >= v.size:
        return v.copy()
    # lexsort: primary key descending |v|, secondary key ascending index
    order = np.lexsort((np.arange(v.size), -np.abs(v)))
    out = np.zeros_like(v)
    keep = order[:k]
    out[keep] = v[keep]
    return out


def cos_sim(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine of the angle between two vectors; 0.0 if either has zero norm."""
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if u.size != v.size:
        raise ShapeError(f"dimension mismatch: {u.size} vs {v.size}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


def _layer_sim(a: np.ndarray, b: np.ndarray) -> float:
    # Layers that received no update at all carry no direction: two untouched
    # layers count as maximally similar, an untouched vs. touched pair as
    # carrying no information.
    a_zero = not a.any()
    b_zero = not b.any()
    if a_zero and b_zero:
        return 1.0
    if a_zero or b_zero:
        return 0.0
    return cos_sim(a, b)


def _sparsify(d: ParamDelta, r: float) -> list[np.ndarray]:
    return [top_r(layer, r) for layer in d.layers]


def model_sim(a: ParamDelta, b: ParamDelta, r: float) -> float:
    """Layer-averaged cosine similarity of sparsified deltas, in [-1, 1]."""
    if not a.compatible_with(b):
        raise ShapeError(f"incompatible shapes: {a.layer_sizes} vs {b.layer_sizes}")
    total = 0.0
    for la, lb in zip(_sparsify(a, r), _sparsify(b, r)):
        total += _layer_sim(la, lb)
    return total / a.num_layers


def similarity_matrix(deltas: Sequence[ParamDelta], r: float) -> np.ndarray:
    """Symmetric matrix of pairwise ``model_sim`` values, clamped to [-1, 1].

    Each unordered pair is computed once and mirrored, so the result is
    symmetric by construction.
    """
    if len(deltas) == 0:
        raise ShapeError("similarity_matrix needs at least one delta")
    first = deltas[0]
    for d in deltas[1:]:
        if not first.compatible_with(d):
            raise ShapeError("all deltas must share the same layer sizes")
    sparsed = [_sparsify(d, r) for d in deltas]
    n = len(deltas)
    s = np.empty((n, n), dtype=np.float64)
    num_layers = first.num_layers
    for i in range(n):
        for j in range(i, n):
            total = 0.0
            for la, lb in zip(sparsed[i], sparsed[j]):
                total += _layer_sim(la, lb)
            s[i, j] = s[j, i] = total / num_layers
    np.clip(s, -1.0, 1.0, out=s)
    return s
