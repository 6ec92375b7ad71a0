"""Model aggregation: similarity-weighted personalised mixing and the plain mean.

The weighted scheme computes, for every client in a cluster, a convex
combination of all members' models. Mixing weights come from the pairwise
delta similarities, clipped below at ``s_min`` and mapped affinely onto
[0, 1], then row-normalised. Clipping before mapping keeps every weight
nonnegative, so outputs stay inside the elementwise hull of the inputs.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence

import numpy as np

from .errors import ShapeError
from .params import LayeredParams, ParamDelta
from .similarity import similarity_matrix

__all__ = ["weighted_aggregate", "plain_mean"]

log = logging.getLogger(__name__)


def plain_mean(models: Sequence[LayeredParams]) -> LayeredParams:
    """Elementwise arithmetic mean of shape-compatible models."""
    if len(models) == 0:
        raise ShapeError("plain_mean needs at least one model")
    first = models[0]
    for m in models[1:]:
        if not first.compatible_with(m):
            raise ShapeError("all models must share the same layer sizes")
    n = len(models)
    return LayeredParams(
        np.add.reduce([m.layers[li] for m in models]) / n
        for li in range(first.num_layers)
    )


def _mix_rows(models: Sequence[LayeredParams], weights: np.ndarray) -> list[LayeredParams]:
    # Accumulate only nonzero-weight terms in client order: zero weights then
    # have exactly no effect, so fully clipped neighbours leave a model
    # bit-identical.
    out = []
    num_layers = models[0].num_layers
    for row in weights:
        nz = np.flatnonzero(row)
        if nz.size == 1 and row[nz[0]] == 1.0:
            out.append(models[nz[0]])  # immutable, safe to share
            continue
        layers = []
        for li in range(num_layers):
            acc = np.zeros_like(models[0].layers[li])
            for j in nz:
                acc = acc + row[j] * models[j].layers[li]
            layers.append(acc)
        out.append(LayeredParams(layers))
    return out


def _aggregate_with_similarity(
    models: Sequence[LayeredParams],
    sims: np.ndarray,
    s_min: float,
    event_sink: list | None = None,
) -> list[LayeredParams]:
    n = len(models)
    raw = (np.maximum(sims, s_min) - s_min) / (1.0 - s_min)
    out: list[LayeredParams] = [None] * n  # type: ignore[list-item]
    rows = np.array(raw, dtype=np.float64)
    sums = rows.sum(axis=1)
    fallback = np.flatnonzero(sums == 0.0)
    for i in fallback:
        # No positive weight anywhere on the row (possible only with degenerate
        # similarity input): keep the client's own model.
        log.warning("aggregation row %d sums to zero; keeping own model", i)
        if event_sink is not None:
            event_sink.append({"kind": "zero_row_fallback", "client": int(i)})
        out[i] = models[i]
        rows[i] = 0.0
    keep = [i for i in range(n) if out[i] is None]
    if keep:
        norm = rows[keep] / sums[keep, None]
        mixed = _mix_rows(models, norm)
        for i, m in zip(keep, mixed):
            out[i] = m
    return out


def weighted_aggregate(
    models: Sequence[LayeredParams],
    deltas: Sequence[ParamDelta],
    r: float,
    s_min: float,
    event_sink: list | None = None,
) -> list[LayeredParams]:
    """Personalised weighted aggregation of one cluster.

    ``models`` and ``deltas`` are aligned by index. Weights for client ``i``
    are ``(max(sim_ij, s_min) - s_min) / (1 - s_min)``, row-normalised; the
    output for ``i`` is the weighted sum of all members' models. A row that
    sums to zero falls back to the client's own model (recorded in
    ``event_sink`` when given).
    """
    if len(models) == 0:
        raise ShapeError("weighted_aggregate needs at least one client")
    if len(models) != len(deltas):
        raise ShapeError(
            f"{len(models)} models but {len(deltas)} deltas; they must align"
        )
    if not -1.0 <= s_min < 1.0:
        raise ValueError(f"s_min must be in [-1, 1), got {s_min}")
    sims = similarity_matrix(deltas, r)
    return _aggregate_with_similarity(models, sims, s_min, event_sink)
