"""Layered model parameters and elementwise arithmetic on them.

Models are stored as an ordered list of 1-D layer vectors rather than one
flat vector, because the similarity metric averages per-layer cosine
similarities. A flat view is derived on demand for norms.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence

import numpy as np

from .errors import NumericError, ShapeError

__all__ = ["LayeredParams", "ParamDelta", "add", "sub", "scale", "flat_norm"]


class LayeredParams:
    """Immutable ordered list of 1-D float64 layer vectors.

    Instances are value objects: all arithmetic returns new instances and
    the underlying arrays are marked read-only, so they can be shared
    freely across workers.
    """

    __slots__ = ("_layers",)

    def __init__(self, layers: Iterable[np.ndarray | Sequence[float]]):
        frozen = []
        for i, layer in enumerate(layers):
            arr = np.array(layer, dtype=np.float64, copy=True).reshape(-1)
            if arr.size == 0:
                raise ShapeError(f"layer {i} is empty")
            if not np.isfinite(arr).all():
                raise NumericError(f"layer {i} contains non-finite values")
            arr.flags.writeable = False
            frozen.append(arr)
        if not frozen:
            raise ShapeError("a model needs at least one layer")
        self._layers = tuple(frozen)

    @classmethod
    def from_flat(cls, vec, layer_sizes: Sequence[int]) -> "LayeredParams":
        vec = np.asarray(vec, dtype=np.float64).reshape(-1)
        if sum(layer_sizes) != vec.size:
            raise ShapeError(
                f"layer sizes {list(layer_sizes)} do not partition a vector of size {vec.size}"
            )
        offsets = np.cumsum([0, *layer_sizes])
        return cls(vec[offsets[i] : offsets[i + 1]] for i in range(len(layer_sizes)))

    @classmethod
    def zeros(cls, layer_sizes: Sequence[int]) -> "LayeredParams":
        return cls(np.zeros(s) for s in layer_sizes)

    @property
    def layers(self) -> tuple[np.ndarray, ...]:
        return self._layers

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return tuple(a.size for a in self._layers)

    @property
    def num_layers(self) -> int:
        return len(self._layers)

    @property
    def dim(self) -> int:
        return sum(a.size for a in self._layers)

    def flat(self) -> np.ndarray:
        """Concatenation of all layers, in layer order."""
        return np.concatenate(self._layers)

    def compatible_with(self, other: "LayeredParams") -> bool:
        return self.layer_sizes == other.layer_sizes

    def _require_compatible(self, other: "LayeredParams") -> None:
        if not isinstance(other, LayeredParams):
            raise ShapeError(f"expected LayeredParams, got {type(other).__name__}")
        if not self.compatible_with(other):
            raise ShapeError(
                f"incompatible shapes: {self.layer_sizes} vs {other.layer_sizes}"
            )

    def __add__(self, other: "LayeredParams") -> "LayeredParams":
        self._require_compatible(other)
        return LayeredParams(a + b for a, b in zip(self._layers, other._layers))

    def __sub__(self, other: "LayeredParams") -> "LayeredParams":
        self._require_compatible(other)
        return LayeredParams(a - b for a, b in zip(self._layers, other._layers))

    def __mul__(self, c: float) -> "LayeredParams":
        c = float(c)
        return LayeredParams(a * c for a in self._layers)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        if not isinstance(other, LayeredParams):
            return NotImplemented
        return self.layer_sizes == other.layer_sizes and all(
            np.array_equal(a, b) for a, b in zip(self._layers, other._layers)
        )

    def __hash__(self):
        return hash((self.layer_sizes, tuple(a.tobytes() for a in self._layers)))

    def allclose(self, other: "LayeredParams", atol: float = 0.0, rtol: float = 0.0) -> bool:
        self._require_compatible(other)
        return all(
            np.allclose(a, b, atol=atol, rtol=rtol)
            for a, b in zip(self._layers, other._layers)
        )

    def __repr__(self):
        return f"LayeredParams(layer_sizes={self.layer_sizes})"


# A parameter delta (model minus a reference model) has the same layout and
# arithmetic as a model; the distinction is purely semantic.
ParamDelta = LayeredParams


def add(a: LayeredParams, b: LayeredParams) -> LayeredParams:
    return a + b


def sub(a: LayeredParams, b: LayeredParams) -> LayeredParams:
    return a - b


def scale(a: LayeredParams, c: float) -> LayeredParams:
    return a * c


def flat_norm(d: LayeredParams) -> float:
    """Euclidean norm of the concatenation of all layers."""
    return float(np.linalg.norm(d.flat()))
