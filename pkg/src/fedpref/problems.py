"""Synthetic multi-objective client problems with closed-form optima.

Each problem has m concave quadratic objectives
``f_j(theta) = -(theta - c_j)^T A_j (theta - c_j)`` (maximisation), so the
weighted scalarisation has the analytic maximiser
``theta* = (sum_j w_j A_j)^{-1} (sum_j w_j A_j c_j)``. Local training is
plain gradient ascent on the scalarisation, optionally with a proximal
penalty toward an anchor model and optional seeded gradient noise to
emulate stochastic training.

The parameter vector may be partitioned into arbitrary pseudo-layers; the
partition changes nothing about objectives or gradients and exists so the
per-layer similarity metric is exercised even for small models.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError, ShapeError
from .params import LayeredParams
from .preferences import PreferenceVector

__all__ = [
    "QuadraticMOProblem",
    "ConflictingGroupsScenario",
    "conflicting_groups",
    "local_train",
]


def _default_layer_sizes(dim: int) -> tuple[int, ...]:
    if dim >= 2:
        return (dim - dim // 2, dim // 2)
    return (dim,)


@dataclass(frozen=True)
class QuadraticMOProblem:
    """m concave quadratics over a shared parameter space.

    ``centers`` has shape (m, dim); ``scales`` is an optional (m, dim, dim)
    stack of symmetric PSD matrices, identity when omitted.
    """

    centers: np.ndarray
    scales: np.ndarray | None = None
    layer_sizes: tuple[int, ...] = ()
    init_scale: float = 0.1

    def __post_init__(self):
        centers = np.asarray(self.centers, dtype=np.float64)
        if centers.ndim != 2:
            raise ShapeError("centers must be a (num_objectives, dim) array")
        object.__setattr__(self, "centers", centers)
        if self.scales is not None:
            scales = np.asarray(self.scales, dtype=np.float64)
            if scales.shape != (centers.shape[0], centers.shape[1], centers.shape[1]):
                raise ShapeError("scales must be one (dim, dim) matrix per objective")
            if not np.allclose(scales, np.transpose(scales, (0, 2, 1)), atol=1e-10):
                raise ShapeError("scale matrices must be symmetric")
            object.__setattr__(self, "scales", scales)
        sizes = tuple(self.layer_sizes) or _default_layer_sizes(centers.shape[1])
        if sum(sizes) != centers.shape[1]:
            raise ShapeError(
                f"layer sizes {sizes} do not partition dimension {centers.shape[1]}"
            )
        object.__setattr__(self, "layer_sizes", sizes)

    @property
    def num_objectives(self) -> int:
        return self.centers.shape[0]

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    def to_params(self, flat: np.ndarray) -> LayeredParams:
        return LayeredParams.from_flat(flat, self.layer_sizes)

    def initial_model(self, rng: np.random.Generator) -> LayeredParams:
        return self.to_params(self.init_scale * rng.standard_normal(self.dim))

    def objective_values(self, theta: LayeredParams) -> np.ndarray:
        """The full objective vector (f_1 .. f_m) at theta."""
        x = theta.flat()
        diffs = x[None, :] - self.centers
        if self.scales is None:
            vals = -np.einsum("ij,ij->i", diffs, diffs)
        else:
            vals = -np.einsum("ij,ijk,ik->i", diffs, self.scales, diffs)
        if not np.isfinite(vals).all():
            raise NumericError("objective evaluation produced non-finite values")
        return vals

    def scalarised_value(self, w: PreferenceVector, theta: LayeredParams) -> float:
        """Preference-weighted sum of objectives at theta."""
        return float(np.dot(w.weights, self.objective_values(theta)))

    def scalarised_gradient(self, w: PreferenceVector, flat_theta: np.ndarray) -> np.ndarray:
        diffs = flat_theta[None, :] - self.centers
        if self.scales is None:
            per_obj = -2.0 * diffs
        else:
            per_obj = -2.0 * np.einsum("ijk,ik->ij", self.scales, diffs)
        return w.weights @ per_obj

    def analytic_optimum(self, w: PreferenceVector) -> LayeredParams:
        """Closed-form maximiser of the scalarisation (test oracle)."""
        if self.scales is None:
            return self.to_params(w.weights @ self.centers)
        lhs = np.einsum("i,ijk->jk", w.weights, self.scales)
        rhs = np.einsum("i,ijk,ik->j", w.weights, self.scales, self.centers)
        try:
            sol = np.linalg.solve(lhs, rhs)
        except np.linalg.LinAlgError as exc:
            raise NumericError(
                "weighted scale matrix is singular; no unique optimum"
            ) from exc
        return self.to_params(sol)

    def analytic_front(self, num_points: int = 0) -> np.ndarray:
        """Objective vectors of analytic optima on an equidistant weight lattice."""
        from .metrics import pareto_front
        from .preferences import PrefDistribution, generate_preferences

        if num_points <= 0:
            num_points = 101 if self.num_objectives == 2 else 120
        dist = PrefDistribution("equidistant", self.num_objectives)
        weights = generate_preferences(dist, num_points, np.random.default_rng(0))
        rows = []
        for w in weights:
            try:
                rows.append(self.objective_values(self.analytic_optimum(w)))
            except NumericError:
                continue
        return pareto_front(np.array(rows))

    def default_reference_point(self) -> np.ndarray:
        """Hypervolume reference point: front minimum less 10% of the range."""
        front = self.analytic_front()
        lo = front.min(axis=0)
        rng_ = front.max(axis=0) - lo
        return lo - 0.1 * np.where(rng_ > 0, rng_, 1.0)


@dataclass(frozen=True)
class ConflictingGroupsScenario:
    """Clients in g groups, each group sharing a preference, with mutually distant optima."""

    problem: QuadraticMOProblem
    group_preferences: tuple[PreferenceVector, ...]
    group_counts: tuple[int, ...]

    def __post_init__(self):
        if len(self.group_preferences) != len(self.group_counts):
            raise ShapeError("one preference vector per group is required")
        if any(c < 1 for c in self.group_counts):
            raise ValueError("every group needs at least one client")

    @property
    def num_clients(self) -> int:
        return sum(self.group_counts)

    @property
    def client_preferences(self) -> list[PreferenceVector]:
        out = []
        for pref, count in zip(self.group_preferences, self.group_counts):
            out.extend([pref] * count)
        return out

    @property
    def group_labels(self) -> tuple[int, ...]:
        labels = []
        for gi, count in enumerate(self.group_counts):
            labels.extend([gi] * count)
        return tuple(labels)


def conflicting_groups(
    groups: int,
    counts,
    dim: int = 8,
    separation: float = 2.0,
    layer_sizes: tuple[int, ...] = (),
    init_scale: float = 0.1,
) -> ConflictingGroupsScenario:
    """Scenario with one objective per group and antipodal pairs of centers.

    Group 2k's objective is centered at ``+separation * e_k`` and group
    2k+1's at ``-separation * e_k``, so clients of paired groups pull their
    models in exactly opposite directions.
    """
    if groups < 2:
        raise ValueError("need at least 2 groups")
    if isinstance(counts, int):
        counts = (counts,) * groups
    counts = tuple(int(c) for c in counts)
    if len(counts) != groups:
        raise ShapeError(f"expected {groups} group counts, got {len(counts)}")
    axes_needed = (groups + 1) // 2
    if dim < axes_needed:
        raise ValueError(f"dimension {dim} too small for {groups} antipodal groups")
    centers = np.zeros((groups, dim))
    for g in range(groups):
        centers[g, g // 2] = separation * (1.0 if g % 2 == 0 else -1.0)
    prefs = tuple(
        PreferenceVector(np.eye(groups)[g]) for g in range(groups)
    )
    problem = QuadraticMOProblem(
        centers=centers, layer_sizes=layer_sizes, init_scale=init_scale
    )
    return ConflictingGroupsScenario(problem, prefs, counts)


def local_train(
    theta0: LayeredParams,
    problem: QuadraticMOProblem,
    w: PreferenceVector,
    steps: int,
    lr: float,
    prox: tuple[float, LayeredParams] | None = None,
    noise_std: float = 0.0,
    rng: np.random.Generator | None = None,
) -> LayeredParams:
    """Gradient ascent on the scalarised objective, starting from theta0.

    ``prox=(mu, anchor)`` subtracts ``mu * (theta - anchor)`` from the
    gradient, penalising drift away from the anchor model. When mu is 0 the
    term is skipped entirely so trajectories match the plain variant bit
    for bit. Gradient noise (if enabled) is drawn from ``rng``.
    """
    if steps < 1:
        raise ValueError("need at least one training step")
    if lr < 0.0:
        raise ValueError("learning rate must be nonnegative")
    if noise_std > 0.0 and rng is None:
        raise ValueError("gradient noise requires a random generator")
    x = theta0.flat()
    anchor = None
    mu = 0.0
    if prox is not None:
        mu, anchor_params = prox
        if mu < 0.0:
            raise ValueError("proximal coefficient must be nonnegative")
        anchor = anchor_params.flat()
    for step in range(steps):
        g = problem.scalarised_gradient(w, x)
        if mu != 0.0 and anchor is not None:
            g = g - mu * (x - anchor)
        if noise_std > 0.0:
            g = g + noise_std * rng.standard_normal(x.size)
        x = x + lr * g
        if not np.isfinite(x).all():
            raise NumericError(
                f"local training diverged at step {step}", step_index=step
            )
    return problem.to_params(x)
