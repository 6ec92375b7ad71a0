"""Round-based federated simulation: personalised clustering server and baselines.

All algorithms run T rounds of synchronous full participation. Each round
starts with local training on every client; what happens next differs:

* ``fedpref``  - per cluster, personalised similarity-weighted aggregation;
  a cluster whose mean model has stalled for ``patience`` consecutive
  rounds is bipartitioned (at most once per cluster per round) before its
  children are aggregated.
* ``fedavg``   - one global model, plain mean of all clients.
* ``fedprox``  - fedavg coordination, but local training carries a proximal
  pull toward the global model.
* ``cfl``      - clusters share one model each (plain mean); a stalled
  cluster is split once by the sign structure of plain gradient cosine
  similarities, and the children continue with shared models.
* ``local``    - no communication at all.

With ``fine_tune`` set, the final round consists of local training only,
replacing the last aggregation, which leaves each client with a locally
adapted model. Runs are deterministic functions of the configuration,
including the seed.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from collections.abc import Sequence

import numpy as np

from .aggregation import plain_mean, weighted_aggregate
from .clustering import spectral_bipartition
from .config import RunConfig
from .errors import NumericError, ShapeError
from .params import LayeredParams, flat_norm
from .preferences import PreferenceVector
from .problems import QuadraticMOProblem, local_train
from .similarity import similarity_matrix

__all__ = [
    "ClientBank",
    "ClusterState",
    "RoundReport",
    "FederationOutcome",
    "build_client_bank",
    "run_fedpref",
    "run_fedavg",
    "run_fedprox",
    "run_cfl",
    "run_local_only",
    "run_algorithm",
    "cluster_purity",
    "ALGORITHMS",
]


@dataclass(frozen=True)
class ClientBank:
    """The immutable description of all simulated clients.

    Clients share one problem and one initial model; they differ in their
    preference vectors and (when gradient noise is enabled) in their
    private noise streams.
    """

    problem: QuadraticMOProblem
    preferences: tuple[PreferenceVector, ...]
    initial_models: tuple[LayeredParams, ...]
    noise_std: float = 0.0
    noise_seeds: tuple[np.random.SeedSequence, ...] = ()
    group_labels: tuple[int, ...] | None = None

    def __post_init__(self):
        if len(self.preferences) < 1:
            raise ShapeError("need at least one client")
        if len(self.initial_models) != len(self.preferences):
            raise ShapeError("need exactly one initial model per client")
        if self.noise_std > 0.0 and len(self.noise_seeds) != len(self.preferences):
            raise ShapeError("gradient noise needs one seed sequence per client")

    @property
    def num_clients(self) -> int:
        return len(self.preferences)

    def noise_rngs(self) -> list[np.random.Generator | None]:
        """Fresh per-client generators; repeated calls restart the streams."""
        if self.noise_std <= 0.0:
            return [None] * self.num_clients
        return [np.random.Generator(np.random.PCG64(ss)) for ss in self.noise_seeds]

    def initial_mean(self) -> LayeredParams:
        """Common starting model for single-model coordinators."""
        first = self.initial_models[0]
        if all(m is first for m in self.initial_models):
            return first
        return plain_mean(self.initial_models)


def build_client_bank(cfg: RunConfig) -> ClientBank:
    """Materialise problem, preferences and shared initial model from a config."""
    from .config import build_problem_and_preferences

    root = np.random.SeedSequence(cfg.seed)
    pref_ss, init_ss, noise_ss = root.spawn(3)
    problem, prefs, labels = build_problem_and_preferences(
        cfg, np.random.Generator(np.random.PCG64(pref_ss))
    )
    init_rng = np.random.Generator(np.random.PCG64(init_ss))
    if cfg.problem.get("init_mode", "shared") == "per_client":
        inits = tuple(problem.initial_model(init_rng) for _ in range(cfg.clients))
    else:
        inits = (problem.initial_model(init_rng),) * cfg.clients
    return ClientBank(
        problem=problem,
        preferences=tuple(prefs),
        initial_models=inits,
        noise_std=cfg.noise_std,
        noise_seeds=tuple(noise_ss.spawn(cfg.clients)) if cfg.noise_std > 0 else (),
        group_labels=labels,
    )


@dataclass(frozen=True)
class ClusterState:
    """One live cluster: members, their current mean model, patience counter."""

    members: tuple[int, ...]
    mean_model: LayeredParams
    rounds_below_threshold: int = 0

    def __post_init__(self):
        if not self.members:
            raise ShapeError("a cluster needs at least one member")
        if len(set(self.members)) != len(self.members):
            raise ShapeError("duplicate client ids in cluster")
        object.__setattr__(self, "members", tuple(sorted(self.members)))


@dataclass(frozen=True)
class RoundReport:
    """Observable state of one federation round."""

    round_index: int
    clusters: tuple[tuple[int, ...], ...]
    scalarised_values: tuple[float, ...]
    cluster_delta_norms: tuple[float, ...]
    events: tuple[dict, ...]

    def to_record(self) -> dict:
        return {
            "round": self.round_index,
            "cluster_assignment": [list(c) for c in self.clusters],
            "per_client_scalarised_value": list(self.scalarised_values),
            "per_cluster_mean_delta_norm": list(self.cluster_delta_norms),
            "events": list(self.events),
        }


@dataclass(frozen=True)
class FederationOutcome:
    """Final models and objective vectors per client, plus the round history."""

    final_models: tuple[LayeredParams, ...]
    final_objectives: np.ndarray
    scalarised_values: np.ndarray
    reports: tuple[RoundReport, ...]
    final_clusters: tuple[ClusterState, ...]

    @property
    def num_clients(self) -> int:
        return len(self.final_models)


def _check_partition(clusters: Sequence[ClusterState], n: int) -> None:
    seen: list[int] = []
    for c in clusters:
        seen.extend(c.members)
    if sorted(seen) != list(range(n)):
        raise ShapeError("cluster states do not partition the client set")


def _evaluate(bank: ClientBank, models: Sequence[LayeredParams]):
    objectives = np.array([bank.problem.objective_values(m) for m in models])
    scalarised = np.array(
        [float(np.dot(w.weights, o)) for w, o in zip(bank.preferences, objectives)]
    )
    return objectives, scalarised


def _outcome(bank, models, reports, clusters) -> FederationOutcome:
    objectives, scalarised = _evaluate(bank, models)
    return FederationOutcome(
        final_models=tuple(models),
        final_objectives=objectives,
        scalarised_values=scalarised,
        reports=tuple(reports),
        final_clusters=tuple(clusters),
    )


def _train_all(bank, models, cfg, rngs, anchors=None, mu=0.0, round_index=0):
    trained = []
    for i in range(bank.num_clients):
        prox = None
        if anchors is not None and mu > 0.0:
            prox = (mu, anchors[i])
        try:
            trained.append(
                local_train(
                    models[i],
                    bank.problem,
                    bank.preferences[i],
                    steps=cfg.local_steps,
                    lr=cfg.learning_rate,
                    prox=prox,
                    noise_std=bank.noise_std,
                    rng=rngs[i],
                )
            )
        except NumericError as exc:
            exc.round_index = round_index
            raise
    return trained


def _refresh_means(clusters, models):
    return [
        replace(c, mean_model=plain_mean([models[i] for i in c.members]))
        for c in clusters
    ]


def run_fedpref(cfg: RunConfig, bank: ClientBank) -> FederationOutcome:
    """Personalised federation with similarity-weighted aggregation and recursive splits."""
    n = bank.num_clients
    models = list(bank.initial_models)
    clusters = [ClusterState(tuple(range(n)), bank.initial_mean())]
    rngs = bank.noise_rngs()
    reports = []
    for t in range(1, cfg.rounds + 1):
        trained = _train_all(bank, models, cfg, rngs, round_index=t)
        fine_tune_round = cfg.fine_tune and t == cfg.rounds
        events: list[dict] = []
        new_clusters: list[ClusterState] = []
        delta_norms: list[float] = []
        if fine_tune_round:
            models = trained
            for c in clusters:
                member_models = [trained[i] for i in c.members]
                delta_norms.append(flat_norm(c.mean_model - plain_mean(member_models)))
            new_clusters = list(clusters)
        else:
            for c in clusters:
                member_models = [trained[i] for i in c.members]
                reference = c.mean_model
                delta_norm = flat_norm(reference - plain_mean(member_models))
                delta_norms.append(delta_norm)
                if delta_norm <= cfg.clustering_threshold:
                    below = c.rounds_below_threshold + 1
                else:
                    below = 0
                if below >= cfg.patience and len(c.members) >= 2:
                    deltas = [trained[i] - reference for i in c.members]
                    sims = similarity_matrix(deltas, cfg.top_r)
                    try:
                        split = spectral_bipartition(c.members, sims)
                    except NumericError as exc:
                        exc.round_index = t
                        raise
                    events.append(
                        {
                            "kind": "split",
                            "cluster": list(c.members),
                            "left": list(split.left),
                            "right": list(split.right),
                        }
                    )
                    for side in (split.left, split.right):
                        side_models = [trained[i] for i in side]
                        # A cluster born this round has no previous mean; the
                        # mean of its members' freshly trained models is the
                        # only reference available.
                        side_ref = plain_mean(side_models)
                        side_deltas = [m - side_ref for m in side_models]
                        mixed = weighted_aggregate(
                            side_models,
                            side_deltas,
                            cfg.top_r,
                            cfg.min_similarity,
                            event_sink=events,
                        )
                        for cid, model in zip(side, mixed):
                            models[cid] = model
                        new_clusters.append(
                            ClusterState(tuple(side), side_ref, rounds_below_threshold=0)
                        )
                else:
                    deltas = [trained[i] - reference for i in c.members]
                    mixed = weighted_aggregate(
                        member_models,
                        deltas,
                        cfg.top_r,
                        cfg.min_similarity,
                        event_sink=events,
                    )
                    for cid, model in zip(c.members, mixed):
                        models[cid] = model
                    new_clusters.append(replace(c, rounds_below_threshold=below))
        new_clusters = _refresh_means(new_clusters, models)
        _check_partition(new_clusters, n)
        clusters = new_clusters
        _, scalarised = _evaluate(bank, models)
        reports.append(
            RoundReport(
                round_index=t,
                clusters=tuple(c.members for c in clusters),
                scalarised_values=tuple(scalarised.tolist()),
                cluster_delta_norms=tuple(delta_norms),
                events=tuple(events),
            )
        )
    return _outcome(bank, models, reports, clusters)


def _run_global_mean(cfg: RunConfig, bank: ClientBank, mu: float) -> FederationOutcome:
    # Shared skeleton of fedavg (mu == 0, proximal term skipped bit-exactly)
    # and fedprox (mu > 0).
    n = bank.num_clients
    global_model = bank.initial_mean()
    models = [global_model] * n
    rngs = bank.noise_rngs()
    reports = []
    for t in range(1, cfg.rounds + 1):
        anchors = [global_model] * n
        trained = _train_all(bank, models, cfg, rngs, anchors=anchors, mu=mu, round_index=t)
        fine_tune_round = cfg.fine_tune and t == cfg.rounds
        if fine_tune_round:
            models = trained
            delta_norm = flat_norm(global_model - plain_mean(trained))
        else:
            new_global = plain_mean(trained)
            delta_norm = flat_norm(global_model - new_global)
            global_model = new_global
            models = [global_model] * n
        _, scalarised = _evaluate(bank, models)
        reports.append(
            RoundReport(
                round_index=t,
                clusters=(tuple(range(n)),),
                scalarised_values=tuple(scalarised.tolist()),
                cluster_delta_norms=(delta_norm,),
                events=(),
            )
        )
    clusters = [ClusterState(tuple(range(n)), plain_mean(models))]
    return _outcome(bank, models, reports, clusters)


def run_fedavg(cfg: RunConfig, bank: ClientBank) -> FederationOutcome:
    """Single global model, plain mean of all clients each round."""
    return _run_global_mean(cfg, bank, mu=0.0)


def run_fedprox(cfg: RunConfig, bank: ClientBank) -> FederationOutcome:
    """Global-mean coordination with proximal local training toward the global model."""
    return _run_global_mean(cfg, bank, mu=cfg.fedprox_mu)


def run_cfl(cfg: RunConfig, bank: ClientBank) -> FederationOutcome:
    """Clustered federation: shared model per cluster, permanent gradient-based splits."""
    n = bank.num_clients
    shared0 = bank.initial_mean()
    clusters = [ClusterState(tuple(range(n)), shared0)]
    models = [shared0] * n
    rngs = bank.noise_rngs()
    reports = []
    for t in range(1, cfg.rounds + 1):
        trained = _train_all(bank, models, cfg, rngs, round_index=t)
        fine_tune_round = cfg.fine_tune and t == cfg.rounds
        events: list[dict] = []
        new_clusters: list[ClusterState] = []
        delta_norms: list[float] = []
        if fine_tune_round:
            models = trained
            for c in clusters:
                delta_norms.append(
                    flat_norm(c.mean_model - plain_mean([trained[i] for i in c.members]))
                )
            new_clusters = list(clusters)
        else:
            for c in clusters:
                shared = c.mean_model
                member_models = [trained[i] for i in c.members]
                new_mean = plain_mean(member_models)
                delta_norm = flat_norm(shared - new_mean)
                delta_norms.append(delta_norm)
                if delta_norm <= cfg.cfl_threshold:
                    below = c.rounds_below_threshold + 1
                else:
                    below = 0
                if below >= cfg.cfl_patience and len(c.members) >= 2:
                    deltas = [trained[i] - shared for i in c.members]
                    sims = similarity_matrix(deltas, 1.0)
                    try:
                        split = spectral_bipartition(c.members, sims)
                    except NumericError as exc:
                        exc.round_index = t
                        raise
                    events.append(
                        {
                            "kind": "split",
                            "cluster": list(c.members),
                            "left": list(split.left),
                            "right": list(split.right),
                        }
                    )
                    for side in (split.left, split.right):
                        side_mean = plain_mean([trained[i] for i in side])
                        for cid in side:
                            models[cid] = side_mean
                        new_clusters.append(
                            ClusterState(tuple(side), side_mean, rounds_below_threshold=0)
                        )
                else:
                    for cid in c.members:
                        models[cid] = new_mean
                    new_clusters.append(
                        ClusterState(c.members, new_mean, rounds_below_threshold=below)
                    )
        new_clusters = _refresh_means(new_clusters, models)
        _check_partition(new_clusters, n)
        clusters = new_clusters
        _, scalarised = _evaluate(bank, models)
        reports.append(
            RoundReport(
                round_index=t,
                clusters=tuple(c.members for c in clusters),
                scalarised_values=tuple(scalarised.tolist()),
                cluster_delta_norms=tuple(delta_norms),
                events=tuple(events),
            )
        )
    return _outcome(bank, models, reports, clusters)


def run_local_only(cfg: RunConfig, bank: ClientBank) -> FederationOutcome:
    """No communication: every client trains alone for the full budget."""
    n = bank.num_clients
    models = list(bank.initial_models)
    rngs = bank.noise_rngs()
    reports = []
    for t in range(1, cfg.rounds + 1):
        trained = _train_all(bank, models, cfg, rngs, round_index=t)
        delta_norms = [flat_norm(models[i] - trained[i]) for i in range(n)]
        models = trained
        _, scalarised = _evaluate(bank, models)
        reports.append(
            RoundReport(
                round_index=t,
                clusters=tuple((i,) for i in range(n)),
                scalarised_values=tuple(scalarised.tolist()),
                cluster_delta_norms=tuple(delta_norms),
                events=(),
            )
        )
    clusters = [ClusterState((i,), models[i]) for i in range(n)]
    return _outcome(bank, models, reports, clusters)


ALGORITHMS = {
    "fedpref": run_fedpref,
    "fedavg": run_fedavg,
    "fedprox": run_fedprox,
    "cfl": run_cfl,
    "local": run_local_only,
}


def run_algorithm(cfg: RunConfig, bank: ClientBank | None = None) -> FederationOutcome:
    """Dispatch a run by ``cfg.algorithm``, building the client bank if needed."""
    if cfg.algorithm not in ALGORITHMS:
        raise ShapeError(f"unknown algorithm '{cfg.algorithm}'")
    if bank is None:
        bank = build_client_bank(cfg)
    return ALGORITHMS[cfg.algorithm](cfg, bank)


def cluster_purity(clusters: Sequence[Sequence[int]], labels: Sequence[int]) -> float:
    """Fraction of clients whose cluster is dominated by their own group label."""
    labels = list(labels)
    total = 0
    agree = 0
    for members in clusters:
        counts: dict[int, int] = {}
        for cid in members:
            counts[labels[cid]] = counts.get(labels[cid], 0) + 1
        total += len(members)
        agree += max(counts.values())
    return agree / total
