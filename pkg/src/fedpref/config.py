"""Experiment configuration: schema, validation, and content hashing.

A config file is a single JSON document with four sections::

    {
      "federation":  {algorithm, rounds, local_steps, learning_rate,
                      clients, seed, fine_tune?, noise_std?,
                      clustering_threshold?, patience?, top_r?,
                      min_similarity?, fedprox_mu?, cfl_threshold?,
                      cfl_patience?},
      "problem":     {kind: "quadratic" | "conflicting_groups", ...},
      "preferences": {distribution: "dirichlet" | "gaussian" |
                      "equidistant" | "groups", alpha?, sigma?},
      "metrics":     {reference_point?, reference_front_csv?, mc_samples?}
    }

``federation.algorithm`` and ``federation.seed`` may also be lists, which
the CLI expands into a cross-product campaign of runs.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .preferences import PrefDistribution, PreferenceVector, generate_preferences
from .problems import QuadraticMOProblem, conflicting_groups

__all__ = [
    "RunConfig",
    "load_config",
    "parse_config",
    "expand_campaign",
    "config_hash",
    "problem_hash",
    "build_problem_and_preferences",
]

VALID_ALGORITHMS = ("fedpref", "fedavg", "fedprox", "cfl", "local")


@dataclass(frozen=True)
class RunConfig:
    """One fully resolved experiment run."""

    algorithm: str
    rounds: int
    local_steps: int
    learning_rate: float
    clients: int
    seed: int
    fine_tune: bool = False
    noise_std: float = 0.0
    clustering_threshold: float = 0.0
    patience: int = 1
    top_r: float = 0.5
    min_similarity: float = -1.0
    fedprox_mu: float = 0.0
    cfl_threshold: float = 0.0
    cfl_patience: int = 1
    problem: dict = field(default_factory=dict)
    preferences: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)

    def validate(self) -> "RunConfig":
        if self.algorithm not in VALID_ALGORITHMS:
            raise ConfigError(
                "federation.algorithm",
                f"unknown algorithm '{self.algorithm}'; expected one of {VALID_ALGORITHMS}",
            )
        if self.rounds < 1:
            raise ConfigError("federation.rounds", "must be at least 1")
        if self.clients < 1:
            raise ConfigError("federation.clients", "must be at least 1")
        if self.local_steps < 1:
            raise ConfigError("federation.local_steps", "must be at least 1")
        if self.learning_rate <= 0:
            raise ConfigError("federation.learning_rate", "must be positive")
        if not 0.0 < self.top_r <= 1.0:
            raise ConfigError("federation.top_r", "must lie in (0, 1]")
        if not -1.0 <= self.min_similarity < 1.0:
            raise ConfigError("federation.min_similarity", "must lie in [-1, 1)")
        if self.fedprox_mu < 0:
            raise ConfigError("federation.fedprox_mu", "must be nonnegative")
        if self.patience < 1:
            raise ConfigError("federation.patience", "must be at least 1")
        if self.cfl_patience < 1:
            raise ConfigError("federation.cfl_patience", "must be at least 1")
        if self.clustering_threshold < 0:
            raise ConfigError("federation.clustering_threshold", "must be nonnegative")
        if self.cfl_threshold < 0:
            raise ConfigError("federation.cfl_threshold", "must be nonnegative")
        if self.noise_std < 0:
            raise ConfigError("federation.noise_std", "must be nonnegative")
        return self

    def to_document(self) -> dict:
        doc = asdict(self)
        fed = {
            k: doc.pop(k)
            for k in (
                "algorithm",
                "rounds",
                "local_steps",
                "learning_rate",
                "clients",
                "seed",
                "fine_tune",
                "noise_std",
                "clustering_threshold",
                "patience",
                "top_r",
                "min_similarity",
                "fedprox_mu",
                "cfl_threshold",
                "cfl_patience",
            )
        }
        return {
            "federation": fed,
            "problem": doc["problem"],
            "preferences": doc["preferences"],
            "metrics": doc["metrics"],
        }


def _require(section: dict, section_name: str, key: str):
    if key not in section:
        raise ConfigError(f"{section_name}.{key}", "required field is missing")
    return section[key]


def _get(section: dict, key: str, default):
    return section.get(key, default)


def parse_config(doc: dict) -> list[RunConfig]:
    """Validate a config document and expand it into one RunConfig per run."""
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    for section in ("federation", "problem"):
        if section not in doc:
            raise ConfigError(section, "required section is missing")
    fed = doc["federation"]
    problem = doc.get("problem", {})
    preferences = doc.get("preferences", {})
    metrics = doc.get("metrics", {})

    algorithms = _require(fed, "federation", "algorithm")
    seeds = _require(fed, "federation", "seed")
    if isinstance(algorithms, str):
        algorithms = [algorithms]
    if isinstance(seeds, int):
        seeds = [seeds]
    if not algorithms:
        raise ConfigError("federation.algorithm", "must name at least one algorithm")
    if not seeds:
        raise ConfigError("federation.seed", "must name at least one seed")

    kind = _require(problem, "problem", "kind")
    if kind not in ("quadratic", "conflicting_groups"):
        raise ConfigError("problem.kind", f"unknown problem kind '{kind}'")
    if kind == "quadratic":
        _require(problem, "problem", "centers")
        dist = _require(preferences, "preferences", "distribution")
        if dist not in ("dirichlet", "gaussian", "equidistant"):
            raise ConfigError(
                "preferences.distribution",
                f"unknown distribution '{dist}' for a quadratic problem",
            )
    else:
        _require(problem, "problem", "groups")
        _require(problem, "problem", "clients_per_group")
        dist = _get(preferences, "distribution", "groups")
        if dist != "groups":
            raise ConfigError(
                "preferences.distribution",
                "conflicting_groups problems fix preferences per group; "
                "use distribution 'groups' or omit the section",
            )
        preferences = {**preferences, "distribution": "groups"}

    configs = []
    for algo in algorithms:
        for seed in seeds:
            cfg = RunConfig(
                algorithm=algo,
                rounds=int(_require(fed, "federation", "rounds")),
                local_steps=int(_require(fed, "federation", "local_steps")),
                learning_rate=float(_require(fed, "federation", "learning_rate")),
                clients=int(_require(fed, "federation", "clients")),
                seed=int(seed),
                fine_tune=bool(_get(fed, "fine_tune", False)),
                noise_std=float(_get(fed, "noise_std", 0.0)),
                clustering_threshold=float(
                    _require(fed, "federation", "clustering_threshold")
                    if algo == "fedpref"
                    else _get(fed, "clustering_threshold", 0.0)
                ),
                patience=int(_get(fed, "patience", 1)),
                top_r=float(_get(fed, "top_r", 0.5)),
                min_similarity=float(_get(fed, "min_similarity", -1.0)),
                fedprox_mu=float(
                    _require(fed, "federation", "fedprox_mu")
                    if algo == "fedprox"
                    else _get(fed, "fedprox_mu", 0.0)
                ),
                cfl_threshold=float(
                    _require(fed, "federation", "cfl_threshold")
                    if algo == "cfl"
                    else _get(fed, "cfl_threshold", 0.0)
                ),
                cfl_patience=int(_get(fed, "cfl_patience", 1)),
                problem=dict(problem),
                preferences=dict(preferences),
                metrics=dict(metrics),
            ).validate()
            configs.append(cfg)
    return configs


def load_config(path: str | Path) -> list[RunConfig]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read config file {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON in {path}: {exc}") from exc
    return parse_config(doc)


def expand_campaign(configs: list[RunConfig]) -> bool:
    """True when the config document expanded into more than one run."""
    return len(configs) > 1


def _canonical(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(_canonical(cfg.to_document()).encode()).hexdigest()


def problem_hash(cfg: RunConfig) -> str:
    """Hash of everything defining the learning problem, ignoring the algorithm."""
    doc = {
        "problem": cfg.problem,
        "preferences": cfg.preferences,
        "clients": cfg.clients,
        "seed": cfg.seed,
    }
    return hashlib.sha256(_canonical(doc).encode()).hexdigest()


def build_problem_and_preferences(cfg: RunConfig, pref_rng: np.random.Generator):
    """Instantiate the problem and the per-client preferences for one run.

    Returns ``(problem, preferences, group_labels)``; group labels are None
    unless the problem is a conflicting-groups scenario.
    """
    spec = cfg.problem
    kind = spec.get("kind")
    if kind == "quadratic":
        centers = np.asarray(spec["centers"], dtype=np.float64)
        scales = spec.get("scales")
        if scales is not None:
            scales = np.asarray(scales, dtype=np.float64)
        problem = QuadraticMOProblem(
            centers=centers,
            scales=scales,
            layer_sizes=tuple(spec.get("layer_sizes", ())),
            init_scale=float(spec.get("init_scale", 0.1)),
        )
        dist = PrefDistribution(
            kind=cfg.preferences["distribution"],
            num_objectives=problem.num_objectives,
            alpha=float(cfg.preferences.get("alpha", 1.0)),
            sigma=float(cfg.preferences.get("sigma", 0.2)),
        )
        prefs = generate_preferences(dist, cfg.clients, pref_rng)
        return problem, prefs, None
    if kind == "conflicting_groups":
        groups = int(spec["groups"])
        counts = spec["clients_per_group"]
        scenario = conflicting_groups(
            groups=groups,
            counts=counts if isinstance(counts, int) else tuple(counts),
            dim=int(spec.get("dim", 8)),
            separation=float(spec.get("separation", 2.0)),
            layer_sizes=tuple(spec.get("layer_sizes", ())),
            init_scale=float(spec.get("init_scale", 0.1)),
        )
        if scenario.num_clients != cfg.clients:
            raise ConfigError(
                "problem.clients_per_group",
                f"group counts sum to {scenario.num_clients}, "
                f"but federation.clients is {cfg.clients}",
            )
        return scenario.problem, scenario.client_preferences, scenario.group_labels
    raise ConfigError("problem.kind", f"unknown problem kind '{kind}'")
