"""Experiment runner CLI.

Subcommands::

    fedpref run --config CONFIG.json --out DIR [--seed N] [--algo ID]
    fedpref summarize DIR [DIR ...] [--json PATH]
    fedpref metrics --solutions CSV --ref-point x,y,... [--ref-front CSV]

``run`` executes every run the config expands to (algorithm x seed
cross-product) and writes, per run: ``manifest.json``, ``rounds.jsonl``
(one JSON record per round, after a metadata prolog line), a
``solutions.csv`` with header ``client_id,w_1..w_m,f_1..f_m,scalarised``,
and ``metrics.json``. Campaigns additionally write the combined
``reference_front.csv`` used for IGD. Every output carries the config
hash; ``summarize`` refuses to pool runs whose problem hashes differ.

Exit codes: 0 success, 2 configuration error, 3 numeric failure.
Set ``FEDPREF_LOG_LEVEL`` (DEBUG/INFO/WARNING/...) to control verbosity.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, config_hash, load_config, problem_hash
from .errors import ConfigError, NumericError
from .federation import FederationOutcome, build_client_bank, run_algorithm
from .metrics import cardinality, hypervolume, igd, pareto_front, sparsity

log = logging.getLogger(__name__)


def _setup_logging():
    level = os.environ.get("FEDPREF_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))


def _float_list(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise ConfigError("--ref-point", f"expected comma-separated floats: {exc}")


def _write_solutions_csv(path: Path, cfg_hash: str, bank, outcome: FederationOutcome):
    m = outcome.final_objectives.shape[1]
    header = (
        ["client_id"]
        + [f"w_{j + 1}" for j in range(m)]
        + [f"f_{j + 1}" for j in range(m)]
        + ["scalarised"]
    )
    with path.open("w", newline="") as fh:
        fh.write(f"# config_hash={cfg_hash}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for cid in range(outcome.num_clients):
            row = (
                [cid]
                + [repr(float(x)) for x in bank.preferences[cid].weights]
                + [repr(float(x)) for x in outcome.final_objectives[cid]]
                + [repr(float(outcome.scalarised_values[cid]))]
            )
            writer.writerow(row)


def read_solutions_csv(path: Path):
    """Returns (weights, objectives, scalarised) arrays from a solutions CSV."""
    with Path(path).open() as fh:
        rows = [line for line in fh if not line.startswith("#")]
    reader = csv.reader(rows)
    header = next(reader)
    m = sum(1 for name in header if name.startswith("f_"))
    weights, objectives, scalar = [], [], []
    for row in reader:
        weights.append([float(x) for x in row[1 : 1 + m]])
        objectives.append([float(x) for x in row[1 + m : 1 + 2 * m]])
        scalar.append(float(row[-1]))
    return np.array(weights), np.array(objectives), np.array(scalar)


def _write_front_csv(path: Path, tag: str, front: np.ndarray):
    with path.open("w", newline="") as fh:
        fh.write(f"# {tag}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"f_{j + 1}" for j in range(front.shape[1])])
        for row in front:
            writer.writerow([repr(float(x)) for x in row])


def read_front_csv(path: Path) -> np.ndarray:
    with Path(path).open() as fh:
        rows = [line for line in fh if not line.startswith("#")]
    reader = csv.reader(rows)
    next(reader)
    return np.array([[float(x) for x in row] for row in reader])


def _reference_point(cfg: RunConfig, bank) -> np.ndarray:
    explicit = cfg.metrics.get("reference_point")
    if explicit is not None:
        return np.asarray(explicit, dtype=np.float64)
    return bank.problem.default_reference_point()


def _metrics_record(cfg: RunConfig, bank, outcome, ref_front, ref_source):
    ref_point = _reference_point(cfg, bank)
    objectives = outcome.final_objectives
    record = {
        "config_hash": config_hash(cfg),
        "problem_hash": problem_hash(cfg),
        "algorithm": cfg.algorithm,
        "seed": cfg.seed,
        "clients": cfg.clients,
        "mean_scalarised": float(outcome.scalarised_values.mean()),
        "hypervolume": hypervolume(objectives, ref_point),
        "sparsity": sparsity(objectives),
        "cardinality": cardinality(objectives),
        "igd": None,
        "reference_point": ref_point.tolist(),
        "reference_front_source": ref_source,
    }
    if ref_front is not None and len(ref_front):
        record["igd"] = igd(pareto_front(objectives), ref_front)
    return record


def _run_one(cfg: RunConfig, out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg_hash = config_hash(cfg)
    bank = build_client_bank(cfg)
    outcome = run_algorithm(cfg, bank)
    manifest = {
        "algorithm": cfg.algorithm,
        "seed": cfg.seed,
        "config": cfg.to_document(),
        "config_hash": cfg_hash,
        "problem_hash": problem_hash(cfg),
        "files": {
            "rounds": "rounds.jsonl",
            "solutions": "solutions.csv",
            "metrics": "metrics.json",
        },
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    with (out_dir / "rounds.jsonl").open("w") as fh:
        prolog = {"config_hash": cfg_hash, "problem_hash": problem_hash(cfg), "schema": "round-report-v1"}
        fh.write(json.dumps(prolog, sort_keys=True) + "\n")
        for report in outcome.reports:
            fh.write(json.dumps(report.to_record(), sort_keys=True) + "\n")
    _write_solutions_csv(out_dir / "solutions.csv", cfg_hash, bank, outcome)
    return bank, outcome


def _ref_front_for_run(cfg: RunConfig, bank):
    path = cfg.metrics.get("reference_front_csv")
    if path:
        return read_front_csv(Path(path)), "file"
    if cfg.problem.get("kind") in ("quadratic", "conflicting_groups"):
        return bank.problem.analytic_front(), "analytic"
    return None, None


def cmd_run(args) -> int:
    configs = load_config(args.config)
    if args.seed is not None:
        configs = [dataclasses.replace(c, seed=args.seed).validate() for c in configs]
        # A seed override collapses any seed list in the config.
        unique = {}
        for c in configs:
            unique[(c.algorithm, c.seed)] = c
        configs = list(unique.values())
    if args.algo is not None:
        configs = [dataclasses.replace(c, algorithm=args.algo).validate() for c in configs]
        unique = {}
        for c in configs:
            unique[(c.algorithm, c.seed)] = c
        configs = list(unique.values())
    out_root = Path(args.out)
    campaign = len(configs) > 1
    results = []
    for cfg in configs:
        run_dir = out_root / f"{cfg.algorithm}-seed{cfg.seed}" if campaign else out_root
        try:
            bank, outcome = _run_one(cfg, run_dir)
        except NumericError as exc:
            where = f" (round {exc.round_index})" if exc.round_index is not None else ""
            print(f"numeric failure{where}: {exc}", file=sys.stderr)
            return 3
        results.append((cfg, run_dir, bank, outcome))
        log.info("run %s seed %d written to %s", cfg.algorithm, cfg.seed, run_dir)
    if campaign:
        pooled = np.vstack([outcome.final_objectives for _, _, _, outcome in results])
        combined_front = pareto_front(pooled)
        _write_front_csv(
            out_root / "reference_front.csv",
            f"problem_hash={problem_hash(results[0][0])}",
            combined_front,
        )
        for cfg, run_dir, bank, outcome in results:
            record = _metrics_record(cfg, bank, outcome, combined_front, "campaign")
            (run_dir / "metrics.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
    else:
        cfg, run_dir, bank, outcome = results[0]
        ref_front, source = _ref_front_for_run(cfg, bank)
        record = _metrics_record(cfg, bank, outcome, ref_front, source)
        (run_dir / "metrics.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
    return 0


def _load_run_dir(path: Path) -> dict:
    manifest_path = path / "manifest.json"
    metrics_path = path / "metrics.json"
    if not manifest_path.is_file() or not metrics_path.is_file():
        raise ConfigError("<run-dir>", f"{path} is not a completed run directory")
    manifest = json.loads(manifest_path.read_text())
    record = json.loads(metrics_path.read_text())
    return {"manifest": manifest, "metrics": record}


def summarize_runs(run_dirs) -> dict:
    """Pool runs by algorithm: mean and population standard deviation per metric."""
    runs = [_load_run_dir(Path(d)) for d in run_dirs]
    hashes = {r["manifest"]["problem_hash"] for r in runs}
    if len(hashes) > 1:
        raise ConfigError(
            "<run-dir>", f"refusing to pool runs with mismatched problem hashes: {sorted(hashes)}"
        )
    by_algo: dict[str, list[dict]] = {}
    for r in runs:
        by_algo.setdefault(r["metrics"]["algorithm"], []).append(r["metrics"])
    table = {}
    metric_names = ("mean_scalarised", "hypervolume", "sparsity", "igd", "cardinality")
    for algo, records in sorted(by_algo.items()):
        entry = {"runs": len(records), "seeds": sorted(r["seed"] for r in records)}
        for name in metric_names:
            values = [r[name] for r in records if r[name] is not None]
            if values:
                arr = np.array(values, dtype=np.float64)
                # Population convention (ddof=0): one run has sigma 0.
                entry[name] = {"mean": float(arr.mean()), "std": float(arr.std())}
            else:
                entry[name] = None
        table[algo] = entry
    return {"problem_hash": hashes.pop(), "algorithms": table}


def _format_summary(summary: dict) -> str:
    names = ("mean_scalarised", "hypervolume", "sparsity", "igd", "cardinality")
    lines = [f"problem {summary['problem_hash'][:12]}"]
    head = f"{'algorithm':<12}{'runs':>5}" + "".join(f"{n:>24}" for n in names)
    lines.append(head)
    for algo, entry in summary["algorithms"].items():
        cells = []
        for n in names:
            stat = entry[n]
            cells.append(
                f"{stat['mean']:>14.4g} ±{stat['std']:<8.3g}" if stat else f"{'-':>24}"
            )
        lines.append(f"{algo:<12}{entry['runs']:>5}" + "".join(cells))
    return "\n".join(lines)


def cmd_summarize(args) -> int:
    summary = summarize_runs(args.run_dirs)
    print(_format_summary(summary))
    if args.json:
        Path(args.json).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_metrics(args) -> int:
    _, objectives, scalar = read_solutions_csv(Path(args.solutions))
    ref_point = np.asarray(_float_list(args.ref_point))
    if objectives.shape[0] and ref_point.size != objectives.shape[1]:
        raise ConfigError(
            "--ref-point",
            f"expected {objectives.shape[1]} coordinates, got {ref_point.size}",
        )
    record = {
        "mean_scalarised": float(scalar.mean()),
        "hypervolume": hypervolume(objectives, ref_point),
        "sparsity": sparsity(objectives),
        "cardinality": cardinality(objectives),
        "igd": None,
        "reference_point": ref_point.tolist(),
    }
    if args.ref_front:
        record["igd"] = igd(pareto_front(objectives), read_front_csv(Path(args.ref_front)))
    print(json.dumps(record, indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedpref", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute the run(s) described by a config file")
    p_run.add_argument("--config", required=True, help="path to the JSON config")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_run.add_argument("--algo", default=None, help="override the config algorithm")
    p_run.set_defaults(func=cmd_run)

    p_sum = sub.add_parser("summarize", help="aggregate metrics across run directories")
    p_sum.add_argument("run_dirs", nargs="+", help="run directories to pool")
    p_sum.add_argument("--json", default=None, help="also write the summary as JSON")
    p_sum.set_defaults(func=cmd_summarize)

    p_met = sub.add_parser("metrics", help="compute solution-set metrics from a CSV")
    p_met.add_argument("--solutions", required=True, help="solutions CSV path")
    p_met.add_argument("--ref-point", required=True, help="comma-separated reference point")
    p_met.add_argument("--ref-front", default=None, help="reference front CSV for IGD")
    p_met.set_defaults(func=cmd_metrics)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        where = f" (round {exc.round_index})" if exc.round_index is not None else ""
        print(f"numeric failure{where}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
