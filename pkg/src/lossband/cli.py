"""Command-line entry point: reproducible experiments over config files.

Subcommands: ``train`` (produce minima), ``connect`` (path between two
minima), ``explore`` (graph over a set of minima), ``eval-path`` (dense loss
profile of a stored chain vs. the straight segment). Exit codes: 0 success,
1 usage/config error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autoneb import AutoNebSchedule, auto_neb, evaluate_dense, profile_rows
from .chain import Chain, arc_lengths
from .errors import (
    ConfigError,
    DimensionMismatch,
    LossbandError,
    NonFiniteValue,
    RelaxationFailed,
    TrainingDiverged,
)
from .explorer import explore, kruskal_mst
from .landscape import (
    Dataset,
    Landscape,
    MlpSpec,
    TrainConfig,
    analytic_surface,
    make_mlp,
    train_minimum,
)
from .params import as_params, params_from_hex, params_to_hex

_USAGE_EXIT = 1
_NUMERIC_EXIT = 2


@dataclass
class ExperimentConfig:
    """Parsed experiment file plus the raw dict it came from."""

    raw: dict
    landscape: Landscape
    train: TrainConfig
    schedule: AutoNebSchedule
    budget: int
    stop_ratio: float
    seed: int

    @property
    def sha256(self) -> str:
        canonical = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


def _build_landscape(cfg: dict, base_dir: Path) -> Landscape:
    spec = cfg.get("landscape")
    if not isinstance(spec, dict):
        raise ConfigError("config needs a 'landscape' object")
    if "name" in spec:
        params = {k: v for k, v in spec.items() if k != "name"}
        return analytic_surface(spec["name"], **params)
    if "mlp" in spec:
        mlp_spec = MlpSpec.from_dict(spec["mlp"])
        dataset_path = spec.get("dataset_csv")
        if dataset_path is None:
            raise ConfigError("mlp landscape needs 'dataset_csv'")
        resolved = (base_dir / dataset_path).resolve()
        if not resolved.exists():
            raise ConfigError(f"dataset file not found: {resolved}")
        data = Dataset.from_csv(resolved, mlp_spec.loss_kind)
        return make_mlp(mlp_spec, data)
    raise ConfigError("landscape must have 'name' (analytic) or 'mlp' + 'dataset_csv'")


def load_config(path, seed_override: int | None = None) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if seed_override is not None:
        raw = dict(raw)
        raw["seed"] = int(seed_override)
    seed = int(raw.get("seed", 0))
    landscape = _build_landscape(raw, path.parent)
    train = TrainConfig.from_dict(raw["train"]) if "train" in raw else TrainConfig(0.05, 200)
    if "autoneb" in raw:
        schedule = AutoNebSchedule.from_dict(raw["autoneb"])
    else:
        schedule = AutoNebSchedule.default()
    explore_cfg = raw.get("explore", {})
    budget = int(explore_cfg.get("budget", 10))
    stop_ratio = float(explore_cfg.get("stop_ratio", 0.1))
    return ExperimentConfig(raw, landscape, train, schedule, budget, stop_ratio, seed)


# ---------------------------------------------------------------------------
# Artifact IO
# ---------------------------------------------------------------------------


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")


def _params_doc(values: np.ndarray) -> dict:
    return {
        "dim": int(values.shape[0]),
        "values": [float(v) for v in values],
        "values_hex": params_to_hex(values),
    }


def load_params_file(path) -> np.ndarray:
    doc = json.loads(Path(path).read_text())
    if "values_hex" in doc:
        return params_from_hex(doc["values_hex"], int(doc["dim"]))
    return as_params(doc["values"], int(doc["dim"]))


def _write_profile_csv(path: Path, header_meta: dict, rows, columns) -> None:
    with open(path, "w", newline="") as fh:
        for key, value in sorted(header_meta.items()):
            fh.write(f"# {key}={value}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(repr(v) if isinstance(v, float) else str(v) for v in row) + "\n")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_train(config: ExperimentConfig, count: int, out_dir: Path) -> int:
    """Train ``count`` minima from seeded distinct initializations."""
    out_dir.mkdir(parents=True, exist_ok=True)
    meta = {"seed": config.seed, "config_sha256": config.sha256}
    manifest = {"count": count, "minima": [], **meta}
    status = 0
    for i in range(count):
        rng = np.random.default_rng([config.seed, i])
        init = config.landscape.random_init(rng)
        try:
            theta = train_minimum(config.landscape, init, config.train)
        except TrainingDiverged as exc:
            print(f"minimum {i}: {exc}", file=sys.stderr)
            status = _NUMERIC_EXIT
            break
        loss = config.landscape.loss(theta)
        name = f"minimum_{i:03d}.json"
        _write_json(out_dir / name, {**_params_doc(theta), "loss": loss, **meta})
        manifest["minima"].append({"file": name, "loss": loss})
    _write_json(out_dir / "manifest.json", manifest)
    return status


def _connect_artifacts(config: ExperimentConfig, theta_a, theta_b, workers: int, out_dir: Path):
    landscape = config.landscape
    result = auto_neb(theta_a, theta_b, landscape, config.schedule, workers=workers)
    profile = evaluate_dense(result.chain, landscape, config.schedule.dense_count)
    meta = {"seed": config.seed, "config_sha256": config.sha256}

    out_dir.mkdir(parents=True, exist_ok=True)
    result.chain.save(out_dir / "chain.json", encoding="both", extra=meta)
    _write_profile_csv(
        out_dir / "profile.csv",
        meta,
        profile_rows(result.chain, profile),
        ["cumulative_arc_length", "alpha_global", "loss", "is_pivot"],
    )
    straight = float(np.linalg.norm(np.asarray(theta_b) - np.asarray(theta_a)))
    length = float(arc_lengths(result.chain)[-1])
    report = {
        "saddle_loss": result.saddle.loss,
        "min_loss_a": landscape.loss(theta_a),
        "min_loss_b": landscape.loss(theta_b),
        "path_length_ratio": length / straight if straight > 0 else 1.0,
        **meta,
    }
    _write_json(out_dir / "report.json", report)
    _write_json(
        out_dir / "saddle.json",
        {
            "saddle_loss": result.saddle.loss,
            "source": result.saddle.source,
            "params": _params_doc(result.saddle.params),
            **meta,
        },
    )
    return result


def cmd_connect(config: ExperimentConfig, min_a, min_b, workers: int, out_dir: Path) -> int:
    theta_a = load_params_file(min_a)
    theta_b = load_params_file(min_b)
    dim = config.landscape.dim
    as_params(theta_a, dim)
    as_params(theta_b, dim)
    result = _connect_artifacts(config, theta_a, theta_b, workers, out_dir)
    print(f"saddle_loss={result.saddle.loss!r} source={result.saddle.source}")
    return 0


def cmd_explore(config: ExperimentConfig, minima_dir, workers: int, out_dir: Path) -> int:
    minima_dir = Path(minima_dir)
    files = sorted(minima_dir.glob("minimum_*.json"))
    if len(files) < 2:
        raise ConfigError(f"need at least 2 minima files in {minima_dir}")
    minima = [load_params_file(f) for f in files]
    graph = explore(
        minima,
        config.landscape,
        config.schedule,
        budget=config.budget,
        stop_ratio=config.stop_ratio,
        seed=config.seed,
        workers=workers,
    )
    tree = kruskal_mst(graph)
    meta = {"seed": config.seed, "config_sha256": config.sha256}

    out_dir.mkdir(parents=True, exist_ok=True)
    chains_dir = out_dir / "chains"
    chains_dir.mkdir(exist_ok=True)
    nodes_doc = []
    for node, src in zip(graph.nodes, files):
        name = f"node_{node.id:03d}.json"
        _write_json(out_dir / name, {**_params_doc(node.params), "loss": node.min_loss, **meta})
        nodes_doc.append({"id": node.id, "min_loss": node.min_loss, "params_file": name})
    edges_doc = []
    for edge in graph.edges:
        chain_name = f"chains/edge_{edge.id:03d}.json"
        edge.chain.save(out_dir / chain_name, encoding="both", extra=meta)
        edges_doc.append(
            {
                "id": edge.id,
                "u": edge.u,
                "v": edge.v,
                "saddle_loss": edge.saddle_loss,
                "chain_file": chain_name,
            }
        )
    _write_json(
        out_dir / "graph.json",
        {"nodes": nodes_doc, "edges": edges_doc, "mst": [e.id for e in tree], **meta},
    )

    print("MST edges (u, v, saddle_loss):")
    for edge in tree:
        print(f"  {edge.u:3d} {edge.v:3d}  {edge.saddle_loss!r}")
    return 0


def cmd_eval_path(config: ExperimentConfig, chain_file, m: int, out_dir: Path) -> int:
    if m < 1:
        raise ConfigError("dense count m must be >= 1")
    chain = Chain.load(chain_file)
    landscape = config.landscape
    if chain.dim != landscape.dim:
        raise DimensionMismatch(
            f"chain dim {chain.dim} does not match landscape dim {landscape.dim}"
        )
    straight = Chain(np.vstack([chain.pivots[0], chain.pivots[-1]]))
    meta = {"seed": config.seed, "config_sha256": config.sha256}
    rows = []
    for label, c in (("chain", chain), ("straight", straight)):
        profile = evaluate_dense(c, landscape, m)
        for arc, alpha, loss, is_pivot in profile_rows(c, profile):
            rows.append((label, arc, alpha, loss, is_pivot))
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_profile_csv(
        out_dir / "path_profile.csv",
        meta,
        rows,
        ["curve", "cumulative_arc_length", "alpha_global", "loss", "is_pivot"],
    )
    return 0


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors map to exit code 1
        raise ConfigError(message)


def _add_common(sub):
    sub.add_argument("--config", required=True, help="experiment config JSON")
    sub.add_argument("--out", required=True, help="output directory")
    sub.add_argument("--seed", type=int, default=None, help="override the config seed")
    sub.add_argument(
        "--workers",
        type=int,
        default=os.cpu_count() or 1,
        help="parallel pivot evaluations (results are worker-count independent)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lossband", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)

    p_train = subs.add_parser("train", help="train minima from seeded initializations")
    _add_common(p_train)
    p_train.add_argument("--count", type=int, default=1, help="number of minima")

    p_connect = subs.add_parser("connect", help="find a path between two minima files")
    _add_common(p_connect)
    p_connect.add_argument("--a", required=True, help="first minimum JSON file")
    p_connect.add_argument("--b", required=True, help="second minimum JSON file")

    p_explore = subs.add_parser("explore", help="build a landscape graph over minima")
    _add_common(p_explore)
    p_explore.add_argument("--minima", required=True, help="directory of minimum_*.json files")

    p_eval = subs.add_parser("eval-path", help="dense profile of a chain vs. its chord")
    _add_common(p_eval)
    p_eval.add_argument("--chain", required=True, help="chain JSON file")
    p_eval.add_argument("-m", "--dense", type=int, default=9, help="points per segment")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        config = load_config(args.config, seed_override=args.seed)
        out_dir = Path(args.out)
        if args.command == "train":
            return cmd_train(config, args.count, out_dir)
        if args.command == "connect":
            return cmd_connect(config, args.a, args.b, args.workers, out_dir)
        if args.command == "explore":
            return cmd_explore(config, args.minima, args.workers, out_dir)
        if args.command == "eval-path":
            return cmd_eval_path(config, args.chain, args.dense, out_dir)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _USAGE_EXIT
    except (TrainingDiverged, RelaxationFailed, NonFiniteValue) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return _NUMERIC_EXIT
    except LossbandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _USAGE_EXIT


if __name__ == "__main__":
    sys.exit(main())
