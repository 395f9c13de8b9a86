"""Command-line entry point: ``qfhpo {generate,optimize,baseline,surface}``.

Settings come from a YAML run config (``--config``) and from flags; values in
the config file take precedence over flags, and ``QFHPO_OUTPUT_DIR`` overrides
the output directory from either. Relative paths inside a config file are
resolved against the file's directory.

Exit codes: 0 success, 1 configuration error, 2 runtime or numerical error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import yaml

from . import toy_models as tm
from .encoding import SearchSpace, decode, denormalize_score, encode
from .errors import ConfigError, QfhpoError
from .pipeline import (
    Objective,
    PipelineError,
    SamplingPlan,
    default_n_samples,
    generate_sample_table,
    run_classical_baseline,
    run_quantum_hpo,
    write_sample_table,
)
from .report import render_table, validate_report
from .search import SearchConfig
from .surrogate import SurrogateModel, TrainConfig, evaluate_batch

log = logging.getLogger("qfhpo")

OUTPUT_ENV = "QFHPO_OUTPUT_DIR"
EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


@dataclass
class RunConfig:
    command: str
    seed: int = 0
    output_dir: Path = Path("qfhpo-out")
    threads: int = 1
    verbosity: int = 0
    base_dir: Path = Path(".")
    raw: Dict[str, Any] = field(default_factory=dict)

    def section(self, name: str) -> Dict[str, Any]:
        value = self.raw.get(name) or {}
        if not isinstance(value, dict):
            raise ConfigError(f"config section {name!r} must be a mapping")
        return value

    def path(self, value: str) -> Path:
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", type=Path, help="YAML run config")
    common.add_argument("--seed", type=int, help="global seed (default 0)")
    common.add_argument("-o", "--output-dir", type=Path, help="where outputs are written")
    common.add_argument("--threads", type=int, help="worker cap for objective evaluations")
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = argparse.ArgumentParser(prog="qfhpo", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="score sampled hyperparameters")
    g.add_argument("--space", help="search-space YAML")
    g.add_argument("--n-samples", type=int)

    o = sub.add_parser("optimize", parents=[common], help="run the surrogate-based search")
    o.add_argument("--space", help="search-space YAML")
    o.add_argument("--n-samples", type=int)
    o.add_argument("--layers", type=int, help="surrogate layers")

    b = sub.add_parser("baseline", parents=[common], help="classical grid/random search")
    b.add_argument("--space", help="search-space YAML")
    b.add_argument("--method", choices=("grid", "random"))
    b.add_argument("--budget", type=int)

    s = sub.add_parser("surface", parents=[common], help="evaluate a surrogate on a grid")
    s.add_argument("--space", help="search-space YAML")
    s.add_argument("--checkpoint", help="surrogate checkpoint JSON")
    s.add_argument("--axes", nargs="+", help="one or two dimension names to sweep")
    s.add_argument("--resolution", type=int)
    return p


def _merge_flags(args: argparse.Namespace) -> Dict[str, Any]:
    """Flags expressed as config entries (lower precedence than the file).

    Paths given as flags are made absolute here so they stay relative to the
    working directory rather than to the config file.
    """
    raw: Dict[str, Any] = {}
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.output_dir is not None:
        raw["output_dir"] = str(args.output_dir.resolve())
    if args.threads is not None:
        raw["threads"] = args.threads
    if getattr(args, "space", None):
        raw["space"] = str(Path(args.space).resolve())
    if getattr(args, "n_samples", None) is not None:
        raw.setdefault("plan", {})["n_samples"] = args.n_samples
    if getattr(args, "layers", None) is not None:
        raw.setdefault("surrogate", {})["n_layers"] = args.layers
    if getattr(args, "method", None):
        raw.setdefault("baseline", {})["method"] = args.method
    if getattr(args, "budget", None) is not None:
        raw.setdefault("baseline", {})["budget"] = args.budget
    if getattr(args, "checkpoint", None):
        raw.setdefault("surface", {})["checkpoint"] = str(Path(args.checkpoint).resolve())
    for key in ("axes", "resolution"):
        if getattr(args, key, None) is not None:
            raw.setdefault("surface", {})[key] = getattr(args, key)
    return raw


def _deep_update(base: Dict[str, Any], over: Dict[str, Any]) -> Dict[str, Any]:
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_update(out[k], v)
        else:
            out[k] = v
    return out


def load_config(args: argparse.Namespace) -> RunConfig:
    raw = _merge_flags(args)
    base_dir = Path.cwd()
    if args.config is not None:
        if not args.config.is_file():
            raise ConfigError(f"config file {args.config} does not exist")
        try:
            from_file = yaml.safe_load(args.config.read_text()) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {args.config}: {exc}") from exc
        if not isinstance(from_file, dict):
            raise ConfigError(f"{args.config} must contain a mapping")
        raw = _deep_update(raw, from_file)
        base_dir = args.config.resolve().parent
    cfg = RunConfig(command=args.command, seed=int(raw.get("seed", 0)),
                    threads=int(raw.get("threads", 1)), verbosity=args.verbose,
                    base_dir=base_dir, raw=raw)
    out = os.environ.get(OUTPUT_ENV) or raw.get("output_dir")
    if out is not None:
        cfg.output_dir = Path(out) if os.environ.get(OUTPUT_ENV) else cfg.path(out)
    if cfg.threads < 1:
        raise ConfigError("threads must be >= 1")
    return cfg


def _space(cfg: RunConfig) -> SearchSpace:
    value = cfg.raw.get("space")
    if value is None:
        raise ConfigError("no search space given (config key 'space' or --space)")
    try:
        if isinstance(value, dict):
            return SearchSpace.from_dict(value)
        path = cfg.path(value)
        if not path.is_file():
            raise ConfigError(f"search-space file {path} does not exist")
        return SearchSpace.load(path)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid search space: {exc}") from exc


def _objective(cfg: RunConfig) -> Objective:
    sec = cfg.section("objective")
    kind = sec.get("model", "boosted_stumps")
    if kind not in tm.MODEL_KINDS:
        raise ConfigError(f"unknown model {kind!r}; expected one of {tm.MODEL_KINDS}")
    ds = sec.get("dataset") or {"synthetic": {}}
    if "path" in ds:
        path = cfg.path(ds["path"])
        if not path.is_file():
            raise ConfigError(f"dataset file {path} does not exist")
        target = ds.get("target", "y")

        def loader():
            return tm.Dataset.from_csv(path, target)
    else:
        synth = dict(ds.get("synthetic") or {})
        synth.setdefault("seed", cfg.seed)
        unknown = set(synth) - {"n_samples", "n_features", "noise", "seed"}
        if unknown:
            raise ConfigError(f"unknown synthetic dataset keys {sorted(unknown)}")

        def loader():
            return tm.friedman_dataset(**synth)
    try:
        obj = Objective(kind, loader, metric=sec.get("metric", "r2"),
                        direction=sec.get("direction"), cv_folds=int(sec.get("cv_folds", 3)),
                        seed=int(sec.get("seed", cfg.seed)), fixed=sec.get("fixed"),
                        test_fraction=float(sec.get("test_fraction", 0.25)))
        tm.ToyModelSpec(kind, obj.fixed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return obj


def _plan(cfg: RunConfig, space: SearchSpace) -> SamplingPlan:
    sec = cfg.section("plan")
    try:
        return SamplingPlan(int(sec.get("n_samples", default_n_samples(space))),
                            sec.get("strategy", "uniform-random"),
                            int(sec.get("rng_seed", cfg.seed)), sec.get("lattice_counts"))
    except ValueError as exc:
        raise ConfigError(f"plan: {exc}") from exc


def _train_cfg(cfg: RunConfig):
    sec = cfg.section("surrogate")
    try:
        return int(sec.get("n_layers", 1)), TrainConfig(
            learning_rate=float(sec.get("learning_rate", 0.15)),
            max_epochs=int(sec.get("max_epochs", 70)),
            rng_seed=int(sec.get("rng_seed", cfg.seed)))
    except ValueError as exc:
        raise ConfigError(f"surrogate: {exc}") from exc


def _search_cfg(cfg: RunConfig) -> SearchConfig:
    sec = cfg.section("search")
    try:
        return SearchConfig(learning_rate=float(sec.get("learning_rate", 0.0005)),
                            max_epochs=int(sec.get("max_epochs", 1500)),
                            n_restarts=int(sec.get("n_restarts", 8)),
                            rng_seed=int(sec.get("rng_seed", cfg.seed)),
                            load_opt_bh=bool(sec.get("load_opt_bh", False)))
    except ValueError as exc:
        raise ConfigError(f"search: {exc}") from exc


def _baseline_args(cfg: RunConfig) -> Dict[str, Any]:
    sec = cfg.section("baseline")
    method = sec.get("method", "grid")
    if method not in ("grid", "random"):
        raise ConfigError(f"baseline method must be grid or random, got {method!r}")
    budget = int(sec.get("budget", 100))
    if budget < 1:
        raise ConfigError("baseline budget must be >= 1")
    return {"method": method, "budget": budget, "seed": int(sec.get("seed", cfg.seed)),
            "resolution": sec.get("resolution")}


def _write_json(path: Path, data: Any) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def cmd_generate(cfg: RunConfig) -> int:
    space = _space(cfg)
    objective = _objective(cfg)
    plan = _plan(cfg, space)
    objective.load()
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    table = generate_sample_table(objective, space, plan, cfg.threads)
    write_sample_table(table, space, cfg.output_dir / "samples.csv")
    meta = dict(table.metadata)
    meta.update(n_samples=len(table), score_bounds=list(table.score_bounds),
                assignments=table.assignments, parallelism=cfg.threads)
    _write_json(cfg.output_dir / "samples_meta.json", meta)
    log.info("wrote %d rows in %.3f s", len(table), meta["generation_time_s"])
    return EXIT_OK


def cmd_baseline(cfg: RunConfig) -> int:
    space = _space(cfg)
    objective = _objective(cfg)
    args = _baseline_args(cfg)
    objective.load()
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    res = run_classical_baseline(objective, space, args["method"], args["budget"], args["seed"],
                                 args["resolution"], cfg.threads)
    train_score, test_score = objective.holdout_scores(res.best_assignment)
    out = res.to_dict()
    out.update(model=objective.name, metric=objective.metric, direction=objective.direction,
               classical_baseline_time_s=res.elapsed_s, original_train_score=train_score,
               original_test_score=test_score)
    _write_json(cfg.output_dir / "baseline.json", out)
    log.info("best %s score %.6g", res.best_assignment, res.best_score)
    return EXIT_OK


def _cached_optimum(path: Path, width: int) -> Optional[List[float]]:
    """Encoded optimum from an earlier ``best.json``, if one fits this space."""
    if not path.is_file():
        return None
    try:
        point = json.loads(path.read_text())["best_encoded"]
    except (ValueError, KeyError, TypeError):
        log.warning("ignoring unreadable %s", path)
        return None
    if not isinstance(point, list) or len(point) != width:
        log.warning("ignoring %s: encoded width differs from the space", path)
        return None
    return [float(v) for v in point]


def cmd_optimize(cfg: RunConfig) -> int:
    space = _space(cfg)
    objective = _objective(cfg)
    plan = _plan(cfg, space)
    n_layers, train_cfg = _train_cfg(cfg)
    search_cfg = _search_cfg(cfg)
    bargs = _baseline_args(cfg)
    objective.load()
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    warm = _cached_optimum(out / "best.json", space.width) if search_cfg.load_opt_bh else None
    baseline = run_classical_baseline(objective, space, bargs["method"], bargs["budget"],
                                      bargs["seed"], bargs["resolution"], cfg.threads)
    try:
        res = run_quantum_hpo(objective, space, plan, train_cfg, search_cfg, n_layers,
                              baseline=baseline, threads=cfg.threads, warm_start=warm)
    except PipelineError as exc:
        exc.report.save(out / "report.json")
        log.error("%s", exc)
        return EXIT_RUNTIME
    report = res.report
    validate_report(report.to_dict())
    report.save(out / "report.json")
    (out / "report.txt").write_text(render_table([report]))
    write_sample_table(res.table, space, out / "samples.csv")
    res.model.save(out / "surrogate.json")
    sr = res.search_result
    _write_json(out / "best.json", {
        "best_assignment": res.best_assignment,
        "best_encoded": sr.best_encoded.tolist(),
        "surrogate_value": sr.best_value,
        "predicted_raw_score": sr.best_raw,
        "restart": sr.restart,
        "mode": sr.mode,
    })
    log.info("best %s (test score %.6g)", res.best_assignment, report.proposed_test_score)
    return EXIT_OK


def cmd_surface(cfg: RunConfig) -> int:
    space = _space(cfg)
    sec = cfg.section("surface")
    if "checkpoint" not in sec:
        raise ConfigError("surface needs a checkpoint (config surface.checkpoint or --checkpoint)")
    ckpt = cfg.path(sec["checkpoint"])
    if not ckpt.is_file():
        raise ConfigError(f"checkpoint {ckpt} does not exist")
    model = SurrogateModel.load(ckpt)
    if model.space_hash != space.hash():
        raise ConfigError("checkpoint was trained against a different search space")
    axes = sec.get("axes") or []
    if isinstance(axes, str):
        axes = [axes]
    if not 1 <= len(axes) <= 2:
        raise ConfigError("surface needs one or two axes")
    slices = space.slices()
    for a in axes:
        if a not in slices:
            raise ConfigError(f"unknown axis {a!r}")
        if slices[a].stop - slices[a].start != 1:
            raise ConfigError(f"axis {a!r} spans several inputs and cannot be swept")
    resolution = int(sec.get("resolution", 101))
    if resolution < 2:
        raise ConfigError("resolution must be >= 2")
    base = np.full(space.width, np.pi / 2)
    fixed = sec.get("fixed") or {}
    for name, value in fixed.items():
        if name not in slices:
            raise ConfigError(f"unknown fixed dimension {name!r}")
        partial = SearchSpace((space[name],))
        try:
            base[slices[name]] = encode(partial, {name: value})
        except QfhpoError as exc:
            raise ConfigError(str(exc)) from exc

    grid = np.linspace(0.0, np.pi, resolution)
    mesh = np.meshgrid(*([grid] * len(axes)), indexing="ij")
    pts = np.tile(base, (mesh[0].size, 1))
    for a, m in zip(axes, mesh):
        pts[:, slices[a].start] = m.ravel()
    values = evaluate_batch(model, pts)
    bounds = model.score_bounds
    has_bounds = bounds is not None and bounds[1] > bounds[0]
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    header = [f"{a}_encoded" for a in axes] + list(axes) + ["value", "predicted_score"]
    lines = [",".join(header)]
    for p, v in zip(pts, values):
        native = decode(space, p)
        cells = [repr(float(p[slices[a].start])) for a in axes]
        cells += [str(native[a]) for a in axes]
        cells += [repr(float(v)),
                  repr(float(denormalize_score(v, *bounds))) if has_bounds else ""]
        lines.append(",".join(cells))
    (cfg.output_dir / "surface.csv").write_text("\n".join(lines) + "\n")
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "optimize": cmd_optimize,
            "baseline": cmd_baseline, "surface": cmd_surface}


def main(argv: Optional[List[str]] = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        return COMMANDS[cfg.command](cfg)
    except ConfigError as exc:
        print(f"qfhpo: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (QfhpoError, ArithmeticError, RuntimeError, ValueError) as exc:
        print(f"qfhpo: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
