"""Command-line front end.

Every subcommand writes into ``<out>/<command>/`` and leaves a
``manifest.json`` there with the config hash, seed and library versions.
Exit status: 0 ok, 1 pipeline error, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

import yaml

from . import backbone as bb
from . import bench
from .config import ConfigError, RunConfig, load_config, manifest
from .env_agent import history_matrix
from .experiment import (METHOD_ORDER, REPORT_COLUMNS, AgentPipeline, EcosystemData, Evaluator,
                         MethodResult, load, make_adapter, network_snapshot, run_baseline, run_method)
from .ingest import CATEGORIES
from .llm import LLMError
from .planner_agent import render, save_json

log = logging.getLogger("scenegen")

COMMANDS = ("ingest", "network", "backbone", "generate", "evaluate", "bench", "report")


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    save_json(path, obj)


def _read_json(path: Path):
    return json.loads(path.read_text(encoding="utf-8"))


def _outdir(cfg: RunConfig, command: str) -> Path:
    d = Path(cfg.out) / command
    d.mkdir(parents=True, exist_ok=True)
    return d


def _finish(cfg: RunConfig, command: str, extra: dict | None = None) -> None:
    _write_json(Path(cfg.out) / command / "manifest.json", manifest(command, cfg, extra))


def _fresh(path: Path, cfg: RunConfig) -> bool:
    """Whether ``path``'s command directory was produced under the same config."""
    m = path.parent / "manifest.json"
    return path.is_file() and m.is_file() and _read_json(m).get("config_hash") == cfg.digest()


# -- commands ------------------------------------------------------------


def cmd_ingest(cfg: RunConfig) -> int:
    data = load(cfg, make_adapter(cfg) if cfg.llm_mode == "remote" else None)
    out = _outdir(cfg, "ingest")
    with (out / "categories.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["api_id", "category_raw", "category"])
        for a in data.apis:
            w.writerow([a.api_id, a.category_raw, data.category_map[a.api_id]])
    _write_demand_csv(out / "demand.csv", data)
    summary = {"apis": len(data.apis), "mashups": len(data.mashups), "years": data.years,
               "calls": {str(y): dict(zip(CATEGORIES, data.demand.vector(y))) for y in data.years}}
    _write_json(out / "summary.json", summary)
    _finish(cfg, "ingest")
    return 0


def _write_demand_csv(path: Path, data: EcosystemData) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["year", *CATEGORIES])
        for y in data.years:
            w.writerow([y, *data.demand.vector(y)])


def cmd_network(cfg: RunConfig) -> int:
    data = load(cfg)
    out = _outdir(cfg, "network")
    sizes = {}
    for y in data.years:
        g = data.networks[y]
        g.save(out / str(y))
        sizes[str(y)] = {"nodes": len(g), "edges": g.number_of_edges(), "total_weight": g.total_weight()}
    _finish(cfg, "network", {"sizes": sizes})
    return 0


def cmd_backbone(cfg: RunConfig) -> int:
    data = load(cfg)
    out = _outdir(cfg, "backbone")
    results = {}
    for y in data.years:
        g = data.networks[y]
        ctx = {}
        if cfg.method == "cluster":
            ctx["features"] = bb.node_features(g, data.demand.api_calls.get(y, {}), data.category_map, CATEGORIES)
        res = bb.extract(g, cfg.method, cfg.backbone_params(), **ctx)
        (out / f"{y}.edges").write_text(res.sub.to_edgelist(), encoding="utf-8")
        results[str(y)] = res.manifest()
    _write_json(out / "result.json", {"method": cfg.method, "years": results})
    _finish(cfg, "backbone")
    return 0


def cmd_generate(cfg: RunConfig) -> int:
    data = load(cfg)
    ev = Evaluator(data, _weights(cfg))
    pipe = AgentPipeline(data, ev, cfg)
    run = pipe.run()
    out = _outdir(cfg, "generate")

    env = run.environment
    _write_json(out / "boundary.json", env.boundary.to_json())
    _write_json(out / "environment.json", {
        "stats": env.stats,
        "rules": [{"id": r.id, "description": r.description, "effect": {k: list(v) for k, v in r.effect.items()}}
                  for r in env.rules],
        "high_risk": [{"triple": list(c.triple), "credibility": c.credibility, "risk": c.risk}
                      for c in env.high_risk],
        "multiplier_range": {c: list(v) for c, v in (pipe.ev_bounds or {}).items()},
    })
    hist = history_matrix(data.demand)
    with (out / "envelope.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["year", "category", "history", "vmin", "vmax"])
        for i, c in enumerate(CATEGORIES):
            for t, y in enumerate(data.years):
                w.writerow([y, c, hist[i, t], env.boundary.vmin[c][t], env.boundary.vmax[c][t]])

    (out / "rules.txt").write_text("".join(render(r) + "\n" for r in run.rules), encoding="utf-8")
    _write_json(out / "constraints.json", [{"id": c.id, "source": c.source, "text": c.text}
                                           for c in run.constraints])
    _write_json(out / "scheme_initial.json", run.scheme0.to_json())
    _write_json(out / "scheme.json", run.scheme.to_json())
    _write_json(out / "calibration.json", run.calibration.to_json())
    _write_json(out / "optimize.json", run.optimization.to_json())
    run.full_set.save(out / "scenarios_full.json")
    run.reduced_set.save(out / "scenarios.json")
    _write_json(out / "result.json", run.result.to_json())

    social = out / "social"
    social.mkdir(exist_ok=True)
    for y in data.years:
        _write_json(social / f"{y}.json", pipe.social_backbone(y, run.scheme).to_json())
        _write_json(social / f"{y}_api.json", network_snapshot(run.networks[y], data.category_map))
    _finish(cfg, "generate", {"deviation": run.result.deviation})
    return 0


def _weights(cfg: RunConfig):
    from .metrics import EffectivenessWeights

    return EffectivenessWeights(cfg.alpha, cfg.beta)


def _methods(arg: str | None) -> list[str]:
    if not arg:
        return list(METHOD_ORDER)
    ms = [m.strip() for m in arg.split(",") if m.strip()]
    bad = [m for m in ms if m not in METHOD_ORDER]
    if bad:
        raise ConfigError({"methods": f"unknown method(s) {bad}; expected from {list(METHOD_ORDER)}"})
    return ms


def cmd_evaluate(cfg: RunConfig, methods: Sequence[str] = METHOD_ORDER) -> int:
    data = load(cfg)
    ev = Evaluator(data, _weights(cfg))
    out = _outdir(cfg, "evaluate")
    snaps = out / "snapshots"
    snaps.mkdir(exist_ok=True)
    with (out / "vectors.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "year", *REPORT_COLUMNS[:-1]])
        for m in methods:
            res, nets = run_method(m, data, ev, cfg)
            _write_json(out / f"{m}.json", res.to_json())
            for y, v in zip(res.years, res.vectors):
                w.writerow([m, y, *v.as_array().tolist()])
            for y, g in nets.items():
                _write_json(snaps / f"{m}_{y}.json", network_snapshot(g, data.category_map))
    _write_json(out / "expected.json", {"years": data.years, "dims": list(REPORT_COLUMNS[:-1]),
                                        "matrix": ev.expected.tolist()})
    _finish(cfg, "evaluate", {"methods": list(methods)})
    return 0


def _bench_records(cfg: RunConfig, data: EcosystemData, ev: Evaluator, methods: Sequence[str]):
    nodes = sum(len(data.networks[y]) for y in data.years)
    edges = sum(data.networks[y].number_of_edges() for y in data.years)
    thunks = {}
    for m in methods:
        if m == "ours":
            thunks[m] = (lambda: AgentPipeline(data, ev, cfg).run(), nodes, edges)
        else:
            thunks[m] = ((lambda m=m: run_baseline(m, data, ev, cfg)), nodes, edges)
    return bench.run_bench(thunks, cfg.bench_runs)


def cmd_bench(cfg: RunConfig, methods: Sequence[str] = METHOD_ORDER, kiloseconds: bool = False) -> int:
    data = load(cfg)
    ev = Evaluator(data, _weights(cfg))
    out = _outdir(cfg, "bench")
    records = _bench_records(cfg, data, ev, methods)
    bench.write_records(out / "timings.json", records)
    bench.write_report(out / "efficiency", bench.summarize(records, methods), kiloseconds)
    _finish(cfg, "bench", {"runs": cfg.bench_runs})
    return 0 if all(r.ok for r in records) else 1


def cmd_report(cfg: RunConfig, kiloseconds: bool = False) -> int:
    """Metric table (methods x 8 dims + deviation) and efficiency table.

    Results already written by ``generate``/``evaluate``/``bench`` under the
    same config are reused; anything missing is computed here.
    """
    data = load(cfg)
    ev = Evaluator(data, _weights(cfg))
    root = Path(cfg.out)
    results: dict[str, MethodResult] = {}
    for m in METHOD_ORDER:
        cached = [root / "evaluate" / f"{m}.json"]
        if m == "ours":
            cached.insert(0, root / "generate" / "result.json")
        hit = next((p for p in cached if _fresh(p, cfg)), None)
        if hit is not None:
            results[m] = MethodResult.from_json(_read_json(hit))
        else:
            results[m] = run_method(m, data, ev, cfg)[0]

    out = _outdir(cfg, "report")
    rows = {m: results[m].row() for m in METHOD_ORDER}
    with (out / "table1.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["Method", *REPORT_COLUMNS])
        for m in METHOD_ORDER:
            w.writerow([m, *(f"{rows[m][c]:.4f}" for c in REPORT_COLUMNS)])
    _write_json(out / "table1.json", {"columns": list(REPORT_COLUMNS), "rows": rows})

    timings = root / "bench" / "timings.json"
    if _fresh(timings, cfg):
        records = bench.read_records(timings)
    else:
        records = _bench_records(cfg, data, ev, METHOD_ORDER)
        bench.write_records(out / "timings.json", records)
    bench.write_report(out / "table2", bench.summarize(records, METHOD_ORDER), kiloseconds)
    _finish(cfg, "report")
    return 0


# -- argument handling -----------------------------------------------------


def _kv(items: Sequence[str] | None, flag: str) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError({flag: f"expected key=value, got {item!r}"})
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML/JSON file of run settings")
    common.add_argument("--seed", type=int)
    common.add_argument("--llm-mode", choices=("stub", "remote"))
    common.add_argument("--out", help="output root directory")
    common.add_argument("--dataset")
    common.add_argument("--format", choices=("csv", "jsonl"))
    common.add_argument("--years", help="e.g. 2006-2010 or 2006,2008")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config key")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="scenegen", description="Service-ecosystem scenario generation")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("ingest", parents=[common], help="load and classify a dataset; write demand series")
    sub.add_parser("network", parents=[common], help="build yearly co-occurrence networks")
    b = sub.add_parser("backbone", parents=[common], help="extract a backbone with one baseline method")
    b.add_argument("--method", choices=bb.METHODS)
    b.add_argument("--param", action="append", metavar="K=V", help="method parameter")
    b.add_argument("--strict-gt", action="store_true", help="global threshold keeps weight > t only")
    sub.add_parser("generate", parents=[common], help="run the agent pipeline and emit scenario sets")
    e = sub.add_parser("evaluate", parents=[common], help="score every method against the expected scenario")
    e.add_argument("--methods", help=f"comma list from {','.join(METHOD_ORDER)}")
    be = sub.add_parser("bench", parents=[common], help="time whole method runs")
    be.add_argument("--methods")
    be.add_argument("--ks", action="store_true", help="report kiloseconds")
    r = sub.add_parser("report", parents=[common], help="write the metric and efficiency tables")
    r.add_argument("--ks", action="store_true")
    return p


def config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides = _kv(args.set, "set")
    for name in ("seed", "llm_mode", "out", "dataset", "format", "years"):
        v = getattr(args, name, None)
        if v is not None:
            overrides[name] = v
    if getattr(args, "method", None):
        overrides["method"] = args.method
    if getattr(args, "strict_gt", False):
        overrides["strict_gt"] = True
    params = _kv(getattr(args, "param", None), "param")
    if params:
        overrides["method_params"] = {k: yaml.safe_load(v) for k, v in params.items()}
    return load_config(args.config, overrides).validate()


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        methods = _methods(getattr(args, "methods", None))
    except ConfigError as exc:
        for k, v in exc.errors.items():
            print(f"config error: {k}: {v}", file=sys.stderr)
        return 2
    try:
        if args.command == "ingest":
            return cmd_ingest(cfg)
        if args.command == "network":
            return cmd_network(cfg)
        if args.command == "backbone":
            return cmd_backbone(cfg)
        if args.command == "generate":
            return cmd_generate(cfg)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, methods)
        if args.command == "bench":
            return cmd_bench(cfg, methods, args.ks)
        return cmd_report(cfg, args.ks)
    except (ValueError, RuntimeError, OSError, LLMError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
