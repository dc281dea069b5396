"""HTTP front end over the scheduling pipeline.

Every request names the workpart either by preset or by an inline
configuration document, so the service holds no session state beyond a
small cache of prepared COAs.
"""

from __future__ import annotations

import json
import math
from collections import OrderedDict
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import bench
from ..errors import ConstraintError, LeftoverError, ModelError, PartitionError
from ..execution import FailureModel, execute, sample_failures
from ..greedy import GreedyConfig
from ..leftover import build_initial_leftover, cluster_cities, optimize_leftover
from ..nominal import check_constraints
from ..timeline import collision_monitor
from ..workpart import PRESETS, WorkpartConfig
from . import schemas as m

app = FastAPI(title="wingsched", version="0.1.0")

_CACHE_SIZE = 16
_configs: OrderedDict[str, WorkpartConfig] = OrderedDict()
_contexts: OrderedDict[tuple, bench.CoaContext] = OrderedDict()


def _remember(cache: OrderedDict, key, make):
    if key in cache:
        cache.move_to_end(key)
        return cache[key]
    val = cache[key] = make()
    if len(cache) > _CACHE_SIZE:
        cache.popitem(last=False)
    return val


def clean(obj):
    """JSON-safe copy: numpy scalars become Python numbers, non-finite floats
    become ``None``."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        seq = sorted(obj) if isinstance(obj, (set, frozenset)) else obj
        return [clean(v) for v in seq]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def _config(ref: m.ConfigRef) -> tuple[str, WorkpartConfig]:
    if ref.config is not None:
        key = json.dumps(ref.config, sort_keys=True)
        return key, _remember(_configs, key, lambda: WorkpartConfig.from_dict(ref.config))
    if ref.preset not in PRESETS:
        raise HTTPException(404, f"unknown preset {ref.preset!r}; available: {sorted(PRESETS)}")
    key = f"preset:{ref.preset}"
    return key, _remember(_configs, key, PRESETS[ref.preset])


def _coa_name(cfg: WorkpartConfig, name: str | None) -> str:
    names = [c.name for c in cfg.coas]
    if not names:
        raise HTTPException(422, "configuration defines no COA")
    if name is None:
        return names[0]
    if name not in names:
        raise HTTPException(404, f"unknown COA {name!r}; available: {names}")
    return name


def _greedy(g: m.GreedyIn) -> GreedyConfig:
    return GreedyConfig(**g.model_dump())


def _context(req: m.CoaRequest, with_greedy: bool) -> tuple[WorkpartConfig, bench.CoaContext]:
    key, cfg = _config(req.source)
    name = _coa_name(cfg, req.coa)
    g = _greedy(req.greedy) if isinstance(req, m.ScheduleRequest) else GreedyConfig()
    ck = (key, name, req.overlap_fraction, tuple(sorted(g.to_dict().items())), with_greedy)
    try:
        ctx = _remember(_contexts, ck, lambda: bench.prepare_coa(cfg, name, req.overlap_fraction, g, with_greedy))
    except (ModelError, PartitionError, ConstraintError) as exc:
        raise HTTPException(422, f"{type(exc).__name__}: {exc}") from exc
    return cfg, ctx


def _method_schedule(ctx: bench.CoaContext, method: str):
    if method == "proposed":
        return ctx.nominal, set(ctx.partition.relegated_overlap)
    return ctx.greedy, set()


def _trace(cfg: WorkpartConfig, ctx: bench.CoaContext, req: m.SimulateRequest):
    model = FailureModel(**req.failures.model_dump())
    horizon = max(ctx.nominal.completion, ctx.greedy.completion if ctx.greedy else 0.0)
    return sample_failures(model, cfg.geometry.robot_count, horizon, seed=[ctx.index, req.seed])


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "presets": sorted(PRESETS)}


@app.post("/wing", response_model=m.WingResponse)
def wing(req: m.WingRequest) -> dict:
    _, cfg = _config(req.source)
    return clean({
        "config": cfg.to_dict(),
        "task_count": len(cfg.spec.tasks),
        "coas": {c.name: len(c.active_tasks) for c in cfg.coas},
        "robots": cfg.geometry.robot_count,
        "threshold": cfg.geometry.threshold,
    })


@app.post("/partition", response_model=m.PartitionResponse)
def partition_endpoint(req: m.CoaRequest) -> dict:
    _, ctx = _context(req, with_greedy=False)
    return clean({"coa": ctx.name, "imbalance": ctx.partition.imbalance, "partition": ctx.partition.to_dict()})


@app.post("/schedule", response_model=m.ScheduleResponse)
def schedule(req: m.ScheduleRequest) -> dict:
    cfg, ctx = _context(req, with_greedy=req.method == "greedy")
    s, _ = _method_schedule(ctx, req.method)
    report = None
    if req.method == "proposed":
        report = check_constraints(s, cfg.geometry)
        min_d, certified = report.min_distance, report.certified and report.sweep_pass
    else:
        min_d, certified = collision_monitor(s.tracks, cfg.geometry.threshold).min_distance, None
    return clean({
        "coa": ctx.name,
        "threshold": cfg.geometry.threshold,
        "method": req.method,
        "completion": s.completion,
        "makespans": s.makespans,
        "certified": certified,
        "min_distance": min_d,
        "constraints": None if report is None else report.to_dict(),
        "schedule": s.to_dict(),
    })


@app.post("/simulate", response_model=m.SimulateResponse)
def simulate(req: m.SimulateRequest) -> dict:
    cfg, ctx = _context(req, with_greedy=True)
    s, extra = _method_schedule(ctx, req.method)
    trace = _trace(cfg, ctx, req)
    log = execute(s, trace.truncated(s.completion), cfg.geometry)
    return clean({
        "coa": ctx.name,
        "method": req.method,
        "threshold": cfg.geometry.threshold,
        "seed": req.seed,
        "completion": log.completion,
        "min_distance": log.min_distance,
        "first_violation": log.first_violation,
        "executed": len(log.executed_ids),
        "skipped": log.skipped_ids,
        "leftover": sorted(extra | set(log.skipped_ids)),
        "log": log.to_dict(),
    })


@app.post("/optimize", response_model=m.OptimizeResponse)
def optimize(req: m.OptimizeRequest) -> dict:
    cfg, ctx = _context(req, with_greedy=True)
    geom = cfg.geometry
    s, extra = _method_schedule(ctx, req.method)
    log = execute(s, _trace(cfg, ctx, req).truncated(s.completion), geom)
    left = [cfg.spec.task_index[i] for i in sorted(extra | set(log.skipped_ids))]
    try:
        cities = cluster_cities(left, geom, singletons=req.granularity == "hole")
        initial = build_initial_leftover(cities, ctx.partition, geom, start=log.completion)
    except LeftoverError as exc:
        raise HTTPException(422, f"LeftoverError: {exc}") from exc
    final, sales, capped = initial, [], False
    if req.optimize:
        res = optimize_leftover(initial, geom, req.beta)
        final, sales, capped = res.schedule, res.trace(), res.capped
    eff = bench.compute_efficiency(ctx.active, ctx.durations, log, final)
    min_d = min(log.min_distance, final.min_distance(geom.threshold).min_distance)
    return clean({
        "coa": ctx.name,
        "method": req.method,
        "threshold": cfg.geometry.threshold,
        "seed": req.seed,
        "efficiency": eff.efficiency,
        "t_min": eff.t_min,
        "t_act": eff.t_act,
        "cities": len(cities),
        "sales": sales,
        "capped": capped,
        "min_distance": min_d,
        "initial": initial.to_dict(),
        "final": final.to_dict(),
    })


@app.post("/bench", response_model=m.BenchResponse)
def bench_endpoint(req: m.BenchRequest) -> dict:
    _, cfg = _config(req.source)
    try:
        plan = bench.ExperimentPlan(
            cfg, coas=req.coas, seeds=list(req.seeds), variants=tuple(req.variants),
            failure_model=FailureModel(**req.failures.model_dump()), greedy=_greedy(req.greedy),
            overlap_fraction=req.overlap_fraction, out_dir=Path(req.out_dir) if req.out_dir else None,
            workers=req.workers, record_timing=req.record_timing,
        )
    except ValueError as exc:
        raise HTTPException(422, str(exc)) from exc
    rows = bench.run_experiment(plan)
    summary = bench.summarize(rows)
    return clean({"rows": rows, "csv": bench.to_csv(rows), "summary": summary,
                  "report": bench.format_summary(summary)})


@app.post("/report", response_model=m.ReportResponse)
def report(req: m.ReportRequest) -> dict:
    try:
        summary = bench.summarize(req.rows)
    except (KeyError, TypeError, ValueError) as exc:
        raise HTTPException(422, f"malformed result rows: {exc}") from exc
    return clean({"summary": summary, "report": bench.format_summary(summary)})
