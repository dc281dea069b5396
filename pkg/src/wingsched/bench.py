"""Experiment harness: scenario pipeline, efficiency metric, CSV and summary."""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .errors import IncompleteRunError
from .execution import ExecutionLog, FailureModel, FailureTrace, execute, sample_failures
from .greedy import GreedyConfig, greedy_schedule
from .leftover import ScheduleMatrix, build_initial_leftover, cluster_cities, optimize_leftover
from .nominal import NominalSchedule, build_nominal, check_constraints
from .partitioner import PartitionSet, partition
from .workpart import WorkpartConfig, apply_coa, load_config

VARIANTS = ("proposed-noopt", "proposed-city", "proposed-hole", "greedy-noopt", "greedy-hole")
COLUMNS = (
    "coa", "seed", "method", "opt_mode", "efficiency", "t_min", "t_act", "comp_time_ms",
    "min_pairwise_ft", "leftover_city_count", "opt_time_ms", "sales", "status", "error",
)
TIMING_COLUMNS = ("comp_time_ms", "opt_time_ms")


@dataclass(frozen=True)
class EfficiencyResult:
    t_min: float
    t_act: float
    efficiency: float
    service: tuple[float, ...]
    repair: tuple[float, ...]


def compute_efficiency(
    active: set[int], durations: dict[int, float], log: ExecutionLog, leftover: ScheduleMatrix | None,
) -> EfficiencyResult:
    """Schedule efficiency of a complete two-stage run.

    ``t_min`` spreads all active service time plus all repair time evenly
    over the robots; ``t_act`` is when the last robot finishes.
    """
    n_r = len(log.executed)
    rows = leftover.task_rows() if leftover is not None else [[] for _ in range(n_r)]
    done = log.executed_ids + [t for r in rows for t in r]
    if sorted(done) != sorted(active):
        missing = set(active) - set(done)
        extra = [t for t in done if t not in active]
        raise IncompleteRunError(
            f"run does not cover the active tasks exactly ({len(missing)} missing, {len(extra)} extra)"
        )
    service = []
    finish = []
    row_times = leftover.row_times() if leftover is not None else np.zeros(n_r)
    for i in range(n_r):
        busy = float(np.sum(log.executed[i].end - log.executed[i].start)) + float(row_times[i])
        service.append(busy)
        end = log.makespans[i]
        if leftover is not None and leftover.rows[i]:
            end = leftover.start + float(leftover.row_ends()[i])
        finish.append(end)
    t_min = (sum(durations[t] for t in active) + sum(log.repair_totals)) / n_r
    t_act = max(finish)
    return EfficiencyResult(t_min, t_act, t_min / t_act, tuple(service), tuple(log.repair_totals))


@dataclass
class ExperimentPlan:
    config: WorkpartConfig
    coas: list[str] | None = None
    seeds: list[int] = field(default_factory=lambda: list(range(100)))
    variants: tuple[str, ...] = VARIANTS
    failure_model: FailureModel = FailureModel()
    greedy: GreedyConfig = GreedyConfig()
    overlap_fraction: float = 1.0
    out_dir: Path | None = None
    workers: int = 1
    record_timing: bool = True

    def __post_init__(self):
        names = [c.name for c in self.config.coas]
        if self.coas is None:
            self.coas = names
        if not self.coas or not self.seeds:
            raise ValueError("an experiment needs at least one COA and one seed")
        unknown = [c for c in self.coas if c not in names]
        if unknown:
            raise ValueError(f"unknown COA(s) {unknown}; preset has {names}")
        bad = [v for v in self.variants if v not in VARIANTS]
        if bad:
            raise ValueError(f"unknown variant(s) {bad}; choose from {list(VARIANTS)}")


@dataclass
class CoaContext:
    index: int
    name: str
    active: set[int]
    durations: dict[int, float]
    partition: PartitionSet
    nominal: NominalSchedule
    nominal_ms: float
    certified: bool
    greedy: NominalSchedule | None
    greedy_ms: float


def prepare_coa(config: WorkpartConfig, name: str, overlap_fraction: float, greedy: GreedyConfig | None,
                with_greedy: bool = True) -> CoaContext:
    idx = [c.name for c in config.coas].index(name)
    coa = config.coas[idx]
    tasks = apply_coa(config.spec, coa)
    t0 = time.perf_counter()
    p = partition(tasks, config.geometry, overlap_fraction)
    s = build_nominal(p, config.geometry, config.spec.task_index)
    nominal_ms = (time.perf_counter() - t0) * 1e3
    report = check_constraints(s, config.geometry)
    g, g_ms = None, 0.0
    if with_greedy:
        t0 = time.perf_counter()
        g = greedy_schedule(tasks, config.geometry, greedy).schedule
        g_ms = (time.perf_counter() - t0) * 1e3
    return CoaContext(idx, name, {t.id for t in tasks}, {t.id: t.service_time for t in tasks},
                      p, s, nominal_ms, report.certified and report.sweep_pass, g, g_ms)


def _leftover_stage(ctx: CoaContext, config: WorkpartConfig, schedule: NominalSchedule, trace: FailureTrace,
                    extra: set[int], granularity: str, optimize: bool):
    geom = config.geometry
    log = execute(schedule, trace.truncated(schedule.completion), geom)
    left_ids = sorted(extra | set(log.skipped_ids))
    left = [config.spec.task_index[i] for i in left_ids]
    t0 = time.perf_counter()
    cities = cluster_cities(left, geom, singletons=(granularity == "hole"))
    S = build_initial_leftover(cities, ctx.partition, geom, start=log.completion)
    t1 = time.perf_counter()
    sales = 0
    if optimize:
        res = optimize_leftover(S, geom)
        if res.capped:
            raise RuntimeError(f"market hit its iteration cap after {res.iterations} steps")
        if any(x.sigma_after > x.sigma_before + 1e-12 for x in res.sales):
            raise RuntimeError("a sale widened the utility spread")
        S, sales = res.schedule, len(res.sales)
    t2 = time.perf_counter()
    return log, S, len(cities), (t1 - t0) * 1e3, (t2 - t1) * 1e3, sales


def run_scenario(ctx: CoaContext, config: WorkpartConfig, plan: ExperimentPlan, seed: int) -> list[dict]:
    geom = config.geometry
    horizon = max(ctx.nominal.completion, ctx.greedy.completion if ctx.greedy else 0.0)
    trace = sample_failures(plan.failure_model, geom.robot_count, horizon, seed=[ctx.index, seed])
    out = []
    for variant in plan.variants:
        method, mode = variant.split("-")
        row = {"coa": ctx.name, "seed": seed, "method": method, "opt_mode": mode, "status": "ok", "error": ""}
        try:
            if method == "proposed":
                sched, extra, base_ms = ctx.nominal, set(ctx.partition.relegated_overlap), ctx.nominal_ms
            else:
                sched, extra, base_ms = ctx.greedy, set(), ctx.greedy_ms
            log, S, n_cities, build_ms, opt_ms, sales = _leftover_stage(
                ctx, config, sched, trace, extra, "hole" if mode == "hole" else "city", mode != "noopt")
            eff = compute_efficiency(ctx.active, ctx.durations, log, S)
            min_d = min(log.min_distance, S.min_distance(geom.threshold).min_distance)
            row.update(
                efficiency=eff.efficiency, t_min=eff.t_min, t_act=eff.t_act,
                comp_time_ms=base_ms + build_ms + opt_ms, min_pairwise_ft=min_d,
                leftover_city_count=n_cities, opt_time_ms=opt_ms, sales=sales,
            )
            if not min_d > geom.threshold:
                row["status"] = "violation"
                row["error"] = f"min pairwise distance {min_d:.3f} ft"
            elif eff.efficiency > 1 + 1e-12:
                row["status"] = "violation"
                row["error"] = "efficiency above 1"
        except Exception as exc:  # a failed scenario is recorded, the suite goes on
            row["status"] = "failed"
            row["error"] = f"{type(exc).__name__}: {exc}"
        if not plan.record_timing:
            for k in TIMING_COLUMNS:
                if k in row:
                    row[k] = ""
        out.append(row)
    return out


_CONTEXTS: dict = {}


def _context(plan: ExperimentPlan, name: str) -> CoaContext:
    key = (id(plan.config), name)
    if key not in _CONTEXTS:
        need_greedy = any(v.startswith("greedy") for v in plan.variants)
        _CONTEXTS[key] = prepare_coa(plan.config, name, plan.overlap_fraction, plan.greedy, need_greedy)
    return _CONTEXTS[key]


def _run_chunk(args) -> list[dict]:
    plan, name, seeds = args
    ctx = _context(plan, name)
    rows = []
    for seed in seeds:
        rows.extend(run_scenario(ctx, plan.config, plan, seed))
    return rows


def _order_key(row: dict):
    return (row["coa_index"], row["seed"], VARIANTS.index(f"{row['method']}-{row['opt_mode']}"))


def run_experiment(plan: ExperimentPlan, progress=None) -> list[dict]:
    """Run every (COA, seed, variant) and return rows in a fixed order."""
    names = [c.name for c in plan.config.coas]
    jobs = [(plan, name, [s]) for name in plan.coas for s in plan.seeds]
    rows: list[dict] = []
    if plan.workers > 1:
        with ProcessPoolExecutor(plan.workers) as pool:
            for chunk in pool.map(_run_chunk, jobs):
                rows.extend(chunk)
                if progress:
                    progress(len(rows))
    else:
        for job in jobs:
            rows.extend(_run_chunk(job))
            if progress:
                progress(len(rows))
    for r in rows:
        r["coa_index"] = names.index(r["coa"])
    rows.sort(key=_order_key)
    for r in rows:
        del r["coa_index"]
    if plan.out_dir is not None:
        out = Path(plan.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "results.csv").write_text(to_csv(rows))
        (out / "summary.txt").write_text(format_summary(summarize(rows)))
    return rows


# --- output --------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return str(v)


def to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([_fmt(r.get(c, "")) for c in COLUMNS])
    return buf.getvalue()


def read_csv(path: str | Path) -> list[dict]:
    out = []
    with open(path, newline="") as f:
        for r in csv.DictReader(f):
            row = dict(r)
            row["seed"] = int(row["seed"])
            for k in ("efficiency", "t_min", "t_act", "comp_time_ms", "min_pairwise_ft", "opt_time_ms"):
                row[k] = float(row[k]) if row.get(k) not in (None, "") else None
            for k in ("leftover_city_count", "sales"):
                row[k] = int(row[k]) if row.get(k) not in (None, "") else None
            out.append(row)
    return out


def _describe(values: list[float]) -> dict:
    a = np.asarray(values, dtype=float)
    if not len(a):
        return {"n": 0}
    return {
        "n": int(len(a)),
        "mean": float(a.mean()),
        "std": float(a.std(ddof=1)) if len(a) > 1 else 0.0,
        "min": float(a.min()),
        "max": float(a.max()),
    }


def summarize(rows: list[dict]) -> dict:
    """Per-variant efficiency and timing statistics, per-COA breakdown and
    Welch t statistics for the main comparisons."""
    if not rows:
        raise ValueError("no results to summarize")
    ok = [r for r in rows if r["status"] == "ok"]
    variants = [v for v in VARIANTS if any(f"{r['method']}-{r['opt_mode']}" == v for r in rows)]
    out: dict = {"scenarios": len({(r["coa"], r["seed"]) for r in rows}),
                 "failed": sum(r["status"] != "ok" for r in rows), "variants": {}}
    coas = list(dict.fromkeys(r["coa"] for r in rows))
    eff = {}
    for v in variants:
        vr = [r for r in ok if f"{r['method']}-{r['opt_mode']}" == v]
        eff[v] = [r["efficiency"] for r in vr]
        timing = [r["comp_time_ms"] for r in vr if r.get("comp_time_ms") not in (None, "")]
        opt = [r["opt_time_ms"] for r in vr if r.get("opt_time_ms") not in (None, "")]
        out["variants"][v] = {
            "efficiency": _describe(eff[v]),
            "comp_time_ms": _describe(timing),
            "opt_time_ms": _describe(opt),
            "leftover_cities": _describe([r["leftover_city_count"] for r in vr]),
            "min_pairwise_ft": min((r["min_pairwise_ft"] for r in vr), default=None),
            "per_coa": {c: _describe([r["efficiency"] for r in vr if r["coa"] == c]) for c in coas},
        }
    tests = {}
    for a, b in (("proposed-city", "proposed-noopt"), ("proposed-city", "greedy-hole"),
                 ("proposed-noopt", "greedy-noopt"), ("proposed-hole", "proposed-city")):
        if len(eff.get(a, [])) > 1 and len(eff.get(b, [])) > 1:
            res = stats.ttest_ind(eff[a], eff[b], equal_var=False)
            tests[f"{a} vs {b}"] = {"t": float(res.statistic), "p": float(res.pvalue)}
    out["welch"] = tests
    return out


def format_summary(summary: dict) -> str:
    lines = [f"scenarios: {summary['scenarios']}   failed rows: {summary['failed']}", ""]
    lines.append(f"{'variant':<16}{'mean eff':>10}{'std':>8}{'min':>8}{'comp ms':>10}{'opt ms':>10}{'cities':>8}")
    for v, d in summary["variants"].items():
        e = d["efficiency"]
        if not e.get("n"):
            lines.append(f"{v:<16}  (no successful runs)")
            continue
        c = d["comp_time_ms"].get("mean", float("nan"))
        o = d["opt_time_ms"].get("mean", float("nan"))
        n = d["leftover_cities"].get("mean", float("nan"))
        lines.append(f"{v:<16}{100 * e['mean']:>9.2f}%{100 * e['std']:>7.2f}{100 * e['min']:>7.2f}%"
                     f"{c:>10.1f}{o:>10.1f}{n:>8.1f}")
    lines.append("")
    lines.append("per-COA mean efficiency (%)")
    for v, d in summary["variants"].items():
        cells = "  ".join(f"{c}={100 * s['mean']:.2f}" for c, s in d["per_coa"].items() if s.get("n"))
        lines.append(f"  {v:<16}{cells}")
    if summary["welch"]:
        lines.append("")
        lines.append("Welch t tests")
        for k, r in summary["welch"].items():
            lines.append(f"  {k:<36} t={r['t']:.2f}  p={r['p']:.3g}")
    return "\n".join(lines) + "\n"


def load_plan(config_source: str | Path, **kw) -> ExperimentPlan:
    return ExperimentPlan(load_config(config_source), **kw)
