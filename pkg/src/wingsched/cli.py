"""Command-line client for the scheduling service.

Without ``--server`` the service runs in-process; with it, requests go to a
running instance over HTTP. Exit status is 1 on any invariant violation and
2 on request errors.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import sys
import warnings
from pathlib import Path

from .bench import VARIANTS, read_csv

EXIT_VIOLATION = 1
EXIT_ERROR = 2


def parse_seeds(text: str) -> list[int]:
    """``"0-99"``, ``"3"`` or ``"1,4,7-9"`` to a sorted list of seeds."""
    out: set[int] = set()
    for part in filter(None, (p.strip() for p in text.split(","))):
        lo, _, hi = part.partition("-")
        lo_i, hi_i = int(lo), int(hi or lo)
        if hi_i < lo_i:
            raise ValueError(f"empty seed range {part!r}")
        out.update(range(lo_i, hi_i + 1))
    if not out:
        raise ValueError("no seeds given")
    return sorted(out)


def _seeds_arg(text: str) -> list[int]:
    try:
        return parse_seeds(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _variants_arg(text: str) -> list[str]:
    items = [v.strip() for v in text.split(",") if v.strip()]
    bad = [v for v in items if v not in VARIANTS]
    if bad or not items:
        raise argparse.ArgumentTypeError(f"variants must be drawn from {','.join(VARIANTS)}")
    return items


@contextlib.contextmanager
def connect(server: str | None):
    if server:
        import httpx

        with httpx.Client(base_url=server, timeout=None) as client:
            yield client
    else:
        with warnings.catch_warnings():
            warnings.filterwarnings("ignore", message="Using `httpx`")
            from starlette.testclient import TestClient

        from .service.app import app

        with TestClient(app) as client:
            yield client


def _source(args) -> dict:
    if args.config:
        return {"config": json.loads(Path(args.config).read_text())}
    return {"preset": args.preset}


def _emit(args, payload) -> None:
    text = json.dumps(payload, indent=1)
    if getattr(args, "out", None):
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text + "\n")
    elif args.json:
        print(text)


def _fmt_ft(v) -> str:
    return "n/a" if v is None else f"{v:.3f} ft"


def _coa_body(args) -> dict:
    return {"source": _source(args), "coa": args.coa, "overlap_fraction": args.overlap}


def _method_body(args) -> dict:
    return {"method": args.method}


def cmd_wing(client, args) -> int:
    r = _post(client, "/wing", {"source": _source(args)})
    if args.out:
        Path(args.out).write_text(json.dumps(r["config"], indent=1) + "\n")
    elif args.json:
        print(json.dumps(r["config"], indent=1))
    print(f"tasks: {r['task_count']}  robots: {r['robots']}  threshold: {r['threshold']} ft", file=sys.stderr)
    for name, n in r["coas"].items():
        print(f"  {name}: {n} active tasks", file=sys.stderr)
    return 0


def cmd_partition(client, args) -> int:
    r = _post(client, "/partition", _coa_body(args))
    _emit(args, r)
    for p in r["partition"]["partitions"]:
        print(f"r{p['robot'] + 1} {p['side']:<6} x=[{p['interval'][0]:.2f}, {p['interval'][1]:.2f}] "
              f"service {p['service_time']:.1f} s  tasks {len(p['tasks'])}")
    print(f"{r['coa']}: imbalance {r['imbalance']:.2f} s, "
          f"{len(r['partition']['relegated_overlap'])} band tasks relegated")
    return 0


def cmd_schedule(client, args) -> int:
    r = _post(client, "/schedule", {**_coa_body(args), **_method_body(args)})
    _emit(args, r)
    spans = " ".join(f"{v:.0f}" for v in r["makespans"])
    print(f"{r['coa']} {r['method']}: completion {r['completion']:.1f} s, makespans [{spans}], "
          f"min distance {_fmt_ft(r['min_distance'])}")
    if r["method"] == "proposed":
        c = r["constraints"]
        print(f"  certificate: {'pass' if c['certified'] else 'FAIL'}  sweep: {'pass' if c['sweep_pass'] else 'FAIL'}")
        return 0 if r["certified"] else EXIT_VIOLATION
    return 0 if _safe(r) else EXIT_VIOLATION


def _safe(r: dict) -> bool:
    return r["min_distance"] is None or r["min_distance"] > r["threshold"]


def cmd_simulate(client, args) -> int:
    body = {**_coa_body(args), **_method_body(args), "seed": args.seed}
    r = _post(client, "/simulate", body)
    _emit(args, r)
    print(f"{r['coa']} {r['method']} seed {r['seed']}: completion {r['completion']:.1f} s, "
          f"{r['executed']} executed, {len(r['skipped'])} skipped, {len(r['leftover'])} leftover, "
          f"min distance {_fmt_ft(r['min_distance'])}")
    return 0 if _safe(r) else EXIT_VIOLATION


def cmd_optimize(client, args) -> int:
    body = {**_coa_body(args), **_method_body(args), "seed": args.seed,
            "granularity": args.granularity, "optimize": not args.no_opt}
    r = _post(client, "/optimize", body)
    _emit(args, r)
    print(f"{r['coa']} {r['method']} seed {r['seed']} {args.granularity}: {r['cities']} cities, "
          f"{len(r['sales'])} sales, efficiency {100 * r['efficiency']:.2f}%, "
          f"min distance {_fmt_ft(r['min_distance'])}")
    ok = _safe(r) and r["efficiency"] <= 1 + 1e-12 and not r["capped"]
    return 0 if ok else EXIT_VIOLATION


def cmd_bench(client, args) -> int:
    body = {
        "source": _source(args), "coas": args.coas, "seeds": args.seeds, "variants": args.variants,
        "overlap_fraction": args.overlap, "workers": args.workers, "record_timing": not args.no_timing,
    }
    r = _post(client, "/bench", body)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "results.csv").write_text(r["csv"])
    (out / "summary.txt").write_text(r["report"])
    (out / "summary.json").write_text(json.dumps(r["summary"], indent=1) + "\n")
    print(r["report"], end="")
    bad = [row for row in r["rows"] if row["status"] != "ok"]
    for row in bad[:20]:
        print(f"  {row['status']}: {row['coa']} seed {row['seed']} {row['method']}-{row['opt_mode']}: "
              f"{row['error']}", file=sys.stderr)
    return EXIT_VIOLATION if bad else 0


def cmd_report(client, args) -> int:
    rows = read_csv(args.results)
    r = _post(client, "/report", {"rows": rows})
    if args.json:
        print(json.dumps(r["summary"], indent=1))
    else:
        print(r["report"], end="")
    return EXIT_VIOLATION if r["summary"]["failed"] else 0


class RequestFailed(Exception):
    pass


def _post(client, path: str, body: dict) -> dict:
    resp = client.post(path, json=body)
    if resp.status_code >= 400:
        try:
            detail = resp.json().get("detail")
        except ValueError:
            detail = resp.text
        raise RequestFailed(f"{path}: HTTP {resp.status_code}: {detail}")
    return resp.json()


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wingsched", description="Collision-free scheduling of a two-pair drilling cell.")
    ap.add_argument("--server", metavar="URL", help="use a running service instead of an in-process one")
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--preset", default="benchmark", help="named workpart preset (default: benchmark)")
    src.add_argument("--config", metavar="PATH", help="JSON workpart configuration")
    common.add_argument("--json", action="store_true", help="print the full response as JSON")

    coa = argparse.ArgumentParser(add_help=False)
    coa.add_argument("--coa", help="COA name (default: first in the configuration)")
    coa.add_argument("--overlap", type=float, default=1.0, help="fraction of band tasks held back for leftovers")
    coa.add_argument("--out", metavar="PATH", help="write the full response JSON here")

    method = argparse.ArgumentParser(add_help=False)
    method.add_argument("--method", choices=("proposed", "greedy"), default="proposed")

    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("wing", parents=[common], help="emit the workpart configuration")
    p.add_argument("--out", metavar="PATH", help="write the configuration JSON here")
    p.set_defaults(func=cmd_wing)

    p = sub.add_parser("partition", parents=[common, coa], help="partition one COA")
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("schedule", parents=[common, coa, method], help="nominal schedule and its certificate")
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("simulate", parents=[common, coa, method], help="execute one failure instance")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("optimize", parents=[common, coa, method], help="leftover schedule and market optimisation")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--granularity", choices=("city", "hole"), default="city")
    p.add_argument("--no-opt", action="store_true", help="keep the initial leftover schedule")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("bench", parents=[common], help="run the experiment matrix")
    p.add_argument("--coas", type=lambda s: [c for c in s.split(",") if c], help="comma-separated COA names")
    p.add_argument("--seeds", type=_seeds_arg, default=list(range(100)), help="e.g. 0-99 or 1,5,9 (default 0-99)")
    p.add_argument("--variants", type=_variants_arg, default=list(VARIANTS),
                   help=f"comma-separated subset of {','.join(VARIANTS)}")
    p.add_argument("--overlap", type=float, default=1.0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out-dir", default="results", help="directory for results.csv and summary files")
    p.add_argument("--no-timing", action="store_true", help="blank timing columns so reruns are byte-identical")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("report", parents=[common], help="summarise a results CSV")
    p.add_argument("results", help="results.csv written by bench")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with connect(args.server) as client:
            return args.func(client, args)
    except RequestFailed as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
