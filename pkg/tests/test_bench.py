import pytest

from wingsched.bench import (
    VARIANTS, ExperimentPlan, compute_efficiency, read_csv, run_experiment, summarize, to_csv,
)
from wingsched.errors import IncompleteRunError
from wingsched.execution import FailureModel, FailureTrace, execute
from wingsched.leftover import City, ScheduleMatrix
from wingsched.nominal import NominalSchedule, RobotPlan
from wingsched.timeline import Track
from wingsched.workpart import BOTTOM, TOP, RobotGeometry, RobotSpec

NO_FAILURES = FailureModel(first_mean=1e9, first_std=1.0)


def pair():
    return RobotGeometry((RobotSpec(0, 0, BOTTOM, (0, -60), (0.0, 100.0)),
                          RobotSpec(1, 0, TOP, (0, 60), (0.0, 100.0))), band_width=100.0)


def run_rows(rows, trace=None):
    plans = []
    for r, row in enumerate(rows):
        t, starts, ends, xs = 0.0, [], [], []
        for i, d in row:
            starts.append(t)
            t += d
            ends.append(t)
            xs.append(50.0 * r + i)
        plans.append(RobotPlan(r, Track.from_points([i for i, _ in row], starts, ends, xs, [0.0] * len(row))
                               if row else Track.empty(), 0.0, 100.0))
    s = NominalSchedule(plans)
    trace = trace or FailureTrace(((), ()), 1e6)
    return execute(s, trace, pair())


def test_unbalanced_pair_half_efficient():
    log = run_rows([[(0, 10.0), (1, 10.0)], []])
    eff = compute_efficiency({0, 1}, {0: 10.0, 1: 10.0}, log, None)
    assert (eff.t_min, eff.t_act, eff.efficiency) == (10.0, 20.0, 0.5)


def test_balanced_no_idle_is_one():
    log = run_rows([[(0, 7.0)], [(1, 7.0)]])
    assert compute_efficiency({0, 1}, {0: 7.0, 1: 7.0}, log, None).efficiency == 1.0


def test_repair_time_counts_in_both_terms():
    trace = FailureTrace((((0.0, 2.0),), ()), 1e6)
    log = run_rows([[(0, 3.0), (1, 3.0)], [(2, 6.0)]], trace)
    # task 0 is skipped and redone in a leftover row on robot 0 after t = 6
    left = ScheduleMatrix([[0], []], [City(0, (0,), 3.0, 0.0, 0.0, 0.0, 0.0, frozenset({0}))], start=6.0)
    eff = compute_efficiency({0, 1, 2}, {0: 3.0, 1: 3.0, 2: 6.0}, log, left)
    assert eff.t_min == (12.0 + 2.0) / 2
    assert eff.t_act == 9.0
    assert eff.repair == (2.0, 0.0)


def test_leftover_hold_extends_finish():
    log = run_rows([[(0, 5.0)], [(1, 5.0)]])
    cities = [City(0, (2,), 2.0, 0.0, 0.0, 0.0, 0.0, frozenset({0, 1}))]
    left = ScheduleMatrix([[], [0]], cities, start=5.0, holds=[0.0, 3.0])
    eff = compute_efficiency({0, 1, 2}, {0: 5.0, 1: 5.0, 2: 2.0}, log, left)
    assert eff.t_act == 10.0


def test_incomplete_run_rejected():
    log = run_rows([[(0, 5.0)], []])
    with pytest.raises(IncompleteRunError):
        compute_efficiency({0, 1}, {0: 5.0, 1: 5.0}, log, None)


def test_plan_validation(config):
    with pytest.raises(ValueError):
        ExperimentPlan(config, seeds=[])
    with pytest.raises(ValueError):
        ExperimentPlan(config, coas=["COA9"])
    with pytest.raises(ValueError):
        ExperimentPlan(config, variants=("proposed-fast",))


def test_failure_free_scenario_near_ideal(config):
    rows = run_experiment(ExperimentPlan(config, coas=["COA1"], seeds=[0], failure_model=NO_FAILURES,
                                         variants=("proposed-noopt",)))
    (row,) = rows
    assert row["status"] == "ok"
    assert 0.99 <= row["efficiency"] <= 1.0


def test_replay_is_byte_identical(config, tmp_path):
    kw = dict(coas=["COA2"], seeds=[3, 4], record_timing=False)
    a = run_experiment(ExperimentPlan(config, out_dir=tmp_path / "a", **kw))
    b = run_experiment(ExperimentPlan(config, out_dir=tmp_path / "b", workers=2, **kw))
    text = (tmp_path / "a" / "results.csv").read_bytes()
    assert text == (tmp_path / "b" / "results.csv").read_bytes()
    assert to_csv(a) == to_csv(b)
    assert [(r["seed"], f"{r['method']}-{r['opt_mode']}") for r in a] == [(s, v) for s in (3, 4) for v in VARIANTS]
    back = read_csv(tmp_path / "a" / "results.csv")
    assert [r["efficiency"] for r in back] == [r["efficiency"] for r in a]
    for r in a:
        assert r["status"] == "ok"
        assert r["efficiency"] <= 1.0 and r["min_pairwise_ft"] > 3.0
        assert r["comp_time_ms"] == ""


def test_summary_of_single_row():
    row = {"coa": "COA1", "seed": 0, "method": "proposed", "opt_mode": "city", "status": "ok",
           "efficiency": 0.97, "comp_time_ms": 5.0, "opt_time_ms": 1.0, "leftover_city_count": 40,
           "min_pairwise_ft": 3.5}
    s = summarize([row])
    e = s["variants"]["proposed-city"]["efficiency"]
    assert (e["mean"], e["std"], e["min"]) == (0.97, 0.0, 0.97)
    assert s["welch"] == {}


def test_summary_needs_rows():
    with pytest.raises(ValueError):
        summarize([])
