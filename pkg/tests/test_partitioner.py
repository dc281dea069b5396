import functools
import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wingsched.errors import PartitionError
from wingsched.partitioner import partition, partition_from_cuts, rebalance_pairwise
from wingsched.workpart import (
    BOTTOM, TOP, RobotGeometry, RobotSpec, Task, apply_coa, benchmark_config,
    coa_from_omissions,
)


def one_pair(length=20.0, band=100.0):
    return RobotGeometry((
        RobotSpec(0, 0, BOTTOM, (length / 2, -60.0), (0.0, length)),
        RobotSpec(1, 0, TOP, (length / 2, 60.0), (0.0, length)),
    ), band_width=band)


def task(i, x, y, t=1.0):
    return Task(i, x, y, t, "spar", 0, 0, i, TOP if y >= 0 else BOTTOM)


def robot_times(p):
    return [part.total_service_time for part in p.partitions]


def check_tiling(p, tasks):
    ids = [i for part in p.partitions for i in part.task_ids]
    assert len(ids) == len(set(ids))
    assert set(ids) | set(p.relegated_overlap) == {t.id for t in tasks}
    assert not set(ids) & set(p.relegated_overlap)


def test_benchmark_partitions_balanced(config, contexts):
    for ctx, coa in zip(contexts, config.coas):
        p = ctx.partition
        assert len(p.partitions) == 4
        times = robot_times(p)
        assert max(times) - min(times) <= 30.0
        assert not p.balance_violation
        check_tiling(p, apply_coa(config.spec, coa))


def test_pairs_share_axial_boundaries(coa1):
    parts = coa1.partition.partitions
    for i in range(0, 4, 2):
        assert (parts[i].x_start, parts[i].x_end) == (parts[i + 1].x_start, parts[i + 1].x_end)
        assert parts[i].side == BOTTOM and parts[i + 1].side == TOP
        assert parts[i].x_end - parts[i].x_start >= 6.0


def test_relegated_tasks_are_shared_middle_spar(coa1, spec, geom):
    rel = coa1.partition.relegated_overlap
    mids = {t.id for t in spec.tasks if t.feature == "spar" and geom.in_band(t.y)}
    assert rel == mids
    for i in rel:
        t = spec.task_index[i]
        assert len(geom.reach_matrix([t])[:, 0].nonzero()[0]) >= 2


def test_partition_sequences_axial(coa1, spec):
    for part in coa1.partition.partitions:
        xs = [spec.task_index[i].x for i in part.task_ids]
        assert xs == sorted(xs)


def test_offsets_span_interval(coa1):
    for part in coa1.partition.partitions:
        if part.side == TOP:
            off = part.offset
            assert off is not None
            assert off.length + off.length_star == pytest.approx(part.x_end - part.x_start)
            assert off.length > 3.0 and off.length_star > 3.0
            assert off.time + off.time_star == pytest.approx(part.total_service_time)


def test_deterministic(spec, geom):
    tasks = apply_coa(spec, coa_from_omissions(spec, "x", ["rib8"]))
    assert partition(tasks, geom) == partition(tasks, geom)


def test_two_identical_tasks_split_evenly():
    tasks = [task(0, 0.0, -1.0), task(1, 10.0, 1.0)]
    p = partition(tasks, one_pair(), 0.0, offsets=False)
    assert sorted(len(part.task_ids) for part in p.partitions) == [1, 1]
    assert robot_times(p) == [1.0, 1.0]


def test_seven_unit_tasks_exhaustive_cut():
    tasks = [task(k, 2.0 * k, k - 3.0) for k in range(7)]
    best = min(abs(c - (7 - c)) for c in range(8))
    p = partition(tasks, one_pair(), 0.0, offsets=False)
    times = robot_times(p)
    assert max(times) - min(times) == best == 1
    assert sorted(times) == [3.0, 4.0]


def test_rebalance_skewed_split():
    tasks = [task(k, 2.0 * k, k - 4.5) for k in range(10)]
    skewed = partition_from_cuts(tasks, one_pair(), [8], [10])
    assert sorted(robot_times(skewed)) == [2.0, 8.0]
    fixed = rebalance_pairwise(skewed, tasks, one_pair(), offsets=False)
    assert robot_times(fixed) == [5.0, 5.0]


def test_rebalance_fixed_point(coa1, spec, geom):
    tasks = apply_coa(spec, coa_from_omissions(spec, "COA1", []))
    again = rebalance_pairwise(coa1.partition, [t for t in tasks if t.id not in coa1.partition.relegated_overlap],
                               geom)
    assert robot_times(again) == robot_times(coa1.partition)


def test_rebalance_never_worse(config, contexts, geom):
    for ctx, coa in zip(contexts, config.coas):
        tasks = [t for t in apply_coa(config.spec, coa) if t.id not in ctx.partition.relegated_overlap]
        before = robot_times(ctx.partition)
        after = robot_times(rebalance_pairwise(ctx.partition, tasks, geom))
        assert max(after) - min(after) <= max(before) - min(before) + 1e-9


def test_brute_force_pair_cut_matches_partitioner():
    # exhaustive over pair cuts and per-pair bottom counts; the partitioner must land within one task time
    geom = RobotGeometry((
        RobotSpec(0, 0, BOTTOM, (0, -60), (0.0, 30.0)), RobotSpec(1, 0, TOP, (0, 60), (0.0, 30.0)),
        RobotSpec(2, 1, BOTTOM, (0, -60), (0.0, 30.0)), RobotSpec(3, 1, TOP, (0, 60), (0.0, 30.0)),
    ), band_width=100.0)
    tasks = [task(k, 2.5 * k, (-1) ** k * 0.5, 1.0 + (k % 3)) for k in range(12)]
    ordered = sorted(tasks, key=lambda t: (t.x, t.y))
    best = float("inf")
    for cut in range(1, 12):
        a, b = ordered[:cut], ordered[cut:]
        for na, nb in itertools.product(range(len(a) + 1), range(len(b) + 1)):
            sa = sorted(a, key=lambda t: (t.y, t.x))
            sb = sorted(b, key=lambda t: (t.y, t.x))
            times = [sum(t.service_time for t in sa[:na]), sum(t.service_time for t in sa[na:]),
                     sum(t.service_time for t in sb[:nb]), sum(t.service_time for t in sb[nb:])]
            best = min(best, max(times) - min(times))
    p = partition(tasks, geom, 0.0, offsets=False)
    times = robot_times(p)
    assert max(times) - min(times) <= max(best, max(t.service_time for t in tasks))


def test_overlap_fraction_range(spec, geom):
    with pytest.raises(PartitionError):
        partition(list(spec.tasks), geom, 1.5)


def test_short_partition_is_hard_error():
    tasks = [task(0, 0.0, -1.0), task(1, 2.0, 1.0)]
    with pytest.raises(PartitionError):
        partition(tasks, one_pair(), 0.0, offsets=False)


def test_imbalance_beyond_one_task_flagged():
    tasks = [task(k, 2.0 * k, k - 4.5) for k in range(10)]
    assert partition_from_cuts(tasks, one_pair(), [8], [10]).balance_violation
    assert not partition_from_cuts(tasks, one_pair(), [5], [10]).balance_violation


def test_dominant_task_within_tolerance_not_flagged():
    tasks = [task(0, 0.0, -1.0, 100.0), task(1, 8.0, 1.0, 1.0), task(2, 9.0, 1.5, 1.0)]
    p = partition(tasks, one_pair(), 0.0, offsets=False)
    assert robot_times(p) == [100.0, 2.0]
    assert not p.balance_violation


LABELS = [f"rib{k}" for k in range(2, 15)] + [f"spar{s}:seg{g}" for s in (0, 2) for g in range(14)]


@given(st.sets(st.sampled_from(LABELS), max_size=4))
@settings(max_examples=15, deadline=None)
def test_random_coas_tile_and_balance(omitted):
    cfg = _cfg()
    tasks = apply_coa(cfg.spec, coa_from_omissions(cfg.spec, "r", sorted(omitted)))
    p = partition(tasks, cfg.geometry)
    check_tiling(p, tasks)
    times = robot_times(p)
    assert max(times) - min(times) <= max(t.service_time for t in tasks)


@functools.lru_cache(maxsize=1)
def _cfg():
    return benchmark_config()
