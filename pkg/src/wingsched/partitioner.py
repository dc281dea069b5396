"""Fair partitioning of the active tasks into one region per robot.

Pairs get contiguous axial slices (cut in (x, y) order), each pair is split
transversely into a bottom and a top region, and a local search then shifts
single boundary tasks between neighbouring regions while that narrows the
spread of per-robot service times. Top robots receive a start offset inside
their region.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import PartitionError
from .workpart import BOTTOM, TOP, RobotGeometry, Task

log = logging.getLogger(__name__)

DEFAULT_STAGGER = 0.1


@dataclass(frozen=True)
class Offset:
    index: int  # position in the axially ordered task list where the robot starts
    length: float  # l_t: partition start to offset point
    length_star: float  # l_t*: offset point to partition end
    time: float  # t_t: service time before the offset point
    time_star: float  # t_t*: service time from the offset point to the end


@dataclass(frozen=True)
class Partition:
    robot: int
    task_ids: tuple[int, ...]  # ordered by (x, y)
    x_start: float
    x_end: float
    side: str
    total_service_time: float
    offset: Offset | None = None

    @property
    def length(self) -> float:
        return self.x_end - self.x_start


@dataclass(frozen=True)
class PartitionSet:
    partitions: tuple[Partition, ...]
    relegated_overlap: frozenset[int]
    pair_makespans: tuple[float, ...]
    top_makespans: tuple[float, ...]
    bottom_makespans: tuple[float, ...]
    balance_violation: bool = False
    notes: tuple[str, ...] = field(default=())

    @property
    def imbalance(self) -> float:
        times = [p.total_service_time for p in self.partitions]
        return max(times) - min(times)

    @property
    def pair_intervals(self) -> list[tuple[float, float]]:
        return [(self.partitions[2 * i].x_start, self.partitions[2 * i].x_end)
                for i in range(len(self.partitions) // 2)]

    def to_dict(self) -> dict:
        return {
            "relegated_overlap": sorted(self.relegated_overlap),
            "balance_violation": self.balance_violation,
            "partitions": [
                {
                    "robot": p.robot,
                    "side": p.side,
                    "interval": [p.x_start, p.x_end],
                    "service_time": p.total_service_time,
                    "offset": None if p.offset is None else {
                        "index": p.offset.index,
                        "l_t": p.offset.length,
                        "l_t_star": p.offset.length_star,
                        "t_t": p.offset.time,
                        "t_t_star": p.offset.time_star,
                    },
                    "tasks": list(p.task_ids),
                }
                for p in self.partitions
            ],
        }


def _axial_key(t: Task):
    return (t.x, t.y, t.id)


def _transverse_key(t: Task):
    return (t.y, t.x, t.id)


def select_relegated(tasks: list[Task], geom: RobotGeometry, fraction: float) -> frozenset[int]:
    """Evenly thinned subset of the middle-spar tasks inside the overlap band."""
    pool = sorted((t for t in tasks if t.feature == "spar" and geom.in_band(t.y)), key=_axial_key)
    if fraction <= 0 or not pool:
        return frozenset()
    chosen = [t.id for k, t in enumerate(pool) if math.floor((k + 1) * fraction) > math.floor(k * fraction)]
    return frozenset(chosen)


class _State:
    """Pair cuts over the axial order plus a transverse threshold per pair.

    Thresholds are ranks in the global (y, x, id) order: a pair member goes
    to the bottom robot when its rank is below the pair's threshold.
    """

    def __init__(self, tasks: list[Task], pairs: int, cuts: list[int], thresholds: list[int]):
        self.tasks = tasks
        self.pairs = pairs
        self.cuts = cuts  # len pairs+1, cuts[0]=0, cuts[-1]=n
        self.thresholds = thresholds
        self.times = np.array([t.service_time for t in tasks])
        order = sorted(range(len(tasks)), key=lambda k: _transverse_key(tasks[k]))
        self.trank = np.empty(len(tasks), dtype=np.int64)
        self.trank[order] = np.arange(len(tasks))

    def members(self, pair: int) -> range:
        return range(self.cuts[pair], self.cuts[pair + 1])

    def robot_times(self, cuts=None, thresholds=None) -> np.ndarray:
        cuts = self.cuts if cuts is None else cuts
        thresholds = self.thresholds if thresholds is None else thresholds
        out = np.zeros(2 * self.pairs)
        for p in range(self.pairs):
            sl = slice(cuts[p], cuts[p + 1])
            top = self.trank[sl] >= thresholds[p]
            t = self.times[sl]
            out[2 * p + 1] = t[top].sum()
            out[2 * p] = t.sum() - out[2 * p + 1]
        return out

    def pair_ranks(self, pair: int) -> np.ndarray:
        """Sorted transverse ranks of the pair's members, plus a sentinel."""
        r = np.sort(self.trank[self.cuts[pair]:self.cuts[pair + 1]])
        return np.append(r, len(self.tasks))

    def is_bottom(self, k: int, pair: int) -> bool:
        return self.trank[k] < self.thresholds[pair]


def _objective(times: np.ndarray) -> tuple[float, float]:
    return (float(times.max() - times.min()), float(((times - times.mean()) ** 2).sum()))


def _initial_state(tasks: list[Task], pairs: int) -> _State:
    times = np.array([t.service_time for t in tasks])
    csum = np.concatenate([[0.0], np.cumsum(times)])
    total = csum[-1]
    cuts = [0]
    for p in range(1, pairs):
        target = total * p / pairs
        lo = cuts[-1] + 1
        idx = int(np.argmin(np.abs(csum[lo:len(tasks)] - target))) + lo
        cuts.append(idx)
    cuts.append(len(tasks))
    state = _State(tasks, pairs, cuts, [0] * pairs)
    state.thresholds = [_best_threshold(state, p) for p in range(pairs)]
    return state


def _best_threshold(state: _State, pair: int) -> int:
    ranks = state.pair_ranks(pair)
    order = ranks[:-1]
    by_rank = np.empty(len(state.tasks))
    by_rank[state.trank] = state.times
    prefix = np.concatenate([[0.0], np.cumsum(by_rank[order])])
    h = int(np.argmin(np.abs(prefix - prefix[-1] / 2)))
    return int(ranks[h])


def _split_candidates(state: _State, pair: int, cuts: list[int]) -> list[int]:
    """Best transverse threshold for a pair under ``cuts`` and its neighbours."""
    saved = state.cuts
    state.cuts = cuts
    try:
        ranks = state.pair_ranks(pair)
        best = _best_threshold(state, pair)
    finally:
        state.cuts = saved
    pos = int(np.searchsorted(ranks, best))
    return [int(ranks[q]) for q in range(max(0, pos - 2), min(len(ranks), pos + 3))]


def _window_search(state: _State, window: int = 120) -> None:
    """Coordinate descent over pair cuts; each candidate cut is scored with
    the best nearby transverse splits of the two pairs it touches."""
    current = _objective(state.robot_times())
    improved = True
    while improved:
        improved = False
        for p in range(1, state.pairs):
            lo = max(state.cuts[p - 1] + 1, state.cuts[p] - window)
            hi = min(state.cuts[p + 1] - 1, state.cuts[p] + window)
            for c in range(lo, hi + 1):
                cuts = list(state.cuts)
                cuts[p] = c
                for a in _split_candidates(state, p - 1, cuts):
                    for b in _split_candidates(state, p, cuts):
                        th = list(state.thresholds)
                        th[p - 1], th[p] = a, b
                        obj = _objective(state.robot_times(cuts, th))
                        if obj < current:
                            current, state.cuts, state.thresholds = obj, cuts, th
                            improved = True


def _local_search(state: _State, max_moves: int | None = None) -> int:
    """Single-task boundary shifts while the objective strictly improves."""
    n = len(state.tasks)
    max_moves = max_moves or 4 * n + 10
    moves = 0
    current = _objective(state.robot_times())
    while moves < max_moves:
        best = None
        for p in range(1, state.pairs):
            for step in (-1, 1):
                c = state.cuts[p] + step
                if state.cuts[p - 1] < c < state.cuts[p + 1]:
                    cuts = list(state.cuts)
                    cuts[p] = c
                    obj = _objective(state.robot_times(cuts=cuts))
                    if obj < current and (best is None or obj < best[0]):
                        best = (obj, cuts, None)
        for p in range(state.pairs):
            ranks = state.pair_ranks(p)
            pos = int(np.searchsorted(ranks, state.thresholds[p]))
            for q in (pos - 1, pos + 1):
                if 0 <= q < len(ranks):
                    th = list(state.thresholds)
                    th[p] = int(ranks[q])
                    obj = _objective(state.robot_times(thresholds=th))
                    if obj < current and (best is None or obj < best[0]):
                        best = (obj, None, th)
        if best is None:
            break
        current = best[0]
        if best[1] is not None:
            state.cuts = best[1]
        else:
            state.thresholds = best[2]
        moves += 1
    return moves


def _offset_for(
    seq: list[Task], x_start: float, x_end: float, geom: RobotGeometry,
    target: float, floor: float | None,
) -> Offset | None:
    if not seq:
        return None
    times = np.array([t.service_time for t in seq])
    suffix = np.concatenate([np.cumsum(times[::-1])[::-1], [0.0]])
    total = suffix[0]
    best = None
    for o, t in enumerate(seq):
        l, ls = t.x - x_start, x_end - t.x
        if l <= geom.threshold or ls <= geom.threshold:
            continue
        tstar = float(suffix[o])
        if floor is not None and not tstar > floor:
            continue
        score = abs(tstar - target)
        if best is None or score < best[0] - 1e-9:
            best = (score, Offset(o, l, ls, float(total - tstar), tstar))
    return None if best is None else best[1]


def _build(state: _State, geom: RobotGeometry, relegated: frozenset[int], stagger: float,
           offsets: bool, balance_violation: bool, notes: list[str]) -> PartitionSet:
    parts: list[Partition] = []
    pair_ms, top_ms, bot_ms = [], [], []
    prev_tstar = None
    for p in range(state.pairs):
        members = [state.tasks[k] for k in state.members(p)]
        if not members:
            raise PartitionError(f"pair {p + 1} received no tasks")
        x0 = min(t.x for t in members)
        x1 = max(t.x for t in members)
        if x1 - x0 < 2 * geom.threshold:
            raise PartitionError(
                f"pair {p + 1} partition spans {x1 - x0:.3f} ft, below 2*alpha*d_ee = {2 * geom.threshold:.3f}"
            )
        bottom = [state.tasks[k] for k in state.members(p) if state.is_bottom(k, p)]
        top = [state.tasks[k] for k in state.members(p) if not state.is_bottom(k, p)]
        bottom.sort(key=_axial_key)
        top.sort(key=_axial_key)
        for robot, side, seq in ((geom.bottom(p), BOTTOM, bottom), (geom.top(p), TOP, top)):
            for t in seq:
                if not geom.can_reach(robot, t.x, t.y):
                    raise PartitionError(f"task {t.id} assigned to r{robot + 1} outside its reach")
            off = None
            if side == TOP and offsets:
                total = float(sum(t.service_time for t in seq))
                frac = 0.5 + stagger * (p - (state.pairs - 1) / 2)
                off = _offset_for(seq, x0, x1, geom, frac * total, prev_tstar)
                if off is None:
                    notes.append(f"no feasible offset for r{robot + 1}")
                else:
                    prev_tstar = off.time_star
            parts.append(Partition(
                robot, tuple(t.id for t in seq), x0, x1, side,
                float(math.fsum(t.service_time for t in seq)), off,
            ))
        bot_ms.append(parts[-2].total_service_time)
        top_ms.append(parts[-1].total_service_time)
        pair_ms.append(bot_ms[-1] + top_ms[-1])
    return PartitionSet(tuple(parts), relegated, tuple(pair_ms), tuple(top_ms), tuple(bot_ms),
                        balance_violation, tuple(notes))


def partition(
    tasks: list[Task],
    geom: RobotGeometry,
    overlap_fraction: float = 1.0,
    *,
    stagger: float = DEFAULT_STAGGER,
    offsets: bool = True,
) -> PartitionSet:
    """Split ``tasks`` into one balanced region per robot.

    ``overlap_fraction`` of the middle-spar tasks inside the overlap band are
    withheld for leftover scheduling. Per-robot service times end up within
    one maximal task time of each other when that is achievable; otherwise
    the best split found is returned with ``balance_violation`` set.
    """
    if not tasks:
        raise PartitionError("no tasks to partition")
    if not 0.0 <= overlap_fraction <= 1.0:
        raise PartitionError("overlap_fraction must lie in [0, 1]")
    relegated = select_relegated(tasks, geom, overlap_fraction)
    nominal = sorted((t for t in tasks if t.id not in relegated), key=_axial_key)
    if len(nominal) < geom.robot_count:
        raise PartitionError("fewer tasks than robots")
    state = _initial_state(nominal, geom.pair_count)
    _window_search(state)
    _local_search(state)
    return _finish(state, geom, relegated, stagger, offsets)


def _finish(state, geom, relegated, stagger, offsets) -> PartitionSet:
    times = state.robot_times()
    tmax = float(state.times.max())
    notes: list[str] = []
    violation = float(times.max() - times.min()) > tmax + 1e-9
    if violation:
        notes.append(f"imbalance {times.max() - times.min():.2f} s exceeds one task ({tmax:.2f} s)")
        log.warning(notes[-1])
    return _build(state, geom, relegated, stagger, offsets, violation, notes)


def _state_from(p: PartitionSet, tasks_by_id: dict[int, Task]) -> _State:
    pairs = len(p.partitions) // 2
    ordered: list[Task] = []
    cuts = [0]
    groups = []
    for i in range(pairs):
        b = [tasks_by_id[k] for k in p.partitions[2 * i].task_ids]
        t = [tasks_by_id[k] for k in p.partitions[2 * i + 1].task_ids]
        ordered.extend(sorted(b + t, key=_axial_key))
        cuts.append(len(ordered))
        groups.append((b, t))
    if [_axial_key(t) for t in ordered] != sorted(_axial_key(t) for t in ordered):
        raise PartitionError("pairs are not axially contiguous")
    state = _State(ordered, pairs, cuts, [0] * pairs)
    rank = {t.id: int(state.trank[k]) for k, t in enumerate(ordered)}
    for i, (b, t) in enumerate(groups):
        brank = max((rank[x.id] for x in b), default=-1)
        trank = min((rank[x.id] for x in t), default=len(ordered))
        if brank > trank:
            raise PartitionError(f"pair {i + 1} split is not transverse-separable")
        state.thresholds[i] = trank
    return state


def rebalance_pairwise(
    p: PartitionSet, tasks: list[Task], geom: RobotGeometry, *,
    stagger: float = DEFAULT_STAGGER, offsets: bool = True,
) -> PartitionSet:
    """Shift boundary tasks between neighbouring regions until no single move
    narrows the spread of per-robot service times any further."""
    by_id = {t.id: t for t in tasks}
    state = _state_from(p, by_id)
    _local_search(state)
    return _finish(state, geom, p.relegated_overlap, stagger, offsets)


def partition_from_cuts(
    tasks: list[Task], geom: RobotGeometry, bottom_counts: list[int], pair_counts: list[int],
    *, offsets: bool = False,
) -> PartitionSet:
    """Deterministic partition set from explicit counts, for tests and audits."""
    nominal = sorted(tasks, key=_axial_key)
    cuts = [0]
    for c in pair_counts:
        cuts.append(cuts[-1] + c)
    state = _State(nominal, geom.pair_count, cuts, [0] * geom.pair_count)
    state.thresholds = [int(state.pair_ranks(p)[nb]) for p, nb in enumerate(bottom_counts)]
    return _finish(state, geom, frozenset(), DEFAULT_STAGGER, offsets)


def with_offsets(p: PartitionSet, tasks_by_id: dict[int, Task], indices: dict[int, int]) -> PartitionSet:
    """Replace top-robot offsets by explicit start indices (no feasibility checks)."""
    parts = list(p.partitions)
    for robot, idx in indices.items():
        part = parts[robot]
        seq = [tasks_by_id[k] for k in part.task_ids]
        times = [t.service_time for t in seq]
        t_before = float(sum(times[:idx]))
        parts[robot] = replace(part, offset=Offset(
            idx, seq[idx].x - part.x_start, part.x_end - seq[idx].x,
            t_before, float(sum(times[idx:])),
        ))
    return replace(p, partitions=tuple(parts))
