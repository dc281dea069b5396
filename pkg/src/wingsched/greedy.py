"""Nearest-task greedy scheduler used as the comparison baseline."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .nominal import NominalSchedule, RobotPlan
from .timeline import Track
from .workpart import RobotGeometry, Task


@dataclass(frozen=True)
class GreedyConfig:
    """Scoring of candidate tasks: ``distance_weight * travel distance`` plus
    ``wait_penalty * expected wait`` for tasks that are currently blocked plus
    ``sharing_weight`` per extra robot that could also take the task, so
    exclusive work goes first."""

    distance_weight: float = 1.0
    wait_penalty: float = 0.0
    conflict_check: bool = True
    sharing_weight: float = 20.0  # per additional robot able to reach the task
    start: str = "outer"  # "base": robot base positions; "outer": far axial end of each pair's reach

    def __post_init__(self):
        if min(self.distance_weight, self.wait_penalty, self.sharing_weight) < 0:
            raise ValueError("greedy weights must be non-negative")
        if self.start not in ("base", "outer"):
            raise ValueError(f"unknown start policy {self.start!r}")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class GreedyResult:
    schedule: NominalSchedule
    waits: list[list[tuple[float, float]]]
    deadlocks: list[float] = field(default_factory=list)

    @property
    def wait_totals(self) -> list[float]:
        return [float(sum(b - a for a, b in w)) for w in self.waits]


def greedy_schedule(tasks: list[Task], geom: RobotGeometry, config: GreedyConfig | None = None) -> GreedyResult:
    """Every free robot claims the best-scoring unclaimed task it can reach.

    A task is blocked while it lies within the proximity threshold of another
    robot's current or parked position. A robot whose best option is blocked
    waits for the blocker to finish; when every unfinished robot is waiting
    and none is working, the lowest-index robot gets priority and the others
    retract.
    """
    cfg = config or GreedyConfig()
    thr = geom.threshold if cfg.conflict_check else -1.0
    n_r = geom.robot_count
    ordered = sorted(tasks, key=lambda t: t.id)
    ids = np.array([t.id for t in ordered], dtype=np.int64)
    xs = np.array([t.x for t in ordered])
    ys = np.array([t.y for t in ordered])
    dur = np.array([t.service_time for t in ordered])
    reach = geom.reach_matrix(ordered) if ordered else np.zeros((n_r, 0), dtype=bool)
    if ordered and not reach.any(axis=0).all():
        bad = ids[~reach.any(axis=0)][0]
        raise ValueError(f"task {bad} is out of every robot's reach")
    open_ = np.ones(len(ordered), dtype=bool)
    sharing = cfg.sharing_weight * (reach.sum(axis=0) - 1.0)

    pos = np.array([r.base for r in geom.robots], dtype=float)
    if cfg.start == "outer":
        mid = geom.pair_count / 2
        for r in geom.robots:
            lo, hi = r.reach_x
            pos[r.id, 0] = lo if r.pair + 0.5 < mid else hi if r.pair + 0.5 > mid else (lo + hi) / 2
    free = np.zeros(n_r)
    busy_until = np.zeros(n_r)
    parked = np.zeros(n_r, dtype=bool)  # waiting robots occupy their position
    waiting = np.zeros(n_r, dtype=bool)
    done = np.zeros(n_r, dtype=bool)
    rows: list[list[tuple[int, float, float]]] = [[] for _ in range(n_r)]
    waits: list[list[tuple[float, float]]] = [[] for _ in range(n_r)]
    deadlocks: list[float] = []

    while not done.all():
        r = int(np.lexsort((np.arange(n_r), np.where(done, np.inf, free)))[0])
        t = free[r]
        cand = open_ & reach[r]
        if not cand.any():
            done[r] = True
            parked[r] = waiting[r] = False
            free[r] = np.inf
            continue
        ci = np.flatnonzero(cand)
        dist = np.hypot(xs[ci] - pos[r, 0], ys[ci] - pos[r, 1])
        release = np.zeros(len(ci))
        hard = np.zeros(len(ci), dtype=bool)
        for o in range(n_r):
            if o == r or done[o]:
                continue
            working = busy_until[o] > t
            if not (working or parked[o]):
                continue
            near = np.hypot(xs[ci] - pos[o, 0], ys[ci] - pos[o, 1]) <= thr
            if working:
                release = np.where(near, np.maximum(release, busy_until[o]), release)
            else:
                hard |= near
        blocked = (release > t) | hard
        score = cfg.distance_weight * dist + cfg.wait_penalty * np.maximum(release - t, 0.0) + sharing[ci]
        score[hard] = np.inf
        ok = np.isfinite(score)
        if ok.any():
            k = int(np.lexsort((ids[ci], score))[0])
            if not blocked[k]:
                j = ci[k]
                open_[j] = False
                rows[r].append((int(j), t, t + dur[j]))
                pos[r] = (xs[j], ys[j])
                free[r] = busy_until[r] = t + dur[j]
                parked[r] = waiting[r] = False
                continue
            until = float(release[k])
        else:
            others = [free[o] for o in range(n_r) if o != r and not done[o] and free[o] > t]
            others += [busy_until[o] for o in range(n_r) if o != r and busy_until[o] > t]
            until = min(others) if others else math.inf
        if not math.isfinite(until):
            # every unfinished robot is stalled: lowest index goes, others retract
            deadlocks.append(float(t))
            stalled = [o for o in range(n_r) if not done[o]]
            lead = min(stalled)
            for o in stalled:
                if o != lead:
                    parked[o] = False
            if r != lead:
                parked[r] = False
                waiting[r] = True
                free[r] = max(free[r], free[lead]) + 1e-9
            else:
                parked[r] = False
                free[r] = t + 1e-9
            continue
        waits[r].append((float(t), until))
        waiting[r] = parked[r] = True
        free[r] = until

    plans = []
    for r in range(n_r):
        rr = rows[r]
        j = np.array([a for a, _, _ in rr], dtype=np.int64)
        track = Track.from_points(ids[j], [s for _, s, _ in rr], [e for _, _, e in rr], xs[j], ys[j])
        lo, hi = geom.robots[r].reach_x
        plans.append(RobotPlan(r, track, lo, hi))
    return GreedyResult(NominalSchedule(plans), waits, deadlocks)
