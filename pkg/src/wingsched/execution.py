"""Failure sampling and skip-ahead execution of nominal schedules."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .nominal import NominalSchedule
from .timeline import Track, collision_monitor
from .workpart import RobotGeometry


@dataclass(frozen=True)
class FailureModel:
    first_mean: float = 5073.0
    first_std: float = 1602.0
    recurrence_mean: float = 6942.0
    recurrence_std: float = 1068.0
    repair_mean: float = 480.0
    repair_std: float = 80.0
    floor: float = 1.0
    seed: int | None = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d: dict) -> "FailureModel":
        return cls(**d)


@dataclass(frozen=True)
class FailureTrace:
    """Per-robot ordered ``(start, repair_duration)`` pairs."""

    failures: tuple[tuple[tuple[float, float], ...], ...]
    horizon: float
    seed: list | None = None

    @property
    def robot_count(self) -> int:
        return len(self.failures)

    @property
    def repair_totals(self) -> list[float]:
        return [float(sum(d for _, d in row)) for row in self.failures]

    @property
    def last_repair_end(self) -> float:
        return max((f + d for row in self.failures for f, d in row), default=0.0)

    def truncated(self, horizon: float) -> "FailureTrace":
        rows = tuple(tuple((f, d) for f, d in row if f < horizon) for row in self.failures)
        return FailureTrace(rows, horizon, self.seed)

    def validate(self) -> None:
        for row in self.failures:
            prev_end = -np.inf
            for f, d in row:
                if d <= 0 or f < prev_end:
                    raise ValueError("failure intervals must be ordered, disjoint and of positive length")
                prev_end = f + d

    def to_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "seed": self.seed,
            "failures": [[[f, d] for f, d in row] for row in self.failures],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FailureTrace":
        rows = tuple(tuple((float(f), float(r)) for f, r in row) for row in d["failures"])
        return cls(rows, float(d["horizon"]), d.get("seed"))


def _draw(rng: np.random.Generator, mean: float, std: float, floor: float) -> float:
    # resample until the draw clears the floor; negative durations are unphysical
    while True:
        v = rng.normal(mean, std)
        if v >= floor:
            return float(v)


def sample_failures(model: FailureModel, robot_count: int, horizon: float, seed=None) -> FailureTrace:
    """Draw failure instances per robot up to ``horizon``.

    Every robot draws from its own child stream, so a trace sampled over a
    longer horizon and truncated equals one sampled at the shorter horizon.
    """
    if not horizon > 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    seed = model.seed if seed is None else seed
    ss = np.random.SeedSequence(seed)
    rows = []
    for child in ss.spawn(robot_count):
        rng = np.random.default_rng(child)
        row = []
        start = _draw(rng, model.first_mean, model.first_std, model.floor)
        while start < horizon:
            rep = _draw(rng, model.repair_mean, model.repair_std, model.floor)
            row.append((start, rep))
            nxt = start + _draw(rng, model.recurrence_mean, model.recurrence_std, model.floor)
            start = max(nxt, start + rep)
        rows.append(tuple(row))
    if isinstance(seed, (list, tuple)):
        seed = [int(v) for v in seed]
    elif not isinstance(seed, (int, np.integer)):
        seed = None
    return FailureTrace(tuple(rows), float(horizon), seed)


@dataclass
class ExecutionLog:
    executed: list[Track]
    skipped: list[list[int]]
    makespans: list[float]
    repair_totals: list[float]
    completion: float
    min_distance: float
    first_violation: float | None
    trace: FailureTrace | None = None
    extras: dict = field(default_factory=dict)

    @property
    def skipped_ids(self) -> list[int]:
        return sorted(i for row in self.skipped for i in row)

    @property
    def executed_ids(self) -> list[int]:
        return sorted(int(i) for t in self.executed for i in t.ids)

    def to_dict(self) -> dict:
        return {
            "completion": self.completion,
            "min_distance": self.min_distance,
            "first_violation": self.first_violation,
            "makespans": self.makespans,
            "repair_totals": self.repair_totals,
            "skipped": self.skipped,
            "executed": [t.rows() for t in self.executed],
            "trace": None if self.trace is None else self.trace.to_dict(),
        }


def skip_mask(track: Track, failures) -> np.ndarray:
    """Tasks whose planned interval overlaps any failure interval [f, f+d)."""
    mask = np.zeros(len(track), dtype=bool)
    for f, d in failures:
        mask |= (track.start < f + d) & (track.end > f)
    return mask


def execute(s: NominalSchedule, trace: FailureTrace, geom: RobotGeometry) -> ExecutionLog:
    """Run a nominal schedule against a failure trace on a fixed planned clock.

    A failing robot abandons every task whose planned slot meets the repair
    window and rejoins at the next planned start after the repair ends.
    """
    if trace.robot_count != len(s.plans):
        raise ValueError(f"trace has {trace.robot_count} robots, schedule has {len(s.plans)}")
    trace.validate()
    executed, skipped, spans, repairs = [], [], [], []
    for plan, row in zip(s.plans, trace.failures):
        tr = plan.track
        # repairs starting after the robot's planned work do not touch it
        row = [(f, d) for f, d in row if f < tr.finish]
        mask = skip_mask(tr, row)
        done = tr.select(~mask)
        executed.append(done)
        skipped.append([int(i) for i in tr.ids[mask]])
        repair_end = max((f + d for f, d in row), default=0.0)
        spans.append(max(done.finish, repair_end))
        repairs.append(float(sum(d for _, d in row)))
    mon = collision_monitor(executed, geom.threshold)
    return ExecutionLog(
        executed, skipped, spans, repairs, max(spans, default=0.0),
        mon.min_distance, mon.first_violation, trace,
    )
