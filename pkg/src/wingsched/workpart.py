"""Workpart geometry, tasks, conditions of assembly and robot reach.

The wing is modelled as an unrolled plane: ``x`` runs along the span
(axial direction), ``y`` across the chord with the middle spar on ``y = 0``.
Top robots work the ``y > 0`` half, bottom robots the ``y < 0`` half, and a
band of width ``band_width`` around the middle spar is reachable from both
sides.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import ModelError

BENCHMARK_RIB_COUNTS = (109, 107, 105, 101, 99, 95, 93, 91, 87, 85, 83, 79, 77, 73, 71)
BENCHMARK_SPAR_HOLES = 266
BENCHMARK_RIB_PITCH = 2.0
BENCHMARK_MAX_DRILL_TIME = 30.0
BENCHMARK_DRILL_DECREMENT = 0.5
BENCHMARK_WIDTH = 10.0

TOP = "top"
BOTTOM = "bottom"


@dataclass(frozen=True)
class RibSpec:
    axial_pos: float
    hole_count: int
    drill_time: float
    transverse_extent: float

    def __post_init__(self):
        if self.hole_count < 1:
            raise ModelError(f"rib at x={self.axial_pos} has no holes")
        if self.drill_time <= 0:
            raise ModelError(f"rib at x={self.axial_pos} has non-positive drill time")


@dataclass(frozen=True)
class SparSpec:
    transverse_pos: float
    hole_count: int

    def __post_init__(self):
        if self.hole_count < 1:
            raise ModelError(f"spar at y={self.transverse_pos} has no holes")


@dataclass(frozen=True)
class Task:
    id: int
    x: float
    y: float
    service_time: float
    feature: str  # "rib" or "spar"
    feature_index: int  # 1-based rib number, 0-based spar index
    segment: int  # spar section between ribs; rib index for rib holes
    seq: int  # hole index along the feature
    side: str

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)

    @property
    def feature_key(self) -> tuple[str, int, int]:
        return (self.feature, self.feature_index, self.segment)


@dataclass(frozen=True)
class WorkpartSpec:
    axial_length: float
    ribs: tuple[RibSpec, ...]
    spars: tuple[SparSpec, ...]
    rib_pitch: float
    transverse_width: float = BENCHMARK_WIDTH

    def __post_init__(self):
        xs = [r.axial_pos for r in self.ribs]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ModelError("ribs must have strictly increasing axial positions")
        if xs and (xs[0] < 0 or xs[-1] > self.axial_length):
            raise ModelError("ribs must lie within the axial length")
        for r in self.ribs:
            if r.transverse_extent > self.transverse_width + 1e-9:
                raise ModelError("rib wider than the workpart")

    @cached_property
    def tasks(self) -> tuple[Task, ...]:
        return tuple(_generate_tasks(self))

    @cached_property
    def task_index(self) -> dict[int, Task]:
        return {t.id: t for t in self.tasks}

    @property
    def total_service_time(self) -> float:
        return math.fsum(t.service_time for t in self.tasks)

    def spar_drill_time(self, x: float) -> tuple[int, float]:
        """Segment index and drill time for a spar hole at axial position x.

        A spar section between two adjacent ribs takes the drill time of the
        longer of the two ribs.
        """
        xs = [r.axial_pos for r in self.ribs]
        seg = int(np.searchsorted(xs, x, side="right")) - 1
        seg = min(max(seg, 0), len(self.ribs) - 2)
        a, b = self.ribs[seg], self.ribs[seg + 1]
        longer = a if a.hole_count >= b.hole_count else b
        return seg, longer.drill_time

    def component_tasks(self, label: str) -> frozenset[int]:
        """Task ids of a named component: ``rib7`` or ``spar0:seg3``."""
        if label.startswith("rib"):
            number = int(label[3:])
            ids = [t.id for t in self.tasks if t.feature == "rib" and t.feature_index == number]
        elif label.startswith("spar"):
            spar, _, seg = label[4:].partition(":seg")
            ids = [
                t.id
                for t in self.tasks
                if t.feature == "spar" and t.feature_index == int(spar) and t.segment == int(seg)
            ]
        else:
            ids = []
        if not ids:
            raise ModelError(f"unknown component {label!r}")
        return frozenset(ids)

    def to_dict(self) -> dict:
        return {
            "axial_length": self.axial_length,
            "rib_pitch": self.rib_pitch,
            "transverse_width": self.transverse_width,
            "ribs": [
                {
                    "axial_pos": r.axial_pos,
                    "hole_count": r.hole_count,
                    "drill_time": r.drill_time,
                    "transverse_extent": r.transverse_extent,
                }
                for r in self.ribs
            ],
            "spars": [
                {"transverse_pos": s.transverse_pos, "hole_count": s.hole_count}
                for s in self.spars
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WorkpartSpec":
        return cls(
            axial_length=float(d["axial_length"]),
            ribs=tuple(RibSpec(**r) for r in d["ribs"]),
            spars=tuple(SparSpec(**s) for s in d["spars"]),
            rib_pitch=float(d["rib_pitch"]),
            transverse_width=float(d.get("transverse_width", BENCHMARK_WIDTH)),
        )


def _generate_tasks(spec: WorkpartSpec) -> Iterable[Task]:
    tid = 0
    max_holes = max(r.hole_count for r in spec.ribs)
    pitch = spec.transverse_width / max(max_holes - 1, 1)
    for k, rib in enumerate(spec.ribs):
        for h in range(rib.hole_count):
            y = (h - (rib.hole_count - 1) / 2) * pitch
            yield Task(
                tid, rib.axial_pos, y, rib.drill_time, "rib", k + 1, k, h,
                TOP if y >= 0 else BOTTOM,
            )
            tid += 1
    for s, spar in enumerate(spec.spars):
        step = spec.axial_length / spar.hole_count
        for h in range(spar.hole_count):
            x = (h + 0.5) * step
            seg, dt = spec.spar_drill_time(x)
            yield Task(
                tid, x, spar.transverse_pos, dt, "spar", s, seg, h,
                TOP if spar.transverse_pos >= 0 else BOTTOM,
            )
            tid += 1


def build_benchmark_wing() -> WorkpartSpec:
    """The 15-rib, 3-spar benchmark wing (2 ft rib pitch, 266 holes per spar)."""
    ribs = []
    max_holes = max(BENCHMARK_RIB_COUNTS)
    for k, n in enumerate(BENCHMARK_RIB_COUNTS):
        ribs.append(
            RibSpec(
                axial_pos=k * BENCHMARK_RIB_PITCH,
                hole_count=n,
                drill_time=BENCHMARK_MAX_DRILL_TIME - BENCHMARK_DRILL_DECREMENT * k,
                transverse_extent=BENCHMARK_WIDTH * (n - 1) / (max_holes - 1),
            )
        )
    length = (len(ribs) - 1) * BENCHMARK_RIB_PITCH
    spars = tuple(
        SparSpec(transverse_pos=y, hole_count=BENCHMARK_SPAR_HOLES)
        for y in (-BENCHMARK_WIDTH / 2, 0.0, BENCHMARK_WIDTH / 2)
    )
    return WorkpartSpec(length, tuple(ribs), spars, BENCHMARK_RIB_PITCH, BENCHMARK_WIDTH)


# --- conditions of assembly -------------------------------------------------


@dataclass(frozen=True)
class Coa:
    name: str
    active_tasks: frozenset[int]
    omitted: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "omitted": list(self.omitted),
            "active_tasks": sorted(self.active_tasks),
        }

    @classmethod
    def from_dict(cls, d: dict, spec: WorkpartSpec | None = None) -> "Coa":
        if "active_tasks" in d:
            active = frozenset(int(i) for i in d["active_tasks"])
        elif spec is not None:
            active = coa_from_omissions(spec, d["name"], d.get("omitted", ())).active_tasks
        else:
            raise ModelError("COA needs active_tasks or a workpart to resolve omissions")
        return cls(d["name"], active, tuple(d.get("omitted", ())))


def full_coa(spec: WorkpartSpec, name: str = "COA1") -> Coa:
    return Coa(name, frozenset(t.id for t in spec.tasks))


def coa_from_omissions(spec: WorkpartSpec, name: str, omitted: Iterable[str]) -> Coa:
    omitted = tuple(omitted)
    missing: set[int] = set()
    for label in omitted:
        missing |= spec.component_tasks(label)
    return Coa(name, frozenset(t.id for t in spec.tasks) - missing, omitted)


def benchmark_coas(spec: WorkpartSpec, seed: int = 2019) -> list[Coa]:
    """Five COAs with progressively more missing components.

    COA 2 drops one interior rib; COAs 3-5 drop 2, 3 and 4 outer-spar
    sections picked by a seeded shuffle.
    """
    rng = np.random.default_rng(seed)
    interior = [7, 8, 9]
    rib = int(rng.choice(interior))
    sections = [f"spar{s}:seg{g}" for s in (0, len(spec.spars) - 1) for g in range(len(spec.ribs) - 1)]
    order = [sections[i] for i in rng.permutation(len(sections))]
    coas = [full_coa(spec), coa_from_omissions(spec, "COA2", [f"rib{rib}"])]
    for k, n in enumerate((2, 3, 4), start=3):
        coas.append(coa_from_omissions(spec, f"COA{k}", order[:n]))
    return coas


def apply_coa(spec: WorkpartSpec, coa: Coa) -> list[Task]:
    """Active tasks of ``coa`` in id order."""
    index = spec.task_index
    unknown = [i for i in coa.active_tasks if i not in index]
    if unknown:
        raise ModelError(f"COA {coa.name} references unknown task ids {sorted(unknown)[:5]}")
    return [index[i] for i in sorted(coa.active_tasks)]


# --- robots -----------------------------------------------------------------


@dataclass(frozen=True)
class RobotSpec:
    id: int
    pair: int
    side: str
    base: tuple[float, float]
    reach_x: tuple[float, float]

    @property
    def name(self) -> str:
        return f"r{self.id + 1}"


@dataclass(frozen=True)
class RobotGeometry:
    """Robots ordered as r1 = bottom of pair 1, r2 = top of pair 1, ..."""

    robots: tuple[RobotSpec, ...]
    d_ee: float = 2.0
    alpha: float = 1.5
    band_width: float = 4.0

    def __post_init__(self):
        if self.alpha < 1:
            raise ModelError("safety factor alpha must be >= 1")
        if len(self.robots) % 2:
            raise ModelError("robots come in opposing pairs")

    @property
    def robot_count(self) -> int:
        return len(self.robots)

    @property
    def pair_count(self) -> int:
        return len(self.robots) // 2

    @property
    def threshold(self) -> float:
        return self.alpha * self.d_ee

    def bottom(self, pair: int) -> int:
        return 2 * pair

    def top(self, pair: int) -> int:
        return 2 * pair + 1

    def can_reach(self, robot: int, x: float, y: float) -> bool:
        r = self.robots[robot]
        lo, hi = r.reach_x
        if not lo - 1e-9 <= x <= hi + 1e-9:
            return False
        half = self.band_width / 2
        return y <= half + 1e-9 if r.side == BOTTOM else y >= -half - 1e-9

    def in_band(self, y: float) -> bool:
        return abs(y) <= self.band_width / 2 + 1e-9

    def reach_matrix(self, tasks: list[Task]) -> np.ndarray:
        """Boolean (robots, tasks) reachability matrix."""
        x = np.array([t.x for t in tasks])
        y = np.array([t.y for t in tasks])
        half = self.band_width / 2
        out = np.zeros((self.robot_count, len(tasks)), dtype=bool)
        for r in self.robots:
            ok = (x >= r.reach_x[0] - 1e-9) & (x <= r.reach_x[1] + 1e-9)
            ok &= (y <= half + 1e-9) if r.side == BOTTOM else (y >= -half - 1e-9)
            out[r.id] = ok
        return out

    def validate(self, tasks: Iterable[Task]) -> None:
        for t in tasks:
            if not reachable_robots(self, t):
                raise ModelError(f"task {t.id} at ({t.x:.3f}, {t.y:.3f}) is unreachable")

    def to_dict(self) -> dict:
        return {
            "d_ee": self.d_ee,
            "alpha": self.alpha,
            "band_width": self.band_width,
            "robots": [
                {
                    "id": r.id,
                    "pair": r.pair,
                    "side": r.side,
                    "base": list(r.base),
                    "reach_x": list(r.reach_x),
                }
                for r in self.robots
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RobotGeometry":
        robots = tuple(
            RobotSpec(r["id"], r["pair"], r["side"], tuple(r["base"]), tuple(r["reach_x"]))
            for r in d["robots"]
        )
        return cls(robots, float(d["d_ee"]), float(d["alpha"]), float(d["band_width"]))


def benchmark_geometry(spec: WorkpartSpec, pairs: int = 2, reach_overlap: float = 0.2) -> RobotGeometry:
    """Pairs spaced along the span; each pair reaches its share of the span
    plus ``reach_overlap`` of the axial length on either side."""
    length = spec.axial_length
    robots = []
    for p in range(pairs):
        lo = max(0.0, length * (p / pairs - reach_overlap))
        hi = min(length, length * ((p + 1) / pairs + reach_overlap))
        cx = (lo + hi) / 2
        off = spec.transverse_width / 2 + 1.0
        robots.append(RobotSpec(2 * p, p, BOTTOM, (cx, -off), (lo, hi)))
        robots.append(RobotSpec(2 * p + 1, p, TOP, (cx, off), (lo, hi)))
    return RobotGeometry(tuple(robots))


def reachable_robots(geom: RobotGeometry, task: Task) -> frozenset[int]:
    """Robots able to service ``task``; raises ModelError when none can."""
    out = frozenset(r.id for r in geom.robots if geom.can_reach(r.id, task.x, task.y))
    if not out:
        raise ModelError(f"task {task.id} at ({task.x:.3f}, {task.y:.3f}) is unreachable")
    return out


# --- configuration files ----------------------------------------------------


@dataclass
class WorkpartConfig:
    spec: WorkpartSpec
    geometry: RobotGeometry
    coas: list[Coa] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "workpart": self.spec.to_dict(),
            "geometry": self.geometry.to_dict(),
            "coas": [c.to_dict() for c in self.coas],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WorkpartConfig":
        spec = WorkpartSpec.from_dict(d["workpart"])
        geom = RobotGeometry.from_dict(d["geometry"])
        coas = [Coa.from_dict(c, spec) for c in d.get("coas", [])]
        for c in coas:
            apply_coa(spec, c)
        return cls(spec, geom, coas)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def loads(cls, text: str) -> "WorkpartConfig":
        return cls.from_dict(json.loads(text))


def benchmark_config() -> WorkpartConfig:
    spec = build_benchmark_wing()
    geom = benchmark_geometry(spec)
    geom.validate(spec.tasks)
    return WorkpartConfig(spec, geom, benchmark_coas(spec))


PRESETS = {"benchmark": benchmark_config}


def load_config(source: str | Path) -> WorkpartConfig:
    """Load a named preset or a JSON configuration file."""
    if str(source) in PRESETS:
        return PRESETS[str(source)]()
    return WorkpartConfig.loads(Path(source).read_text())
