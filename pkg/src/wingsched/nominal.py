"""Offset-start nominal schedules and their collision certificates."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConstraintError
from .partitioner import PartitionSet
from .timeline import Track, collision_monitor
from .workpart import TOP, RobotGeometry, Task

DEFAULT_RATE_WINDOW = 2.0


@dataclass(frozen=True)
class RateProfile:
    q: float
    delta_q: float
    degenerate: bool = False


@dataclass
class RobotPlan:
    robot: int
    track: Track
    x_start: float
    x_end: float
    offset_index: int | None = None  # index in the partition's axial order
    wrap_index: int | None = None  # position in ``track`` where the robot returns

    @property
    def makespan(self) -> float:
        return self.track.finish


@dataclass
class NominalSchedule:
    plans: list[RobotPlan]
    rates: list[RateProfile] = field(default_factory=list)
    rate_window: float = DEFAULT_RATE_WINDOW

    @property
    def tracks(self) -> list[Track]:
        return [p.track for p in self.plans]

    @property
    def makespans(self) -> list[float]:
        return [p.makespan for p in self.plans]

    @property
    def completion(self) -> float:
        return max(self.makespans, default=0.0)

    def task_ids(self) -> set[int]:
        return {int(i) for p in self.plans for i in p.track.ids}

    def to_dict(self) -> dict:
        return {
            "robots": [
                {
                    "robot": p.robot,
                    "interval": [p.x_start, p.x_end],
                    "offset_index": p.offset_index,
                    "wrap_index": p.wrap_index,
                    "q": r.q if r else None,
                    "delta_q": r.delta_q if r else None,
                    "timeline": p.track.rows(),
                }
                for p, r in itertools.zip_longest(self.plans, self.rates)
            ]
        }


def build_nominal(
    p: PartitionSet, geom: RobotGeometry, tasks: dict[int, Task], *,
    rate_window: float = DEFAULT_RATE_WINDOW,
) -> NominalSchedule:
    """Sequence every partition axially; offset robots start at their offset
    point, run to the partition end and return to finish the remainder."""
    _check_offsets(p, geom)
    plans = []
    for part in p.partitions:
        seq = [tasks[k] for k in part.task_ids]
        off = part.offset
        wrap = None
        if off is not None and off.index > 0:
            seq = seq[off.index:] + seq[:off.index]
            wrap = len(part.task_ids) - off.index
        dur = np.array([t.service_time for t in seq])
        end = np.cumsum(dur)
        start = end - dur
        track = Track.from_points([t.id for t in seq], start, end, [t.x for t in seq], [t.y for t in seq])
        plans.append(RobotPlan(part.robot, track, part.x_start, part.x_end,
                               None if off is None else off.index, wrap))
    s = NominalSchedule(plans, rate_window=rate_window)
    s.rates = axial_rate_profile(s, rate_window)
    return s


def _check_offsets(p: PartitionSet, geom: RobotGeometry) -> None:
    prev = None
    for part in p.partitions:
        if part.side != TOP or part.offset is None:
            continue
        off = part.offset
        if not (off.length > geom.threshold and off.length_star > geom.threshold):
            raise ConstraintError(
                f"r{part.robot + 1}: offsets l_t={off.length:.3f}, l_t*={off.length_star:.3f} "
                f"must both exceed alpha*d_ee={geom.threshold:.3f}",
                (part.robot,),
            )
        if prev is not None and not off.time_star > prev[1]:
            raise ConstraintError(
                f"r{part.robot + 1} reaches its partition end after {off.time_star:.1f} s, "
                f"not later than r{prev[0] + 1} ({prev[1]:.1f} s)",
                (prev[0], part.robot),
            )
        prev = (part.robot, off.time_star)


def _progress(plan: RobotPlan) -> np.ndarray:
    x = plan.track.x0
    if plan.wrap_index is None:
        return x - plan.x_start
    w = plan.wrap_index
    out = np.empty_like(x)
    x_off = x[0]
    out[:w] = x[:w] - x_off
    out[w:] = (plan.x_end - x_off) + (x[w:] - plan.x_start)
    return out


def axial_rate_profile(s: NominalSchedule, window: float = DEFAULT_RATE_WINDOW) -> list[RateProfile]:
    """Nominal axial rate q and its largest windowed deviation per robot.

    The windowed rate is the axial progress over ``window`` feet divided by
    the time it took, measured from every task start.
    """
    out = []
    for plan in s.plans:
        tr = plan.track
        if len(tr) < 2 or plan.makespan <= 0:
            out.append(RateProfile(math.nan, math.nan, True))
            continue
        q = (plan.x_end - plan.x_start) / plan.makespan
        prog = _progress(plan)
        starts = tr.start
        dev = 0.0
        j = 0
        any_window = False
        for k in range(len(tr)):
            j = max(j, k + 1)
            while j < len(tr) and prog[j] - prog[k] < window - 1e-12:
                j += 1
            if j >= len(tr):
                break
            any_window = True
            rate = (prog[j] - prog[k]) / (starts[j] - starts[k])
            dev = max(dev, abs(rate - q))
        if not any_window:
            dev = abs((prog[-1] - prog[0]) / (starts[-1] - starts[0]) - q)
        out.append(RateProfile(float(q), float(dev), False))
    return out


# --- a-priori certificate ------------------------------------------------------


@dataclass(frozen=True)
class _Piece:
    t0: float
    t1: float
    xmin: float
    xmax: float
    bounds: tuple[tuple[float, float, float, float], ...]  # (anchor, rate, delta, jitter)


@dataclass(frozen=True)
class _Phase:
    robot: int
    label: str  # "pre", "post" or "all"
    t0: float
    t1: float
    families: tuple[tuple[_Piece, ...], ...]


def _envelope_jitter(track: Track, lo: int, hi: int, anchor: float, t0: float, rate: float, delta: float) -> float:
    x = track.x0[lo:hi]
    up = x - anchor - (rate + delta) * (track.start[lo:hi] - t0)
    dn = anchor + (rate - delta) * (track.end[lo:hi] - t0) - x
    return float(max(0.0, up.max(), dn.max()))


def _piece(tr: Track, lo: int, hi: int, variants) -> _Piece:
    t0 = float(tr.start[lo])
    anchor = float(tr.x0[lo])
    span = float(tr.start[hi - 1] - tr.start[lo])
    fitted = float(tr.x0[hi - 1] - tr.x0[lo]) / span if span > 0 else 0.0
    variants = list(variants) + [(fitted, 0.0)]
    bounds = tuple((anchor, q, d, _envelope_jitter(tr, lo, hi, anchor, t0, q, d)) for q, d in variants)
    seg = tr.x0[lo:hi]
    return _Piece(t0, float(tr.end[hi - 1]), float(seg.min()), float(seg.max()), bounds)


def _phases(plan: RobotPlan, rate: RateProfile, window: float) -> list[_Phase]:
    tr = plan.track
    cuts = [0, len(tr)] if plan.wrap_index is None else [0, plan.wrap_index, len(tr)]
    out = []
    for k, (lo, hi) in enumerate(zip(cuts, cuts[1:])):
        if hi <= lo:
            continue
        whole = _piece(tr, lo, hi, [] if rate.degenerate else [(rate.q, rate.delta_q)])
        # local cones over one window of axial progress, and over a quarter of it
        x = tr.x0[lo:hi]
        fams = [(whole,)]
        for w in (window, window / 4):
            bins = np.floor((x - x[0]) / w + 1e-9).astype(np.int64)
            edges = [0, *(np.flatnonzero(np.diff(bins)) + 1).tolist(), hi - lo]
            fams.append(tuple(_piece(tr, lo + a, lo + b, []) for a, b in zip(edges, edges[1:]) if b > a))
        if plan.wrap_index is None:
            label = "all"
        else:
            label = "pre" if k == 0 else "post"
        out.append(_Phase(plan.robot, label, whole.t0, whole.t1, tuple(fams)))
    return out


def _line(anchor, rate, t0):
    # value(t) = anchor + rate * (t - t0) = a + b t
    return anchor - rate * t0, rate


def _separation_bound(pa: _Phase, pb: _Phase) -> float:
    """Lower bound on |x_a - x_b| while both phases are active (inf if disjoint)."""
    if min(pa.t1, pb.t1) <= max(pa.t0, pb.t0):
        return math.inf
    best = -math.inf
    for fa in pa.families:
        for fb in pb.families:
            best = max(best, _family_bound(fa, fb))
    return best


def _family_bound(fa, fb) -> float:
    worst = math.inf
    j0 = 0
    for a in fa:
        while j0 < len(fb) and fb[j0].t1 <= a.t0:
            j0 += 1
        j = j0
        while j < len(fb) and fb[j].t0 < a.t1:
            b = fb[j]
            lo, hi = max(a.t0, b.t0), min(a.t1, b.t1)
            if hi > lo:
                worst = min(worst, max(_sep_for(a, ba, b, bb, lo, hi) for ba in a.bounds for bb in b.bounds))
            j += 1
    return worst


def _sep_for(pa: _Piece, ba, pb: _Piece, bb, lo: float, hi: float) -> float:
    # Each bound is max(const, line) or min(const, line); the gap functions
    # are convex piecewise linear, so the larger of the two attains its
    # minimum at a breakpoint, a crossing, or an end of [lo, hi].
    def env(ph, b):
        anchor, q, d, j = b
        return (ph.xmin, _line(anchor - j, q - d, ph.t0)), (ph.xmax, _line(anchor + j, q + d, ph.t0))

    (amin, alow), (amax, aup) = env(pa, ba)
    (bmin, blow), (bmax, bup) = env(pb, bb)

    def f1(t):  # b ahead of a
        return max(bmin, blow[0] + blow[1] * t) - min(amax, aup[0] + aup[1] * t)

    def f2(t):  # a ahead of b
        return max(amin, alow[0] + alow[1] * t) - min(bmax, bup[0] + bup[1] * t)

    cands = {lo, hi}
    for c, ln in ((amin, alow), (amax, aup), (bmin, blow), (bmax, bup)):
        if ln[1] != 0:
            t = (c - ln[0]) / ln[1]
            if lo < t < hi:
                cands.add(t)
    pts = sorted(cands)
    for t_a, t_b in zip(pts, pts[1:]):
        da, db = f1(t_a) - f2(t_a), f1(t_b) - f2(t_b)
        if da * db < 0:
            cands.add(t_a + (t_b - t_a) * da / (da - db))
    return min(max(f1(t), f2(t)) for t in cands)


@dataclass
class ConstraintReport:
    threshold: float
    c1_slacks: dict[int, tuple[float, float]]
    c2_slacks: dict[tuple[int, int], float]
    eq7_margins: dict[tuple[int, int], float]
    eq8_margins: dict[tuple[int, int], float]
    eq9_margins: dict[tuple[int, int], float]
    other_margin: float
    min_distance: float
    first_violation: float | None
    rates: list[RateProfile]

    def _all(self) -> list[float]:
        vals = [v for pair in self.c1_slacks.values() for v in pair]
        vals += list(self.c2_slacks.values())
        vals += list(self.eq7_margins.values()) + list(self.eq8_margins.values())
        vals += list(self.eq9_margins.values()) + [self.other_margin]
        return vals

    @property
    def certified(self) -> bool:
        """All a-priori slacks strictly positive."""
        return all(v > 0 for v in self._all())

    @property
    def sweep_pass(self) -> bool:
        return self.first_violation is None and self.min_distance > self.threshold

    def to_dict(self) -> dict:
        def keyed(d):
            return {"-".join(f"r{k + 1}" for k in (key if isinstance(key, tuple) else (key,))): v
                    for key, v in d.items()}
        return {
            "certified": self.certified,
            "sweep_pass": self.sweep_pass,
            "threshold": self.threshold,
            "min_distance": self.min_distance,
            "first_violation": self.first_violation,
            "c1_slacks": keyed(self.c1_slacks),
            "c2_slacks": keyed(self.c2_slacks),
            "eq7_margins": keyed(self.eq7_margins),
            "eq8_margins": keyed(self.eq8_margins),
            "eq9_margins": keyed(self.eq9_margins),
            "other_margin": self.other_margin,
            "rates": [{"q": r.q, "delta_q": r.delta_q, "degenerate": r.degenerate} for r in self.rates],
        }


def check_constraints(s: NominalSchedule, geom: RobotGeometry) -> ConstraintReport:
    """Evaluate the spacing and ordering constraints, the robustness margins
    and the exhaustive pairwise-distance sweep for a nominal schedule.

    Robustness margins bound each robot's axial position by a cone of slope
    q +/- delta_q widened by the measured step jitter, so a positive margin
    is a proof that the two robots stay apart on that stretch.
    """
    thr = geom.threshold
    rates = s.rates or axial_rate_profile(s, s.rate_window)
    plans = {p.robot: p for p in s.plans}

    c1, c2 = {}, {}
    prev = None
    for plan in s.plans:
        if plan.wrap_index is None and plan.offset_index is None:
            continue
        off_x = float(plan.track.x0[0])
        c1[plan.robot] = (off_x - plan.x_start - thr, plan.x_end - off_x - thr)
        t_star = float(plan.track.end[plan.wrap_index - 1]) if plan.wrap_index else plan.makespan
        if prev is not None:
            c2[(prev[0], plan.robot)] = t_star - prev[1]
        prev = (plan.robot, t_star)

    phases = {p.robot: _phases(p, rates[i], s.rate_window) for i, p in enumerate(s.plans)}
    eq7, eq8, eq9 = {}, {}, {}
    named = set()
    pairs = geom.pair_count
    for i in range(pairs):
        b, t = geom.bottom(i), geom.top(i)
        if b not in plans or t not in plans or not len(plans[t].track) or not len(plans[b].track):
            continue
        tph = {ph.label: ph for ph in phases[t]}
        bph = phases[b][0]
        first = tph.get("pre", tph.get("all"))
        eq8[(b, t)] = _separation_bound(bph, first) - thr
        named.add((b, t, first.label))
        if "post" in tph:
            eq9[(b, t)] = _separation_bound(bph, tph["post"]) - thr
            named.add((b, t, "post"))
        if i > 0:
            tp = geom.top(i - 1)
            if tp in plans and len(plans[tp].track):
                prev_ph = {ph.label: ph for ph in phases[tp]}
                ph = prev_ph.get("pre", prev_ph.get("all"))
                eq7[(b, tp)] = _separation_bound(bph, ph) - thr
                named.add((b, tp, ph.label))

    other = math.inf
    robots = sorted(phases)
    for a, c in itertools.combinations(robots, 2):
        for pa in phases[a]:
            for pc in phases[c]:
                if (a, c, pc.label) in named or (c, a, pa.label) in named:
                    continue
                other = min(other, _separation_bound(pa, pc) - thr)

    mon = collision_monitor(s.tracks, thr)
    return ConstraintReport(thr, c1, c2, eq7, eq8, eq9, other, mon.min_distance, mon.first_violation, rates)
