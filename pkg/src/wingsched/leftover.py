"""Leftover cities, the initial conflict-free leftover schedule and the
market-based rebalancing of that schedule."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .errors import LeftoverError
from .partitioner import PartitionSet
from .timeline import Track, collision_monitor, track_pair
from .workpart import RobotGeometry, Task

MAX_CITY_SIZE = 16
DEFAULT_BETA = 20.0


@dataclass(frozen=True)
class City:
    id: int
    members: tuple[int, ...]
    service_time: float
    x0: float
    x1: float
    y0: float
    y1: float
    reach: frozenset[int]
    flagged: bool = False  # isolated singleton kept as its own city

    @property
    def x(self) -> float:
        return (self.x0 + self.x1) / 2

    @property
    def y(self) -> float:
        return (self.y0 + self.y1) / 2

    def to_dict(self) -> dict:
        return {
            "id": self.id, "members": list(self.members), "service_time": self.service_time,
            "bbox": [self.x0, self.x1, self.y0, self.y1], "reach": sorted(self.reach),
            "flagged": self.flagged,
        }


def _make_city(cid: int, tasks: list[Task], reach: frozenset[int], flagged=False) -> City:
    xs = [t.x for t in tasks]
    ys = [t.y for t in tasks]
    return City(cid, tuple(t.id for t in tasks), float(sum(t.service_time for t in tasks)),
                min(xs), max(xs), min(ys), max(ys), reach, flagged)


def _chunks(run: list, size: int) -> list[list]:
    k = -(-len(run) // size)
    base, extra = divmod(len(run), k)
    out, i = [], 0
    for c in range(k):
        n = base + (1 if c < extra else 0)
        out.append(run[i:i + n])
        i += n
    return out


def _box_gap(a: list[Task], b: list[Task]) -> float:
    ax = [t.x for t in a]
    bx = [t.x for t in b]
    ay = [t.y for t in a]
    by = [t.y for t in b]
    dx = max(0.0, min(bx) - max(ax), min(ax) - max(bx))
    dy = max(0.0, min(by) - max(ay), min(ay) - max(by))
    return math.hypot(dx, dy)


def cluster_cities(
    tasks: list[Task], geom: RobotGeometry, *, max_size: int = MAX_CITY_SIZE,
    singletons: bool = False, merge_radius: float | None = None,
) -> list[City]:
    """Group leftover tasks into cities.

    A city is a run of consecutive holes on one rib or spar segment that all
    share the same set of reaching robots, cut into near-equal chunks of at
    most ``max_size``. With ``singletons`` every task becomes its own city.
    An isolated hole joins the nearest same-reach city on the same rib or
    spar within ``merge_radius`` (default: one end-effector diameter) or
    stays alone and is flagged.
    """
    mat = geom.reach_matrix(tasks) if tasks else np.zeros((geom.robot_count, 0), dtype=bool)
    reach = {t.id: frozenset(int(r) for r in np.flatnonzero(mat[:, k])) for k, t in enumerate(tasks)}
    for t in tasks:
        if not reach[t.id]:
            raise LeftoverError(f"task {t.id} at ({t.x:.2f}, {t.y:.2f}) is out of every robot's reach")
    if singletons:
        ordered = sorted(tasks, key=lambda t: (t.x, t.y, t.id))
        return [_make_city(k, [t], reach[t.id]) for k, t in enumerate(ordered)]

    groups: dict[tuple, list[Task]] = defaultdict(list)
    for t in tasks:
        groups[(t.feature_key, tuple(sorted(reach[t.id])))].append(t)
    groups_list: list[tuple[list[Task], frozenset[int]]] = []
    lonely: list[tuple[Task, frozenset[int]]] = []
    for (_, rk), members in sorted(groups.items()):
        members.sort(key=lambda t: t.seq)
        run = [members[0]]
        runs = []
        for t in members[1:]:
            if t.seq == run[-1].seq + 1:
                run.append(t)
            else:
                runs.append(run)
                run = [t]
        runs.append(run)
        for r in runs:
            if len(r) == 1:
                lonely.append((r[0], frozenset(rk)))
            else:
                groups_list.extend((c, frozenset(rk)) for c in _chunks(r, max_size))

    radius = geom.d_ee if merge_radius is None else merge_radius
    flagged = []
    for t, rk in lonely:
        best, best_d = None, math.inf
        for k, (members, mrk) in enumerate(groups_list):
            if mrk != rk or len(members) >= max_size or members[0].feature_key[:2] != t.feature_key[:2]:
                continue
            d = _box_gap([t], members)
            if d < best_d:
                best, best_d = k, d
        if best is not None and best_d <= radius:
            groups_list[best][0].append(t)
        else:
            flagged.append(([t], rk))

    raw = [(m, rk, False) for m, rk in groups_list] + [(m, rk, True) for m, rk in flagged]
    raw.sort(key=lambda c: (min(t.x for t in c[0]), min(t.y for t in c[0]), min(t.id for t in c[0])))
    return [_make_city(k, sorted(m, key=lambda t: t.seq), rk, fl) for k, (m, rk, fl) in enumerate(raw)]


# --- schedule matrix -----------------------------------------------------------


@dataclass
class ScheduleMatrix:
    """Per-robot ordered city rows run back to back from ``start``.

    ``holds`` delays the first city of a row. Only the initial repair sets
    it; the market leaves holds as they are.
    """

    rows: list[list[int]]
    cities: list[City]
    start: float = 0.0
    notes: list[str] = field(default_factory=list)
    holds: list[float] = field(default_factory=list)

    def __post_init__(self):
        if not self.holds:
            self.holds = [0.0] * len(self.rows)
        if len(self.holds) != len(self.rows):
            raise ValueError("one hold per row is required")

    def copy(self) -> "ScheduleMatrix":
        return ScheduleMatrix([list(r) for r in self.rows], self.cities, self.start, list(self.notes),
                              list(self.holds))

    def row_start(self, i: int) -> float:
        return self.start + self.holds[i]

    @property
    def n_c(self) -> int:
        return sum(len(r) for r in self.rows)

    @property
    def n_s(self) -> int:
        """Row padding length: cheapest cities needed to exceed an equal share,
        or the longest row, whichever is larger."""
        times = sorted(self.cities[c].service_time for r in self.rows for c in r)
        share = sum(times) / max(len(self.rows), 1)
        acc, need = 0.0, 0
        for t in times:
            acc += t
            need += 1
            if acc > share:
                break
        return max(need, max((len(r) for r in self.rows), default=0))

    def padded(self) -> np.ndarray:
        """Rows as a dense matrix of city ids with -1 for empty slots."""
        out = np.full((len(self.rows), self.n_s), -1, dtype=np.int64)
        for i, r in enumerate(self.rows):
            out[i, :len(r)] = r
        return out

    def row_times(self) -> np.ndarray:
        return np.array([sum(self.cities[c].service_time for c in r) for r in self.rows], dtype=float)

    def row_track(self, i: int, row: list[int] | None = None) -> Track:
        return _row_track(self.rows[i] if row is None else row, self.cities, self.row_start(i))

    def tracks(self) -> list[Track]:
        return [self.row_track(i) for i in range(len(self.rows))]

    def row_ends(self) -> np.ndarray:
        """Finish time of each row relative to ``start``."""
        return self.row_times() + np.asarray(self.holds, dtype=float)

    @property
    def makespan(self) -> float:
        return float(self.row_ends().max(initial=0.0))

    def min_distance(self, threshold: float = 0.0):
        return collision_monitor(self.tracks(), threshold)

    def task_rows(self) -> list[list[int]]:
        return [[t for c in r for t in self.cities[c].members] for r in self.rows]

    def to_dict(self) -> dict:
        return {
            "start": self.start,
            "rows": [list(r) for r in self.rows],
            "holds": list(self.holds),
            "row_times": self.row_times().tolist(),
            "cities": [c.to_dict() for c in self.cities],
            "notes": list(self.notes),
        }


def _row_track(row: list[int], cities: list[City], start: float) -> Track:
    if not row:
        return Track.empty()
    cs = [cities[c] for c in row]
    dur = np.array([c.service_time for c in cs])
    end = start + np.cumsum(dur)
    return Track(
        np.array(row, dtype=np.int64), end - dur, end,
        np.array([c.x0 for c in cs]), np.array([c.x1 for c in cs]),
        np.array([c.y0 for c in cs]), np.array([c.y1 for c in cs]),
    )


def _min_dist(tracks: list[Track]) -> float:
    best = math.inf
    for a in range(len(tracks)):
        for b in range(a + 1, len(tracks)):
            best = min(best, track_pair(tracks[a], tracks[b], -1.0)[0])
    return best


# --- initial leftover schedule -------------------------------------------------


def _home_pair(city: City, intervals, geom: RobotGeometry) -> int:
    reachable = [i for i in range(len(intervals))
                 if geom.bottom(i) in city.reach or geom.top(i) in city.reach]
    if not reachable:
        raise LeftoverError(f"city {city.id} is not reachable by any robot pair")
    for i in reachable:
        lo, hi = intervals[i]
        last = i == len(intervals) - 1
        if lo <= city.x < hi or (last and city.x == hi):
            return i
    return min(reachable, key=lambda i: (max(intervals[i][0] - city.x, city.x - intervals[i][1], 0.0), i))


def _split_band(band: list[City], lo: float, hi: float, thr: float) -> tuple[int, bool]:
    """Index splitting the band pool into a bottom prefix and top suffix with
    t_bottom <= t_top, as equal as possible, honouring the spacing rule when
    some split can."""
    times = np.array([c.service_time for c in band])
    total = times.sum()
    pre = np.concatenate([[0.0], np.cumsum(times)])
    best, best_gap, spaced = 0, math.inf, False
    for c in range(len(band) + 1):
        tb, tt = pre[c], total - pre[c]
        if tb > tt + 1e-9:
            continue
        split_x = band[c].x0 if c < len(band) else hi
        ok = split_x - lo > thr and hi - split_x > thr
        gap = tt - tb
        if (ok, -gap) > (spaced, -best_gap):
            best, best_gap, spaced = c, gap, ok
    return best, spaced


def _assemble(pools, geom: RobotGeometry, intervals, thr):
    rows = [[] for _ in range(geom.robot_count)]
    ext_times, notes = [], []
    for i, (band, bonly, tonly) in enumerate(pools):
        band = sorted(band, key=lambda c: (c.x, c.y, c.id))
        c, spaced = _split_band(band, *intervals[i], thr)
        if band and not spaced:
            notes.append(f"pair {i + 1}: no band split keeps both extended parts longer than {thr} ft")
        b, t = geom.bottom(i), geom.top(i)
        rows[b] = [x.id for x in band[:c]] + [x.id for x in sorted(bonly, key=lambda c: (c.x, c.y, c.id))]
        rows[t] = [x.id for x in band[c:]] + [x.id for x in sorted(tonly, key=lambda c: (c.x, c.y, c.id))]
        ext_times.append(sum(x.service_time for x in band[:c]))
    return rows, ext_times, notes


def _pair_times(pool, interval, thr) -> tuple[float, float]:
    band, bonly, tonly = pool
    band = sorted(band, key=lambda c: (c.x, c.y, c.id))
    c, _ = _split_band(band, *interval, thr)
    return (sum(x.service_time for x in band[:c]) + sum(x.service_time for x in bonly),
            sum(x.service_time for x in band[c:]) + sum(x.service_time for x in tonly))


def _balance_pairs(pools, geom: RobotGeometry, intervals, thr) -> None:
    """Shift band cities across each pair boundary while that shortens the
    longest row of the two pairs involved."""
    def longest(i):
        return max(*_pair_times(pools[i], intervals[i], thr), *_pair_times(pools[i + 1], intervals[i + 1], thr))

    for i in range(len(intervals) - 1):
        both = (geom.bottom(i), geom.top(i), geom.bottom(i + 1), geom.top(i + 1))
        best = longest(i)
        while True:
            lower, upper = pools[i][0], pools[i + 1][0]
            down = [c for c in lower if all(r in c.reach for r in both)]
            up = [c for c in upper if all(r in c.reach for r in both)]
            moves = []
            if down:
                moves.append((max(down, key=lambda c: (c.x, c.y, c.id)), lower, upper))
            if up:
                moves.append((min(up, key=lambda c: (c.x, c.y, c.id)), upper, lower))
            improved = False
            for c, src, dst in moves:
                src.remove(c)
                dst.append(c)
                trial = longest(i)
                if trial < best - 1e-9:
                    best, improved = trial, True
                    break
                dst.pop()
                src.append(c)
            if not improved:
                break


def build_initial_leftover(
    cities: list[City], p: PartitionSet, geom: RobotGeometry, *, start: float = 0.0,
    max_repairs: int | None = None,
) -> ScheduleMatrix:
    """Offset-style leftover schedule over partitions extended across the
    overlap band.

    Each pair's band cities are split so the bottom robot's extended part is
    no longer than the top robot's; side-only cities follow in ascending x.
    The result is checked with the exact monitor and any remaining conflict
    is removed by re-placing one of the conflicting cities.
    """
    thr = geom.threshold
    if not geom.band_width > thr:
        raise LeftoverError(f"overlap band width {geom.band_width} must exceed alpha*d_ee = {thr}")
    intervals = p.pair_intervals
    pools = [([], [], []) for _ in intervals]
    for c in cities:
        i = _home_pair(c, intervals, geom)
        b, t = geom.bottom(i), geom.top(i)
        if b in c.reach and t in c.reach:
            pools[i][0].append(c)
        elif b in c.reach:
            pools[i][1].append(c)
        elif t in c.reach:
            pools[i][2].append(c)
        else:
            raise LeftoverError(f"city {c.id} is reachable by pair {i + 1} only through its neighbours")

    _balance_pairs(pools, geom, intervals, thr)
    rows, ext, notes = _assemble(pools, geom, intervals, thr)
    # increasing extended times along the axis: hand boundary band cities on
    moves = 0
    for i in range(len(intervals) - 1):
        while not ext[i] < ext[i + 1] and moves < len(cities):
            nxt_b = geom.bottom(i + 1)
            movable = [c for c in pools[i][0] if nxt_b in c.reach and geom.top(i + 1) in c.reach]
            if not movable:
                break
            mv = max(movable, key=lambda c: (c.x, c.y, c.id))
            pools[i][0].remove(mv)
            pools[i + 1][0].append(mv)
            moves += 1
            rows, ext, notes = _assemble(pools, geom, intervals, thr)
        if not ext[i] < ext[i + 1]:
            notes.append(f"extended bottom times not increasing between pairs {i + 1} and {i + 2}")

    s = ScheduleMatrix(rows, cities, start, notes)
    _repair(s, geom, max_repairs)
    return s


def conflict_count(tracks: list[Track], thr: float) -> int:
    return sum(track_pair(tracks[a], tracks[b], thr)[2]
               for a in range(len(tracks)) for b in range(a + 1, len(tracks)))


def _pair_results(tracks: list[Track], thr: float, changed=None, base=None) -> dict:
    """``track_pair`` for every robot pair, reusing ``base`` for pairs that
    touch no row in ``changed``."""
    out = {}
    for a in range(len(tracks)):
        for b in range(a + 1, len(tracks)):
            if base is not None and a not in changed and b not in changed:
                out[a, b] = base[a, b]
            else:
                out[a, b] = track_pair(tracks[a], tracks[b], thr)
    return out


def _conflict_key(tracks: list[Track], thr: float, changed=None, base=None) -> tuple[int, float, float]:
    res = _pair_results(tracks, thr, changed, base).values()
    return (sum(n for _, _, n in res), -min((f for _, f, _ in res), default=math.inf),
            -min((d for d, _, _ in res), default=math.inf))


def _repair(s: ScheduleMatrix, geom: RobotGeometry, max_repairs: int | None) -> None:
    """Remove conflicts from the initial leftover schedule.

    Each step either moves one city that is active at the first conflict or
    delays the start of one of the two conflicting rows. Only steps that lower
    the conflict key (number of too-close interval overlaps, then how late the
    first one occurs) are considered; among them the earliest finish wins,
    which keeps rows balanced. If no step helps, one conflicting row waits for
    the other to finish. When the step budget runs out all rows are
    serialised, which is conflict-free by construction.
    """
    thr = geom.threshold
    limit = 4 * max(len(s.cities), 1) if max_repairs is None else max_repairs
    for _ in range(limit):
        mon = s.min_distance(thr)
        if mon.ok:
            return
        current = _conflict_key(s.tracks(), thr)
        a, b = mon.violating_pair
        options = _move_options(s, mon.first_violation, (b, a), thr, current)
        options += _hold_options(s, (a, b), thr, current)
        if not options:
            _hold_after(s, a, b)
            continue
        _, apply = min(options, key=lambda o: o[0])
        apply()
    if not s.min_distance(thr).ok:
        _serialise(s)
        s.notes.append(f"repair budget of {limit} steps exhausted; rows serialised")


def _span(s: ScheduleMatrix, rows: list[list[int]], holds: list[float]) -> float:
    return max((h + sum(s.cities[c].service_time for c in r) for r, h in zip(rows, holds)), default=0.0)


def _move_options(s: ScheduleMatrix, t: float, rows: tuple[int, ...], thr: float, current) -> list:
    tracks = s.tracks()
    base = _pair_results(tracks, thr)
    out = []
    for r in rows:
        tr = tracks[r]
        k = int(np.searchsorted(tr.start, t, side="right") - 1)
        if k < 0 or k >= len(tr) or tr.end[k] <= t:
            continue
        cid = s.rows[r][k]
        rest = [c for c in s.rows[r] if c != cid]
        without = list(tracks)
        without[r] = s.row_track(r, rest)
        for row in sorted(s.cities[cid].reach):
            target = rest if row == r else s.rows[row]
            for pos in range(len(target) + 1):
                trial = list(without)
                trial[row] = s.row_track(row, target[:pos] + [cid] + target[pos:])
                key = _conflict_key(trial, thr, {r, row}, base)
                if not key < current:
                    continue
                rows_after = [list(x) for x in s.rows]
                rows_after[r].remove(cid)
                rows_after[row].insert(pos, cid)
                rank = (_span(s, rows_after, s.holds), 0, key, r, row, pos)

                def apply(cid=cid, r=r, row=row, pos=pos):
                    s.rows[r].remove(cid)
                    s.rows[row].insert(pos, cid)
                    s.notes.append(f"moved city {cid} from r{r + 1} to r{row + 1} slot {pos}")
                out.append((rank, apply))
    return out


def _hold_options(s: ScheduleMatrix, rows: tuple[int, ...], thr: float, current) -> list:
    """Start delays for one of ``rows``. Candidates line an interval start of
    the held row up with an interval end of another row, the only points
    where the set of overlapping intervals changes."""
    tracks = s.tracks()
    base = _pair_results(tracks, thr)
    out = []
    for r in rows:
        own = tracks[r]
        if not len(own):
            continue
        ends = np.concatenate([tracks[o].end for o in range(len(tracks)) if o != r])
        cand = np.unique((ends[:, None] - own.start[None, :]).ravel())
        for dh in cand[cand > 1e-9]:
            trial = list(tracks)
            trial[r] = own.shifted(float(dh))
            key = _conflict_key(trial, thr, {r}, base)
            if not key < current:
                continue
            holds = list(s.holds)
            holds[r] += float(dh)
            rank = (_span(s, s.rows, holds), 1, key, r, float(dh), 0)

            def apply(r=r, dh=float(dh)):
                s.holds[r] += dh
                s.notes.append(f"held r{r + 1} by {dh:.1f} s")
            out.append((rank, apply))
    return out


def _hold_after(s: ScheduleMatrix, a: int, b: int) -> None:
    # hold whichever row yields the earlier finish once it waits for the other
    ends = s.row_ends()
    times = s.row_times()
    wait_b = ends[a] + times[b]
    wait_a = ends[b] + times[a]
    late, early = (b, a) if (wait_b, b) <= (wait_a, a) else (a, b)
    s.holds[late] = float(ends[early])
    s.notes.append(f"held r{late + 1} until r{early + 1} finishes at +{ends[early]:.1f} s")


def _serialise(s: ScheduleMatrix) -> None:
    acc = 0.0
    for i in np.argsort(np.asarray(s.holds), kind="stable"):
        s.holds[int(i)] = acc
        acc += float(s.row_times()[i])


# --- market --------------------------------------------------------------------


@dataclass
class MarketState:
    utilities: np.ndarray
    prices: np.ndarray
    margins: np.ndarray
    beta: float

    @classmethod
    def of(cls, s: ScheduleMatrix, beta: float = DEFAULT_BETA) -> "MarketState":
        n_r, n_c = len(s.rows), len(s.cities)
        t = s.row_times()
        total = t.sum()
        u = t / total if total > 0 else np.zeros(n_r)
        tmax = max((c.service_time for c in s.cities), default=1.0)
        prices = np.full((n_r, n_c), -np.inf)
        for i, r in enumerate(s.rows):
            for c in r:
                prices[i, c] = s.cities[c].service_time / tmax
        return cls(u, prices, beta * u[:, None] + prices, beta)


def _pop_std(u: np.ndarray) -> float:
    return float(np.std(u))


@dataclass(frozen=True)
class Sale:
    seller: int
    buyer: int
    city: int
    placement: int
    sigma_before: float
    sigma_after: float
    w_star: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


SPREAD_EPS = 1e-12
MARGIN_EPS = 1e-9


def _max_margin_after(s: ScheduleMatrix, ms: MarketState, seller: int, buyer: int, city: int, u_p: np.ndarray) -> float:
    best = -math.inf
    for r, row in enumerate(s.rows):
        prices = [ms.prices[r, c] for c in row if not (r == seller and c == city)]
        if r == buyer:
            prices.append(ms.prices[seller, city])
        if prices:
            best = max(best, ms.beta * u_p[r] + max(prices))
    return best


def candidate_buyers(s: ScheduleMatrix, ms: MarketState, seller: int, city: int, ceiling: float):
    """Admissible buyers for one city with their sigma reductions, best first.

    A buyer qualifies when it can reach the city, the sale strictly narrows
    the utility spread and no margin after the sale exceeds ``ceiling`` (the
    highest margin before the step). Comparing against the step's top margin
    rather than the entry being tried keeps an unsellable top city from
    blocking every later entry."""
    t = s.row_times()
    total = t.sum()
    sigma = _pop_std(ms.utilities)
    out = []
    dt = s.cities[city].service_time
    for k in range(len(s.rows)):
        if k == seller or k not in s.cities[city].reach:
            continue
        tp = t.copy()
        tp[seller] -= dt
        tp[k] += dt
        u_p = tp / total
        delta = sigma - _pop_std(u_p)
        if delta > SPREAD_EPS and _max_margin_after(s, ms, seller, k, city, u_p) <= ceiling + MARGIN_EPS:
            out.append((delta, k))
    out.sort(key=lambda v: (-v[0], v[1]))
    return out


def placement_distances(s: ScheduleMatrix, seller: int, city: int, buyer: int) -> list[float]:
    """Min pairwise distance of the whole proposed schedule for every
    insertion slot of ``city`` in the buyer's row."""
    rows = [list(r) for r in s.rows]
    rows[seller].remove(city)
    tracks = [s.row_track(i, r) for i, r in enumerate(rows)]
    others = [tracks[r] for r in range(len(rows)) if r != buyer]
    base = _min_dist(others)
    out = []
    for l in range(len(rows[buyer]) + 1):
        tk = s.row_track(buyer, rows[buyer][:l] + [city] + rows[buyer][l:])
        w = base
        for o in others:
            w = min(w, track_pair(tk, o, -1.0)[0])
        out.append(w)
    return out


def market_step(s: ScheduleMatrix, geom: RobotGeometry, beta: float = DEFAULT_BETA) -> tuple[ScheduleMatrix, Sale | None]:
    """Attempt one sale. Returns the new matrix and the sale, or the same
    matrix and ``None`` when no useful sale exists."""
    ms = MarketState.of(s, beta)
    thr = geom.threshold
    mu = float(ms.utilities.mean()) if len(ms.utilities) else 0.0
    entries = [(-ms.margins[i, j], i, j) for i, row in enumerate(s.rows) for j in row]
    entries.sort()
    sigma = _pop_std(ms.utilities)
    ceiling = -entries[0][0] if entries else 0.0
    for n, (neg_m, i, j) in enumerate(entries):
        if n > 0 and -neg_m - ms.prices[i, j] <= mu:
            break
        for delta, k in candidate_buyers(s, ms, i, j, ceiling):
            ws = placement_distances(s, i, j, k)
            l_star = int(np.argmax(ws))
            if ws[l_star] > thr:
                out = s.copy()
                out.rows[i].remove(j)
                out.rows[k].insert(l_star, j)
                after = _pop_std(MarketState.of(out, beta).utilities)
                assert after < sigma, "accepted sale must narrow the utility spread"
                return out, Sale(i, k, j, l_star, sigma, after, float(ws[l_star]))
    return s, None


@dataclass
class OptimizeResult:
    schedule: ScheduleMatrix
    sales: list[Sale]
    iterations: int
    capped: bool

    def trace(self) -> list[dict]:
        return [x.to_dict() for x in self.sales]


def optimize_leftover(s: ScheduleMatrix, geom: RobotGeometry, beta: float = DEFAULT_BETA,
                      max_iterations: int | None = None) -> OptimizeResult:
    """Sell cities until no useful sale remains (capped at n_c squared steps)."""
    cap = max(s.n_c, 1) ** 2 if max_iterations is None else max_iterations
    sales = []
    cur = s
    for it in range(cap):
        cur, sale = market_step(cur, geom, beta)
        if sale is None:
            return OptimizeResult(cur, sales, it, False)
        sales.append(sale)
    cur.notes.append(f"market stopped at the iteration cap of {cap}")
    return OptimizeResult(cur, sales, cap, True)
