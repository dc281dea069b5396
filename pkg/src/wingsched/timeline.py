"""Per-robot timelines and the exact pairwise-distance monitor.

A robot's end effector sits at a task's position for the whole service
interval and jumps between tasks, so positions are piecewise constant and
the minimum distance between two robots only has to be checked on
overlapping intervals. Intervals may carry a bounding box instead of a
point (a city of several holes); the box-to-box distance is then a lower
bound on the true distance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

WAIT = -1


@dataclass
class Track:
    """Time-ordered, non-overlapping intervals of one robot."""

    ids: np.ndarray
    start: np.ndarray
    end: np.ndarray
    x0: np.ndarray
    x1: np.ndarray
    y0: np.ndarray
    y1: np.ndarray

    @classmethod
    def empty(cls) -> "Track":
        z = np.zeros(0)
        return cls(np.zeros(0, dtype=np.int64), z, z, z, z, z, z)

    @classmethod
    def from_points(cls, ids, start, end, x, y) -> "Track":
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return cls(
            np.asarray(ids, dtype=np.int64),
            np.asarray(start, dtype=float),
            np.asarray(end, dtype=float),
            x, x, y, y,
        )

    def __len__(self) -> int:
        return len(self.ids)

    def select(self, mask: np.ndarray) -> "Track":
        return Track(
            self.ids[mask], self.start[mask], self.end[mask],
            self.x0[mask], self.x1[mask], self.y0[mask], self.y1[mask],
        )

    def shifted(self, dt: float) -> "Track":
        return Track(self.ids, self.start + dt, self.end + dt, self.x0, self.x1, self.y0, self.y1)

    @property
    def finish(self) -> float:
        return float(self.end[-1]) if len(self) else 0.0

    def rows(self) -> list[dict]:
        return [
            {
                "task": int(i),
                "x": float((a + b) / 2),
                "y": float((c + d) / 2),
                "start": float(s),
                "end": float(e),
            }
            for i, s, e, a, b, c, d in zip(
                self.ids, self.start, self.end, self.x0, self.x1, self.y0, self.y1
            )
        ]


def concat(tracks: list[Track]) -> Track:
    tracks = [t for t in tracks if len(t)]
    if not tracks:
        return Track.empty()
    return Track(*(np.concatenate([getattr(t, f) for t in tracks]) for f in
                   ("ids", "start", "end", "x0", "x1", "y0", "y1")))


@njit(cache=True)
def _box_dist(ax0, ax1, ay0, ay1, bx0, bx1, by0, by1):
    dx = max(0.0, max(bx0 - ax1, ax0 - bx1))
    dy = max(0.0, max(by0 - ay1, ay0 - by1))
    return np.sqrt(dx * dx + dy * dy)


@njit(cache=True)
def pair_min_distance(sa, ea, ax0, ax1, ay0, ay1, sb, eb, bx0, bx1, by0, by1, threshold):
    """Minimum distance over overlapping intervals of two tracks, the
    earliest time the distance is <= threshold (inf if never) and the number
    of overlapping interval pairs that close."""
    best = np.inf
    first = np.inf
    count = 0
    i = 0
    j = 0
    na = sa.shape[0]
    nb = sb.shape[0]
    while i < na and j < nb:
        if ea[i] <= sb[j]:
            i += 1
            continue
        if eb[j] <= sa[i]:
            j += 1
            continue
        d = _box_dist(ax0[i], ax1[i], ay0[i], ay1[i], bx0[j], bx1[j], by0[j], by1[j])
        if d < best:
            best = d
        if d <= threshold:
            count += 1
            t = max(sa[i], sb[j])
            if t < first:
                first = t
        if ea[i] <= eb[j]:
            i += 1
        else:
            j += 1
    return best, first, count


def track_pair(a: Track, b: Track, threshold: float) -> tuple[float, float, int]:
    if not len(a) or not len(b):
        return np.inf, np.inf, 0
    return pair_min_distance(
        a.start, a.end, a.x0, a.x1, a.y0, a.y1,
        b.start, b.end, b.x0, b.x1, b.y0, b.y1, threshold,
    )


@dataclass(frozen=True)
class MonitorResult:
    min_distance: float
    first_violation: float | None
    violating_pair: tuple[int, int] | None
    threshold: float

    @property
    def ok(self) -> bool:
        return self.first_violation is None


def collision_monitor(tracks: list[Track], threshold: float) -> MonitorResult:
    """Exact minimum pairwise distance over a set of robot timelines.

    A violation is any instant where two robots are within ``threshold``
    (inclusive); the earliest such instant is reported.
    """
    best = np.inf
    first = np.inf
    pair = None
    for a in range(len(tracks)):
        for b in range(a + 1, len(tracks)):
            d, t, _ = track_pair(tracks[a], tracks[b], threshold)
            best = min(best, d)
            if t < first:
                first, pair = t, (a, b)
    return MonitorResult(
        float(best),
        None if not np.isfinite(first) else float(first),
        pair,
        threshold,
    )


def scan_monitor(tracks: list[Track], threshold: float, dt: float = 0.1) -> tuple[float, float | None]:
    """Brute-force time scan; used only as a cross-check of the exact monitor."""
    horizon = max((t.finish for t in tracks), default=0.0)
    best, first = np.inf, None
    for k in range(int(np.ceil(horizon / dt)) + 1):
        now = k * dt
        pos = []
        for tr in tracks:
            idx = np.searchsorted(tr.start, now, side="right") - 1
            if idx >= 0 and tr.start[idx] <= now < tr.end[idx]:
                pos.append((tr.x0[idx], tr.x1[idx], tr.y0[idx], tr.y1[idx]))
        for a in range(len(pos)):
            for b in range(a + 1, len(pos)):
                d = _box_dist(*pos[a], *pos[b])
                best = min(best, d)
                if d <= threshold and first is None:
                    first = now
    return best, first
