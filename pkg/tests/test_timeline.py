import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wingsched.timeline import Track, collision_monitor, scan_monitor, track_pair


def track(rows):
    """rows of (start, end, x, y)"""
    if not rows:
        return Track.empty()
    s, e, x, y = zip(*rows)
    return Track.from_points(range(len(rows)), s, e, x, y)


def test_far_apart_passes():
    a = track([(0, 10, 0.0, 0.0), (10, 20, 1.0, 0.0)])
    b = track([(0, 20, 4.0001, 0.0)])
    mon = collision_monitor([a, b], 3.0)
    assert mon.ok and mon.min_distance == pytest.approx(3.0001)


def test_threshold_is_inclusive():
    a = track([(0, 10, 0.0, 0.0)])
    b = track([(0, 10, 3.0, 0.0)])
    mon = collision_monitor([a, b], 3.0)
    assert not mon.ok and mon.first_violation == 0.0 and mon.violating_pair == (0, 1)


def test_touching_intervals_do_not_overlap():
    a = track([(0, 10, 0.0, 0.0)])
    b = track([(10, 20, 0.0, 0.0)])
    assert collision_monitor([a, b], 3.0).ok


def test_crossing_schedule_first_violation():
    # robot a sweeps right, robot b sweeps left; they meet in the middle
    a = track([(10 * k, 10 * k + 10, 2.0 * k, 0.0) for k in range(10)])
    b = track([(10 * k, 10 * k + 10, 18.0 - 2.0 * k, 0.0) for k in range(10)])
    mon = collision_monitor([a, b], 3.0)
    best, first = scan_monitor([a, b], 3.0, dt=0.1)
    assert mon.first_violation == pytest.approx(first)
    assert mon.min_distance == pytest.approx(best) == 2.0
    # gap 18 - 4k <= 3 first at k = 4
    assert mon.first_violation == 40.0


def test_boxes_use_rectangle_distance():
    a = Track(np.array([0]), np.array([0.0]), np.array([5.0]), np.array([0.0]), np.array([2.0]),
              np.array([0.0]), np.array([1.0]))
    b = track([(0, 5, 5.0, 5.0)])
    d, _, _ = track_pair(a, b, -1.0)
    assert d == pytest.approx(math.hypot(3.0, 4.0))


def test_empty_tracks():
    assert track_pair(Track.empty(), track([(0, 1, 0, 0)]), 3.0) == (math.inf, math.inf, 0)
    assert collision_monitor([], 3.0).ok


@st.composite
def robot_tracks(draw):
    n_r = draw(st.integers(2, 4))
    out = []
    for _ in range(n_r):
        t = 0
        rows = []
        for _ in range(draw(st.integers(0, 6))):
            t += draw(st.integers(0, 3))
            d = draw(st.integers(1, 5))
            rows.append((t, t + d, draw(st.integers(0, 12)) / 2, draw(st.integers(-4, 4)) / 2))
            t += d
        out.append(track(rows))
    return out


@given(robot_tracks(), st.sampled_from([0.5, 1.0, 3.0]))
@settings(max_examples=200, deadline=None)
def test_exact_monitor_matches_time_scan(tracks, thr):
    # integer endpoints: every overlap contains a scan instant at its start
    mon = collision_monitor(tracks, thr)
    best, first = scan_monitor(tracks, thr, dt=0.5)
    if math.isinf(mon.min_distance):
        assert math.isinf(best)
    else:
        assert mon.min_distance == pytest.approx(best)
    if first is None:
        assert mon.first_violation is None
    else:
        assert mon.first_violation == pytest.approx(first)
