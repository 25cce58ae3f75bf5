import math

import numpy as np
import pytest

from spiketrack import detect, dvs
from spiketrack import scene as sc


def stream(ts, xs, ys, ps=None):
    n = len(ts)
    return dvs.EventStream(
        t=np.asarray(ts, dtype=np.float64),
        x=np.asarray(xs, dtype=np.uint16),
        y=np.asarray(ys, dtype=np.uint16),
        p=np.asarray(ps if ps is not None else [1] * n, dtype=np.int8),
    )


class TestAccumulate:
    def test_empty_stream_pure_decay(self):
        surf = detect.EventSurface.blank(8, 8, tau=2.0, frame_period=0.1)
        surf.values[:] = 1.0
        detect.accumulate(surf, dvs.EventStream.empty(), 0.1)
        assert np.allclose(surf.values, math.exp(-0.5))

    def test_five_events_no_decay_interval(self):
        surf = detect.EventSurface.blank(8, 8)
        ev = stream([0.0] * 5, [3] * 5, [2] * 5)
        detect.accumulate(surf, ev, 0.0)
        assert surf.values[2, 3] == 5.0

    def test_polarity_ignored(self):
        surf = detect.EventSurface.blank(8, 8)
        detect.accumulate(surf, stream([0, 0], [1, 1], [1, 1], [1, -1]), 0.0)
        assert surf.values[1, 1] == 2.0

    def test_interleaved_equals_per_event_replay_oracle(self):
        rng = np.random.default_rng(11)
        n = 200
        ts = np.sort(rng.uniform(0, 1.0, n))
        xs = rng.integers(0, 8, n)
        ys = rng.integers(0, 8, n)
        tau, period, t_end = 0.7, 0.1, 1.2
        # interleave: one accumulate call per event, then decay to t_end
        surf = detect.EventSurface.blank(8, 8, tau=tau, frame_period=period)
        for i in range(n):
            detect.accumulate(surf, stream([ts[i]], [xs[i]], [ys[i]]), ts[i])
        detect.accumulate(surf, dvs.EventStream.empty(), t_end)
        # closed-form per-event weights
        expected = np.zeros((8, 8))
        for i in range(n):
            expected[ys[i], xs[i]] += math.exp(-(t_end - ts[i]) / (tau * period))
        assert np.allclose(surf.values, expected, atol=1e-12)

    def test_future_and_unsorted_rejected(self):
        surf = detect.EventSurface.blank(8, 8)
        with pytest.raises(detect.DetectError, match="future"):
            detect.accumulate(surf, stream([0.5], [0], [0]), 0.1)
        with pytest.raises(detect.DetectError, match="not sorted"):
            detect.accumulate(surf, stream([0.3, 0.1], [0, 0], [0, 0]), 0.5)
        detect.accumulate(surf, dvs.EventStream.empty(), 1.0)
        with pytest.raises(detect.DetectError, match="predates"):
            detect.accumulate(surf, stream([0.5], [0], [0]), 1.5)


class TestExtract:
    def test_all_zero_surface_empty(self):
        surf = detect.EventSurface.blank(16, 16)
        assert detect.extract_detections(surf) == []

    def test_three_by_three_block(self):
        surf = detect.EventSurface.blank(16, 16)
        surf.values[4:7, 8:11] = 2.0
        dets = detect.extract_detections(surf, a_min=1.5, min_pixels=3)
        assert len(dets) == 1
        det = dets[0]
        assert det.x == pytest.approx(9.0)
        assert det.y == pytest.approx(5.0)
        assert det.mass == pytest.approx(18.0)
        assert det.bbox == (8, 4, 10, 6)

    def test_min_pixels_discards(self):
        surf = detect.EventSurface.blank(16, 16)
        surf.values[2, 2] = 5.0
        assert detect.extract_detections(surf, min_pixels=3) == []

    def test_translation_equivariance(self):
        rng = np.random.default_rng(5)
        base = detect.EventSurface.blank(32, 32)
        base.values[8:13, 6:12] = rng.uniform(1.5, 4.0, size=(5, 6))
        moved = detect.EventSurface.blank(32, 32)
        moved.values[14:19, 15:21] = base.values[8:13, 6:12]
        a = detect.extract_detections(base)
        b = detect.extract_detections(moved)
        assert len(a) == len(b) == 1
        assert b[0].x - a[0].x == pytest.approx(9.0, abs=1e-12)
        assert b[0].y - a[0].y == pytest.approx(6.0, abs=1e-12)

    def test_mass_scaling_leaves_centroid(self):
        rng = np.random.default_rng(6)
        surf = detect.EventSurface.blank(32, 32)
        surf.values[8:13, 6:12] = rng.uniform(1.5, 4.0, size=(5, 6))
        doubled = detect.EventSurface.blank(32, 32)
        doubled.values = surf.values * 2
        a = detect.extract_detections(surf)[0]
        b = detect.extract_detections(doubled)[0]
        assert b.x == pytest.approx(a.x) and b.y == pytest.approx(a.y)
        assert b.mass == pytest.approx(2 * a.mass)

    def test_count_bounded_by_components(self):
        surf = detect.EventSurface.blank(32, 32)
        surf.values[2:6, 2:6] = 3.0
        surf.values[20:24, 20:24] = 3.0
        dets = detect.extract_detections(surf)
        assert len(dets) <= 2

    def test_order_total_and_deterministic(self):
        surf = detect.EventSurface.blank(32, 32)
        surf.values[2:5, 2:5] = 2.0
        surf.values[20:23, 20:23] = 2.0   # same mass, distinct x
        surf.values[10:14, 10:14] = 5.0
        dets = detect.extract_detections(surf)
        assert [round(d.mass) for d in dets] == [80, 18, 18]
        assert dets[1].x < dets[2].x


class TestSceneFidelity:
    def test_three_detections_within_two_px(self, default_scene, truth, frames):
        state = dvs.init_reference(frames[0])
        surf = detect.EventSurface.blank(default_scene.height, default_scene.width,
                                         frame_period=state.frame_period)
        for k in range(1, 60):
            ev = dvs.emulate_step(state, frames[k], k - 1)
            detect.accumulate(surf, ev, k * state.frame_period)
            dets = detect.extract_detections(surf, frame=k)
            if k < 2:
                continue
            assert len(dets) == 3, f"frame {k}: {len(dets)} detections"
            taken = set()
            for det in dets:
                d = np.hypot(truth.x[k] - det.x, truth.y[k] - det.y)
                order = np.argsort(d)
                j = next(int(i) for i in order if int(i) not in taken)
                taken.add(j)
                assert d[j] <= 2.0, f"frame {k}: {d[j]:.2f} px off"
