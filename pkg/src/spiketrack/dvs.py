"""Event-camera emulation: per-pixel log-luminance change quantization.

Each pixel keeps a reference log-luminance. Feeding a new frame emits
trunc((ln(I + eps) - ref) / C) signed events per pixel and moves the
reference by that many thresholds, so sub-threshold residuals carry over
to later frames exactly like charge accumulation on a real sensor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DvsError(ValueError):
    pass


@dataclass
class EventStream:
    """Columnar event record: times (s), pixel coords, polarity (+1/-1)."""

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    p: np.ndarray

    def __len__(self):
        return len(self.t)

    @staticmethod
    def empty() -> "EventStream":
        return EventStream(
            t=np.empty(0, dtype=np.float64),
            x=np.empty(0, dtype=np.uint16),
            y=np.empty(0, dtype=np.uint16),
            p=np.empty(0, dtype=np.int8),
        )

    @staticmethod
    def concatenate(streams) -> "EventStream":
        streams = [s for s in streams if len(s)]
        if not streams:
            return EventStream.empty()
        return EventStream(
            t=np.concatenate([s.t for s in streams]),
            x=np.concatenate([s.x for s in streams]),
            y=np.concatenate([s.y for s in streams]),
            p=np.concatenate([s.p for s in streams]),
        )


@dataclass
class DvsState:
    """Per-pixel reference memory plus camera parameters.

    refractory (seconds) caps how many events one pixel may emit per
    frame; noise_rate adds spurious seeded events. Both default off.
    """

    ref_log: np.ndarray
    contrast: float = 0.15
    eps: float = 1e-3
    frame_period: float = 0.1
    refractory: float = 0.0
    noise_rate: float = 0.0
    jitter: bool = False
    seed: int = 0


def init_reference(frame0: np.ndarray, contrast: float = 0.15, eps: float = 1e-3,
                   frame_period: float = 0.1, **knobs) -> DvsState:
    """Build the camera state from the first frame; emits no events."""
    if contrast <= 0:
        raise DvsError(f"contrast threshold must be > 0, got {contrast}")
    if eps <= 0:
        raise DvsError(f"luminance floor eps must be > 0, got {eps}")
    if frame_period <= 0:
        raise DvsError(f"frame_period must be > 0, got {frame_period}")
    frame0 = np.asarray(frame0, dtype=np.float64)
    return DvsState(
        ref_log=np.log(frame0 + eps),
        contrast=contrast,
        eps=eps,
        frame_period=frame_period,
        **knobs,
    )


def emulate_step(state: DvsState, frame: np.ndarray, k: int) -> EventStream:
    """Emit events for one new frame, stamped inside (k*T, (k+1)*T).

    Per pixel: n = trunc(dlog / C) events of polarity sign(n), evenly
    spaced in the open interval; the reference moves by n*C. The returned
    stream is sorted by (t, y, x) and is deterministic for fixed inputs.
    """
    frame = np.asarray(frame, dtype=np.float64)
    if frame.shape != state.ref_log.shape:
        raise DvsError(
            f"frame shape {frame.shape} does not match camera {state.ref_log.shape}"
        )
    c = state.contrast
    q = (np.log(frame + state.eps) - state.ref_log) / c
    # guard: a log step engineered to be exactly m*C must count m events
    # despite float rounding
    n = np.trunc(q + np.copysign(1e-9, q)).astype(np.int64)
    if state.refractory > 0:
        cap = max(1, int(state.frame_period / state.refractory))
        n = np.clip(n, -cap, cap)
    state.ref_log += n * c

    counts = np.abs(n)
    ys, xs = np.nonzero(counts)
    if len(ys) == 0:
        stream = EventStream.empty()
    else:
        m = counts[ys, xs]
        pol = np.sign(n[ys, xs]).astype(np.int8)
        total = int(m.sum())
        rep = np.repeat(np.arange(len(m)), m)
        rank = np.arange(total) - np.repeat(np.cumsum(m) - m, m)
        t0 = k * state.frame_period
        t = t0 + (rank + 1) / (m[rep] + 1) * state.frame_period
        stream = EventStream(
            t=t,
            x=xs[rep].astype(np.uint16),
            y=ys[rep].astype(np.uint16),
            p=pol[rep],
        )

    if state.noise_rate > 0:
        stream = EventStream.concatenate([stream, _noise_events(state, k)])
    if state.jitter and len(stream):
        rng = np.random.default_rng([state.seed, k, 1])
        gap = state.frame_period / 1000.0
        stream.t = stream.t + rng.uniform(-0.4, 0.4, size=len(stream)) * gap
        lo = k * state.frame_period
        np.clip(stream.t, lo + 1e-12, lo + state.frame_period - 1e-12, out=stream.t)
    order = np.lexsort((stream.x, stream.y, stream.t))
    return EventStream(t=stream.t[order], x=stream.x[order],
                       y=stream.y[order], p=stream.p[order])


def _noise_events(state: DvsState, k: int) -> EventStream:
    rng = np.random.default_rng([state.seed, k, 2])
    h, w = state.ref_log.shape
    hits = rng.random((h, w)) < state.noise_rate
    ys, xs = np.nonzero(hits)
    if len(ys) == 0:
        return EventStream.empty()
    t = (k + rng.random(len(ys))) * state.frame_period
    pol = rng.choice(np.array([-1, 1], dtype=np.int8), size=len(ys))
    return EventStream(t=t, x=xs.astype(np.uint16), y=ys.astype(np.uint16), p=pol)
