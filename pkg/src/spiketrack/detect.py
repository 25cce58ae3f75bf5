"""Pre-attentive event-side detection.

A leaky per-pixel accumulator (an un-thresholded LIF surface) collects
event mass; connected regions above a threshold become candidate
detections with mass-weighted sub-pixel centroids. Polarity is ignored:
both edges of a moving object contribute mass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .dvs import EventStream

EIGHT_CONNECTED = np.ones((3, 3), dtype=int)


class DetectError(ValueError):
    pass


@dataclass
class EventSurface:
    """Decaying accumulator. tau is in frames; last_update in seconds."""

    values: np.ndarray
    tau: float = 0.4
    frame_period: float = 0.1
    last_update: float = 0.0

    @staticmethod
    def blank(height: int, width: int, tau: float = 0.4,
              frame_period: float = 0.1) -> "EventSurface":
        return EventSurface(np.zeros((height, width)), tau=tau,
                            frame_period=frame_period)


@dataclass(frozen=True)
class Detection:
    x: float
    y: float
    mass: float
    bbox: tuple[int, int, int, int]  # x0, y0, x1, y1 inclusive
    frame: int = 0
    window: int = 0


def accumulate(surface: EventSurface, events: EventStream, until: float) -> EventSurface:
    """Decay the surface to `until`, then add 1 per event at its pixel.

    Events must be time-sorted, not earlier than the surface clock and
    not later than `until`. Mutates and returns the surface.
    """
    if until < surface.last_update:
        raise DetectError(
            f"cannot run the surface backwards: until={until} < {surface.last_update}"
        )
    if len(events):
        if np.any(np.diff(events.t) < 0):
            raise DetectError("event stream is not sorted by time")
        if events.t[0] < surface.last_update:
            raise DetectError(
                f"event at t={events.t[0]} predates surface clock {surface.last_update}"
            )
        if events.t[-1] > until:
            raise DetectError(f"future event at t={events.t[-1]} > until={until}")
    dt_frames = (until - surface.last_update) / surface.frame_period
    surface.values *= np.exp(-dt_frames / surface.tau)
    if len(events):
        np.add.at(surface.values, (events.y.astype(np.intp), events.x.astype(np.intp)), 1.0)
    surface.last_update = until
    return surface


def extract_detections(surface: EventSurface, a_min: float = 1.5, min_pixels: int = 3,
                       bridge: int = 2, frame: int = 0, window: int = 0) -> list[Detection]:
    """Threshold, 8-connect, and summarize clusters.

    Connectivity is evaluated on a mask dilated `bridge` pixels so that
    fragments of one object's event ring (the ring has gaps where the
    local contrast change stays under one threshold) merge into a single
    cluster; mass, centroid, and bbox use only the raw mask pixels, so
    the dilation never moves a centroid. Components with fewer than
    min_pixels raw pixels are discarded. Output is sorted by (mass desc,
    x, y): this is the deterministic association order.
    """
    a = surface.values
    mask = a >= a_min
    if bridge > 0:
        grown = ndimage.binary_dilation(mask, structure=EIGHT_CONNECTED,
                                        iterations=bridge)
    else:
        grown = mask
    labels, count = ndimage.label(grown, structure=EIGHT_CONNECTED)
    labels[~mask] = 0
    out = []
    for comp in range(1, count + 1):
        ys, xs = np.nonzero(labels == comp)
        if len(ys) < min_pixels:
            continue
        wgt = a[ys, xs]
        mass = float(wgt.sum())
        cx = float((wgt * xs).sum() / mass)
        cy = float((wgt * ys).sum() / mass)
        bbox = (int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max()))
        out.append(Detection(x=cx, y=cy, mass=mass, bbox=bbox, frame=frame, window=window))
    out.sort(key=lambda d: (-d.mass, d.x, d.y))
    return out
