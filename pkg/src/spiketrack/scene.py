"""Synthetic rotating-disk scenes with analytic ground truth.

A scene is a flat disk seen from above: bright shapes orbit a common
center at a fixed angular rate, optionally joined by "intruder" objects
that cross the image on straight lines. Frames are rasterized at 4x
supersampling and box-downsampled so sub-pixel motion still changes
pixel intensities, which the event-camera emulator depends on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

SHAPES = ("cross", "triangle", "circle", "square")

SUPERSAMPLE = 4


class SceneError(ValueError):
    """Raised when a scene configuration violates an invariant."""


@dataclass(frozen=True)
class SceneObject:
    """One object, either orbiting (orbit_radius > 0) or linear intruder.

    Exactly one motion mode must be active: orbit_radius > 0 with zero
    linear_velocity, or orbit_radius == 0 with nonzero linear_velocity.
    Intruders start at `start` (defaults to the scene center) on
    spawn_frame and keep a fixed orientation.
    """

    shape: str
    size: float
    orbit_radius: float = 0.0
    initial_angle: float = 0.0
    spawn_frame: int = 0
    linear_velocity: tuple[float, float] = (0.0, 0.0)
    start: tuple[float, float] | None = None
    label: int = 0


@dataclass(frozen=True)
class DiskScene:
    width: int = 128
    height: int = 128
    background_intensity: float = 0.2
    object_intensity: float = 0.9
    center: tuple[float, float] = (64.0, 64.0)
    omega: float = 0.05
    frame_count: int = 200
    pixel_noise_sigma: float = 0.0
    objects: tuple[SceneObject, ...] = ()
    seed: int = 0


@dataclass(frozen=True)
class GroundTruth:
    """Analytic per-frame, per-object state.

    Arrays are indexed [frame, object]. theta is unwrapped (cumulative);
    omega is the per-frame angular rate (0 for intruders).
    """

    labels: tuple[int, ...]
    shapes: tuple[str, ...]
    x: np.ndarray
    y: np.ndarray
    theta: np.ndarray
    omega: np.ndarray
    visible: np.ndarray


def default_scene(**overrides) -> DiskScene:
    """Three orbiting shapes: cross, triangle, circle (labels 1, 2, 3)."""
    objects = (
        SceneObject("cross", 11.0, orbit_radius=25.0, initial_angle=0.0, label=1),
        SceneObject("triangle", 9.0, orbit_radius=38.0, initial_angle=2 * math.pi / 3, label=2),
        SceneObject("circle", 8.0, orbit_radius=50.0, initial_angle=4 * math.pi / 3, label=3),
    )
    return DiskScene(objects=objects, **overrides)


def intruder_scene(spawn_frame: int = 80, **overrides) -> DiskScene:
    """Default scene plus a square crossing the image from spawn_frame on."""
    base = default_scene(**overrides)
    square = SceneObject(
        "square",
        10.0,
        orbit_radius=0.0,
        spawn_frame=spawn_frame,
        linear_velocity=(1.2, 0.6),
        start=(6.0, 24.0),
        label=4,
    )
    return replace(base, objects=base.objects + (square,))


def validate_scene(cfg: DiskScene) -> DiskScene:
    """Check every scene invariant; return the config unchanged if valid.

    Rejects: images smaller than 32 px, luminances out of order or range,
    non-finite motion parameters, orbits leaving the image, two orbits
    with identical radii (association ground truth would be ambiguous),
    duplicate labels, and objects with zero or two motion modes.
    """
    if cfg.width < 32 or cfg.height < 32:
        raise SceneError(f"image must be at least 32x32, got {cfg.width}x{cfg.height}")
    if not (0.0 <= cfg.background_intensity < cfg.object_intensity <= 1.0):
        raise SceneError(
            "need 0 <= background_intensity < object_intensity <= 1, got "
            f"{cfg.background_intensity}, {cfg.object_intensity}"
        )
    if not math.isfinite(cfg.omega):
        raise SceneError("omega must be finite")
    if cfg.frame_count < 1:
        raise SceneError(f"frame_count must be >= 1, got {cfg.frame_count}")
    if cfg.pixel_noise_sigma < 0:
        raise SceneError("pixel_noise_sigma must be >= 0")

    cx, cy = cfg.center
    labels = []
    orbit_radii = []
    for obj in cfg.objects:
        if obj.shape not in SHAPES:
            raise SceneError(f"unknown shape {obj.shape!r}")
        if obj.size <= 0 or not math.isfinite(obj.size):
            raise SceneError(f"object {obj.label}: bad size {obj.size}")
        if obj.spawn_frame < 0:
            raise SceneError(f"object {obj.label}: spawn_frame must be >= 0")
        orbiting = obj.orbit_radius > 0
        moving = obj.linear_velocity != (0.0, 0.0)
        if orbiting == moving:
            raise SceneError(
                f"object {obj.label}: exactly one of orbit_radius > 0 or "
                "linear_velocity != 0 must hold"
            )
        if orbiting:
            margin = obj.orbit_radius + obj.size / 2 + 1
            if (cx - margin < 0 or cx + margin > cfg.width - 1
                    or cy - margin < 0 or cy + margin > cfg.height - 1):
                raise SceneError(
                    f"object {obj.label}: orbit radius {obj.orbit_radius} leaves the image"
                )
            orbit_radii.append(obj.orbit_radius)
        if not all(math.isfinite(v) for v in (obj.orbit_radius, obj.initial_angle,
                                              *obj.linear_velocity)):
            raise SceneError(f"object {obj.label}: non-finite motion parameter")
        labels.append(obj.label)
    if len(set(labels)) != len(labels):
        raise SceneError(f"duplicate object labels: {labels}")
    if len(set(orbit_radii)) != len(orbit_radii):
        raise SceneError(f"two orbits share a radius: {sorted(orbit_radii)}")
    return cfg


def object_pose(scene: DiskScene, obj: SceneObject, k: int):
    """(x, y, orientation, visible) of one object at frame k.

    Orbiting objects are painted on the disk, so their own orientation
    advances with the orbit angle. Intruders translate with fixed
    orientation and are visible only while fully inside the image.
    """
    if obj.orbit_radius > 0:
        theta = obj.initial_angle + scene.omega * k
        cx, cy = scene.center
        x = cx + obj.orbit_radius * math.cos(theta)
        y = cy + obj.orbit_radius * math.sin(theta)
        return x, y, theta, k >= obj.spawn_frame
    sx, sy = obj.start if obj.start is not None else scene.center
    dt = k - obj.spawn_frame
    x = sx + obj.linear_velocity[0] * dt
    y = sy + obj.linear_velocity[1] * dt
    half = obj.size / 2
    inside = (half <= x <= scene.width - 1 - half) and (half <= y <= scene.height - 1 - half)
    return x, y, 0.0, (dt >= 0) and inside


def _shape_mask(shape: str, size: float, px: float, py: float, phi: float,
                gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Boolean inside-test of a rotated shape over sample coordinates."""
    dx = gx - px
    dy = gy - py
    c, s = math.cos(phi), math.sin(phi)
    u = c * dx + s * dy
    v = -s * dx + c * dy
    half = size / 2
    if shape == "circle":
        return dx * dx + dy * dy <= half * half
    if shape == "square":
        return (np.abs(u) <= half) & (np.abs(v) <= half)
    if shape == "cross":
        # two crossing bars, 2 px thick
        return ((np.abs(u) <= half) & (np.abs(v) <= 1.0)) | \
               ((np.abs(v) <= half) & (np.abs(u) <= 1.0))
    if shape == "triangle":
        # equilateral, circumradius = size/2, one vertex along +u
        verts = [(half * math.cos(a), half * math.sin(a))
                 for a in (0.0, 2 * math.pi / 3, 4 * math.pi / 3)]
        inside = np.ones(u.shape, dtype=bool)
        for i in range(3):
            x0, y0 = verts[i]
            x1, y1 = verts[(i + 1) % 3]
            # CCW edge: interior on the left
            inside &= (x1 - x0) * (v - y0) - (y1 - y0) * (u - x0) >= 0
        return inside
    raise SceneError(f"unknown shape {shape!r}")


def render_frame(scene: DiskScene, k: int) -> np.ndarray:
    """Rasterize frame k as float64 luminance in [0, 1], shape (h, w).

    Pixel (ix, iy) is centered at coordinate (ix, iy). Deterministic for
    fixed (scene, k): noise, when enabled, is seeded per frame.
    """
    if not (0 <= k < scene.frame_count):
        raise SceneError(f"frame index {k} out of range [0, {scene.frame_count})")
    ss = SUPERSAMPLE
    w, h = scene.width, scene.height
    hi = np.full((h * ss, w * ss), scene.background_intensity, dtype=np.float64)
    for obj in scene.objects:
        px, py, phi, visible = object_pose(scene, obj, k)
        if not visible:
            continue
        reach = obj.size / 2 + 1.5
        jx0 = max(0, int(math.floor((px - reach + 0.5) * ss - 0.5)))
        jx1 = min(w * ss, int(math.ceil((px + reach + 0.5) * ss - 0.5)) + 1)
        jy0 = max(0, int(math.floor((py - reach + 0.5) * ss - 0.5)))
        jy1 = min(h * ss, int(math.ceil((py + reach + 0.5) * ss - 0.5)) + 1)
        if jx0 >= jx1 or jy0 >= jy1:
            continue
        xs = (np.arange(jx0, jx1) + 0.5) / ss - 0.5
        ys = (np.arange(jy0, jy1) + 0.5) / ss - 0.5
        gx, gy = np.meshgrid(xs, ys)
        mask = _shape_mask(obj.shape, obj.size, px, py, phi, gx, gy)
        block = hi[jy0:jy1, jx0:jx1]
        block[mask] = scene.object_intensity
    frame = hi.reshape(h, ss, w, ss).mean(axis=(1, 3))
    if scene.pixel_noise_sigma > 0:
        rng = np.random.default_rng([scene.seed, k])
        frame = frame + rng.normal(0.0, scene.pixel_noise_sigma, size=frame.shape)
    return np.clip(frame, 0.0, 1.0)


def ground_truth(scene: DiskScene) -> GroundTruth:
    """Closed-form trajectories for every object over every frame."""
    validate_scene(scene)
    n = len(scene.objects)
    kk = scene.frame_count
    x = np.zeros((kk, n))
    y = np.zeros((kk, n))
    theta = np.zeros((kk, n))
    omega = np.zeros((kk, n))
    visible = np.zeros((kk, n), dtype=bool)
    for j, obj in enumerate(scene.objects):
        for k in range(kk):
            px, py, phi, vis = object_pose(scene, obj, k)
            x[k, j], y[k, j], theta[k, j], visible[k, j] = px, py, phi, vis
        omega[:, j] = scene.omega if obj.orbit_radius > 0 else 0.0
    return GroundTruth(
        labels=tuple(o.label for o in scene.objects),
        shapes=tuple(o.shape for o in scene.objects),
        x=x, y=y, theta=theta, omega=omega, visible=visible,
    )
