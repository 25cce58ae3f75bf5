"""Dense extended sliding-innovation filter for disk-polar and
constant-velocity motion.

The update uses a switching gain: the innovation is passed through a
per-channel saturation sat_i = min(1, |inn_i| / delta_i) (delta is the
sliding boundary-layer width), and mapped back to state space through
the covariance-weighted right inverse of the measurement Jacobian,

    K = P- H^T (H P- H^T)^-1 diag(sat).

Inside the boundary layer the correction scales down proportionally;
at or beyond it the update absorbs the innovation exactly in
measurement space (H (s+ - s-) = inn). The covariance weighting spreads
the correction over states correlated with the measurement, which is
what lets the angular rate (not directly measured) converge; a plain
pseudo-inverse gain H+ has a structurally zero rate row and can never
correct it. Covariance propagates in Joseph form, so it stays
symmetric positive semidefinite no matter the gain.

This module is the floating-point reference that the spiking
realization in `neural` must match.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DISK_POLAR = "disk_polar"
CONSTANT_VELOCITY = "constant_velocity"

_COND_FLOOR = 1e-10
_TIKHONOV = 1e-8


class FilterError(ValueError):
    pass


def wrap_angle(theta: float) -> float:
    """Wrap to [-pi, pi)."""
    return (theta + math.pi) % (2 * math.pi) - math.pi


@dataclass(frozen=True)
class FilterModel:
    """Motion + measurement model of one tracked object.

    disk_polar state: [theta (rad), omega (rad/frame), r (px)], measured
    through the disk geometry around `center`. constant_velocity state:
    [x, y, vx, vy] in px and px/frame, measured directly.
    """

    kind: str
    q: np.ndarray
    r: np.ndarray
    delta: np.ndarray
    center: tuple[float, float] = (64.0, 64.0)
    r_min: float = 1.0

    def __post_init__(self):
        if self.kind not in (DISK_POLAR, CONSTANT_VELOCITY):
            raise FilterError(f"unknown model kind {self.kind!r}")
        n = self.state_dim
        q = np.asarray(self.q, dtype=np.float64)
        r = np.asarray(self.r, dtype=np.float64)
        delta = np.asarray(self.delta, dtype=np.float64)
        if q.shape != (n, n):
            raise FilterError(f"Q must be {n}x{n}")
        if r.shape != (2, 2):
            raise FilterError("R must be 2x2")
        if np.any(np.linalg.eigvalsh((q + q.T) / 2) < -1e-12):
            raise FilterError("Q must be positive semidefinite")
        if np.any(np.linalg.eigvalsh((r + r.T) / 2) <= 0):
            raise FilterError("R must be positive definite")
        if delta.shape != (2,) or np.any(delta <= 0):
            raise FilterError("delta must be a positive 2-vector")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "delta", delta)

    @property
    def state_dim(self) -> int:
        return 3 if self.kind == DISK_POLAR else 4

    @property
    def f_mat(self) -> np.ndarray:
        if self.kind == DISK_POLAR:
            return np.array([[1.0, 1.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        return np.array([
            [1.0, 0.0, 1.0, 0.0],
            [0.0, 1.0, 0.0, 1.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ])


@dataclass
class FilterState:
    """Estimate (s, P) plus bookkeeping from the last update."""

    s: np.ndarray
    p: np.ndarray
    frame: int = 0
    innovation: np.ndarray | None = None
    saturation: np.ndarray | None = None
    degenerate: bool = False
    ill_conditioned: bool = False

    def copy(self) -> "FilterState":
        return FilterState(
            s=self.s.copy(), p=self.p.copy(), frame=self.frame,
            innovation=None if self.innovation is None else self.innovation.copy(),
            saturation=None if self.saturation is None else self.saturation.copy(),
            degenerate=self.degenerate, ill_conditioned=self.ill_conditioned,
        )


def disk_polar_model(center=(64.0, 64.0), q_diag=(1e-5, 1e-6, 1e-3),
                     r_diag=(1.0, 1.0), delta=(4.0, 4.0), r_min=1.0) -> FilterModel:
    return FilterModel(DISK_POLAR, np.diag(q_diag), np.diag(r_diag),
                       np.asarray(delta, dtype=np.float64), center, r_min)


def constant_velocity_model(q_scale=1e-3, r_diag=(1.0, 1.0),
                            delta=(4.0, 4.0)) -> FilterModel:
    return FilterModel(CONSTANT_VELOCITY, q_scale * np.eye(4), np.diag(r_diag),
                       np.asarray(delta, dtype=np.float64))


DISK_POLAR_P0 = (0.1, 0.01, 25.0)
CONSTANT_VELOCITY_P0 = (25.0, 25.0, 1.0, 1.0)


def model_from_config(doc: dict):
    """Build a model from the documented filter-config keys.

    Accepted keys: model (disk_polar | constant_velocity), q_diag,
    r_diag, delta, p0_diag, center, r_min. Returns (model, p0_diag).
    """
    doc = dict(doc)
    kind = doc.pop("model", DISK_POLAR)
    p0 = doc.pop("p0_diag", None)
    if kind == DISK_POLAR:
        return disk_polar_model(**doc), p0
    if kind == CONSTANT_VELOCITY:
        doc.pop("center", None)
        doc.pop("r_min", None)
        if "q_diag" in doc:
            q = np.diag(doc.pop("q_diag"))
            model = constant_velocity_model(**doc)
            return FilterModel(CONSTANT_VELOCITY, q, model.r, model.delta), p0
        return constant_velocity_model(**doc), p0
    raise FilterError(f"unknown model kind {kind!r}")


def h_measure(model: FilterModel, s: np.ndarray) -> np.ndarray:
    """Predicted pixel measurement of a state."""
    if model.kind == DISK_POLAR:
        theta, _, r = s
        cx, cy = model.center
        return np.array([cx + r * math.cos(theta), cy + r * math.sin(theta)])
    return np.asarray(s[:2], dtype=np.float64).copy()


def h_jacobian(model: FilterModel, s: np.ndarray) -> np.ndarray:
    if model.kind == DISK_POLAR:
        theta, _, r = s
        return np.array([
            [-r * math.sin(theta), 0.0, math.cos(theta)],
            [r * math.cos(theta), 0.0, math.sin(theta)],
        ])
    return np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]])


def pseudo_inverse(h: np.ndarray) -> tuple[np.ndarray, bool]:
    """Right pseudo-inverse H^T (H H^T)^-1 with a Tikhonov fallback.

    Returns (pinv, ill_conditioned). The fallback regularizes H H^T by
    1e-8 I when its smallest eigenvalue drops below 1e-10.
    """
    h = np.asarray(h, dtype=np.float64)
    gram = h @ h.T
    ill = bool(np.min(np.linalg.eigvalsh((gram + gram.T) / 2)) <= _COND_FLOOR)
    if ill:
        gram = gram + _TIKHONOV * np.eye(gram.shape[0])
    return h.T @ np.linalg.inv(gram), ill


def predict(model: FilterModel, state: FilterState) -> FilterState:
    """Propagate one frame: s <- F s (angle re-wrapped), P <- F P F^T + Q."""
    f = model.f_mat
    s = f @ state.s
    if model.kind == DISK_POLAR:
        s[0] = wrap_angle(s[0])
    p = f @ state.p @ f.T + model.q
    return FilterState(s=s, p=(p + p.T) / 2, frame=state.frame + 1,
                       degenerate=state.degenerate)


def _correction(model: FilterModel, s: np.ndarray, p: np.ndarray, z: np.ndarray):
    """Shared innovation/gain algebra for the dense and spiking paths.

    Returns (ds, p_plus, innovation, saturation, ill_flag) where ds is
    the state correction K @ innovation and p_plus the Joseph-form
    posterior covariance.
    """
    z = np.asarray(z, dtype=np.float64)
    inn = z - h_measure(model, s)
    hjac = h_jacobian(model, s)
    sat = np.minimum(1.0, np.abs(inn) / model.delta)
    s_mat = hjac @ p @ hjac.T
    ill = bool(np.min(np.linalg.eigvalsh((s_mat + s_mat.T) / 2)) <= _COND_FLOOR)
    if ill:
        s_mat = s_mat + _TIKHONOV * np.eye(2)
    gain = p @ hjac.T @ np.linalg.inv(s_mat) @ np.diag(sat)
    ds = gain @ inn
    ikh = np.eye(model.state_dim) - gain @ hjac
    p_plus = ikh @ p @ ikh.T + gain @ model.r @ gain.T
    return ds, (p_plus + p_plus.T) / 2, inn, sat, ill


def update(model: FilterModel, state: FilterState, z: np.ndarray) -> FilterState:
    """Measurement update with the saturated covariance-weighted gain.

    A disk-polar radius driven to r <= 0 is clamped to r_min and the
    state flagged degenerate.
    """
    ds, p_plus, inn, sat, ill = _correction(model, state.s, state.p, z)
    s = state.s + ds
    degenerate = state.degenerate
    if model.kind == DISK_POLAR:
        s[0] = wrap_angle(s[0])
        if s[2] <= 0:
            s[2] = model.r_min
            degenerate = True
    return FilterState(s=s, p=p_plus, frame=state.frame, innovation=inn,
                       saturation=sat, degenerate=degenerate, ill_conditioned=ill)


def init_from_detection(model: FilterModel, z: np.ndarray,
                        p0_diag=None, frame: int = 0) -> FilterState:
    """Bootstrap a state from one detection; rates/velocities start at 0.

    The zero initial rate is deliberately wrong for a moving object: the
    transient it causes is part of the behavior under test downstream.
    """
    z = np.asarray(z, dtype=np.float64)
    if model.kind == DISK_POLAR:
        dx, dy = z[0] - model.center[0], z[1] - model.center[1]
        r0 = math.hypot(dx, dy)
        if r0 < model.r_min:
            raise FilterError(
                f"detection at {z} is within r_min={model.r_min} of the disk "
                "center; radius undefined"
            )
        s = np.array([math.atan2(dy, dx), 0.0, r0])
        p0 = np.diag(p0_diag if p0_diag is not None else DISK_POLAR_P0)
    else:
        s = np.array([z[0], z[1], 0.0, 0.0])
        p0 = np.diag(p0_diag if p0_diag is not None else CONSTANT_VELOCITY_P0)
    return FilterState(s=s, p=p0.astype(np.float64), frame=frame)
