"""Multi-object track management.

Detections are associated to predicted tracks by gated greedy nearest
neighbor (squared Mahalanobis distance against the predicted measurement
covariance), matched tracks run their filter update, unmatched
detections open tentative tracks, and an M-of-N confirmation / miss
counter drives the lifecycle. Track ids are never reused within a run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import neural, sif
from .classifier import MlpNetwork, ValidationVerdict, validate_detection
from .detect import Detection

CHI2_GATE_99_2DOF = 9.21

TENTATIVE = "tentative"
CONFIRMED = "confirmed"
DEAD = "dead"


class TrackingError(ValueError):
    pass


@dataclass
class TrackerConfig:
    backend: str = "dense"              # "dense" | "spiking"
    center: tuple[float, float] = (64.0, 64.0)
    gate: float = CHI2_GATE_99_2DOF
    confirm_hits: int = 3
    confirm_window: int = 5
    max_misses: int = 5
    disk_band: tuple[float, float] = (10.0, 60.0)
    association: str = "greedy"         # "hungarian" reserved, not implemented
    neurons: int = 800
    seed: int = 0
    disk_model: sif.FilterModel | None = None
    cv_model: sif.FilterModel | None = None
    disk_p0: tuple | None = None        # initial covariance diagonals
    cv_p0: tuple | None = None

    def __post_init__(self):
        if self.backend not in ("dense", "spiking"):
            raise TrackingError(f"unknown backend {self.backend!r}")
        if self.association == "hungarian":
            raise NotImplementedError(
                "hungarian association is a reserved config option; use greedy")
        if self.association != "greedy":
            raise TrackingError(f"unknown association {self.association!r}")
        if self.disk_model is None:
            self.disk_model = sif.disk_polar_model(center=self.center)
        if self.cv_model is None:
            self.cv_model = sif.constant_velocity_model()


@dataclass
class Track:
    id: int
    backend: str
    model: sif.FilterModel
    state: sif.FilterState
    nf: neural.NeuralFilter | None = None
    status: str = TENTATIVE
    hits: int = 0
    misses: int = 0
    hit_history: list = field(default_factory=list)  # last confirm_window frames
    verdict: ValidationVerdict | None = None
    birth_frame: int = 0
    prior_p: np.ndarray | None = None  # pre-predict covariance, spiking path only

    @property
    def kind(self) -> str:
        return self.model.kind

    def position(self) -> np.ndarray:
        return sif.h_measure(self.model, self.state.s)

    def velocity(self) -> np.ndarray:
        """Estimated velocity vector in px/frame."""
        if self.kind == sif.DISK_POLAR:
            theta, omega, r = self.state.s
            return np.array([-r * omega * math.sin(theta), r * omega * math.cos(theta)])
        return self.state.s[2:].copy()


def associate(tracks: list[Track], detections: list[Detection],
              gate: float = CHI2_GATE_99_2DOF):
    """Greedy gated assignment in detection order.

    Tracks must already be predicted for the frame. Each detection takes
    the lowest-d2 unused track inside the gate (ties broken by lower
    track id, which is the iteration order). Returns (matches,
    unmatched_detections, unmatched_tracks) with matches as (track_index,
    detection_index) pairs.
    """
    free = [i for i, t in enumerate(tracks) if t.status != DEAD]
    matches = []
    unmatched_dets = []
    for di, det in enumerate(detections):
        z = np.array([det.x, det.y])
        best = None
        best_d2 = np.inf
        for ti in free:  # ascending track id: ties go to the lower id
            trk = tracks[ti]
            hjac = sif.h_jacobian(trk.model, trk.state.s)
            s_mat = hjac @ trk.state.p @ hjac.T + trk.model.r
            if np.min(np.linalg.eigvalsh((s_mat + s_mat.T) / 2)) <= 1e-10:
                s_mat = s_mat + 1e-6 * np.eye(2)
            inn = z - sif.h_measure(trk.model, trk.state.s)
            d2 = float(inn @ np.linalg.solve(s_mat, inn))
            if d2 <= gate and d2 < best_d2:
                best = ti
                best_d2 = d2
        if best is None:
            unmatched_dets.append(di)
        else:
            matches.append((best, di))
            free.remove(best)
    return matches, unmatched_dets, free


class MultiObjectTracker:
    """Owns the track list, id counter, and per-frame cycle."""

    def __init__(self, config: TrackerConfig):
        self.config = config
        self.tracks: list[Track] = []
        self._next_id = 1

    def _new_track(self, det: Detection, frame: int) -> Track:
        cfg = self.config
        z = np.array([det.x, det.y])
        rad = float(np.hypot(z[0] - cfg.center[0], z[1] - cfg.center[1]))
        lo, hi = cfg.disk_band
        if lo <= rad <= hi:
            model, p0 = cfg.disk_model, cfg.disk_p0
        else:
            model, p0 = cfg.cv_model, cfg.cv_p0
        state = sif.init_from_detection(model, z, p0_diag=p0, frame=frame)
        nf = None
        if cfg.backend == "spiking" and model.kind == sif.DISK_POLAR:
            nf = neural.build_population(cfg.neurons,
                                         seed=[cfg.seed, self._next_id])
            neural.init_state(nf, state)
        track = Track(id=self._next_id, backend=cfg.backend, model=model,
                      state=state, nf=nf, birth_frame=frame)
        track.hits = 1
        track.hit_history.append(True)
        self._next_id += 1
        return track

    def _predict_all(self, frame: int) -> None:
        for trk in self.tracks:
            if trk.status == DEAD:
                continue
            if trk.nf is not None:
                # dense predict of the decoded state for gating; the
                # population does its own rotation inside step_frame
                trk.prior_p = trk.state.p
                s_dec = neural.decode_state(trk.nf)
                pred = sif.predict(trk.model, sif.FilterState(
                    s=s_dec, p=trk.state.p, frame=trk.state.frame))
            else:
                pred = sif.predict(trk.model, trk.state)
            trk.state = pred

    def _apply_match(self, trk: Track, det: Detection) -> None:
        z = np.array([det.x, det.y])
        if trk.nf is not None:
            # correct() re-derives the predicted state and covariance from
            # the population and the stashed pre-predict P
            schedule, p_plus, _, info = neural.correct(trk.nf, z, trk.model,
                                                       trk.prior_p)
            neural.step_frame(trk.nf, schedule)
            s_dec = neural.decode_state(trk.nf)
            trk.state = sif.FilterState(
                s=s_dec, p=p_plus, frame=trk.state.frame,
                innovation=info["innovation"], saturation=info["saturation"],
                ill_conditioned=info["ill"])
        else:
            trk.state = sif.update(trk.model, trk.state, z)

    def _coast(self, trk: Track) -> None:
        if trk.nf is not None:
            neural.step_frame(trk.nf)
            trk.state = sif.FilterState(
                s=neural.decode_state(trk.nf), p=trk.state.p, frame=trk.state.frame)

    def step(self, detections: list[Detection], frame: int,
             net: MlpNetwork | None = None,
             frame_image: np.ndarray | None = None) -> list[dict]:
        """One tracker cycle; returns a per-track estimate record list."""
        self._predict_all(frame)
        live = [t for t in self.tracks if t.status != DEAD]
        matches, unmatched_dets, unmatched_tracks = associate(
            live, detections, self.config.gate)

        for ti, di in matches:
            trk = live[ti]
            self._apply_match(trk, detections[di])
            trk.hits += 1
            trk.misses = 0
            trk.hit_history.append(True)
        for ti in unmatched_tracks:
            trk = live[ti]
            trk.misses += 1
            trk.hit_history.append(False)
            self._coast(trk)
        for trk in live:
            trk.hit_history = trk.hit_history[-self.config.confirm_window:]
            if trk.status == TENTATIVE and \
                    sum(trk.hit_history) >= self.config.confirm_hits:
                trk.status = CONFIRMED
            if trk.misses >= self.config.max_misses:
                trk.status = DEAD
        for di in unmatched_dets:
            self.tracks.append(self._new_track(detections[di], frame))

        records = []
        for trk in self.tracks:
            if trk.status == DEAD:
                continue
            if trk.status == CONFIRMED and net is not None and frame_image is not None:
                trk.verdict = validate_detection(net, frame_image, trk.position())
            records.append(self._record(trk, frame))
        return records

    def _record(self, trk: Track, frame: int) -> dict:
        pos = trk.position()
        vel = trk.velocity()
        if trk.kind == sif.DISK_POLAR:
            theta, omega, r = trk.state.s
        else:
            theta = omega = r = float("nan")
        return {
            "frame": frame,
            "id": trk.id,
            "status": trk.status,
            "x": float(pos[0]), "y": float(pos[1]),
            "vx": float(vel[0]), "vy": float(vel[1]),
            "theta": float(theta), "omega": float(omega), "r": float(r),
            "verdict": trk.verdict.label if trk.verdict else "",
            "confidence": trk.verdict.confidence if trk.verdict else 0.0,
        }


def step_tracks(tracker: MultiObjectTracker, detections: list[Detection],
                frame: int, net: MlpNetwork | None = None,
                frame_image: np.ndarray | None = None) -> list[dict]:
    """Functional wrapper over MultiObjectTracker.step."""
    return tracker.step(detections, frame, net, frame_image)
