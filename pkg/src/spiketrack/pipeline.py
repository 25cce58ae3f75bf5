"""End-to-end runs: scene -> events -> detections -> tracks -> metrics.

A run is fully described by a RunConfig (JSON-serializable, explicit
seed). Outputs are CSV series plus a JSON summary and gnuplot scripts;
identical configs produce byte-identical files.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import classifier as cl
from . import detect, dvs, io, sif
from . import scene as sc
from .tracking import CONFIRMED, MultiObjectTracker, TrackerConfig

OMEGA_WINDOW = (100, 200)   # frames for the angular-rate summary
ERROR_WINDOW = (150, 200)   # frames for the settled position-error summary


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    """A pipeline stage failed; carries stage name and frame index."""

    def __init__(self, stage: str, frame: int, cause: Exception):
        super().__init__(f"stage {stage!r} failed at frame {frame}: {cause}")
        self.stage = stage
        self.frame = frame
        self.cause = cause


@dataclass
class RunConfig:
    scene: sc.DiskScene
    backend: str = "dense"          # dense | spiking | both
    seed: int = 0
    dvs: dict = field(default_factory=dict)
    detector: dict = field(default_factory=dict)
    disk_filter: dict = field(default_factory=dict)
    cv_filter: dict = field(default_factory=dict)
    tracker: dict = field(default_factory=dict)
    classifier: dict = field(default_factory=dict)
    windows_per_frame: int = 1
    write_events: bool = False

    def __post_init__(self):
        if self.backend not in ("dense", "spiking", "both"):
            raise ConfigError(f"backend must be dense|spiking|both, got {self.backend!r}")
        if self.windows_per_frame < 1:
            raise ConfigError("windows_per_frame must be >= 1")

    def to_dict(self) -> dict:
        doc = dataclasses.asdict(self)
        doc["scene"] = io.scene_to_dict(self.scene)
        return doc

    @staticmethod
    def from_dict(doc: dict, base_dir: Path | None = None) -> "RunConfig":
        doc = dict(doc)
        scene_ref = doc.pop("scene")
        if isinstance(scene_ref, str):
            path = Path(scene_ref)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            with open(path) as fh:
                scene_ref = json.load(fh)
        return RunConfig(scene=io.scene_from_dict(scene_ref), **doc)


@dataclass
class MetricsReport:
    """Per-object error/omega/trajectory series plus summary scalars."""

    objects: dict            # label -> {frames, error, omega_est, omega_true, ...}
    summary: dict


@dataclass
class BackendResult:
    backend: str
    rows: list               # per-frame per-track records
    assoc: dict              # track id -> truth label, fixed at confirmation
    metrics: MetricsReport


@dataclass
class PipelineResult:
    config: RunConfig
    backends: dict           # name -> BackendResult
    detections_per_frame: list
    event_count: int
    elapsed: float
    out_dir: Path | None
    detections: list = field(default_factory=list)


def _train_validator(scene: sc.DiskScene, seed: int, overrides: dict):
    """Train the patch validator on the modeled (orbiting) objects only:
    intruders are unmodeled by definition and must stay out of the
    training set."""
    modeled = tuple(o for o in scene.objects if o.orbit_radius > 0)
    base = dataclasses.replace(scene, objects=modeled)
    kwargs = dict(overrides)
    train_kw = {k: kwargs.pop(k) for k in ("hidden_width", "lam", "target_scale",
                                           "decision_threshold", "patch_size")
                if k in kwargs}
    patches, labels = cl.build_training_set(base, seed=seed, **kwargs)
    net, acc = cl.train_readout(patches, labels, seed=seed, **train_kw)
    return net, acc


def run_pipeline(cfg: RunConfig, out_dir=None, net: cl.MlpNetwork | None = None,
                 frames: list | None = None, on_frame=None) -> PipelineResult:
    """Execute the full per-frame loop and (optionally) write artifacts.

    frames may be preloaded (e.g. from PGM files written by `synth`);
    otherwise they are rendered from the scene config. A pretrained
    validator net may be passed to skip training. on_frame(k, trackers),
    when given, runs after each frame; fault-injection tests use it.
    """
    t_start = time.perf_counter()
    scene = sc.validate_scene(cfg.scene)
    truth = sc.ground_truth(scene)
    if frames is None:
        frames = [sc.render_frame(scene, k) for k in range(scene.frame_count)]
    if net is None:
        net, _ = _train_validator(scene, cfg.seed, dict(cfg.classifier))

    dvs_state = dvs.init_reference(frames[0], seed=cfg.seed, **cfg.dvs)
    period = dvs_state.frame_period
    det_kwargs = dict(cfg.detector)
    surface = detect.EventSurface.blank(
        scene.height, scene.width,
        tau=det_kwargs.pop("tau", 0.4), frame_period=period)
    windows = cfg.windows_per_frame

    disk_model, disk_p0 = sif.model_from_config(
        {"model": sif.DISK_POLAR, "center": scene.center, **cfg.disk_filter})
    cv_model, cv_p0 = sif.model_from_config(
        {"model": sif.CONSTANT_VELOCITY, **cfg.cv_filter})
    backends = ["dense", "spiking"] if cfg.backend == "both" else [cfg.backend]
    trackers = {}
    for name in backends:
        tcfg = TrackerConfig(
            backend=name, center=scene.center, seed=cfg.seed,
            disk_model=disk_model, cv_model=cv_model,
            disk_p0=disk_p0, cv_p0=cv_p0, **cfg.tracker)
        trackers[name] = MultiObjectTracker(tcfg)

    rows = {name: [] for name in backends}
    assoc = {name: {} for name in backends}
    confirmed_seen = {name: set() for name in backends}
    detections_per_frame = []
    detection_rows = []
    all_events = [] if cfg.write_events else None
    event_count = 0

    for k in range(1, scene.frame_count):
        try:
            events = dvs.emulate_step(dvs_state, frames[k], k - 1)
        except Exception as exc:
            raise StageError("dvs", k, exc) from exc
        event_count += len(events)
        if all_events is not None:
            all_events.append(events)
        try:
            dets = []
            for w in range(windows):
                until = ((k - 1) + (w + 1) / windows) * period
                chunk = _slice_events(events, surface.last_update, until)
                detect.accumulate(surface, chunk, until)
                dets = detect.extract_detections(surface, frame=k, window=w,
                                                 **det_kwargs)
        except Exception as exc:
            raise StageError("detector", k, exc) from exc
        detections_per_frame.append(len(dets))
        detection_rows.extend(dets)

        for name in backends:
            trk = trackers[name]
            try:
                recs = trk.step(dets, k, net, frames[k])
            except Exception as exc:
                raise StageError(f"tracker[{name}]", k, exc) from exc
            for track in trk.tracks:
                if track.status == CONFIRMED and track.id not in confirmed_seen[name]:
                    confirmed_seen[name].add(track.id)
                    assoc[name][track.id] = _nearest_truth_label(truth, k,
                                                                 track.position())
            for rec in recs:
                rec["label"] = assoc[name].get(rec["id"], 0)
            rows[name].extend(recs)
        if on_frame is not None:
            on_frame(k, trackers)

    results = {}
    for name in backends:
        metrics = compute_metrics(rows[name], truth, assoc[name])
        results[name] = BackendResult(backend=name, rows=rows[name],
                                      assoc=assoc[name], metrics=metrics)

    elapsed = time.perf_counter() - t_start
    result = PipelineResult(config=cfg, backends=results,
                            detections_per_frame=detections_per_frame,
                            event_count=event_count, elapsed=elapsed,
                            out_dir=Path(out_dir) if out_dir else None,
                            detections=detection_rows)
    if out_dir is not None:
        write_outputs(result, Path(out_dir),
                      events=dvs.EventStream.concatenate(all_events)
                      if all_events is not None else None)
    return result


def _slice_events(events: dvs.EventStream, t0: float, t1: float) -> dvs.EventStream:
    if len(events) == 0:
        return events
    keep = (events.t > t0) & (events.t <= t1)
    if keep.all():
        return events
    return dvs.EventStream(t=events.t[keep], x=events.x[keep],
                           y=events.y[keep], p=events.p[keep])


def _nearest_truth_label(truth: sc.GroundTruth, k: int, pos) -> int:
    vis = truth.visible[k]
    if not vis.any():
        return 0
    d = np.hypot(truth.x[k] - pos[0], truth.y[k] - pos[1])
    d[~vis] = np.inf
    return int(truth.labels[int(np.argmin(d))])


def compute_metrics(rows: list, truth: sc.GroundTruth, assoc: dict) -> MetricsReport:
    """Per-object series against truth, association fixed at confirmation.

    Only confirmed frames enter the series; errors are Euclidean pixel
    distances between the estimated and true positions.
    """
    label_col = {lbl: j for j, lbl in enumerate(truth.labels)}
    objects = {}
    for row in rows:
        lbl = row.get("label", 0)
        if row["status"] != CONFIRMED or lbl == 0 or lbl not in label_col:
            continue
        k = row["frame"]
        j = label_col[lbl]
        if k >= truth.x.shape[0] or not truth.visible[k, j]:
            continue
        obj = objects.setdefault(lbl, {
            "frames": [], "error": [], "omega_est": [], "omega_true": [],
            "x_est": [], "y_est": [], "x_true": [], "y_true": [],
            "vx_est": [], "vy_est": [], "track_ids": set(),
        })
        err = float(np.hypot(row["x"] - truth.x[k, j], row["y"] - truth.y[k, j]))
        obj["frames"].append(k)
        obj["error"].append(err)
        obj["omega_est"].append(row["omega"])
        obj["omega_true"].append(float(truth.omega[k, j]))
        obj["x_est"].append(row["x"]); obj["y_est"].append(row["y"])
        obj["x_true"].append(float(truth.x[k, j])); obj["y_true"].append(float(truth.y[k, j]))
        obj["vx_est"].append(row["vx"]); obj["vy_est"].append(row["vy"])
        obj["track_ids"].add(row["id"])

    summary = {"objects": {}}
    for lbl, obj in sorted(objects.items()):
        frames = np.array(obj["frames"])
        err = np.array(obj["error"])
        om_est = np.array(obj["omega_est"], dtype=np.float64)
        om_true = np.array(obj["omega_true"])
        in_om = (frames >= OMEGA_WINDOW[0]) & (frames <= OMEGA_WINDOW[1]) & np.isfinite(om_est)
        in_err = (frames >= ERROR_WINDOW[0]) & (frames <= ERROR_WINDOW[1])
        conv = _convergence_frame(frames, err, threshold=2.0)
        summary["objects"][str(lbl)] = {
            "frames_tracked": int(len(frames)),
            "mean_abs_omega_error": float(np.mean(np.abs(om_est[in_om] - om_true[in_om])))
            if in_om.any() else None,
            "rmse_error_window": float(np.sqrt(np.mean(err[in_err] ** 2)))
            if in_err.any() else None,
            "mean_error_window": float(np.mean(err[in_err])) if in_err.any() else None,
            "convergence_frame": conv,
            "n_tracks": len(obj["track_ids"]),
        }
    return MetricsReport(objects=objects, summary=summary)


def _convergence_frame(frames: np.ndarray, err: np.ndarray, threshold: float):
    """First frame after which the error stays below threshold."""
    if len(frames) == 0:
        return None
    below = err < threshold
    if not below.any():
        return None
    idx = len(below)
    for i in range(len(below) - 1, -1, -1):
        if not below[i]:
            break
        idx = i
    return int(frames[idx]) if idx < len(below) else None


# ------------------------------------------------------------- output

TRACK_HEADER = "frame,id,label,status,x,y,vx,vy,theta,omega,r,verdict,confidence"


def write_outputs(result: PipelineResult, out_dir: Path,
                  events: dvs.EventStream | None = None) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    multi = len(result.backends) > 1
    for name, backend in result.backends.items():
        sub = out_dir / name if multi else out_dir
        sub.mkdir(parents=True, exist_ok=True)
        _write_backend(backend, sub)
    if events is not None:
        io.write_events_csv(out_dir / "events.csv", events)
        io.write_events_evb(out_dir / "events.evb", events)
    with open(out_dir / "detections.csv", "w") as fh:
        fh.write("frame,window,x,y,mass\n")
        for d in result.detections:
            fh.write(f"{d.frame},{d.window},{d.x:.9f},{d.y:.9f},{d.mass:.9f}\n")
    top = {
        "backend": result.config.backend,
        "seed": result.config.seed,
        "elapsed_seconds": round(result.elapsed, 3),
        "event_count": result.event_count,
        "detections_per_frame": result.detections_per_frame,
    }
    for name, backend in result.backends.items():
        top[name] = backend.metrics.summary
        top.setdefault("assoc", {})[name] = {str(k): v for k, v
                                             in sorted(backend.assoc.items())}
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(top, fh, indent=1, sort_keys=True)


def _write_backend(backend: BackendResult, out_dir: Path) -> None:
    with open(out_dir / "tracks.csv", "w") as fh:
        fh.write(TRACK_HEADER + "\n")
        for r in backend.rows:
            fh.write(
                f"{r['frame']},{r['id']},{r['label']},{r['status']},"
                f"{r['x']:.9f},{r['y']:.9f},{r['vx']:.9f},{r['vy']:.9f},"
                f"{r['theta']:.9f},{r['omega']:.9f},{r['r']:.9f},"
                f"{r['verdict']},{r['confidence']:.9f}\n")
    objs = backend.metrics.objects
    with open(out_dir / "omega.csv", "w") as fh:
        fh.write("frame,object,omega_est,omega_true\n")
        for lbl, obj in sorted(objs.items()):
            for i, k in enumerate(obj["frames"]):
                if np.isfinite(obj["omega_est"][i]):
                    fh.write(f"{k},{lbl},{obj['omega_est'][i]:.9f},"
                             f"{obj['omega_true'][i]:.9f}\n")
    with open(out_dir / "errors.csv", "w") as fh:
        fh.write("frame,object,error_px\n")
        for lbl, obj in sorted(objs.items()):
            for i, k in enumerate(obj["frames"]):
                fh.write(f"{k},{lbl},{obj['error'][i]:.9f}\n")
    with open(out_dir / "trajectories.csv", "w") as fh:
        fh.write("frame,object,x_est,y_est,x_true,y_true,vx_est,vy_est\n")
        for lbl, obj in sorted(objs.items()):
            for i, k in enumerate(obj["frames"]):
                fh.write(f"{k},{lbl},{obj['x_est'][i]:.9f},{obj['y_est'][i]:.9f},"
                         f"{obj['x_true'][i]:.9f},{obj['y_true'][i]:.9f},"
                         f"{obj['vx_est'][i]:.9f},{obj['vy_est'][i]:.9f}\n")
    _write_plots(out_dir, sorted(objs.keys()))


def _write_plots(out_dir: Path, labels) -> None:
    traj_lines, vec_lines = [], []
    for lbl in labels:
        traj_lines.append(
            f"'trajectories.csv' using ($2=={lbl}?$3:1/0):4 with lines title 'object {lbl} est'")
        traj_lines.append(
            f"'trajectories.csv' using ($2=={lbl}?$5:1/0):6 with lines dashtype 2 title 'object {lbl} true'")
        vec_lines.append(
            f"'trajectories.csv' using ($2=={lbl}?$3:1/0):4:(5*$7):(5*$8) every 10 "
            f"with vectors lc 'black' notitle")
    io.write_gnuplot(out_dir / "plot_a.gp",
                     "True and estimated trajectories", "x (px)", "y (px)",
                     traj_lines + vec_lines,
                     extra=["set size ratio -1", "set yrange [*:*] reverse"])
    omega_lines = [
        f"'omega.csv' using ($2=={lbl}?$1:1/0):3 with lines title 'object {lbl}'"
        for lbl in labels
    ] + ["'omega.csv' using 1:4 with lines dashtype 3 lc 'black' title 'true'"]
    io.write_gnuplot(out_dir / "plot_b.gp",
                     "Estimated angular velocity", "frame", "omega (rad/frame)",
                     omega_lines)
    err_lines = [
        f"'errors.csv' using ($2=={lbl}?$1:1/0):3 with lines title 'object {lbl}'"
        for lbl in labels
    ]
    io.write_gnuplot(out_dir / "plot_c.gp",
                     "Position estimation error", "frame", "error (px)", err_lines)


# ----------------------------------------------------------- re-eval

def read_tracks_csv(path) -> list:
    rows = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != TRACK_HEADER:
            raise io.FormatError(f"{path}:1: unexpected header {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            p = line.split(",")
            if len(p) != 13:
                raise io.FormatError(f"{path}:{lineno}: expected 13 fields")
            rows.append({
                "frame": int(p[0]), "id": int(p[1]), "label": int(p[2]),
                "status": p[3], "x": float(p[4]), "y": float(p[5]),
                "vx": float(p[6]), "vy": float(p[7]), "theta": float(p[8]),
                "omega": float(p[9]), "r": float(p[10]), "verdict": p[11],
                "confidence": float(p[12]),
            })
    return rows


def compute_metrics_from_files(tracks_csv, truth_json,
                               assoc: dict | None = None) -> MetricsReport:
    """Independent re-derivation of the metrics from written artifacts."""
    rows = read_tracks_csv(tracks_csv)
    truth = io.read_truth_json(truth_json)
    if assoc is not None:
        for row in rows:
            row["label"] = assoc.get(row["id"], row["label"])
    else:
        assoc = {row["id"]: row["label"] for row in rows if row["label"]}
    return compute_metrics(rows, truth, assoc)
