"""File codecs: PGM frames, event CSV/EVB, truth/config JSON, gnuplot.

All writers are deterministic (fixed float formatting, no timestamps),
so identical runs produce byte-identical artifacts.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from pathlib import Path

import numpy as np

from .dvs import EventStream
from .scene import DiskScene, GroundTruth, SceneObject

EVB_MAGIC = b"EVB1"
_EVB_RECORD = struct.Struct("<dHHb")


class FormatError(ValueError):
    pass


# ---------------------------------------------------------------- PGM

def write_pgm(path, frame: np.ndarray) -> None:
    """Binary PGM (P5), maxval 255, row-major."""
    data = np.clip(np.round(np.asarray(frame) * 255.0), 0, 255).astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def read_pgm(path) -> np.ndarray:
    """Read a P5 PGM back as float luminance in [0, 1]."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(b"P5"):
        raise FormatError(f"{path}: not a binary PGM (P5) file")
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(blob) and blob[pos:pos + 1].isspace():
            pos += 1
        if blob[pos:pos + 1] == b"#":
            while pos < len(blob) and blob[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos:pos + 1].isspace():
            pos += 1
        fields.append(int(blob[start:pos]))
    pos += 1  # single whitespace after maxval
    w, h, maxval = fields
    if maxval != 255:
        raise FormatError(f"{path}: expected maxval 255, got {maxval}")
    data = np.frombuffer(blob, dtype=np.uint8, count=w * h, offset=pos)
    return data.reshape(h, w).astype(np.float64) / 255.0


# ------------------------------------------------------------- events

def write_events_csv(path, events: EventStream) -> None:
    with open(path, "w") as fh:
        fh.write("t,x,y,p\n")
        for t, x, y, p in zip(events.t, events.x, events.y, events.p):
            fh.write(f"{t:.9f},{x},{y},{p}\n")


def read_events_csv(path) -> EventStream:
    ts, xs, ys, ps = [], [], [], []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "t,x,y,p":
            raise FormatError(f"{path}:1: expected header 't,x,y,p', got {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise FormatError(f"{path}:{lineno}: expected 4 fields")
            try:
                t, x, y, p = float(parts[0]), int(parts[1]), int(parts[2]), int(parts[3])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
            if x < 0 or y < 0:
                raise FormatError(f"{path}:{lineno}: negative pixel coordinate")
            if p not in (-1, 1):
                raise FormatError(f"{path}:{lineno}: polarity must be +1 or -1")
            if ts and t < ts[-1]:
                raise FormatError(f"{path}:{lineno}: timestamps not sorted")
            ts.append(t); xs.append(x); ys.append(y); ps.append(p)
    return EventStream(
        t=np.array(ts, dtype=np.float64),
        x=np.array(xs, dtype=np.uint16),
        y=np.array(ys, dtype=np.uint16),
        p=np.array(ps, dtype=np.int8),
    )


def write_events_evb(path, events: EventStream) -> None:
    """Compact binary: magic 'EVB1' then little-endian
    (f64 t, u16 x, u16 y, i8 p) records."""
    with open(path, "wb") as fh:
        fh.write(EVB_MAGIC)
        for t, x, y, p in zip(events.t, events.x, events.y, events.p):
            fh.write(_EVB_RECORD.pack(t, x, y, p))


def read_events_evb(path) -> EventStream:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != EVB_MAGIC:
        raise FormatError(f"{path}: bad magic, expected EVB1")
    body = blob[4:]
    if len(body) % _EVB_RECORD.size:
        raise FormatError(
            f"{path}: truncated record at offset {4 + len(body) - len(body) % _EVB_RECORD.size}")
    n = len(body) // _EVB_RECORD.size
    ts = np.empty(n, dtype=np.float64)
    xs = np.empty(n, dtype=np.uint16)
    ys = np.empty(n, dtype=np.uint16)
    ps = np.empty(n, dtype=np.int8)
    for i, (t, x, y, p) in enumerate(_EVB_RECORD.iter_unpack(body)):
        ts[i], xs[i], ys[i], ps[i] = t, x, y, p
    return EventStream(t=ts, x=xs, y=ys, p=ps)


# ------------------------------------------------------ truth / scene

def write_truth_json(path, truth: GroundTruth) -> None:
    frames = []
    for k in range(truth.x.shape[0]):
        frames.append([
            {
                "label": int(truth.labels[j]),
                "x": float(truth.x[k, j]),
                "y": float(truth.y[k, j]),
                "theta": float(truth.theta[k, j]),
                "omega": float(truth.omega[k, j]),
                "visible": bool(truth.visible[k, j]),
            }
            for j in range(truth.x.shape[1])
        ])
    with open(path, "w") as fh:
        json.dump(frames, fh)


def read_truth_json(path) -> GroundTruth:
    with open(path) as fh:
        frames = json.load(fh)
    if not frames:
        raise FormatError(f"{path}: empty truth file")
    labels = tuple(rec["label"] for rec in frames[0])
    n, kk = len(labels), len(frames)
    x = np.zeros((kk, n)); y = np.zeros((kk, n))
    theta = np.zeros((kk, n)); omega = np.zeros((kk, n))
    visible = np.zeros((kk, n), dtype=bool)
    for k, recs in enumerate(frames):
        for j, rec in enumerate(recs):
            x[k, j] = rec["x"]; y[k, j] = rec["y"]
            theta[k, j] = rec["theta"]; omega[k, j] = rec["omega"]
            visible[k, j] = rec["visible"]
    return GroundTruth(labels=labels, shapes=("?",) * n, x=x, y=y,
                       theta=theta, omega=omega, visible=visible)


def scene_to_dict(scene: DiskScene) -> dict:
    doc = dataclasses.asdict(scene)
    doc["objects"] = [dataclasses.asdict(o) for o in scene.objects]
    return doc


def scene_from_dict(doc: dict) -> DiskScene:
    objects = tuple(
        SceneObject(**{**o, "linear_velocity": tuple(o.get("linear_velocity", (0.0, 0.0))),
                       "start": tuple(o["start"]) if o.get("start") else None})
        for o in doc.get("objects", [])
    )
    fields = {k: v for k, v in doc.items() if k != "objects"}
    if "center" in fields:
        fields["center"] = tuple(fields["center"])
    return DiskScene(objects=objects, **fields)


# ------------------------------------------------------------ gnuplot

def write_gnuplot(path, title: str, xlabel: str, ylabel: str,
                  plot_lines: list[str], extra: list[str] | None = None) -> None:
    lines = [
        "set terminal pngcairo size 900,600",
        f"set output '{Path(path).stem}.png'",
        f"set title '{title}'",
        f"set xlabel '{xlabel}'",
        f"set ylabel '{ylabel}'",
        "set datafile separator ','",
        "set key outside",
    ]
    if extra:
        lines.extend(extra)
    lines.append("plot " + ", \\\n     ".join(plot_lines))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def gnuplot_referenced_files(path) -> list[str]:
    """Data files a plot script reads (for the output lint)."""
    refs = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line.startswith(("plot ", "replot ")) or line.startswith("'"):
                for piece in line.split("'")[1::2]:
                    if piece.endswith((".csv", ".json", ".dat")):
                        refs.append(piece)
    return refs
