"""Command line front end.

Subcommands:
    synth         render a scene to PGM frames + truth.json + scene.json
    run           full pipeline on a run config
    filter-bench  dense vs spiking filter on identical measurement sequences
    eval          recompute metrics from written artifacts

Exit codes: 0 success, 2 config error, 3 runtime stage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np


def _cmd_synth(args) -> int:
    from . import io, scene as sc

    if args.config:
        with open(args.config) as fh:
            scene = io.scene_from_dict(json.load(fh))
    else:
        scene = sc.default_scene()
    scene = sc.validate_scene(scene)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    truth = sc.ground_truth(scene)
    for k in range(scene.frame_count):
        io.write_pgm(out / f"frame_{k:05d}.pgm", sc.render_frame(scene, k))
    io.write_truth_json(out / "truth.json", truth)
    with open(out / "scene.json", "w") as fh:
        json.dump(io.scene_to_dict(scene), fh, indent=1, sort_keys=True)
    print(f"wrote {scene.frame_count} frames, truth.json, scene.json to {out}")
    return 0


def _cmd_run(args) -> int:
    from . import io, pipeline

    with open(args.config) as fh:
        doc = json.load(fh)
    if args.backend:
        doc["backend"] = args.backend
    if args.seed is not None:
        doc["seed"] = args.seed
    cfg = pipeline.RunConfig.from_dict(doc, base_dir=Path(args.config).parent)
    frames = None
    if args.data:
        data = Path(args.data)
        paths = sorted(data.glob("frame_*.pgm"))
        if len(paths) != cfg.scene.frame_count:
            raise pipeline.ConfigError(
                f"{data}: found {len(paths)} frames, scene needs {cfg.scene.frame_count}")
        frames = [io.read_pgm(p) for p in paths]
    result = pipeline.run_pipeline(cfg, out_dir=args.out, frames=frames)
    for name, backend in result.backends.items():
        print(f"[{name}] " + json.dumps(backend.metrics.summary["objects"], sort_keys=True))
    print(f"done in {result.elapsed:.1f}s -> {args.out}")
    return 0


def _cmd_filter_bench(args) -> int:
    from . import neural, pipeline, scene as sc, sif

    with open(args.config) as fh:
        doc = json.load(fh)
    cfg = pipeline.RunConfig.from_dict(doc, base_dir=Path(args.config).parent)
    scene = sc.validate_scene(cfg.scene)
    truth = sc.ground_truth(scene)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model = sif.disk_polar_model(center=scene.center, **cfg.disk_filter)
    neurons = cfg.tracker.get("neurons", 800)

    lines = ["frame,object,theta_dense,theta_snn,omega_dense,omega_snn,r_dense,r_snn"]
    for j, obj in enumerate(scene.objects):
        if obj.orbit_radius <= 0:
            continue
        z0 = np.array([truth.x[0, j], truth.y[0, j]])
        dense = sif.init_from_detection(model, z0)
        nf = neural.build_population(neurons, seed=[cfg.seed, obj.label])
        neural.init_state(nf, dense.copy())
        p_snn = dense.p.copy()
        for k in range(1, scene.frame_count):
            z = np.array([truth.x[k, j], truth.y[k, j]])
            dense = sif.update(model, sif.predict(model, dense), z)
            sched, p_snn, _, _ = neural.correct(nf, z, model, p_snn)
            neural.step_frame(nf, sched)
            s = neural.decode_state(nf)
            lines.append(
                f"{k},{obj.label},{dense.s[0]:.9f},{s[0]:.9f},"
                f"{dense.s[1]:.9f},{s[1]:.9f},{dense.s[2]:.9f},{s[2]:.9f}")
    (out / "bench.csv").write_text("\n".join(lines) + "\n")
    print(f"wrote {out / 'bench.csv'}")
    return 0


def _cmd_eval(args) -> int:
    from . import pipeline

    results = Path(args.results)
    report = pipeline.compute_metrics_from_files(results / "tracks.csv", args.truth)
    print(json.dumps(report.summary, indent=1, sort_keys=True))
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(report.summary, fh, indent=1, sort_keys=True)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spiketrack",
        description="event-based perception and spiking state estimation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a scene to frames + ground truth")
    p.add_argument("--config", help="scene JSON (defaults to the built-in scene)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("run", help="run the full pipeline")
    p.add_argument("--config", required=True, help="run config JSON")
    p.add_argument("--data", help="directory of PGM frames from synth")
    p.add_argument("--out", required=True)
    p.add_argument("--backend", choices=["dense", "spiking", "both"])
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("filter-bench",
                       help="dense vs spiking filter on identical measurements")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_filter_bench)

    p = sub.add_parser("eval", help="recompute metrics from artifacts")
    p.add_argument("--results", required=True, help="directory containing tracks.csv")
    p.add_argument("--truth", required=True, help="truth.json path")
    p.add_argument("--out", help="optional summary JSON output")
    p.set_defaults(func=_cmd_eval)
    return parser


def main(argv=None) -> int:
    from . import detect, dvs, io, lif, pipeline, scene, sif
    from .classifier import ClassifierError
    from .neural import NeuralFilterError
    from .tracking import TrackingError

    config_errors = (pipeline.ConfigError, scene.SceneError, io.FormatError,
                     dvs.DvsError, detect.DetectError, sif.FilterError,
                     lif.LifError, ClassifierError, NeuralFilterError,
                     TrackingError, FileNotFoundError, json.JSONDecodeError)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except pipeline.StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except config_errors as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
