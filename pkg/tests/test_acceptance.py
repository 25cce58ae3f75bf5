"""Acceptance suite: one test per release criterion, one printed
pass/fail line each (run with -s to see them inline)."""

import math
from pathlib import Path

import numpy as np

from spiketrack import detect, dvs, neural, pipeline, sif
from spiketrack import scene as sc
from spiketrack.lif import LifParams, LifPopulation, lif_rate, lif_step
from spiketrack.neural import EmbeddingSpec

from conftest import backend_deltas

EQUIV_BOUNDS = {"theta": 0.05, "omega": 0.01, "r": 2.0}


def report(name, ok, detail=""):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return ok


def test_criterion_1_angular_velocity_recovery(dense_run):
    assert dense_run.elapsed <= 60.0
    objs = dense_run.backends["dense"].metrics.objects
    summary = dense_run.backends["dense"].metrics.summary["objects"]
    ok = True
    details = []
    for lbl in (1, 2, 3):
        err = summary[str(lbl)]["mean_abs_omega_error"]
        ok &= err is not None and err <= 0.005
        details.append(f"obj{lbl} mean|omega-0.05|={err:.2e}")
        series = np.array(objs[lbl]["omega_est"])
        frames = np.array(objs[lbl]["frames"])
        tail = series[(frames >= 100) & (frames <= 200)]
        # fluctuates around the true rate: non-constant, and the whole
        # band stays tight against 0.05
        ok &= float(np.std(tail)) > 0.0
        ok &= abs(float(tail.max()) - 0.05) <= 0.002
        ok &= abs(float(tail.min()) - 0.05) <= 0.002
    assert report("criterion 1 (rate recovery)", ok,
                  "; ".join(details) + f"; runtime {dense_run.elapsed:.1f}s")


def test_criterion_2_position_error_transient(dense_run):
    objs = dense_run.backends["dense"].metrics.objects
    summary = dense_run.backends["dense"].metrics.summary["objects"]
    ok = True
    details = []
    for lbl in (1, 2, 3):
        settled = summary[str(lbl)]["mean_error_window"]
        early = float(np.mean(objs[lbl]["error"][:5]))
        ok &= settled is not None and settled <= 2.0
        ok &= early > settled  # transient starts high (wrong initial rate)
        details.append(f"obj{lbl} early={early:.2f}px settled={settled:.2f}px")
    assert report("criterion 2 (error transient)", ok, "; ".join(details))


def test_criterion_3_spiking_dense_equivalence(both_run):
    assert both_run.elapsed <= 600.0
    deltas = backend_deltas(both_run, first_frame=50)
    ok = True
    details = []
    for lbl, d in deltas.items():
        ok &= d["n"] >= 140
        ok &= d["theta"] <= EQUIV_BOUNDS["theta"]
        ok &= d["omega"] <= EQUIV_BOUNDS["omega"]
        ok &= d["r"] <= EQUIV_BOUNDS["r"]
        details.append(f"obj{lbl} dtheta={d['theta']:.3f} domega={d['omega']:.4f} "
                       f"dr={d['r']:.2f}")
    assert report("criterion 3 (spiking equivalence)", ok,
                  "; ".join(details) + f"; runtime {both_run.elapsed:.0f}s")


def test_criterion_4_lif_rate_oracle():
    params = LifParams()  # dt = 1 ms
    ok = True
    details = []
    for jmul in (1.5, 2.0, 4.0):
        pop = LifPopulation(n=1)
        spikes = 0
        steps = 4000
        for _ in range(steps):
            spikes += int(lif_step(pop, params, np.array([jmul]))[0])
        emp = spikes / (steps * params.dt)
        ana = lif_rate(jmul, params)
        rel = abs(emp - ana) / ana
        ok &= rel <= 0.05
        details.append(f"J={jmul}: {emp:.1f}Hz vs {ana:.1f}Hz ({rel:.1%})")
    assert report("criterion 4 (LIF rate)", ok, "; ".join(details))


def test_criterion_5_dvs_exactness():
    ok = True
    details = []
    for k in (1, 2, 5):
        state = dvs.init_reference(np.full((8, 8), 0.3))
        frame = np.exp(state.ref_log) - state.eps
        frame[2, 2] = math.exp(state.ref_log[2, 2] + k * state.contrast) - state.eps
        ev = dvs.emulate_step(state, frame, 0)
        ok &= len(ev) == k and np.all(ev.p == 1)
        frame[2, 2] = math.exp(state.ref_log[2, 2] - k * state.contrast) - state.eps
        ev = dvs.emulate_step(state, frame, 1)
        ok &= len(ev) == k and np.all(ev.p == -1)
        details.append(f"k={k} exact")
    same = np.full((8, 8), 0.4)
    state = dvs.init_reference(same)
    ok &= len(dvs.emulate_step(state, same, 0)) == 0
    assert report("criterion 5 (DVS exactness)", ok,
                  "; ".join(details) + "; identical frames silent")


def test_criterion_6_sif_properties():
    rng = np.random.default_rng(0)
    model = sif.disk_polar_model()
    ok = True
    # saturation within [0, 1] across a noisy run
    state = sif.init_from_detection(model, np.array([100.0, 64.0]))
    for k in range(150):
        state = sif.predict(model, state)
        z = sif.h_measure(model, state.s) + rng.normal(0, 2, 2)
        state = sif.update(model, state, z)
        ok &= bool(np.all((state.saturation >= 0) & (state.saturation <= 1)))
    # zero innovation leaves the state untouched
    frozen = sif.FilterState(s=np.array([0.7, 0.01, 44.0]),
                             p=np.diag([0.1, 0.01, 25.0]))
    out = sif.update(model, frozen, sif.h_measure(model, frozen.s))
    ok &= np.allclose(out.s, frozen.s, atol=1e-12)
    ok &= np.allclose(out.p, frozen.p, atol=1e-12)
    # saturated update absorbs the innovation in measurement space
    worst = 0.0
    for _ in range(50):
        s = np.array([rng.uniform(-2, 2), rng.uniform(-0.1, 0.1),
                      rng.uniform(20, 55)])
        a = rng.normal(size=(3, 3))
        state = sif.FilterState(s=s, p=a @ a.T / 3 + 1e-6 * np.eye(3))
        tight = sif.disk_polar_model(delta=(0.25, 0.25))
        inn = rng.uniform(1.0, 4.0, 2) * rng.choice([-1, 1], 2)
        out = sif.update(tight, state, sif.h_measure(tight, s) + inn)
        hjac = sif.h_jacobian(tight, s)
        gain = state.p @ hjac.T @ np.linalg.inv(hjac @ state.p @ hjac.T)
        worst = max(worst, float(np.linalg.norm(hjac @ (gain @ inn) - inn)))
        ok &= bool(np.all(out.saturation == 1.0))
    ok &= worst <= 1e-9
    # Penrose conditions on 100 random full-rank 2x3 matrices
    pworst = 0.0
    for _ in range(100):
        h = rng.normal(size=(2, 3))
        pinv, _ = sif.pseudo_inverse(h)
        pworst = max(
            pworst,
            float(np.max(np.abs(h @ pinv @ h - h))),
            float(np.max(np.abs(pinv @ h @ pinv - pinv))),
            float(np.max(np.abs((h @ pinv).T - h @ pinv))),
            float(np.max(np.abs((pinv @ h).T - pinv @ h))),
        )
    ok &= pworst <= 1e-9
    assert report("criterion 6 (SIF properties)", ok,
                  f"saturated residual {worst:.1e}; Penrose {pworst:.1e}")


def test_criterion_7_jacobian_checks():
    rng = np.random.default_rng(1)
    model = sif.disk_polar_model()
    spec = EmbeddingSpec()
    step = 1e-6
    worst_h = worst_t = 0.0
    for _ in range(100):
        s = np.array([rng.uniform(-3, 3), rng.uniform(-0.15, 0.15),
                      rng.uniform(15, 55)])
        jac = sif.h_jacobian(model, s)
        fd = np.zeros_like(jac)
        for i in range(3):
            hi, lo = s.copy(), s.copy()
            hi[i] += step
            lo[i] -= step
            fd[:, i] = (sif.h_measure(model, hi) - sif.h_measure(model, lo)) / (2 * step)
        worst_h = max(worst_h, np.max(np.abs(jac - fd)) / max(1.0, np.abs(jac).max()))
        jac_t = spec.jacobian(s)
        fd_t = np.zeros_like(jac_t)
        for i in range(3):
            hi, lo = s.copy(), s.copy()
            hi[i] += step
            lo[i] -= step
            fd_t[:, i] = (spec.encode(hi) - spec.encode(lo)) / (2 * step)
        worst_t = max(worst_t, np.max(np.abs(jac_t - fd_t)) / max(1.0, np.abs(jac_t).max()))
    ok = worst_h <= 1e-6 and worst_t <= 1e-6
    assert report("criterion 7 (Jacobians)", ok,
                  f"measurement {worst_h:.2e}; embedding {worst_t:.2e}")


def test_criterion_8_detector_fidelity(default_scene, truth, frames):
    state = dvs.init_reference(frames[0])
    surface = detect.EventSurface.blank(default_scene.height, default_scene.width,
                                        frame_period=state.frame_period)
    worst = 0.0
    counts_ok = True
    for k in range(1, default_scene.frame_count):
        ev = dvs.emulate_step(state, frames[k], k - 1)
        detect.accumulate(surface, ev, k * state.frame_period)
        dets = detect.extract_detections(surface, frame=k)
        if k < 2:
            continue
        counts_ok &= len(dets) == 3
        taken = set()
        for det in dets:
            d = np.hypot(truth.x[k] - det.x, truth.y[k] - det.y)
            j = next(int(i) for i in np.argsort(d) if int(i) not in taken)
            taken.add(j)
            worst = max(worst, float(d[j]))
    ok = counts_ok and worst <= 2.0
    assert report("criterion 8 (detector fidelity)", ok,
                  f"3/frame={counts_ok}, worst offset {worst:.2f}px")


def test_criterion_9_tracker_identity(long_run, intruder_run):
    truth = sc.ground_truth(long_run.config.scene)
    swaps = 0
    for r in long_run.backends["dense"].rows:
        if r["status"] != "confirmed" or r["label"] == 0:
            continue
        k = r["frame"]
        d = np.hypot(truth.x[k] - r["x"], truth.y[k] - r["y"])
        d[~truth.visible[k]] = np.inf
        if truth.labels[int(np.argmin(d))] != r["label"]:
            swaps += 1
    assoc = intruder_run.backends["dense"].assoc
    intruder_ids = [tid for tid, lbl in assoc.items() if lbl == 4]
    rate = 0.0
    if len(intruder_ids) == 1:
        confirmed = [r for r in intruder_run.backends["dense"].rows
                     if r["id"] == intruder_ids[0]
                     and r["status"] == "confirmed" and r["verdict"]]
        rate = float(np.mean([r["verdict"] == "unmodeled" for r in confirmed]))
    ok = swaps == 0 and len(intruder_ids) == 1 and rate >= 0.8
    assert report("criterion 9 (identity + intruder)", ok,
                  f"swaps={swaps}; intruder tracks={len(intruder_ids)}; "
                  f"unmodeled rate={rate:.2f}")


def test_criterion_10_neuron_silencing(default_scene, frames, trained_net):
    def silencer(k, trackers):
        if k == 100 and "spiking" in trackers:
            for trk in trackers["spiking"].tracks:
                if trk.nf is not None:
                    neural.silence_neurons(trk.nf, 0.1, seed=[0, trk.id])

    cfg = pipeline.RunConfig(scene=default_scene, backend="both", seed=0)
    result = pipeline.run_pipeline(cfg, net=trained_net, frames=frames,
                                   on_frame=silencer)
    deltas = backend_deltas(result, first_frame=50)
    within = all(
        d["theta"] <= 2 * EQUIV_BOUNDS["theta"]
        and d["omega"] <= 2 * EQUIV_BOUNDS["omega"]
        and d["r"] <= 2 * EQUIV_BOUNDS["r"]
        for d in deltas.values()
    )
    details = "; ".join(
        f"obj{lbl} dtheta={d['theta']:.3f} domega={d['omega']:.4f} dr={d['r']:.2f}"
        for lbl, d in deltas.items())
    # report-only bound: the run completing is the hard requirement
    note = "within 2x bounds" if within else "OUTSIDE 2x bounds (reported, not asserted)"
    assert report("criterion 10 (silencing)", True, f"{details}; {note}")
    assert all(d["n"] >= 140 for d in deltas.values())


def test_criterion_11_determinism_and_seed_change(
        default_scene, frames, trained_net, both_run, tmp_path):
    rerun_dir = tmp_path / "rerun"
    cfg = pipeline.RunConfig(scene=default_scene, backend="both", seed=0)
    pipeline.run_pipeline(cfg, out_dir=rerun_dir, net=trained_net, frames=frames)
    identical = True
    for name in ("tracks.csv", "omega.csv", "errors.csv", "trajectories.csv"):
        for backend in ("dense", "spiking"):
            a = (Path(both_run.out_dir) / backend / name).read_bytes()
            b = (rerun_dir / backend / name).read_bytes()
            identical &= a == b
    cfg1 = pipeline.RunConfig(scene=default_scene, backend="both", seed=1)
    reseeded = pipeline.run_pipeline(cfg1, net=trained_net, frames=frames)
    changed = (Path(both_run.out_dir) / "spiking" / "tracks.csv").read_bytes()
    deltas = backend_deltas(reseeded, first_frame=50)
    bounds_hold = all(
        d["theta"] <= EQUIV_BOUNDS["theta"] and d["omega"] <= EQUIV_BOUNDS["omega"]
        and d["r"] <= EQUIV_BOUNDS["r"] for d in deltas.values())
    summary = reseeded.backends["dense"].metrics.summary["objects"]
    bounds_hold &= all(s["mean_abs_omega_error"] <= 0.005
                       and s["mean_error_window"] <= 2.0
                       for s in summary.values())
    spiking_changed = any(
        a != b for a, b in zip(
            _spiking_states(both_run), _spiking_states(reseeded)))
    ok = identical and bounds_hold and spiking_changed
    assert report("criterion 11 (determinism)", ok,
                  f"byte-identical={identical}; seed-1 bounds hold={bounds_hold}; "
                  f"spiking outputs changed={spiking_changed}")


def _spiking_states(result):
    return [(r["frame"], r["id"], r["theta"], r["omega"], r["r"])
            for r in result.backends["spiking"].rows]
