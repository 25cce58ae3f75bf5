import numpy as np
import pytest

from spiketrack import classifier as cl
from spiketrack import pipeline
from spiketrack import scene as sc
from spiketrack import sif


@pytest.fixture(scope="session")
def default_scene():
    return sc.validate_scene(sc.default_scene())


@pytest.fixture(scope="session")
def truth(default_scene):
    return sc.ground_truth(default_scene)


@pytest.fixture(scope="session")
def frames(default_scene):
    return [sc.render_frame(default_scene, k)
            for k in range(default_scene.frame_count)]


@pytest.fixture(scope="session")
def trained_net(default_scene, truth):
    patches, labels = cl.build_training_set(default_scene, truth, seed=0)
    net, acc = cl.train_readout(patches, labels, seed=0)
    assert acc >= 0.95
    return net


@pytest.fixture(scope="session")
def dense_run(default_scene, frames, trained_net, tmp_path_factory):
    out = tmp_path_factory.mktemp("dense_run")
    cfg = pipeline.RunConfig(scene=default_scene, backend="dense", seed=0)
    result = pipeline.run_pipeline(cfg, out_dir=out, net=trained_net,
                                   frames=frames)
    return result


@pytest.fixture(scope="session")
def both_run(default_scene, frames, trained_net, tmp_path_factory):
    out = tmp_path_factory.mktemp("both_run")
    cfg = pipeline.RunConfig(scene=default_scene, backend="both", seed=0)
    result = pipeline.run_pipeline(cfg, out_dir=out, net=trained_net,
                                   frames=frames)
    return result


@pytest.fixture(scope="session")
def long_run(trained_net):
    """Two full revolutions (252 frames of motion) for identity checks."""
    scene = sc.validate_scene(sc.default_scene(frame_count=253))
    cfg = pipeline.RunConfig(scene=scene, backend="dense", seed=0)
    return pipeline.run_pipeline(cfg, net=trained_net)


@pytest.fixture(scope="session")
def intruder_run(trained_net):
    scene = sc.validate_scene(sc.intruder_scene(frame_count=200))
    cfg = pipeline.RunConfig(scene=scene, backend="dense", seed=0)
    return pipeline.run_pipeline(cfg, net=trained_net)


def backend_deltas(result, first_frame=50):
    """RMS spiking-vs-dense state deltas per truth label."""
    dense = {(r["frame"], r["label"]): r
             for r in result.backends["dense"].rows if r["label"]}
    spik = {(r["frame"], r["label"]): r
            for r in result.backends["spiking"].rows if r["label"]}
    out = {}
    for lbl in (1, 2, 3):
        dth, dom, dr = [], [], []
        for (k, l), rd in dense.items():
            if l != lbl or k < first_frame:
                continue
            rs = spik.get((k, l))
            if rs is None or not np.isfinite(rd["theta"]) or not np.isfinite(rs["theta"]):
                continue
            dth.append(sif.wrap_angle(rs["theta"] - rd["theta"]))
            dom.append(rs["omega"] - rd["omega"])
            dr.append(rs["r"] - rd["r"])
        rms = lambda v: float(np.sqrt(np.mean(np.square(v))))
        out[lbl] = {"theta": rms(dth), "omega": rms(dom), "r": rms(dr),
                    "n": len(dth)}
    return out
