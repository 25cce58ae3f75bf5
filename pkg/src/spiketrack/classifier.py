"""Frame-path patch classifier used to validate detections.

A small feedforward network scores image patches against the set of
known object classes plus an explicit background class. Training is
extreme-learning-machine style: a fixed seeded random hidden layer and a
closed-form ridge readout, so there is no backprop and results are
exactly reproducible. Anything that scores below the decision threshold
or lands on the background class is reported as "unmodeled".
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .scene import DiskScene, GroundTruth, ground_truth, render_frame

BACKGROUND = "background"


class ClassifierError(ValueError):
    pass


@dataclass(frozen=True)
class Layer:
    w: np.ndarray
    b: np.ndarray
    activation: str  # "tanh" | "identity"


@dataclass
class MlpNetwork:
    """Layer stack with class labels; final width = len(class_labels) + 1
    (the extra column is the background class)."""

    layers: list[Layer]
    class_labels: list[str]
    decision_threshold: float = 0.5
    patch_size: int = 24
    seed: int = 0


@dataclass(frozen=True)
class ValidationVerdict:
    label: str  # class name or "unmodeled"
    confidence: float


def standardize_patch(patch: np.ndarray) -> np.ndarray:
    """Zero-mean unit-variance flattening; an all-constant patch maps to zeros."""
    v = np.asarray(patch, dtype=np.float64).ravel()
    mu = v.mean()
    sd = v.std()
    if sd == 0:
        return np.zeros_like(v)
    return (v - mu) / sd


def _activate(x: np.ndarray, tag: str) -> np.ndarray:
    if tag == "tanh":
        return np.tanh(x)
    if tag == "identity":
        return x
    raise ClassifierError(f"unknown activation {tag!r}")


def forward(net: MlpNetwork, patch: np.ndarray):
    """Run one standardized patch (or a batch, rows = patches) through the net.

    Returns (scores, features) where features are the penultimate-layer
    activations.
    """
    a = np.asarray(patch, dtype=np.float64)
    single = a.ndim == 1
    if single:
        a = a[None, :]
    if a.shape[1] != net.layers[0].w.shape[1]:
        raise ClassifierError(
            f"patch length {a.shape[1]} does not match input width "
            f"{net.layers[0].w.shape[1]}"
        )
    penultimate = a
    for layer in net.layers:
        penultimate = a
        a = _activate(a @ layer.w.T + layer.b, layer.activation)
    if single:
        return a[0], penultimate[0]
    return a, penultimate


def softmax(scores: np.ndarray) -> np.ndarray:
    e = np.exp(scores - np.max(scores, axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def train_readout(patches: np.ndarray, labels: list[str], hidden_width: int = 384,
                  lam: float = 1.0, seed: int = 0, target_scale: float = 4.0,
                  decision_threshold: float = 0.5, patch_size: int = 24):
    """Fit the network: seeded Gaussian hidden layer, ridge-regressed readout.

    patches: (N, P*P) raw luminance rows; labels: class name per row
    (BACKGROUND marks synthesized background patches). One-hot targets
    are scaled by target_scale so a confidently classified patch clears
    the softmax decision threshold. Returns (net, training_accuracy).
    """
    if lam <= 0:
        raise ClassifierError(f"ridge lambda must be > 0 (Gram matrix may be singular), got {lam}")
    patches = np.asarray(patches, dtype=np.float64)
    n_samples, d = patches.shape
    class_labels = sorted({l for l in labels if l != BACKGROUND})
    if len(class_labels) < 2:
        raise ClassifierError(f"need at least 2 object classes, got {class_labels}")
    all_classes = class_labels + [BACKGROUND]
    counts = {c: labels.count(c) for c in all_classes}
    for c, cnt in counts.items():
        if cnt == 0:
            raise ClassifierError(f"class {c!r} has no samples")

    x = np.vstack([standardize_patch(p) for p in patches])
    rng = np.random.default_rng(seed)
    w_h = rng.normal(0.0, 1.0 / np.sqrt(d), size=(hidden_width, d))
    hidden = np.tanh(x @ w_h.T)

    a1 = np.hstack([hidden, np.ones((n_samples, 1))])
    y = np.zeros((n_samples, len(all_classes)))
    index = {c: i for i, c in enumerate(all_classes)}
    for i, lbl in enumerate(labels):
        y[i, index[lbl]] = target_scale
    gram = a1.T @ a1 + lam * np.eye(hidden_width + 1)
    sol = np.linalg.solve(gram, a1.T @ y)
    w_out, b_out = sol[:-1].T, sol[-1]

    net = MlpNetwork(
        layers=[Layer(w_h, np.zeros(hidden_width), "tanh"),
                Layer(w_out, b_out, "identity")],
        class_labels=class_labels,
        decision_threshold=decision_threshold,
        patch_size=patch_size,
        seed=seed,
    )
    scores, _ = forward(net, x)
    acc = float(np.mean(np.argmax(scores, axis=1) == [index[l] for l in labels]))
    return net, acc


def extract_patch(frame: np.ndarray, centroid, patch_size: int = 24) -> np.ndarray:
    """Cut a patch_size x patch_size window centered on the (rounded)
    centroid; parts outside the frame are zero-padded."""
    h, w = frame.shape
    cx, cy = int(round(centroid[0])), int(round(centroid[1]))
    half = patch_size // 2
    out = np.zeros((patch_size, patch_size))
    x0, x1 = cx - half, cx - half + patch_size
    y0, y1 = cy - half, cy - half + patch_size
    sx0, sy0 = max(0, x0), max(0, y0)
    sx1, sy1 = min(w, x1), min(h, y1)
    if sx0 < sx1 and sy0 < sy1:
        out[sy0 - y0:sy1 - y0, sx0 - x0:sx1 - x0] = frame[sy0:sy1, sx0:sx1]
    return out


def validate_detection(net: MlpNetwork, frame: np.ndarray, centroid) -> ValidationVerdict:
    """Classify the patch around a detection.

    Verdict is "unmodeled" when the best softmax score is below the
    decision threshold or the winner is the background class.
    """
    patch = extract_patch(frame, centroid, net.patch_size)
    scores, _ = forward(net, standardize_patch(patch))
    probs = softmax(scores)
    best = int(np.argmax(probs))
    confidence = float(probs[best])
    if confidence < net.decision_threshold or best == len(net.class_labels):
        return ValidationVerdict("unmodeled", confidence)
    return ValidationVerdict(net.class_labels[best], confidence)


def synthetic_clutter_patch(rng: np.random.Generator, patch_size: int = 24,
                            bg: float = 0.2, fg: float = 0.9) -> np.ndarray:
    """One synthesized background patch: empty, a step edge, or a random
    blob (rotated rectangle, bar, or ellipse) that is none of the known
    object shapes. These teach the classifier that unfamiliar structure
    belongs to the background class instead of extrapolating onto a
    known one."""
    yy, xx = np.indices((patch_size, patch_size)).astype(np.float64)
    c = patch_size / 2 + rng.uniform(-2, 2, size=2)
    phi = rng.uniform(0, np.pi)
    cs, sn = np.cos(phi), np.sin(phi)
    u = cs * (xx - c[0]) + sn * (yy - c[1])
    v = -sn * (xx - c[0]) + cs * (yy - c[1])
    kind = rng.integers(0, 5)
    patch = np.full((patch_size, patch_size), bg)
    lum = rng.uniform(0.55, 1.0) * fg
    if kind == 0:
        pass  # empty background
    elif kind == 1:
        patch[u > rng.uniform(-4, 4)] = lum  # step edge
    elif kind == 2:
        hw, hh = rng.uniform(3, 8), rng.uniform(3, 8)
        patch[(np.abs(u) <= hw) & (np.abs(v) <= hh)] = lum  # rectangle
    elif kind == 3:
        patch[(np.abs(u) <= rng.uniform(4, 10)) & (np.abs(v) <= rng.uniform(0.5, 1.6))] = lum
    else:
        a, b = rng.uniform(5.5, 9.0), rng.uniform(2.5, 4.5)
        patch[(u / a) ** 2 + (v / b) ** 2 <= 1.0] = lum  # elongated ellipse
    return patch


def build_training_set(scene: DiskScene, truth: GroundTruth | None = None,
                       patch_size: int = 24, frame_stride: int = 1,
                       background_per_frame: int = 5, jitter: float = 1.5,
                       seed: int = 0):
    """Label patches straight off rendered frames.

    Object patches are cut near the analytic positions, offset by up to
    `jitter` px so the classifier tolerates the sub-pixel error of real
    detections. Background patches alternate between scene crops far
    from every object and synthesized clutter. Returns (patches, labels).
    """
    if truth is None:
        truth = ground_truth(scene)
    rng = np.random.default_rng([seed, 17])
    patches, labels = [], []
    clearance = max(o.size for o in scene.objects) + patch_size / 2
    for k in range(0, scene.frame_count, frame_stride):
        frame = render_frame(scene, k)
        for j, shape in enumerate(truth.shapes):
            if truth.visible[k, j]:
                ox, oy = rng.uniform(-jitter, jitter, size=2)
                patches.append(extract_patch(
                    frame, (truth.x[k, j] + ox, truth.y[k, j] + oy),
                    patch_size).ravel())
                labels.append(shape)
        for i in range(background_per_frame):
            if (k // frame_stride + i) % 2 == 0:
                patches.append(synthetic_clutter_patch(
                    rng, patch_size, scene.background_intensity,
                    scene.object_intensity).ravel())
                labels.append(BACKGROUND)
                continue
            for _attempt in range(50):
                bx = rng.uniform(patch_size / 2, scene.width - patch_size / 2)
                by = rng.uniform(patch_size / 2, scene.height - patch_size / 2)
                d = np.hypot(truth.x[k] - bx, truth.y[k] - by)
                if np.all(d[truth.visible[k]] > clearance):
                    patches.append(extract_patch(frame, (bx, by), patch_size).ravel())
                    labels.append(BACKGROUND)
                    break
    return np.array(patches), labels


def save_model(net: MlpNetwork, path) -> None:
    doc = {
        "layers": [
            {
                "rows": layer.w.shape[0],
                "cols": layer.w.shape[1],
                "weights": layer.w.ravel().tolist(),
                "bias": layer.b.tolist(),
                "activation": layer.activation,
            }
            for layer in net.layers
        ],
        "class_labels": net.class_labels,
        "threshold": net.decision_threshold,
        "patch_size": net.patch_size,
        "seed": net.seed,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_model(path) -> MlpNetwork:
    with open(path) as fh:
        doc = json.load(fh)
    layers = [
        Layer(
            np.array(l["weights"], dtype=np.float64).reshape(l["rows"], l["cols"]),
            np.array(l["bias"], dtype=np.float64),
            l["activation"],
        )
        for l in doc["layers"]
    ]
    return MlpNetwork(layers=layers, class_labels=list(doc["class_labels"]),
                      decision_threshold=float(doc["threshold"]),
                      patch_size=int(doc.get("patch_size", 24)),
                      seed=int(doc.get("seed", 0)))
