#!/usr/bin/env python3
"""The dense sliding-innovation filter recovering an unmeasured rate.

The filter starts with a deliberately wrong angular rate (zero) and only
ever sees pixel positions. The saturated innovation gain, weighted
through the covariance, funnels position evidence into the rate state:
watch the estimate climb to 0.05 rad/frame and stay there.
"""

import math

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from spiketrack import sif

model = sif.disk_polar_model()
r_true, omega = 50.0, 0.05
state = sif.init_from_detection(model, np.array([114.0, 64.0]))
print("initial state [theta, omega, r]:", state.s)

omegas, errors, sats = [], [], []
for k in range(1, 200):
    state = sif.predict(model, state)
    th = omega * k
    z = np.array([64 + r_true * math.cos(th), 64 + r_true * math.sin(th)])
    state = sif.update(model, state, z)
    omegas.append(state.s[1])
    errors.append(np.linalg.norm(sif.h_measure(model, state.s) - z))
    sats.append(state.saturation.max())

fig, axes = plt.subplots(3, 1, figsize=(8, 8), sharex=True)
axes[0].plot(omegas)
axes[0].axhline(omega, color="k", ls=":")
axes[0].set_ylabel("rate estimate")
axes[1].semilogy(errors)
axes[1].set_ylabel("position error (px)")
axes[2].plot(sats)
axes[2].set_ylabel("max saturation")
axes[2].set_xlabel("frame")
fig.tight_layout()
fig.savefig("demo05_sif.png", dpi=110)
print("wrote demo05_sif.png")
print(f"rate after 199 frames: {omegas[-1]:.5f} (true {omega})")
