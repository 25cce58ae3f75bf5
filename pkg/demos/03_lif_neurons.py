#!/usr/bin/env python3
"""Leaky integrate-and-fire basics: membrane traces and the rate curve.

The linear leak gives the steady firing rate in closed form, which the
test suite uses as an oracle; here we overlay it with simulated rates.
"""

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from spiketrack.lif import LifParams, LifPopulation, lif_rate, lif_step

params = LifParams()  # tau_m 20 ms, threshold 1, refractory 2 ms, dt 1 ms

# One neuron, step current switched on after 50 ms.
pop = LifPopulation(n=1)
us, spikes = [], []
for step in range(400):
    j = np.array([1.8 if step >= 50 else 0.0])
    s = lif_step(pop, params, j)
    us.append(pop.u[0])
    spikes.append(bool(s[0]))

fig, (a, b) = plt.subplots(2, 1, figsize=(8, 6), sharex=False)
t = np.arange(400) * params.dt * 1e3
a.plot(t, us, lw=1)
a.vlines(t[np.array(spikes)], 1.0, 1.4, color="tab:red", lw=1)
a.axhline(params.v_th, color="k", ls=":", lw=1)
a.set_xlabel("time (ms)")
a.set_ylabel("membrane potential")
a.set_title("step current at 50 ms; red ticks are spikes")

# Simulated rate vs the closed form over a current sweep.
currents = np.linspace(0.5, 6.0, 40)
sim = []
for j in currents:
    p = LifPopulation(n=1)
    count = sum(int(lif_step(p, params, np.array([j]))[0]) for _ in range(3000))
    sim.append(count / 3.0)
b.plot(currents, lif_rate(currents, params), label="closed form")
b.plot(currents, sim, ".", ms=4, label="simulated (dt = 1 ms)")
b.set_xlabel("input current")
b.set_ylabel("rate (Hz)")
b.legend()
fig.tight_layout()
fig.savefig("demo03_lif.png", dpi=110)
print("wrote demo03_lif.png")
print("rate at J=2:", lif_rate(2.0, params), "Hz")
