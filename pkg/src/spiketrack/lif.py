"""Leaky integrate-and-fire neuron engine.

Membrane dynamics follow tau_m * du/dt = -(u - v_reset) + J with a hard
threshold: a neuron at or above v_th fires, resets, and sits clamped at
v_reset for the refractory time. The linear leak makes the steady-state
firing rate available in closed form (`lif_rate`), which the tests use
as an independent oracle and the population-coding layer uses to solve
tuning curves without simulating.

Spike timing convention: the threshold test runs on the membrane state
entering the step (the Heaviside of the current potential), then
non-refractory neurons integrate. The step a spike occurs in counts
toward the refractory time, so with t_ref = 2 ms and dt = 1 ms a neuron
misses exactly two integration steps per spike.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class LifError(ValueError):
    pass


@dataclass(frozen=True)
class LifParams:
    tau_m: float = 0.02
    v_th: float = 1.0
    v_reset: float = 0.0
    t_ref: float = 0.002
    dt: float = 0.001

    def __post_init__(self):
        if self.tau_m <= 0:
            raise LifError(f"tau_m must be > 0, got {self.tau_m}")
        if self.v_th <= self.v_reset:
            raise LifError(f"need v_th > v_reset, got {self.v_th} <= {self.v_reset}")
        if self.dt <= 0:
            raise LifError(f"dt must be > 0, got {self.dt}")
        if self.t_ref < 0:
            raise LifError(f"t_ref must be >= 0, got {self.t_ref}")
        if self.dt > self.tau_m / 5:
            raise LifError(f"dt={self.dt} too coarse for tau_m={self.tau_m} (need dt <= tau_m/5)")


@dataclass
class LifPopulation:
    """Membrane potentials, refractory clocks, and synaptic traces.

    w_in maps an external input vector to per-neuron current; w_rec maps
    the population's own synaptic traces back as recurrent current. The
    trace is an exponential filter where each spike deposits 1/tau_syn,
    so a steady trace value approximates the firing rate in Hz.
    """

    n: int
    u: np.ndarray = None
    refrac_remaining: np.ndarray = None
    a: np.ndarray = None
    w_in: np.ndarray | None = None
    w_rec: np.ndarray | None = None
    tau_syn: float = 0.02

    def __post_init__(self):
        if self.u is None:
            self.u = np.zeros(self.n)
        if self.refrac_remaining is None:
            self.refrac_remaining = np.zeros(self.n)
        if self.a is None:
            self.a = np.zeros(self.n)

    def copy(self) -> "LifPopulation":
        return LifPopulation(
            n=self.n, u=self.u.copy(), refrac_remaining=self.refrac_remaining.copy(),
            a=self.a.copy(), w_in=self.w_in, w_rec=self.w_rec, tau_syn=self.tau_syn,
        )


def lif_step(pop: LifPopulation, params: LifParams, input_current: np.ndarray) -> np.ndarray:
    """Advance the population one micro-step; return the spike vector.

    input_current is per-neuron current (length n); recurrent current
    w_rec @ a from the previous step's traces is added when w_rec is set.
    """
    j = np.asarray(input_current, dtype=np.float64)
    if j.shape != (pop.n,):
        raise LifError(f"input current has shape {j.shape}, expected ({pop.n},)")
    if not np.all(np.isfinite(j)):
        raise LifError("non-finite input current")
    if pop.w_rec is not None:
        j = j + pop.w_rec @ pop.a

    in_refrac = pop.refrac_remaining > 0
    spikes = (pop.u >= params.v_th) & ~in_refrac
    pop.u[spikes] = params.v_reset
    pop.refrac_remaining[spikes] = params.t_ref

    clamped = pop.refrac_remaining > 0
    pop.u[clamped] = params.v_reset
    pop.refrac_remaining[clamped] = np.maximum(
        pop.refrac_remaining[clamped] - params.dt, 0.0)

    active = ~clamped
    du = (params.dt / params.tau_m) * (-(pop.u[active] - params.v_reset) + j[active])
    pop.u[active] += du

    pop.a *= np.exp(-params.dt / pop.tau_syn)
    pop.a[spikes] += 1.0 / pop.tau_syn
    return spikes


def lif_rate(j, params: LifParams = LifParams()):
    """Steady-state firing rate (Hz) for constant current, measured from v_reset.

    Zero at or below threshold current; otherwise
    1 / (t_ref + tau_m * ln(J / (J - (v_th - v_reset)))).
    Accepts scalars or arrays.
    """
    j = np.asarray(j, dtype=np.float64)
    theta = params.v_th - params.v_reset
    out = np.zeros_like(j)
    drive = j > theta
    jd = j[drive] if j.ndim else (j if drive else None)
    if j.ndim == 0:
        if not drive:
            return 0.0
        return float(1.0 / (params.t_ref + params.tau_m * np.log(j / (j - theta))))
    out[drive] = 1.0 / (params.t_ref + params.tau_m * np.log(jd / (jd - theta)))
    return out


def lif_rate_discrete(j, params: LifParams = LifParams()):
    """Steady-state rate (Hz) of the forward-Euler engine at its actual dt.

    A neuron at v_reset needs n = ceil(ln(1 - theta/J) / ln(1 - dt/tau))
    integration steps to reach threshold, then t_ref/dt refractory
    steps; the realized rate is the reciprocal of that whole period.
    Converges to lif_rate as dt -> 0; use this one when solving decoders
    that must be consistent with simulated populations.
    """
    j = np.asarray(j, dtype=np.float64)
    theta = params.v_th - params.v_reset
    scalar = j.ndim == 0
    j = np.atleast_1d(j)
    out = np.zeros_like(j)
    drive = j > theta
    beta = 1.0 - params.dt / params.tau_m
    n = np.ceil(np.log1p(-theta / j[drive]) / math.log(beta) - 1e-12)
    period = (n + round(params.t_ref / params.dt)) * params.dt
    out[drive] = 1.0 / period
    return float(out[0]) if scalar else out


def run_window(pop: LifPopulation, params: LifParams, input_schedule: np.ndarray,
               steps: int) -> np.ndarray:
    """Apply lif_step `steps` times; raster rows are micro-steps.

    input_schedule must provide at least `steps` rows of per-neuron
    currents. The population is advanced in place.
    """
    schedule = np.asarray(input_schedule, dtype=np.float64)
    if steps < 0:
        raise LifError(f"steps must be >= 0, got {steps}")
    if steps and (schedule.ndim != 2 or schedule.shape[0] < steps
                  or schedule.shape[1] != pop.n):
        raise LifError(
            f"schedule {schedule.shape} cannot cover {steps} steps of {pop.n} neurons"
        )
    raster = np.zeros((steps, pop.n), dtype=bool)
    for i in range(steps):
        raster[i] = lif_step(pop, params, schedule[i])
    return raster


def write_spike_csv(path, raster: np.ndarray) -> None:
    """Dump a (steps, n) boolean raster as `step,neuron` rows."""
    steps, neurons = np.nonzero(raster)
    with open(path, "w") as fh:
        fh.write("step,neuron\n")
        for s, n in zip(steps, neurons):
            fh.write(f"{s},{n}\n")
