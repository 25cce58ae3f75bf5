import math

import numpy as np
import pytest

from spiketrack.lif import (LifError, LifParams, LifPopulation, lif_rate,
                            lif_rate_discrete, lif_step, run_window)


def simulate_rate(j, params, duration=2.0):
    pop = LifPopulation(n=1)
    steps = int(round(duration / params.dt))
    spikes = 0
    for _ in range(steps):
        spikes += int(lif_step(pop, params, np.array([j]))[0])
    return spikes / duration


class TestLifStep:
    def test_zero_input_geometric_decay(self):
        params = LifParams()
        pop = LifPopulation(n=1)
        pop.u[0] = 0.5
        for i in range(1, 6):
            lif_step(pop, params, np.zeros(1))
            assert pop.u[0] == pytest.approx(0.5 * (1 - params.dt / params.tau_m) ** i)

    def test_immediate_spike_at_threshold(self):
        params = LifParams()
        pop = LifPopulation(n=1)
        pop.u[0] = params.v_th
        spikes = lif_step(pop, params, np.zeros(1))
        assert spikes[0]
        assert pop.u[0] == params.v_reset

    def test_rate_matches_closed_form(self):
        params = LifParams()  # t_ref = 2 ms, dt = 1 ms
        emp = simulate_rate(2.0, params)
        assert emp == pytest.approx(lif_rate(2.0, params), rel=0.05)

    def test_no_spike_during_refractory(self):
        params = LifParams(t_ref=0.005)
        pop = LifPopulation(n=1)
        pop.u[0] = 2.0
        raster = [bool(lif_step(pop, params, np.full(1, 5.0))[0]) for _ in range(30)]
        spike_steps = [i for i, s in enumerate(raster) if s]
        assert len(spike_steps) >= 2
        assert min(np.diff(spike_steps)) >= round(params.t_ref / params.dt)

    def test_nonfinite_current_rejected(self):
        pop = LifPopulation(n=2)
        with pytest.raises(LifError):
            lif_step(pop, LifParams(), np.array([0.0, float("nan")]))

    def test_trace_decay_exact(self):
        params = LifParams()
        pop = LifPopulation(n=1, tau_syn=0.02)
        pop.a[0] = 3.0
        lif_step(pop, params, np.zeros(1))
        assert pop.a[0] == pytest.approx(3.0 * math.exp(-params.dt / 0.02), abs=1e-15)

    def test_sign_preserved_under_decay(self):
        params = LifParams()
        pop = LifPopulation(n=2)
        pop.u[:] = (0.7, -0.7)
        prev = np.abs(pop.u.copy())
        for _ in range(50):
            lif_step(pop, params, np.zeros(2))
            assert pop.u[0] > 0 and pop.u[1] < 0
            assert np.all(np.abs(pop.u) <= prev)
            prev = np.abs(pop.u.copy())


class TestLifRate:
    def test_threshold_current_silent(self):
        params = LifParams()
        assert lif_rate(params.v_th - params.v_reset, params) == 0.0
        assert lif_rate(0.5, params) == 0.0

    def test_two_theta_reference_value(self):
        params = LifParams(t_ref=0.0)
        assert lif_rate(2.0, params) == pytest.approx(1 / (0.02 * math.log(2)))
        assert lif_rate(2.0, params) == pytest.approx(72.13, abs=0.01)

    def test_fine_grid_simulation_cross_check(self):
        params = LifParams(t_ref=0.0, dt=1e-5)
        emp = simulate_rate(2.0, params, duration=0.5)
        assert emp == pytest.approx(72.13, rel=0.01)

    def test_monotone_in_current(self):
        params = LifParams()
        rates = lif_rate(np.linspace(0.5, 8.0, 100), params)
        assert np.all(np.diff(rates) >= 0)

    def test_discrete_rate_matches_engine(self):
        params = LifParams()
        for j in (1.2, 1.5, 2.0, 4.0, 8.0):
            assert simulate_rate(j, params) == pytest.approx(
                lif_rate_discrete(j, params), rel=1e-2)

    def test_halving_dt_stable(self):
        coarse = simulate_rate(2.0, LifParams(dt=0.001))
        fine = simulate_rate(2.0, LifParams(dt=0.0005))
        assert abs(coarse - fine) / fine < 0.02

    def test_params_validation(self):
        with pytest.raises(LifError):
            LifParams(dt=0.01, tau_m=0.02)  # dt > tau_m / 5
        with pytest.raises(LifError):
            LifParams(v_th=0.0, v_reset=0.0)


class TestRunWindow:
    def test_zero_steps(self):
        pop = LifPopulation(n=3)
        pop.u[:] = 0.4
        before = pop.u.copy()
        raster = run_window(pop, LifParams(), np.zeros((0, 3)), 0)
        assert raster.shape == (0, 3)
        assert np.array_equal(pop.u, before)

    def test_split_window_composes(self):
        params = LifParams()
        rng = np.random.default_rng(0)
        schedule = rng.uniform(0, 3, size=(100, 5))
        pop_a = LifPopulation(n=5)
        full = run_window(pop_a, params, schedule, 100)
        pop_b = LifPopulation(n=5)
        first = run_window(pop_b, params, schedule[:50], 50)
        second = run_window(pop_b, params, schedule[50:], 50)
        assert np.array_equal(full, np.vstack([first, second]))
        assert np.array_equal(pop_a.u, pop_b.u)
        assert np.array_equal(pop_a.a, pop_b.a)

    def test_population_count_matches_rate_oracle(self):
        params = LifParams()
        n, duration = 40, 1.5
        steps = int(duration / params.dt)
        pop = LifPopulation(n=n)
        raster = run_window(pop, params, np.full((steps, n), 3.0), steps)
        expected = n * lif_rate(3.0, params) * duration
        assert raster.sum() == pytest.approx(expected, rel=0.10)

    def test_short_schedule_rejected(self):
        with pytest.raises(LifError):
            run_window(LifPopulation(n=2), LifParams(), np.zeros((5, 2)), 10)
