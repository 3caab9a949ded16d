import numpy as np
import pytest

from snnmeta.core import (DenseLifLayer, LifParams, NeuronPopulation,
                          SpikeRaster, StochasticParams, escape_rate,
                          lif_step, run_presentation, step_population,
                          stochastic_fire)


def drive(pop, params, current, n_steps, dt):
    fired = np.zeros((pop.size, n_steps), dtype=bool)
    for k in range(n_steps):
        fired[:, k] = lif_step(pop, params, current, dt)
    return fired


class TestLifStep:
    def test_subthreshold_charging_matches_exponential(self):
        p = LifParams()
        pop = NeuronPopulation(1, p)
        dt = p.tau_m / 100
        amp = 0.9 * (p.u_theta - p.u_rest) / p.r_m   # stays below threshold
        us = []
        for _ in range(500):
            lif_step(pop, p, np.array([amp]), dt)
            us.append(pop.u[0])
        t = dt * np.arange(1, 501)
        analytic = p.u_rest + p.r_m * amp * (1 - np.exp(-t / p.tau_m))
        err = np.max(np.abs(np.asarray(us) - analytic)) / (p.r_m * amp)
        assert err < 0.01

    def test_fires_and_resets_at_threshold(self):
        p = LifParams(tau_m=10.0, t_ref=2.0)
        pop = NeuronPopulation(1, p)
        current = np.array([400.0])      # one-step rise from rest
        fired = lif_step(pop, p, current, dt=1.0)
        assert fired[0]
        assert pop.u[0] == p.u_reset

    def test_refractory_holds_then_releases(self):
        p = LifParams(tau_m=10.0, t_ref=2.0)
        pop = NeuronPopulation(1, p)
        fired = drive(pop, p, np.array([400.0]), 9, dt=1.0)
        # fire, two held steps, fire again: period of 3 steps
        assert list(np.flatnonzero(fired[0])) == [0, 3, 6]

    def test_zero_current_stays_at_rest(self):
        p = LifParams()
        pop = NeuronPopulation(3, p)
        fired = drive(pop, p, np.zeros(3), 50, dt=1.0)
        assert not fired.any()
        assert np.allclose(pop.u, p.u_rest)

    def test_rejects_nonfinite_current(self):
        p = LifParams()
        pop = NeuronPopulation(2, p)
        with pytest.raises(ValueError, match="non-finite"):
            lif_step(pop, p, np.array([1.0, np.nan]), 1.0)

    def test_rejects_bad_dt(self):
        pop = NeuronPopulation(1, LifParams())
        with pytest.raises(ValueError, match="dt"):
            lif_step(pop, LifParams(), np.zeros(1), 0.0)

    def test_rejects_stochastic_population(self):
        pop = NeuronPopulation(1, LifParams(), mode="stochastic")
        with pytest.raises(ValueError, match="deterministic"):
            lif_step(pop, LifParams(), np.zeros(1), 1.0)


class TestParams:
    def test_lif_validation(self):
        with pytest.raises(ValueError):
            LifParams(tau_m=0.0)
        with pytest.raises(ValueError):
            LifParams(t_ref=-1.0)
        with pytest.raises(ValueError):
            LifParams(u_reset=-40.0)   # above threshold

    def test_stochastic_validation(self):
        with pytest.raises(ValueError):
            StochasticParams(rho_theta=0.0)
        with pytest.raises(ValueError):
            StochasticParams(delta_u=-1.0)

    def test_population_mode_validation(self):
        with pytest.raises(ValueError):
            NeuronPopulation(1, LifParams(), mode="fuzzy")

    def test_population_reset(self):
        pop = NeuronPopulation(2, LifParams())
        lif_step(pop, LifParams(), np.array([400.0, 0.0]), 1.0)
        pop.reset()
        assert np.allclose(pop.u, LifParams().u_rest)
        assert np.all(pop.ref_remaining == 0)


class TestEscapeNoise:
    def test_rate_at_threshold_is_rho_theta(self):
        sp = StochasticParams(rho_theta=0.7, delta_u=2.0)
        lif = LifParams()
        assert escape_rate(lif.u_theta, sp, lif) == pytest.approx(0.7)

    def test_rate_is_exponential_in_u(self):
        sp = StochasticParams(rho_theta=1.0, delta_u=2.5)
        lif = LifParams()
        r1 = escape_rate(lif.u_theta - 2.5, sp, lif)
        r2 = escape_rate(lif.u_theta + 2.5, sp, lif)
        assert r1 == pytest.approx(np.exp(-1.0))
        assert r2 == pytest.approx(np.exp(1.0))

    def test_rate_argument_is_capped(self):
        sp = StochasticParams(rho_theta=1.0, delta_u=1.0)
        lif = LifParams()
        assert np.isfinite(escape_rate(1e9, sp, lif))

    def test_fire_probability_tracks_hazard(self):
        sp = StochasticParams(rho_theta=0.05, delta_u=2.5)
        lif = LifParams()
        rng = np.random.default_rng(11)
        n = 40000
        u = np.full(n, lif.u_theta)
        fired = stochastic_fire(u, sp, lif, dt=1.0, rng=rng)
        p = 1.0 - np.exp(-0.05)
        se = np.sqrt(p * (1 - p) / n)
        assert abs(fired.mean() - p) < 4 * se

    def test_fire_rejects_bad_dt(self):
        with pytest.raises(ValueError):
            stochastic_fire(np.zeros(1), StochasticParams(), LifParams(),
                            0.0, np.random.default_rng(0))

    def test_step_population_requires_rng(self):
        pop = NeuronPopulation(1, LifParams(), mode="stochastic")
        with pytest.raises(ValueError, match="rng"):
            step_population(pop, np.zeros(1), 1.0)


class TestSpikeRaster:
    def test_counts_and_mask(self):
        r = SpikeRaster(3, 4, 1.0)
        r.spikes[0, 1] = True
        r.spikes[0, 3] = True
        r.spikes[2, 0] = True
        assert list(r.counts()) == [2, 0, 1]
        assert list(r.active_mask()) == [True, False, True]

    def test_shape_validation(self):
        with pytest.raises(ValueError):
            SpikeRaster(2, 3, 1.0, spikes=np.zeros((3, 2), dtype=bool))


class TestRunPresentation:
    def _input(self, n_steps=10):
        r = SpikeRaster(1, n_steps, 1.0)
        r.spikes[0, 0] = True
        return r

    def test_one_step_delay_between_layers(self):
        p = LifParams(tau_m=10.0)
        l0 = DenseLifLayer(np.ones((1, 1)), p, gain=400.0)
        l1 = DenseLifLayer(np.ones((1, 1)), p, gain=400.0)
        r0, r1 = run_presentation([l0, l1], self._input(), 10.0, 1.0)
        assert r0.spikes[0, 0]            # driven by the input at step 0
        assert not r1.spikes[0, 0]
        assert r1.spikes[0, 1]            # sees layer 0 one step later

    def test_duration_must_be_multiple_of_dt(self):
        l0 = DenseLifLayer(np.ones((1, 1)), LifParams())
        with pytest.raises(ValueError, match="multiple"):
            run_presentation([l0], self._input(), 10.5, 1.0)

    def test_fan_in_chain_validated(self):
        l0 = DenseLifLayer(np.ones((1, 2)), LifParams())
        l1 = DenseLifLayer(np.ones((3, 1)), LifParams())
        with pytest.raises(ValueError):
            run_presentation([l0, l1], self._input(), 10.0, 1.0)

    def test_short_input_raster_rejected(self):
        l0 = DenseLifLayer(np.ones((1, 1)), LifParams())
        with pytest.raises(ValueError):
            run_presentation([l0], self._input(n_steps=5), 10.0, 1.0)
