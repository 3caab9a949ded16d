"""Clock-driven LIF dynamics: deterministic and escape-noise neurons.

Everything here advances in fixed steps of `dt` milliseconds.  Membrane
potentials are plain float64 arrays; spikes are boolean arrays.  Layers
built on top of this module (see layers.py) only need `lif_step`,
`stochastic_fire` and the `SpikeRaster` container.
"""

from dataclasses import dataclass

import numpy as np

# Cap on the exponent of the escape-noise intensity.  exp(20) ~ 4.8e8
# events/ms, which already saturates the per-step fire probability at 1.
EXP_ARG_CAP = 20.0


@dataclass
class LifParams:
    """Leaky integrate-and-fire constants.

    tau_m (ms) sets the leak rate, r_m scales input current into mV,
    u_rest/u_theta/u_reset are the resting, threshold and reset
    potentials (mV), t_ref the absolute refractory period (ms).
    """

    tau_m: float = 10.0
    r_m: float = 1.0
    u_rest: float = -70.0
    u_theta: float = -50.0
    u_reset: float = -70.0
    t_ref: float = 2.0

    def __post_init__(self):
        if self.tau_m <= 0:
            raise ValueError(f"tau_m must be positive, got {self.tau_m}")
        if self.t_ref < 0:
            raise ValueError(f"t_ref must be non-negative, got {self.t_ref}")
        if self.u_reset > self.u_theta:
            raise ValueError("u_reset above threshold would self-oscillate")
        if self.u_rest > self.u_theta:
            raise ValueError("u_rest above threshold would self-oscillate")


@dataclass
class StochasticParams:
    """Escape-noise firing: intensity rho_theta (events/ms) at threshold,
    delta_u (mV) the width of the soft threshold region."""

    rho_theta: float = 1.0
    delta_u: float = 2.5

    def __post_init__(self):
        if self.rho_theta <= 0:
            raise ValueError(f"rho_theta must be positive, got {self.rho_theta}")
        if self.delta_u <= 0:
            raise ValueError(f"delta_u must be positive, got {self.delta_u}")


class NeuronPopulation:
    """Membrane state for one layer of neurons.

    mode is "deterministic" (hard threshold) or "stochastic" (escape
    noise); the stepping functions check it so a population is never
    driven by the wrong rule.
    """

    def __init__(self, size: int, params: LifParams, mode: str = "deterministic"):
        if mode not in ("deterministic", "stochastic"):
            raise ValueError(f"unknown mode {mode!r}")
        self.size = size
        self.params = params
        self.mode = mode
        self.u = np.full(size, params.u_rest, dtype=np.float64)
        self.ref_remaining = np.zeros(size, dtype=np.float64)

    def reset(self):
        self.u[:] = self.params.u_rest
        self.ref_remaining[:] = 0.0


class SpikeRaster:
    """Binary spike occurrences, shape (n_neurons, n_steps)."""

    def __init__(self, n_neurons: int, n_steps: int, dt: float,
                 spikes: np.ndarray | None = None):
        self.n_neurons = n_neurons
        self.n_steps = n_steps
        self.dt = dt
        if spikes is None:
            spikes = np.zeros((n_neurons, n_steps), dtype=bool)
        if spikes.shape != (n_neurons, n_steps):
            raise ValueError(
                f"spike array shape {spikes.shape} does not match "
                f"({n_neurons}, {n_steps})")
        self.spikes = spikes

    def counts(self) -> np.ndarray:
        """Total spikes per neuron over the window."""
        return self.spikes.sum(axis=1)

    def active_mask(self) -> np.ndarray:
        """Neurons with at least one spike in the window."""
        return self.spikes.any(axis=1)


def lif_step(pop: NeuronPopulation, params: LifParams,
             input_current: np.ndarray, dt: float) -> np.ndarray:
    """One explicit-Euler step of du/dt = (-(u - u_rest) + R*I) / tau.

    Mutates pop in place and returns the boolean fired vector.  Neurons
    that cross u_theta are reset to u_reset and enter refractoriness;
    refractory neurons hold at u_reset and only count down their timer.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if pop.mode != "deterministic":
        raise ValueError("lif_step drives deterministic populations only")
    input_current = np.asarray(input_current, dtype=np.float64)
    if not np.all(np.isfinite(input_current)):
        bad = int(np.flatnonzero(~np.isfinite(input_current))[0])
        raise ValueError(f"non-finite input current at neuron {bad}")

    refractory = pop.ref_remaining > 0
    active = ~refractory

    du = (-(pop.u - params.u_rest) + params.r_m * input_current) * (dt / params.tau_m)
    pop.u[active] += du[active]

    fired = (pop.u >= params.u_theta) & active
    pop.u[fired] = params.u_reset
    pop.ref_remaining[fired] = params.t_ref

    pop.u[refractory] = params.u_reset
    pop.ref_remaining[refractory] = np.maximum(
        pop.ref_remaining[refractory] - dt, 0.0)
    return fired


def escape_rate(u: np.ndarray, sp: StochasticParams, lif: LifParams) -> np.ndarray:
    """Instantaneous intensity rho(u) = rho_theta * exp((u - u_theta)/delta_u)."""
    arg = np.minimum((np.asarray(u, dtype=np.float64) - lif.u_theta) / sp.delta_u,
                     EXP_ARG_CAP)
    return sp.rho_theta * np.exp(arg)


def stochastic_fire(u: np.ndarray, sp: StochasticParams, lif: LifParams,
                    dt: float, rng: np.random.Generator) -> np.ndarray:
    """Escape-noise firing decision for one step.

    Fires with probability 1 - exp(-rho(u)*dt), the exact per-step hazard
    of an inhomogeneous Poisson process held at rho for dt.  Caller applies
    reset/refractoriness.  Works on scalars or arrays; always returns an
    array decision.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    rho = escape_rate(u, sp, lif)
    p = 1.0 - np.exp(-rho * dt)
    return rng.random(np.shape(p)) < p


class DenseLifLayer:
    """Fully connected LIF layer, the minimal object run_presentation drives.

    w has shape (fan_in, n_neurons); input current per step is
    gain * (pre_spikes @ w).  mode selects hard vs escape-noise threshold.
    """

    def __init__(self, w: np.ndarray, params: LifParams, gain: float = 1.0,
                 mode: str = "deterministic",
                 stochastic: StochasticParams | None = None,
                 rng: np.random.Generator | None = None,
                 name: str = "dense"):
        self.w = np.asarray(w)
        self.fan_in, self.n_neurons = self.w.shape
        self.gain = gain
        self.params = params
        self.mode = mode
        self.stochastic = stochastic
        self.rng = rng
        self.name = name
        self.dt = 1.0
        if mode == "stochastic" and (stochastic is None or rng is None):
            raise ValueError("stochastic mode needs StochasticParams and an rng")
        self.pop = NeuronPopulation(self.n_neurons, params, mode)

    def reset(self):
        self.pop.reset()

    def step(self, pre_spikes: np.ndarray) -> np.ndarray:
        # W rows for active presynaptic neurons only; sum beats a matmul
        # at the sparseness typical of spike vectors.
        if pre_spikes.any():
            current = self.gain * self.w[pre_spikes].sum(axis=0)
        else:
            current = np.zeros(self.n_neurons)
        return step_population(self.pop, current, self.dt, self.stochastic, self.rng)


def step_population(pop: NeuronPopulation, current: np.ndarray, dt: float,
                    sp: StochasticParams | None = None,
                    rng: np.random.Generator | None = None) -> np.ndarray:
    """Advance one population a single step under either threshold rule."""
    if pop.mode == "deterministic":
        return lif_step(pop, pop.params, current, dt)
    # Stochastic: same membrane integration, escape-noise firing.
    if sp is None or rng is None:
        raise ValueError("stochastic populations need StochasticParams and an rng")
    params = pop.params
    if not np.all(np.isfinite(current)):
        bad = int(np.flatnonzero(~np.isfinite(current))[0])
        raise ValueError(f"non-finite input current at neuron {bad}")
    refractory = pop.ref_remaining > 0
    active = ~refractory
    du = (-(pop.u - params.u_rest) + params.r_m * np.asarray(current)) * (dt / params.tau_m)
    pop.u[active] += du[active]
    fired = stochastic_fire(pop.u, sp, params, dt, rng) & active
    pop.u[fired] = params.u_reset
    pop.ref_remaining[fired] = params.t_ref
    pop.u[refractory] = params.u_reset
    pop.ref_remaining[refractory] = np.maximum(pop.ref_remaining[refractory] - dt, 0.0)
    return fired


def run_presentation(layers: list, input_spikes: SpikeRaster,
                     duration: float, dt: float) -> list[SpikeRaster]:
    """Drive a stack of layers for duration ms and record every raster.

    Spikes propagate with exactly one step of delay between layers: the
    input to layer L at step k is layer L-1's output at step k-1 (the
    raw input raster for L = 0, which is consumed at its own step k).
    """
    n_steps = int(round(duration / dt))
    if abs(n_steps * dt - duration) > 1e-9:
        raise ValueError(f"duration {duration} is not a multiple of dt {dt}")
    if input_spikes.n_steps < n_steps:
        raise ValueError("input raster shorter than the presentation")
    fan_in = getattr(layers[0], "fan_in", None)
    if fan_in is not None and fan_in != input_spikes.n_neurons:
        raise ValueError(
            f"layer {getattr(layers[0], 'name', 0)!r} expects fan-in {fan_in}, "
            f"input raster has {input_spikes.n_neurons} neurons")
    for a, b in zip(layers, layers[1:]):
        n_out = getattr(a, "n_neurons", None)
        n_in = getattr(b, "fan_in", None)
        if n_out is not None and n_in is not None and n_out != n_in:
            raise ValueError(
                f"layer {getattr(a, 'name', '?')!r} fan-out {n_out} does not "
                f"match layer {getattr(b, 'name', '?')!r} fan-in {n_in}")

    for layer in layers:
        layer.reset()
        layer.dt = dt
    rasters = [SpikeRaster(layer.n_neurons, n_steps, dt) for layer in layers]
    prev_spikes = [np.zeros(layer.n_neurons, dtype=bool) for layer in layers]

    for k in range(n_steps):
        carry = input_spikes.spikes[:, k]
        for i, layer in enumerate(layers):
            fired = layer.step(carry)
            rasters[i].spikes[:, k] = fired
            carry = prev_spikes[i]          # one-step delay to the next layer
            prev_spikes[i] = fired
    return rasters
