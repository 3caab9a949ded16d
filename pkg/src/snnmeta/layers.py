"""The three network stages: Poisson encoder + convolutional feature layer,
a stochastic-threshold episodic memory layer, and a group-coded decision
layer.

Timing convention: the encoder raster drives the conv layer at the same
step; between layers spikes travel with one step of delay (the memory
layer reads conv spikes from step k-1, the decision layer reads memory
spikes from step k-1).  Each presentation starts from a clean slate:
membranes at rest, traces and dopamine at zero.
"""

from dataclasses import dataclass, field

import numpy as np

from .core import (LifParams, NeuronPopulation, SpikeRaster, StochasticParams,
                   lif_step, step_population)
from .plasticity import (RewardState, RstdpParams, SparsityPolicy, StdpParams,
                         SynapseMatrix, apply_soft_bound, commit_reward,
                         rstdp_step, sparsity_reward, stdp_delta)


def poisson_encode(image: np.ndarray, max_rate: float, duration: float,
                   dt: float, rng: np.random.Generator) -> SpikeRaster:
    """Encode a [0,1] grayscale image as independent Poisson spike trains.

    Each pixel fires at rate pixel*max_rate (events/ms); the per-step
    spike probability is the exact hazard 1 - exp(-rate*dt).
    """
    image = np.asarray(image, dtype=np.float64)
    if image.min() < 0.0 or image.max() > 1.0:
        raise ValueError("pixel values must lie in [0, 1]")
    n_steps = int(round(duration / dt))
    rates = image.reshape(-1) * max_rate
    p = 1.0 - np.exp(-rates * dt)
    spikes = rng.random((rates.size, n_steps)) < p[:, None]
    return SpikeRaster(rates.size, n_steps, dt, spikes)


@dataclass
class ConvLayerConfig:
    n_filters: int = 30
    kernel: int = 8
    stride: int = 2
    input_side: int = 28
    inhibition_radius: int = 2

    def __post_init__(self):
        if self.n_filters < 1:
            raise ValueError("need at least one filter")
        if (self.input_side - self.kernel) % self.stride != 0:
            raise ValueError(
                f"(input_side - kernel) = {self.input_side - self.kernel} "
                f"not divisible by stride {self.stride}")

    @property
    def map_side(self) -> int:
        return (self.input_side - self.kernel) // self.stride + 1

    @property
    def n_positions(self) -> int:
        return self.map_side ** 2

    @property
    def n_neurons(self) -> int:
        return self.n_filters * self.n_positions


class ConvLayer:
    """Shared-weight spiking convolution with same-filter lateral inhibition.

    Weights are one kernel per filter, (n_filters, kernel^2).  Inhibition
    is implemented by marking neurons refractory until the end of the
    presentation (ref timer = +inf), which both silences them and holds
    their membrane at reset.
    """

    def __init__(self, cfg: ConvLayerConfig, rng: np.random.Generator,
                 lif: LifParams | None = None,
                 stdp: StdpParams | None = None,
                 gain: float = 18.0,
                 w: np.ndarray | None = None):
        self.cfg = cfg
        self.lif = lif or LifParams()
        self.stdp = stdp or StdpParams()
        self.gain = gain
        if w is None:
            w = rng.uniform(0.2, 0.8, size=(cfg.n_filters, cfg.kernel ** 2))
        self.w = np.asarray(w, dtype=np.float32)
        if self.w.shape != (cfg.n_filters, cfg.kernel ** 2):
            raise ValueError(f"kernel weights shape {self.w.shape} does not "
                             f"match ({cfg.n_filters}, {cfg.kernel ** 2})")

        self.fan_in = cfg.input_side ** 2
        self.n_neurons = cfg.n_neurons
        self.name = "conv"
        self.dt = 1.0
        self.pop = NeuronPopulation(cfg.n_filters * cfg.n_positions, self.lif)
        self._patches = self._patch_indices(cfg)
        self._neighbors = self._neighbor_matrix(cfg)
        self.reset()

    @staticmethod
    def _patch_indices(cfg: ConvLayerConfig) -> np.ndarray:
        """(n_positions, kernel^2) indices into the flattened input."""
        side, k, st = cfg.input_side, cfg.kernel, cfg.stride
        base = (np.arange(k)[:, None] * side + np.arange(k)[None, :]).ravel()
        out = np.empty((cfg.n_positions, k * k), dtype=np.intp)
        pos = 0
        for r in range(cfg.map_side):
            for c in range(cfg.map_side):
                out[pos] = base + (r * st) * side + c * st
                pos += 1
        return out

    @staticmethod
    def _neighbor_matrix(cfg: ConvLayerConfig) -> np.ndarray:
        """(n_pos, n_pos) bool: within Chebyshev inhibition_radius, not self."""
        m = cfg.map_side
        rows, cols = np.divmod(np.arange(cfg.n_positions), m)
        dr = np.abs(rows[:, None] - rows[None, :])
        dc = np.abs(cols[:, None] - cols[None, :])
        near = np.maximum(dr, dc) <= cfg.inhibition_radius
        np.fill_diagonal(near, False)
        return near

    def reset(self):
        self.pop.reset()
        self._k = 0
        self._last_in = np.full(self.fan_in, -np.inf)
        self._won = np.zeros(self.cfg.n_filters, dtype=bool)
        self._train = False

    def step(self, in_spikes: np.ndarray) -> np.ndarray:
        """One step: integrate patch-gathered drive, fire, inhibit, learn."""
        cfg = self.cfg
        t = self._k * self.dt
        self._k += 1
        if in_spikes.any():
            self._last_in[in_spikes] = t
            x = in_spikes[self._patches].astype(np.float32)   # (n_pos, k*k)
            current = self.gain * (self.w @ x.T)              # (n_f, n_pos)
        else:
            current = np.zeros((cfg.n_filters, cfg.n_positions), dtype=np.float32)

        fired = lif_step(self.pop, self.lif, current.ravel(), self.dt)
        fired = fired.reshape(cfg.n_filters, cfg.n_positions)

        if fired.any():
            if self._train:
                self._wta_update(fired, t)
            # same-filter neighborhood suppression for the rest of the
            # presentation: inhibited = refractory forever
            inh = (fired.astype(np.float32) @ self._neighbors) > 0
            ref = self.pop.ref_remaining.reshape(cfg.n_filters, cfg.n_positions)
            ref[inh] = np.inf
        return fired.ravel()

    def _wta_update(self, fired: np.ndarray, t: float):
        """First spike per filter map learns; the map then falls silent."""
        cfg = self.cfg
        ref = self.pop.ref_remaining.reshape(cfg.n_filters, cfg.n_positions)
        for f in np.flatnonzero(fired.any(axis=1) & ~self._won):
            pos = int(np.flatnonzero(fired[f])[0])  # lowest index on ties
            pre_t = self._last_in[self._patches[pos]]
            seen = np.isfinite(pre_t)
            # afferents that spiked potentiate by their timing; afferents
            # silent so far this presentation depress at the full a_minus
            raw = np.where(seen, stdp_delta(t - pre_t, self.stdp),
                           -self.stdp.a_minus)
            self.w[f] = apply_soft_bound(self.w[f].astype(np.float64), raw
                                         ).astype(np.float32)
            self._won[f] = True
            ref[f, :] = np.inf


def conv_forward(input_raster: SpikeRaster, conv: ConvLayer,
                 train: bool = False) -> SpikeRaster:
    """Run one presentation through the conv layer.

    The encoder raster drives the layer at the same step (no delay at the
    input boundary).  With train set, each filter's first spike triggers
    one winner-take-all STDP update of its shared kernel.
    """
    if input_raster.n_neurons != conv.fan_in:
        raise ValueError(
            f"conv layer expects {conv.fan_in} input neurons "
            f"({conv.cfg.input_side}x{conv.cfg.input_side}), raster has "
            f"{input_raster.n_neurons}")
    conv.reset()
    conv.dt = input_raster.dt
    conv._train = train
    n_steps = input_raster.n_steps
    out = SpikeRaster(conv.n_neurons, n_steps, input_raster.dt)
    for k in range(n_steps):
        out.spikes[:, k] = conv.step(input_raster.spikes[:, k])
    conv._train = False
    return out


@dataclass
class MemoryLayerConfig:
    n_neurons: int = 100
    lif: LifParams = field(default_factory=LifParams)
    stochastic: StochasticParams = field(default_factory=StochasticParams)
    policy: SparsityPolicy = field(default_factory=SparsityPolicy)

    def __post_init__(self):
        if self.n_neurons < 1:
            raise ValueError("memory layer needs at least one neuron")


@dataclass
class MemoryRepresentation:
    """Which memory neurons were activated (>= 1 spike) in a presentation."""

    bits: np.ndarray
    n_s: float

    @classmethod
    def from_raster(cls, raster: SpikeRaster) -> "MemoryRepresentation":
        bits = raster.active_mask()
        return cls(bits=bits, n_s=100.0 * bits.sum() / bits.size)


class MemoryLayer:
    """Episodic memory: full fan-in, escape-noise firing, R-STDP weights."""

    def __init__(self, n_inputs: int, cfg: MemoryLayerConfig,
                 rng: np.random.Generator,
                 rstdp: RstdpParams | None = None,
                 gain: float = 1.1,
                 balance: float = 0.5,
                 reward_gain: float = 0.3,
                 consolidation_ms: float = 20.0,
                 w: np.ndarray | None = None):
        self.cfg = cfg
        self.rstdp = rstdp or RstdpParams(stdp=StdpParams(a_plus=0.03,
                                                          a_minus=0.009))
        self.gain = gain
        self.balance = balance
        self.reward_gain = reward_gain
        self.consolidation_ms = consolidation_ms
        self.rng = rng
        self.syn = SynapseMatrix(n_inputs, cfg.n_neurons, w=w,
                                 rng=None if w is not None else rng)
        self.fan_in = n_inputs
        self.n_neurons = cfg.n_neurons
        self.name = "memory"
        self.dt = 1.0
        self.pop = NeuronPopulation(cfg.n_neurons, cfg.lif, mode="stochastic")

    def reset(self):
        self.pop.reset()
        self.syn.reset_transient()

    def step(self, pre_spikes: np.ndarray) -> np.ndarray:
        current = self._drive(pre_spikes)
        return step_population(self.pop, current, self.dt,
                               self.cfg.stochastic, self.rng)

    def _drive(self, pre_spikes: np.ndarray) -> np.ndarray:
        # balanced feed-forward inhibition: each input spike contributes
        # w - balance, so population-wide input bursts cancel and only the
        # selective (above-average-weight) component drives the neurons
        n_act = int(pre_spikes.sum())
        if n_act:
            exc = self.syn.w[pre_spikes].sum(axis=0).astype(np.float64)
            return self.gain * (exc - self.balance * n_act)
        return np.zeros(self.n_neurons)

    def _run(self, features: SpikeRaster, plastic: bool,
             rs: RewardState | None) -> SpikeRaster:
        if features.n_neurons != self.fan_in:
            raise ValueError(f"memory layer fan-in {self.fan_in} does not "
                             f"match feature raster {features.n_neurons}")
        self.reset()
        self.dt = features.dt
        n_steps = features.n_steps
        out = SpikeRaster(self.n_neurons, n_steps, features.dt)
        prev = np.zeros(features.n_neurons, dtype=bool)
        for k in range(n_steps):
            fired = self.step(prev)
            out.spikes[:, k] = fired
            if plastic:
                rstdp_step(self.syn, prev, fired, rs, self.rstdp, 0.0, self.dt)
            prev = features.spikes[:, k]
        return out


def memory_adapt(features: SpikeRaster, mem: MemoryLayer,
                 rs: RewardState) -> tuple[MemoryRepresentation, SpikeRaster]:
    """Present features with plasticity on and commit the sparsity reward.

    The presentation accumulates eligibility traces; the activation
    percentage n_s picks a reward level which lands as a single dopamine
    impulse scaled by the layer's reward gain, integrated over a quiet
    consolidation window.  Weights update in place.
    """
    rs.dopamine = 0.0
    raster = mem._run(features, plastic=True, rs=rs)
    rep = MemoryRepresentation.from_raster(raster)
    level = sparsity_reward(rep.n_s, mem.cfg.policy)
    n_steps = int(round(mem.consolidation_ms / mem.dt))
    commit_reward(mem.syn, rs, mem.rstdp, level * mem.reward_gain,
                  mem.dt, n_steps)
    return rep, raster


def memory_recall(features: SpikeRaster, mem: MemoryLayer) -> SpikeRaster:
    """Pure forward pass: identical dynamics, no trace or weight updates."""
    return mem._run(features, plastic=False, rs=None)


@dataclass
class DecisionLayerConfig:
    n_groups: int = 5
    group_size: int = 10
    inhibition_strength: float = 12.0

    def __post_init__(self):
        if self.n_groups < 1 or self.group_size < 1:
            raise ValueError("decision layer needs positive group counts")

    @property
    def n_neurons(self) -> int:
        return self.n_groups * self.group_size


class DecisionLayer:
    """N groups of M deterministic LIF neurons with inter-group inhibition.

    A spike anywhere in group g injects -inhibition_strength current into
    every neuron outside g on the next step; the predicted class is the
    group with the most spikes over the presentation.
    """

    def __init__(self, n_inputs: int, cfg: DecisionLayerConfig,
                 rng: np.random.Generator,
                 lif: LifParams | None = None,
                 rstdp: RstdpParams | None = None,
                 gain: float = 14.0,
                 teach_current: float = 30.0,
                 consolidation_ms: float = 20.0,
                 w: np.ndarray | None = None):
        self.cfg = cfg
        self.lif = lif or LifParams()
        self.rstdp = rstdp or RstdpParams(stdp=StdpParams(a_plus=0.01,
                                                          a_minus=0.008))
        self.gain = gain
        self.teach_current = teach_current
        self.consolidation_ms = consolidation_ms
        self.syn = SynapseMatrix(n_inputs, cfg.n_neurons, w=w,
                                 rng=None if w is not None else rng)
        self.fan_in = n_inputs
        self.n_neurons = cfg.n_neurons
        self.name = "decision"
        self.dt = 1.0
        self.group_of = np.repeat(np.arange(cfg.n_groups), cfg.group_size)
        self.pop = NeuronPopulation(cfg.n_neurons, self.lif)
        self._prev_group_counts = np.zeros(cfg.n_groups)
        self.last_peak_u = np.full(cfg.n_neurons, -np.inf)

    def reset(self):
        self.pop.reset()
        self.syn.reset_transient()
        self._prev_group_counts = np.zeros(self.cfg.n_groups)

    def step(self, pre_spikes: np.ndarray) -> np.ndarray:
        current = np.zeros(self.n_neurons)
        if pre_spikes.any():
            current += self.gain * self.syn.w[pre_spikes].sum(axis=0)
        total = self._prev_group_counts.sum()
        if total > 0:
            # spikes in other groups last step push this neuron down
            other = total - self._prev_group_counts[self.group_of]
            current -= self.cfg.inhibition_strength * other
        fired = lif_step(self.pop, self.lif, current, self.dt)
        self._prev_group_counts = np.bincount(self.group_of[fired],
                                              minlength=self.cfg.n_groups
                                              ).astype(np.float64)
        return fired

    def group_counts(self, raster: SpikeRaster) -> np.ndarray:
        per_neuron = raster.counts()
        return np.bincount(self.group_of, weights=per_neuron,
                           minlength=self.cfg.n_groups)

    def group_first_spike(self, raster: SpikeRaster) -> np.ndarray:
        """Earliest spike step of any neuron in each group (inf if silent)."""
        per_neuron = np.where(raster.spikes.any(axis=1),
                              raster.spikes.argmax(axis=1), np.inf)
        first = np.full(self.cfg.n_groups, np.inf)
        np.minimum.at(first, self.group_of, per_neuron)
        return first

    def _run(self, memory_spikes: SpikeRaster, plastic: bool,
             rs: RewardState, teach_group: int | None = None) -> SpikeRaster:
        if memory_spikes.n_neurons != self.fan_in:
            raise ValueError(f"decision layer fan-in {self.fan_in} does not "
                             f"match memory raster {memory_spikes.n_neurons}")
        self.reset()
        self.dt = memory_spikes.dt
        n_steps = memory_spikes.n_steps
        out = SpikeRaster(self.n_neurons, n_steps, memory_spikes.dt)
        teach = np.zeros(self.n_neurons)
        if teach_group is not None:
            teach[self.group_of == teach_group] = self.teach_current
        prev = np.zeros(memory_spikes.n_neurons, dtype=bool)
        peak = np.full(self.n_neurons, -np.inf)
        for k in range(n_steps):
            current = teach.copy()
            if prev.any():
                current += self.gain * self.syn.w[prev].sum(axis=0)
            total = self._prev_group_counts.sum()
            if total > 0:
                other = total - self._prev_group_counts[self.group_of]
                current -= self.cfg.inhibition_strength * other
            fired = lif_step(self.pop, self.lif, current, self.dt)
            self._prev_group_counts = np.bincount(
                self.group_of[fired], minlength=self.cfg.n_groups
            ).astype(np.float64)
            out.spikes[:, k] = fired
            np.maximum(peak, self.pop.u, out=peak)
            if plastic:
                rstdp_step(self.syn, prev, fired, rs, self.rstdp, 0.0, self.dt)
            prev = memory_spikes.spikes[:, k]
        self.last_peak_u = peak
        return out

    def group_peak_u(self) -> np.ndarray:
        """Highest membrane potential reached in each group on the last run."""
        peak = np.full(self.cfg.n_groups, -np.inf)
        np.maximum.at(peak, self.group_of, self.last_peak_u)
        return peak


def predict_from_counts(counts: np.ndarray,
                        first_spike: np.ndarray | None = None) -> int:
    """Argmax over group spike counts.

    Neurons inside a group carry near-identical weights once bound, so they
    tend to cross threshold in lockstep and counts come quantized in group-
    size multiples; exact ties are frequent and meaningful drive differences
    survive only in the crossing time.  Count ties therefore go to the group
    that spiked first (when timing is supplied), remaining ties to the
    lowest group index.
    """
    counts = np.asarray(counts)
    best = counts.max()
    tied = np.flatnonzero(counts == best)
    if first_spike is None or tied.size == 1 or best == 0:
        return int(tied[0])
    return int(tied[np.argmin(first_spike[tied])])


def decision_forward(memory_spikes: SpikeRaster, dec: DecisionLayer
                     ) -> tuple[int, np.ndarray]:
    """Inference pass.  Weights are untouched (zero dopamine throughout);
    eligibility traces are left in place for a decision_adapt that may
    follow."""
    scratch = RewardState()
    raster = dec._run(memory_spikes, plastic=True, rs=scratch)
    counts = dec.group_counts(raster)
    if counts.max() == 0:
        # nothing crossed threshold: fall back on the subthreshold evidence
        # accumulated on the membranes, which preserves the drive ordering
        return int(np.argmax(dec.group_peak_u())), counts
    return predict_from_counts(counts, dec.group_first_spike(raster)), counts


def decision_adapt(prediction: int, label: int, dec: DecisionLayer,
                   rs: RewardState) -> RewardState:
    """Commit the traces of the pass that produced `prediction`.

    Correct predictions earn +reward_mag, wrong ones -punish_mag, as a
    single dopamine impulse integrated over the consolidation window.
    Counters feed the adaptive update at task end.
    """
    n_groups = dec.cfg.n_groups
    if not (0 <= prediction < n_groups and 0 <= label < n_groups):
        raise ValueError(f"class indices must be in [0, {n_groups})")
    correct = prediction == label
    impulse = rs.reward_mag if correct else -rs.punish_mag
    rs.record(correct)
    rs.dopamine = 0.0
    n_steps = int(round(dec.consolidation_ms / dec.dt))
    commit_reward(dec.syn, rs, dec.rstdp, impulse, dec.dt, n_steps)
    return rs


def decision_teach(memory_spikes: SpikeRaster, label: int, dec: DecisionLayer,
                   rs: RewardState, impulse: float):
    """Supervised binding pass: re-present with a teacher current driving
    the labeled group, then commit the resulting traces with a fixed
    positive impulse.  This is how support-set labels reach the decision
    layer during episode adaptation."""
    if impulse <= 0:
        return
    rs.dopamine = 0.0
    dec._run(memory_spikes, plastic=True, rs=rs, teach_group=label)
    # memory neurons silent through the whole presentation leave no paired
    # trace; give them the full depression amplitude on the taught group
    # (the same convention as the conv layer's first-spike update), so a
    # group's weights shrink everywhere outside the pattern it is bound to
    silent = ~memory_spikes.active_mask()
    taught = dec.group_of == label
    dec.syn.c[np.ix_(silent, taught)] -= np.float32(dec.rstdp.stdp.a_minus)
    dec.syn._c_live = True
    n_steps = int(round(dec.consolidation_ms / dec.dt))
    commit_reward(dec.syn, rs, dec.rstdp, impulse, dec.dt, n_steps)


def pearson_correlation(a, b) -> float:
    """Pearson coefficient between two representations' binary vectors."""
    x = np.asarray(a.bits if isinstance(a, MemoryRepresentation) else a,
                   dtype=np.float64).ravel()
    y = np.asarray(b.bits if isinstance(b, MemoryRepresentation) else b,
                   dtype=np.float64).ravel()
    if x.size != y.size:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    xc = x - x.mean()
    yc = y - y.mean()
    sx = np.sqrt((xc * xc).sum())
    sy = np.sqrt((yc * yc).sum())
    if sx == 0.0 or sy == 0.0:
        raise ValueError("correlation undefined for a constant vector")
    return float(np.clip((xc * yc).sum() / (sx * sy), -1.0, 1.0))
