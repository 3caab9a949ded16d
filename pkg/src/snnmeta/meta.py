"""The meta-learning protocol: conv pretraining, episode-level adaptation,
meta-training and meta-testing.

Labels reach the network through the reward channel only.  During the
support phase of an episode the memory layer adapts label-free (sparsity
rewards), while the decision layer learns the episode's class-to-group
binding from its own predictions (reward/punishment) plus a supervised
teacher pass per support sample.  Queries and probes are read out with
frozen weights; at meta-train time each query prediction additionally
earns the adaptive reward/punishment of the decision stage.
"""

import time
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .core import LifParams, StochasticParams
from .episodes import ClassCorpus, sample_episode
from .layers import (ConvLayer, ConvLayerConfig, DecisionLayer,
                     DecisionLayerConfig, MemoryLayer, MemoryLayerConfig,
                     MemoryRepresentation, conv_forward, decision_adapt,
                     decision_forward, decision_teach, memory_adapt,
                     memory_recall, poisson_encode)
from .plasticity import (RewardState, RstdpParams, SparsityPolicy, StdpParams,
                         adaptive_reward_update)


@dataclass
class MetaConfig:
    """Every knob of the model and protocol, flat so the key=value config
    files map one to one.  Defaults reproduce the desk-scale experiments."""

    # episode structure
    n_ways: int = 5
    k_shots: int = 1
    n_query: int = 5            # total query samples per meta-training task
    test_query: int = 1         # probes per meta-test episode
    epochs: int = 5
    tasks_per_epoch: int = 20
    eval_episodes: int = 300
    train_passes: int = 1       # support decision passes per training task
    test_passes: int = 3        # support decision passes per test episode
    bind_impulse: float = 0.5   # teacher-pass dopamine; 0 disables binding
    memory_reset_per_episode: bool = False
    plasticity: bool = True     # global ablation switch
    seed: int = 0

    # clock and encoding
    dt: float = 1.0
    duration: float = 50.0
    consolidation_ms: float = 20.0
    max_rate: float = 8.0       # deep in hazard saturation: encoder is
                                # near-deterministic, trial noise lives in
                                # the memory layer's escape noise only

    # LIF constants shared by all layers
    tau_m: float = 10.0
    r_m: float = 1.0
    u_rest: float = -70.0
    u_theta: float = -50.0
    u_reset: float = -70.0
    t_ref: float = 2.0

    # convolutional feature layer
    n_filters: int = 30
    kernel: int = 8
    stride: int = 2
    input_side: int = 28
    inhibition_radius: int = 4
    conv_gain: float = 1.5
    conv_a_plus: float = 0.004
    conv_a_minus: float = 0.003
    conv_tau_plus: float = 20.0
    conv_tau_minus: float = 20.0
    pretrain_samples: int = 500

    # memory layer
    mem_neurons: int = 100
    mem_tau_m: float = 20.0     # slower membrane: steadier activation counts
    rho_theta: float = 1.0
    delta_u: float = 0.3        # sharp escape noise so the balanced residual
                                # drive, not the noise, picks the winners
    mem_center: float = 15.0
    mem_spread: float = 3.0
    mem_gain: float = 180.0
    mem_balance: float = 0.5    # feed-forward inhibition per input spike
    mem_reward_gain: float = 0.3
    mem_a_plus: float = 0.001   # one storage commit moves w by ~0.5 at
                                # bind-level dopamine; keep multi-pass head-room
    mem_a_minus: float = 0.0003
    mem_tau_c: float = 200.0
    mem_tau_d: float = 20.0

    # decision layer
    group_size: int = 10
    inhibition_strength: float = 6.0
    dec_tau_m: float = 200.0    # membrane ~ integrates the whole window, so
                                # spike count tracks total afferent drive
    dec_gain: float = 400.0
    teach_current: float = 1000.0  # rise time scales with tau_m; the teacher
                                   # must still fire within a few steps
    dec_a_plus: float = 0.03
    dec_a_minus: float = 0.03
    dec_tau_c: float = 200.0
    dec_tau_d: float = 20.0

    def __post_init__(self):
        for name in ("n_ways", "k_shots", "epochs", "tasks_per_epoch",
                     "eval_episodes", "test_query"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")

    def lif(self) -> LifParams:
        return LifParams(self.tau_m, self.r_m, self.u_rest, self.u_theta,
                         self.u_reset, self.t_ref)

    def conv_config(self) -> ConvLayerConfig:
        return ConvLayerConfig(self.n_filters, self.kernel, self.stride,
                               self.input_side, self.inhibition_radius)

    def memory_config(self) -> MemoryLayerConfig:
        lif = LifParams(self.mem_tau_m, self.r_m, self.u_rest, self.u_theta,
                        self.u_reset, self.t_ref)
        return MemoryLayerConfig(
            self.mem_neurons, lif,
            StochasticParams(self.rho_theta, self.delta_u),
            SparsityPolicy(self.mem_center, self.mem_spread))

    def decision_config(self) -> DecisionLayerConfig:
        return DecisionLayerConfig(self.n_ways, self.group_size,
                                   self.inhibition_strength)


@dataclass
class ProgressRecord:
    epoch: int
    task: int
    accuracy: float
    reward_mag: float
    mean_n_s: float

    def line(self) -> str:
        return (f"epoch={self.epoch} task={self.task} "
                f"accuracy={self.accuracy:.6f} reward_mag={self.reward_mag:.6f} "
                f"mean_n_s={self.mean_n_s:.4f}")

    def csv_row(self) -> str:
        return (f"{self.epoch},{self.task},{self.accuracy:.6f},"
                f"{self.reward_mag:.6f},{self.mean_n_s:.4f}")


@dataclass
class EvalReport:
    mean_accuracy: float
    ci95: float
    per_episode: list
    wall_time: float

    @classmethod
    def from_accuracies(cls, acc: list, wall_time: float) -> "EvalReport":
        a = np.asarray(acc, dtype=np.float64)
        mean = float(a.mean())
        ci = 0.0 if a.size < 2 else float(1.96 * a.std(ddof=1) / np.sqrt(a.size))
        return cls(mean, ci, list(map(float, a)), wall_time)


class Model:
    """The full network plus the decision layer's adaptive reward state."""

    def __init__(self, cfg: MetaConfig, conv: ConvLayer, mem: MemoryLayer,
                 dec: DecisionLayer):
        self.cfg = cfg
        self.conv = conv
        self.mem = mem
        self.dec = dec
        self.rs = RewardState()       # decision: adaptive magnitudes
        self.mem_rs = RewardState()   # memory: dopamine carrier only
        self.epochs_completed = 0


def build_model(cfg: MetaConfig, rng: np.random.Generator,
                conv_w: np.ndarray | None = None,
                mem_w: np.ndarray | None = None,
                dec_w: np.ndarray | None = None) -> Model:
    """Construct all three layers, drawing any missing weights from rng in
    a fixed order (conv, memory, decision)."""
    conv = ConvLayer(cfg.conv_config(), rng, lif=cfg.lif(),
                     stdp=StdpParams(cfg.conv_a_plus, cfg.conv_a_minus,
                                     cfg.conv_tau_plus, cfg.conv_tau_minus),
                     gain=cfg.conv_gain, w=conv_w)
    mem = MemoryLayer(conv.n_neurons, cfg.memory_config(), rng,
                      rstdp=RstdpParams(cfg.mem_tau_c, cfg.mem_tau_d,
                                        StdpParams(cfg.mem_a_plus,
                                                   cfg.mem_a_minus)),
                      gain=cfg.mem_gain, balance=cfg.mem_balance,
                      reward_gain=cfg.mem_reward_gain,
                      consolidation_ms=cfg.consolidation_ms, w=mem_w)
    dec_lif = LifParams(cfg.dec_tau_m, cfg.r_m, cfg.u_rest, cfg.u_theta,
                        cfg.u_reset, cfg.t_ref)
    dec = DecisionLayer(cfg.mem_neurons, cfg.decision_config(), rng,
                        lif=dec_lif,
                        rstdp=RstdpParams(cfg.dec_tau_c, cfg.dec_tau_d,
                                          StdpParams(cfg.dec_a_plus,
                                                     cfg.dec_a_minus)),
                        gain=cfg.dec_gain, teach_current=cfg.teach_current,
                        consolidation_ms=cfg.consolidation_ms, w=dec_w)
    return Model(cfg, conv, mem, dec)


def encode_features(model: Model, image: np.ndarray,
                    rng: np.random.Generator):
    """Poisson-encode an image and push it through the frozen conv layer."""
    cfg = model.cfg
    enc = poisson_encode(image, cfg.max_rate, cfg.duration, cfg.dt, rng)
    return conv_forward(enc, model.conv, train=False)


def pretrain_conv(corpus: ClassCorpus, n_samples: int, cfg: MetaConfig,
                  rng: np.random.Generator) -> ConvLayer:
    """STDP-pretrain the convolutional kernels on random corpus samples."""
    conv = ConvLayer(cfg.conv_config(), rng, lif=cfg.lif(),
                     stdp=StdpParams(cfg.conv_a_plus, cfg.conv_a_minus,
                                     cfg.conv_tau_plus, cfg.conv_tau_minus),
                     gain=cfg.conv_gain)
    images = [img for rec in corpus.classes for img in rec.images]
    if not images:
        raise ValueError("pretraining corpus is empty")
    for _ in range(n_samples):
        img = images[int(rng.integers(len(images)))]
        enc = poisson_encode(img, cfg.max_rate, cfg.duration, cfg.dt, rng)
        conv_forward(enc, conv, train=True)
    return conv


def _support_phase(model: Model, episode, rng: np.random.Generator,
                   passes: int) -> float:
    """Adapt on the support set; returns the mean n_s over presentations.

    Every pass re-presents each sample in fresh random order through the
    whole stack: the memory layer adapts label-free (storage commits are
    sized for a few cumulative passes), then the decision layer learns the
    episode's binding from its rewarded prediction plus the teacher pass.
    """
    cfg = model.cfg
    n = len(episode.support)
    ns_values = []
    for _ in range(passes):
        for i in rng.permutation(n):
            img, label = episode.support[i]
            feat = encode_features(model, img, rng)
            if cfg.plasticity:
                rep, mrast = memory_adapt(feat, model.mem, model.mem_rs)
            else:
                mrast = memory_recall(feat, model.mem)
                rep = MemoryRepresentation.from_raster(mrast)
            ns_values.append(rep.n_s)
            if cfg.plasticity:
                pred, _ = decision_forward(mrast, model.dec)
                decision_adapt(pred, label, model.dec, model.rs)
                decision_teach(mrast, label, model.dec, model.rs,
                               cfg.bind_impulse)
    return float(np.mean(ns_values)) if ns_values else 0.0


def _query_phase(model: Model, queries, rng: np.random.Generator,
                 adapt: bool) -> float:
    """Predict each query with frozen weights; with adapt set, commit the
    decision layer's reward or punishment per prediction."""
    correct = 0
    for img, label in queries:
        feat = encode_features(model, img, rng)
        mrast = memory_recall(feat, model.mem)
        pred, _ = decision_forward(mrast, model.dec)
        if pred == label:
            correct += 1
        if adapt and model.cfg.plasticity:
            decision_adapt(pred, label, model.dec, model.rs)
    return correct / len(queries)


def meta_train(corpus: ClassCorpus, cfg: MetaConfig, model: Model,
               rng: np.random.Generator, start_epoch: int = 0,
               on_epoch=None, on_record=None) -> list:
    """Run the meta-training loop; returns the per-task progress records.

    on_epoch(epoch_index, model, rng) fires after each completed epoch
    (checkpoint hook); on_record(record) after each task.
    """
    records = []
    for epoch in range(start_epoch, cfg.epochs):
        for task in range(cfg.tasks_per_epoch):
            episode = sample_episode(corpus, cfg.n_ways, cfg.k_shots,
                                     cfg.n_query, rng)
            mean_ns = _support_phase(model, episode, rng, cfg.train_passes)
            acc = _query_phase(model, episode.query, rng, adapt=True)
            if cfg.plasticity:
                adaptive_reward_update(model.rs)
            rec = ProgressRecord(epoch, task, acc, model.rs.reward_mag, mean_ns)
            records.append(rec)
            if on_record is not None:
                on_record(rec)
        model.epochs_completed = epoch + 1
        if on_epoch is not None:
            on_epoch(epoch, model, rng)
    return records


def meta_test(model: Model, corpus: ClassCorpus, cfg: MetaConfig,
              rng: np.random.Generator) -> EvalReport:
    """Evaluate on held-out classes.

    Per episode: support-phase adaptation (memory plus decision binding),
    then the probe queries are predicted with everything frozen.  With
    memory_reset_per_episode the memory weights snap back to their state
    at call time before every episode.
    """
    mem_snapshot = model.mem.syn.w.copy() if cfg.memory_reset_per_episode else None
    accs = []
    t0 = time.perf_counter()
    for _ in range(cfg.eval_episodes):
        if mem_snapshot is not None:
            model.mem.syn.w[:] = mem_snapshot
        episode = sample_episode(corpus, cfg.n_ways, cfg.k_shots,
                                 cfg.test_query, rng)
        _support_phase(model, episode, rng, cfg.test_passes)
        accs.append(_query_phase(model, episode.query, rng, adapt=False))
        if cfg.plasticity and (model.rs.n_correct + model.rs.n_incorrect) > 0:
            adaptive_reward_update(model.rs)
    return EvalReport.from_accuracies(accs, time.perf_counter() - t0)


def sparsity_sweep(train_corpus: ClassCorpus, test_corpus: ClassCorpus,
                   levels: list, cfg: MetaConfig) -> list:
    """Full pretrain + meta-train + meta-test per (center, spread) level.

    Each level gets an independent random stream derived from cfg.seed, so
    the rows are reproducible in isolation and in any order.
    """
    if not levels:
        raise ValueError("sweep needs at least one (center, spread) level")
    children = np.random.SeedSequence(cfg.seed).spawn(len(levels))
    rows = []
    for (center, spread), ss in zip(levels, children):
        level_cfg = replace(cfg, mem_center=float(center),
                            mem_spread=float(spread))
        rng = np.random.Generator(np.random.PCG64(ss))
        conv = pretrain_conv(train_corpus, level_cfg.pretrain_samples,
                             level_cfg, rng)
        model = build_model(level_cfg, rng, conv_w=conv.w)
        meta_train(train_corpus, level_cfg, model, rng)
        report = meta_test(model, test_corpus, level_cfg, rng)
        rows.append({"center": float(center), "spread": float(spread),
                     "report": report})
    return rows
