"""Learning rules: pairwise STDP, reward-modulated STDP, sparsity rewards.

The STDP kernel and its soft bound are pure functions.  R-STDP state
(eligibility traces, last-spike bookkeeping, a simulation clock) lives in
SynapseMatrix and is advanced by rstdp_step; the dopamine scalar and the
adaptive reward/punishment magnitudes live in RewardState.
"""

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class StdpParams:
    a_plus: float = 0.004
    a_minus: float = 0.003
    tau_plus: float = 20.0
    tau_minus: float = 20.0
    soft_bound: bool = True

    def __post_init__(self):
        for name in ("a_plus", "a_minus", "tau_plus", "tau_minus"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class RstdpParams:
    tau_c: float = 200.0
    tau_d: float = 20.0
    stdp: StdpParams = field(default_factory=StdpParams)

    def __post_init__(self):
        if self.tau_c <= 0 or self.tau_d <= 0:
            raise ValueError("tau_c and tau_d must be positive")


@dataclass
class SparsityPolicy:
    """Target activation band c +- s, both in percent of the layer."""

    center: float = 15.0
    spread: float = 3.0

    def __post_init__(self):
        if self.spread <= 0:
            raise ValueError("spread must be positive")
        if self.center - 4 * self.spread < 0:
            raise ValueError("center - 4*spread must be non-negative, every "
                             "reward branch needs room below the center")


class RewardState:
    """Dopamine level plus the adaptive reward/punishment magnitudes.

    The magnitudes are kept as exact integer ratios (numerator over the
    last task's sample count) so checkpoints can store them losslessly;
    reward_mag and punish_mag materialize the float on read.  Counters
    accumulate within a task and are consumed by adaptive_reward_update.
    """

    def __init__(self):
        self.dopamine = 0.0
        self.n_correct = 0
        self.n_incorrect = 0
        self._reward_num = 1
        self._punish_num = 1
        self._mag_den = 2

    @property
    def reward_mag(self) -> float:
        return self._reward_num / self._mag_den

    @property
    def punish_mag(self) -> float:
        return self._punish_num / self._mag_den

    def record(self, correct: bool):
        if correct:
            self.n_correct += 1
        else:
            self.n_incorrect += 1

    def state_ints(self) -> tuple[int, int, int, int, int]:
        return (self._reward_num, self._punish_num, self._mag_den,
                self.n_correct, self.n_incorrect)

    def restore_ints(self, vals):
        (self._reward_num, self._punish_num, self._mag_den,
         self.n_correct, self.n_incorrect) = (int(v) for v in vals)

    def __repr__(self):
        return (f"RewardState(reward={self.reward_mag:.4f}, "
                f"punish={self.punish_mag:.4f}, d={self.dopamine:.4f}, "
                f"correct={self.n_correct}, incorrect={self.n_incorrect})")


class SynapseMatrix:
    """Dense pre x post weights in [0,1] with R-STDP bookkeeping.

    w is float32 (the checkpoint dtype) so in-memory training and a
    save/load round trip see identical numbers.  Traces are float32 as
    well; last-spike times start at -inf, which makes the STDP kernel
    evaluate to exactly zero for never-paired synapses.
    """

    def __init__(self, n_pre: int, n_post: int,
                 w: np.ndarray | None = None,
                 rng: np.random.Generator | None = None,
                 w_init: tuple[float, float] = (0.2, 0.8)):
        self.n_pre = n_pre
        self.n_post = n_post
        if w is None:
            if rng is None:
                raise ValueError("need either explicit weights or an rng")
            lo, hi = w_init
            w = rng.uniform(lo, hi, size=(n_pre, n_post))
        w = np.asarray(w, dtype=np.float32)
        if w.shape != (n_pre, n_post):
            raise ValueError(f"weight shape {w.shape} != ({n_pre}, {n_post})")
        if w.min() < 0.0 or w.max() > 1.0:
            raise ValueError("weights must lie in [0, 1]")
        self.w = w
        self.c = np.zeros((n_pre, n_post), dtype=np.float32)
        self.last_pre = np.full(n_pre, -np.inf)
        self.last_post = np.full(n_post, -np.inf)
        self.t = 0.0
        self._c_live = False    # skip trace work until the first STDP event

    def reset_transient(self):
        """Clear traces, spike bookkeeping and clock; weights persist."""
        if self._c_live:
            self.c[:] = 0.0
        self.last_pre[:] = -np.inf
        self.last_post[:] = -np.inf
        self.t = 0.0
        self._c_live = False


def stdp_delta(delta_t, p: StdpParams):
    """Antisymmetric STDP kernel over delta_t = t_post - t_pre (ms).

    delta_t >= 0 (pre before or with post) potentiates by
    a_plus*exp(-delta_t/tau_plus); delta_t < 0 depresses by
    -a_minus*exp(delta_t/tau_minus).  Accepts scalars or arrays;
    +-inf map to zero, so -inf last-spike sentinels need no special
    casing at call sites.
    """
    dt_arr = np.asarray(delta_t, dtype=np.float64)
    pot = dt_arr >= 0
    # single exp with a branch-selected, always non-positive argument
    arg = np.where(pot, -dt_arr / p.tau_plus, dt_arr / p.tau_minus)
    amp = np.where(pot, p.a_plus, -p.a_minus)
    out = amp * np.exp(arg)
    if np.ndim(delta_t) == 0:
        return float(out)
    return out


def apply_soft_bound(w, raw_delta):
    """Multiplicative bounding: w + w*(1-w)*raw_delta, clamped to [0,1].

    The w*(1-w) factor pins the boundaries (a weight at 0 or 1 never
    moves); the clamp only mops up float drift.
    """
    w = np.asarray(w, dtype=np.float64)
    out = w + w * (1.0 - w) * np.asarray(raw_delta, dtype=np.float64)
    out = np.clip(out, 0.0, 1.0)
    if out.ndim == 0:
        return float(out)
    return out


def rstdp_step(m: SynapseMatrix, pre_spikes: np.ndarray, post_spikes: np.ndarray,
               rs: RewardState, p: RstdpParams, da_input: float = 0.0,
               dt: float = 1.0) -> tuple[SynapseMatrix, RewardState]:
    """Advance eligibility traces, dopamine and weights by one step.

    Order per step: traces decay by exp(-dt/tau_c); spikes this step add
    stdp_delta terms against the *stored* opposite-side last-spike times
    (nearest-neighbor pairing; simultaneous pre/post spikes therefore
    pair with earlier spikes, not each other); dopamine decays and takes
    da_input; weights drift by c*d*dt under a hard clamp to [0,1]; the
    last-spike times are updated last.  The matrix carries its own clock,
    advanced dt per call and rezeroed by reset_transient().
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if pre_spikes.shape != (m.n_pre,) or post_spikes.shape != (m.n_post,):
        raise ValueError("spike vectors do not match the synapse matrix")
    m.t += dt
    t = m.t

    if m._c_live:
        m.c *= math.exp(-dt / p.tau_c)

    any_pre = pre_spikes.any()
    any_post = post_spikes.any()
    if any_pre:
        # pre spike now, post spiked earlier: depression row
        m.c[pre_spikes] += stdp_delta(m.last_post - t, p.stdp).astype(np.float32)
    if any_post:
        # post spike now, pre spiked earlier: potentiation column
        m.c[:, post_spikes] += stdp_delta(t - m.last_pre, p.stdp
                                          ).astype(np.float32)[:, None]
    if any_pre or any_post:
        m._c_live = True

    rs.dopamine = rs.dopamine * math.exp(-dt / p.tau_d) + da_input

    if rs.dopamine != 0.0 and m._c_live:
        m.w += m.c * np.float32(rs.dopamine * dt)
        np.clip(m.w, 0.0, 1.0, out=m.w)

    if any_pre:
        m.last_pre[pre_spikes] = t
    if any_post:
        m.last_post[post_spikes] = t
    return m, rs


def commit_reward(m: SynapseMatrix, rs: RewardState, p: RstdpParams,
                  impulse: float, dt: float, n_steps: int):
    """Deliver a dopamine impulse and integrate the drift over a quiet window.

    Equivalent to n_steps calls of rstdp_step with no spikes and da_input
    = impulse on the first step, but factored: with no new STDP events the
    trace matrix only scales by a common exponential, so the elementwise
    drift sum collapses to c * scalar.  Used by the layers at the end of
    each presentation (the consolidation window); the generic rstdp_step
    stays the reference implementation.
    """
    if n_steps <= 0:
        return
    decay_c = math.exp(-dt / p.tau_c)
    decay_d = math.exp(-dt / p.tau_d)
    d = rs.dopamine
    fc = 1.0
    drift = 0.0
    for k in range(n_steps):
        fc *= decay_c
        d = d * decay_d + (impulse if k == 0 else 0.0)
        drift += fc * d * dt
    if m._c_live:
        if drift != 0.0:
            m.w += m.c * np.float32(drift)
            np.clip(m.w, 0.0, 1.0, out=m.w)
        m.c *= np.float32(fc)
    rs.dopamine = d
    m.t += n_steps * dt


def sparsity_reward(n_s: float, pol: SparsityPolicy) -> int:
    """Reward level for an activation percentage, seven bands around c.

    Closures follow the policy exactly: the lower half is right-open,
    the +-s core band is closed, the upper half is left-open.
    """
    if not 0.0 <= n_s <= 100.0:
        raise ValueError(f"n_s is a percentage, got {n_s}")
    c, s = pol.center, pol.spread
    if n_s < c - 4 * s:
        return -2
    if n_s < c - 2 * s:
        return -1
    if n_s < c - s:
        return 1
    if n_s <= c + s:
        return 2
    if n_s <= c + 2 * s:
        return 1
    if n_s <= c + 4 * s:
        return -1
    return -2


def adaptive_reward_update(rs: RewardState) -> RewardState:
    """Rebalance magnitudes from the finished task's counters.

    Replacement semantics: reward_mag <- N_incorrect/N and
    punish_mag <- N_correct/N, so frequent mistakes raise the payoff of
    being right and frequent successes raise the cost of being wrong.
    Counters reset for the next task.
    """
    n = rs.n_correct + rs.n_incorrect
    if n == 0:
        raise ValueError("adaptive reward update over a task with no samples")
    rs._reward_num = rs.n_incorrect
    rs._punish_num = rs.n_correct
    rs._mag_den = n
    rs.n_correct = 0
    rs.n_incorrect = 0
    return rs
