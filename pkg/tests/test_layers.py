import numpy as np
import pytest

from snnmeta.core import LifParams, SpikeRaster, StochasticParams
from snnmeta.layers import (ConvLayer, ConvLayerConfig, DecisionLayer,
                            DecisionLayerConfig, MemoryLayer,
                            MemoryLayerConfig, MemoryRepresentation,
                            conv_forward, decision_adapt, decision_forward,
                            decision_teach, memory_adapt, memory_recall,
                            pearson_correlation, poisson_encode,
                            predict_from_counts)
from snnmeta.plasticity import RewardState, SparsityPolicy
from snnmeta.synthetic import bar_image


class TestPoissonEncode:
    def test_rejects_out_of_range_pixels(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            poisson_encode(np.array([[1.2]]), 10.0, 10.0, 1.0, rng)
        with pytest.raises(ValueError):
            poisson_encode(np.array([[-0.1]]), 10.0, 10.0, 1.0, rng)

    def test_black_pixels_stay_silent(self):
        r = poisson_encode(np.zeros((4, 4)), 100.0, 20.0, 1.0,
                           np.random.default_rng(0))
        assert not r.spikes.any()

    def test_saturated_rate_fires_every_step(self):
        r = poisson_encode(np.ones((2, 2)), 1e9, 20.0, 1.0,
                           np.random.default_rng(0))
        assert r.spikes.all()

    def test_shape_and_determinism(self):
        img = np.random.default_rng(1).random((5, 5))
        a = poisson_encode(img, 8.0, 30.0, 1.0, np.random.default_rng(7))
        b = poisson_encode(img, 8.0, 30.0, 1.0, np.random.default_rng(7))
        assert a.spikes.shape == (25, 30)
        assert np.array_equal(a.spikes, b.spikes)

    def test_rate_scales_spike_density(self):
        img = np.full((6, 6), 0.5)
        rng = np.random.default_rng(3)
        slow = poisson_encode(img, 1.0, 200.0, 1.0, rng)
        fast = poisson_encode(img, 8.0, 200.0, 1.0, rng)
        assert fast.spikes.sum() > slow.spikes.sum()


class TestConvLayer:
    CFG = ConvLayerConfig(n_filters=6, kernel=8, stride=4, input_side=16,
                          inhibition_radius=1)

    def test_geometry(self):
        assert self.CFG.map_side == 3
        assert self.CFG.n_positions == 9
        assert self.CFG.n_neurons == 54

    def test_stride_must_tile_input(self):
        with pytest.raises(ValueError):
            ConvLayerConfig(kernel=8, stride=3, input_side=16)

    def test_weight_shape_validated(self):
        with pytest.raises(ValueError):
            ConvLayer(self.CFG, np.random.default_rng(0),
                      w=np.full((2, 2), 0.5))

    def _spikes(self, rng):
        img = bar_image("v", 6, side=16, thickness=3, rng=rng, noise=0.0)
        return poisson_encode(img, 8.0, 20.0, 1.0, rng)

    def test_forward_shapes_and_activity(self):
        rng = np.random.default_rng(0)
        conv = ConvLayer(self.CFG, rng, gain=1.5)
        out = conv_forward(self._spikes(rng), conv, train=False)
        assert out.spikes.shape == (54, 20)
        assert out.spikes.any()

    def test_inference_keeps_weights(self):
        rng = np.random.default_rng(0)
        conv = ConvLayer(self.CFG, rng, gain=1.5)
        w0 = conv.w.copy()
        conv_forward(self._spikes(rng), conv, train=False)
        assert np.array_equal(conv.w, w0)

    def test_training_moves_weights_within_bounds(self):
        rng = np.random.default_rng(0)
        conv = ConvLayer(self.CFG, rng, gain=1.5)
        w0 = conv.w.copy()
        for _ in range(5):
            conv_forward(self._spikes(rng), conv, train=True)
        assert not np.array_equal(conv.w, w0)
        assert conv.w.min() >= 0.0 and conv.w.max() <= 1.0

    def test_fan_in_mismatch_rejected(self):
        rng = np.random.default_rng(0)
        conv = ConvLayer(self.CFG, rng, gain=1.5)
        bad = SpikeRaster(10, 20, 1.0)
        with pytest.raises(ValueError):
            conv_forward(bad, conv)


class TestMemoryLayer:
    def _layer(self, rng, n_inputs=12, n_neurons=5):
        cfg = MemoryLayerConfig(
            n_neurons=n_neurons,
            lif=LifParams(tau_m=20.0),
            stochastic=StochasticParams(rho_theta=1.0, delta_u=0.3),
            policy=SparsityPolicy(center=40.0, spread=10.0))
        return MemoryLayer(n_inputs, cfg, rng, gain=60.0)

    def _features(self, rng, n_inputs=12):
        r = SpikeRaster(n_inputs, 20, 1.0)
        r.spikes[:6] = rng.random((6, 20)) < 0.5
        return r

    def test_representation_from_raster(self):
        r = SpikeRaster(4, 3, 1.0)
        r.spikes[1, 0] = True
        r.spikes[3, 2] = True
        rep = MemoryRepresentation.from_raster(r)
        assert list(rep.bits) == [False, True, False, True]
        assert rep.n_s == pytest.approx(50.0)

    def test_recall_is_pure(self):
        rng = np.random.default_rng(8)
        mem = self._layer(rng)
        w0 = mem.syn.w.copy()
        out = memory_recall(self._features(rng), mem)
        assert out.spikes.shape == (5, 20)
        assert np.array_equal(mem.syn.w, w0)

    def test_adapt_commits_weight_changes(self):
        rng = np.random.default_rng(8)
        mem = self._layer(rng)
        w0 = mem.syn.w.copy()
        rs = RewardState()
        moved = False
        for _ in range(5):
            rep, raster = memory_adapt(self._features(rng), mem, rs)
            assert 0.0 <= rep.n_s <= 100.0
            assert raster.spikes.shape == (5, 20)
            moved = moved or not np.array_equal(mem.syn.w, w0)
        assert moved
        assert mem.syn.w.min() >= 0.0 and mem.syn.w.max() <= 1.0

    def test_adapt_is_deterministic_under_seed(self):
        reps = []
        for _ in range(2):
            rng = np.random.default_rng(8)
            mem = self._layer(rng)
            rep, _ = memory_adapt(self._features(rng), mem, RewardState())
            reps.append(rep)
        assert np.array_equal(reps[0].bits, reps[1].bits)

    def test_fan_in_mismatch_rejected(self):
        rng = np.random.default_rng(8)
        mem = self._layer(rng)
        with pytest.raises(ValueError):
            memory_recall(SpikeRaster(7, 20, 1.0), mem)


def _decision(rng, w, gain=400.0, inhibition=0.0, teach=1000.0):
    cfg = DecisionLayerConfig(n_groups=3, group_size=2,
                              inhibition_strength=inhibition)
    return DecisionLayer(4, cfg, rng, lif=LifParams(tau_m=200.0),
                         gain=gain, teach_current=teach, w=w)


def _pattern(steps=20):
    """Afferents 0 and 1 active, 2 and 3 silent."""
    r = SpikeRaster(4, steps, 1.0)
    r.spikes[0, ::2] = True
    r.spikes[1, 1::2] = True
    return r


class TestDecisionLayer:
    def test_group_bookkeeping(self):
        rng = np.random.default_rng(0)
        dec = _decision(rng, w=np.full((4, 6), 0.5))
        r = SpikeRaster(6, 4, 1.0)
        r.spikes[0, 1] = True   # group 0
        r.spikes[3, 2] = True   # group 1
        r.spikes[3, 3] = True
        assert list(dec.group_counts(r)) == [1, 2, 0]
        first = dec.group_first_spike(r)
        assert first[0] == 1 and first[1] == 2 and np.isinf(first[2])

    def test_predict_prefers_higher_count(self):
        assert predict_from_counts(np.array([1, 4, 2])) == 1

    def test_count_tie_breaks_on_first_spike(self):
        counts = np.array([3, 3, 1])
        first = np.array([5.0, 2.0, 0.0])
        assert predict_from_counts(counts, first) == 1
        assert predict_from_counts(counts, None) == 0

    def test_all_silent_defaults_to_first_group(self):
        assert predict_from_counts(np.zeros(3), np.full(3, np.inf)) == 0

    def test_forward_reads_strongest_group(self):
        rng = np.random.default_rng(0)
        w = np.zeros((4, 6))
        w[:2, 2:4] = 1.0        # group 1 wired to the active afferents
        dec = _decision(rng, w=w)
        pred, counts = decision_forward(_pattern(), dec)
        assert pred == 1
        assert counts[1] > 0

    def test_forward_falls_back_to_membrane_peaks(self):
        rng = np.random.default_rng(0)
        w = np.zeros((4, 6))
        w[:2, 2:4] = 1.0
        dec = _decision(rng, w=w, gain=5.0)    # too weak to reach threshold
        pred, counts = decision_forward(_pattern(), dec)
        assert counts.max() == 0
        assert pred == 1

    def test_forward_keeps_weights(self):
        rng = np.random.default_rng(0)
        dec = _decision(rng, w=np.full((4, 6), 0.5))
        w0 = dec.syn.w.copy()
        decision_forward(_pattern(), dec)
        assert np.array_equal(dec.syn.w, w0)

    def test_teach_binds_label_to_pattern(self):
        rng = np.random.default_rng(0)
        dec = _decision(rng, w=np.full((4, 6), 0.5), inhibition=6.0)
        rs = RewardState()
        pattern = _pattern()
        for _ in range(3):
            decision_teach(pattern, 2, dec, rs, impulse=0.5)
        taught = dec.syn.w[:, 4:6]
        assert taught[:2].mean() > 0.5          # active afferents potentiate
        assert taught[2:].mean() < 0.5          # silent afferents depress
        pred, _ = decision_forward(pattern, dec)
        assert pred == 2

    def test_teach_zero_impulse_is_noop(self):
        rng = np.random.default_rng(0)
        dec = _decision(rng, w=np.full((4, 6), 0.5))
        w0 = dec.syn.w.copy()
        decision_teach(_pattern(), 1, dec, RewardState(), impulse=0.0)
        assert np.array_equal(dec.syn.w, w0)

    def test_adapt_rewards_and_punishes(self):
        rng = np.random.default_rng(0)
        dec = _decision(rng, w=np.full((4, 6), 0.5))
        rs = RewardState()
        decision_forward(_pattern(), dec)
        decision_adapt(1, 1, dec, rs)
        assert rs.n_correct == 1
        decision_forward(_pattern(), dec)
        decision_adapt(0, 1, dec, rs)
        assert rs.n_incorrect == 1

    def test_adapt_validates_class_indices(self):
        rng = np.random.default_rng(0)
        dec = _decision(rng, w=np.full((4, 6), 0.5))
        with pytest.raises(ValueError):
            decision_adapt(3, 0, dec, RewardState())

    def test_fan_in_mismatch_rejected(self):
        rng = np.random.default_rng(0)
        dec = _decision(rng, w=np.full((4, 6), 0.5))
        with pytest.raises(ValueError):
            decision_forward(SpikeRaster(9, 20, 1.0), dec)


class TestPearson:
    def test_perfect_and_inverse(self):
        a = np.array([1.0, 0.0, 1.0, 0.0])
        assert pearson_correlation(a, a) == 1.0
        assert pearson_correlation(a, 1.0 - a) == -1.0

    def test_known_value(self):
        a = np.array([1.0, 1.0, 0.0, 0.0])
        b = np.array([1.0, 0.0, 1.0, 0.0])
        assert pearson_correlation(a, b) == pytest.approx(0.0)

    def test_accepts_representations(self):
        ra = MemoryRepresentation(bits=np.array([True, False, True]), n_s=66.7)
        rb = MemoryRepresentation(bits=np.array([True, False, False]), n_s=33.3)
        assert -1.0 <= pearson_correlation(ra, rb) <= 1.0

    def test_constant_vector_rejected(self):
        with pytest.raises(ValueError):
            pearson_correlation(np.ones(4), np.array([1.0, 0.0, 1.0, 0.0]))

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            pearson_correlation(np.ones(3), np.ones(4))
