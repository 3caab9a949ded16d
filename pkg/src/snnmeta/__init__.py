"""snnmeta: a spiking few-shot meta-learner.

STDP-pretrained convolutional features feed a sparsity-rewarded episodic
memory layer; a reward-balanced R-STDP decision layer reads the memory
out as an N-way vote.  See the cli module for the command-line surface.
"""

__version__ = "0.1.0"

from .core import (LifParams, NeuronPopulation, SpikeRaster, StochasticParams,
                   lif_step, run_presentation, stochastic_fire)
from .plasticity import (RewardState, RstdpParams, SparsityPolicy, StdpParams,
                         SynapseMatrix, adaptive_reward_update,
                         apply_soft_bound, rstdp_step, sparsity_reward,
                         stdp_delta)
from .layers import (ConvLayer, ConvLayerConfig, DecisionLayer,
                     DecisionLayerConfig, MemoryLayer, MemoryLayerConfig,
                     MemoryRepresentation, conv_forward, decision_adapt,
                     decision_forward, decision_teach, memory_adapt,
                     memory_recall, pearson_correlation, poisson_encode,
                     predict_from_counts)
from .episodes import (ClassCorpus, Episode, augment_rotations, load_corpus,
                       sample_episode, split_classes, write_split_manifest)
from .meta import (EvalReport, MetaConfig, Model, ProgressRecord, build_model,
                   encode_features, meta_test, meta_train, pretrain_conv,
                   sparsity_sweep)
from .synthetic import bar_corpus, bar_image, glyph_corpus, write_corpus_png
from .checkpoint import (load_checkpoint, load_conv, load_model,
                         save_checkpoint, save_conv, save_model)
from .runconfig import (build_config, config_text, load_config_file,
                        parse_config_text)
