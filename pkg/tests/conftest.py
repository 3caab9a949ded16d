import numpy as np
import pytest

from snnmeta.episodes import split_classes
from snnmeta.meta import MetaConfig
from snnmeta.synthetic import bar_corpus, glyph_corpus, write_corpus_png

# scaled-down knobs shared by the unit tests; acceptance tests pin their
# own full-size recipes
TINY = dict(n_ways=3, k_shots=1, n_query=3, epochs=1, tasks_per_epoch=2,
            eval_episodes=4, duration=20.0, n_filters=8, kernel=8, stride=4,
            input_side=16, inhibition_radius=1, pretrain_samples=10,
            mem_neurons=30)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def tiny_cfg():
    return MetaConfig(**TINY)


@pytest.fixture
def tiny_bars():
    # 16px canvas, offsets well inside it
    return bar_corpus(np.random.default_rng(2), offsets=(3, 7, 11),
                      samples_per_class=6, side=16, noise=0.0)


@pytest.fixture(scope="session")
def data_root(tmp_path_factory):
    """On-disk train/test PNG corpus in the layout the CLI consumes."""
    root = tmp_path_factory.mktemp("corpus")
    corpus = glyph_corpus(np.random.default_rng(3), 12, samples_per_class=8,
                          n_strokes=(3, 4), jitter=0.6)
    train, test = split_classes(corpus, 8, np.random.default_rng(1))
    write_corpus_png(train, str(root / "train"))
    write_corpus_png(test, str(root / "test"))
    return root


@pytest.fixture(scope="session")
def cli_cfg_file(tmp_path_factory):
    """Config shrinking the model and protocol for fast CLI runs."""
    path = tmp_path_factory.mktemp("cfg") / "fast.cfg"
    path.write_text(
        "n_ways = 3\n"
        "n_query = 3\n"
        "epochs = 2\n"
        "tasks_per_epoch = 2\n"
        "eval_episodes = 4\n"
        "duration = 20.0\n"
        "n_filters = 8\n"
        "stride = 4\n"
        "inhibition_radius = 1\n"
        "pretrain_samples = 10\n"
        "mem_neurons = 30\n")
    return str(path)
