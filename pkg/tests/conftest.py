import os

# Pin BLAS thread pools before numpy loads anywhere: the acceptance runtime
# budgets are stated for one CPU core, and the matrices here are too small
# for threading to help anyway.
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
             "NUMEXPR_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

from pathlib import Path

import numpy as np
import pytest

from icnn import (LabeledText, ModelConfig, TrainConfig, build_vocab, encode,
                  init_model, train)

REPO_ROOT = Path(__file__).resolve().parent.parent
DATA_DIR = REPO_ROOT / "data"
TREC_TRAIN = DATA_DIR / "trec" / "train_5500.label"
TREC_TEST = DATA_DIR / "trec" / "TREC_10.label"
R8_TRAIN = DATA_DIR / "r8" / "r8-train.txt"
R8_TEST = DATA_DIR / "r8" / "r8-test.txt"


@pytest.fixture(scope="session")
def tiny_corpus():
    return [
        LabeledText("how long did it take ?", "NUM"),
        LabeledText("how many miles is it ?", "NUM"),
        LabeledText("who wrote the book ?", "HUM"),
        LabeledText("who was the first president ?", "HUM"),
        LabeledText("where is the river ?", "LOC"),
        LabeledText("where can i find the museum ?", "LOC"),
    ]


@pytest.fixture(scope="session")
def tiny_model(tiny_corpus):
    config = TrainConfig(epochs=60, seed=7, monitor_fraction=0.0)
    model_config = ModelConfig(emb_dim=16, feat_dim=16, max_kernel=3, seed=7)
    params, history = train(tiny_corpus, config, model_config)
    return params, history


def random_params(rng, vocab_size=12, emb_dim=3, feat_dim=3, max_kernel=3,
                  n_classes=2, dtype=np.float64):
    """Random model straight from init_model plus non-zero biases, so bias
    paths are exercised too."""
    vocab = build_vocab([" ".join(f"w{i}" for i in range(vocab_size - 2))], "word")
    config = ModelConfig(emb_dim=emb_dim, feat_dim=feat_dim, max_kernel=max_kernel,
                         n_classes=n_classes, seed=int(rng.integers(0, 2**31)))
    labels = [f"c{i}" for i in range(n_classes)]
    params = init_model(config, vocab, labels, dtype=dtype)
    for n in params.widths:
        params.kernel_biases[n] = rng.uniform(-0.1, 0.1, feat_dim).astype(dtype)
    params.out_bias = rng.uniform(-0.1, 0.1, n_classes).astype(dtype)
    return params


def random_sentence(rng, vocab, min_len=2, max_len=8):
    length = int(rng.integers(min_len, max_len + 1))
    tokens = [vocab.id_to_token[int(rng.integers(2, len(vocab)))]
              for _ in range(length)]
    return encode(tokens, vocab)
