"""Shared plumbing for the demo scripts: a quickly-trained question
classifier, cached on disk so only the first demo run pays for training."""

from pathlib import Path

from icnn import (ModelConfig, TrainConfig, load_dataset, load_model,
                  save_model, train)

REPO = Path(__file__).resolve().parent.parent
TREC_TRAIN = REPO / "data" / "trec" / "train_5500.label"
TREC_TEST = REPO / "data" / "trec" / "TREC_10.label"
CACHE = Path(__file__).resolve().parent / ".demo-model.icnn"


def quick_model(n_examples: int = 2000, epochs: int = 5):
    """A small-but-real TREC model (subset of the training data, reduced
    dimensions). Trains in well under a minute and is cached afterwards."""
    if CACHE.exists():
        return load_model(CACHE)
    samples, _ = load_dataset(TREC_TRAIN, "trec")
    subset = samples[:n_examples]
    print(f"training demo model on {len(subset)} questions "
          f"({epochs} epochs, cached at {CACHE.name}) ...")
    params, history = train(
        subset,
        TrainConfig(epochs=epochs, seed=42, monitor_fraction=0.1),
        ModelConfig(emb_dim=32, feat_dim=32, max_kernel=4, seed=42),
    )
    for stats in history:
        print(f"  epoch {stats.epoch}: loss {stats.loss:.4f} "
              f"monitor accuracy {stats.accuracy:.3f}")
    save_model(params, CACHE)
    return params


def training_subset(n_examples: int = 2000):
    samples, _ = load_dataset(TREC_TRAIN, "trec")
    return samples[:n_examples]
