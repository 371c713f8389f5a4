"""Train a question classifier and measure it on the held-out test file.

Uses a slice of the TREC question data so the run finishes quickly; pass
--full to train on everything with the library defaults (takes a few
minutes, lands near the high-80s on the official test split).
"""

import sys
import time

from icnn import ModelConfig, TrainConfig, evaluate, load_dataset, train

from _common import TREC_TEST, TREC_TRAIN

full = "--full" in sys.argv

samples, labels = load_dataset(TREC_TRAIN, "trec")
print(f"{len(samples)} training questions, labels: {', '.join(labels)}")

if full:
    subset = samples
    model_config = ModelConfig(seed=42)                 # 50/50, widths 2..6
    train_config = TrainConfig(epochs=10, seed=42)
else:
    subset = samples[:2000]
    model_config = ModelConfig(emb_dim=32, feat_dim=32, max_kernel=4, seed=42)
    train_config = TrainConfig(epochs=5, seed=42)

start = time.monotonic()
params, history = train(
    subset, train_config, model_config,
    on_epoch=lambda s: print(f"  epoch {s.epoch}: loss {s.loss:.4f}"
                             f"  monitor accuracy {s.accuracy:.3f}"))
print(f"trained in {time.monotonic() - start:.0f}s "
      f"(vocabulary {len(params.vocab)} tokens)")

test_set, _ = load_dataset(TREC_TEST, "trec")
result = evaluate(params, test_set)
print(f"\ntest accuracy: {result.accuracy:.4f} on {len(test_set)} questions")
print("per-class counts:")
for name, counts in result.per_class().items():
    print(f"  {name:<6} {counts['correct']:>4} / {counts['total']}")
