"""Training loops (single- and multi-sentence), evaluation, checkpointing.

Training is per-example Adam on cross-entropy over the class scores. The
multi-sentence mode splits each document into sentences, classifies each
independently, and combines the per-sentence distributions with weights
from a softmax over each sentence's best score; the weights are treated
as constants in the backward pass (no gradient flows through the max),
while every sentence's distribution still receives gradient.

Everything is deterministic given the seeds: vocabulary order, parameter
init, epoch shuffling and the monitor split all derive from them, so the
same inputs produce byte-identical model files.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .corpus import (LabeledText, WORD, build_vocab, encode_text,
                     split_sentences)
from .model import (ModelConfig, ModelParams, ParamGradients, backward, forward,
                    init_model, save_model)
from .numerics import AdamState, adam_step, cross_entropy_with_grad, softmax


@dataclass
class TrainConfig:
    epochs: int = 10
    lr: float = 1e-3
    seed: int = 42                      # epoch shuffling + monitor split
    multi_sentence: bool = False
    tokenizer_mode: str = WORD
    min_freq: int = 1
    checkpoint_path: str | None = None  # model file written after every epoch
    monitor_fraction: float = 0.1       # seeded held-out slice for per-epoch accuracy

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be > 0")
        if not 0 <= self.monitor_fraction < 1:
            raise ValueError("monitor_fraction must be in [0, 1)")


@dataclass
class EpochStats:
    epoch: int
    loss: float
    accuracy: float | None  # on the monitor split, when one exists

    def to_dict(self) -> dict:
        return {"epoch": self.epoch, "loss": self.loss, "accuracy": self.accuracy}


@dataclass
class SentenceWeights:
    """Per-sentence mixing weights plus the raw scores/distributions they
    came from. alpha is a softmax over each sentence's best score, so it
    always sums to 1 with every entry positive."""

    alpha: np.ndarray            # (n_sentences,) float64
    scores: list[np.ndarray]
    probs: list[np.ndarray]


@dataclass
class EvalResult:
    accuracy: float
    confusion: np.ndarray        # (n_classes, n_classes), rows = gold
    labels: list[str]

    def per_class(self) -> dict[str, dict[str, int]]:
        out = {}
        for i, name in enumerate(self.labels):
            row = self.confusion[i]
            out[name] = {"correct": int(row[i]), "total": int(row.sum())}
        return out


def sentence_weights(score_vectors: Sequence[np.ndarray]) -> SentenceWeights:
    """Weights = softmax over sentences of each sentence's maximum score."""
    if len(score_vectors) == 0:
        raise ValueError("need at least one sentence")
    scores = [np.asarray(s, dtype=np.float64) for s in score_vectors]
    maxima = np.array([s.max() for s in scores], dtype=np.float64)
    alpha = softmax(maxima)
    probs = [softmax(s) for s in scores]
    return SentenceWeights(alpha, scores, probs)


def forward_document(params: ModelParams, sentences: Sequence) -> tuple[np.ndarray, SentenceWeights, list]:
    """Classify each sentence independently and mix the distributions:
    combined = sum_k alpha_k * p_k. Returns (combined, weights, traces)."""
    if len(sentences) == 0:
        raise ValueError("document has no sentences")
    traces = [forward(params, s) for s in sentences]
    weights = sentence_weights([t.scores for t in traces])
    combined = np.zeros(params.n_classes, dtype=np.float64)
    for alpha_k, p_k in zip(weights.alpha, weights.probs):
        combined += alpha_k * p_k
    return combined, weights, traces


class _LazyRowAdam:
    """Adam restricted to the embedding rows an example touched.

    Moments of untouched rows are left as they are (the usual sparse-
    embedding treatment); bias correction uses the global step count. This
    keeps each update O(tokens) instead of O(|V|).
    """

    def __init__(self, param: np.ndarray, lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.m = np.zeros_like(param)
        self.v = np.zeros_like(param)
        self.t = 0
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps

    def apply(self, param: np.ndarray, rows: np.ndarray, row_grads: np.ndarray) -> None:
        self.t += 1
        m = self.beta1 * self.m[rows] + (1.0 - self.beta1) * row_grads
        v = self.beta2 * self.v[rows] + (1.0 - self.beta2) * (row_grads * row_grads)
        self.m[rows] = m
        self.v[rows] = v
        m_hat = m / (1.0 - self.beta1 ** self.t)
        v_hat = v / (1.0 - self.beta2 ** self.t)
        param[rows] -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class _AdamBank:
    """One optimizer state per parameter array, applied in a fixed order."""

    def __init__(self, params: ModelParams, lr: float):
        make = lambda arr: AdamState.for_param(arr, lr=lr)
        self.embeddings = _LazyRowAdam(params.embeddings, lr)
        self.kernels = {n: make(params.kernels[n]) for n in params.widths}
        self.kernel_biases = {n: make(params.kernel_biases[n]) for n in params.widths}
        self.out_weights = make(params.out_weights)
        self.out_bias = make(params.out_bias)

    def apply(self, params: ModelParams, grads: ParamGradients) -> None:
        self.embeddings.apply(params.embeddings, grads.embedding_rows,
                              grads.embedding_row_grads)
        for n in params.widths:
            params.kernels[n], self.kernels[n] = adam_step(
                params.kernels[n], grads.kernels[n], self.kernels[n])
            params.kernel_biases[n], self.kernel_biases[n] = adam_step(
                params.kernel_biases[n], grads.kernel_biases[n], self.kernel_biases[n])
        params.out_weights, self.out_weights = adam_step(
            params.out_weights, grads.out_weights, self.out_weights)
        params.out_bias, self.out_bias = adam_step(
            params.out_bias, grads.out_bias, self.out_bias)


def _accumulate(total: ParamGradients | None, grads: ParamGradients) -> ParamGradients:
    if total is None:
        return grads
    for n in grads.kernels:
        total.kernels[n] += grads.kernels[n]
        total.kernel_biases[n] += grads.kernel_biases[n]
    total.out_weights += grads.out_weights
    total.out_bias += grads.out_bias
    merged_ids = np.concatenate([total.embedding_rows, grads.embedding_rows])
    merged_grads = np.concatenate([total.embedding_row_grads,
                                   grads.embedding_row_grads])
    rows, inverse = np.unique(merged_ids, return_inverse=True)
    row_grads = np.zeros((rows.shape[0], merged_grads.shape[1]),
                         dtype=merged_grads.dtype)
    np.add.at(row_grads, inverse, merged_grads)
    total.embedding_rows = rows
    total.embedding_row_grads = row_grads
    if total.embeddings is not None and grads.embeddings is not None:
        total.embeddings += grads.embeddings
    return total


def _single_sentence_step(params: ModelParams, sentence, gold: int) -> tuple[float, ParamGradients]:
    trace = forward(params, sentence)
    loss, grad_s = cross_entropy_with_grad(trace.scores, gold)
    return loss, backward(params, trace, grad_s, dense_embeddings=False)


def _document_step(params: ModelParams, sentences, gold: int) -> tuple[float, ParamGradients]:
    """Loss = -log(sum_k alpha_k p_k[gold]) with alpha held constant.

    dL/ds_k[c] = -(alpha_k / P) * p_k[gold] * (1{c==gold} - p_k[c]),
    where P is the combined gold probability.
    """
    if len(sentences) == 1:
        # alpha = [1]: identical math to the single-sentence path, so use it.
        return _single_sentence_step(params, sentences[0], gold)
    combined, weights, traces = forward_document(params, sentences)
    gold_prob = float(combined[gold])
    loss = -float(np.log(gold_prob))
    grads: ParamGradients | None = None
    for alpha_k, p_k, trace in zip(weights.alpha, weights.probs, traces):
        coeff = alpha_k * p_k[gold] / gold_prob
        grad_s = coeff * p_k
        grad_s[gold] -= coeff
        grads = _accumulate(grads, backward(params, trace, grad_s.astype(params.dtype),
                                            dense_embeddings=False))
    return loss, grads


def _predict_index(params: ModelParams, text: str, multi_sentence: bool) -> int:
    if multi_sentence:
        pieces = [encode_text(p, params.vocab) for p in split_sentences(text)]
        if not pieces:
            pieces = [encode_text(text, params.vocab)]
        combined, _, _ = forward_document(params, pieces)
        return int(np.argmax(combined))
    return int(np.argmax(forward(params, encode_text(text, params.vocab)).scores))


def _run_training(dataset: Sequence[LabeledText], config: TrainConfig,
                  model_config: ModelConfig | None, dtype,
                  on_epoch: Callable[[EpochStats], None] | None,
                  multi_sentence: bool,
                  labels: list[str] | None) -> tuple[ModelParams, list[EpochStats]]:
    if not dataset:
        raise ValueError("training dataset is empty")
    if labels is None:
        labels = []
        seen: set[str] = set()
        for sample in dataset:
            if sample.label not in seen:
                seen.add(sample.label)
                labels.append(sample.label)
    else:
        labels = list(labels)
        known = set(labels)
        for sample in dataset:
            if sample.label not in known:
                raise ValueError(f"label {sample.label!r} not in supplied label set")
    base = model_config if model_config is not None else ModelConfig()
    model_config = ModelConfig(emb_dim=base.emb_dim, feat_dim=base.feat_dim,
                               max_kernel=base.max_kernel, n_classes=len(labels),
                               epsilon=base.epsilon, seed=base.seed)
    vocab = build_vocab(dataset, config.tokenizer_mode, config.min_freq)
    params = init_model(model_config, vocab, labels, dtype=dtype)
    label_index = {name: i for i, name in enumerate(labels)}

    rng = np.random.default_rng(config.seed)
    order = rng.permutation(len(dataset))
    n_monitor = int(round(config.monitor_fraction * len(dataset)))
    if len(dataset) - n_monitor < 1:
        n_monitor = 0
    monitor_ids = order[:n_monitor]
    train_ids = order[n_monitor:]

    encoded: dict[int, object] = {}
    for i in train_ids:
        text = dataset[i].text
        if multi_sentence:
            pieces = [encode_text(p, vocab) for p in split_sentences(text)]
            encoded[i] = pieces if pieces else [encode_text(text, vocab)]
        else:
            encoded[i] = encode_text(text, vocab)

    bank = _AdamBank(params, config.lr)
    history: list[EpochStats] = []
    for epoch in range(1, config.epochs + 1):
        losses = []
        for i in rng.permutation(train_ids):
            gold = label_index[dataset[i].label]
            if multi_sentence:
                loss, grads = _document_step(params, encoded[i], gold)
            else:
                loss, grads = _single_sentence_step(params, encoded[i], gold)
            bank.apply(params, grads)
            losses.append(loss)
        accuracy = None
        if len(monitor_ids) > 0:
            hits = sum(_predict_index(params, dataset[i].text, multi_sentence)
                       == label_index[dataset[i].label] for i in monitor_ids)
            accuracy = hits / len(monitor_ids)
        stats = EpochStats(epoch, float(np.mean(losses)), accuracy)
        history.append(stats)
        if on_epoch is not None:
            on_epoch(stats)
        if config.checkpoint_path:
            save_model(params, config.checkpoint_path)
    return params, history


def train(dataset: Sequence[LabeledText], config: TrainConfig | None = None,
          model_config: ModelConfig | None = None, dtype=np.float32,
          on_epoch: Callable[[EpochStats], None] | None = None,
          labels: list[str] | None = None) -> tuple[ModelParams, list[EpochStats]]:
    """Train on whole texts, one example per update.

    The label set defaults to the distinct labels in dataset order; pass
    `labels` to train against a wider label space than the data covers.
    Honors config.multi_sentence for callers routing everything through here.
    """
    config = config if config is not None else TrainConfig()
    return _run_training(dataset, config, model_config, dtype, on_epoch,
                         multi_sentence=config.multi_sentence, labels=labels)


def train_multisentence(dataset: Sequence[LabeledText], config: TrainConfig | None = None,
                        model_config: ModelConfig | None = None, dtype=np.float32,
                        on_epoch: Callable[[EpochStats], None] | None = None,
                        labels: list[str] | None = None
                        ) -> tuple[ModelParams, list[EpochStats]]:
    """Train with each document split into sentences and the per-sentence
    distributions mixed by the weighting rule (weights frozen in backward)."""
    config = config if config is not None else TrainConfig(multi_sentence=True)
    return _run_training(dataset, config, model_config, dtype, on_epoch,
                         multi_sentence=True, labels=labels)


def evaluate(params: ModelParams, dataset: Sequence[LabeledText],
             multi_sentence: bool = False) -> EvalResult:
    """Accuracy by argmax of the (combined) distribution, plus a gold-by-
    predicted confusion matrix."""
    if not dataset:
        raise ValueError("evaluation dataset is empty")
    label_index = {name: i for i, name in enumerate(params.labels)}
    confusion = np.zeros((params.n_classes, params.n_classes), dtype=np.int64)
    for sample in dataset:
        if sample.label not in label_index:
            raise ValueError(f"label {sample.label!r} not among model labels")
        pred = _predict_index(params, sample.text, multi_sentence)
        confusion[label_index[sample.label], pred] += 1
    accuracy = float(np.trace(confusion)) / float(confusion.sum())
    return EvalResult(accuracy, confusion, list(params.labels))
