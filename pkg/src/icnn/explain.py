"""Decompose a prediction into per-token, per-category values.

The pipeline runs in four steps per window: distribute each feature
dimension's value over the window's words (ratio of each word's share of
the convolution sum, with a uniform 1/n fallback when that sum is within
epsilon of zero); zero every feature dimension that did not win pooling;
expand the surviving dimensions into per-category score contributions
through the output weights; and multiply the two matrices to get each
word's share. Summing a token's shares across all windows covering it
gives the value matrix, whose per-category column totals reproduce
scores - bias (the conservation identity the tests pin down).

All internal arithmetic here is float64 even for float32 models: the
ratios can involve small denominators and the conservation guarantees are
only worth having if they are not at the mercy of single-precision
cancellation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .corpus import EncodedSentence, PAD_ID
from .model import FeatureTrace, ModelParams, forward
from .trainer import SentenceWeights, sentence_weights

DEFAULT_EPSILON = 1e-6


@dataclass
class AttributionReport:
    """Token-by-category value matrix for one sentence plus prediction
    metadata. Rows follow the padded token sequence; pad_mask flags the
    padding rows (they are reported, never dropped, so the column totals
    stay exact)."""

    tokens: list[str]
    labels: list[str]
    values: np.ndarray      # (w, n_classes) float64
    probs: np.ndarray       # (n_classes,)
    scores: np.ndarray      # (n_classes,)
    bias: np.ndarray        # (n_classes,) output-layer bias
    predicted: str
    pad_mask: list[bool]

    def category_index(self, name: str) -> int:
        if name not in self.labels:
            raise ValueError(f"unknown category {name!r}; valid: {', '.join(self.labels)}")
        return self.labels.index(name)

    def conservation_residual(self) -> float:
        """max over categories of |sum_i values[i, c] - (scores[c] - bias[c])|."""
        totals = self.values.sum(axis=0)
        target = np.asarray(self.scores, dtype=np.float64) - np.asarray(self.bias, np.float64)
        return float(np.max(np.abs(totals - target)))

    def to_dict(self) -> dict:
        return {
            "tokens": list(self.tokens),
            "labels": list(self.labels),
            "values": [[float(v) for v in row] for row in self.values],
            "probs": [float(p) for p in self.probs],
            "scores": [float(s) for s in self.scores],
            "predicted": self.predicted,
            "pad_mask": [bool(m) for m in self.pad_mask],
            "bias": [float(b) for b in self.bias],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)

    @classmethod
    def from_dict(cls, data: dict) -> "AttributionReport":
        return cls(
            tokens=list(data["tokens"]),
            labels=list(data["labels"]),
            values=np.asarray(data["values"], dtype=np.float64),
            probs=np.asarray(data["probs"], dtype=np.float64),
            scores=np.asarray(data["scores"], dtype=np.float64),
            bias=np.asarray(data["bias"], dtype=np.float64),
            predicted=data["predicted"],
            pad_mask=[bool(m) for m in data["pad_mask"]],
        )


@dataclass
class DocumentAttribution:
    """Per-sentence reports plus the weighted document-level view: each
    sentence's values scaled by its weight and concatenated."""

    reports: list[AttributionReport]
    weights: SentenceWeights
    values: np.ndarray          # (sum of sentence lengths, n_classes)
    tokens: list[str]
    pad_mask: list[bool]
    labels: list[str]
    probs: np.ndarray           # combined distribution
    predicted: str

    def to_dict(self) -> dict:
        return {
            "alpha": [float(a) for a in self.weights.alpha],
            "sentences": [r.to_dict() for r in self.reports],
            "tokens": list(self.tokens),
            "labels": list(self.labels),
            "values": [[float(v) for v in row] for row in self.values],
            "probs": [float(p) for p in self.probs],
            "predicted": self.predicted,
            "pad_mask": [bool(m) for m in self.pad_mask],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)


def conv_attribution(window: np.ndarray, kernel: np.ndarray, bias: np.ndarray,
                     pre_act: np.ndarray, epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    """Per-word contribution shares for one window, (n, feat_dim).

    Column k holds each word's share of feature dimension k: the word's
    slice of the elementwise window*kernel products, divided by the whole
    bias-free convolution sum. When that sum is within epsilon of zero the
    column falls back to uniform 1/n. Either way every column sums to 1.

    The denominator is re-accumulated here in float64 rather than read
    from pre_act (they are the same quantity, conv output minus bias); that
    keeps the column sums exact instead of inheriting the trace's
    single-precision rounding. pre_act is validated for shape only.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    win = np.asarray(window, dtype=np.float64)
    ker = np.asarray(kernel, dtype=np.float64)
    n = win.shape[0]
    if ker.shape[:2] != win.shape:
        raise ValueError(f"kernel shape {ker.shape} does not match window {win.shape}")
    d_m = ker.shape[2]
    if np.asarray(bias).shape != (d_m,) or np.asarray(pre_act).shape != (d_m,):
        raise ValueError("bias and pre_act must have one entry per feature dimension")
    word_sums = np.einsum("gq,gqk->gk", win, ker)   # (n, d_m)
    denom = word_sums.sum(axis=0)
    usable = np.abs(denom) > epsilon
    safe_denom = np.where(usable, denom, 1.0)
    return np.where(usable, word_sums / safe_denom, 1.0 / n)


def mask_features(trace: FeatureTrace) -> np.ndarray:
    """(T, feat_dim) copy of the post-activation features keeping, per
    dimension, only the first pooling winner; everything else zero. The
    masked rows sum to the pooled sentence vector exactly."""
    masked = np.zeros_like(trace.acts)
    masked[trace.winners, np.arange(trace.acts.shape[1])] = trace.pooled
    return masked


def score_distribution(masked_feature: np.ndarray, out_weights: np.ndarray) -> np.ndarray:
    """(feat_dim, n_classes) score contributions of one masked feature:
    entry [k, c] = masked_feature[k] * out_weights[k, c]. Column sums give
    the window's bias-free score vector."""
    h = np.asarray(masked_feature)
    m = np.asarray(out_weights)
    if h.shape != (m.shape[0],):
        raise ValueError(f"feature shape {h.shape} does not match weights {m.shape}")
    return h[:, None] * m


def ngram_word_values(rel: np.ndarray, sco: np.ndarray) -> np.ndarray:
    """(n, n_classes) per-word values for one window: rel @ sco."""
    rel = np.asarray(rel)
    sco = np.asarray(sco)
    if rel.shape[1] != sco.shape[0]:
        raise ValueError(f"inner dims disagree: rel {rel.shape}, sco {sco.shape}")
    return rel @ sco


def explain(params: ModelParams, sentence: EncodedSentence,
            epsilon: float = DEFAULT_EPSILON) -> AttributionReport:
    """Full attribution for one sentence.

    Windows whose masked feature is entirely zero are skipped: their score
    contribution is zero, so they cannot move any token's value.
    """
    trace = forward(params, sentence)
    masked = mask_features(trace).astype(np.float64)
    out_w = np.asarray(params.out_weights, dtype=np.float64)
    x = np.asarray(params.embeddings[trace.token_ids], dtype=np.float64)
    values = np.zeros((len(sentence.ids), params.n_classes), dtype=np.float64)
    for t, (start, n) in enumerate(trace.windows):
        h_masked = masked[t]
        if not h_masked.any():
            continue
        rel = conv_attribution(x[start:start + n], params.kernels[n],
                               params.kernel_biases[n], trace.pre_acts[t], epsilon)
        sco = score_distribution(h_masked, out_w)
        values[start:start + n] += ngram_word_values(rel, sco)
    predicted = params.labels[int(np.argmax(trace.probs))]
    return AttributionReport(
        tokens=list(sentence.tokens),
        labels=list(params.labels),
        values=values,
        probs=np.asarray(trace.probs, dtype=np.float64),
        scores=np.asarray(trace.scores, dtype=np.float64),
        bias=np.asarray(params.out_bias, dtype=np.float64),
        predicted=predicted,
        pad_mask=[int(i) == PAD_ID for i in trace.token_ids],
    )


def explain_document(params: ModelParams, sentences: list[EncodedSentence],
                     epsilon: float = DEFAULT_EPSILON) -> DocumentAttribution:
    """Attribution for a multi-sentence input: each sentence is explained
    on its own (conservation holds per sentence, unscaled), then the
    document view scales every sentence's values by its weight."""
    if not sentences:
        raise ValueError("explain_document needs at least one sentence")
    reports = [explain(params, s, epsilon) for s in sentences]
    weights = sentence_weights([r.scores for r in reports])
    combined = np.zeros(params.n_classes, dtype=np.float64)
    for alpha_k, probs_k in zip(weights.alpha, weights.probs):
        combined += alpha_k * probs_k
    values = np.concatenate(
        [alpha_k * r.values for alpha_k, r in zip(weights.alpha, reports)], axis=0)
    tokens = [tok for r in reports for tok in r.tokens]
    pad_mask = [m for r in reports for m in r.pad_mask]
    predicted = params.labels[int(np.argmax(combined))]
    return DocumentAttribution(reports, weights, values, tokens, pad_mask,
                               list(params.labels), combined, predicted)
