"""Turn an attribution into a token pattern and retrieve the training
samples that best match it.

The pattern is the ordered list of tokens whose value on one category
clears a relative threshold (a fraction of the best positive value).
Retrieval scores each candidate sample by how many distinct pattern
tokens it contains, plus a bonus of 1.0 if the whole pattern occurs as a
contiguous token run; ties fall back to the model's score for the
pattern's category on that sample, then to sample id.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import LabeledText, tokenize, encode_text, WORD
from .explain import AttributionReport
from .model import ModelParams, forward


class EmptyPatternError(Exception):
    """No token had a positive value on the requested category."""


@dataclass
class Pattern:
    category: str
    tokens: list[str]       # original sentence order
    values: list[float]     # each token's value on the category

    def to_dict(self) -> dict:
        return {"category": self.category, "tokens": list(self.tokens),
                "values": [float(v) for v in self.values]}


@dataclass
class IndexedSample:
    sample_id: int
    text: str
    label: str
    tokens: list[str]


@dataclass
class TrainingIndex:
    samples: list[IndexedSample]
    postings: dict[str, list[int]]            # token -> sample ids, ascending
    labels: list[str] | None = None           # model labels, when scored
    category_scores: np.ndarray | None = None  # (n_samples, n_classes)


@dataclass
class RetrievedSample:
    sample_id: int
    text: str
    label: str
    suitability: float

    def to_dict(self) -> dict:
        return {"id": self.sample_id, "text": self.text, "label": self.label,
                "suitability": self.suitability}


def extract_pattern(report: AttributionReport, category: str,
                    ratio: float = 0.1) -> Pattern:
    """Tokens whose value on `category` exceeds ratio * (best positive
    value), in sentence order. Padding rows are ignored entirely."""
    if not 0 < ratio < 1:
        raise ValueError("ratio must be in (0, 1)")
    col = report.category_index(category)
    rows = [(tok, float(val)) for tok, val, padded
            in zip(report.tokens, report.values[:, col], report.pad_mask)
            if not padded]
    best = max((val for _, val in rows if val > 0), default=None)
    if best is None:
        raise EmptyPatternError(
            f"no token has a positive value on category {category!r}")
    threshold = ratio * best
    kept = [(tok, val) for tok, val in rows if val > threshold]
    return Pattern(category, [tok for tok, _ in kept], [val for _, val in kept])


def build_index(training_set: Sequence[LabeledText], mode: str = WORD,
                params: ModelParams | None = None) -> TrainingIndex:
    """Inverted token index over the training set.

    When the trained model is supplied, its tokenizer mode is used and a
    per-sample score matrix is precomputed so retrieval can break ties by
    the category score.
    """
    if not training_set:
        raise ValueError("training set is empty")
    if params is not None:
        mode = params.vocab.mode
    samples: list[IndexedSample] = []
    postings: dict[str, list[int]] = {}
    for i, labeled in enumerate(training_set):
        tokens = tokenize(labeled.text, mode)
        samples.append(IndexedSample(i, labeled.text, labeled.label, tokens))
        for tok in set(tokens):
            postings.setdefault(tok, []).append(i)
    labels = None
    scores = None
    if params is not None:
        labels = list(params.labels)
        scores = np.zeros((len(samples), params.n_classes), dtype=np.float64)
        for sample in samples:
            trace = forward(params, encode_text(sample.text, params.vocab))
            scores[sample.sample_id] = trace.scores
    return TrainingIndex(samples, postings, labels, scores)


def _contains_contiguous(haystack: list[str], needle: list[str]) -> bool:
    span = len(needle)
    return any(haystack[i:i + span] == needle
               for i in range(len(haystack) - span + 1))


def retrieve(pattern: Pattern, index: TrainingIndex, k: int) -> list[RetrievedSample]:
    """Top-k training samples by suitability. Samples sharing no pattern
    token are never returned; fewer than k matches yields a shorter list."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not pattern.tokens:
        raise ValueError("pattern is empty")
    distinct = list(dict.fromkeys(pattern.tokens))
    candidates: set[int] = set()
    for tok in distinct:
        candidates.update(index.postings.get(tok, ()))

    tie_col = None
    if index.category_scores is not None and index.labels is not None \
            and pattern.category in index.labels:
        tie_col = index.labels.index(pattern.category)

    scored = []
    for i in sorted(candidates):
        sample = index.samples[i]
        token_set = set(sample.tokens)
        overlap = sum(tok in token_set for tok in distinct)
        suitability = float(overlap)
        if _contains_contiguous(sample.tokens, pattern.tokens):
            suitability += 1.0
        tie = float(index.category_scores[i, tie_col]) if tie_col is not None else 0.0
        scored.append((-suitability, -tie, i, sample))
    scored.sort(key=lambda item: item[:3])
    return [RetrievedSample(s.sample_id, s.text, s.label, -neg_suit)
            for neg_suit, _, _, s in scored[:k]]
