"""Multi-width convolution text classifier with a full pooling trace.

Embeddings feed convolutions of every width from 2 up to the configured
maximum; each window's feature vector goes through a Relu, then a single
max-pool over *all* windows of *all* widths picks the per-dimension
winners into the sentence vector, which a linear layer maps to class
scores. The forward pass records enough (windows, pre/post activations,
pooling winners) for both the hand-derived backward pass and the
attribution pipeline. Pooling ties resolve to the smallest window index;
windows are enumerated by ascending width, then ascending start, so that
rule is deterministic.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .corpus import EncodedSentence, Vocabulary, WORD, CHAR
from .numerics import softmax

MAGIC = b"ICNN"
FORMAT_VERSION = 1
_MODE_CODES = {WORD: 0, CHAR: 1}
_MODE_NAMES = {0: WORD, 1: CHAR}


class ModelFormatError(Exception):
    """Base class for model (de)serialization failures."""


class BadMagicError(ModelFormatError):
    pass


class UnsupportedVersionError(ModelFormatError):
    pass


class TruncatedModelError(ModelFormatError):
    pass


class ShapeMismatchError(ModelFormatError):
    pass


@dataclass
class ModelConfig:
    """Hyperparameters. Kernel widths run 2..max_kernel inclusive."""

    emb_dim: int = 50
    feat_dim: int = 50
    max_kernel: int = 6
    n_classes: int = 2
    epsilon: float = 1e-6  # near-zero guard for the attribution ratio
    seed: int = 42

    def __post_init__(self) -> None:
        if self.emb_dim < 1 or self.feat_dim < 1:
            raise ValueError("emb_dim and feat_dim must be >= 1")
        if self.max_kernel < 2:
            raise ValueError("max_kernel must be >= 2")
        if self.n_classes < 2:
            raise ValueError("n_classes must be >= 2")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")


@dataclass
class ModelParams:
    embeddings: np.ndarray                 # (|V|, emb_dim)
    kernels: dict[int, np.ndarray]         # width -> (width, emb_dim, feat_dim)
    kernel_biases: dict[int, np.ndarray]   # width -> (feat_dim,)
    out_weights: np.ndarray                # (feat_dim, n_classes)
    out_bias: np.ndarray                   # (n_classes,)
    labels: list[str]
    vocab: Vocabulary

    @property
    def emb_dim(self) -> int:
        return self.embeddings.shape[1]

    @property
    def feat_dim(self) -> int:
        return self.out_weights.shape[0]

    @property
    def n_classes(self) -> int:
        return self.out_weights.shape[1]

    @property
    def widths(self) -> list[int]:
        return sorted(self.kernels)

    @property
    def max_kernel(self) -> int:
        return max(self.kernels)

    @property
    def dtype(self) -> np.dtype:
        return self.embeddings.dtype


@dataclass
class FeatureTrace:
    """Everything the forward pass saw, per window.

    windows[t] = (start, width) of the t-th n-gram; enumeration is
    ascending width then ascending start. winners[j] is the smallest t
    whose post-activation attains the per-dimension max, so
    pooled[j] == acts[winners[j], j] exactly.
    """

    token_ids: np.ndarray                  # (w,)
    windows: list[tuple[int, int]]         # length T
    pre_acts: np.ndarray                   # (T, feat_dim)
    acts: np.ndarray                       # (T, feat_dim), Relu of pre_acts
    pooled: np.ndarray                     # (feat_dim,)
    winners: np.ndarray                    # (feat_dim,) window indices
    scores: np.ndarray                     # (n_classes,)
    probs: np.ndarray                      # (n_classes,)

    @property
    def n_windows(self) -> int:
        return len(self.windows)


@dataclass
class ParamGradients:
    """Gradients mirroring ModelParams' arrays.

    The embedding gradient is also available in sparse form (the unique
    token rows an input touched, plus their summed gradients); training
    uses that to avoid materializing a |V| x emb_dim array per step, in
    which case `embeddings` is None.
    """

    embeddings: np.ndarray | None
    kernels: dict[int, np.ndarray]
    kernel_biases: dict[int, np.ndarray]
    out_weights: np.ndarray
    out_bias: np.ndarray
    embedding_rows: np.ndarray | None = None       # (u,) unique token ids
    embedding_row_grads: np.ndarray | None = None  # (u, emb_dim)


def init_model(config: ModelConfig, vocab: Vocabulary, labels: list[str],
               dtype=np.float32) -> ModelParams:
    """Fresh parameters: weights i.i.d. uniform on [-0.1, 0.1] from a
    seeded generator (fixed draw order, so the same seed is byte-identical),
    biases zero."""
    if len(labels) != config.n_classes:
        raise ValueError(f"{len(labels)} labels but n_classes={config.n_classes}")
    rng = np.random.default_rng(config.seed)

    def uniform(*shape):
        return rng.uniform(-0.1, 0.1, size=shape).astype(dtype)

    embeddings = uniform(len(vocab), config.emb_dim)
    kernels = {n: uniform(n, config.emb_dim, config.feat_dim)
               for n in range(2, config.max_kernel + 1)}
    kernel_biases = {n: np.zeros(config.feat_dim, dtype=dtype)
                     for n in range(2, config.max_kernel + 1)}
    out_weights = uniform(config.feat_dim, config.n_classes)
    out_bias = np.zeros(config.n_classes, dtype=dtype)
    return ModelParams(embeddings, kernels, kernel_biases, out_weights, out_bias,
                       list(labels), vocab)


def _window_matrix(x: np.ndarray, n: int) -> np.ndarray:
    """All width-n windows of the embedded sentence, flattened to
    (w - n + 1, n * emb_dim) rows."""
    view = sliding_window_view(x, n, axis=0)       # (w-n+1, emb_dim, n)
    return view.transpose(0, 2, 1).reshape(x.shape[0] - n + 1, n * x.shape[1])


def forward(params: ModelParams, sentence: EncodedSentence) -> FeatureTrace:
    """Run the classifier, recording the full trace.

    Kernel widths longer than the sentence are skipped, so every possible
    window of every applicable width contributes exactly one feature.
    """
    ids = np.asarray(sentence.ids)
    w = ids.shape[0]
    if w < 2:
        raise ValueError(f"sentence must have length >= 2, got {w}")
    x = params.embeddings[ids]
    pre_chunks: list[np.ndarray] = []
    windows: list[tuple[int, int]] = []
    for n in params.widths:
        if n > w:
            continue
        flat = _window_matrix(x, n)
        kernel = params.kernels[n].reshape(n * params.emb_dim, params.feat_dim)
        pre_chunks.append(flat @ kernel + params.kernel_biases[n])
        windows.extend((start, n) for start in range(w - n + 1))
    pre_acts = np.concatenate(pre_chunks, axis=0)
    acts = np.maximum(pre_acts, 0)
    pooled = acts.max(axis=0)
    winners = acts.argmax(axis=0)  # argmax returns the first max: smallest t
    scores = pooled @ params.out_weights + params.out_bias
    probs = softmax(scores)
    return FeatureTrace(ids, windows, pre_acts, acts, pooled, winners, scores, probs)


def backward(params: ModelParams, trace: FeatureTrace,
             grad_scores: np.ndarray, dense_embeddings: bool = True) -> ParamGradients:
    """Exact gradients of (grad_scores . scores) w.r.t. every parameter.

    Pooling routes gradient only to each dimension's winning window;
    the Relu passes gradient only where the pre-activation is positive.
    With dense_embeddings=False only the sparse embedding fields are
    filled (same values, scattered by the caller).
    """
    d_m = params.feat_dim
    g_s = np.asarray(grad_scores, dtype=params.dtype)
    grad_out_bias = g_s.copy()
    grad_out_weights = np.outer(trace.pooled, g_s)
    grad_pooled = params.out_weights @ g_s

    grad_acts = np.zeros_like(trace.acts)
    grad_acts[trace.winners, np.arange(d_m)] = grad_pooled
    grad_pre = np.where(trace.pre_acts > 0, grad_acts, 0)

    ids = trace.token_ids
    w = ids.shape[0]
    x = params.embeddings[ids]
    grad_x = np.zeros_like(x)
    grad_kernels: dict[int, np.ndarray] = {}
    grad_kernel_biases: dict[int, np.ndarray] = {}
    offset = 0
    for n in params.widths:
        if n > w:
            grad_kernels[n] = np.zeros_like(params.kernels[n])
            grad_kernel_biases[n] = np.zeros_like(params.kernel_biases[n])
            continue
        t_n = w - n + 1
        gp = grad_pre[offset:offset + t_n]
        offset += t_n
        flat = _window_matrix(x, n)
        grad_kernels[n] = (flat.T @ gp).reshape(n, params.emb_dim, d_m)
        grad_kernel_biases[n] = gp.sum(axis=0)
        kernel = params.kernels[n].reshape(n * params.emb_dim, d_m)
        grad_windows = (gp @ kernel.T).reshape(t_n, n, params.emb_dim)
        for pos in range(n):
            grad_x[pos:pos + t_n] += grad_windows[:, pos, :]
    rows, inverse = np.unique(ids, return_inverse=True)
    row_grads = np.zeros((rows.shape[0], params.emb_dim), dtype=grad_x.dtype)
    np.add.at(row_grads, inverse, grad_x)
    grad_embeddings = None
    if dense_embeddings:
        grad_embeddings = np.zeros_like(params.embeddings)
        grad_embeddings[rows] = row_grads
    return ParamGradients(grad_embeddings, grad_kernels, grad_kernel_biases,
                          grad_out_weights, grad_out_bias,
                          embedding_rows=rows, embedding_row_grads=row_grads)


# --- serialization -----------------------------------------------------------
#
# Little-endian layout:
#   "ICNN" | version u32 | tokenizer mode u8 | |V|, emb_dim, feat_dim,
#   max_kernel, n_classes as u32 | label names | vocabulary tokens |
#   embeddings | (W_n, b_n for n = 2..max_kernel) | out weights | out bias
# Strings are u32 byte length + UTF-8; arrays are row-major float32.


def _pack_string(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def save_model(params: ModelParams, path: str | Path) -> None:
    buf = bytearray()
    buf += MAGIC
    buf += struct.pack("<I", FORMAT_VERSION)
    buf += struct.pack("<B", _MODE_CODES[params.vocab.mode])
    buf += struct.pack("<5I", len(params.vocab), params.emb_dim, params.feat_dim,
                       params.max_kernel, params.n_classes)
    for name in params.labels:
        buf += _pack_string(name)
    for tok in params.vocab.id_to_token:
        buf += _pack_string(tok)
    arrays = [params.embeddings]
    for n in params.widths:
        arrays.append(params.kernels[n])
        arrays.append(params.kernel_biases[n])
    arrays.append(params.out_weights)
    arrays.append(params.out_bias)
    for arr in arrays:
        buf += np.ascontiguousarray(arr, dtype="<f4").tobytes()
    Path(path).write_bytes(bytes(buf))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, count: int) -> bytes:
        if self.pos + count > len(self.data):
            raise TruncatedModelError(
                f"model file truncated: needed {count} bytes at offset {self.pos}, "
                f"have {len(self.data) - self.pos}")
        out = self.data[self.pos:self.pos + count]
        self.pos += count
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u8(self) -> int:
        return self.take(1)[0]

    def string(self) -> str:
        return self.take(self.u32()).decode("utf-8")

    def array(self, *shape: int) -> np.ndarray:
        count = int(np.prod(shape))
        raw = self.take(count * 4)
        return np.frombuffer(raw, dtype="<f4", count=count).reshape(shape).copy()


def load_model(path: str | Path) -> ModelParams:
    """Read a model file back; inverse of save_model, bit-exact."""
    reader = _Reader(Path(path).read_bytes())
    if reader.take(4) != MAGIC:
        raise BadMagicError(f"{path}: bad magic, not a model file")
    version = reader.u32()
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"{path}: format version {version}, expected {FORMAT_VERSION}")
    mode_code = reader.u8()
    if mode_code not in _MODE_NAMES:
        raise ShapeMismatchError(f"{path}: unknown tokenizer mode byte {mode_code}")
    vocab_size = reader.u32()
    emb_dim = reader.u32()
    feat_dim = reader.u32()
    max_kernel = reader.u32()
    n_classes = reader.u32()
    if vocab_size < 2 or emb_dim < 1 or feat_dim < 1 or max_kernel < 2 or n_classes < 2:
        raise ShapeMismatchError(
            f"{path}: implausible header counts |V|={vocab_size} emb={emb_dim} "
            f"feat={feat_dim} max_kernel={max_kernel} classes={n_classes}")
    labels = [reader.string() for _ in range(n_classes)]
    tokens = [reader.string() for _ in range(vocab_size)]
    embeddings = reader.array(vocab_size, emb_dim)
    kernels: dict[int, np.ndarray] = {}
    kernel_biases: dict[int, np.ndarray] = {}
    for n in range(2, max_kernel + 1):
        kernels[n] = reader.array(n, emb_dim, feat_dim)
        kernel_biases[n] = reader.array(feat_dim)
    out_weights = reader.array(feat_dim, n_classes)
    out_bias = reader.array(n_classes)
    if reader.pos != len(reader.data):
        raise ShapeMismatchError(
            f"{path}: {len(reader.data) - reader.pos} unexpected trailing bytes")
    vocab = Vocabulary({tok: i for i, tok in enumerate(tokens)}, tokens,
                       _MODE_NAMES[mode_code])
    if len(vocab.token_to_id) != vocab_size:
        raise ShapeMismatchError(f"{path}: vocabulary contains duplicate tokens")
    return ModelParams(embeddings, kernels, kernel_biases, out_weights, out_bias,
                       labels, vocab)
