"""Tokenization, vocabulary construction, dataset ingestion, sentence splitting."""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

PAD_ID = 0
UNK_ID = 1
PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"

WORD = "word"
CHAR = "char"


class DatasetFormatError(Exception):
    """A dataset file exists but a line does not match the declared format."""


@dataclass
class LabeledText:
    text: str
    label: str


@dataclass
class Vocabulary:
    """token <-> id mapping with PAD=0 and UNK=1 reserved.

    Non-reserved ids start at 2 and are ordered by corpus frequency
    (descending), then first occurrence, so the same corpus always yields
    the byte-identical vocabulary. Immutable after construction.
    """

    token_to_id: dict[str, int]
    id_to_token: list[str]
    mode: str  # WORD or CHAR

    def __len__(self) -> int:
        return len(self.id_to_token)

    def id_for(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)


@dataclass
class EncodedSentence:
    """Token ids ready for the model, padded to length >= 2, plus the
    original token strings (padding shows up as PAD_TOKEN) for rendering."""

    ids: np.ndarray
    tokens: list[str]

    def __len__(self) -> int:
        return len(self.ids)


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def tokenize(text: str, mode: str = WORD) -> list[str]:
    """Split text into tokens.

    word mode: lowercase, whitespace split, leading/trailing punctuation
    detached as separate tokens (word-internal punctuation stays).
    char mode: one token per Unicode scalar, whitespace dropped, no case
    folding.
    """
    if mode == CHAR:
        return [ch for ch in text if not ch.isspace()]
    if mode != WORD:
        raise ValueError(f"unknown tokenizer mode {mode!r}")
    tokens: list[str] = []
    for piece in text.lower().split():
        lead: list[str] = []
        while piece and _is_punct(piece[0]):
            lead.append(piece[0])
            piece = piece[1:]
        trail: list[str] = []
        while piece and _is_punct(piece[-1]):
            trail.append(piece[-1])
            piece = piece[:-1]
        tokens.extend(lead)
        if piece:
            tokens.append(piece)
        tokens.extend(reversed(trail))
    return tokens


def build_vocab(corpus: Iterable[LabeledText | str], mode: str = WORD,
                min_freq: int = 1) -> Vocabulary:
    """Vocabulary over every token with frequency >= min_freq."""
    if min_freq < 1:
        raise ValueError("min_freq must be >= 1")
    counts: dict[str, int] = {}
    first_seen: dict[str, int] = {}
    position = 0
    for sample in corpus:
        text = sample.text if isinstance(sample, LabeledText) else sample
        for tok in tokenize(text, mode):
            counts[tok] = counts.get(tok, 0) + 1
            if tok not in first_seen:
                first_seen[tok] = position
                position += 1
    kept = sorted((tok for tok, n in counts.items() if n >= min_freq),
                  key=lambda tok: (-counts[tok], first_seen[tok]))
    id_to_token = [PAD_TOKEN, UNK_TOKEN] + kept
    token_to_id = {tok: i for i, tok in enumerate(id_to_token)}
    return Vocabulary(token_to_id, id_to_token, mode)


def encode(tokens: Sequence[str], vocab: Vocabulary) -> EncodedSentence:
    """Map tokens to ids; unknowns become UNK, and sentences shorter than 2
    are right-padded with PAD so the smallest kernel width always fits."""
    ids = [vocab.id_for(tok) for tok in tokens]
    toks = list(tokens)
    while len(ids) < 2:
        ids.append(PAD_ID)
        toks.append(PAD_TOKEN)
    return EncodedSentence(np.asarray(ids, dtype=np.int64), toks)


def encode_text(text: str, vocab: Vocabulary) -> EncodedSentence:
    return encode(tokenize(text, vocab.mode), vocab)


_SENTENCE_BREAK = re.compile(r"(?<=[.!?;。！？；])")


def split_sentences(text: str) -> list[str]:
    """Split after . ! ? ; and their full-width forms, keeping each
    delimiter with its sentence. Pieces are trimmed; empty ones dropped."""
    return [part.strip() for part in _SENTENCE_BREAK.split(text) if part.strip()]


def _decode_dataset_bytes(raw: bytes) -> str:
    # Files are expected UTF-8; the odd Latin-1 byte (the original question
    # files have a few) is transcoded instead of crashing the load.
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError:
        return raw.decode("latin-1")


def load_dataset(path: str | Path, fmt: str = "trec") -> tuple[list[LabeledText], list[str]]:
    """Load a labeled dataset.

    trec format: per line, the first whitespace-delimited field is
    "COARSE:fine" and the coarse part is the label; the rest of the line is
    the text. tsv format: "label<TAB>text" per line. Returns the samples
    and the distinct labels in file order. Blank lines are skipped;
    malformed lines raise DatasetFormatError naming the line number.
    """
    if fmt not in ("trec", "tsv"):
        raise ValueError(f"unknown dataset format {fmt!r}")
    text = _decode_dataset_bytes(Path(path).read_bytes())
    samples: list[LabeledText] = []
    labels: list[str] = []
    seen: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if fmt == "trec":
            parts = line.split(None, 1)
            head, sep, _fine = parts[0].partition(":")
            if not sep:
                raise DatasetFormatError(
                    f"{path}:{lineno}: trec line has no ':' in its label field")
            label, body = head, (parts[1] if len(parts) > 1 else "")
        else:
            label, sep, body = line.partition("\t")
            if not sep:
                raise DatasetFormatError(f"{path}:{lineno}: tsv line has no tab")
            label = label.strip()
        samples.append(LabeledText(body.strip(), label))
        if label not in seen:
            seen.add(label)
            labels.append(label)
    return samples, labels
