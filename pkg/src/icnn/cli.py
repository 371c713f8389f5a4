"""Command-line interface: train, eval, predict, explain, explain-samples.

Exit codes: 0 success or informative outcome, 1 usage error, 2 data error
(unreadable/malformed files), 3 internal invariant violation. Structured
output is UTF-8 JSON on stdout; logs go to stderr. Setting ICNN_NO_COLOR
makes `explain --render ansi` fall back to the plain, '*'-marked output.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import render
from .corpus import (DatasetFormatError, encode_text, load_dataset,
                     split_sentences, tokenize)
from .explain import DEFAULT_EPSILON, explain, explain_document
from .model import (ModelConfig, ModelFormatError, forward, load_model,
                    save_model)
from .patterns import EmptyPatternError, build_index, extract_pattern, retrieve
from .trainer import TrainConfig, evaluate, forward_document, train

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

CONSERVATION_LIMIT = 1e-3


class UsageError(Exception):
    pass


class InvariantViolation(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; the convention here reserves 2 for
    # data errors, so surface usage problems as exceptions instead.
    def error(self, message):
        raise UsageError(message)


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def _emit(payload: dict) -> None:
    print(json.dumps(payload, ensure_ascii=False))


def _sentences_for(text: str, params):
    pieces = [encode_text(p, params.vocab) for p in split_sentences(text)]
    return pieces if pieces else [encode_text(text, params.vocab)]


def cmd_train(args) -> int:
    samples, _labels = load_dataset(args.data, args.format)
    model_config = ModelConfig(emb_dim=args.emb_dim, feat_dim=args.feat_dim,
                               max_kernel=args.max_kernel, seed=args.seed)
    train_config = TrainConfig(epochs=args.epochs, lr=args.lr, seed=args.seed,
                               multi_sentence=args.multi_sentence,
                               tokenizer_mode=args.tokenizer,
                               min_freq=args.min_freq,
                               checkpoint_path=args.checkpoint,
                               monitor_fraction=args.monitor_fraction)
    params, _history = train(samples, train_config, model_config,
                             on_epoch=lambda s: _emit(s.to_dict()))
    save_model(params, args.model)
    _log(f"model written to {args.model}")
    return EXIT_OK


def cmd_eval(args) -> int:
    params = load_model(args.model)
    samples, _ = load_dataset(args.data, args.format)
    result = evaluate(params, samples, multi_sentence=args.multi_sentence)
    _emit({"accuracy": result.accuracy,
           "labels": result.labels,
           "per_class": result.per_class(),
           "confusion": result.confusion.tolist()})
    return EXIT_OK


def cmd_predict(args) -> int:
    params = load_model(args.model)
    if not tokenize(args.text, params.vocab.mode):
        raise UsageError("text is empty after tokenization")
    if args.multi_sentence:
        probs, _, _ = forward_document(params, _sentences_for(args.text, params))
    else:
        probs = forward(params, encode_text(args.text, params.vocab)).probs
    predicted = params.labels[int(np.argmax(probs))]
    _emit({"predicted": predicted,
           "probs": {name: float(p) for name, p in zip(params.labels, probs)}})
    return EXIT_OK


def _check_category(params, category: str | None) -> str:
    if category is None:
        return ""
    if category not in params.labels:
        raise UsageError(f"unknown category {category!r}; valid labels: "
                         + ", ".join(params.labels))
    return category


def cmd_explain(args) -> int:
    params = load_model(args.model)
    if not tokenize(args.text, params.vocab.mode):
        raise UsageError("text is empty after tokenization")
    _check_category(params, args.category)
    plain = bool(os.environ.get("ICNN_NO_COLOR"))
    if args.multi_sentence:
        doc = explain_document(params, _sentences_for(args.text, params),
                               epsilon=args.epsilon)
        for report in doc.reports:
            _ensure_conserved(report)
        category = args.category or doc.predicted
        if args.render == "json":
            print(doc.to_json())
        elif args.render == "html":
            print(render.render_document_html(doc, category))
        elif plain:
            print(render.render_document_plain(doc, category))
        else:
            print(render.render_document_ansi(doc, category))
        return EXIT_OK
    report = explain(params, encode_text(args.text, params.vocab),
                     epsilon=args.epsilon)
    _ensure_conserved(report)
    category = args.category or report.predicted
    if args.render == "json":
        print(report.to_json())
    elif args.render == "html":
        print(render.render_html(report, category))
    elif plain:
        print(render.render_plain(report, category))
    else:
        print(render.render_ansi(report, category))
    return EXIT_OK


def _ensure_conserved(report) -> None:
    residual = report.conservation_residual()
    if residual > CONSERVATION_LIMIT:
        raise InvariantViolation(
            f"attribution totals drifted from scores-bias by {residual:.2e}")


def cmd_explain_samples(args) -> int:
    params = load_model(args.model)
    if not tokenize(args.text, params.vocab.mode):
        raise UsageError("text is empty after tokenization")
    _check_category(params, args.category)
    report = explain(params, encode_text(args.text, params.vocab),
                     epsilon=args.epsilon)
    category = args.category or report.predicted
    try:
        pattern = extract_pattern(report, category, ratio=args.ratio)
    except EmptyPatternError:
        # Informative outcome, not a failure: the model saw nothing
        # speaking for this category.
        print(f"no positive-value tokens for category {category!r}; no pattern")
        return EXIT_OK
    training, _ = load_dataset(args.train_data, args.format)
    index = build_index(training, params=params)
    results = retrieve(pattern, index, args.k)
    if args.render == "json":
        _emit({"pattern": pattern.to_dict(),
               "samples": [r.to_dict() for r in results]})
    else:
        print(f"pattern [{category}]: " + " ".join(pattern.tokens))
        for r in results:
            print(f"  {r.suitability:5.1f}  #{r.sample_id:<6d} {r.label:<10s} {r.text}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="icnn",
                     description="Interpretable convolutional text classifier")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_model(p):
        p.add_argument("--model", required=True, help="model file path")

    def add_data(p):
        p.add_argument("--data", required=True, help="dataset file")
        p.add_argument("--format", choices=["trec", "tsv"], default="trec")

    p = sub.add_parser("train", help="train a model and write it to --model")
    add_data(p)
    add_model(p)
    p.add_argument("--emb-dim", type=int, default=50)
    p.add_argument("--feat-dim", type=int, default=50)
    p.add_argument("--max-kernel", type=int, default=6)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--tokenizer", choices=["word", "char"], default="word")
    p.add_argument("--multi-sentence", action="store_true")
    p.add_argument("--min-freq", type=int, default=1)
    p.add_argument("--monitor-fraction", type=float, default=0.1)
    p.add_argument("--checkpoint", default=None,
                   help="write the model here after every epoch")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="accuracy and per-class counts on a dataset")
    add_model(p)
    add_data(p)
    p.add_argument("--multi-sentence", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="label and probabilities for one text")
    add_model(p)
    p.add_argument("--text", required=True)
    p.add_argument("--multi-sentence", action="store_true")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("explain", help="per-token attribution for one text")
    add_model(p)
    p.add_argument("--text", required=True)
    p.add_argument("--render", choices=["ansi", "html", "json"], default="ansi")
    p.add_argument("--category", default=None,
                   help="category to shade (default: predicted)")
    p.add_argument("--multi-sentence", action="store_true")
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("explain-samples",
                       help="extract a pattern and fetch matching training samples")
    add_model(p)
    p.add_argument("--text", required=True)
    p.add_argument("--train-data", required=True,
                   help="training dataset to index for retrieval")
    p.add_argument("--format", choices=["trec", "tsv"], default="trec")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--category", default=None)
    p.add_argument("--ratio", type=float, default=0.1)
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    p.add_argument("--render", choices=["text", "json"], default="text")
    p.set_defaults(func=cmd_explain_samples)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        _log(f"usage error: {exc}")
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        _log(f"usage error: {exc}")
        return EXIT_USAGE
    except (DatasetFormatError, ModelFormatError, OSError, UnicodeDecodeError) as exc:
        _log(f"data error: {exc}")
        return EXIT_DATA
    except InvariantViolation as exc:
        _log(f"internal invariant violation: {exc}")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
