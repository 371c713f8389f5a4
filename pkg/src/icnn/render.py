"""Heatmap rendering of attribution values: ANSI terminal, plain text, HTML.

Heat is normalized per category by the largest absolute value, then
bucketed into five intensity levels. Positive values shade red, negative
ones blue; in plain (no-color) output negative-value tokens carry a "*"
marker instead.
"""

from __future__ import annotations

import html as _html

import numpy as np

from .explain import AttributionReport, DocumentAttribution

# 256-color backgrounds, weakest to strongest (index 0 = no shading).
_POS_BG = [None, 52, 88, 124, 160]
_NEG_BG = [None, 17, 18, 19, 21]
_LEVELS = 4


def heat_level(value: float, max_abs: float) -> int:
    """Bucket |value| / max_abs into 0.._LEVELS."""
    if max_abs <= 0 or value == 0:
        return 0
    frac = min(1.0, abs(value) / max_abs)
    return max(1, int(np.ceil(frac * _LEVELS)))


def _ansi_token(token: str, value: float, max_abs: float) -> str:
    level = heat_level(value, max_abs)
    if level == 0:
        return token
    code = _POS_BG[level] if value > 0 else _NEG_BG[level]
    return f"\x1b[48;5;{code};38;5;231m{token}\x1b[0m"


def _header(report: AttributionReport, category: str) -> str:
    c = report.category_index(category)
    return (f"category={category}  predicted={report.predicted}  "
            f"p={float(report.probs[c]):.4f}")


def render_ansi(report: AttributionReport, category: str) -> str:
    c = report.category_index(category)
    vals = report.values[:, c]
    max_abs = float(np.max(np.abs(vals))) if len(vals) else 0.0
    line = " ".join(_ansi_token(tok, float(v), max_abs)
                    for tok, v in zip(report.tokens, vals))
    return _header(report, category) + "\n" + line


def render_plain(report: AttributionReport, category: str) -> str:
    """No-color fallback: '*' marks tokens with negative values, and the
    per-token values are listed underneath."""
    c = report.category_index(category)
    vals = report.values[:, c]
    marked = " ".join(("*" + tok) if v < 0 else tok
                      for tok, v in zip(report.tokens, vals))
    rows = [f"  {tok}\t{float(v):+.4f}" + ("\t[pad]" if padded else "")
            for tok, v, padded in zip(report.tokens, vals, report.pad_mask)]
    return "\n".join([_header(report, category), marked, *rows])


def _html_span(token: str, value: float, max_abs: float) -> str:
    level = heat_level(value, max_abs)
    alpha = 0.18 * level
    color = f"rgba(200,30,30,{alpha:.2f})" if value > 0 else f"rgba(40,60,200,{alpha:.2f})"
    style = f"background:{color};padding:1px 3px;border-radius:3px;" if level else ""
    return (f'<span class="tok" title="{value:+.5f}" style="{style}">'
            f"{_html.escape(token)}</span>")


def render_html(report: AttributionReport, category: str) -> str:
    """One self-contained page: heat line plus the probability table."""
    c = report.category_index(category)
    vals = report.values[:, c]
    max_abs = float(np.max(np.abs(vals))) if len(vals) else 0.0
    spans = "\n".join(_html_span(tok, float(v), max_abs)
                      for tok, v in zip(report.tokens, vals))
    prob_rows = "\n".join(
        f"<tr><td>{_html.escape(name)}</td><td>{float(p):.4f}</td></tr>"
        for name, p in zip(report.labels, report.probs))
    return f"""<!DOCTYPE html>
<html><head><meta charset="utf-8"><title>token attribution</title>
<style>
body {{ font-family: sans-serif; margin: 2em; }}
.tok {{ margin-right: 0.3em; font-size: 1.15em; }}
table {{ border-collapse: collapse; margin-top: 1.5em; }}
td, th {{ border: 1px solid #999; padding: 3px 10px; }}
</style></head>
<body>
<h3>{_html.escape(_header(report, category))}</h3>
<p>{spans}</p>
<table><tr><th>label</th><th>p</th></tr>
{prob_rows}
</table>
</body></html>
"""


def _render_each(doc: DocumentAttribution, category: str,
                 render_one, joiner: str) -> str:
    parts = []
    for alpha_k, report in zip(doc.weights.alpha, doc.reports):
        parts.append(f"[sentence weight {float(alpha_k):.4f}]")
        parts.append(render_one(report, category))
    head = f"document predicted={doc.predicted}"
    return joiner.join([head, *parts])


def render_document_ansi(doc: DocumentAttribution, category: str) -> str:
    return _render_each(doc, category, render_ansi, "\n")


def render_document_plain(doc: DocumentAttribution, category: str) -> str:
    return _render_each(doc, category, render_plain, "\n")


def render_document_html(doc: DocumentAttribution, category: str) -> str:
    blocks = []
    for alpha_k, report in zip(doc.weights.alpha, doc.reports):
        c = report.category_index(category)
        vals = report.values[:, c]
        max_abs = float(np.max(np.abs(vals))) if len(vals) else 0.0
        spans = "\n".join(_html_span(tok, float(v), max_abs)
                          for tok, v in zip(report.tokens, vals))
        blocks.append(f"<p><b>weight {float(alpha_k):.4f}</b><br>{spans}</p>")
    body = "\n".join(blocks)
    return f"""<!DOCTYPE html>
<html><head><meta charset="utf-8"><title>document attribution</title>
<style>body {{ font-family: sans-serif; margin: 2em; }}
.tok {{ margin-right: 0.3em; font-size: 1.15em; }}</style></head>
<body><h3>document predicted={_html.escape(doc.predicted)} category={_html.escape(category)}</h3>
{body}
</body></html>
"""
