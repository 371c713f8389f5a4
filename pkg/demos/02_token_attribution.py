"""Decompose predictions into per-token values.

Every token gets one value per category; summing a category's column
reproduces that category's score minus the output bias, so the heatmap is
an exact decomposition of the prediction, not a saliency approximation.
"""

import numpy as np

from icnn import encode_text, explain
from icnn.render import render_ansi, render_plain

from _common import quick_model

params = quick_model()

questions = [
    "How long did it take to build the pyramids ?",
    "Who painted the Mona Lisa ?",
    "Where is the Danube river ?",
]

for text in questions:
    report = explain(params, encode_text(text, params.vocab))
    print()
    print(render_ansi(report, report.predicted))

    # the books must balance: column totals == scores - bias
    residual = report.conservation_residual()
    totals = report.values.sum(axis=0)
    target = report.scores - report.bias
    print(f"  column totals {np.round(totals, 3)}")
    print(f"  scores - bias {np.round(target, 3)}   (max gap {residual:.1e})")

# the same report rendered without color: '*' marks negative-value tokens
report = explain(params, encode_text(questions[0], params.vocab))
print()
print(render_plain(report, report.predicted))
