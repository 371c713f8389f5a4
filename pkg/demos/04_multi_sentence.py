"""Classify and explain a multi-sentence input.

Each sentence is classified on its own; the per-sentence distributions
are mixed with weights from a softmax over each sentence's best score, so
confident sentences dominate and vague ones fade. The document-level
attribution scales each sentence's token values by its weight.
"""

import numpy as np

from icnn import encode_text, explain_document, split_sentences

from _common import quick_model

params = quick_model()

text = ("How long did it take to build the Great Wall ? "
        "It is quite famous. "
        "Who was the emperor at the time ?")

pieces = split_sentences(text)
sentences = [encode_text(p, params.vocab) for p in pieces]
doc = explain_document(params, sentences)

print(f"document: {text}")
print(f"combined prediction: {doc.predicted}")
print(f"combined probabilities: "
      f"{ {l: round(float(p), 3) for l, p in zip(doc.labels, doc.probs)} }")
print("\nper-sentence view:")
for piece, alpha, rep in zip(pieces, doc.weights.alpha, doc.reports):
    print(f"  weight {float(alpha):.3f}  ->  {rep.predicted:<5}  {piece}")

# document-level token values for the combined prediction
col = doc.labels.index(doc.predicted)
print(f"\nstrongest tokens for {doc.predicted} across the whole document:")
order = np.argsort(-doc.values[:, col])
for i in order[:6]:
    print(f"  {doc.tokens[int(i)]:<12} {doc.values[int(i), col]:+.4f}")
