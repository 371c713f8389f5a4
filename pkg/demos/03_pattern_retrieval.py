"""From a prediction to the training samples that justify it.

The positive-value tokens for a category form a pattern; an inverted
index over the training set then surfaces the samples that best match it
(distinct-token overlap, +1 if the whole pattern appears contiguously,
model score as the tie-break). This answers "what did the model learn
this from?" for any prediction, including wrong ones.
"""

from icnn import build_index, encode_text, explain, extract_pattern, retrieve

from _common import quick_model, training_subset

params = quick_model()
training = training_subset()
index = build_index(training, params=params)

for text in ["How long did it take to cross the Atlantic ?",
             "What is the fastest car in the world ?"]:
    report = explain(params, encode_text(text, params.vocab))
    print(f"\n{text}")
    print(f"  predicted {report.predicted} "
          f"(p={float(max(report.probs)):.3f})")
    pattern = extract_pattern(report, report.predicted, ratio=0.1)
    print(f"  pattern for {pattern.category}: {' '.join(pattern.tokens)}")
    for hit in retrieve(pattern, index, k=5):
        print(f"    {hit.suitability:4.1f}  {hit.label:<5} {hit.text}")
