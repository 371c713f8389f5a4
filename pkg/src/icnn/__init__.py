"""Interpretable convolutional text classifier.

Train a multi-width convolution + max-pool sentence classifier, then
decompose any prediction into per-token, per-category values whose column
totals reproduce the class scores minus the output bias. Long inputs are
handled by classifying sentences independently and mixing their
distributions with confidence-derived weights; positive-value token
patterns can be matched back against the training set.
"""

from .corpus import (CHAR, PAD_ID, PAD_TOKEN, UNK_ID, UNK_TOKEN, WORD,
                     DatasetFormatError, EncodedSentence, LabeledText,
                     Vocabulary, build_vocab, encode, encode_text,
                     load_dataset, split_sentences, tokenize)
from .explain import (DEFAULT_EPSILON, AttributionReport, DocumentAttribution,
                      conv_attribution, explain, explain_document,
                      mask_features, ngram_word_values, score_distribution)
from .model import (BadMagicError, FeatureTrace, ModelConfig, ModelFormatError,
                    ModelParams, ParamGradients, ShapeMismatchError,
                    TruncatedModelError, UnsupportedVersionError, backward,
                    forward, init_model, load_model, save_model)
from .numerics import (AdamState, adam_step, cross_entropy_with_grad,
                       finite_difference_gradcheck, softmax)
from .patterns import (EmptyPatternError, IndexedSample, Pattern,
                       RetrievedSample, TrainingIndex, build_index,
                       extract_pattern, retrieve)
from .trainer import (EpochStats, EvalResult, SentenceWeights, TrainConfig,
                      evaluate, forward_document, sentence_weights, train,
                      train_multisentence)

__version__ = "0.1.0"
