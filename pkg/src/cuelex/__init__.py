"""cuelex: expand and analyze lexicons of uncertainty cue words.

Batch toolkit around pre-trained word-embedding models: seed-lexicon
expansion with cross-model intersection and PMI/TF-IDF scoring, corpus
cue analytics (S+/S- ratios, baseline-relative scores, per-group rates),
similarity-graph clustering and ranking, judge-agreement statistics,
cross-validated cue classifiers, and PCA/MDS over score matrices.
"""

from .errors import CuelexError, InputError

__version__ = "0.1.0"

__all__ = ["CuelexError", "InputError", "__version__"]
