"""Text classification of posts into sentinel categories."""

from .audit import audit_sample, precision_estimate, read_verdicts, write_audit_plan
from .bayes import NBModel, nb_classify, nb_posteriors, nb_train
from .lexicon import CategoryLexicon, lexicon_classify, lexicon_classify_all, lexicon_match, load_lexicon
from .svm import SvmModel, hinge_subgradient, svm_classify, svm_margins, svm_objective, svm_train
from .tfidf import TfidfModel, tfidf_fit, tfidf_vector
from .tokenize import tokenize

__all__ = [
    "CategoryLexicon",
    "NBModel",
    "SvmModel",
    "TfidfModel",
    "audit_sample",
    "hinge_subgradient",
    "lexicon_classify",
    "lexicon_classify_all",
    "lexicon_match",
    "load_lexicon",
    "nb_classify",
    "nb_posteriors",
    "nb_train",
    "precision_estimate",
    "read_verdicts",
    "svm_classify",
    "svm_margins",
    "svm_objective",
    "svm_train",
    "tfidf_fit",
    "tfidf_vector",
    "tokenize",
    "write_audit_plan",
]
