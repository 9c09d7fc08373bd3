"""Phoneme-level encoder-decoder inflection models with wug-test
evaluation, a minimal-generalization rule baseline, and representation
probes."""

__version__ = "0.1.0"

from .data import NonceItem, SuggestedForm, VerbEntry
from .decode import (BeamHypothesis, BeamResult, FormScore, beam_decode,
                     force_score, sample_form, sample_forms,
                     training_accuracy)
from .metrics import (CorrelationReport, Cr5Report, correlate_forms, cr_at_5,
                      pearson, second_place_agreement, spearman)
from .model import HyperParams, Model, init_model, train_epoch
from .rules import Rule, RuleGrammar, generalize, induce_grammar, score_form, word_rule
from .vocab import Vocabulary

__all__ = [
    "BeamHypothesis", "BeamResult", "CorrelationReport", "Cr5Report",
    "FormScore", "HyperParams", "Model", "NonceItem", "Rule", "RuleGrammar",
    "SuggestedForm", "VerbEntry", "Vocabulary", "beam_decode",
    "correlate_forms", "cr_at_5", "force_score", "generalize",
    "induce_grammar", "init_model", "pearson", "sample_form", "sample_forms",
    "score_form", "second_place_agreement", "spearman", "train_epoch",
    "training_accuracy", "word_rule",
]
