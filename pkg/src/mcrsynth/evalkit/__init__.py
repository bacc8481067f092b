"""Corpus statistics and evaluation metrics."""

from .bleu import BleuDeduper, BleuReference, bleu
from .corpus import CorpusStats, corpus_stats, load_dialogue_texts, text_stats
from .ranking import RecEvalRecord, recall_mrr
from .rouge import lcs_length, rouge
from .text import NGramProfile, distinct_n, ngram_profile, ngrams, tokenize

__all__ = [
    "BleuDeduper", "BleuReference", "CorpusStats", "NGramProfile", "RecEvalRecord", "bleu",
    "corpus_stats", "distinct_n", "lcs_length", "load_dialogue_texts", "ngram_profile", "ngrams",
    "recall_mrr", "rouge", "text_stats", "tokenize",
]
