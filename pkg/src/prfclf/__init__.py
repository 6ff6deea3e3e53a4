"""Pseudo-relevance feedback with per-topic text classifiers for reranking BM25 / RM3 runs."""

__version__ = "0.1.0"

from prfclf.analysis import analyze
from prfclf.classify import PseudoLabelConfig, classifier_scores, train_logreg, train_svm
from prfclf.cv import CVConfig, grid_search_cv, make_folds
from prfclf.evaluate import compare_runs, kendall_tau_at_k, mean_ap, paired_t_test
from prfclf.index import Document, InvertedIndex, build_index, read_corpus
from prfclf.io import read_qrels, read_run, read_topics, write_run
from prfclf.rerank import InterpolationParams, prf_rerank_run
from prfclf.retrieval import BM25Params, QueryTopic, RankedList, RM3Params, retrieve, search
from prfclf.synthetic import SynthSpec, generate_synthetic

__all__ = [
    "BM25Params",
    "CVConfig",
    "Document",
    "InterpolationParams",
    "InvertedIndex",
    "PseudoLabelConfig",
    "QueryTopic",
    "RM3Params",
    "RankedList",
    "SynthSpec",
    "analyze",
    "build_index",
    "classifier_scores",
    "compare_runs",
    "generate_synthetic",
    "grid_search_cv",
    "kendall_tau_at_k",
    "make_folds",
    "mean_ap",
    "paired_t_test",
    "prf_rerank_run",
    "read_corpus",
    "read_qrels",
    "read_run",
    "read_topics",
    "retrieve",
    "search",
    "train_logreg",
    "train_svm",
    "write_run",
]
