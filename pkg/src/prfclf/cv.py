"""k-fold cross-validated tuning of r, n and alpha."""

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

from prfclf.classify import PseudoLabelConfig, TrainingError, classifier_scores
from prfclf.evaluate import average_precision, mean_ap, relevant_count
from prfclf.rerank import (
    ALPHA_GRID,
    InterpolationParams,
    interpolate_rerank,
    interpolated_order,
    minmax_array,
    rerank_tag,
)

log = logging.getLogger(__name__)


class CVError(ValueError):
    pass


@dataclass(frozen=True)
class CVConfig:
    folds: int = 5
    r_values: tuple = (10, 20, 30)
    n_values: tuple = (100,)
    alphas: tuple = ALPHA_GRID

    def __post_init__(self):
        if self.folds < 2:
            raise CVError(f"need at least 2 folds, got {self.folds}")
        if not (self.r_values and self.n_values and self.alphas):
            raise CVError("every grid axis needs at least one value")

    def configurations(self):
        """All ``(r, n, alpha)`` grid points."""
        return list(itertools.product(self.r_values, self.n_values, self.alphas))


@dataclass(frozen=True)
class Fold:
    fold_id: int
    test_qids: tuple
    train_qids: tuple


@dataclass
class FoldChoice:
    fold_id: int
    r: int
    n: int
    alpha: float
    train_map: float
    test_qids: tuple


@dataclass
class CVResult:
    run: dict
    choices: list
    map: float
    per_topic_ap: dict


def make_folds(qids, k):
    """Sort ``qids`` and deal them round-robin into ``k`` folds."""
    qids = sorted(set(qids))
    if len(qids) < k:
        raise CVError(f"{len(qids)} topics cannot fill {k} folds")
    folds = []
    for i in range(k):
        test = tuple(qids[i::k])
        held = set(test)
        folds.append(Fold(i, test, tuple(q for q in qids if q not in held)))
    return folds


def _select(train_aps, configs):
    """Pick the grid point with the best mean train AP.

    Ties prefer larger alpha, then smaller r, then smaller n.
    """
    def key(cfg):
        r, n, alpha = cfg
        return (train_aps[cfg], alpha, -r, -n)

    return max(configs, key=key)


class _Reranker:
    """Caches classifier scores per (topic, r, n) across grid points and folds."""

    def __init__(self, index, base_run, qrels, kind, c, depth):
        self.index = index
        self.base_run = base_run
        self.qrels = qrels
        self.kind = kind
        self.c = c
        self.depth = depth
        self._scores = {}
        self._arrays = {}

    def classifier_scores(self, qid, r, n):
        key = (qid, r, n)
        if key not in self._scores:
            base = self.base_run[qid]
            try:
                self._scores[key] = classifier_scores(
                    self.index, base, PseudoLabelConfig(r, n), self.kind, self.c
                )
            except TrainingError as e:
                log.warning("passing topic %s through unchanged: %s", qid, e)
                self._scores[key] = None
        return self._scores[key]

    def rerank(self, qid, r, n, alpha):
        base = self.base_run[qid]
        if alpha == 1.0 or not base.hits:
            return base
        scores = self.classifier_scores(qid, r, n)
        if scores is None:
            return base
        tag = rerank_tag(base.tag, self.kind, PseudoLabelConfig(r, n), alpha)
        return interpolate_rerank(base, scores, InterpolationParams(alpha), tag)

    def _base_arrays(self, qid):
        if qid not in self._arrays:
            base = self.base_run[qid]
            judged = self.qrels.get(qid, {})
            rel = np.array([judged.get(h.docid, 0) > 0 for h in base.hits], dtype=bool)
            ret = minmax_array(np.array([h.score for h in base.hits])) if base.hits else None
            self._arrays[qid] = (rel, ret)
        return self._arrays[qid]

    def ap(self, qid, r, n, alpha):
        """AP of the reranked topic without materializing the ranked list.

        Matches ``average_precision(self.rerank(...))`` term for term.
        """
        base = self.base_run[qid]
        scores = None
        if alpha != 1.0 and base.hits:
            scores = self.classifier_scores(qid, r, n)
        if scores is None:
            return average_precision(base, self.qrels[qid], self.depth)
        rel, ret = self._base_arrays(qid)
        clf = minmax_array(np.array([scores[h.docid] for h in base.hits], dtype=float))
        _, order = interpolated_order(ret, clf, alpha)
        hits = np.flatnonzero(rel[order][: self.depth]).tolist()
        total = 0.0
        for found, pos in enumerate(hits, 1):
            total += found / (pos + 1)
        return total / relevant_count(self.qrels[qid])


def grid_search_cv(index, base_run, qrels, cfg=CVConfig(), kind="lr", c=1.0, depth=1000):
    """Tune ``(r, n, alpha)`` on each fold's training topics and rerank its test topics.

    Every base-run topic lands in exactly one test fold. Selection only
    reads training-topic AP; test-topic output is produced afterwards.
    """
    folds = make_folds(base_run, cfg.folds)
    configs = cfg.configurations()
    reranker = _Reranker(index, base_run, qrels, kind, c, depth)
    ap_cache = {}

    def train_map(config, train_qids):
        aps = []
        for qid in train_qids:
            key = (config, qid)
            if key not in ap_cache:
                ap_cache[key] = reranker.ap(qid, *config)
            aps.append(ap_cache[key])
        return math.fsum(aps) / len(aps) if aps else 0.0

    final = {}
    choices = []
    for fold in folds:
        evaluable = [q for q in fold.train_qids if relevant_count(qrels.get(q, {})) > 0]
        train_aps = {config: train_map(config, evaluable) for config in configs}
        r, n, alpha = _select(train_aps, configs)
        choices.append(FoldChoice(fold.fold_id, r, n, alpha, train_aps[(r, n, alpha)],
                                  fold.test_qids))
        for qid in fold.test_qids:
            final[qid] = reranker.rerank(qid, r, n, alpha)
    final = {q: final[q] for q in sorted(final)}
    m, aps = mean_ap(final, qrels, depth)
    return CVResult(final, choices, m, aps)
