"""Score interpolation and the end-to-end per-topic reranking pipeline."""

import logging
from dataclasses import dataclass

import numpy as np

from prfclf.classify import (
    KINDS,
    PseudoLabelConfig,
    TrainingError,
    classifier_scores,
    minmax_normalize,  # noqa: F401  re-exported
)
from prfclf.retrieval import Hit, RankedList

log = logging.getLogger(__name__)

ALPHA_GRID = tuple(i / 10 for i in range(11))


class RerankError(ValueError):
    pass


@dataclass(frozen=True)
class InterpolationParams:
    alpha: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise RerankError(f"alpha must be in [0, 1], got {self.alpha}")


def rerank_tag(base_tag, kind, cfg, alpha):
    return f"{base_tag}+{kind}:r{cfg.r}:n{cfg.n}:a{alpha:.1f}"


def interpolate_rerank(base, clf_scores, params, tag=None):
    """Reorder ``base`` by ``alpha * norm(retrieval) + (1 - alpha) * norm(classifier)``.

    Both score lists are min-max normalized over the topic. Ties keep the
    base order. The output holds exactly the base docids.
    """
    if not base.hits:
        return base
    missing = [h.docid for h in base.hits if h.docid not in clf_scores]
    if missing:
        raise RerankError(f"topic {base.qid}: no classifier score for {missing[:5]}")
    ret = minmax_array(np.array([h.score for h in base.hits]))
    clf = minmax_array(np.array([clf_scores[h.docid] for h in base.hits], dtype=float))
    final, order = interpolated_order(ret, clf, params.alpha)
    hits = tuple(
        Hit(base.hits[i].docid, float(final[i]), rank)
        for rank, i in enumerate(order.tolist(), 1)
    )
    return RankedList._trusted(base.qid, hits, tag if tag is not None else base.tag)


def interpolated_order(ret, clf, alpha):
    """Interpolated scores and the base positions sorted by them.

    ``ret`` and ``clf`` are normalized arrays in base-rank order; the stable
    sort keeps base order among ties.
    """
    final = alpha * ret + (1.0 - alpha) * clf
    return final, np.argsort(-final, kind="stable")


def minmax_array(x):
    lo, hi = x.min(), x.max()
    if hi == lo:
        return np.full(len(x), 0.5)
    return (x - lo) / (hi - lo)


def rerank_topic(index, base, cfg, kind, params, c=1.0):
    """Rerank one topic. Untrainable topics come back unchanged."""
    if params.alpha == 1.0 or not base.hits:
        return base
    try:
        scores = classifier_scores(index, base, cfg, kind, c)
    except TrainingError as e:
        log.warning("passing topic %s through unchanged: %s", base.qid, e)
        return base
    return interpolate_rerank(base, scores, params, rerank_tag(base.tag, kind, cfg, params.alpha))


def prf_rerank_run(index, base_run, cfg=PseudoLabelConfig(), kind="lr",
                   params=InterpolationParams(), c=1.0):
    """Apply pseudo-relevance-feedback classification to every topic of a run.

    ``base_run`` maps qid -> :class:`RankedList`; the result uses the same
    keys, ordered by qid. With ``alpha == 1.0`` the base lists are returned
    as they are, scores and tags included.
    """
    if kind not in KINDS:
        raise RerankError(f"unknown classifier kind: {kind!r}")
    for qid, ranked in base_run.items():
        for h in ranked.hits:
            if h.docid not in index:
                raise RerankError(f"topic {qid}: docid {h.docid!r} not in the index")
    return {
        qid: rerank_topic(index, base_run[qid], cfg, kind, params, c)
        for qid in sorted(base_run)
    }
