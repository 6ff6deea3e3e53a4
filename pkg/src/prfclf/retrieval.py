"""BM25 ranking and RM3 query expansion over an :class:`InvertedIndex`."""

from collections import Counter
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from prfclf.index import idf


class RetrievalError(ValueError):
    pass


@dataclass(frozen=True)
class QueryTopic:
    qid: str
    terms: tuple

    def __post_init__(self):
        if not self.qid:
            raise RetrievalError("topic id must be non-empty")
        object.__setattr__(self, "terms", tuple(self.terms))

    def bag(self):
        """Term -> multiplicity, the weighting used for a bag-of-words run."""
        return dict(Counter(self.terms))

    def mle(self):
        n = len(self.terms)
        return {t: c / n for t, c in Counter(self.terms).items()}


@dataclass(frozen=True)
class BM25Params:
    k1: float = 0.9
    b: float = 0.4

    def __post_init__(self):
        if self.k1 < 0:
            raise RetrievalError(f"k1 must be >= 0, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise RetrievalError(f"b must be in [0, 1], got {self.b}")


@dataclass(frozen=True)
class RM3Params:
    fb_docs: int = 10
    fb_terms: int = 10
    orig_weight: float = 0.5

    def __post_init__(self):
        if self.fb_docs < 1 or self.fb_terms < 1:
            raise RetrievalError("fb_docs and fb_terms must be >= 1")
        if not 0.0 <= self.orig_weight <= 1.0:
            raise RetrievalError(f"orig_weight must be in [0, 1], got {self.orig_weight}")


class Hit(NamedTuple):
    docid: str
    score: float
    rank: int


@dataclass(frozen=True)
class RankedList:
    """One topic's ranking. Ranks run 1..len with scores non-increasing."""

    qid: str
    hits: tuple
    tag: str = "run"

    def __post_init__(self):
        hits = tuple(Hit(*h) for h in self.hits)
        object.__setattr__(self, "hits", hits)
        seen = set()
        for i, h in enumerate(hits):
            if h.rank != i + 1:
                raise RetrievalError(f"topic {self.qid}: rank {h.rank} at position {i + 1}")
            if i and h.score > hits[i - 1].score:
                raise RetrievalError(f"topic {self.qid}: scores increase at rank {h.rank}")
            if h.docid in seen:
                raise RetrievalError(f"topic {self.qid}: duplicate docid {h.docid}")
            seen.add(h.docid)

    @classmethod
    def _trusted(cls, qid, hits, tag):
        # for hits already built in rank order by this package
        obj = object.__new__(cls)
        object.__setattr__(obj, "qid", qid)
        object.__setattr__(obj, "hits", hits)
        object.__setattr__(obj, "tag", tag)
        return obj

    @classmethod
    def from_scores(cls, qid, scores, tag="run", k=None):
        """Rank ``(docid, score)`` pairs by score desc, then docid asc."""
        items = sorted(scores.items() if hasattr(scores, "items") else scores,
                       key=lambda p: (-p[1], p[0]))
        if k is not None:
            items = items[:k]
        if len({d for d, _ in items}) != len(items):
            raise RetrievalError(f"topic {qid}: duplicate docids")
        return cls._trusted(qid, tuple(Hit(d, s, i + 1) for i, (d, s) in enumerate(items)), tag)

    def __len__(self):
        return len(self.hits)

    def __iter__(self):
        return iter(self.hits)

    @property
    def docids(self):
        return [h.docid for h in self.hits]

    def scores(self):
        return {h.docid: h.score for h in self.hits}


def bm25_tf(tf, dl, avgdl, params):
    """Length-normalized tf saturation, tf / (tf + k1 (1 - b + b dl / avgdl))."""
    return tf / (tf + params.k1 * (1.0 - params.b + params.b * dl / avgdl))


def bm25_term_score(index, params, term, docid):
    """Lucene-style BM25 contribution of one term, without the (k1 + 1) factor."""
    dl = index.doc_length(docid)
    tf = index.tf(term, docid)
    if tf == 0:
        return 0.0
    return idf(index, term) * bm25_tf(tf, dl, index.stats.avgdl, params)


def search(index, query, params=BM25Params(), k=1000, qid="q", tag="bm25"):
    """Score documents matching ``query`` (term -> weight) and keep the top ``k``.

    A document's score is the weighted sum of its BM25 term scores; only
    documents containing at least one positively weighted term are ranked.
    """
    if k < 1:
        raise RetrievalError("depth k must be >= 1")
    terms = [(t, w) for t, w in query.items() if w > 0]
    if not terms:
        raise RetrievalError(f"topic {qid}: empty query")
    k1, b = params.k1, params.b
    avgdl = index.stats.avgdl
    lengths = index.length_array
    acc = np.zeros(len(lengths))
    hit = np.zeros(len(lengths), dtype=bool)
    for term, w in terms:
        ords, tfs = index.postings_arrays(term)
        if not len(ords):
            continue
        wi = w * idf(index, term)
        acc[ords] += wi * tfs / (tfs + k1 * (1.0 - b + b * lengths[ords] / avgdl))
        hit[ords] = True
    matched = np.flatnonzero(hit)
    # ordinals follow docid order, so this is score desc then docid asc
    order = matched[np.lexsort((matched, -acc[matched]))][:k]
    docids = index.docids
    hits = tuple(
        Hit(docids[i], float(acc[i]), rank) for rank, i in enumerate(order.tolist(), 1)
    )
    return RankedList._trusted(qid, hits, tag)


def rm1_estimate(index, base, fb_docs=10):
    """Relevance-model term distribution from the top ``fb_docs`` of ``base``.

    Feedback documents are weighted by their normalized retrieval scores
    and contribute unsmoothed tf/dl term probabilities.
    """
    feedback = base.hits[:fb_docs]
    if not feedback:
        raise RetrievalError(f"topic {base.qid}: empty feedback set")
    if any(h.score < 0 for h in feedback):
        raise RetrievalError(f"topic {base.qid}: negative feedback scores")
    total = sum(h.score for h in feedback)
    if total <= 0:
        raise RetrievalError(f"topic {base.qid}: feedback scores are all zero")
    dist = {}
    for h in feedback:
        omega = h.score / total
        dl = index.doc_length(h.docid)
        if dl == 0:
            continue
        for term, tf in index.doc_terms(h.docid).items():
            dist[term] = dist.get(term, 0.0) + omega * tf / dl
    z = sum(dist.values())
    return {t: p / z for t, p in dist.items()}


def rm3_expand(original, rm1, params=RM3Params()):
    """Interpolate the original query MLE with the truncated relevance model."""
    top = sorted(rm1.items(), key=lambda p: (-p[1], p[0]))[: params.fb_terms]
    z = sum(p for _, p in top)
    lam = params.orig_weight
    out = {}
    if z > 0 and lam < 1.0:
        for t, p in top:
            out[t] = (1.0 - lam) * p / z
    if lam > 0.0:
        for t, p in original.mle().items():
            out[t] = out.get(t, 0.0) + lam * p
    return {t: w for t, w in sorted(out.items()) if w > 0}


def rm3_search(index, topic, bm25=BM25Params(), rm3=RM3Params(), k=1000, tag="bm25+rm3"):
    first = search(index, topic.bag(), bm25, k=rm3.fb_docs, qid=topic.qid)
    if not first.hits:
        return RankedList(topic.qid, (), tag)
    expanded = rm3_expand(topic, rm1_estimate(index, first, rm3.fb_docs), rm3)
    return search(index, expanded, bm25, k=k, qid=topic.qid, tag=tag)


def retrieve(index, topics, bm25=BM25Params(), rm3=None, k=1000, tag=None):
    """Base run for every topic: bag-of-words BM25, or BM25+RM3 when ``rm3`` is given.

    Returns ``{qid: RankedList}`` ordered by qid. Topics whose analyzed
    query is empty get an empty list.
    """
    if tag is None:
        tag = "bm25" if rm3 is None else "bm25+rm3"
    run = {}
    for topic in sorted(topics, key=lambda t: t.qid):
        if not topic.terms:
            run[topic.qid] = RankedList(topic.qid, (), tag)
        elif rm3 is None:
            run[topic.qid] = search(index, topic.bag(), bm25, k=k, qid=topic.qid, tag=tag)
        else:
            run[topic.qid] = rm3_search(index, topic, bm25, rm3, k=k, tag=tag)
    return run

