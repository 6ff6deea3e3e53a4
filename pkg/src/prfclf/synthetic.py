"""Synthetic test collections with planted topical clusters.

Each topic owns a disjoint pool of 20 terms and a two-term query drawn from
it. Relevant documents mix pool terms with background vocabulary. Every
topic also gets a set of distractor documents: background text that mentions
the query terms about as often as the relevant documents do, plus terms from
a second pool of "off-topic" words shared by those distractors. Bag-of-words
BM25 cannot tell the two groups apart from the query terms alone, while the
rest of each document's vocabulary separates them.
"""

import json
import os
from dataclasses import dataclass

import numpy as np

from prfclf.index import Document, write_corpus
from prfclf.io import write_qrels, write_topics

POOL_SIZE = 20
QUERY_TERMS = 2


class SynthError(ValueError):
    pass


@dataclass(frozen=True)
class SynthSpec:
    seed: int = 0
    n_topics: int = 50
    docs_per_topic: int = 20
    n_background_docs: int = 5000
    vocab_size: int = 5000
    relevance_signal: float = 0.7
    doc_length: int = 80
    # share of a distractor's tokens drawn from its topic's off-topic pool
    distractor_signal: float = 0.3
    # query-term frequency in distractors relative to relevant documents
    distractor_query_rate: float = 0.7
    zipf_exponent: float = 1.0

    def __post_init__(self):
        for name in ("n_topics", "docs_per_topic", "n_background_docs", "vocab_size",
                     "doc_length"):
            if getattr(self, name) < 1:
                raise SynthError(f"{name} must be >= 1")
        if not 0.0 < self.relevance_signal <= 1.0:
            raise SynthError("relevance_signal must be in (0, 1]")
        if not 0.0 <= self.distractor_signal < 1.0:
            raise SynthError("distractor_signal must be in [0, 1)")


@dataclass
class SyntheticCollection:
    spec: SynthSpec
    docs: list
    topics: dict
    qrels: dict

    def write(self, directory):
        """Write ``corpus.jsonl``, ``topics.tsv``, ``qrels.txt`` and ``spec.json``."""
        os.makedirs(directory, exist_ok=True)
        write_corpus(self.docs, os.path.join(directory, "corpus.jsonl"))
        write_topics(self.topics, os.path.join(directory, "topics.tsv"))
        write_qrels(self.qrels, os.path.join(directory, "qrels.txt"))
        with open(os.path.join(directory, "spec.json"), "w", encoding="utf-8") as f:
            json.dump(self.spec.__dict__, f, sort_keys=True, indent=2)
            f.write("\n")


def _word(i):
    # digits-final words pass through the analyzer untouched
    return f"w{i:05d}"


def generate_synthetic(spec=SynthSpec()):
    """Build a corpus, topics and qrels; identical output for identical specs."""
    pools_needed = 2 * spec.n_topics * POOL_SIZE
    n_background = spec.vocab_size - pools_needed
    if n_background < POOL_SIZE:
        raise SynthError(
            f"vocab_size {spec.vocab_size} too small for {spec.n_topics} topic pools"
        )
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    vocab = [_word(i) for i in rng.permutation(spec.vocab_size)]
    pools = [vocab[t * POOL_SIZE:(t + 1) * POOL_SIZE] for t in range(spec.n_topics)]
    off = spec.n_topics * POOL_SIZE
    off_pools = [vocab[off + t * POOL_SIZE: off + (t + 1) * POOL_SIZE]
                 for t in range(spec.n_topics)]
    background = vocab[pools_needed:]
    zipf = 1.0 / np.arange(1, n_background + 1) ** spec.zipf_exponent
    zipf /= zipf.sum()

    def lengths(k):
        return rng.integers(spec.doc_length // 2, spec.doc_length * 3 // 2 + 1, size=k)

    def background_tokens(k):
        return [background[i] for i in rng.choice(n_background, size=k, p=zipf)]

    def mixed(pool, signal, length):
        from_pool = rng.random(length) < signal
        n_pool = int(from_pool.sum())
        words = background_tokens(length - n_pool)
        words += [pool[i] for i in rng.integers(0, len(pool), size=n_pool)]
        rng.shuffle(words)
        return words

    per_topic_bg = [spec.n_background_docs // spec.n_topics] * spec.n_topics
    for t in range(spec.n_background_docs % spec.n_topics):
        per_topic_bg[t] += 1

    width = len(str(spec.n_topics))
    topics, qrels, texts = {}, {}, []
    for t in range(spec.n_topics):
        qid = f"{t + 1:0{width}d}"
        pool = pools[t]
        query = [pool[i] for i in sorted(rng.choice(POOL_SIZE, QUERY_TERMS, replace=False))]
        topics[qid] = " ".join(query)
        qrels[qid] = {}
        for length in lengths(spec.docs_per_topic):
            texts.append((qid, 1, mixed(pool, spec.relevance_signal, int(length))))
        expected_tf = (spec.distractor_query_rate * spec.relevance_signal
                       * spec.doc_length / POOL_SIZE)
        for length in lengths(per_topic_bg[t]):
            words = mixed(off_pools[t], spec.distractor_signal, int(length))
            for term in query:
                words += [term] * int(rng.poisson(expected_tf))
            rng.shuffle(words)
            texts.append((qid, 0, words))

    order = rng.permutation(len(texts))
    id_width = len(str(len(texts)))
    docs = []
    for new_id, i in enumerate(order):
        qid, grade, words = texts[i]
        docid = f"d{new_id:0{id_width}d}"
        qrels[qid][docid] = grade
        docs.append(Document(docid, " ".join(words)))
    docs.sort(key=lambda d: d.docid)
    return SyntheticCollection(spec, docs, topics, qrels)
