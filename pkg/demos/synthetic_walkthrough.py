"""
Reranking a planted-cluster collection
======================================

Generate a small synthetic collection, retrieve with BM25, rerank every
topic with a classifier trained on its own pseudo-labels, and compare.
"""

from prfclf import (
    BM25Params,
    InterpolationParams,
    PseudoLabelConfig,
    QueryTopic,
    SynthSpec,
    analyze,
    build_index,
    compare_runs,
    generate_synthetic,
    prf_rerank_run,
    retrieve,
)

# a quarter-size version of the default SynthSpec keeps this under a few seconds
coll = generate_synthetic(SynthSpec(seed=0, n_topics=12, n_background_docs=1200, vocab_size=1500))
print(len(coll.docs), "documents,", len(coll.topics), "topics")

idx = build_index(coll.docs)
topics = [QueryTopic(qid, analyze(text)) for qid, text in coll.topics.items()]
base = retrieve(idx, topics, BM25Params())

# top 10 hits are pseudo-positive, bottom 100 pseudo-negative
final = prf_rerank_run(idx, base, PseudoLabelConfig(10, 100), "lr", InterpolationParams(0.3))

report = compare_runs(base, final, coll.qrels, cutoffs=(10, 50, 100))
print(report.to_table())
