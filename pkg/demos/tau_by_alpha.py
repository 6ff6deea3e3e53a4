"""
How far does the reranker move a ranking?
=========================================

Sweep the interpolation weight for one topic and watch Kendall's tau to the
base ranking climb back to 1 as alpha reaches 1.
"""

from prfclf import (
    PseudoLabelConfig,
    QueryTopic,
    SynthSpec,
    analyze,
    build_index,
    generate_synthetic,
    kendall_tau_at_k,
    retrieve,
)
from prfclf.classify import classifier_scores
from prfclf.evaluate import average_precision
from prfclf.rerank import ALPHA_GRID, InterpolationParams, interpolate_rerank

coll = generate_synthetic(SynthSpec(seed=3, n_topics=5, n_background_docs=500, vocab_size=800))
idx = build_index(coll.docs)
qid, text = next(iter(coll.topics.items()))
base = retrieve(idx, [QueryTopic(qid, analyze(text))])[qid]

# the classifier is trained once; only the interpolation changes
scores = classifier_scores(idx, base, PseudoLabelConfig(10, 100), "lr")

print("alpha   tau@10  tau@100  AP")
for alpha in ALPHA_GRID:
    out = interpolate_rerank(base, scores, InterpolationParams(alpha))
    print(f"{alpha:5.1f}  {kendall_tau_at_k(base, out, 10):6.3f}  "
          f"{kendall_tau_at_k(base, out, 100):7.3f}  {average_precision(out, coll.qrels[qid]):.3f}")
