"""Run evaluation: AP/MAP, paired t-test, Kendall's tau at cutoffs, per-topic deltas."""

import json
import logging
import math
from dataclasses import dataclass, field

log = logging.getLogger(__name__)

TAU_CUTOFFS = (10, 20, 50, 100, 200, 500, 1000)
DELTA_THRESHOLD = 0.01


class EvalError(ValueError):
    pass


def relevant_count(judgments):
    return sum(1 for g in judgments.values() if g > 0)


def average_precision(ranked, judgments, depth=1000):
    """AP of one ranking against ``judgments`` (docid -> grade, relevant iff > 0).

    Relevant documents that were not retrieved within ``depth`` count as zero
    precision. A topic without relevant documents scores 0.
    """
    n_rel = relevant_count(judgments)
    if n_rel == 0:
        return 0.0
    found = 0
    total = 0.0
    for i, hit in enumerate(ranked.hits[:depth], 1):
        if judgments.get(hit.docid, 0) > 0:
            found += 1
            total += found / i
    return total / n_rel


def per_topic_ap(run, qrels, depth=1000):
    """AP for every run topic that has at least one relevant judgment."""
    out = {}
    for qid in sorted(run):
        judgments = qrels.get(qid, {})
        if relevant_count(judgments) == 0:
            continue
        out[qid] = average_precision(run[qid], judgments, depth)
    return out


def mean_ap(run, qrels, depth=1000):
    """Return ``(MAP, {qid: AP})`` over evaluable topics."""
    aps = per_topic_ap(run, qrels, depth)
    if not aps:
        raise EvalError("no run topic has a relevant judgment")
    return math.fsum(aps.values()) / len(aps), aps


def _betacf(a, b, x, max_iter=500, eps=1e-16):
    # modified Lentz evaluation of the incomplete beta continued fraction
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > tiny else tiny)
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise EvalError(f"incomplete beta did not converge for a={a} b={b} x={x}")


def betainc(a, b, x):
    """Regularized incomplete beta function I_x(a, b)."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must be in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_two_tailed_p(t, df):
    """Two-tailed Student-t tail probability P(|T| >= |t|)."""
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    if math.isinf(t):
        return 0.0
    return betainc(df / 2.0, 0.5, df / (df + t * t))


def paired_t_test(ap_a, ap_b):
    """Paired two-tailed t-test of ``ap_b - ap_a`` over common topics.

    Returns ``(t, p)``; positive t means ``ap_b`` is higher on average.
    """
    common = sorted(set(ap_a) & set(ap_b))
    m = len(common)
    if m < 2:
        raise EvalError(f"need at least 2 common topics, got {m}")
    d = [ap_b[q] - ap_a[q] for q in common]
    mean = math.fsum(d) / m
    var = math.fsum((x - mean) ** 2 for x in d) / (m - 1)
    if var == 0.0:
        if mean == 0.0:
            return 0.0, 1.0
        log.warning("all %d paired differences equal %g; reporting p = 0", m, mean)
        return math.copysign(math.inf, mean), 0.0
    t = mean / math.sqrt(var / m)
    return t, t_two_tailed_p(t, m - 1)


def _count_inversions(seq):
    """Number of pairs i < j with seq[i] > seq[j], by merge sort."""
    seq = list(seq)
    width, n, inv = 1, len(seq), 0
    buf = [0] * n
    while width < n:
        for lo in range(0, n, 2 * width):
            mid, hi = min(lo + width, n), min(lo + 2 * width, n)
            i, j, k = lo, mid, lo
            while i < mid and j < hi:
                if seq[j] < seq[i]:
                    buf[k] = seq[j]
                    inv += mid - i
                    j += 1
                else:
                    buf[k] = seq[i]
                    i += 1
                k += 1
            buf[k:hi] = seq[i:mid] + seq[j:hi]
        seq, buf = buf, seq
        width *= 2
    return inv


def kendall_tau_at_k(base, final, k):
    """Kendall's tau over the base run's top-k documents.

    Pairs are ordered by base rank on one side and by rank in the full
    ``final`` run on the other. ``k`` larger than the base run is clipped.
    """
    k = min(k, len(base.hits))
    if k < 2:
        raise EvalError(f"topic {base.qid}: tau needs at least 2 documents")
    pos = {h.docid: h.rank for h in final.hits}
    try:
        seq = [pos[h.docid] for h in base.hits[:k]]
    except KeyError as e:
        raise EvalError(f"topic {base.qid}: {e.args[0]!r} missing from final run") from None
    pairs = k * (k - 1) // 2
    discordant = _count_inversions(seq)
    return (pairs - 2 * discordant) / pairs


@dataclass
class DeltaAnalysis:
    helped: int
    hurt: int
    unchanged: int
    table: list = field(default_factory=list)


def delta_analysis(ap_a, ap_b, threshold=DELTA_THRESHOLD):
    """Bucket common topics by AP change: helped / hurt strictly beyond ``threshold``."""
    common = sorted(set(ap_a) & set(ap_b))
    if not common:
        raise EvalError("no common topics")
    counts = {"helped": 0, "hurt": 0, "unchanged": 0}
    table = []
    for q in common:
        delta = ap_b[q] - ap_a[q]
        if delta > threshold:
            bucket = "helped"
        elif -delta > threshold:
            bucket = "hurt"
        else:
            bucket = "unchanged"
        counts[bucket] += 1
        table.append((q, ap_a[q], ap_b[q], delta, bucket))
    return DeltaAnalysis(table=table, **counts)


def tau_analysis(base_run, final_run, cutoffs=TAU_CUTOFFS):
    """``{k: {qid: tau}}`` for topics present in both runs with >= 2 documents."""
    out = {k: {} for k in cutoffs}
    for qid in sorted(set(base_run) & set(final_run)):
        base = base_run[qid]
        if len(base.hits) < 2:
            continue
        for k in cutoffs:
            out[k][qid] = kendall_tau_at_k(base, final_run[qid], k)
    return out


@dataclass
class EvalReport:
    per_topic_ap: dict
    map: float
    base_per_topic_ap: dict
    base_map: float
    helped: int
    hurt: int
    unchanged: int
    t_stat: float
    p_value: float
    tau_at_k: dict
    header: dict = field(default_factory=dict)

    def records(self):
        """Machine-readable records, one dict per line of JSON output."""
        yield {"record": "header", **self.header}
        for qid in sorted(self.per_topic_ap):
            yield {
                "record": "ap",
                "qid": qid,
                "base": self.base_per_topic_ap.get(qid),
                "final": self.per_topic_ap[qid],
            }
        yield {
            "record": "summary",
            "base_map": self.base_map,
            "map": self.map,
            "helped": self.helped,
            "hurt": self.hurt,
            "unchanged": self.unchanged,
            "t": self.t_stat,
            "p": self.p_value,
        }
        for k in sorted(self.tau_at_k):
            for qid, tau in sorted(self.tau_at_k[k].items()):
                yield {"record": "tau", "k": k, "qid": qid, "tau": tau}

    def to_jsonl(self):
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records())

    def to_table(self):
        lines = [f"# {k}: {v}" for k, v in sorted(self.header.items())]
        lines.append(f"{'qid':<12}{'base AP':>10}{'final AP':>10}{'delta':>10}")
        for qid in sorted(self.per_topic_ap):
            a = self.base_per_topic_ap.get(qid, 0.0)
            b = self.per_topic_ap[qid]
            lines.append(f"{qid:<12}{a:>10.4f}{b:>10.4f}{b - a:>+10.4f}")
        lines.append(f"{'MAP':<12}{self.base_map:>10.4f}{self.map:>10.4f}"
                     f"{self.map - self.base_map:>+10.4f}")
        lines.append(f"helped={self.helped} hurt={self.hurt} unchanged={self.unchanged}")
        lines.append(f"t={self.t_stat:.4f} p={self.p_value:.6g}")
        for k in sorted(self.tau_at_k):
            taus = sorted(self.tau_at_k[k].values())
            if taus:
                med = taus[len(taus) // 2] if len(taus) % 2 else \
                    (taus[len(taus) // 2 - 1] + taus[len(taus) // 2]) / 2
                lines.append(f"tau@{k}: median={med:.4f} min={taus[0]:.4f} n={len(taus)}")
        return "\n".join(lines) + "\n"


def compare_runs(base_run, final_run, qrels, cutoffs=TAU_CUTOFFS,
                 threshold=DELTA_THRESHOLD, depth=1000, header=None):
    """Full comparison of a reranked run against its base run."""
    base_map, base_ap = mean_ap(base_run, qrels, depth)
    final_map, final_ap = mean_ap(final_run, qrels, depth)
    delta = delta_analysis(base_ap, final_ap, threshold)
    t, p = paired_t_test(base_ap, final_ap)
    return EvalReport(
        per_topic_ap=final_ap,
        map=final_map,
        base_per_topic_ap=base_ap,
        base_map=base_map,
        helped=delta.helped,
        hurt=delta.hurt,
        unchanged=delta.unchanged,
        t_stat=t,
        p_value=p,
        tau_at_k=tau_analysis(base_run, final_run, cutoffs),
        header=dict(header or {}),
    )
