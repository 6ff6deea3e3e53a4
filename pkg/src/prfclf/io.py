"""Readers and writers for topics, TREC run files and qrels."""

import logging

from prfclf.analysis import analyze
from prfclf.retrieval import Hit, QueryTopic, RankedList, RetrievalError

log = logging.getLogger(__name__)


class FormatError(ValueError):
    pass


def read_topics(path, analyzer=analyze):
    """Read ``qid<TAB>query text`` lines into analyzed :class:`QueryTopic` objects."""
    topics = []
    seen = set()
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if "\t" not in line:
                raise FormatError(f"{path}:{lineno}: expected 'qid<TAB>query'")
            qid, text = line.split("\t", 1)
            qid = qid.strip()
            if not qid:
                raise FormatError(f"{path}:{lineno}: empty topic id")
            if qid in seen:
                raise FormatError(f"{path}:{lineno}: duplicate topic id {qid}")
            seen.add(qid)
            topics.append(QueryTopic(qid, analyzer(text)))
    return topics


def write_topics(topics, path):
    """Write ``{qid: query text}`` as a topic file, ordered by qid."""
    with open(path, "w", encoding="utf-8") as f:
        for qid in sorted(topics):
            f.write(f"{qid}\t{topics[qid]}\n")


def format_run(run):
    lines = []
    for qid in sorted(run):
        for h in run[qid].hits:
            lines.append(f"{qid} Q0 {h.docid} {h.rank} {h.score:.6f} {run[qid].tag}\n")
    return "".join(lines)


def write_run(run, path):
    """Write ``{qid: RankedList}`` in six-column TREC format, topics by qid."""
    with open(path, "w", encoding="utf-8") as f:
        f.write(format_run(run))


def read_run(path):
    """Parse a TREC run file; ranks must run 1..n per topic with scores non-increasing."""
    rows = {}
    tags = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            fields = line.split()
            if len(fields) != 6:
                raise FormatError(f"{path}:{lineno}: expected 6 fields, got {len(fields)}")
            qid, _, docid, rank, score, tag = fields
            try:
                hit = Hit(docid, float(score), int(rank))
            except ValueError:
                raise FormatError(f"{path}:{lineno}: bad rank or score") from None
            hits = rows.setdefault(qid, [])
            if hit.rank != len(hits) + 1:
                raise FormatError(
                    f"{path}:{lineno}: topic {qid} rank {hit.rank}, expected {len(hits) + 1}"
                )
            if hits and hit.score > hits[-1].score:
                raise FormatError(f"{path}:{lineno}: topic {qid} scores increase at rank {hit.rank}")
            hits.append(hit)
            tags.setdefault(qid, tag)
    try:
        return {qid: RankedList(qid, tuple(rows[qid]), tags[qid]) for qid in sorted(rows)}
    except RetrievalError as e:
        raise FormatError(f"{path}: {e}") from None


def read_qrels(path):
    """Read ``qid 0 docid grade`` lines into ``{qid: {docid: grade}}``.

    A repeated (qid, docid) pair keeps the last grade and logs a warning.
    """
    qrels = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            fields = line.split()
            if len(fields) != 4:
                raise FormatError(f"{path}:{lineno}: expected 4 fields, got {len(fields)}")
            qid, _, docid, grade = fields
            try:
                grade = int(grade)
            except ValueError:
                raise FormatError(f"{path}:{lineno}: non-integer grade {grade!r}") from None
            judged = qrels.setdefault(qid, {})
            if docid in judged:
                log.warning("%s:%d: duplicate judgment for %s %s, keeping the last",
                            path, lineno, qid, docid)
            judged[docid] = grade
    return qrels


def write_qrels(qrels, path):
    with open(path, "w", encoding="utf-8") as f:
        for qid in sorted(qrels):
            for docid in sorted(qrels[qid]):
                f.write(f"{qid} 0 {docid} {qrels[qid][docid]}\n")
