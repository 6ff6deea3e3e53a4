"""In-memory inverted index, tf-idf document vectors and the on-disk snapshot."""

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from types import MappingProxyType

import numpy as np
import scipy.sparse as sp

from prfclf.analysis import analyze

MAGIC = b"PRFIDX1\n"


class CorpusError(ValueError):
    """Raised for corpus problems: duplicate ids, unknown ids, bad snapshots."""


@dataclass(frozen=True)
class Document:
    docid: str
    text: str

    def __post_init__(self):
        if not self.docid:
            raise CorpusError("document id must be non-empty")


@dataclass(frozen=True)
class CollectionStats:
    n_docs: int
    avgdl: float
    total_terms: int


@dataclass(frozen=True)
class FeatureVector:
    """Sparse term -> weight map. Only non-zero weights are stored."""

    weights: dict = field(default_factory=dict)

    def norm(self):
        return math.sqrt(sum(w * w for w in self.weights.values()))

    def dot(self, other):
        # iterate over the smaller map
        a, b = self.weights, other
        if isinstance(other, FeatureVector):
            b = other.weights
        if len(a) > len(b):
            a, b = b, a
        return sum(w * b.get(t, 0.0) for t, w in a.items())

    def __len__(self):
        return len(self.weights)


class InvertedIndex:
    """Immutable postings, document lengths and collection statistics.

    Build one with :func:`build_index` or :meth:`InvertedIndex.load`.
    Postings lists hold ``(docid, tf)`` pairs sorted by docid.
    """

    def __init__(self, postings, doc_lengths):
        self._postings = MappingProxyType(
            {t: tuple(sorted(p)) for t, p in sorted(postings.items())}
        )
        self._doc_lengths = MappingProxyType(dict(sorted(doc_lengths.items())))
        self._df = MappingProxyType({t: len(p) for t, p in self._postings.items()})
        total = sum(self._doc_lengths.values())
        n = len(self._doc_lengths)
        avgdl = total / n if n and total else 1.0
        self.stats = CollectionStats(n_docs=n, avgdl=avgdl, total_terms=total)

        forward = {d: {} for d in self._doc_lengths}
        for term, plist in self._postings.items():
            for docid, tf in plist:
                forward[docid][term] = tf
        self._forward = MappingProxyType(
            {d: MappingProxyType(tfs) for d, tfs in forward.items()}
        )
        self._vectors = {}
        self._term_ids = {t: i for i, t in enumerate(self._postings)}
        self._rows = {}
        self._arrays = {}
        self._docids = tuple(self._doc_lengths)
        self._ordinal = {d: i for i, d in enumerate(self._doc_lengths)}
        self._dl_array = np.array(list(self._doc_lengths.values()), dtype=float)

    @property
    def postings(self):
        return self._postings

    @property
    def doc_lengths(self):
        return self._doc_lengths

    @property
    def df(self):
        return self._df

    @property
    def docids(self):
        return self._docids

    def __contains__(self, docid):
        return docid in self._doc_lengths

    def __len__(self):
        return self.stats.n_docs

    def doc_terms(self, docid):
        """Term -> tf map for one document."""
        try:
            return self._forward[docid]
        except KeyError:
            raise CorpusError(f"unknown docid: {docid!r}") from None

    def doc_length(self, docid):
        try:
            return self._doc_lengths[docid]
        except KeyError:
            raise CorpusError(f"unknown docid: {docid!r}") from None

    def tf(self, term, docid):
        return self.doc_terms(docid).get(term, 0)

    def idf(self, term):
        return idf(self, term)

    def doc_vector(self, docid):
        vec = self._vectors.get(docid)
        if vec is None:
            vec = self._vectors[docid] = doc_vector(self, docid)
        return vec

    def postings_arrays(self, term):
        """``(doc ordinals, tfs)`` arrays for a term; ordinals follow sorted docid order."""
        arrays = self._arrays.get(term)
        if arrays is None:
            plist = self._postings.get(term, ())
            arrays = self._arrays[term] = (
                np.array([self._ordinal[d] for d, _ in plist], dtype=np.int64),
                np.array([tf for _, tf in plist], dtype=float),
            )
        return arrays

    @property
    def length_array(self):
        return self._dl_array

    def _row(self, docid):
        row = self._rows.get(docid)
        if row is None:
            vec = self.doc_vector(docid)
            items = sorted((self._term_ids[t], w) for t, w in vec.weights.items())
            row = self._rows[docid] = (
                np.array([i for i, _ in items], dtype=np.int64),
                np.array([w for _, w in items]),
            )
        return row

    def doc_matrix(self, docids):
        """CSR matrix of the documents' tf-idf vectors, columns indexed by term."""
        rows = [self._row(d) for d in docids]
        indptr = np.zeros(len(rows) + 1, dtype=np.int64)
        np.cumsum([len(r[0]) for r in rows], out=indptr[1:])
        if rows:
            indices = np.concatenate([r[0] for r in rows])
            data = np.concatenate([r[1] for r in rows])
        else:
            indices, data = np.zeros(0, dtype=np.int64), np.zeros(0)
        return sp.csr_matrix((data, indices, indptr), shape=(len(rows), len(self._term_ids)))

    def __eq__(self, other):
        if not isinstance(other, InvertedIndex):
            return NotImplemented
        return (
            dict(self._postings) == dict(other._postings)
            and dict(self._doc_lengths) == dict(other._doc_lengths)
        )

    __hash__ = None

    # snapshot layout, all integers unsigned LEB128 varints:
    #   MAGIC
    #   n_docs, then per doc (sorted by id): len(id), id utf-8, doc_length
    #   n_terms, then per term (sorted): len(term), term utf-8, df,
    #     then df pairs of (doc ordinal delta, tf)
    def save(self, path):
        out = bytearray(MAGIC)
        order = {}
        _put_varint(out, len(self._doc_lengths))
        for i, (docid, dl) in enumerate(self._doc_lengths.items()):
            order[docid] = i
            _put_str(out, docid)
            _put_varint(out, dl)
        _put_varint(out, len(self._postings))
        for term, plist in self._postings.items():
            _put_str(out, term)
            _put_varint(out, len(plist))
            prev = 0
            for docid, tf in plist:
                ordinal = order[docid]
                _put_varint(out, ordinal - prev)
                _put_varint(out, tf)
                prev = ordinal
        with open(path, "wb") as f:
            f.write(bytes(out))

    @classmethod
    def load(cls, path):
        with open(path, "rb") as f:
            buf = f.read()
        if not buf.startswith(MAGIC):
            raise CorpusError(f"{path}: not an index snapshot (bad magic)")
        try:
            pos = len(MAGIC)
            n_docs, pos = _get_varint(buf, pos)
            ids, doc_lengths = [], {}
            for _ in range(n_docs):
                docid, pos = _get_str(buf, pos)
                dl, pos = _get_varint(buf, pos)
                ids.append(docid)
                doc_lengths[docid] = dl
            n_terms, pos = _get_varint(buf, pos)
            postings = {}
            for _ in range(n_terms):
                term, pos = _get_str(buf, pos)
                df, pos = _get_varint(buf, pos)
                plist, ordinal = [], 0
                for _ in range(df):
                    delta, pos = _get_varint(buf, pos)
                    tf, pos = _get_varint(buf, pos)
                    ordinal += delta
                    plist.append((ids[ordinal], tf))
                postings[term] = plist
        except (IndexError, UnicodeDecodeError) as e:
            raise CorpusError(f"{path}: truncated or corrupt snapshot") from e
        if pos != len(buf):
            raise CorpusError(f"{path}: trailing bytes in snapshot")
        return cls(postings, doc_lengths)


def _put_varint(out, value):
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return


def _get_varint(buf, pos):
    shift = result = 0
    while True:
        byte = buf[pos]
        pos += 1
        result |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return result, pos
        shift += 7


def _put_str(out, s):
    data = s.encode("utf-8")
    _put_varint(out, len(data))
    out += data


def _get_str(buf, pos):
    n, pos = _get_varint(buf, pos)
    if pos + n > len(buf):
        raise IndexError("string past end of buffer")
    return buf[pos:pos + n].decode("utf-8"), pos + n


def build_index(docs, analyzer=analyze):
    """Index an iterable of :class:`Document`.

    Raises :class:`CorpusError` naming the first duplicated docid.
    """
    postings = {}
    doc_lengths = {}
    for doc in docs:
        if doc.docid in doc_lengths:
            raise CorpusError(f"duplicate docid: {doc.docid!r}")
        tokens = analyzer(doc.text)
        doc_lengths[doc.docid] = len(tokens)
        for term, tf in Counter(tokens).items():
            postings.setdefault(term, []).append((doc.docid, tf))
    if not doc_lengths:
        raise CorpusError("cannot build an index from an empty corpus")
    return InvertedIndex(postings, doc_lengths)


def idf(index, term):
    """BM25 idf, ln(1 + (N - df + 0.5) / (df + 0.5)); df is 0 for unseen terms."""
    n = index.stats.n_docs
    df = index.df.get(term, 0)
    return math.log(1.0 + (n - df + 0.5) / (df + 0.5))


def doc_vector(index, docid):
    """L2-normalized tf-idf vector of an indexed document.

    Empty documents give an all-zero (empty) vector.
    """
    raw = {}
    for term, tf in index.doc_terms(docid).items():
        w = tf * idf(index, term)
        if w != 0.0:
            raw[term] = w
    norm = math.sqrt(sum(w * w for w in raw.values()))
    if norm == 0.0:
        return FeatureVector({})
    return FeatureVector({t: w / norm for t, w in raw.items()})


def read_corpus(path):
    """Yield :class:`Document` from a JSON-lines file with ``id``/``contents``."""
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                yield Document(str(obj["id"]), obj["contents"])
            except (ValueError, KeyError, TypeError) as e:
                raise CorpusError(f"{path}:{lineno}: bad corpus record ({e})") from e


def write_corpus(docs, path):
    with open(path, "w", encoding="utf-8") as f:
        for doc in docs:
            f.write(json.dumps({"id": doc.docid, "contents": doc.text}, ensure_ascii=False))
            f.write("\n")

