"""Text analysis: lowercase, split on non-alphanumerics, stop, stem."""

import re
from functools import lru_cache

from nltk.stem.porter import PorterStemmer

# The 33-word English stop set used by Lucene's StandardAnalyzer.
STOPWORDS = frozenset(
    """a an and are as at be but by for if in into is it no not of on or
    such that the their then there these they this to was will with""".split()
)

MAX_DIGIT_RUN = 16

_SPLIT = re.compile(r"[\W_]+")
_stemmer = PorterStemmer(mode=PorterStemmer.ORIGINAL_ALGORITHM)


@lru_cache(maxsize=1 << 18)
def stem(word):
    """Porter-stem ``word`` until it stops changing.

    A single Porter pass is not idempotent ("agreed" -> "agre" -> "agr"),
    so the stem is iterated to a fixed point. Each pass either shortens
    the word or leaves it alone, which bounds the loop.
    """
    while True:
        out = _stemmer.stem(word)
        if out == word:
            return out
        word = out


def analyze(text):
    """Turn raw text into a list of index terms.

    >>> analyze("The RANKING")
    ['rank']
    """
    tokens = []
    for tok in _SPLIT.split(text.lower()):
        if not tok or tok in STOPWORDS:
            continue
        if tok.isdigit() and len(tok) > MAX_DIGIT_RUN:
            continue
        term = stem(tok)
        if term and term not in STOPWORDS:
            tokens.append(term)
    return tokens
