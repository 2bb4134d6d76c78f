"""Deterministic text primitives shared by every other module.

Tokenization, sentence segmentation, n-gram multisets, Jaccard similarity,
word/syllable counting, compression ratio, and Gaussian binning of scalar
features. Everything here is a pure function of its inputs.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInput, InvalidConfig, InvalidOrder

# Punctuation marks that become standalone tokens.
PUNCT_CHARS = '.,;:!?"()'
# Terminal punctuation that can end a sentence.
TERMINALS = frozenset(".!?")
# Closing marks that stay attached to the sentence they terminate.
_TRAILERS = frozenset('")')

_TOKEN_RE = re.compile(r'[.,;:!?"()]|[^\s.,;:!?"()]+')

VOWELS = frozenset("aeiouy")


@dataclass(frozen=True)
class TokenSeq:
    """A tokenized text: lowercase tokens plus sentence-boundary structure.

    ``sentence_breaks`` lists the token indices where a new sentence begins
    (the first sentence starting at index 0 is implied).
    """

    tokens: tuple[str, ...]
    sentence_breaks: tuple[int, ...] = ()

    def __post_init__(self):
        if not self.tokens:
            raise EmptyInput("TokenSeq requires at least one token")
        prev = 0
        for b in self.sentence_breaks:
            if not (prev < b < len(self.tokens)):
                raise InvalidConfig(f"sentence_breaks must be strictly increasing and < {len(self.tokens)}")
            prev = b

    @property
    def num_sentences(self) -> int:
        return len(self.sentence_breaks) + 1

    def sentences(self) -> list[tuple[str, ...]]:
        """Token tuples of each sentence, in order."""
        bounds = [0, *self.sentence_breaks, len(self.tokens)]
        return [self.tokens[a:b] for a, b in zip(bounds, bounds[1:])]

    def text(self) -> str:
        return " ".join(self.tokens)


@dataclass(frozen=True)
class NGramMultiset:
    """Exact n-gram multiplicities for one token sequence at one order."""

    order: int
    counts: dict[tuple[str, ...], int] = field(default_factory=dict)

    def total(self) -> int:
        return sum(self.counts.values())


def is_word_token(token: str) -> bool:
    """A word token contains at least one alphanumeric character."""
    return any(ch.isalnum() for ch in token)


def word_count(seq: TokenSeq) -> int:
    """Number of word tokens, punctuation excluded."""
    return sum(1 for t in seq.tokens if is_word_token(t))


def word_tokens(seq: TokenSeq) -> list[str]:
    return [t for t in seq.tokens if is_word_token(t)]


def breaks_from_tokens(tokens: list[str] | tuple[str, ...]) -> tuple[int, ...]:
    """Sentence-break indices for a token list.

    A new sentence starts after a run of terminal punctuation, once any
    attached closing quote/paren has been consumed, provided more text
    follows.
    """
    breaks: list[int] = []
    i = 0
    n = len(tokens)
    while i < n:
        if tokens[i] in TERMINALS:
            j = i + 1
            while j < n and (tokens[j] in TERMINALS or tokens[j] in _TRAILERS):
                j += 1
            if j < n:
                breaks.append(j)
            i = j
        else:
            i += 1
    return tuple(breaks)


def from_tokens(tokens: list[str] | tuple[str, ...]) -> TokenSeq:
    """Build a TokenSeq from an existing token list, recomputing breaks."""
    toks = tuple(tokens)
    if not toks:
        raise EmptyInput("cannot build a TokenSeq from zero tokens")
    return TokenSeq(tokens=toks, sentence_breaks=breaks_from_tokens(toks))


def tokenize(text: str) -> TokenSeq:
    """Lowercase, split on whitespace, and detach punctuation into tokens.

    Raises EmptyInput for empty or whitespace-only text. Deterministic and
    idempotent on re-joined token text.
    """
    if not text or not text.strip():
        raise EmptyInput("cannot tokenize empty or whitespace-only text")
    tokens = _TOKEN_RE.findall(text.lower())
    if not tokens:
        raise EmptyInput("text contains no tokens")
    return from_tokens(tokens)


def ngrams(seq: TokenSeq, n: int) -> NGramMultiset:
    """Sliding-window n-grams; windows never cross sentence boundaries."""
    if not isinstance(n, int) or not 1 <= n <= 4:
        raise InvalidOrder(f"n-gram order must be in 1..4, got {n!r}")
    counts: Counter[tuple[str, ...]] = Counter()
    for sent in seq.sentences():
        for i in range(len(sent) - n + 1):
            counts[sent[i : i + n]] += 1
    return NGramMultiset(order=n, counts=dict(counts))


def jaccard(a: TokenSeq, b: TokenSeq) -> float:
    """Jaccard similarity over unique token types."""
    sa, sb = set(a.tokens), set(b.tokens)
    if not sa or not sb:
        raise EmptyInput("jaccard requires non-empty token sequences")
    return len(sa & sb) / len(sa | sb)


def compression_ratio(candidate: TokenSeq, source: TokenSeq) -> float:
    """Word-token count of candidate divided by that of source.

    Punctuation tokens are excluded from both counts.
    """
    src_words = word_count(source)
    if src_words == 0:
        raise EmptyInput("source has no word tokens")
    return word_count(candidate) / src_words


def syllables(word: str) -> int:
    """Heuristic syllable count: maximal vowel groups (aeiouy), minus one
    for a terminal silent 'e' when more than one group exists, minimum 1.

    Non-alphabetic tokens count as a single syllable.
    """
    if not word:
        raise EmptyInput("cannot count syllables of an empty token")
    w = word.lower()
    if not w.isalpha():
        return 1
    groups = 0
    in_group = False
    for ch in w:
        if ch in VOWELS:
            if not in_group:
                groups += 1
                in_group = True
        else:
            in_group = False
    if groups > 1 and w.endswith("e"):
        groups -= 1
    return max(groups, 1)


@dataclass(frozen=True)
class GaussianBinner:
    """Encodes a scalar as K Gaussian membership values over fixed centers."""

    centers: tuple[float, ...]
    sigma: float

    def __post_init__(self):
        if len(self.centers) < 2:
            raise InvalidConfig("GaussianBinner needs at least 2 centers")
        if any(b <= a for a, b in zip(self.centers, self.centers[1:])):
            raise InvalidConfig("centers must be strictly increasing")
        if not self.sigma > 0:
            raise InvalidConfig("sigma must be positive")

    @property
    def num_bins(self) -> int:
        return len(self.centers)


def binner_fit(values: list[float], num_bins: int) -> GaussianBinner:
    """Fit evenly spaced centers over [min, max] with sigma = spacing / 2.

    All-equal inputs fall back to a unit spread around the common value so
    centers stay distinct.
    """
    if num_bins < 2:
        raise InvalidConfig(f"need at least 2 bins, got {num_bins}")
    if not values:
        raise EmptyInput("cannot fit a binner to zero values")
    lo, hi = float(min(values)), float(max(values))
    centers = np.linspace(lo, hi, num_bins)
    sigma = 0.5 * float(centers[1] - centers[0])
    if lo == hi or not np.all(np.diff(centers) > 0) or not sigma > 0:
        # range too narrow to separate centers: unit spread around midpoint
        mid = 0.5 * (lo + hi)
        centers = np.linspace(mid - 0.5, mid + 0.5, num_bins)
        sigma = 0.5 * float(centers[1] - centers[0])
    return GaussianBinner(centers=tuple(float(c) for c in centers), sigma=float(sigma))


def binner_transform(binner: GaussianBinner, x: float) -> np.ndarray:
    """Vector of exp(-(x - c_k)^2 / (2 sigma^2)) per center, unnormalized."""
    centers = np.asarray(binner.centers, dtype=np.float64)
    d = x - centers
    return np.exp(-(d * d) / (2.0 * binner.sigma * binner.sigma))


def binner_transform_many(binner: GaussianBinner, xs: np.ndarray) -> np.ndarray:
    """Vectorized binner_transform: (N,) values to (N, K) memberships."""
    centers = np.asarray(binner.centers, dtype=np.float64)
    d = np.asarray(xs, dtype=np.float64)[:, None] - centers[None, :]
    return np.exp(-(d * d) / (2.0 * binner.sigma * binner.sigma))
