"""Synthetic corpora with known structure.

Small generated datasets where the right behavior is known by construction:
a substitution task for exercising copy control, identity pairs for copy
learning, multi-clause sentences for split/delete training, and scored
candidate sets with a planted feature ordering for ranker training. All
generators are deterministic in their seed.
"""

from __future__ import annotations

import numpy as np

from . import textcore as tc
from .structgen import Candidate, CandidateSet
from .textcore import TokenSeq, tokenize

# Substitution task: each vocabulary word has a fixed partner and a fixed
# substitution propensity. An example keeps a word when its propensity is
# below the example's cutoff, so examples with high cutoffs copy almost
# everything and the kept fraction is the natural control signal.

NUM_WORD_PAIRS = 40


def _word_pairs(num_pairs: int = NUM_WORD_PAIRS) -> list[tuple[str, str, float]]:
    return [(f"orig{i:02d}", f"swap{i:02d}", (i + 0.5) / num_pairs)
            for i in range(num_pairs)]


def substitution_pair(rng: np.random.Generator, pairs=None) -> tuple[TokenSeq, TokenSeq]:
    pairs = pairs or _word_pairs()
    length = int(rng.integers(6, 13))
    chosen = rng.choice(len(pairs), size=min(length, len(pairs)), replace=False)
    cutoff = rng.uniform(0.05, 0.95)
    src, ref = [], []
    for idx in chosen:
        orig, swap, propensity = pairs[idx]
        src.append(orig)
        ref.append(orig if propensity < cutoff else swap)
    return tokenize(" ".join(src) + " ."), tokenize(" ".join(ref) + " .")


def substitution_corpus(n: int, seed: int) -> list[tuple[TokenSeq, TokenSeq]]:
    rng = np.random.default_rng(seed)
    pairs = _word_pairs()
    return [substitution_pair(rng, pairs) for _ in range(n)]


def copycat_corpus(n: int, seed: int, vocab_size: int = 20,
                   min_len: int = 4, max_len: int = 9) -> list[tuple[TokenSeq, TokenSeq]]:
    """Reference equals input; learning it means learning to copy."""
    rng = np.random.default_rng(seed)
    words = [f"tok{i:02d}" for i in range(vocab_size)]
    out = []
    for _ in range(n):
        length = int(rng.integers(min_len, max_len + 1))
        chosen = rng.choice(vocab_size, size=min(length, vocab_size), replace=False)
        seq = tokenize(" ".join(words[i] for i in chosen) + " .")
        out.append((seq, seq))
    return out


# Multi-clause sentences assembled from closed slot sets. The clause
# structure matches what the rule engine can decompose, so the same
# generator serves split/delete training and control-mode tests.

_NAMES = ["anna", "bruno", "carla", "deniz", "elif", "felix", "gita", "hugo"]
_PLACES = ["athens", "bergen", "cusco", "dakar", "espoo", "fargo"]
_VERBS = ["lived", "worked", "studied", "taught", "painted", "sang"]
_ADJS = ["old", "young", "quiet", "famous", "patient", "careful"]
_THINGS = ["race", "prize", "match", "award", "medal", "debate"]


def clause_example(rng: np.random.Generator) -> tuple[TokenSeq, TokenSeq]:
    name = _NAMES[rng.integers(len(_NAMES))]
    place = _PLACES[rng.integers(len(_PLACES))]
    verb = _VERBS[rng.integers(len(_VERBS))]
    adj = _ADJS[rng.integers(len(_ADJS))]
    thing = _THINGS[rng.integers(len(_THINGS))]
    kind = int(rng.integers(3))
    if kind == 0:
        src = f"{name} , who {verb} in {place} , won the {adj} {thing} ."
        ref = f"{name} won the {adj} {thing} . {name} {verb} in {place} ."
    elif kind == 1:
        src = f"because {name} {verb} in {place} , {name} won the {adj} {thing} ."
        ref = f"{name} won the {adj} {thing} . {name} {verb} in {place} ."
    else:
        src = f"{name} {verb} in {place} , and {name} won the {adj} {thing} ."
        ref = f"{name} {verb} in {place} . {name} won the {adj} {thing} ."
    return tokenize(src), tokenize(ref)


def clause_corpus(n: int, seed: int) -> list[tuple[TokenSeq, TokenSeq]]:
    rng = np.random.default_rng(seed)
    return [clause_example(rng) for _ in range(n)]


# Candidate sets with a planted ordering: gold preference is a monotone
# function of compression ratio plus lexical overlap, both of which the
# ranker's features can see.

def planted_gold(source: TokenSeq, reference: TokenSeq, candidate: Candidate) -> float:
    return 0.5 * (candidate.cr + tc.jaccard(candidate.tokens, source))


def ranker_row(rng: np.random.Generator, num_candidates: int = 10,
               vocab_size: int = 60) -> tuple[TokenSeq, TokenSeq, CandidateSet]:
    words = [f"word{i:02d}" for i in range(vocab_size)]
    src_len = int(rng.integers(8, 15))
    src_ids = rng.choice(vocab_size, size=src_len, replace=False)
    source = tokenize(" ".join(words[i] for i in src_ids) + " .")
    cands: list[Candidate] = []
    seen = set()
    while len(cands) < num_candidates:
        keep = rng.uniform(0.3, 1.0)
        kept = [words[i] for i in src_ids if rng.random() < keep]
        num_new = int(rng.integers(0, 4))
        extra_pool = [w for w in range(vocab_size) if w not in set(src_ids)]
        extras = rng.choice(extra_pool, size=num_new, replace=False)
        toks = kept + [words[i] for i in extras]
        if not toks:
            continue
        seq = tokenize(" ".join(toks) + " .")
        if seq.tokens in seen:
            continue
        seen.add(seq.tokens)
        cands.append(Candidate(
            tokens=seq, rules_applied=(), rule_count=0,
            split_count=seq.num_sentences,
            cr=tc.compression_ratio(seq, source), origin="rule_engine"))
    return source, source, CandidateSet(source=source, candidates=tuple(cands))


def ranker_corpus(num_sources: int, seed: int,
                  num_candidates: int = 10) -> list[tuple[TokenSeq, TokenSeq, CandidateSet]]:
    rng = np.random.default_rng(seed)
    return [ranker_row(rng, num_candidates) for _ in range(num_sources)]


def aligned_records(n: int, seed: int) -> list[dict]:
    """Raw alignment records for corpus preparation: clause pairs plus the
    degenerate rows the length-similarity gates must drop (identical and
    disjoint pairs), and one complex id shared by two simple sentences."""
    rng = np.random.default_rng(seed)
    records = []
    for i in range(n):
        source, reference = clause_example(rng)
        records.append({"id": f"pair{i:04d}", "complex": source.text(),
                        "simple": reference.text()})
    records.append({"id": "ident", "complex": "the cat sat on the mat .",
                    "simple": "the cat sat on the mat ."})
    records.append({"id": "disjoint", "complex": "the cat sat on the mat .",
                    "simple": "zebras gallop across dusty plains happily ."})
    src, ref = clause_example(rng)
    first, second = ref.sentences()[:2]
    records.append({"id": "joined", "complex": src.text(),
                    "simple": " ".join(first)})
    records.append({"id": "joined", "complex": src.text(),
                    "simple": " ".join(second)})
    return records
