"""Manufactured paraphrase training pairs.

Rule-engine candidates that stay close to a human reference, both in length
and in wording, make usable extra (input, reference) pairs for paraphrase
training. A candidate is kept when its length-penalized similarity to the
reference clears a floor and it has the same number of sentences as the
reference; the untouched original pair is always emitted exactly once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from . import textcore as tc
from .errors import InvalidConfig
from .ranker import GoldScorerConfig, gold_score
from .structgen import Candidate, CandidateSet
from .textcore import TokenSeq


@dataclass(frozen=True)
class AugmentConfig:
    """Tighter length penalty than ranking (lam 2 vs 1) and a fixed target
    ratio of 1: retained candidates should already be the reference's size."""

    lam: float = 2.0
    target_cr: float = 1.0
    min_score: float = 0.5
    similarity: str | Callable = "soft_f1"

    def __post_init__(self):
        if self.lam < 0:
            raise InvalidConfig("lam must be non-negative")
        if not 0.0 <= self.min_score <= 1.0:
            raise InvalidConfig("min_score must be in [0, 1]")


def pair_score(candidate: TokenSeq, reference: TokenSeq, cfg: AugmentConfig) -> float:
    """Length-penalized similarity with the length ratio measured against
    the reference (not the source): exp(-lam * |wc(v)/wc(y) - target|) * sim."""
    phi = tc.word_count(candidate) / tc.word_count(reference)
    shim = Candidate(tokens=candidate, rules_applied=(), rule_count=0,
                     split_count=candidate.num_sentences, cr=phi,
                     origin="rule_engine")
    gold_cfg = GoldScorerConfig(lam=cfg.lam, target_cr=cfg.target_cr,
                                similarity=cfg.similarity)
    return gold_score(shim, reference, gold_cfg, reference)


def pair_ok(candidate: TokenSeq, reference: TokenSeq, cfg: AugmentConfig) -> bool:
    """The retention predicate, re-checkable on emitted pairs after the fact."""
    if candidate.num_sentences != reference.num_sentences:
        return False
    return pair_score(candidate, reference, cfg) >= cfg.min_score


def build_augmented_pairs(source: TokenSeq, reference: TokenSeq,
                          cset: CandidateSet,
                          cfg: AugmentConfig | None = None
                          ) -> list[tuple[TokenSeq, TokenSeq]]:
    """The original (source, reference) pair followed by every retained
    (candidate, reference) pair. Candidates identical to the source are
    skipped so the original appears exactly once; empty retention is fine."""
    cfg = cfg or AugmentConfig()
    out = [(source, reference)]
    for cand in cset.candidates:
        if cand.tokens.tokens == source.tokens:
            continue
        if cand.split_count != reference.num_sentences:
            continue
        if pair_score(cand.tokens, reference, cfg) >= cfg.min_score:
            out.append((cand.tokens, reference))
    return out


def augment_records(source: TokenSeq, reference: TokenSeq, cset: CandidateSet,
                    cfg: AugmentConfig | None = None,
                    partition: str = "train") -> list[dict]:
    """Corpus-file records for the emitted pairs; manufactured pairs carry
    an \"augmented\" provenance flag, the original keeps \"original\"."""
    pairs = build_augmented_pairs(source, reference, cset, cfg)
    records = []
    for i, (inp, ref) in enumerate(pairs):
        records.append({
            "complex": inp.text(),
            "simple": [ref.text()],
            "partition": partition,
            "provenance": "original" if i == 0 else "augmented",
        })
    return records
