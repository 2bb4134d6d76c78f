"""Candidate generation for splitting and deletion.

A deterministic clause-level rule engine decomposes a sentence into
sub-sentences (split rules extract coordinate/relative/appositive/
subordinate material; a deletion rule drops parentheticals), then
candidates are enumerated as contiguous sub-sentence selections of each
decomposition state. A trained deletion-and-split seq2seq model can
contribute additional candidates via constrained beam search.

Rules only delete and reorder spans of the original tokens; the single
token they may introduce is the sentence-terminal period used to join
sub-sentences.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Callable

from . import textcore as tc
from .errors import EmptyInput, InvalidConfig, ParseError
from .textcore import TokenSeq

Clause = tuple[str, ...]

COORDINATORS = ("and", "but", "so")
RELATIVE_PRONOUNS = ("who", "which", "that")
SUBORDINATORS = ("because", "although", "since", "while", "after", "when")

# closed-class verb lexicon: auxiliaries, modals, and common irregular pasts
_VERB_LEXICON = frozenset("""
am is are was were be been being has have had do does did
can could will would shall should may might must
won went ran sat saw said made took gave got came left kept began felt knew
grew met put paid read sent stood told wrote found thought held became brought
sold built lost meant spent ate slept led fed rose fell flew drew chose spoke
drove wore broke stole threw lay lived moved used caused
""".split())

# frequent -s/-ed lookalikes that are not verbs
_NOT_VERBS = frozenset("""
this his its hers ours yours theirs thus plus alas news less unless perhaps
across gas bus was red bed
""".split())


def verb_like(token: str) -> bool:
    """POS-lite verb test: lexicon membership or a verbal suffix."""
    if token in _VERB_LEXICON:
        return True
    if token in _NOT_VERBS or not token.isalpha() or len(token) < 4:
        return False
    if token.endswith("ed") or token.endswith("ing"):
        return True
    return token.endswith("s") and not token.endswith("ss")


def _has_verb(tokens: Clause) -> bool:
    return any(verb_like(t) for t in tokens)


def _trailing_noun_run(tokens: Clause, max_len: int = 3) -> Clause:
    """The word-token run ending a span; the likely head of a noun phrase."""
    run: list[str] = []
    for t in reversed(tokens):
        if not tc.is_word_token(t):
            break
        run.append(t)
        if len(run) == max_len:
            break
    return tuple(reversed(run))


# --- rule transforms: one clause in, >= 1 clauses out, or None ----------------

def _coordination_split(clause: Clause) -> list[Clause] | None:
    for i in range(1, len(clause) - 1):
        if clause[i] != "," or clause[i + 1] not in COORDINATORS:
            continue
        left, right = clause[:i], clause[i + 2 :]
        if left and right and _has_verb(left) and _has_verb(right):
            return [left, right]
    return None


def _relative_clause(clause: Clause) -> list[Clause] | None:
    for i in range(1, len(clause) - 2):
        if clause[i] != "," or clause[i + 1] not in RELATIVE_PRONOUNS:
            continue
        antecedent = clause[:i]
        head = _trailing_noun_run(antecedent, max_len=1)
        if not head:
            continue
        for j in range(i + 2, len(clause)):
            if clause[j] != ",":
                continue
            body, rest = clause[i + 2 : j], clause[j + 1 :]
            if body and rest:
                return [antecedent + rest, head + body]
            break
    return None


def _appositive(clause: Clause) -> list[Clause] | None:
    for i in range(1, len(clause) - 2):
        if clause[i] != "," or clause[i + 1] in RELATIVE_PRONOUNS:
            continue
        for j in range(i + 1, len(clause)):
            if clause[j] != ",":
                continue
            span = clause[i + 1 : j]
            rest = clause[j + 1 :]
            if not span or not rest:
                break
            if any(not tc.is_word_token(t) for t in span) or _has_verb(span):
                break
            head = _trailing_noun_run(clause[:i])
            if not head:
                break
            # no copula is invented: the extracted clause simply reorders
            # the antecedent head next to the appositive span
            return [clause[:i] + rest, head + span]
        # only the first comma pair is considered per application
    return None


def _leading_subordinate(clause: Clause) -> list[Clause] | None:
    if not clause or clause[0] not in SUBORDINATORS:
        return None
    for i in range(2, len(clause) - 1):
        if clause[i] == ",":
            body, rest = clause[1:i], clause[i + 1 :]
            if body and rest:
                return [rest, body]
            return None
    return None


def _parenthetical_deletion(clause: Clause) -> list[Clause] | None:
    if "(" not in clause:
        return None
    i = clause.index("(")
    for j in range(i + 1, len(clause)):
        if clause[j] == ")":
            remaining = clause[:i] + clause[j + 1 :]
            return [remaining] if remaining else None
    return None


@dataclass(frozen=True)
class SplitRule:
    """A deterministic clause rewrite with a human-readable pattern."""

    name: str
    pattern: str
    transform: Callable[[Clause], list[Clause] | None]


RULES: dict[str, SplitRule] = {
    r.name: r
    for r in (
        SplitRule("coordination", '", and|but|so" between verb-bearing clauses', _coordination_split),
        SplitRule("relative_clause", '", who|which|that <body> ," after a noun', _relative_clause),
        SplitRule("appositive", '", <noun phrase> ," between clause parts', _appositive),
        SplitRule("subordinate", '"because|although|since|while|after|when <clause> ," at start', _leading_subordinate),
        SplitRule("parenthetical", '"( <span> )" deleted in place', _parenthetical_deletion),
    )
}

MAX_RULE_DEPTH = 3


@dataclass(frozen=True)
class Candidate:
    """One proposed simplification of a source sentence."""

    tokens: TokenSeq
    rules_applied: tuple[str, ...]
    rule_count: int
    split_count: int
    cr: float
    origin: str  # "rule_engine" | "neural"

    def text(self) -> str:
        return self.tokens.text()


@dataclass(frozen=True)
class CandidateSet:
    source: TokenSeq
    candidates: tuple[Candidate, ...]

    def __post_init__(self):
        seen = set()
        for c in self.candidates:
            if c.tokens.tokens in seen:
                raise InvalidConfig("duplicate candidate token sequence")
            seen.add(c.tokens.tokens)

    def __len__(self) -> int:
        return len(self.candidates)

    def texts(self) -> list[str]:
        return [c.text() for c in self.candidates]


@dataclass(frozen=True)
class GenerateConfig:
    """Controls which generators contribute candidates."""

    enabled_rules: tuple[str, ...] = tuple(RULES)
    neural_model: object | None = None
    beam_width: int = 10
    min_jaccard: float = 0.5
    cr_low: float = 0.5
    cr_high: float = 1.5

    def __post_init__(self):
        unknown = [r for r in self.enabled_rules if r not in RULES]
        if unknown:
            raise InvalidConfig(f"unknown rules: {unknown}; known: {list(RULES)}")


def _strip_terminal(sent: tuple[str, ...]) -> Clause:
    end = len(sent)
    while end > 0 and sent[end - 1] in tc.TERMINALS:
        end -= 1
    return sent[:end]


def _initial_clauses(source: TokenSeq) -> tuple[Clause, ...]:
    clauses = tuple(c for c in (_strip_terminal(s) for s in source.sentences()) if c)
    if not clauses:
        raise EmptyInput("source contains only terminal punctuation")
    return clauses


def _decompose(initial: tuple[Clause, ...], rules: list[SplitRule]):
    """Breadth-first rule application, at most MAX_RULE_DEPTH rewrites."""
    states: list[tuple[tuple[Clause, ...], tuple[str, ...]]] = [(initial, ())]
    seen = {initial}
    frontier = [(initial, ())]
    for _ in range(MAX_RULE_DEPTH):
        nxt = []
        for clauses, applied in frontier:
            for ci, clause in enumerate(clauses):
                for rule in rules:
                    out = rule.transform(clause)
                    if out is None:
                        continue
                    if any(not sub for sub in out):
                        raise InvalidConfig(f"rule {rule.name} produced an empty clause")
                    new_clauses = clauses[:ci] + tuple(tuple(s) for s in out) + clauses[ci + 1 :]
                    if new_clauses in seen:
                        continue
                    seen.add(new_clauses)
                    state = (new_clauses, applied + (rule.name,))
                    states.append(state)
                    nxt.append(state)
        frontier = nxt
    return states


def _join_clauses(clauses: tuple[Clause, ...]) -> TokenSeq:
    toks: list[str] = []
    for c in clauses:
        toks.extend(c)
        toks.append(".")
    return tc.from_tokens(toks)


def rule_candidates(source: TokenSeq, enabled_rules: tuple[str, ...] | None = None,
                    cr_low: float = 0.5, cr_high: float = 1.5) -> CandidateSet:
    """All rule-engine candidates for one source, identity included.

    Candidates are contiguous sub-sentence selections of every decomposition
    state, joined with terminal periods, deduplicated in discovery order,
    and filtered to compression ratio within [cr_low, cr_high].
    """
    names = tuple(RULES) if enabled_rules is None else enabled_rules
    rules = [RULES[n] for n in names]
    identity = Candidate(
        tokens=source, rules_applied=(), rule_count=0,
        split_count=source.num_sentences, cr=1.0, origin="rule_engine")
    out = [identity]
    seen = {source.tokens}
    for clauses, applied in _decompose(_initial_clauses(source), rules):
        for i in range(len(clauses)):
            for j in range(i + 1, len(clauses) + 1):
                seq = _join_clauses(clauses[i:j])
                if seq.tokens in seen:
                    continue
                seen.add(seq.tokens)
                cr = tc.compression_ratio(seq, source)
                if not cr_low <= cr <= cr_high:
                    continue
                out.append(Candidate(
                    tokens=seq, rules_applied=applied, rule_count=len(applied),
                    split_count=seq.num_sentences, cr=cr, origin="rule_engine"))
    return CandidateSet(source=source, candidates=tuple(out))


def neural_candidates(source: TokenSeq, model, beam_width: int = 10,
                      min_jaccard: float = 0.5,
                      cr_low: float = 0.5, cr_high: float = 1.5) -> CandidateSet:
    """Beam-searched candidates from a deletion-and-split model: one batch
    forced to split, one forced not to, each filtered by source overlap."""
    from .paraphraser import ConstraintMode, generate_candidates

    out: list[Candidate] = []
    seen: set[tuple[str, ...]] = set()
    for mode in (ConstraintMode.SPLIT_REQUIRED, ConstraintMode.NO_SPLIT):
        for seq in generate_candidates(model, source, mode, beam_width=beam_width):
            if seq.tokens in seen:
                continue
            seen.add(seq.tokens)
            if tc.jaccard(seq, source) <= min_jaccard:
                continue
            cr = tc.compression_ratio(seq, source)
            if not cr_low <= cr <= cr_high:
                continue
            out.append(Candidate(
                tokens=seq, rules_applied=(), rule_count=0,
                split_count=seq.num_sentences, cr=cr, origin="neural"))
    return CandidateSet(source=source, candidates=tuple(out))


def generate(source: TokenSeq, config: GenerateConfig | None = None) -> CandidateSet:
    """Union of rule-engine and (if configured) neural candidates."""
    cfg = config or GenerateConfig()
    base = rule_candidates(source, cfg.enabled_rules, cfg.cr_low, cfg.cr_high)
    if cfg.neural_model is None:
        return base
    extra = neural_candidates(source, cfg.neural_model, cfg.beam_width,
                              cfg.min_jaccard, cfg.cr_low, cfg.cr_high)
    seen = {c.tokens.tokens for c in base.candidates}
    merged = list(base.candidates)
    for c in extra.candidates:
        if c.tokens.tokens not in seen:
            seen.add(c.tokens.tokens)
            merged.append(c)
    return CandidateSet(source=source, candidates=tuple(merged))


# --- serialization -----------------------------------------------------------

def candidate_records(cands: CandidateSet) -> list[dict]:
    src = cands.source.text()
    return [
        {
            "source": src,
            "candidate": c.text(),
            "rules": list(c.rules_applied),
            "cr": c.cr,
            "split_count": c.split_count,
            "origin": c.origin,
        }
        for c in cands.candidates
    ]


def dump_candidates(path: str, sets: list[CandidateSet]) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as f:
        for cs in sets:
            for rec in candidate_records(cs):
                f.write(json.dumps(rec, sort_keys=True) + "\n")
    os.replace(tmp, path)


def load_candidates(path: str) -> list[CandidateSet]:
    """Rebuild candidate sets from a dump, grouping consecutive rows by source."""
    groups: list[tuple[TokenSeq, list[Candidate]]] = []
    with open(path, encoding="utf-8") as f:
        for ln, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                source = tc.tokenize(rec["source"])
                seq = tc.tokenize(rec["candidate"])
                cand = Candidate(
                    tokens=seq, rules_applied=tuple(rec["rules"]),
                    rule_count=len(rec["rules"]), split_count=int(rec["split_count"]),
                    cr=float(rec["cr"]), origin=rec["origin"])
            except (KeyError, ValueError, EmptyInput) as e:
                raise ParseError(f"bad candidate record: {e}", line_number=ln) from None
            if not groups or groups[-1][0].tokens != source.tokens:
                groups.append((source, []))
            groups[-1][1].append(cand)
    return [CandidateSet(source=s, candidates=tuple(cs)) for s, cs in groups]
