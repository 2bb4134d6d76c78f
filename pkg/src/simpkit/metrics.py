"""Automatic evaluation: SARI, BLEU, self-BLEU, FK grade, corpus reports.

SARI decomposes an edit into added, kept, and deleted n-grams (n = 1..4)
and scores each against the references. Two conventions apply throughout:
any 0/0 ratio evaluates to 0, and an output n-gram whose tokens already
occur in order inside a single source sentence is never treated as an
addition (re-joining words the source had is not adding content).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict

from . import textcore as tc
from .errors import EmptyInput, MissingReference
from .textcore import TokenSeq

SARI_ORDERS = (1, 2, 3, 4)


@dataclass(frozen=True)
class SariScore:
    """SARI and its three components, each on a 0..100 scale."""

    sari: float
    add_f1: float
    keep_f1: float
    del_precision: float


@dataclass(frozen=True)
class EvalReport:
    """Corpus-level evaluation summary for one system."""

    sari: float
    add_f1: float
    keep_f1: float
    del_precision: float
    fk: float
    slen: float
    olen: float
    cr: float
    pct_split: float
    self_bleu: float
    pct_new: float
    pct_eq: float

    def as_record(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.as_record(), sort_keys=True)


def _div0(num: float, den: float) -> float:
    """Division with the 0-denominator convention: anything/0 -> 0."""
    return num / den if den != 0 else 0.0


def _f1(p: float, r: float) -> float:
    return _div0(2.0 * p * r, p + r)


def _is_subsequence(gram: tuple[str, ...], tokens: tuple[str, ...]) -> bool:
    it = iter(tokens)
    return all(tok in it for tok in gram)


def _subseq_of_one_sentence(gram: tuple[str, ...], source: TokenSeq) -> bool:
    return any(_is_subsequence(gram, sent) for sent in source.sentences())


def sari(source: TokenSeq, output: TokenSeq, references: list[TokenSeq]) -> SariScore:
    """Sentence-level SARI against one or more references.

    Per order n: ADD is scored on set membership (precision over candidate
    additions, recall over reference n-grams missing from the source), KEEP
    and DEL on multiset counts with each reference contributing weight 1/R.
    Components are averaged over n and SARI is the mean of the three.
    """
    if not references:
        raise MissingReference("sari requires at least one reference")
    R = len(references)
    add_total = keep_total = del_total = 0.0
    for n in SARI_ORDERS:
        s = tc.ngrams(source, n).counts
        o = tc.ngrams(output, n).counts
        ref_counts = [tc.ngrams(ref, n).counts for ref in references]
        rbar: dict[tuple[str, ...], float] = {}
        for rc in ref_counts:
            for g, c in rc.items():
                rbar[g] = rbar.get(g, 0.0) + c / R

        # ADD: candidates are output n-grams the source could not produce
        # even by deleting words inside one sentence.
        candidates = [
            g for g in o
            if g not in s and not _subseq_of_one_sentence(g, source)
        ]
        add_p = _div0(sum(1 for g in candidates if g in rbar), len(candidates))
        ref_minus_src = [g for g in rbar if g not in s]
        add_r = _div0(sum(1 for g in ref_minus_src if g in o), len(ref_minus_src))
        add_total += _f1(add_p, add_r)

        # KEEP: what the output kept vs what the references kept.
        keep_num = keep_out = keep_ref = 0.0
        for g, sc in s.items():
            ko = min(sc, o.get(g, 0))
            kr = min(sc, rbar.get(g, 0.0))
            keep_num += min(ko, kr)
            keep_out += ko
            keep_ref += kr
        keep_total += _f1(_div0(keep_num, keep_out), _div0(keep_num, keep_ref))

        # DEL: precision only; deleting what references kept is penalized.
        del_num = del_den = 0.0
        for g, sc in s.items():
            do = max(0.0, sc - o.get(g, 0))
            dr = max(0.0, sc - rbar.get(g, 0.0))
            del_num += min(do, dr)
            del_den += do
        del_total += _div0(del_num, del_den)

    k = len(SARI_ORDERS)
    add_f1 = 100.0 * add_total / k
    keep_f1 = 100.0 * keep_total / k
    del_precision = 100.0 * del_total / k
    return SariScore(
        sari=(add_f1 + keep_f1 + del_precision) / 3.0,
        add_f1=add_f1,
        keep_f1=keep_f1,
        del_precision=del_precision,
    )


# --- BLEU -----------------------------------------------------------------

def _bleu_row_stats(output: TokenSeq, references: list[TokenSeq]):
    """Per-order clipped match/total counts plus candidate/reference lengths."""
    matches = [0] * 4
    totals = [0] * 4
    for i, n in enumerate(SARI_ORDERS):
        out = tc.ngrams(output, n).counts
        clip: dict[tuple[str, ...], int] = {}
        for ref in references:
            for g, c in tc.ngrams(ref, n).counts.items():
                if c > clip.get(g, 0):
                    clip[g] = c
        matches[i] = sum(min(c, clip.get(g, 0)) for g, c in out.items())
        totals[i] = sum(out.values())
    c = len(output.tokens)
    # effective reference length: closest to candidate, ties to the shorter
    r = min((abs(len(ref.tokens) - c), len(ref.tokens)) for ref in references)[1]
    return matches, totals, c, r


def _bleu_from_stats(matches, totals, c, r) -> float:
    if totals[0] == 0 or matches[0] == 0:
        return 0.0
    log_sum = math.log(matches[0] / totals[0])
    for i in (1, 2, 3):
        m, t = matches[i], totals[i]
        p = m / t if t > 0 and m > 0 else (m + 1) / (t + 1)
        log_sum += math.log(p)
    bp = 1.0 if c > r else math.exp(1.0 - r / c)
    return 100.0 * bp * math.exp(log_sum / 4.0)


def bleu(output: TokenSeq, references: list[TokenSeq]) -> float:
    """Sentence-level BLEU-4 in [0, 100].

    Modified n-gram precision with brevity penalty; zero precisions at
    n >= 2 fall back to add-1 smoothed counts so a single missing order
    does not zero the score.
    """
    if not references:
        raise MissingReference("bleu requires at least one reference")
    return _bleu_from_stats(*_bleu_row_stats(output, references))


def corpus_bleu(rows: list[tuple[TokenSeq, list[TokenSeq]]]) -> float:
    """Corpus-level BLEU-4: counts pooled over rows before taking ratios."""
    if not rows:
        raise EmptyInput("corpus_bleu requires at least one row")
    agg_m = [0] * 4
    agg_t = [0] * 4
    agg_c = agg_r = 0
    for output, references in rows:
        if not references:
            raise MissingReference("corpus_bleu row has no references")
        m, t, c, r = _bleu_row_stats(output, references)
        for i in range(4):
            agg_m[i] += m[i]
            agg_t[i] += t[i]
        agg_c += c
        agg_r += r
    return _bleu_from_stats(agg_m, agg_t, agg_c, agg_r)


def self_bleu(output: TokenSeq, source: TokenSeq) -> float:
    """BLEU of the output against its own source: 100 means a copy."""
    return bleu(output, [source])


# --- readability ----------------------------------------------------------

def fk_grade(text: TokenSeq) -> float:
    """Flesch-Kincaid grade level; punctuation tokens are not words."""
    words = tc.word_tokens(text)
    if not words:
        raise EmptyInput("fk_grade requires at least one word token")
    syl = sum(tc.syllables(w) for w in words)
    wps = len(words) / text.num_sentences
    spw = syl / len(words)
    return 0.39 * wps + 11.8 * spw - 15.59


# --- corpus aggregation ----------------------------------------------------

def corpus_report(rows: list[tuple[TokenSeq, TokenSeq, list[TokenSeq]]]) -> EvalReport:
    """Aggregate per-row metrics over (source, output, references) rows.

    SARI, FK, CR, SLen, OLen, and %new are macro-averaged per row;
    %split / %eq are row fractions; self-BLEU pools counts corpus-level.
    """
    if not rows:
        raise EmptyInput("corpus_report requires at least one row")
    n = len(rows)
    sari_sum = add_sum = keep_sum = del_sum = 0.0
    fk_sum = slen_sum = olen_sum = cr_sum = new_sum = 0.0
    split_rows = eq_rows = 0
    for source, output, references in rows:
        sc = sari(source, output, references)
        sari_sum += sc.sari
        add_sum += sc.add_f1
        keep_sum += sc.keep_f1
        del_sum += sc.del_precision
        fk_sum += fk_grade(output)
        out_words = tc.word_count(output)
        olen_sum += out_words
        slen_sum += out_words / output.num_sentences
        cr_sum += tc.compression_ratio(output, source)
        if output.num_sentences > source.num_sentences:
            split_rows += 1
        if output.tokens == source.tokens:
            eq_rows += 1
        out_types = set(tc.word_tokens(output))
        src_types = set(tc.word_tokens(source))
        new_sum += _div0(len(out_types - src_types), len(out_types))
    return EvalReport(
        sari=sari_sum / n,
        add_f1=add_sum / n,
        keep_f1=keep_sum / n,
        del_precision=del_sum / n,
        fk=fk_sum / n,
        slen=slen_sum / n,
        olen=olen_sum / n,
        cr=cr_sum / n,
        pct_split=100.0 * split_rows / n,
        self_bleu=corpus_bleu([(out, [src]) for src, out, _ in rows]),
        pct_new=100.0 * new_sum / n,
        pct_eq=100.0 * eq_rows / n,
    )


REPORT_COLUMNS = (
    ("SARI", "sari"),
    ("add", "add_f1"),
    ("keep", "keep_f1"),
    ("del", "del_precision"),
    ("FK", "fk"),
    ("SLen", "slen"),
    ("OLen", "olen"),
    ("CR", "cr"),
    ("%split", "pct_split"),
    ("s-BL", "self_bleu"),
    ("%new", "pct_new"),
    ("%eq", "pct_eq"),
)


def format_report_table(systems: list[tuple[str, EvalReport]]) -> str:
    """Aligned text table, one row per system, fixed column order."""
    if not systems:
        raise EmptyInput("no systems to report")
    name_w = max(len("system"), max(len(name) for name, _ in systems))
    headers = [h for h, _ in REPORT_COLUMNS]
    cells = {
        name: [f"{getattr(rep, attr):.2f}" for _, attr in REPORT_COLUMNS]
        for name, rep in systems
    }
    widths = [
        max(len(headers[i]), max(len(cells[name][i]) for name, _ in systems))
        for i in range(len(headers))
    ]
    lines = [
        "system".ljust(name_w) + "  " + "  ".join(h.rjust(w) for h, w in zip(headers, widths))
    ]
    for name, _ in systems:
        row = cells[name]
        lines.append(name.ljust(name_w) + "  " + "  ".join(v.rjust(w) for v, w in zip(row, widths)))
    return "\n".join(lines)
