"""Independent brute-force oracles used to validate the real implementations.

Deliberately naive: explicit loops, exhaustive enumeration, no shared code
with the package beyond the tokenizer's data types. Only suitable for tiny
inputs.
"""

from __future__ import annotations

import itertools
from collections import Counter

import numpy as np

from simpkit.textcore import TokenSeq


# --- naive SARI ----------------------------------------------------------

def _sent_ngrams(seq: TokenSeq, n: int) -> Counter:
    counts = Counter()
    for sent in seq.sentences():
        for i in range(len(sent) - n + 1):
            counts[tuple(sent[i : i + n])] += 1
    return counts


def _is_subseq_of_some_sentence(gram: tuple, seq: TokenSeq) -> bool:
    """Exhaustive order-preserving subsequence test, one sentence at a time."""
    n = len(gram)
    for sent in seq.sentences():
        if len(sent) < n:
            continue
        for idxs in itertools.combinations(range(len(sent)), n):
            if tuple(sent[i] for i in idxs) == gram:
                return True
    return False


def _safe_div(a: float, b: float) -> float:
    return a / b if b != 0 else 0.0


def _f1(p: float, r: float) -> float:
    return _safe_div(2 * p * r, p + r)


def naive_sari(source: TokenSeq, output: TokenSeq, references: list[TokenSeq]):
    """Returns (sari, add_f1, keep_f1, del_precision), each in [0, 100]."""
    add_fs, keep_fs, del_ps = [], [], []
    R = len(references)
    for n in (1, 2, 3, 4):
        s = _sent_ngrams(source, n)
        o = _sent_ngrams(output, n)
        refs = [_sent_ngrams(ref, n) for ref in references]
        rbar = {}
        for rc in refs:
            for g, c in rc.items():
                rbar[g] = rbar.get(g, 0.0) + c / R
        in_any_ref = set()
        for rc in refs:
            in_any_ref |= set(rc)

        # ADD: set semantics with the spurious-subsequence exclusion
        candidates = set()
        for g in o:
            if g in s:
                continue
            if _is_subseq_of_some_sentence(g, source):
                continue
            candidates.add(g)
        add_p = _safe_div(len([g for g in candidates if g in in_any_ref]), len(candidates))
        ref_minus_src = in_any_ref - set(s)
        add_r = _safe_div(len([g for g in ref_minus_src if g in o]), len(ref_minus_src))
        add_fs.append(_f1(add_p, add_r))

        # KEEP: multiset intersection, references weighted by agreement
        all_grams = set(s) | set(o) | set(rbar)
        keep_num = 0.0
        keep_o = 0.0
        keep_r = 0.0
        for g in all_grams:
            ko = min(s.get(g, 0), o.get(g, 0))
            kr = min(s.get(g, 0), rbar.get(g, 0.0))
            keep_num += min(ko, kr)
            keep_o += ko
            keep_r += kr
        keep_fs.append(_f1(_safe_div(keep_num, keep_o), _safe_div(keep_num, keep_r)))

        # DEL: precision only
        del_num = 0.0
        del_den = 0.0
        for g in all_grams:
            do = max(0.0, s.get(g, 0) - o.get(g, 0))
            dr = max(0.0, s.get(g, 0) - rbar.get(g, 0.0))
            del_num += min(do, dr)
            del_den += do
        del_ps.append(_safe_div(del_num, del_den))

    add_f1 = 100.0 * sum(add_fs) / 4
    keep_f1 = 100.0 * sum(keep_fs) / 4
    del_precision = 100.0 * sum(del_ps) / 4
    sari = (add_f1 + keep_f1 + del_precision) / 3
    return sari, add_f1, keep_f1, del_precision


# --- finite-difference gradient checking ---------------------------------

def numeric_grad(f, x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of scalar f at x, one coordinate at a time."""
    x = x.astype(np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        fp = float(f(x))
        flat[i] = orig - eps
        fm = float(f(x))
        flat[i] = orig
        gflat[i] = (fp - fm) / (2 * eps)
    return g


def max_rel_error(analytic: np.ndarray, numeric: np.ndarray, abs_floor: float = 1e-8) -> float:
    """Worst-case relative disagreement, ignoring entries where both are tiny."""
    a = np.asarray(analytic, dtype=np.float64).reshape(-1)
    b = np.asarray(numeric, dtype=np.float64).reshape(-1)
    denom = np.maximum(np.abs(a), np.abs(b))
    err = np.abs(a - b)
    mask = denom > abs_floor
    if not mask.any():
        return 0.0
    return float(np.max(err[mask] / denom[mask]))
