import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simpkit import metrics as mx
from simpkit import textcore as tc
from simpkit.errors import EmptyInput, MissingReference

from oracles import naive_sari

T = tc.tokenize


# small vocab so n-grams collide often
POOL = ["the", "cat", "sat", "on", "mat", "rug", "big", "was"]


@st.composite
def small_texts(draw):
    k = draw(st.integers(min_value=1, max_value=3))
    sents = []
    for _ in range(k):
        m = draw(st.integers(min_value=1, max_value=6))
        sents.append(" ".join(draw(st.sampled_from(POOL)) for _ in range(m)) + " .")
    return " ".join(sents)


def small_seqs():
    return small_texts().map(T)


# --- sari fixtures --------------------------------------------------------

class TestSariFixtures:
    def test_perfect_edit_scores_100(self):
        s = T("the cat sat on the mat")
        o = T("the cat sat on the rug")
        score = mx.sari(s, o, [T("the cat sat on the rug")])
        assert score.add_f1 == pytest.approx(100.0)
        assert score.keep_f1 == pytest.approx(100.0)
        assert score.del_precision == pytest.approx(100.0)
        assert score.sari == pytest.approx(100.0)

    def test_identity_triple(self):
        s = T("the cat sat on the mat .")
        score = mx.sari(s, s, [s])
        assert score.add_f1 == 0.0
        assert score.del_precision == 0.0
        assert score.keep_f1 == pytest.approx(100.0)
        assert score.sari == pytest.approx(100.0 / 3.0)

    def test_rejoined_phrase_not_an_addition(self):
        # dropping "very" re-joins "is beautiful"; that bigram must not be
        # scored as new content even though the source lacks it
        s = T("the picture is very beautiful .")
        o = T("the picture is beautiful .")
        refs = [T("the photo looks nice .")]
        score = mx.sari(s, o, refs)
        # with the exclusion, no ADD candidates exist at any order
        assert score.add_f1 == 0.0

    def test_no_references_raises(self):
        s = T("a b")
        with pytest.raises(MissingReference):
            mx.sari(s, s, [])

    def test_mean_identity(self):
        s = T("the cat sat . it was big .")
        o = T("the cat sat .")
        refs = [T("the cat sat ."), T("a cat sat down .")]
        sc = mx.sari(s, o, refs)
        assert sc.sari == pytest.approx((sc.add_f1 + sc.keep_f1 + sc.del_precision) / 3, abs=1e-9)


class TestSariAgainstOracle:
    @given(small_seqs(), small_seqs(), st.lists(small_seqs(), min_size=1, max_size=3))
    @settings(max_examples=150, deadline=None)
    def test_matches_naive_enumeration(self, s, o, refs):
        got = mx.sari(s, o, refs)
        want_sari, want_add, want_keep, want_del = naive_sari(s, o, refs)
        assert got.sari == pytest.approx(want_sari, abs=1e-9)
        assert got.add_f1 == pytest.approx(want_add, abs=1e-9)
        assert got.keep_f1 == pytest.approx(want_keep, abs=1e-9)
        assert got.del_precision == pytest.approx(want_del, abs=1e-9)


class TestSariProperties:
    @given(small_seqs(), small_seqs(), st.lists(small_seqs(), min_size=1, max_size=3))
    @settings(max_examples=80, deadline=None)
    def test_components_bounded(self, s, o, refs):
        sc = mx.sari(s, o, refs)
        for v in (sc.sari, sc.add_f1, sc.keep_f1, sc.del_precision):
            assert 0.0 - 1e-12 <= v <= 100.0 + 1e-12

    @given(small_seqs(), small_seqs(), st.lists(small_seqs(), min_size=2, max_size=4), st.randoms())
    @settings(max_examples=60, deadline=None)
    def test_reference_order_irrelevant(self, s, o, refs, rng):
        sc1 = mx.sari(s, o, refs)
        shuffled = list(refs)
        rng.shuffle(shuffled)
        sc2 = mx.sari(s, o, shuffled)
        assert sc1.sari == pytest.approx(sc2.sari, abs=1e-12)
        assert sc1.add_f1 == pytest.approx(sc2.add_f1, abs=1e-12)
        assert sc1.keep_f1 == pytest.approx(sc2.keep_f1, abs=1e-12)
        assert sc1.del_precision == pytest.approx(sc2.del_precision, abs=1e-12)

    @given(small_seqs(), small_seqs(), st.lists(small_seqs(), min_size=1, max_size=2))
    @settings(max_examples=60, deadline=None)
    def test_duplicate_reference_keeps_add_precision(self, s, o, refs):
        # presence in >=1 reference is a set question; duplicating a
        # reference cannot flip any candidate's membership
        sc1 = mx.sari(s, o, refs)
        sc2 = mx.sari(s, o, refs + [refs[0]])
        # add precision and recall are set-based, so add F1 is unchanged
        assert sc1.add_f1 == pytest.approx(sc2.add_f1, abs=1e-12)

    def test_del_precision_100_when_refs_agree_with_deletions(self):
        s = T("the big cat sat on the mat .")
        o = T("the cat sat .")          # pure deletion, n-gram-wise subset
        refs = [T("the cat sat .")]     # reference deleted the same material
        sc = mx.sari(s, o, refs)
        assert sc.del_precision == pytest.approx(100.0)


# --- bleu -----------------------------------------------------------------

class TestBleu:
    def test_identity_100(self):
        x = T("the cat sat on the mat .")
        assert mx.bleu(x, [x]) == pytest.approx(100.0)

    def test_disjoint_zero(self):
        assert mx.bleu(T("aa bb cc"), [T("dd ee ff")]) == 0.0

    def test_brevity_penalty(self):
        # single shared word, candidate length 1, reference length 4
        out = T("cat")
        ref = T("cat sat mat hat")
        got = mx.bleu(out, [ref])
        # p1 = 1; p2..p4 smoothed to (0+1)/(0+1) = 1; bp = exp(1 - 4/1)
        assert got == pytest.approx(100.0 * math.exp(1.0 - 4.0), abs=1e-9)

    def test_longer_than_ref_no_penalty(self):
        out = T("the cat sat down")
        ref = T("the cat sat")
        m, t, c, r = mx._bleu_row_stats(out, [ref])
        assert c > r
        assert mx.bleu(out, [ref]) > 0

    def test_no_references(self):
        with pytest.raises(MissingReference):
            mx.bleu(T("a"), [])

    def test_corpus_bleu_pools_counts(self):
        rows = [(T("the cat ."), [T("the cat .")]), (T("a dog ."), [T("a dog .")])]
        assert mx.corpus_bleu(rows) == pytest.approx(100.0)

    def test_corpus_bleu_empty(self):
        with pytest.raises(EmptyInput):
            mx.corpus_bleu([])


class TestSelfBleu:
    @given(small_seqs())
    @settings(max_examples=40, deadline=None)
    def test_self_is_100(self, x):
        assert mx.self_bleu(x, x) == pytest.approx(100.0)

    def test_paraphrase_scores_below_light_edit(self):
        src = T("the big cat sat on the old mat .")
        light = T("the big cat sat on the mat .")
        heavy = T("a large feline rested on a worn rug .")
        assert mx.self_bleu(heavy, src) < mx.self_bleu(light, src)

    def test_disjoint_zero(self):
        assert mx.self_bleu(T("xx yy"), T("zz ww")) == 0.0


# --- fk -------------------------------------------------------------------

class TestFk:
    def test_known_value(self):
        assert mx.fk_grade(T("The cat sat.")) == pytest.approx(0.39 * 3 + 11.8 * 1 - 15.59)

    def test_monotone_in_sentence_length(self):
        short = mx.fk_grade(T("The cat sat."))
        long = mx.fk_grade(T("The cat sat on the big mat."))
        assert long > short

    def test_duplication_invariant(self):
        one = mx.fk_grade(T("the cat sat on the mat ."))
        two = mx.fk_grade(T("the cat sat on the mat . the cat sat on the mat ."))
        assert two == pytest.approx(one, abs=1e-12)

    def test_punct_only_raises(self):
        with pytest.raises(EmptyInput):
            mx.fk_grade(tc.TokenSeq(tokens=(".", ",")))


# --- corpus report ----------------------------------------------------------

class TestCorpusReport:
    def test_all_identical_outputs(self):
        rows = []
        for text in ("the cat sat .", "he left the house ."):
            s = T(text)
            rows.append((s, s, [s]))
        rep = mx.corpus_report(rows)
        assert rep.pct_eq == 100.0
        assert rep.pct_new == 0.0
        assert rep.cr == pytest.approx(1.0)
        assert rep.pct_split == 0.0
        assert rep.self_bleu == pytest.approx(100.0)

    def test_every_row_splits(self):
        rows = []
        for text, split in [("a b c d .", "a b . c d ."), ("e f g h .", "e f . g h .")]:
            rows.append((T(text), T(split), [T(split)]))
        rep = mx.corpus_report(rows)
        assert rep.pct_split == 100.0

    def test_two_row_hand_arithmetic(self):
        s1, o1 = T("the cat sat on the mat ."), T("the cat sat on the mat .")
        s2, o2 = T("he left the old house ."), T("he left . he was gone .")
        r1, r2 = [o1], [T("he left . he was gone .")]
        rep = mx.corpus_report([(s1, o1, r1), (s2, o2, r2)])
        # cr: row1 = 6/6, row2 = 5 words / 5 words = 1.0
        assert rep.cr == pytest.approx((1.0 + 1.0) / 2)
        # olen: (6 + 5)/2; slen: (6/1 + 5/2)/2
        assert rep.olen == pytest.approx((6 + 5) / 2)
        assert rep.slen == pytest.approx((6 / 1 + 5 / 2) / 2)
        assert rep.pct_split == 50.0
        assert rep.pct_eq == 50.0
        # %new: row1 = 0/6 types; row2 types {he,left,was,gone}: new {was,gone} -> 2/4
        assert rep.pct_new == pytest.approx(100.0 * (0.0 + 0.5) / 2)
        # sari fields equal the mean of the per-row scores
        per = [mx.sari(s, o, r) for s, o, r in [(s1, o1, r1), (s2, o2, r2)]]
        assert rep.sari == pytest.approx(sum(p.sari for p in per) / 2)
        assert rep.fk == pytest.approx((mx.fk_grade(o1) + mx.fk_grade(o2)) / 2)

    def test_olen_at_least_slen(self):
        rows = [(T("a b c . d e ."), T("a b . c d ."), [T("a b .")])]
        rep = mx.corpus_report(rows)
        assert rep.olen >= rep.slen

    def test_empty_corpus(self):
        with pytest.raises(EmptyInput):
            mx.corpus_report([])


class TestReportTable:
    def test_columns_and_alignment(self):
        s = T("the cat sat .")
        rep = mx.corpus_report([(s, s, [s])])
        table = mx.format_report_table([("sys-a", rep), ("b", rep)])
        lines = table.splitlines()
        assert len(lines) == 3
        head = lines[0].split()
        assert head == ["system", "SARI", "add", "keep", "del", "FK", "SLen",
                        "OLen", "CR", "%split", "s-BL", "%new", "%eq"]
        # every row has the same printed width
        assert len({len(ln) for ln in lines}) == 1

    def test_machine_record_round_trips(self):
        s = T("the cat sat .")
        rep = mx.corpus_report([(s, s, [s])])
        rec = rep.as_record()
        assert set(rec) == {
            "sari", "add_f1", "keep_f1", "del_precision", "fk", "slen",
            "olen", "cr", "pct_split", "self_bleu", "pct_new", "pct_eq",
        }
        import json
        assert json.loads(rep.to_json()) == rec
