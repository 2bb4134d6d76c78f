"""Candidate scoring and selection.

The gold score for a candidate against a reference is a length-penalized
similarity: exp(-lambda * |cr_candidate - cr_target|) * similarity. A small
feedforward scorer is trained to reproduce the gold ordering with a pairwise
hinge loss over sampled candidate pairs, then candidates are ranked by the
learned score.
"""

from __future__ import annotations

import json
import math
import os
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import textcore as tc
from .errors import (DegenerateTraining, EmptyInput, InvalidConfig,
                     ModelNotReady)
from .neural import autodiff as ad
from .neural.checkpoint import load_checkpoint, save_checkpoint
from .neural.layers import MLPSpec, init_mlp, mlp_forward
from .neural.optim import adam_init, adam_step
from .neural.params import ParamStore
from .structgen import RULES, Candidate, CandidateSet
from .textcore import GaussianBinner, TokenSeq

# --- similarity registry -----------------------------------------------------

def lemma_lite(token: str) -> str:
    """Suffix-stripping normalization: plural/inflection endings removed."""
    if len(token) > 4 and token.endswith("ing"):
        return token[:-3]
    if len(token) > 3 and (token.endswith("ed") or token.endswith("es")):
        return token[:-2]
    if len(token) > 3 and token.endswith("s") and not token.endswith("ss"):
        return token[:-1]
    return token


def soft_f1(candidate: TokenSeq, reference: TokenSeq) -> float:
    """Unigram F1 over lemma-normalized tokens (multiset overlap)."""
    cv = Counter(lemma_lite(t) for t in candidate.tokens)
    cy = Counter(lemma_lite(t) for t in reference.tokens)
    overlap = sum((cv & cy).values())
    if overlap == 0:
        return 0.0
    p = overlap / sum(cv.values())
    r = overlap / sum(cy.values())
    return 2 * p * r / (p + r)


def exact_match(candidate: TokenSeq, reference: TokenSeq) -> float:
    return 1.0 if candidate.tokens == reference.tokens else 0.0


def _char_trigram_vec(token: str) -> Counter:
    padded = f"#{token}#"
    if len(padded) < 3:
        return Counter({padded: 1})
    return Counter(padded[i : i + 3] for i in range(len(padded) - 2))


def _cos(a: Counter, b: Counter) -> float:
    dot = sum(c * b[g] for g, c in a.items())
    if dot == 0:
        return 0.0
    na = math.sqrt(sum(c * c for c in a.values()))
    nb = math.sqrt(sum(c * c for c in b.values()))
    return dot / (na * nb)


def char_cosine(candidate: TokenSeq, reference: TokenSeq) -> float:
    """Greedy token matching under character-trigram cosine; F1 of the
    directional averages. A static stand-in for embedding-based scoring."""
    va = [_char_trigram_vec(t) for t in candidate.tokens]
    vb = [_char_trigram_vec(t) for t in reference.tokens]
    p = sum(max(_cos(a, b) for b in vb) for a in va) / len(va)
    r = sum(max(_cos(b, a) for a in va) for b in vb) / len(vb)
    if p + r == 0:
        return 0.0
    return 2 * p * r / (p + r)


SIMILARITIES: dict[str, Callable[[TokenSeq, TokenSeq], float]] = {
    "soft_f1": soft_f1,
    "exact_match": exact_match,
    "char_cosine": char_cosine,
}


def resolve_similarity(spec: str | Callable) -> Callable[[TokenSeq, TokenSeq], float]:
    if callable(spec):
        return spec
    if spec not in SIMILARITIES:
        raise InvalidConfig(f"unknown similarity {spec!r}; known: {list(SIMILARITIES)}")
    return SIMILARITIES[spec]


# --- gold scoring (length-penalized similarity) -------------------------------

@dataclass(frozen=True)
class GoldScorerConfig:
    """lam weights the compression-ratio penalty; target_cr sets the desired
    ratio (None: use the reference's own ratio against the source)."""

    lam: float = 1.0
    target_cr: float | None = None
    similarity: str | Callable = "soft_f1"

    def __post_init__(self):
        if self.lam < 0:
            raise InvalidConfig("lam must be non-negative")


def gold_score(candidate: Candidate, reference: TokenSeq, cfg: GoldScorerConfig,
               source: TokenSeq | None = None) -> float:
    """exp(-lam * |cr_v - cr_target|) * similarity(v, reference), in [0, 1]."""
    if not reference.tokens:
        raise EmptyInput("gold_score needs a non-empty reference")
    sim = resolve_similarity(cfg.similarity)(candidate.tokens, reference)
    if not 0.0 <= sim <= 1.0:
        raise InvalidConfig(f"similarity returned {sim}, outside [0, 1]")
    if cfg.target_cr is not None:
        target = cfg.target_cr
    else:
        if source is not None:
            words_source = tc.word_count(source)
        else:
            # the candidate's stored ratio pins down the source word count
            words_source = round(tc.word_count(candidate.tokens) / candidate.cr)
        target = tc.word_count(reference) / words_source
    return math.exp(-cfg.lam * abs(candidate.cr - target)) * sim


# --- features ------------------------------------------------------------------

REAL_FEATURES = ("words_candidate", "words_source", "cr", "jaccard", "rule_count")


@dataclass(frozen=True)
class RankFeatures:
    words_candidate: int
    words_source: int
    cr: float
    jaccard: float
    rule_indicators: tuple[int, ...]
    rule_count: int

    def reals(self) -> tuple[float, ...]:
        return (float(self.words_candidate), float(self.words_source),
                self.cr, self.jaccard, float(self.rule_count))


def extract_features(candidate: Candidate, source: TokenSeq) -> RankFeatures:
    """Deterministic feature read-out; neural candidates carry no rule bits."""
    indicators = tuple(int(name in candidate.rules_applied) for name in RULES)
    return RankFeatures(
        words_candidate=tc.word_count(candidate.tokens),
        words_source=tc.word_count(source),
        cr=candidate.cr,
        jaccard=tc.jaccard(candidate.tokens, source),
        rule_indicators=indicators,
        rule_count=candidate.rule_count,
    )


# --- model ------------------------------------------------------------------------

@dataclass
class RankerModel:
    """Binners + a tanh MLP over the binned-and-indicator feature vector."""

    store: ParamStore
    mlp_spec: MLPSpec
    binners: dict[str, GaussianBinner]
    rule_names: tuple[str, ...]
    history: list[dict] = field(default_factory=list)

    @property
    def feature_dim(self) -> int:
        return sum(b.num_bins for b in self.binners.values()) + len(self.rule_names)


def feature_vector(model: RankerModel, feats: RankFeatures) -> np.ndarray:
    parts = [
        tc.binner_transform(model.binners[name], value)
        for name, value in zip(REAL_FEATURES, feats.reals())
    ]
    parts.append(np.asarray(feats.rule_indicators, dtype=np.float64))
    return np.concatenate(parts)


def feature_matrix(model: RankerModel, candidates, source: TokenSeq) -> np.ndarray:
    rows = [feature_vector(model, extract_features(c, source)) for c in candidates]
    return np.stack(rows).astype(model.store.dtype)


def score(model: RankerModel, cset: CandidateSet, source: TokenSeq | None = None) -> np.ndarray:
    """Deterministic scores g(v) for every candidate (dropout off)."""
    if not cset.candidates:
        raise EmptyInput("cannot score an empty candidate set")
    src = source if source is not None else cset.source
    x = feature_matrix(model, cset.candidates, src)
    with ad.no_grad():
        out = mlp_forward(model.store, "rank", model.mlp_spec, ad.Tensor(x), train=False)
    return out.data.reshape(-1).astype(np.float64)


def rank(model: RankerModel, cset: CandidateSet, source: TokenSeq | None = None) -> list[Candidate]:
    """Candidates by decreasing score; ties by lower rule_count, then input order."""
    s = score(model, cset, source)
    order = sorted(range(len(s)), key=lambda i: (-s[i], cset.candidates[i].rule_count, i))
    return [cset.candidates[i] for i in order]


# --- training -------------------------------------------------------------------------

Row = tuple[TokenSeq, TokenSeq, CandidateSet]  # (source, reference, candidates)


@dataclass(frozen=True)
class RankerTrainConfig:
    learning_rate: float = 0.01
    epochs: int = 10
    dropout: float = 0.2
    sample_size: int = 10
    num_bins: int = 10
    hidden: tuple[int, ...] = (100, 100, 100)
    seed: int = 0
    dev_fraction: float = 0.1
    gold: GoldScorerConfig = field(default_factory=GoldScorerConfig)
    # test hook: overrides gold_score; called as (source, reference, candidate)
    gold_fn: Callable[[TokenSeq, TokenSeq, Candidate], float] | None = None
    log_path: str | None = None
    dtype: str = "float32"


def _gold_for_row(row: Row, cfg: RankerTrainConfig) -> np.ndarray:
    source, reference, cset = row
    if cfg.gold_fn is not None:
        return np.array([cfg.gold_fn(source, reference, c) for c in cset.candidates])
    return np.array([gold_score(c, reference, cfg.gold, source) for c in cset.candidates])


def _sign_matrix(gold: np.ndarray) -> np.ndarray:
    return np.sign(gold[:, None] - gold[None, :])


def _pairwise_loss(model: RankerModel, feats: np.ndarray, labels: np.ndarray,
                   train: bool, rng) -> ad.Tensor:
    """Mean hinge over ordered pairs i != j: max(0, 1 - l_ij (g_i - g_j))."""
    n = feats.shape[0]
    s = mlp_forward(model.store, "rank", model.mlp_spec, ad.Tensor(feats),
                    train=train, rng=rng)                      # (n, 1)
    d = s - ad.transpose(s, (1, 0))                            # (n, n)
    hinge = ad.relu(1.0 - d * ad.constant(labels.astype(feats.dtype)))
    off_diag = (1.0 - np.eye(n)).astype(feats.dtype)
    return ad.tsum(hinge * ad.constant(off_diag)) * (1.0 / (n * (n - 1)))


def pairwise_accuracy(model: RankerModel, rows: list[Row],
                      cfg: RankerTrainConfig | None = None) -> float:
    """Fraction of gold-ordered candidate pairs the model orders the same way."""
    cfg = cfg or RankerTrainConfig()
    agree = total = 0
    for row in rows:
        source, _, cset = row
        if len(cset.candidates) < 2:
            continue
        gold = _gold_for_row(row, cfg)
        s = score(model, cset, source)
        for i in range(len(s)):
            for j in range(i + 1, len(s)):
                l = np.sign(gold[i] - gold[j])
                if l == 0:
                    continue
                total += 1
                if np.sign(s[i] - s[j]) == l:
                    agree += 1
    return agree / total if total else 0.0


def _dev_sari(model: RankerModel, rows: list[Row]) -> float:
    from .metrics import sari  # local import keeps metrics optional at import time

    if not rows:
        return 0.0
    vals = []
    for source, reference, cset in rows:
        top = rank(model, cset, source)[0]
        vals.append(sari(source, top.tokens, [reference]).sari)
    return float(np.mean(vals))


def train_pairwise(corpus: list[Row], cfg: RankerTrainConfig | None = None) -> RankerModel:
    """Fit binners and the pairwise scorer; keep the epoch with the best
    dev pairwise accuracy (final epoch when there is no dev split)."""
    cfg = cfg or RankerTrainConfig()
    if not corpus:
        raise DegenerateTraining("empty training corpus")
    if max(len(r[2].candidates) for r in corpus) < 2:
        raise DegenerateTraining("no example has two or more candidates")

    rng = np.random.default_rng(cfg.seed)
    perm = rng.permutation(len(corpus))
    dev_count = int(round(cfg.dev_fraction * len(corpus)))
    dev_rows = [corpus[i] for i in perm[:dev_count]]
    train_rows = [corpus[i] for i in perm[dev_count:]]
    if not any(len(r[2].candidates) >= 2 for r in train_rows):
        raise DegenerateTraining("training split has no example with >= 2 candidates")

    binners = {
        name: tc.binner_fit(
            [f.reals()[k] for _, _, cs in train_rows
             for f in (extract_features(c, cs.source) for c in cs.candidates)],
            cfg.num_bins)
        for k, name in enumerate(REAL_FEATURES)
    }
    rule_names = tuple(RULES)
    dim = cfg.num_bins * len(REAL_FEATURES) + len(rule_names)
    spec = MLPSpec(sizes=(dim, *cfg.hidden, 1), activation="tanh",
                   out_activation="linear", dropout=cfg.dropout)
    store = ParamStore(seed=cfg.seed, dtype=cfg.dtype)
    init_mlp(store, "rank", spec, rng)
    model = RankerModel(store=store, mlp_spec=spec, binners=binners,
                        rule_names=rule_names)
    state = adam_init(store, learning_rate=cfg.learning_rate)

    feats_cache = [feature_matrix(model, r[2].candidates, r[0]) for r in train_rows]
    gold_cache = [_gold_for_row(r, cfg) for r in train_rows]

    best_acc = -1.0
    best_params: dict[str, np.ndarray] | None = None
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(train_rows))
        losses = []
        for ri in order:
            feats, gold = feats_cache[ri], gold_cache[ri]
            n = feats.shape[0]
            if n < 2:
                continue
            k = min(cfg.sample_size, n)
            pick = np.sort(rng.choice(n, size=k, replace=False))
            labels = _sign_matrix(gold[pick])
            store.zero_grad()
            loss = _pairwise_loss(model, feats[pick], labels, train=True, rng=rng)
            loss.backward()
            adam_step(state, store, store.grads())
            losses.append(float(loss.data))
        record = {"epoch": epoch, "loss": float(np.mean(losses))}
        if dev_rows:
            record["dev_pairwise_accuracy"] = pairwise_accuracy(model, dev_rows, cfg)
            record["dev_sari"] = _dev_sari(model, dev_rows)
            if record["dev_pairwise_accuracy"] > best_acc:
                best_acc = record["dev_pairwise_accuracy"]
                best_params = {n_: t.data.copy() for n_, t in store.items()}
        model.history.append(record)
    if best_params is not None:
        for name, arr in best_params.items():
            store.set_data(name, arr)
    if cfg.log_path:
        tmp = f"{cfg.log_path}.tmp"
        with open(tmp, "w", encoding="utf-8") as f:
            for rec in model.history:
                f.write(json.dumps(rec, sort_keys=True) + "\n")
        os.replace(tmp, cfg.log_path)
    return model


# --- persistence --------------------------------------------------------------------------

def save_ranker(path: str, model: RankerModel) -> None:
    meta = {
        "kind": "ranker",
        "mlp": {"sizes": list(model.mlp_spec.sizes),
                "activation": model.mlp_spec.activation,
                "out_activation": model.mlp_spec.out_activation,
                "dropout": model.mlp_spec.dropout},
        "binners": {n: {"centers": list(b.centers), "sigma": b.sigma}
                    for n, b in model.binners.items()},
        "rule_names": list(model.rule_names),
        "history": model.history,
    }
    save_checkpoint(path, model.store, meta)


def load_ranker(path: str) -> RankerModel:
    store, meta = load_checkpoint(path)
    if meta.get("kind") != "ranker":
        raise ModelNotReady(f"{path} is not a ranker checkpoint")
    spec = MLPSpec(sizes=tuple(meta["mlp"]["sizes"]),
                   activation=meta["mlp"]["activation"],
                   out_activation=meta["mlp"]["out_activation"],
                   dropout=meta["mlp"]["dropout"])
    binners = {
        n: GaussianBinner(centers=tuple(v["centers"]), sigma=v["sigma"])
        for n, v in meta["binners"].items()
    }
    return RankerModel(store=store, mlp_spec=spec, binners=binners,
                       rule_names=tuple(meta["rule_names"]),
                       history=list(meta["history"]))
