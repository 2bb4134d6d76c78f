"""End-to-end orchestration: corpus preparation, control modes, and reports.

The full system runs in stages: align and filter raw sentence pairs into a
corpus file, harvest split/delete candidates per source, rank them, then
paraphrase the top candidate under a copy constraint. Control modes steer
the ranking pool: split_focused keeps only candidates that actually split,
delete_focused keeps single-sentence candidates below a length cap, and
paraphrase_only bypasses candidate selection entirely.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields, replace
from enum import Enum

from . import augment as ag
from . import ranker as rk
from . import structgen as sg
from . import textcore as tc
from .errors import (EmptyInput, InvalidConfig, ModelNotReady, ParseError,
                     SimpkitError)
from .metrics import EvalReport, bleu, corpus_report
from .paraphraser import (ConstraintMode, CopyConstraint, GenerationResult,
                          ParaphraserConfig, ParaphraserModel,
                          ParaphraserTrainConfig, generate_detailed,
                          load_paraphraser)
from .ranker import RankerModel, RankerTrainConfig, load_ranker
from .structgen import Candidate, CandidateSet, GenerateConfig
from .textcore import TokenSeq

PARTITIONS = ("train", "dev", "test")


# --- corpus records ---------------------------------------------------------------

@dataclass(frozen=True)
class CorpusPair:
    """One aligned example: a complex input and its reference side(s)."""

    complex: str
    simples: tuple[str, ...]
    partition: str = "train"
    provenance: str = "aligned"

    def __post_init__(self):
        if self.partition not in PARTITIONS:
            raise InvalidConfig(f"partition must be one of {PARTITIONS}")
        if not self.simples:
            raise InvalidConfig("need at least one simple side")

    def source_seq(self) -> TokenSeq:
        return tc.tokenize(self.complex)

    def reference_seqs(self) -> list[TokenSeq]:
        return [tc.tokenize(s) for s in self.simples]


def _write_lines(path: str, lines) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as f:
        for line in lines:
            f.write(line + "\n")
    os.replace(tmp, path)


def write_corpus(path: str, pairs: list[CorpusPair]) -> None:
    records = ({"complex": p.complex, "simple": list(p.simples),
                "partition": p.partition, "provenance": p.provenance}
               for p in pairs)
    _write_lines(path, (json.dumps(r, sort_keys=True) for r in records))


def _record_to_pair(rec: dict, line: int) -> CorpusPair:
    try:
        complex_text = rec["complex"]
        simple = rec["simple"]
    except (KeyError, TypeError) as e:
        raise ParseError(f"record missing field: {e}", line_number=line) from e
    if isinstance(simple, str):
        simple = [simple]
    if (not isinstance(complex_text, str)
            or not isinstance(simple, list)
            or not all(isinstance(s, str) for s in simple)):
        raise ParseError("complex must be a string and simple a list of strings",
                         line_number=line)
    try:
        tc.tokenize(complex_text)
        for s in simple:
            tc.tokenize(s)
    except EmptyInput as e:
        raise ParseError(f"empty text after tokenization: {e}", line_number=line) from e
    partition = rec.get("partition", "train")
    if partition not in PARTITIONS:
        raise ParseError(f"unknown partition {partition!r}", line_number=line)
    return CorpusPair(complex=complex_text, simples=tuple(simple),
                      partition=partition,
                      provenance=rec.get("provenance", "aligned"))


def load_corpus(path: str) -> list[CorpusPair]:
    pairs = []
    with open(path, encoding="utf-8") as f:
        for ln, raw in enumerate(f, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as e:
                raise ParseError(f"bad JSON: {e.msg}", line_number=ln) from e
            pairs.append(_record_to_pair(rec, ln))
    return pairs


# --- corpus preparation ------------------------------------------------------------

def read_aligned(path: str) -> list[dict]:
    """Raw alignment records: one JSON object per line with id, complex, and
    simple fields; the line number rides along for later diagnostics."""
    records = []
    with open(path, encoding="utf-8") as f:
        for ln, raw in enumerate(f, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as e:
                raise ParseError(f"bad JSON: {e.msg}", line_number=ln) from e
            if not isinstance(rec, dict):
                raise ParseError("record must be an object", line_number=ln)
            for key in ("id", "complex", "simple"):
                if not isinstance(rec.get(key), str) or not rec.get(key).strip():
                    raise ParseError(f"missing or empty field {key!r}",
                                     line_number=ln)
            rec["line"] = ln
            records.append(rec)
    return records


def prepare_corpus(records: list[dict],
                   bleu_low: float = 0.1, bleu_high: float = 0.9) -> list[CorpusPair]:
    """Group by alignment id (simple sides sharing a complex id are joined
    in order), then drop near-identical and near-disjoint pairs by length-
    weighted n-gram overlap with the complex side."""
    groups: dict[str, dict] = {}
    order: list[str] = []
    for rec in records:
        gid = rec["id"]
        if gid not in groups:
            groups[gid] = {"complex": rec["complex"], "simples": [],
                           "partition": rec.get("partition", "train"),
                           "line": rec.get("line")}
            order.append(gid)
        elif rec["complex"] != groups[gid]["complex"]:
            raise ParseError(f"alignment id {gid!r} has conflicting complex sides",
                             line_number=rec.get("line"))
        groups[gid]["simples"].append(rec["simple"])
    out = []
    for gid in order:
        g = groups[gid]
        simple = " ".join(g["simples"])
        try:
            src_seq = tc.tokenize(g["complex"])
            ref_seq = tc.tokenize(simple)
        except EmptyInput as e:
            raise ParseError(f"empty side in group {gid!r}: {e}",
                             line_number=g["line"]) from e
        overlap = bleu(ref_seq, [src_seq]) / 100.0
        if overlap > bleu_high or overlap < bleu_low:
            continue
        out.append(CorpusPair(complex=src_seq.text(), simples=(ref_seq.text(),),
                              partition=g["partition"]))
    return out


# --- control modes and simplification -----------------------------------------------

class ControlMode(Enum):
    OVERALL = "overall"
    SPLIT_FOCUSED = "split_focused"
    DELETE_FOCUSED = "delete_focused"
    PARAPHRASE_ONLY = "paraphrase_only"


@dataclass(frozen=True)
class ControlConfig:
    mode: ControlMode = ControlMode.OVERALL
    cp: CopyConstraint = field(default_factory=CopyConstraint)
    delete_cr_max: float = 0.7


@dataclass
class PipelineModels:
    ranker: RankerModel | None = None
    paraphraser: ParaphraserModel | None = None
    delsplit: ParaphraserModel | None = None


@dataclass(frozen=True)
class SimplifyResult:
    output: TokenSeq
    mode: ControlMode
    candidate: Candidate | None     # None in paraphrase_only mode
    pool_size: int
    pool_fallback: bool             # mode filter emptied the pool
    decode_fallback: bool           # paraphraser could not finish legally
    paraphrase_score: float


def _mode_pool(candidates: tuple[Candidate, ...], control: ControlConfig) -> list[Candidate]:
    if control.mode is ControlMode.SPLIT_FOCUSED:
        return [c for c in candidates if c.split_count >= 2]
    if control.mode is ControlMode.DELETE_FOCUSED:
        return [c for c in candidates
                if c.split_count == 1 and c.cr < control.delete_cr_max]
    return list(candidates)


def simplify_detailed(source: TokenSeq, models: PipelineModels,
                      control: ControlConfig | None = None,
                      gen_cfg: GenerateConfig | None = None) -> SimplifyResult:
    """Candidate generation, mode-filtered ranking, then constrained
    paraphrasing of the winner. The paraphrase step always pins the sentence
    count to its input's, so structural choices stay where they were made."""
    control = control or ControlConfig()
    if models.paraphraser is None:
        raise ModelNotReady("simplify needs a trained paraphraser")

    if control.mode is ControlMode.PARAPHRASE_ONLY:
        res = generate_detailed(models.paraphraser, source, cp=control.cp,
                                mode=ConstraintMode.FIXED_SENTENCES,
                                num_sentences=source.num_sentences)
        return SimplifyResult(output=res.output, mode=control.mode,
                              candidate=None, pool_size=0, pool_fallback=False,
                              decode_fallback=res.used_fallback,
                              paraphrase_score=res.score)

    if models.ranker is None:
        raise ModelNotReady(f"mode {control.mode.value} needs a trained ranker")
    cfg = gen_cfg or GenerateConfig()
    if models.delsplit is not None and cfg.neural_model is None:
        cfg = replace(cfg, neural_model=models.delsplit)
    cset = sg.generate(source, cfg)

    pool = _mode_pool(cset.candidates, control)
    pool_fallback = not pool
    if pool_fallback:
        pool = list(cset.candidates)
    ranked = rk.rank(models.ranker, CandidateSet(source=source,
                                                 candidates=tuple(pool)))
    top = ranked[0]
    res = generate_detailed(models.paraphraser, top.tokens, cp=control.cp,
                            mode=ConstraintMode.FIXED_SENTENCES,
                            num_sentences=top.tokens.num_sentences)
    return SimplifyResult(output=res.output, mode=control.mode, candidate=top,
                          pool_size=len(pool), pool_fallback=pool_fallback,
                          decode_fallback=res.used_fallback,
                          paraphrase_score=res.score)


def simplify(source: TokenSeq, models: PipelineModels,
             control: ControlConfig | None = None,
             gen_cfg: GenerateConfig | None = None) -> TokenSeq:
    return simplify_detailed(source, models, control, gen_cfg).output


def run_simplify(sources: list[TokenSeq], models: PipelineModels,
                 control: ControlConfig | None = None,
                 gen_cfg: GenerateConfig | None = None
                 ) -> tuple[list[SimplifyResult], dict]:
    """Batch simplification with the fallback accounting the reports need."""
    results = [simplify_detailed(s, models, control, gen_cfg) for s in sources]
    stats = {
        "count": len(results),
        "pool_fallbacks": sum(r.pool_fallback for r in results),
        "decode_fallbacks": sum(r.decode_fallback for r in results),
    }
    return results, stats


# --- configuration file -----------------------------------------------------------------

def _load_toml(path: str) -> dict:
    try:
        import tomllib  # python >= 3.11
    except ModuleNotFoundError:
        import tomli as tomllib
    with open(path, "rb") as f:
        try:
            return tomllib.load(f)
        except tomllib.TOMLDecodeError as e:
            raise ParseError(f"bad config file: {e}") from e


@dataclass(frozen=True)
class PipelineConfig:
    rules: GenerateConfig = field(default_factory=GenerateConfig)
    ranker: RankerTrainConfig = field(default_factory=RankerTrainConfig)
    paraphraser: ParaphraserTrainConfig = field(default_factory=ParaphraserTrainConfig)
    control: ControlConfig = field(default_factory=ControlConfig)


def _build(cls, section: dict, name: str, coerce=None):
    allowed = {f.name for f in fields(cls)}
    kwargs = {}
    for key, value in section.items():
        if key not in allowed:
            raise InvalidConfig(f"unknown key {key!r} in [{name}]")
        kwargs[key] = coerce(key, value) if coerce else value
    return cls(**kwargs)


def load_config(path: str) -> PipelineConfig:
    doc = _load_toml(path)
    known = {"rules", "ranker", "paraphraser", "control"}
    unknown = set(doc) - known
    if unknown:
        raise InvalidConfig(f"unknown config sections: {sorted(unknown)}")

    rules_sec = dict(doc.get("rules", {}))
    if "enabled" in rules_sec:
        rules_sec["enabled_rules"] = tuple(rules_sec.pop("enabled"))
    rules = _build(GenerateConfig, rules_sec, "rules")

    ranker = _build(RankerTrainConfig, dict(doc.get("ranker", {})), "ranker",
                    coerce=lambda k, v: tuple(v) if k == "hidden" else v)

    para_sec = dict(doc.get("paraphraser", {}))
    arch_fields = {f.name for f in fields(ParaphraserConfig)}
    arch_sec = {k: para_sec.pop(k) for k in list(para_sec) if k in arch_fields}
    if "copy_hidden" in arch_sec:
        arch_sec["copy_hidden"] = tuple(arch_sec["copy_hidden"])
    arch = _build(ParaphraserConfig, arch_sec, "paraphraser")
    para = _build(ParaphraserTrainConfig, {**para_sec, "arch": arch},
                  "paraphraser")

    ctl_sec = dict(doc.get("control", {}))
    if "mode" in ctl_sec:
        try:
            ctl_sec["mode"] = ControlMode(ctl_sec["mode"])
        except ValueError as e:
            raise InvalidConfig(f"unknown control mode {ctl_sec['mode']!r}") from e
    if "cp" in ctl_sec:
        ctl_sec["cp"] = CopyConstraint(float(ctl_sec["cp"]))
    control = _build(ControlConfig, ctl_sec, "control")
    return PipelineConfig(rules=rules, ranker=ranker, paraphraser=para,
                          control=control)


# --- training and evaluation entry points used by the CLI ----------------------------------

def ranker_rows(pairs: list[CorpusPair],
                rules: GenerateConfig) -> list[tuple[TokenSeq, TokenSeq, CandidateSet]]:
    rows = []
    for p in pairs:
        src = p.source_seq()
        ref = p.reference_seqs()[0]
        cset = sg.rule_candidates(src, rules.enabled_rules, rules.cr_low,
                                  rules.cr_high)
        rows.append((src, ref, cset))
    return rows


def training_pairs(pairs: list[CorpusPair]) -> list[tuple[TokenSeq, TokenSeq]]:
    return [(p.source_seq(), p.reference_seqs()[0]) for p in pairs]


def augment_corpus(pairs: list[CorpusPair], rules: GenerateConfig,
                   cfg: ag.AugmentConfig | None = None) -> list[CorpusPair]:
    """Train rows gain retained candidate pairs (flagged); other partitions
    pass through untouched."""
    out = []
    for p in pairs:
        if p.partition != "train":
            out.append(p)
            continue
        src = p.source_seq()
        ref = p.reference_seqs()[0]
        cset = sg.rule_candidates(src, rules.enabled_rules, rules.cr_low,
                                  rules.cr_high)
        for rec in ag.augment_records(src, ref, cset, cfg, partition=p.partition):
            out.append(CorpusPair(complex=rec["complex"],
                                  simples=tuple(rec["simple"]),
                                  partition=rec["partition"],
                                  provenance=rec["provenance"]))
    return out


def evaluate_outputs(pairs: list[CorpusPair], outputs: list[TokenSeq]) -> EvalReport:
    if len(pairs) != len(outputs):
        raise InvalidConfig(
            f"{len(outputs)} outputs for {len(pairs)} corpus pairs")
    rows = [(p.source_seq(), out, p.reference_seqs())
            for p, out in zip(pairs, outputs)]
    return corpus_report(rows)


def load_models(ranker_path: str | None = None,
                paraphraser_path: str | None = None,
                delsplit_path: str | None = None) -> PipelineModels:
    models = PipelineModels()
    if ranker_path:
        models.ranker = load_ranker(ranker_path)
    if paraphraser_path:
        models.paraphraser = load_paraphraser(paraphraser_path)
    if delsplit_path:
        models.delsplit = load_paraphraser(delsplit_path)
        if models.delsplit.use_copy:
            raise ModelNotReady(
                "delsplit checkpoint has a copy network; expected the plain variant")
    return models
