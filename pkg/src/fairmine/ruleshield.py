"""Rule-level discrimination prevention by minimal data transformation.

Four pipelines rewrite a decision table until re-auditing stops flagging:
direct rule protection (two perturbation methods), rule generalization
against legitimate context rules, indirect rule protection for redlining
rules, and a simultaneous pass that covers direct and indirect bias at once.

The shared mechanics: the frequent rule set and the per-record impact index
are frozen before the first flip, loop guards are recomputed live on the
mutating table, and records are modified — never added or removed — in
ascending (impact, record id) order.  Rules whose guard is still violated
after the candidate pool runs dry are reported as unresolved, not fatal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .measures import (
    IndirectCompanion,
    RedliningAudit,
    RuleAudit,
    current_value,
    elb,
    find_redlining,
    is_discriminatory,
)
from .mining import ClassificationRule, MinedRule
from .model import (
    ConfigError,
    DecisionTable,
    Item,
    ItemIndex,
    Itemset,
    ProtectionConfig,
    make_itemset,
    render_itemset,
)


def _render_rule(premise: Itemset, conclusion: Item) -> str:
    return f"{', '.join(render_itemset(premise))} -> {conclusion}"


# ---------------------------------------------------------------------------
# impact ordering


def build_impact_index(index: ItemIndex, rules: Sequence[MinedRule]) -> tuple[int, ...]:
    """impact(record) = number of rules whose premise the record supports."""
    impact = [0] * index.n
    for mined in rules:
        for rec in index.records(index.mask(mined.rule.premise)):
            impact[rec] += 1
    return tuple(impact)


# ---------------------------------------------------------------------------
# transformation bookkeeping


@dataclass(frozen=True)
class Flip:
    record_id: int          # 1-based, stable across the run
    attribute: str
    old: str
    new: str
    rule: str               # rendered rule the flip served
    phase: str

    def to_json(self) -> dict:
        return {"record_id": self.record_id, "attribute": self.attribute,
                "old": self.old, "new": self.new, "rule": self.rule,
                "phase": self.phase}


@dataclass(frozen=True)
class TransformResult:
    table: DecisionTable
    log: tuple[Flip, ...]
    unresolved: tuple[str, ...]

    def to_json(self) -> dict:
        return {"flips": [f.to_json() for f in self.log],
                "unresolved": list(self.unresolved)}


class _Workspace:
    """Mutable view of one table plus the frozen impact order."""

    def __init__(self, table: DecisionTable, frozen_rules: Sequence[MinedRule]):
        self.table = table
        self.index = ItemIndex(table)
        self.impact = build_impact_index(self.index, frozen_rules)
        self.rows = [list(r) for r in table.rows]
        self.log: list[Flip] = []
        self.unresolved: list[str] = []

    def candidates(self, require: Itemset, exclude: Sequence[Itemset],
                   klass: Item) -> list[int]:
        """Records holding `require` and class `klass` but failing every
        itemset in `exclude` (set complement), ascending (impact, id)."""
        full = (1 << self.index.n) - 1
        m = self.index.mask(require) & self.index.masks.get(klass, 0)
        for its in exclude:
            if its:
                m &= full & ~self.index.mask(its)
        recs = list(self.index.records(m))
        recs.sort(key=lambda i: (self.impact[i], i))
        return recs

    def assign_items(self, rec: int, items: Itemset, rule: str, phase: str) -> None:
        for it in sorted(items):
            col = self.table.column(it.attribute)
            old = self.rows[rec][col]
            if old == it.value:
                continue
            self.index.set_value(rec, Item(it.attribute, old), it)
            self.rows[rec][col] = it.value
            self.log.append(Flip(rec + 1, it.attribute, old, it.value, rule, phase))

    def result(self) -> TransformResult:
        out = self.table.replaced(tuple(tuple(r) for r in self.rows))
        return TransformResult(out, tuple(self.log), tuple(self.unresolved))


def _require_elift(config: ProtectionConfig, what: str) -> None:
    if config.measure != "elift":
        raise ConfigError(
            f"{what} rests on an extended-lift bound and is only defined for "
            f"measure=elift (got {config.measure!r})")


# ---------------------------------------------------------------------------
# approach selection (plan for the combined direct pipeline)


@dataclass(frozen=True)
class PlanEntry:
    audit: RuleAudit
    approach: str                        # "NT" | "DRP" | "RG"
    r_b: Optional[MinedRule] = None      # companion rule when RG
    dif1: Optional[Fraction] = None      # d·conf(r') − conf(r_b)

    def to_json(self) -> dict:
        out = {"premise": render_itemset(self.audit.rule.premise),
               "class": str(self.audit.rule.conclusion),
               "approach": self.approach}
        if self.r_b is not None:
            out["companion"] = render_itemset(self.r_b.rule.premise)
        return out


@dataclass(frozen=True)
class TransformPlan:
    entries: tuple[PlanEntry, ...]

    def by_approach(self, approach: str) -> tuple[PlanEntry, ...]:
        return tuple(e for e in self.entries if e.approach == approach)


def select_approach(mr: Sequence[RuleAudit], fr: Sequence[MinedRule],
                    source, config: ProtectionConfig) -> TransformPlan:
    """Pick NT / RG / DRP per flagged rule, preferring the cheaper rewrite.

    A legitimate context rule r_b: D,B → C explains r' away outright when
    conf(r_b) ≥ d·conf(r') and conf(A,B → D) ≥ d (no transformation).  When
    only the second condition holds, generalization toward the r_b closest to
    condition one is possible; it is kept only if its confidence gap beats
    the direct-protection gap conf(r') − α·conf(B → C).
    """
    _require_elift(config, "approach selection")
    if config.alpha is None:
        raise ConfigError("approach selection needs alpha")
    index = source if isinstance(source, ItemIndex) else ItemIndex(source)
    redlining_keys = {ra.mined.key() for ra in find_redlining(fr, index, config)}
    legitimate = sorted(
        (m for m in fr
         if m.rule.conclusion == config.negative_class
         and not (m.rule.premise & config.protected_pool)
         and m.key() not in redlining_keys),
        key=lambda m: m.key())
    entries = []
    for audit in sorted(mr, key=lambda a: a.mined.key()):
        a_part, b_part = audit.a_part, audit.b_part
        conf_rp = audit.mined.conf
        delta = index.conf(b_part, audit.rule.conclusion) or Fraction(0)
        candidates = []
        for r in legitimate:
            if not b_part < r.rule.premise:
                continue
            d_part = r.rule.premise - b_part
            ab = make_itemset(set(a_part) | set(b_part))
            # Condition 2: conf(A,B → D) ≥ d, with D possibly multi-item.
            n = index.support(ab)
            if n == 0:
                continue
            a = (index.mask(ab) & index.mask(d_part)).bit_count()
            cond2 = Fraction(a, n) >= config.d
            cond1 = r.conf >= config.d * conf_rp
            candidates.append((r, cond1, cond2))
        if any(c1 and c2 for _, c1, c2 in candidates):
            entries.append(PlanEntry(audit, "NT"))
            continue
        viable = [(config.d * conf_rp - r.conf, r)
                  for r, _c1, c2 in candidates if c2]
        if not viable:
            entries.append(PlanEntry(audit, "DRP"))
            continue
        viable.sort(key=lambda vr: (vr[0], vr[1].key()))
        dif1, r_b = viable[0]
        dif_rule = conf_rp - config.alpha * delta
        if dif_rule < dif1:
            entries.append(PlanEntry(audit, "DRP"))
        else:
            entries.append(PlanEntry(audit, "RG", r_b, dif1))
    return TransformPlan(tuple(entries))


# ---------------------------------------------------------------------------
# direct rule protection


def _run_drp(table: DecisionTable, mr: Sequence[RuleAudit],
             fr: Sequence[MinedRule], config: ProtectionConfig,
             method: int, workspace: Optional[_Workspace] = None,
             only: Optional[Sequence[RuleAudit]] = None) -> _Workspace:
    if config.alpha is None:
        raise ConfigError("direct rule protection needs alpha")
    ws = workspace or _Workspace(table, fr)
    phase = f"drp{method}"
    todo = sorted(only if only is not None else mr, key=lambda a: a.mined.key())
    for audit in todo:
        label = _render_rule(audit.rule.premise, audit.rule.conclusion)
        positive = config.positive_class(ws.table)
        pool = ws.candidates(audit.b_part, [audit.a_part], positive)
        pos = 0
        while is_discriminatory(
                current_value(audit.a_part, audit.b_part, audit.rule.conclusion,
                              ws.index, config.measure), config.alpha):
            if pos >= len(pool):
                ws.unresolved.append(label)
                break
            rec = pool[pos]
            pos += 1
            if method == 1:
                ws.assign_items(rec, audit.a_part, label, phase)
            else:
                ws.assign_items(rec, frozenset({config.negative_class}), label, phase)
    return ws


def drp_method1(table: DecisionTable, mr: Sequence[RuleAudit],
                fr: Sequence[MinedRule], config: ProtectionConfig) -> TransformResult:
    """Turn complement records into protected ones (¬A → A on ¬A,B,¬C).

    Each flip grows the protected group without granting it the denying
    class, so conf(A,B → C) falls until the rule stops flagging.
    """
    return _run_drp(table, mr, fr, config, 1).result()


def drp_method2(table: DecisionTable, mr: Sequence[RuleAudit],
                fr: Sequence[MinedRule], config: ProtectionConfig) -> TransformResult:
    """Deny the benefit to complement records (¬C → C on ¬A,B,¬C).

    Each flip lifts the context baseline conf(B → C), closing the gap from
    the other side; conf(A,B → C) itself never moves.
    """
    return _run_drp(table, mr, fr, config, 2).result()


# ---------------------------------------------------------------------------
# rule generalization


def rule_generalization(table: DecisionTable, plan: TransformPlan,
                        fr: Sequence[MinedRule], config: ProtectionConfig,
                        workspace: Optional[_Workspace] = None) -> TransformResult:
    """Withdraw the denying class from A,B,¬D records until each planned
    rule is explained by its companion: conf(r') ≤ conf(r_b)/d."""
    _require_elift(config, "rule generalization")
    ws = workspace or _Workspace(table, fr)
    positive = config.positive_class(ws.table)
    for entry in plan.by_approach("RG"):
        audit, r_b = entry.audit, entry.r_b
        assert r_b is not None
        label = _render_rule(audit.rule.premise, audit.rule.conclusion)
        d_part = r_b.rule.premise - audit.b_part
        before_rb = ws.index.conf(r_b.rule.premise, r_b.rule.conclusion)
        ab = make_itemset(set(audit.a_part) | set(audit.b_part))
        before_r2 = (ws.index.mask(ab) & ws.index.mask(d_part)).bit_count()
        target_pool = ws.candidates(ab, [d_part], config.negative_class)
        pos = 0
        while True:
            conf_rp = ws.index.conf(audit.rule.premise, audit.rule.conclusion)
            conf_rb = ws.index.conf(r_b.rule.premise, r_b.rule.conclusion)
            if conf_rp is None or conf_rb is None or config.d == 0:
                break
            if conf_rp <= conf_rb / config.d:
                break
            if pos >= len(target_pool):
                ws.unresolved.append(label)
                break
            ws.assign_items(target_pool[pos], frozenset({positive}), label, "rg")
            pos += 1
        after_rb = ws.index.conf(r_b.rule.premise, r_b.rule.conclusion)
        after_r2 = (ws.index.mask(ab) & ws.index.mask(d_part)).bit_count()
        assert before_rb == after_rb and before_r2 == after_r2, \
            "generalization must leave the companion and instance confidences alone"
    return ws.result()


def drp_rg(table: DecisionTable, mr: Sequence[RuleAudit], fr: Sequence[MinedRule],
           config: ProtectionConfig) -> tuple[TransformResult, TransformPlan]:
    """Combined direct pipeline: plan per rule, then generalize or protect.

    Direct protection here is the class-perturbation method, which leaves
    every companion confidence untouched, so the two rewrites compose.
    """
    _require_elift(config, "the combined direct pipeline")
    index = ItemIndex(table)
    plan = select_approach(mr, fr, index, config)
    ws = _Workspace(table, fr)
    rule_generalization(table, plan, fr, config, workspace=ws)
    drp_entries = [e.audit for e in plan.by_approach("DRP")]
    _run_drp(table, mr, fr, config, 2, workspace=ws, only=drp_entries)
    return ws.result(), plan


# ---------------------------------------------------------------------------
# indirect rule protection


def irp(table: DecisionTable, rr: Sequence[RedliningAudit],
        fr: Sequence[MinedRule], config: ProtectionConfig,
        method: int) -> TransformResult:
    """Push every redlining bound below α.

    Candidates fully hold the context B but fail the background part D and
    the protected part A, and carry the granting class — so each flip moves
    exactly one quantity of the bound: method 1 assigns A (conf(A,B → D)
    falls), method 2 denies the benefit (conf(B → C) rises).
    """
    _require_elift(config, "indirect rule protection")
    if config.alpha is None:
        raise ConfigError("indirect rule protection needs alpha")
    if method not in (1, 2):
        raise ConfigError(f"unknown indirect method {method!r}")
    ws = _Workspace(table, fr)
    positive = config.positive_class(ws.table)
    for claim in sorted(rr, key=lambda ra: ra.mined.key()):
        conclusion = claim.rule.conclusion
        for comp in claim.companions:
            label = _render_rule(
                make_itemset(set(comp.a_part) | set(comp.b_part)), conclusion)
            pool = ws.candidates(comp.b_part, [comp.a_part, comp.d_part], positive)
            pos = 0
            while True:
                bound = _live_elb(ws.index, claim.rule.premise, comp, conclusion)
                if bound is None or bound < config.alpha:
                    break
                if pos >= len(pool):
                    ws.unresolved.append(label)
                    break
                rec = pool[pos]
                pos += 1
                if method == 1:
                    ws.assign_items(rec, comp.a_part, label, "irp1")
                else:
                    ws.assign_items(rec, frozenset({conclusion}), label, "irp2")
    return ws.result()


def _live_elb(index: ItemIndex, x_premise: Itemset, comp: IndirectCompanion,
              conclusion: Item) -> Optional[Fraction]:
    gamma = index.conf(x_premise, conclusion)
    delta = index.conf(comp.b_part, conclusion)
    supp_x = index.support(x_premise)
    xa = index.mask(x_premise) & index.mask(comp.a_part)
    ab = make_itemset(set(comp.a_part) | set(comp.b_part))
    supp_ab = index.support(ab)
    if gamma is None or delta is None or supp_x == 0 or supp_ab == 0:
        return None
    supp_xa = xa.bit_count()
    if supp_xa == 0:
        return None
    return elb(gamma, delta, Fraction(supp_xa, supp_ab), Fraction(supp_xa, supp_x))


# ---------------------------------------------------------------------------
# simultaneous direct + indirect


def simultaneous(table: DecisionTable, mr: Sequence[RuleAudit],
                 rr: Sequence[RedliningAudit], fr: Sequence[MinedRule],
                 config: ProtectionConfig) -> TransformResult:
    """One class-perturbation pass protecting against both kinds of bias.

    For every redlining companion the context baseline conf(B → C) is raised
    until the bound clears α — and, when the ensuing rule is itself flagged
    directly, until conf(r')/α clears too (the larger requirement governs).
    Remaining flagged rules then get the plain class-perturbation treatment.
    Only class flips are used: attribute flips would disturb the indirect
    quantities of sibling rules.
    """
    _require_elift(config, "the simultaneous pipeline")
    if config.alpha is None:
        raise ConfigError("the simultaneous pipeline needs alpha")
    ws = _Workspace(table, fr)
    positive = config.positive_class(ws.table)
    mr_by_key = {a.mined.key(): a for a in mr}
    handled = set()
    for claim in sorted(rr, key=lambda ra: ra.mined.key()):
        conclusion = claim.rule.conclusion
        for comp in claim.companions:
            ab = make_itemset(set(comp.a_part) | set(comp.b_part))
            rp_key = ClassificationRule(ab, conclusion).key()
            gamma = ws.index.conf(claim.rule.premise, conclusion)
            supp_x = ws.index.support(claim.rule.premise)
            supp_xa = (ws.index.mask(claim.rule.premise) & ws.index.mask(comp.a_part)).bit_count()
            supp_ab = ws.index.support(ab)
            if gamma is None or supp_x == 0 or supp_ab == 0 or supp_xa == 0:
                continue
            beta2 = Fraction(supp_xa, supp_x)
            beta1 = Fraction(supp_xa, supp_ab)
            req = (beta1 / beta2) * (beta2 + gamma - 1) / config.alpha
            label = _render_rule(ab, conclusion)
            if rp_key in mr_by_key:
                conf_rp = ws.index.conf(ab, conclusion)
                if conf_rp is not None:
                    req = max(req, conf_rp / config.alpha)
                handled.add(rp_key)
            pool = ws.candidates(comp.b_part, [comp.a_part, comp.d_part], positive)
            pos = 0
            while True:
                delta = ws.index.conf(comp.b_part, conclusion) or Fraction(0)
                if delta > req:
                    break
                if pos >= len(pool):
                    ws.unresolved.append(label)
                    break
                ws.assign_items(pool[pos], frozenset({conclusion}), label, "sim")
                pos += 1
    for key, audit in sorted(mr_by_key.items()):
        if key in handled:
            continue
        label = _render_rule(audit.rule.premise, audit.rule.conclusion)
        conf_rp = ws.index.conf(audit.rule.premise, audit.rule.conclusion)
        if conf_rp is None:
            continue
        req = conf_rp / config.alpha
        pool = ws.candidates(audit.b_part, [audit.a_part], positive)
        pos = 0
        while True:
            delta = ws.index.conf(audit.b_part, audit.rule.conclusion) or Fraction(0)
            if delta > req:
                break
            if pos >= len(pool):
                ws.unresolved.append(label)
                break
            ws.assign_items(pool[pos], frozenset({audit.rule.conclusion}), label, "sim")
            pos += 1
    return ws.result()


# ---------------------------------------------------------------------------
# closed-form iteration counts (exact off integer boundaries)


def drp1_iterations(supp_abc: int, supp_ab: int, req: Fraction) -> int:
    """Flips method 1 needs: smallest i with supp_abc/(supp_ab+i) < req."""
    return max(0, math.ceil(Fraction(supp_abc, 1) / req - supp_ab))


def drp2_iterations(supp_b: int, supp_bc: int, req: Fraction) -> int:
    """Flips method 2 needs: smallest i with (supp_bc+i)/supp_b > req."""
    return max(0, math.ceil(supp_b * req - supp_bc))


def rg_iterations(supp_abc: int, supp_ab: int, rb_conf: Fraction, d: Fraction) -> int:
    """Flips generalization needs: smallest i with (supp_abc−i)/supp_ab ≤ conf(r_b)/d."""
    return max(0, math.ceil(supp_abc - (rb_conf / d) * supp_ab))


def sim_iterations(supp_b: int, supp_bc: int, max_req: Fraction) -> int:
    """Flips the simultaneous loop needs for one companion."""
    return max(0, math.ceil(supp_b * max_req - supp_bc))
