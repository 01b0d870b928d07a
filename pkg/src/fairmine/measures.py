"""Discrimination measures and rule-level audits.

All eight measures work off the same 2×2 split of the records satisfying a
context B: the protected group A,B against its complement ¬A,B, with the
benefit-denying class C as the outcome.  Ratio and difference measures flag
discrimination at values ≥ α, chance measures at values ≤ α.  A measure whose
denominator vanishes is *undefined*, and undefined never flags.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

from .model import (
    CHANCE_MEASURES,
    ConfigError,
    DecisionTable,
    Item,
    ItemIndex,
    Itemset,
    ProtectionConfig,
    itemset_key,
    make_itemset,
    render_itemset,
)
from .mining import ClassificationRule, ContingencyCounts, MinedRule, contingency


@dataclass(frozen=True)
class MeasureValue:
    measure: str
    value: Optional[Fraction]

    @property
    def defined(self) -> bool:
        return self.value is not None

    def as_float(self) -> Optional[float]:
        return None if self.value is None else float(self.value)


def _undef(f: str) -> MeasureValue:
    return MeasureValue(f, None)


def measure(counts: ContingencyCounts, f: str) -> MeasureValue:
    """Evaluate one measure on contingency counts.

    clift uses the slift formula against the most-favored group's counts;
    callers route it through `most_favored_clift` to build those counts.
    """
    p1, p2, p = counts.p1, counts.p2, counts.p
    if f == "elift":
        if p1 is None or p is None or p == 0:
            return _undef(f)
        return MeasureValue(f, p1 / p)
    if f in ("slift", "clift"):
        if p1 is None or p2 is None or p2 == 0:
            return _undef(f)
        return MeasureValue(f, p1 / p2)
    if f == "olift":
        if p1 is None or p2 is None or p2 == 0 or p1 == 1:
            return _undef(f)
        return MeasureValue(f, (p1 * (1 - p2)) / (p2 * (1 - p1)))
    if f == "slift_d":
        if p1 is None or p2 is None:
            return _undef(f)
        return MeasureValue(f, p1 - p2)
    if f == "elift_d":
        if p1 is None or p is None:
            return _undef(f)
        return MeasureValue(f, p1 - p)
    if f == "slift_c":
        if p1 is None or p2 is None or p2 == 1:
            return _undef(f)
        return MeasureValue(f, (1 - p1) / (1 - p2))
    if f == "elift_c":
        if p1 is None or p is None or p == 1:
            return _undef(f)
        return MeasureValue(f, (1 - p1) / (1 - p))
    raise ConfigError(f"unknown measure {f!r}")


def is_discriminatory(mv: MeasureValue, alpha: Fraction) -> bool:
    if mv.value is None:
        return False
    if mv.measure in CHANCE_MEASURES:
        return mv.value <= alpha
    return mv.value >= alpha


def most_favored_clift(attribute: str, context: Itemset, conclusion: Item,
                       source: Union[ItemIndex, DecisionTable],
                       domain: Optional[Sequence[str]] = None,
                       ) -> tuple[Optional[Item], dict[str, MeasureValue]]:
    """clift of every value of `attribute` against its most favored value.

    v2 minimizes conf(a=v2, B → C) over values with nonzero support and
    nonzero confidence (zero-confidence groups are excluded by definition);
    ties go to the lexicographically smallest value.  With no admissible v2
    every clift is undefined.
    """
    index = source if isinstance(source, ItemIndex) else ItemIndex(source)
    if domain is None:
        domain = sorted({it.value for it in index.masks if it.attribute == attribute})
    confs: dict[str, Optional[Fraction]] = {}
    for v in domain:
        premise = make_itemset(set(context) | {Item(attribute, v)})
        confs[v] = index.conf(premise, conclusion)
    admissible = [(conf, v) for v, conf in confs.items() if conf]
    if not admissible:
        return None, {v: _undef("clift") for v in domain}
    base_conf, v2 = min(admissible, key=lambda cv: (cv[0], cv[1]))
    values = {
        v: MeasureValue("clift", conf / base_conf) if conf is not None else _undef("clift")
        for v, conf in confs.items()
    }
    return Item(attribute, v2), values


def elb(gamma: Fraction, delta: Fraction, beta1: Fraction, beta2: Fraction,
        ) -> Optional[Fraction]:
    """Lower bound on the elift of the PD rule a redlining rule could yield."""
    if delta <= 0 or beta2 <= 0:
        return None
    fx = (beta1 / beta2) * (beta2 + gamma - 1)
    if fx <= 0:
        return Fraction(0)
    return fx / delta


# ---------------------------------------------------------------------------
# audits


@dataclass(frozen=True)
class RuleAudit:
    mined: MinedRule
    a_part: Itemset
    b_part: Itemset
    counts: ContingencyCounts
    values: dict                     # measure name -> MeasureValue
    discriminatory: bool             # under the configured measure/alpha

    @property
    def rule(self) -> ClassificationRule:
        return self.mined.rule

    def to_json(self) -> dict:
        return {
            "premise": render_itemset(self.rule.premise),
            "class": str(self.rule.conclusion),
            "protected_part": render_itemset(self.a_part),
            "counts": {"a1": self.counts.a1, "n1": self.counts.n1,
                       "a2": self.counts.a2, "n2": self.counts.n2},
            "measures": {f: (mv.as_float() if mv.defined else None)
                         for f, mv in sorted(self.values.items())},
            "discriminatory": self.discriminatory,
        }


@dataclass(frozen=True)
class AuditResult:
    MR: tuple[RuleAudit, ...]        # α-discriminatory PD rules
    PR: tuple[RuleAudit, ...]        # α-protective PD rules

    @property
    def pd_rules(self) -> tuple[RuleAudit, ...]:
        return tuple(sorted(self.MR + self.PR, key=lambda a: a.mined.key()))


def _clift_value(a_part: Itemset, b_part: Itemset, conclusion: Item,
                 index: ItemIndex) -> MeasureValue:
    # The definition compares one protected value against the most favored
    # value of the same attribute, so conjunction protected parts are out of
    # its domain: treat them as undefined rather than guessing a split.
    if len(a_part) != 1:
        return _undef("clift")
    (item,) = a_part
    _, per_value = most_favored_clift(item.attribute, b_part, conclusion, index)
    return per_value.get(item.value, _undef("clift"))


def current_value(a_part: Itemset, b_part: Itemset, conclusion: Item,
                  index: ItemIndex, f: str) -> MeasureValue:
    """The configured measure of A,B → conclusion against the index *now*.

    Transformation loops call this after every record flip, so it reads
    straight from the (mutating) index rather than from a cached audit.
    """
    if f == "clift":
        return _clift_value(a_part, b_part, conclusion, index)
    return measure(contingency(a_part, b_part, conclusion, index), f)


def audit_rule(mined: MinedRule, index: ItemIndex, config: ProtectionConfig,
               ) -> Optional[RuleAudit]:
    """Audit one mined rule; None when the rule is PND or concludes a benefit."""
    if mined.rule.conclusion != config.negative_class:
        return None
    a_part = config.protected_part(mined.rule.premise)
    if not a_part:
        return None
    b_part = mined.rule.premise - a_part
    counts = contingency(a_part, b_part, mined.rule.conclusion, index)
    values = {f: measure(counts, f)
              for f in ("elift", "slift", "olift", "slift_d", "elift_d", "slift_c", "elift_c")}
    values["clift"] = _clift_value(a_part, b_part, mined.rule.conclusion, index)
    if config.alpha is None:
        disc = False
    else:
        disc = is_discriminatory(values[config.measure], config.alpha)
    return RuleAudit(mined, a_part, b_part, counts, values, disc)


def audit_rules(rules: Sequence[MinedRule], source: Union[ItemIndex, DecisionTable],
                config: ProtectionConfig) -> AuditResult:
    if not config.protected:
        raise ConfigError("audit needs at least one protected itemset")
    index = source if isinstance(source, ItemIndex) else ItemIndex(source)
    mr, pr = [], []
    for mined in sorted(rules, key=lambda m: m.key()):
        audit = audit_rule(mined, index, config)
        if audit is None:
            continue
        (mr if audit.discriminatory else pr).append(audit)
    return AuditResult(tuple(mr), tuple(pr))


# ---------------------------------------------------------------------------
# redlining (indirect discrimination)


@dataclass(frozen=True)
class IndirectCompanion:
    """One (A, B) split through which a PND rule reveals indirect bias."""

    a_part: Itemset
    b_part: Itemset
    d_part: Itemset
    gamma: Fraction
    delta: Fraction
    beta1: Fraction
    beta2: Fraction
    elb: Fraction


@dataclass(frozen=True)
class RedliningAudit:
    mined: MinedRule                 # the PND rule D,B → C
    companions: tuple[IndirectCompanion, ...]

    @property
    def rule(self) -> ClassificationRule:
        return self.mined.rule

    def indirect_rules(self) -> list[tuple[ClassificationRule, IndirectCompanion]]:
        out = []
        for c in self.companions:
            out.append((ClassificationRule(make_itemset(set(c.a_part) | set(c.b_part)),
                                           self.mined.rule.conclusion), c))
        return out


def _protected_candidates(config: ProtectionConfig) -> list[Itemset]:
    seen = set()
    out = []
    for member in config.protected:
        items = sorted(member)
        for mask in range(1, 1 << len(items)):
            cand = frozenset(items[i] for i in range(len(items)) if mask >> i & 1)
            if cand not in seen:
                seen.add(cand)
                out.append(cand)
    out.sort(key=itemset_key)
    return out


def find_redlining(rules: Sequence[MinedRule], source: Union[ItemIndex, DecisionTable],
                   config: ProtectionConfig) -> list[RedliningAudit]:
    """Flag PND rules whose elb over some (A, B) split reaches α.

    Background confidences come from the data itself: β2 = conf(D,B → A) and
    β1 = supp(D,B,A)/supp(A,B), i.e. exactly conf(A,B → D).  The bound is an
    elift bound, so callers gate this on measure=elift.
    """
    if config.alpha is None:
        raise ConfigError("find_redlining needs alpha")
    index = source if isinstance(source, ItemIndex) else ItemIndex(source)
    pool = config.protected_pool
    a_candidates = _protected_candidates(config)
    out = []
    for mined in sorted(rules, key=lambda m: m.key()):
        if mined.rule.conclusion != config.negative_class:
            continue
        premise = mined.rule.premise
        if premise & pool or not premise:
            continue
        gamma = mined.conf
        x_items = sorted(premise)
        x_mask_full = index.mask(premise)
        supp_x = x_mask_full.bit_count()
        companions = []
        for a_part in a_candidates:
            a_attrs = {i.attribute for i in a_part}
            supp_xa = index.support(make_itemset(set(premise) | set(a_part))) \
                if not (a_attrs & {i.attribute for i in premise}) else 0
            if supp_xa == 0 or supp_x == 0:
                continue
            beta2 = Fraction(supp_xa, supp_x)
            # every split B ⊆ X with a nonempty remainder D = X \ B
            for b_bits in range(1 << len(x_items)):
                b_part = frozenset(x_items[i] for i in range(len(x_items)) if b_bits >> i & 1)
                d_part = premise - b_part
                if not d_part:
                    continue
                supp_ab = index.support(make_itemset(set(a_part) | set(b_part)))
                if supp_ab == 0:
                    continue
                beta1 = Fraction(supp_xa, supp_ab)
                delta = index.conf(b_part, mined.rule.conclusion)
                if not delta:
                    continue
                bound = elb(gamma, delta, beta1, beta2)
                if bound is not None and bound >= config.alpha:
                    companions.append(IndirectCompanion(
                        a_part, b_part, d_part, gamma, delta, beta1, beta2, bound))
        if companions:
            companions.sort(key=lambda c: (itemset_key(c.a_part), itemset_key(c.b_part)))
            out.append(RedliningAudit(mined, tuple(companions)))
    return out


# ---------------------------------------------------------------------------
# explainable discrimination


def d_instance(r_prime: ClassificationRule, r: ClassificationRule,
               d: Fraction, source: Union[ItemIndex, DecisionTable],
               config: ProtectionConfig) -> bool:
    """True when r′: A,B → C is a d-instance of r: D,B → C.

    Condition 1: conf(r) ≥ d·conf(r′); Condition 2: conf(A,B → D) ≥ d.
    Rules that do not share the context B (or leave D empty) are not
    instances of each other at all, and r itself must be PND — a rule
    whose background part mentions a protected group explains nothing.
    """
    if r_prime.conclusion != r.conclusion:
        return False
    if r.premise & config.protected_pool:
        return False
    a_part = config.protected_part(r_prime.premise)
    if not a_part:
        return False
    b_part = r_prime.premise - a_part
    if not b_part <= r.premise:
        return False
    d_part = r.premise - b_part
    if not d_part:
        return False
    index = source if isinstance(source, ItemIndex) else ItemIndex(source)
    conf_r = index.conf(r.premise, r.conclusion)
    conf_rp = index.conf(r_prime.premise, r_prime.conclusion)
    if conf_r is None or conf_rp is None:
        return False
    if conf_r < d * conf_rp:
        return False
    ab = make_itemset(set(a_part) | set(b_part))
    n = index.support(ab)
    if n == 0:
        return False
    a = index.support(make_itemset(set(ab) | set(d_part)))
    return Fraction(a, n) >= d
