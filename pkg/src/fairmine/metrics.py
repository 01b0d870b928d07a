"""Utility and quality measures for transformed rules, patterns and tables.

Three families: rule-level scores comparing a re-audit of the transformed
data against the original audit, pattern-level scores comparing a sanitized
pattern set against the original, and an associative classifier whose
accuracy doubles as a data-quality probe.  All arithmetic is exact; the
JSON renderings round at the edge.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .lattice import QualityReport, quality  # noqa: F401  (re-exported)
from .measures import AuditResult, RedliningAudit
from .mining import MinedRule, PatternSet
from .model import ConfigError, DecisionTable, Itemset, ProtectionConfig
from .patternshield import detect_disc_patterns

Percent = Optional[Fraction]  # None renders as "n.a."


def _pct(num: int, den: int) -> Percent:
    return None if den == 0 else Fraction(100 * num, den)


def _render(value: Percent):
    return "n.a." if value is None else float(value)


@dataclass(frozen=True)
class RuleUtilityReport:
    ddpd: Percent
    ddpp: Percent
    idpd: Percent
    idpp: Percent
    mc: Percent
    gc: Percent
    notes: tuple[str, ...] = ()

    def to_json(self) -> dict:
        out = {name: _render(getattr(self, name))
               for name in ("ddpd", "ddpp", "idpd", "idpp", "mc", "gc")}
        if self.notes:
            out["notes"] = list(self.notes)
        return out


def _pnd_negative_keys(rules: Sequence[MinedRule], config: ProtectionConfig,
                       ) -> set:
    pool = config.protected_pool
    return {r.key() for r in rules
            if r.rule.conclusion == config.negative_class
            and not (set(r.rule.premise) & pool)}


def rule_utility(before_rules: Sequence[MinedRule],
                 after_rules: Sequence[MinedRule],
                 before_audit: AuditResult, after_audit: AuditResult,
                 before_redlining: Optional[Sequence[RedliningAudit]] = None,
                 after_redlining: Optional[Sequence[RedliningAudit]] = None,
                 config: Optional[ProtectionConfig] = None,
                 ) -> RuleUtilityReport:
    """Discrimination-removal and side-effect scores for a transformation.

    The after-side audits are plain re-audits of the transformed data under
    the same thresholds.  Empty reference sets render as "n.a." instead of
    erroring, matching how such runs are usually tabulated.  The headline
    prevention degree is a literal set-size difference, so a transformation
    that *introduces* flagged rules can push it below what a removal count
    would say; that situation is surfaced in the notes.
    """
    fr_before = {r.key() for r in before_rules}
    fr_after = {r.key() for r in after_rules}
    mr_before = {a.mined.key() for a in before_audit.MR}
    mr_after = {a.mined.key() for a in after_audit.MR}
    pr_before = {a.mined.key() for a in before_audit.PR}
    pr_after = {a.mined.key() for a in after_audit.PR}
    notes = []
    ddpd = _pct(len(mr_before) - len(mr_after), len(mr_before))
    if mr_after - mr_before:
        notes.append(
            f"{len(mr_after - mr_before)} flagged rule(s) in the transformed "
            "data are not among the original flagged rules; the prevention "
            "degree counts set sizes, not removals")
    ddpp = _pct(len(pr_before & pr_after), len(pr_before))
    idpd = idpp = None
    if before_redlining is not None or after_redlining is not None:
        if before_redlining is None or after_redlining is None or config is None:
            raise ConfigError(
                "indirect utility needs both redlining audits and the config")
        rr_before = {a.mined.key() for a in before_redlining}
        rr_after = {a.mined.key() for a in after_redlining}
        idpd = _pct(len(rr_before) - len(rr_after), len(rr_before))
        if rr_after - rr_before:
            notes.append(
                f"{len(rr_after - rr_before)} redlining rule(s) in the "
                "transformed data are new")
        nr_before = _pnd_negative_keys(before_rules, config) - rr_before
        nr_after = _pnd_negative_keys(after_rules, config) - rr_after
        idpp = _pct(len(nr_before & nr_after), len(nr_before))
    mc = _pct(len(fr_before - fr_after), len(fr_before))
    gc = _pct(len(fr_after - fr_before), len(fr_after))
    return RuleUtilityReport(ddpd, ddpp, idpd, idpp, mc, gc, tuple(notes))


# ---------------------------------------------------------------------------
# pattern-level utility


@dataclass(frozen=True)
class PatternUtilityReport:
    changed_fraction: Fraction
    distortion_error: Fraction
    distortion_error_abs: Fraction
    dpd: Percent
    ndd: Percent

    def to_json(self) -> dict:
        return {
            "changed_fraction": float(self.changed_fraction),
            "distortion_error": float(self.distortion_error),
            "distortion_error_abs": float(self.distortion_error_abs),
            "dpd": _render(self.dpd),
            "ndd": _render(self.ndd),
        }


def pattern_utility(original: PatternSet, transformed: PatternSet,
                    config: ProtectionConfig) -> PatternUtilityReport:
    """Support distortion and discrimination turnover between pattern sets.

    The signed distortion average is reported as printed in the literature
    alongside an absolute-value companion, since opposite-signed changes
    cancel in the signed form.  Both sets must cover the same itemsets.
    """
    if not original.patterns:
        raise ConfigError("the original pattern set is empty")
    missing = [p for p in original.ordered() if p not in transformed.patterns]
    if missing:
        raise ConfigError(
            f"transformed set lacks {len(missing)} original itemset(s)")
    changed = 0
    signed = Fraction(0)
    absolute = Fraction(0)
    for itemset in original.ordered():
        supp = original.patterns[itemset]
        new = transformed.patterns[itemset]
        if new != supp:
            changed += 1
        if supp == 0:
            if new != 0:
                raise ConfigError(
                    "zero-support original gained support; distortion undefined")
            continue
        term = Fraction(new - supp, supp)
        signed += term
        absolute += abs(term)
    n = len(original.patterns)
    disc_before = set(detect_disc_patterns(original, config))
    disc_after = set(detect_disc_patterns(transformed, config))
    dpd = _pct(len(disc_before - disc_after), len(disc_before))
    ghosts = [p for p in disc_after if p not in disc_before]
    ndd = _pct(len(ghosts), len(disc_after))
    return PatternUtilityReport(
        Fraction(100 * changed, n), 100 * signed / n, 100 * absolute / n,
        dpd, ndd)


# ---------------------------------------------------------------------------
# CMAR-style associative classification


def chi_square(a1: int, n1: int, supp_c: int, total: int) -> Fraction:
    """Pearson chi-square of the 2x2 table (X vs C) given joint and marginals."""
    if not (0 <= a1 <= n1 <= total and a1 <= supp_c <= total):
        raise ConfigError("inconsistent contingency counts")
    b = n1 - a1
    c = supp_c - a1
    d = total - n1 - supp_c + a1
    if d < 0:
        raise ConfigError("inconsistent contingency counts")
    for marginal in (n1, total - n1, supp_c, total - supp_c):
        if marginal == 0:
            return Fraction(0)
    det = a1 * d - b * c
    return Fraction(total * det * det,
                    n1 * (total - n1) * supp_c * (total - supp_c))


def _max_chi_square(n1: int, supp_c: int, total: int) -> Fraction:
    shortfall = Fraction(min(n1, supp_c)) - Fraction(n1 * supp_c, total)
    e = (Fraction(1, n1 * supp_c)
         + Fraction(1, n1 * (total - supp_c))
         + Fraction(1, (total - n1) * supp_c)
         + Fraction(1, (total - n1) * (total - supp_c)))
    return shortfall * shortfall * total * e


@dataclass(frozen=True)
class CmarReport:
    accuracy: Fraction
    assigned: tuple[str, ...]
    unmatched: int

    def to_json(self) -> dict:
        return {"accuracy": float(self.accuracy),
                "records": len(self.assigned),
                "unmatched": self.unmatched}


def cmar_classify(train: PatternSet, test: DecisionTable,
                  config: ProtectionConfig) -> CmarReport:
    """Classify test records by the class-bearing training patterns.

    A record's matching patterns vote: a unanimous class wins outright,
    otherwise each class group is scored by the sum of chi-square times its
    ratio to the maximal chi-square attainable at the pattern's marginals,
    and the higher-scoring class is assigned.  Records matching nothing get
    the training majority class.
    """
    if not train.patterns:
        raise ConfigError("the training pattern set is empty")
    class_attr = config.class_attribute
    negative = config.negative_class
    positive = config.positive_class(test)
    singletons = {}
    for cls in (negative, positive):
        supp = train.patterns.get(Itemset((cls,)))
        if supp is None:
            raise ConfigError(f"training set lacks the class singleton {cls}")
        singletons[cls] = supp
    total = singletons[negative] + singletons[positive]
    if total == 0:
        raise ConfigError("training class counts are all zero")
    majority = min((negative, positive),
                   key=lambda c: (-singletons[c], c.value))
    cars = []  # (premise set, class item, supp(p), supp(premise))
    for itemset in train.ordered():
        supp = train.patterns[itemset]
        classes = [it for it in itemset if it.attribute == class_attr]
        if len(classes) != 1:
            continue
        cls = classes[0]
        premise = Itemset(it for it in itemset if it != cls)
        prem_supp = total if not premise else train.patterns.get(premise)
        if prem_supp is None:
            continue  # premise support unknown; the pattern cannot vote
        cars.append((premise, cls, supp, prem_supp))
    if not cars:
        raise ConfigError("no class-bearing training patterns")
    class_col = test.column(class_attr)
    assigned = []
    correct = 0
    unmatched = 0
    for idx, row in enumerate(test.rows):
        items = set(test.record_items(idx)) - {negative, positive}
        matched = [car for car in cars if car[0] <= items]
        if not matched:
            unmatched += 1
            verdict = majority
        else:
            classes = {car[1] for car in matched}
            if len(classes) == 1:
                verdict = next(iter(classes))
            else:
                scores = {negative: Fraction(0), positive: Fraction(0)}
                for premise, cls, supp, prem_supp in matched:
                    chi = chi_square(supp, prem_supp, singletons[cls], total)
                    if chi > 0:
                        scores[cls] += (chi * chi
                                        / _max_chi_square(prem_supp,
                                                          singletons[cls],
                                                          total))
                verdict = min((negative, positive),
                              key=lambda c: (-scores[c], c.value))
        assigned.append(verdict.value)
        if row[class_col] == verdict.value:
            correct += 1
    return CmarReport(Fraction(correct, len(test)), tuple(assigned), unmatched)
