"""Sanitization pipelines over published frequent-pattern sets.

Two independent hazards are repaired by bumping supports, never lowering
them: inference channels that would let an attacker reconstruct small
groups (privacy), and patterns whose derived rule flags under a
discrimination measure (fairness).  Every count used here comes from the
pattern set alone — the source table is assumed withheld — so required
itemsets that σ-filtering dropped are flagged rather than recounted.

Additions always cover the target itemset *and* every subset carried by the
set, which preserves anti-monotonicity and never shrinks a channel sum.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional

from .measures import MeasureValue, is_discriminatory, measure as eval_measure
from .mining import ContingencyCounts, PatternSet
from .model import (
    ConfigError,
    Item,
    Itemset,
    ProtectionConfig,
    itemset_key,
    render_itemset,
)

_MAX_PASSES = 1000

# measures whose sanitization grows the protected-group row total {A,B};
# the rest grow the context baseline {B,C}
_GROUP_TARGETED = frozenset({"slift", "clift", "olift", "slift_d", "slift_c"})


class SanitizationInfeasible(RuntimeError):
    """No finite support addition can push the pattern under the threshold."""


@dataclass
class SanitizationReport:
    channels: list = field(default_factory=list)
    deltas: list = field(default_factory=list)
    missing: list = field(default_factory=list)
    unresolved: list = field(default_factory=list)

    def note_missing(self, itemset: Itemset) -> None:
        name = ",".join(render_itemset(itemset)) or "(empty)"
        if name not in self.missing:
            self.missing.append(name)

    def to_json(self) -> dict:
        return {"channels": self.channels, "deltas": self.deltas,
                "missing": sorted(self.missing), "unresolved": self.unresolved}


# ---------------------------------------------------------------------------
# inference channels


@dataclass(frozen=True)
class InferenceChannel:
    i_set: Itemset
    j_set: Itemset
    support: int

    def to_json(self) -> dict:
        return {"i": render_itemset(self.i_set), "j": render_itemset(self.j_set),
                "support": self.support}


def channel_support(i_set: Itemset, j_set: Itemset, pset: PatternSet,
                    missing: Optional[set] = None) -> int:
    """Signed inclusion–exclusion sum over every X with I ⊆ X ⊆ J.

    This counts the records an attacker can pin down as holding I but
    nothing more of J.  Itemsets the σ-filter dropped contribute 0 and are
    reported via `missing`.
    """
    if not i_set <= j_set:
        raise ConfigError("channel endpoints need I ⊆ J")
    extra = sorted(j_set - i_set)
    total = 0
    for bits in range(1 << len(extra)):
        x = frozenset(i_set) | {extra[i] for i in range(len(extra)) if bits >> i & 1}
        supp = pset.support(x)
        if supp is None:
            supp = 0
            if missing is not None:
                missing.add(x)
        total += -supp if bits.bit_count() & 1 else supp
    return total


def find_channels(pset: PatternSet, k: int,
                  missing: Optional[set] = None) -> list[InferenceChannel]:
    """Every pair I ⊂ J in the set whose channel lets 1..k−1 records leak."""
    ordered = pset.ordered()
    out = []
    for i_set in ordered:
        for j_set in ordered:
            if len(j_set) <= len(i_set) or not i_set < j_set:
                continue
            cs = channel_support(i_set, j_set, pset, missing)
            if 0 < cs < k:
                out.append(InferenceChannel(i_set, j_set, cs))
    return out


def low_support_patterns(pset: PatternSet, k: int) -> list[Itemset]:
    return [p for p in pset.ordered() if 0 < pset.patterns[p] < k]


def is_k_anonymous(pset: PatternSet, k: int) -> bool:
    return not low_support_patterns(pset, k) and not find_channels(pset, k)


def _add_to_subsets(pset: PatternSet, target: Itemset, delta: int) -> None:
    for q in pset.ordered():
        if q <= target:
            pset.add(q, delta)


def privacy_additive_sanitize(pset: PatternSet, k: int,
                              report: Optional[SanitizationReport] = None,
                              ) -> PatternSet:
    """Raise supports until no pattern and no channel sits in (0, k).

    Each violation gets +k on its itemset and all carried subsets; the scan
    restarts after every addition because one fix can open or close others.
    Channel sums never decrease under this addition, so the loop terminates.
    """
    work = pset.copy()
    missing: set = set()
    for _ in range(_MAX_PASSES * max(1, len(work))):
        target = None
        low = low_support_patterns(work, k)
        if low:
            target, cs = low[0], work.patterns[low[0]]
        else:
            channels = find_channels(work, k, missing)
            if channels:
                target, cs = channels[0].i_set, channels[0].support
        if target is None:
            break
        _add_to_subsets(work, target, k)
        if report is not None:
            report.channels.append(
                {"target": render_itemset(target), "support": cs, "added": k})
    else:
        raise RuntimeError("privacy sanitization did not converge")
    if report is not None:
        for m in missing:
            report.note_missing(m)
    return work


# ---------------------------------------------------------------------------
# pattern-side measure evaluation


def _class_items(pset: PatternSet, config: ProtectionConfig) -> tuple[Item, Optional[Item]]:
    neg = config.negative_class
    others = sorted({it for it in pset.items()
                     if it.attribute == neg.attribute and it != neg})
    return neg, (others[0] if len(others) == 1 else None)


def _pattern_total(pset: PatternSet, config: ProtectionConfig,
                   missing: Optional[set]) -> Optional[int]:
    """|D| as the two class-singleton supports; None when either is absent."""
    neg, pos = _class_items(pset, config)
    s_neg = pset.support(frozenset({neg}))
    s_pos = pset.support(frozenset({pos})) if pos is not None else None
    if s_neg is None or s_pos is None:
        if missing is not None:
            missing.add(frozenset())
        return None
    return s_neg + s_pos


def _supp(pset: PatternSet, itemset: Itemset, config: ProtectionConfig,
          missing: Optional[set]) -> Optional[int]:
    if not itemset:
        return _pattern_total(pset, config, missing)
    s = pset.support(itemset)
    if s is None and missing is not None:
        missing.add(itemset)
    return s


def _complement_cells(pset: PatternSet, config: ProtectionConfig,
                      a_part: Itemset, b_part: Itemset,
                      ) -> Optional[tuple[int, int]]:
    """supp(¬A,B,C) and supp(¬A,B) summed over the other carried values.

    Only available for a single protected item: there the complement of
    A = {a=v} is exactly the union of the attribute's other values.  Every
    sibling value seen anywhere in the set must carry both group patterns,
    otherwise the cells are unknowable from the set alone.
    """
    if len(a_part) != 1:
        return None
    (a_item,) = a_part
    values = sorted({it.value for it in pset.items()
                     if it.attribute == a_item.attribute and it != a_item})
    if not values:
        return None
    a2 = n2 = 0
    for value in values:
        group = frozenset(b_part) | {Item(a_item.attribute, value)}
        n = pset.support(group)
        a = pset.support(group | {config.negative_class})
        if n is None or a is None:
            return None
        a2 += a
        n2 += n
    return a2, n2


def pattern_rule_counts(p: Itemset, pset: PatternSet, config: ProtectionConfig,
                        missing: Optional[set] = None) -> Optional[ContingencyCounts]:
    """Contingency cells of the rule (p \\ C) → C, read off the pattern set.

    The complement row comes from supp(B) − supp(A,B) when the context
    patterns are carried, else from the sibling values of a singleton
    protected item (the two readings agree on any set mined from one table).
    """
    premise = p - {config.negative_class}
    a_part = config.protected_part(premise)
    if not a_part:
        return None
    b_part = premise - a_part
    a1 = _supp(pset, p, config, missing)
    n1 = _supp(pset, premise, config, missing)
    if a1 is None or n1 is None:
        return None
    bc_set = frozenset(b_part) | {config.negative_class}
    supp_bc = _supp(pset, bc_set, config, None)
    supp_b = _supp(pset, frozenset(b_part), config, None)
    if supp_bc is not None and supp_b is not None:
        a2, n2 = supp_bc - a1, supp_b - n1
    else:
        cells = _complement_cells(pset, config, a_part, b_part)
        if cells is None:
            if missing is not None:
                if supp_bc is None:
                    missing.add(bc_set)
                if supp_b is None:
                    missing.add(frozenset(b_part))
            return None
        a2, n2 = cells
        supp_bc, supp_b = a1 + a2, n1 + n2
    if not (0 <= a1 <= n1 and 0 <= a2 <= n2):
        return None  # counts inconsistent with any real table
    return ContingencyCounts(a1, n1, a2, n2, supp_bc, supp_b, supp_b)


def _pattern_clift(p: Itemset, pset: PatternSet, config: ProtectionConfig,
                   missing: Optional[set]) -> MeasureValue:
    premise = p - {config.negative_class}
    a_part = config.protected_part(premise)
    if len(a_part) != 1:
        return MeasureValue("clift", None)
    (a_item,) = a_part
    b_part = premise - a_part
    confs: dict[str, Optional[Fraction]] = {}
    for value in sorted({it.value for it in pset.items()
                         if it.attribute == a_item.attribute}):
        group = frozenset(b_part) | {Item(a_item.attribute, value)}
        n = _supp(pset, group, config, None)
        a = _supp(pset, group | {config.negative_class}, config, None)
        confs[value] = Fraction(a, n) if n and a is not None and 0 <= a <= n else None
    admissible = [(c, v) for v, c in confs.items() if c]
    own = confs.get(a_item.value)
    if not admissible or own is None:
        return MeasureValue("clift", None)
    base, _v2 = min(admissible, key=lambda cv: (cv[0], cv[1]))
    return MeasureValue("clift", own / base)


def pattern_measure(p: Itemset, pset: PatternSet, config: ProtectionConfig,
                    missing: Optional[set] = None) -> MeasureValue:
    """The configured measure of the rule a class-bearing pattern encodes."""
    if config.measure == "clift":
        return _pattern_clift(p, pset, config, missing)
    counts = pattern_rule_counts(p, pset, config, missing)
    if counts is None:
        return MeasureValue(config.measure, None)
    return eval_measure(counts, config.measure)


# ---------------------------------------------------------------------------
# discriminatory-pattern detection


def detect_disc_patterns(pset: PatternSet, config: ProtectionConfig,
                         missing: Optional[set] = None) -> list[Itemset]:
    """PD class-bearing patterns whose derived rule flags at α."""
    if config.alpha is None:
        raise ConfigError("pattern detection needs alpha")
    pool = config.protected_pool
    out = []
    for p in pset.ordered():
        if config.negative_class not in p or not (p & pool):
            continue
        mv = pattern_measure(p, pset, config, missing)
        if is_discriminatory(mv, config.alpha):
            out.append(p)
    return out


# ---------------------------------------------------------------------------
# additive anti-discrimination sanitization


@dataclass(frozen=True)
class SanitizationDelta:
    pattern: Itemset
    target: Itemset
    delta: int
    measure: str
    before: MeasureValue
    after: MeasureValue

    def to_json(self) -> dict:
        return {"pattern": render_itemset(self.pattern),
                "target": render_itemset(self.target),
                "delta": self.delta, "measure": self.measure,
                "before": self.before.as_float(), "after": self.after.as_float()}


class _Overlay:
    """Read-only view of a pattern set with +delta on subsets of a target."""

    def __init__(self, base: PatternSet, target: Itemset, delta: int):
        self.base, self.target, self.delta = base, target, delta

    def support(self, itemset: Itemset) -> Optional[int]:
        s = self.base.support(itemset)
        if s is None:
            return None
        return s + self.delta if frozenset(itemset) <= self.target else s

    def items(self) -> Itemset:
        return self.base.items()


def _floor_plus_one(bound: Fraction) -> int:
    return bound.__floor__() + 1


def _delta_bound(p: Itemset, pset: PatternSet, config: ProtectionConfig,
                 counts: ContingencyCounts) -> Fraction:
    """Smallest real x with the recomputed measure strictly protective."""
    f, alpha = config.measure, config.alpha
    a1, n1 = counts.a1, counts.n1
    supp_b, supp_bc = counts.supp_b, counts.supp_bc
    p1, p2 = counts.p1, counts.p2
    if f == "slift":
        return Fraction(a1 * counts.n2, counts.a2 * alpha) - n1
    if f == "clift":
        premise = p - {config.negative_class}
        (a_item,) = config.protected_part(premise)
        b_part = premise - {a_item}
        best: Optional[tuple[Fraction, str, int, int]] = None
        for value in sorted({it.value for it in pset.items()
                             if it.attribute == a_item.attribute}):
            if value == a_item.value:
                continue
            group = frozenset(b_part) | {Item(a_item.attribute, value)}
            n = pset.support(group)
            a = pset.support(group | {config.negative_class})
            if not n or not a:
                continue
            cand = (Fraction(a, n), value, a, n)
            if best is None or cand[:2] < best[:2]:
                best = cand
        if best is None:
            raise SanitizationInfeasible("no favored group to compare against")
        _, _, a2g, n2g = best
        return Fraction(a1 * n2g, a2g * alpha) - n1
    if f == "olift":
        odds2 = p2 / (1 - p2)
        t = alpha * odds2
        if t <= 0:
            raise SanitizationInfeasible("favored group holds no denials")
        return a1 * (1 + t) / t - n1
    if f == "slift_d":
        return Fraction(a1, 1) / (alpha + p2) - n1
    if f == "slift_c":
        t = 1 - alpha * (1 - p2)
        if t <= 0:
            raise SanitizationInfeasible("threshold exceeds the favored denial gap")
        return Fraction(a1, 1) / t - n1
    if f == "elift":
        if alpha * n1 - a1 <= 0:
            raise SanitizationInfeasible("group confidence is at least α")
        return Fraction(a1 * supp_b - alpha * n1 * supp_bc, 1) / (alpha * n1 - a1)
    if f == "elift_d":
        t = p1 - alpha
        return (t * supp_b - supp_bc) / (1 - t)
    if f == "elift_c":
        if p1 == 1:
            raise SanitizationInfeasible("protected group is denied outright")
        t = 1 - (1 - p1) / alpha
        return (t * supp_b - supp_bc) / (1 - t)
    raise ConfigError(f"no additive sanitization for measure {f!r}")


def delta_for(p: Itemset, pset: PatternSet, config: ProtectionConfig,
              missing: Optional[set] = None) -> Optional[SanitizationDelta]:
    """Minimal integer support addition that makes the pattern protective.

    Returns None (no-op) when the pattern does not flag.  The closed-form
    bound is ceiled and then verified by recomputation, bumping by one while
    the strict inequality still fails — integer ceilings can land exactly on
    the boundary.  Raises SanitizationInfeasible when no finite addition can
    work (e.g. the protected group's own confidence already reaches α·1).
    """
    before = pattern_measure(p, pset, config, missing)
    if config.alpha is None or not is_discriminatory(before, config.alpha):
        return None
    premise = p - {config.negative_class}
    a_part = config.protected_part(premise)
    if config.measure in _GROUP_TARGETED:
        target = premise
    else:
        target = p - a_part
    if config.measure == "clift":
        # clift never consults the complement row, which may be incomplete
        a1 = _supp(pset, p, config, missing) or 0
        n1 = _supp(pset, premise, config, missing) or 0
        counts = ContingencyCounts(a1, n1, 0, 0, a1, n1, n1)
    else:
        counts = pattern_rule_counts(p, pset, config, missing)
        assert counts is not None  # the pattern flagged, so they were computable
    bound = _delta_bound(p, pset, config, counts)
    delta = max(1, _floor_plus_one(bound))
    for _ in range(_MAX_PASSES):
        after = pattern_measure(p, _Overlay(pset, target, delta), config, None)
        if not is_discriminatory(after, config.alpha):
            return SanitizationDelta(p, target, delta, config.measure, before, after)
        delta += 1
    raise SanitizationInfeasible("recomputation never cleared the threshold")


def _apply(work: PatternSet, sd: SanitizationDelta,
           report: Optional[SanitizationReport]) -> None:
    _add_to_subsets(work, sd.target, sd.delta)
    if report is not None:
        report.deltas.append(sd.to_json())


def _sanitize_queue(work: PatternSet, queue: list[Itemset],
                    config: ProtectionConfig,
                    report: Optional[SanitizationReport],
                    extend_to_subsets: bool,
                    stuck: Optional[set[Itemset]] = None) -> None:
    """One pass of Δ-sanitization over a worklist, in place.

    With `extend_to_subsets` (the slift-family unexplainable discipline),
    carried sub-patterns of a just-sanitized pattern that turned
    d-unexplainable are appended to the worklist.  Patterns with no finite
    Δ land in `stuck` (and the report) once; callers iterating to a
    fixpoint must treat them as settled or they will loop forever.
    """
    missing: set = set()
    seen = set(queue)
    pos = 0
    while pos < len(queue):
        p = queue[pos]
        pos += 1
        if stuck is not None and p in stuck:
            continue
        try:
            sd = delta_for(p, work, config, missing)
        except SanitizationInfeasible as exc:
            if stuck is not None:
                stuck.add(p)
            if report is not None:
                report.unresolved.append(
                    {"pattern": render_itemset(p), "reason": str(exc)})
            continue
        if sd is None:
            continue
        _apply(work, sd, report)
        if extend_to_subsets:
            for q in work.ordered():
                if q in seen or not q < p:
                    continue
                if config.negative_class not in q or not (q & config.protected_pool):
                    continue
                if is_discriminatory(pattern_measure(q, work, config, missing),
                                     config.alpha) \
                        and not _explainable(q, work, config, missing):
                    queue.append(q)
                    seen.add(q)
    if report is not None:
        for m in missing:
            report.note_missing(m)


def antidisc_sanitize(pset: PatternSet, d_d: Iterable[Itemset],
                      config: ProtectionConfig,
                      report: Optional[SanitizationReport] = None) -> PatternSet:
    """Add each flagged pattern's Δ to its target and carried subsets.

    One pass follows the given order; afterwards detection reruns until no
    pattern flags, because an addition aimed at one pattern can shrink the
    complement row of a sibling protected group and push it over α.
    Patterns with no finite Δ (reported unresolved) don't count against
    the fixpoint — chance measures pinned at zero stay flagged forever.
    """
    work = pset.copy()
    stuck: set[Itemset] = set()
    _sanitize_queue(work, list(d_d), config, report,
                    extend_to_subsets=False, stuck=stuck)
    for _ in range(_MAX_PASSES):
        again = [p for p in detect_disc_patterns(work, config)
                 if p not in stuck]
        if not again:
            return work
        _sanitize_queue(work, again, config, report,
                        extend_to_subsets=False, stuck=stuck)
    raise RuntimeError("discrimination sanitization did not converge")


# ---------------------------------------------------------------------------
# unexplainable patterns


def _explainable(p: Itemset, pset: PatternSet, config: ProtectionConfig,
                 missing: Optional[set]) -> bool:
    """Some legally grounded context rule covers p as a d-instance."""
    legal_pool = frozenset()
    for member in config.legally_grounded:
        legal_pool |= member
    if not legal_pool:
        return False
    neg = config.negative_class
    premise = p - {neg}
    a_part = config.protected_part(premise)
    b_part = premise - a_part
    supp_p = _supp(pset, p, config, missing)
    n1 = _supp(pset, premise, config, missing)
    if not supp_p or not n1:
        return False
    conf_r = Fraction(supp_p, n1)
    a_attrs = {it.attribute for it in a_part}
    for pd in pset.ordered():
        if neg not in pd or pd & config.protected_pool or not (pd & legal_pool):
            continue
        premise_d = pd - {neg}
        if not premise_d or not b_part <= premise_d:
            continue
        d_part = premise_d - b_part
        if not d_part or {it.attribute for it in d_part} & a_attrs:
            continue
        supp_pd = _supp(pset, pd, config, missing)
        n_d = _supp(pset, premise_d, config, missing)
        if not supp_pd or not n_d:
            continue
        if Fraction(supp_pd, n_d) < config.d * conf_r:
            continue
        abd = frozenset(premise) | d_part
        supp_abd = _supp(pset, abd, config, missing)
        if supp_abd is None:
            continue
        if Fraction(supp_abd, n1) >= config.d:
            return True
    return False


def detect_unexplainable(pset: PatternSet, config: ProtectionConfig,
                         missing: Optional[set] = None) -> list[Itemset]:
    """Flagged patterns no legally grounded context explains away."""
    return [p for p in detect_disc_patterns(pset, config, missing)
            if not _explainable(p, pset, config, missing)]


def unexplainable_sanitize(pset: PatternSet, d_bad: Iterable[Itemset],
                           config: ProtectionConfig,
                           report: Optional[SanitizationReport] = None,
                           ) -> PatternSet:
    """Δ-sanitize the unexplainable patterns.

    Context-baseline additions (elift family) cannot break another
    pattern's explanation, so one pass suffices there; group-row additions
    can, so after each fix the carried sub-patterns are re-checked and
    appended when they turned unexplainable.
    """
    work = pset.copy()
    extend = config.measure in _GROUP_TARGETED
    _sanitize_queue(work, list(d_bad), config, report, extend_to_subsets=extend)
    return work


# ---------------------------------------------------------------------------
# combined privacy + anti-discrimination protection


def _impact_sorted(d_d: list[Itemset]) -> list[Itemset]:
    flagged = set(d_d)
    def impact(p: Itemset) -> int:
        return sum(1 for q in flagged if q < p)
    return sorted(d_d, key=lambda p: (-impact(p), itemset_key(p)))


def protect_patterns(pset: PatternSet, k: int, config: ProtectionConfig,
                     unexplainable: bool = False,
                     report: Optional[SanitizationReport] = None) -> PatternSet:
    """k-anonymize, then Δ-sanitize, alternating until both properties hold.

    The privacy additions can create fresh discrimination (and the reverse
    can in principle reopen a channel from below), so the two repairs run to
    a joint fixpoint; supports only ever grow, which bounds the alternation.
    Flagged patterns are handled most-entangled first: descending
    impact = number of other flagged patterns they contain.
    """
    work = pset.copy()
    stuck: set[Itemset] = set()
    for _ in range(_MAX_PASSES):
        work = privacy_additive_sanitize(work, k, report)
        if unexplainable:
            bad = detect_unexplainable(work, config)
        else:
            bad = detect_disc_patterns(work, config)
        bad = [p for p in bad if p not in stuck]
        if not bad:
            return work
        _sanitize_queue(work, _impact_sorted(bad), config, report,
                        extend_to_subsets=unexplainable
                        and config.measure in _GROUP_TARGETED,
                        stuck=stuck)
    raise RuntimeError("combined sanitization did not converge")
