"""Brute-force reference implementations used to pin expected values.

Everything here works on plain data structures — records as dicts, item
pairs as (attribute, value) tuples, pattern sets as dicts — and recomputes
quantities from first principles (set comprehensions over records, literal
inclusion-exclusion sums, full lattice enumeration).  Nothing is shared
with the package implementations beyond the model dataclasses needed to
call them in comparison tests.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import chain, combinations, product
from typing import Optional

Record = dict  # attribute -> value
Pair = tuple  # (attribute, value)


def holds(record: Record, items) -> bool:
    return all(record.get(a) == v for a, v in items)


def support(records: list[Record], items) -> int:
    return sum(1 for r in records if holds(r, items))


def confidence(records: list[Record], premise, conclusion) -> Optional[Fraction]:
    n = support(records, premise)
    if n == 0:
        return None
    return Fraction(support(records, list(premise) + list(conclusion)), n)


def powerset(iterable):
    s = list(iterable)
    return chain.from_iterable(combinations(s, n) for n in range(len(s) + 1))


# ---------------------------------------------------------------------------
# discrimination measures, straight from the four contingency cells


def cells(records: list[Record], a_items, b_items, c_item):
    """(a1, n1, a2, n2, supp_bc, supp_b) with ¬A = "fails at least one of A"."""
    b_recs = [r for r in records if holds(r, b_items)]
    a_recs = [r for r in b_recs if holds(r, a_items)]
    na_recs = [r for r in b_recs if not holds(r, a_items)]
    a1 = sum(1 for r in a_recs if holds(r, [c_item]))
    a2 = sum(1 for r in na_recs if holds(r, [c_item]))
    return a1, len(a_recs), a2, len(na_recs), a1 + a2, len(b_recs)


def measure_value(records, a_items, b_items, c_item, f) -> Optional[Fraction]:
    a1, n1, a2, n2, bc, b = cells(records, a_items, b_items, c_item)
    if n1 == 0:
        return None
    p1 = Fraction(a1, n1)
    p2 = Fraction(a2, n2) if n2 else None
    p = Fraction(bc, b)
    if f == "elift":
        return p1 / p if p else None
    if f == "elift_d":
        return p1 - p
    if f == "elift_c":
        return (1 - p1) / (1 - p) if p != 1 else None
    if f in ("slift", "clift"):
        return p1 / p2 if p2 else None
    if f == "slift_d":
        return p1 - p2 if p2 is not None else None
    if f == "slift_c":
        return (1 - p1) / (1 - p2) if p2 is not None and p2 != 1 else None
    if f == "olift":
        if not p2 or p1 == 1:
            return None
        return (p1 * (1 - p2)) / (p2 * (1 - p1))
    raise ValueError(f)


def flags(value: Optional[Fraction], alpha, f) -> bool:
    if value is None:
        return False
    if f.endswith("_c"):
        return value <= alpha
    return value >= alpha


def elb(gamma, delta, beta1, beta2) -> Optional[Fraction]:
    if delta is None or delta <= 0 or beta2 is None or beta2 <= 0:
        return None
    fx = Fraction(beta1, beta2) * (beta2 + gamma - 1)
    if fx <= 0:
        return Fraction(0)
    return fx / delta


# ---------------------------------------------------------------------------
# pattern-set channels, literally from Definition 5.1


def channel_support(patterns: dict, i_set: frozenset, j_set: frozenset) -> int:
    extra = sorted(j_set - i_set)
    total = 0
    for sub in powerset(extra):
        x = i_set | frozenset(sub)
        total += (-1) ** len(sub) * patterns.get(x, 0)
    return total


def channels(patterns: dict, k: int) -> list[tuple[frozenset, frozenset, int]]:
    out = []
    for i_set in patterns:
        for j_set in patterns:
            if i_set < j_set:
                cs = channel_support(patterns, i_set, j_set)
                if 0 < cs < k:
                    out.append((i_set, j_set, cs))
    return out


def record_level_channel(records: list[Record], i_items, j_items) -> int:
    """The count the channel exposes: holds all of I, none of J \\ I extra."""
    count = 0
    extra = [p for p in j_items if p not in i_items]
    for r in records:
        if holds(r, i_items) and all(r.get(a) != v for a, v in extra):
            count += 1
    return count


def all_patterns(records: list[Record], sigma: int = 1) -> dict:
    """Every itemset (one value per attribute subset) with support ≥ sigma."""
    attrs = sorted({a for r in records for a in r})
    out: dict = {}
    for attr_subset in powerset(attrs):
        if not attr_subset:
            continue
        domains = [sorted({r[a] for r in records if a in r}) for a in attr_subset]
        for values in product(*domains):
            items = frozenset(zip(attr_subset, values))
            s = support(records, items)
            if s >= sigma:
                out[items] = s
    return out


# ---------------------------------------------------------------------------
# generalization lattice ground truth


def generalize_value(hier_maps: list[dict], value: str, level: int) -> str:
    for lvl in range(level):
        value = hier_maps[lvl][value]
    return value


def generalize_records(records: list[Record], levels: dict, hiers: dict,
                       ) -> list[Record]:
    out = []
    for r in records:
        g = dict(r)
        for attr, lvl in levels.items():
            g[attr] = generalize_value(hiers[attr], r[attr], lvl)
        out.append(g)
    return out


def is_k_anonymous_table(records: list[Record], qi, k: int) -> bool:
    groups: dict = {}
    for r in records:
        key = tuple(r[a] for a in qi)
        groups[key] = groups.get(key, 0) + 1
    return all(c >= k for c in groups.values())


def table_alpha_protective(records: list[Record], qi, da, class_attr,
                           negative, f, alpha, ms_count, hiers, levels) -> bool:
    """No frequent flagged group rule over any attribute subset of the
    generalized table.  Groups are full-width value combinations; the
    protected part is every subset attribute in DA still below its
    singleton level; clift compares against the lowest frequent nonzero
    confidence among sibling groups in the same context."""
    recs = generalize_records(records, levels, hiers, )
    for attr_subset in powerset(sorted(qi)):
        a_attrs = [a for a in attr_subset
                   if a in da and levels[a] < len(hiers[a])]
        if not a_attrs:
            continue
        b_attrs = [a for a in attr_subset if a not in a_attrs]
        groups: dict = {}
        for r in recs:
            ak = tuple(r[a] for a in a_attrs)
            bk = tuple(r[a] for a in b_attrs)
            n, c = groups.get((ak, bk), (0, 0))
            groups[(ak, bk)] = (n + 1, c + (1 if r[class_attr] == negative else 0))
        if f == "clift":
            base: dict = {}
            for (ak, bk), (n, c) in groups.items():
                if c >= ms_count and c > 0:
                    conf = Fraction(c, n)
                    if bk not in base or conf < base[bk]:
                        base[bk] = conf
            for (ak, bk), (n, c) in groups.items():
                if c >= ms_count and bk in base:
                    if flags(Fraction(c, n) / base[bk], alpha, f):
                        return False
            continue
        supp_b: dict = {}
        supp_bc: dict = {}
        for (ak, bk), (n, c) in groups.items():
            sb, sbc = supp_b.get(bk, 0), supp_bc.get(bk, 0)
            supp_b[bk], supp_bc[bk] = sb + n, sbc + c
        for (ak, bk), (n, c) in groups.items():
            if c < ms_count:
                continue
            p1 = Fraction(c, n)
            nb, cb = supp_b[bk] - n, supp_bc[bk] - c
            p2 = Fraction(cb, nb) if nb else None
            p = Fraction(supp_bc[bk], supp_b[bk])
            if f == "elift":
                value = p1 / p if p else None
            elif f == "slift":
                value = p1 / p2 if p2 else None
            elif f == "olift":
                value = ((p1 * (1 - p2)) / (p2 * (1 - p1))
                         if p2 and p1 != 1 else None)
            elif f == "slift_d":
                value = p1 - p2 if p2 is not None else None
            elif f == "elift_d":
                value = p1 - p
            elif f == "slift_c":
                value = ((1 - p1) / (1 - p2)
                         if p2 is not None and p2 != 1 else None)
            elif f == "elift_c":
                value = (1 - p1) / (1 - p) if p != 1 else None
            else:
                raise ValueError(f)
            if flags(value, alpha, f):
                return False
    return True


def protective_anonymous_nodes(records, qi, da, class_attr, negative, hiers,
                               k, f=None, alpha=None, ms_count=1):
    """All full-QI level vectors that pass k-anonymity (and α-protection)."""
    qi = sorted(qi)
    out = []
    for combo in product(*[range(len(hiers[a]) + 1) for a in qi]):
        levels = dict(zip(qi, combo))
        recs = generalize_records(records, levels, hiers)
        if not is_k_anonymous_table(recs, qi, k):
            continue
        if alpha is not None and any(a in da for a in qi):
            if not table_alpha_protective(records, qi, da, class_attr,
                                          negative, f, alpha, ms_count,
                                          hiers, levels):
                continue
        out.append(levels)
    return out


# ---------------------------------------------------------------------------
# quality metrics recomputed differently


def cm_by_sorting(records: list[Record], qi, class_attr) -> Fraction:
    """Classification-metric penalty via sort + run-length scan."""
    keyed = sorted((tuple(r[a] for a in qi), r[class_attr]) for r in records)
    penalties = 0
    i = 0
    while i < len(keyed):
        j = i
        by_class: dict = {}
        while j < len(keyed) and keyed[j][0] == keyed[i][0]:
            by_class[keyed[j][1]] = by_class.get(keyed[j][1], 0) + 1
            j += 1
        # ties penalize the lexicographically larger class: pick smallest max
        top = max(by_class.values())
        winner = min(c for c, n in by_class.items() if n == top)
        penalties += (j - i) - by_class[winner]
        i = j
    return Fraction(penalties, len(records))


def chi2_2x2(a: int, b: int, c: int, d: int) -> float:
    """Pearson chi-square of [[a, b], [c, d]] without continuity correction."""
    n = a + b + c + d
    r1, r2, c1, c2 = a + b, c + d, a + c, b + d
    if 0 in (r1, r2, c1, c2):
        return 0.0
    det = a * d - b * c
    return n * det * det / (r1 * r2 * c1 * c2)
