"""Apriori mining of frequent itemsets and frequent classification rules.

Counting is exact: supports come from AND-ing per-item record bitmaps and
popcounting.  Candidate generation is the classic join of sorted (k−1)-sets
sharing a (k−2)-prefix, with subset pruning.  Everything iterates in one
deterministic order (size, then attribute=value strings), so dumps are
byte-stable across runs and across thread counts.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Optional, Sequence

from .model import (
    ConfigError,
    DecisionTable,
    Item,
    ItemIndex,
    Itemset,
    itemset_key,
    make_itemset,
    render_itemset,
)


def thread_cap() -> int:
    raw = os.environ.get("FAIRMINE_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n < 1:
        n = min(4, os.cpu_count() or 1)
    return n


# ---------------------------------------------------------------------------
# pattern sets


class PatternSet:
    """A support-annotated collection of itemsets (σ-frequent when mined)."""

    def __init__(self, patterns: dict[Itemset, int], sigma: int = 1):
        self.patterns = dict(patterns)
        self.sigma = sigma

    def __len__(self) -> int:
        return len(self.patterns)

    def __contains__(self, itemset: Itemset) -> bool:
        return itemset in self.patterns

    def support(self, itemset: Itemset) -> Optional[int]:
        """Support from the set alone; None when the itemset is not carried."""
        return self.patterns.get(frozenset(itemset))

    def ordered(self) -> list[Itemset]:
        return sorted(self.patterns, key=itemset_key)

    def copy(self) -> "PatternSet":
        return PatternSet(dict(self.patterns), self.sigma)

    def add(self, itemset: Itemset, delta: int) -> None:
        self.patterns[itemset] = self.patterns[itemset] + delta

    def items(self) -> Itemset:
        out: set[Item] = set()
        for p in self.patterns:
            out |= p
        return frozenset(out)

    def anti_monotone_violations(self) -> list[tuple[Itemset, Itemset]]:
        """Pairs (p, q) with p ⊂ q but supp(p) < supp(q)."""
        ordered = self.ordered()
        bad = []
        for i, p in enumerate(ordered):
            sp = self.patterns[p]
            for q in ordered[i + 1:]:
                if len(q) > len(p) and p < q and sp < self.patterns[q]:
                    bad.append((p, q))
        return bad

    def to_jsonl(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for p in self.ordered():
                fh.write(json.dumps(
                    {"items": render_itemset(p), "support": self.patterns[p]},
                    ensure_ascii=False, separators=(",", ":")) + "\n")

    @classmethod
    def from_jsonl(cls, path: str, sigma: int = 1) -> "PatternSet":
        patterns: dict[Itemset, int] = {}
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                    itemset = make_itemset(Item.parse(t) for t in obj["items"])
                    support = obj["support"]
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise ConfigError(f"{path}:{line_no}: bad pattern line ({exc})") from None
                if not isinstance(support, int) or support < 0:
                    raise ConfigError(f"{path}:{line_no}: support must be a non-negative integer")
                patterns[itemset] = support
        return cls(patterns, sigma)


# ---------------------------------------------------------------------------
# frequent itemsets


def _sorted_items(itemset: Itemset) -> tuple[Item, ...]:
    return tuple(sorted(itemset))


def _counts(index: ItemIndex, candidates: Sequence[tuple[Item, ...]],
            base_masks: dict[tuple[Item, ...], int]) -> list[int]:
    def one(cand: tuple[Item, ...]) -> int:
        return index.support_with(base_masks[cand[:-1]], cand[-1])

    workers = thread_cap()
    if workers > 1 and len(candidates) > 256:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(one, candidates))
    return [one(c) for c in candidates]


def mine_frequent(table: DecisionTable, sigma: int,
                  index: Optional[ItemIndex] = None,
                  items: Optional[Iterable[Item]] = None) -> PatternSet:
    """All itemsets with support ≥ sigma over the given item universe.

    `items` defaults to every attribute=value pair occurring in the table,
    class items included (pattern pipelines need class-bearing patterns).
    """
    if sigma < 1:
        raise ConfigError(f"sigma must be ≥ 1, got {sigma}")
    index = index or ItemIndex(table)
    universe = sorted(index.masks) if items is None else sorted(set(items))
    return _mine_on_index(index, sigma, universe)


# ---------------------------------------------------------------------------
# classification rules


@dataclass(frozen=True)
class ClassificationRule:
    premise: Itemset
    conclusion: Item

    def __str__(self) -> str:
        lhs = ", ".join(render_itemset(self.premise)) or "∅"
        return f"{lhs} -> {self.conclusion}"

    def key(self) -> tuple:
        return (itemset_key(self.premise), str(self.conclusion))


@dataclass(frozen=True)
class MinedRule:
    rule: ClassificationRule
    support: int          # supp(X, C)
    conf: Fraction

    def key(self) -> tuple:
        return self.rule.key()


def mine_rules(table: DecisionTable, ms: int, min_conf: Fraction,
               conclusion: Item, index: Optional[ItemIndex] = None) -> list[MinedRule]:
    """Frequent rules X→conclusion with supp(X,C) ≥ ms and conf ≥ min_conf.

    Premises are mined on the conclusion-restricted sub-table (supp there
    equals rule support, so Apriori pruning stays sound) and confidences come
    from the full table.  Premises never contain class items and are nonempty.
    """
    if conclusion.attribute != table.class_attribute:
        raise ConfigError(f"conclusion {conclusion} is not a class item")
    index = index or ItemIndex(table)
    class_mask = index.masks.get(conclusion, 0)
    if not class_mask:
        return []
    premise_items = [
        Item(a, v)
        for a in table.attributes if a != table.class_attribute
        for v in table.schema[table.column(a)].domain
    ]
    # Restrict the index to conclusion-supporting records by compacting each
    # item mask onto those bit positions; supports there are rule supports.
    order = list(index.records(class_mask))
    sub_index = ItemIndex.__new__(ItemIndex)
    sub_index.n = len(order)
    sub_index.attributes = table.attributes
    sub_index.masks = {}
    for it in premise_items:
        m = index.masks.get(it, 0)
        sub_mask = 0
        for new_bit, r in enumerate(order):
            if m >> r & 1:
                sub_mask |= 1 << new_bit
        sub_index.masks[it] = sub_mask

    frequent = _mine_on_index(sub_index, ms, premise_items)

    out = []
    for premise, rule_support in frequent.patterns.items():
        n = index.support(premise)
        conf = Fraction(rule_support, n)
        if conf >= min_conf:
            out.append(MinedRule(ClassificationRule(premise, conclusion), rule_support, conf))
    out.sort(key=lambda mr: mr.key())
    return out


def _mine_on_index(index: ItemIndex, sigma: int, items: Sequence[Item]) -> PatternSet:
    """mine_frequent's level-wise core for a pre-built (possibly sub-) index."""
    patterns: dict[Itemset, int] = {}
    level_masks: dict[tuple[Item, ...], int] = {(): (1 << index.n) - 1}
    frontier: list[tuple[Item, ...]] = []
    for it in sorted(set(items)):
        s = index.masks.get(it, 0).bit_count()
        if s >= sigma:
            patterns[frozenset((it,))] = s
            frontier.append((it,))
    while frontier:
        level_masks = {c: level_masks[c[:-1]] & index.masks[c[-1]] for c in frontier}
        survivors = set(frontier)
        candidates = []
        for i, left in enumerate(frontier):
            for right in frontier[i + 1:]:
                if left[:-1] != right[:-1]:
                    break
                if left[-1].attribute == right[-1].attribute:
                    continue
                joined = left + (right[-1],)
                if all(joined[:j] + joined[j + 1:] in survivors for j in range(len(joined) - 1)):
                    candidates.append(joined)
        if not candidates:
            break
        supports = _counts(index, candidates, level_masks)
        frontier = []
        for cand, s in zip(candidates, supports):
            if s >= sigma:
                patterns[frozenset(cand)] = s
                frontier.append(cand)
    return PatternSet(patterns, sigma)


def mine_all_rules(table: DecisionTable, ms: int, min_conf: Fraction,
                   index: Optional[ItemIndex] = None) -> list[MinedRule]:
    """Frequent rules for both class values, in deterministic order."""
    index = index or ItemIndex(table)
    out: list[MinedRule] = []
    for c in table.class_items():
        out.extend(mine_rules(table, ms, min_conf, c, index))
    out.sort(key=lambda mr: mr.key())
    return out


def write_rules(rules: Iterable[MinedRule], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for mr in rules:
            fh.write(json.dumps({
                "premise": render_itemset(mr.rule.premise),
                "class": str(mr.rule.conclusion),
                "support": mr.support,
                "conf": float(mr.conf),
            }, ensure_ascii=False, separators=(",", ":")) + "\n")


def read_rules(path: str) -> list[MinedRule]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                premise = make_itemset(Item.parse(t) for t in obj["premise"])
                conclusion = Item.parse(obj["class"])
                support = int(obj["support"])
                conf = Fraction(str(obj["conf"]))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"{path}:{line_no}: bad rule line ({exc})") from None
            out.append(MinedRule(ClassificationRule(premise, conclusion), support, conf))
    return out


# ---------------------------------------------------------------------------
# contingency counts


@dataclass(frozen=True)
class ContingencyCounts:
    """The four cells of the protected/context split, plus the row totals.

    a1 = supp(A,B,C)   n1 = supp(A,B)
    a2 = supp(¬A,B,C)  n2 = supp(¬A,B)   (computed by subtraction)
    """

    a1: int
    n1: int
    a2: int
    n2: int
    supp_bc: int
    supp_b: int
    total: int

    def __post_init__(self):
        assert 0 <= self.a1 <= self.n1 and 0 <= self.a2 <= self.n2
        assert self.a1 + self.a2 == self.supp_bc and self.n1 + self.n2 == self.supp_b

    @property
    def p1(self) -> Optional[Fraction]:
        return Fraction(self.a1, self.n1) if self.n1 else None

    @property
    def p2(self) -> Optional[Fraction]:
        return Fraction(self.a2, self.n2) if self.n2 else None

    @property
    def p(self) -> Optional[Fraction]:
        return Fraction(self.supp_bc, self.supp_b) if self.supp_b else None


def contingency(a_part: Itemset, b_part: Itemset, conclusion: Item,
                source) -> ContingencyCounts:
    """Exact contingency counts for the rule A,B → C.

    `source` is an ItemIndex or a DecisionTable.  A must be nonempty and
    share no attribute with B (the split would be ill-formed otherwise).
    """
    if not a_part:
        raise ConfigError("contingency needs a nonempty protected part A")
    if {i.attribute for i in a_part} & {i.attribute for i in b_part}:
        raise ConfigError("A and B overlap on an attribute")
    index = source if isinstance(source, ItemIndex) else ItemIndex(source)
    ab = make_itemset(set(a_part) | set(b_part))
    n1 = index.support(ab)
    a1 = index.support_with(index.mask(ab), conclusion)
    supp_b = index.support(frozenset(b_part))
    supp_bc = index.support_with(index.mask(frozenset(b_part)), conclusion)
    return ContingencyCounts(
        a1=a1, n1=n1, a2=supp_bc - a1, n2=supp_b - n1,
        supp_bc=supp_bc, supp_b=supp_b, total=index.n,
    )
