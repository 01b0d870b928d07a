"""Full-domain generalization and the fairness-aware anonymization search.

A generalization is a choice of hierarchy level per quasi-identifier.  The
search walks attribute subsets of growing size, breadth-first by node
height, pruning with two monotone properties: k-anonymity survives
generalization, and — for the measures whose context baseline is pinned by
the node's non-protected attributes — so does the absence of flagged
groups, which lets whole branches be marked protective without a scan.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Mapping, Optional, Sequence

from .measures import MeasureValue, is_discriminatory, measure as eval_measure
from .mining import ContingencyCounts
from .model import (
    ConfigError,
    DecisionTable,
    GeneralizationHierarchy,
    ProtectionConfig,
)

Hierarchies = Mapping[str, GeneralizationHierarchy]


@dataclass(frozen=True, order=True)
class GenNode:
    """Hierarchy levels for a (sub)set of quasi-identifier attributes."""

    attrs: tuple[str, ...]
    levels: tuple[int, ...]

    def __post_init__(self):
        if len(self.attrs) != len(self.levels):
            raise ConfigError("node needs one level per attribute")
        if tuple(sorted(self.attrs)) != self.attrs:
            raise ConfigError("node attributes must be sorted")

    @property
    def height(self) -> int:
        return sum(self.levels)

    def pairs(self) -> tuple[tuple[str, int], ...]:
        return tuple(zip(self.attrs, self.levels))

    def level_of(self, attr: str) -> int:
        return self.levels[self.attrs.index(attr)]

    def bumped(self, idx: int) -> "GenNode":
        levels = list(self.levels)
        levels[idx] += 1
        return GenNode(self.attrs, tuple(levels))

    def direct_generalizations(self, hier: Hierarchies) -> list["GenNode"]:
        return [self.bumped(i) for i, a in enumerate(self.attrs)
                if self.levels[i] < hier[a].height]

    def direct_specializations(self) -> list["GenNode"]:
        out = []
        for i in range(len(self.attrs)):
            if self.levels[i] > 0:
                levels = list(self.levels)
                levels[i] -= 1
                out.append(GenNode(self.attrs, tuple(levels)))
        return out

    def to_json(self) -> dict:
        return {a: l for a, l in self.pairs()}


def node_from_mapping(levels: Mapping[str, int]) -> GenNode:
    attrs = tuple(sorted(levels))
    return GenNode(attrs, tuple(levels[a] for a in attrs))


# ---------------------------------------------------------------------------
# applying a generalization


def generalize(table: DecisionTable, node: GenNode, hier: Hierarchies,
               ) -> DecisionTable:
    """Replace each of the node's attribute values by its level ancestor."""
    for attr in node.attrs:
        if attr not in hier:
            raise ConfigError(f"no hierarchy for attribute {attr!r}")
        table.column(attr)  # unknown attribute -> error
    cols = [(table.column(a), hier[a], lvl)
            for a, lvl in node.pairs() if lvl > 0]
    if not cols:
        return table
    rows = []
    for row in table.rows:
        row = list(row)
        for col, h, lvl in cols:
            row[col] = h.generalize_value(row[col], lvl)
        rows.append(tuple(row))
    return table.replaced(tuple(rows))


# ---------------------------------------------------------------------------
# frequency sets and k-anonymity


FrequencySet = dict  # generalized value tuple (node attr order) -> count


def frequency_set(table: DecisionTable, node: GenNode, hier: Hierarchies,
                  parent: Optional[tuple[GenNode, FrequencySet]] = None,
                  ) -> FrequencySet:
    """Counts per generalized value combination.

    With a `parent` — a frequency set of a direct specialization — the
    counts are rolled up through the single differing hierarchy map instead
    of rescanning the table; both routes give identical results.
    """
    freq: FrequencySet = {}
    if parent is not None:
        pnode, pfreq = parent
        if pnode.attrs != node.attrs:
            raise ConfigError("roll-up needs the same attribute set")
        diff = [i for i in range(len(node.attrs))
                if pnode.levels[i] != node.levels[i]]
        if len(diff) != 1 or pnode.levels[diff[0]] + 1 != node.levels[diff[0]]:
            raise ConfigError("roll-up parent must sit one level below")
        j = diff[0]
        mapping = hier[node.attrs[j]].maps[pnode.levels[j]]
        for key, count in pfreq.items():
            new_key = key[:j] + (mapping[key[j]],) + key[j + 1:]
            freq[new_key] = freq.get(new_key, 0) + count
        return freq
    cols = [(table.column(a), hier[a], lvl) for a, lvl in node.pairs()]
    for row in table.rows:
        key = tuple(h.generalize_value(row[c], lvl) for c, h, lvl in cols)
        freq[key] = freq.get(key, 0) + 1
    return freq


def freq_is_k_anonymous(freq: FrequencySet, k: int) -> bool:
    return all(count >= k for count in freq.values())


# ---------------------------------------------------------------------------
# group-level discrimination check


CASE_DISCRIMINATORY = 1      # some frequent group flags: node fails
CASE_PROTECTIVE = 2          # protective here, nothing provable upward
CASE_PROTECTIVE_UPWARD = 3   # protective here and along DA generalizations


@dataclass(frozen=True)
class PDGroupRecord:
    a_values: tuple[str, ...]
    b_values: tuple[str, ...]
    counts: ContingencyCounts
    frequent: bool
    value: MeasureValue


def _pd_split(node: GenNode, hier: Hierarchies, config: ProtectionConfig,
              ) -> tuple[list[str], list[str]]:
    """Node attributes split into protected part (below singleton) and rest."""
    da = set(config.pd_attributes)
    a_attrs = [a for a, lvl in node.pairs() if a in da and lvl < hier[a].height]
    b_attrs = [a for a in node.attrs if a not in a_attrs]
    return a_attrs, b_attrs


def pd_groups(table: DecisionTable, node: GenNode, hier: Hierarchies,
              config: ProtectionConfig) -> list[PDGroupRecord]:
    """One record per protected-group rule over the node's attributes.

    Premises are full-width: one generalized value per node attribute, the
    protected part being the values of the below-singleton DA attributes.
    The complement cells come from the context totals by subtraction.
    """
    a_attrs, b_attrs = _pd_split(node, hier, config)
    if not a_attrs:
        raise ConfigError("node has no protected attribute below its singleton")
    ms_count = config.ms.count(len(table))
    neg = table.column(config.class_attribute)
    negative = config.negative_class.value
    acols = [(table.column(a), hier[a], node.level_of(a)) for a in a_attrs]
    bcols = [(table.column(a), hier[a], node.level_of(a)) for a in b_attrs]
    n_counts: dict = {}
    c_counts: dict = {}
    for row in table.rows:
        ak = tuple(h.generalize_value(row[c], l) for c, h, l in acols)
        bk = tuple(h.generalize_value(row[c], l) for c, h, l in bcols)
        n_counts[(ak, bk)] = n_counts.get((ak, bk), 0) + 1
        if row[neg] == negative:
            c_counts[(ak, bk)] = c_counts.get((ak, bk), 0) + 1
    supp_b: dict = {}
    supp_bc: dict = {}
    for (ak, bk), n in n_counts.items():
        supp_b[bk] = supp_b.get(bk, 0) + n
        supp_bc[bk] = supp_bc.get(bk, 0) + c_counts.get((ak, bk), 0)
    baselines: dict = {}
    if config.measure == "clift":
        for (ak, bk), n in n_counts.items():
            a1 = c_counts.get((ak, bk), 0)
            if a1 >= ms_count and a1 > 0:
                conf = Fraction(a1, n)
                if bk not in baselines or conf < baselines[bk]:
                    baselines[bk] = conf
    out = []
    for (ak, bk) in sorted(n_counts):
        n1 = n_counts[(ak, bk)]
        a1 = c_counts.get((ak, bk), 0)
        counts = ContingencyCounts(
            a1, n1, supp_bc[bk] - a1, supp_b[bk] - n1,
            supp_bc[bk], supp_b[bk], len(table))
        if config.measure == "clift":
            base = baselines.get(bk)
            conf = Fraction(a1, n1)
            mv = MeasureValue("clift", conf / base) if base else MeasureValue("clift", None)
        else:
            mv = eval_measure(counts, config.measure)
        out.append(PDGroupRecord(ak, bk, counts, a1 >= ms_count, mv))
    return out


def check_alpha_protection(table: DecisionTable, node: GenNode,
                           hier: Hierarchies, config: ProtectionConfig) -> int:
    """Classify a node by its protected-group rules.

    Any frequent flagged group fails the node outright.  For the measures
    whose baseline is pinned by the context attributes alone (extended lift
    and the favored-value ratio), a node with no flagged group at *any*
    frequency stays protective along protected-attribute generalizations:
    merged groups' confidences are mediants of the parts while the baseline
    stands still.  For the favored-value ratio that argument also needs no
    infrequent group sitting below the frequent baseline it was compared
    against, since such a group could lower the baseline after a merge.
    """
    if config.alpha is None:
        raise ConfigError("the discrimination check needs alpha")
    groups = pd_groups(table, node, hier, config)
    alpha = config.alpha
    if config.measure in ("elift", "clift"):
        if any(g.frequent and is_discriminatory(g.value, alpha) for g in groups):
            return CASE_DISCRIMINATORY
        if any(not g.frequent and is_discriminatory(g.value, alpha) for g in groups):
            return CASE_PROTECTIVE
        if config.measure == "clift":
            by_b: dict = {}
            for g in groups:
                if g.frequent and g.counts.a1 > 0:
                    conf = Fraction(g.counts.a1, g.counts.n1)
                    if g.b_values not in by_b or conf < by_b[g.b_values]:
                        by_b[g.b_values] = conf
            for g in groups:
                base = by_b.get(g.b_values)
                if (not g.frequent and base is not None
                        and Fraction(g.counts.a1, g.counts.n1) < base):
                    return CASE_PROTECTIVE
        return CASE_PROTECTIVE_UPWARD
    if any(g.frequent and is_discriminatory(g.value, alpha) for g in groups):
        return CASE_DISCRIMINATORY
    return CASE_PROTECTIVE


# ---------------------------------------------------------------------------
# the lattice search


def _join_candidates(survivors: set[GenNode]) -> list[GenNode]:
    """Size-(i+1) candidates from size-i survivors, Apriori style."""
    ordered = sorted(survivors)
    out = []
    for a, b in combinations(ordered, 2):
        pa, pb = a.pairs(), b.pairs()
        if pa[:-1] != pb[:-1] or pa[-1][0] >= pb[-1][0]:
            continue
        pairs = pa + (pb[-1],)
        if all(GenNode(tuple(x[0] for x in sub), tuple(x[1] for x in sub))
               in survivors
               for sub in combinations(pairs, len(pairs) - 1)):
            out.append(GenNode(tuple(x[0] for x in pairs),
                               tuple(x[1] for x in pairs)))
    return out


def alpha_protective_incognito(table: DecisionTable, hier: Hierarchies,
                               config: ProtectionConfig, qi: Sequence[str],
                               k: Optional[int] = None,
                               tau: Optional[int] = None) -> list[GenNode]:
    """Full-domain generalizations that are k-anonymous and group-protective.

    Protection is established through every attribute subset of size ≤ tau;
    with no alpha (or no protected attribute among the QI) this reduces to
    plain k-anonymity search.  Returns full-QI nodes in lattice order.
    """
    qi = tuple(sorted(qi))
    if not qi:
        raise ConfigError("need at least one quasi-identifier")
    for attr in qi:
        if attr not in hier:
            raise ConfigError(f"no hierarchy for quasi-identifier {attr!r}")
        table.column(attr)
    if config.class_attribute in qi:
        raise ConfigError("the class attribute cannot be generalized")
    k = config.k if k is None else k
    tau = tau if tau is not None else (
        config.tau if config.tau is not None else min(4, len(qi)))
    da = tuple(a for a in config.pd_attributes if a in qi)
    disc = config.alpha is not None and bool(da)
    if config.alpha is not None and set(config.pd_attributes) - set(qi):
        extra = sorted(set(config.pd_attributes) - set(qi))
        raise ConfigError(f"protected attributes outside the QI set: {extra}")

    candidates = [GenNode((a,), (lvl,))
                  for a in qi for lvl in range(hier[a].height + 1)]
    survivors: set[GenNode] = set()
    for i in range(1, len(qi) + 1):
        survivors = set(candidates)
        in_lattice = set(candidates)
        kanon_marked: set[GenNode] = set()
        alpha_marked: set[GenNode] = set()
        freq_cache: dict[GenNode, FrequencySet] = {}
        for node in sorted(candidates, key=lambda n: (n.height, n)):
            if node in alpha_marked:
                continue  # proven k-anonymous and protective, keep as is
            if node in kanon_marked:
                anonymous = True
            else:
                parent = next(
                    ((p, freq_cache[p]) for p in node.direct_specializations()
                     if p in freq_cache), None)
                freq = frequency_set(table, node, hier, parent)
                freq_cache[node] = freq
                anonymous = freq_is_k_anonymous(freq, k)
            if not anonymous:
                survivors.discard(node)
                continue
            for gen in node.direct_generalizations(hier):
                if gen in in_lattice:
                    kanon_marked.add(gen)
            a_attrs, _ = _pd_split(node, hier, config)
            if disc and i <= tau and a_attrs:
                case = check_alpha_protection(table, node, hier, config)
                if case == CASE_DISCRIMINATORY:
                    survivors.discard(node)
                elif case == CASE_PROTECTIVE_UPWARD:
                    for idx, attr in enumerate(node.attrs):
                        if attr in a_attrs and node.levels[idx] < hier[attr].height:
                            gen = node.bumped(idx)
                            if gen in in_lattice:
                                alpha_marked.add(gen)
        if i == len(qi):
            break
        candidates = _join_candidates(survivors)
        if not candidates:
            return []
    return sorted(n for n in survivors if n.attrs == qi)


# ---------------------------------------------------------------------------
# generalization quality


@dataclass(frozen=True)
class QualityReport:
    gh: int
    dr: Fraction
    cm: Fraction

    def to_json(self) -> dict:
        return {"gh": self.gh, "dr": float(self.dr), "cm": float(self.cm)}


def quality(table: DecisionTable, node: GenNode, hier: Hierarchies,
            class_attribute: str) -> QualityReport:
    """Generalization height, discernibility ratio, classification metric.

    Height totals the level indices; discernibility sums squared group
    sizes against the squared table size; the classification metric charges
    each record whose class is not its group's majority (tied groups count
    the lexicographically larger class as the minority).
    """
    freq = frequency_set(table, node, hier)
    n = len(table)
    dr = Fraction(sum(c * c for c in freq.values()), n * n)
    cols = [(table.column(a), hier[a], lvl) for a, lvl in node.pairs()]
    ccol = table.column(class_attribute)
    per_group: dict = {}
    for row in table.rows:
        key = tuple(h.generalize_value(row[c], lvl) for c, h, lvl in cols)
        per_group.setdefault(key, {})
        per_group[key][row[ccol]] = per_group[key].get(row[ccol], 0) + 1
    penalties = 0
    for key, by_class in per_group.items():
        majority = min(by_class, key=lambda cls: (-by_class[cls], cls))
        penalties += sum(cnt for cls, cnt in by_class.items() if cls != majority)
    return QualityReport(node.height, dr, Fraction(penalties, n))


def select_minimal(candidates: Sequence[GenNode], table: DecisionTable,
                   hier: Hierarchies, criterion: str,
                   class_attribute: str) -> GenNode:
    """The best candidate under gh, dr or cm; ties go to the smallest tuple."""
    if not candidates:
        raise ConfigError("no admissible generalization")
    if criterion not in ("gh", "dr", "cm"):
        raise ConfigError(f"unknown criterion {criterion!r}")
    def score(node: GenNode):
        q = quality(table, node, hier, class_attribute)
        return ({"gh": q.gh, "dr": q.dr, "cm": q.cm}[criterion], node)
    return min(candidates, key=score)
