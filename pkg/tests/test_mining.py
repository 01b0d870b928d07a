"""Frequent itemsets, classification rules, and contingency counting."""

from __future__ import annotations

import random
from fractions import Fraction
from itertools import combinations, product

import pytest
from hypothesis import given, settings, strategies as st

import oracles
from conftest import make_config, make_pset
from fairmine.mining import (
    ContingencyCounts,
    PatternSet,
    contingency,
    mine_all_rules,
    mine_frequent,
    mine_rules,
    read_rules,
    thread_cap,
    write_rules,
)
from fairmine.model import ConfigError, DecisionTable, Item, ItemIndex, parse_itemset


def _random_table(rng: random.Random, n_attr=3, n_rows=12) -> DecisionTable:
    attrs = [f"A{i}" for i in range(n_attr)] + ["K"]
    rows = []
    for r in range(n_rows):
        row = [rng.choice(["u", "v", "w"][: rng.randint(2, 3)]) for _ in range(n_attr)]
        row.append("Yes" if r == 0 else "No" if r == 1 else rng.choice(["Yes", "No"]))
        rows.append(row)
    return DecisionTable(attrs, rows, "K")


def _records(table: DecisionTable) -> list[dict]:
    return [dict(zip(table.attributes, row)) for row in table.rows]


def _plain(pset: PatternSet) -> dict:
    return {frozenset((i.attribute, i.value) for i in p): s
            for p, s in pset.patterns.items()}


@pytest.mark.parametrize("seed", range(8))
@pytest.mark.parametrize("sigma", [1, 2, 4])
def test_mine_frequent_agrees_with_exhaustive_enumeration(seed, sigma):
    table = _random_table(random.Random(seed))
    got = _plain(mine_frequent(table, sigma))
    want = oracles.all_patterns(_records(table), sigma)
    assert got == want


def test_mine_frequent_rejects_nonpositive_sigma(approvals10):
    with pytest.raises(ConfigError, match="sigma"):
        mine_frequent(approvals10, 0)


def test_pattern_order_is_size_then_lexicographic(approvals10):
    pset = mine_frequent(approvals10, 3)
    ordered = pset.ordered()
    keys = [(len(p), tuple(sorted(str(i) for i in p))) for p in ordered]
    assert keys == sorted(keys)


class TestRuleMining:
    def test_rules_match_brute_force(self, credit7):
        """Every premise with supp(X,C) ≥ ms and conf ≥ min_conf, nothing else."""
        ms, min_conf = 1, Fraction(1, 2)
        conclusion = Item("Credit_approved", "No")
        got = {(r.rule.premise, r.support, r.conf)
               for r in mine_rules(credit7, ms, min_conf, conclusion)}
        recs = _records(credit7)
        want = set()
        data_attrs = [a for a in credit7.attributes if a != "Credit_approved"]
        for n_att in range(1, len(data_attrs) + 1):
            for subset in combinations(data_attrs, n_att):
                domains = [sorted({r[a] for r in recs}) for a in subset]
                for values in product(*domains):
                    pairs = list(zip(subset, values))
                    supp_xc = oracles.support(recs, pairs + [("Credit_approved", "No")])
                    supp_x = oracles.support(recs, pairs)
                    if supp_xc < ms or supp_x == 0:
                        continue
                    conf = Fraction(supp_xc, supp_x)
                    if conf >= min_conf:
                        premise = parse_itemset([f"{a}={v}" for a, v in pairs])
                        want.add((premise, supp_xc, conf))
        assert got == want

    def test_rule_support_counts_premise_with_conclusion(self, credit7):
        rules = mine_rules(credit7, 1, Fraction(0), Item("Credit_approved", "No"))
        by_premise = {r.rule.premise: r for r in rules}
        female = by_premise[parse_itemset(["Sex=Female"])]
        assert (female.support, female.conf) == (2, Fraction(2, 3))

    def test_conclusion_must_be_a_class_item(self, credit7):
        with pytest.raises(ConfigError, match="class item"):
            mine_rules(credit7, 1, Fraction(0), Item("Sex", "Female"))

    def test_all_rules_are_sorted_and_cover_both_classes(self, credit7):
        rules = mine_all_rules(credit7, 1, Fraction(0))
        assert [r.key() for r in rules] == sorted(r.key() for r in rules)
        assert {r.rule.conclusion.value for r in rules} == {"Yes", "No"}
        for r in rules:
            assert r.rule.premise, "premises are never empty"
            assert all(i.attribute != "Credit_approved" for i in r.rule.premise)

    def test_rule_files_round_trip(self, credit7, tmp_path):
        rules = mine_all_rules(credit7, 1, Fraction(1, 4))
        path = tmp_path / "rules.jsonl"
        write_rules(rules, str(path))
        back = read_rules(str(path))
        assert [(r.rule.premise, r.rule.conclusion, r.support) for r in back] \
            == [(r.rule.premise, r.rule.conclusion, r.support) for r in rules]
        for a, b in zip(back, rules):
            assert abs(a.conf - b.conf) < Fraction(1, 10**12)

    def test_read_rules_reports_the_offending_line(self, tmp_path):
        path = tmp_path / "rules.jsonl"
        path.write_text('{"premise":["Sex=Female"],"class":"K=No","support":1,"conf":0.5}\nnot json\n')
        with pytest.raises(ConfigError, match=r"rules\.jsonl:2"):
            read_rules(str(path))


def test_pattern_set_jsonl_round_trip_is_exact(tmp_path):
    pset = make_pset({("Sex=Female", "Job=Vet"): 45, ("Sex=Female",): 52}, sigma=3)
    path = tmp_path / "p.jsonl"
    pset.to_jsonl(str(path))
    again = PatternSet.from_jsonl(str(path), sigma=3)
    assert again.patterns == pset.patterns


def test_pattern_set_from_jsonl_validates_support(tmp_path):
    path = tmp_path / "p.jsonl"
    path.write_text('{"items":["Sex=Female"],"support":-1}\n')
    with pytest.raises(ConfigError, match="non-negative"):
        PatternSet.from_jsonl(str(path))


def test_anti_monotone_violations_found():
    bad = make_pset({("Sex=Female",): 3, ("Sex=Female", "Job=Vet"): 5})
    pairs = bad.anti_monotone_violations()
    assert len(pairs) == 1 and len(pairs[0][0]) < len(pairs[0][1])
    assert not make_pset({("Sex=Female",): 5, ("Sex=Female", "Job=Vet"): 5}).anti_monotone_violations()


@given(st.data())
@settings(max_examples=60)
def test_contingency_matches_oracle_cells(data):
    rng = random.Random(data.draw(st.integers(0, 10**6)))
    table = _random_table(rng)
    recs = _records(table)
    a = [("A0", data.draw(st.sampled_from("uvw")))]
    b = [("A1", data.draw(st.sampled_from("uvw")))]
    counts = contingency(parse_itemset([f"{x}={y}" for x, y in a]),
                         parse_itemset([f"{x}={y}" for x, y in b]),
                         Item("K", "No"), table)
    a1, n1, a2, n2, bc, sb = oracles.cells(recs, a, b, ("K", "No"))
    assert (counts.a1, counts.n1, counts.a2, counts.n2) == (a1, n1, a2, n2)
    assert (counts.supp_bc, counts.supp_b, counts.total) == (bc, sb, len(recs))


def test_contingency_rejects_ill_formed_splits(approvals10):
    with pytest.raises(ConfigError, match="nonempty"):
        contingency(frozenset(), parse_itemset(["Race=White"]),
                    Item("Credit_approved", "No"), approvals10)
    with pytest.raises(ConfigError, match="overlap"):
        contingency(parse_itemset(["Sex=Female"]), parse_itemset(["Sex=Male"]),
                    Item("Credit_approved", "No"), approvals10)


def test_contingency_counts_validate_and_expose_rates():
    counts = ContingencyCounts(3, 4, 1, 6, 4, 10, 10)
    assert counts.p1 == Fraction(3, 4)
    assert counts.p2 == Fraction(1, 6)
    assert counts.p == Fraction(4, 10)
    empty = ContingencyCounts(0, 0, 2, 5, 2, 5, 5)
    assert empty.p1 is None
    with pytest.raises(AssertionError):
        ContingencyCounts(3, 4, 1, 6, 5, 10, 10)  # rows must add up


def test_thread_cap_reads_environment(monkeypatch):
    monkeypatch.setenv("FAIRMINE_THREADS", "3")
    assert thread_cap() == 3
    monkeypatch.setenv("FAIRMINE_THREADS", "garbage")
    assert thread_cap() >= 1
    monkeypatch.delenv("FAIRMINE_THREADS")
    assert 1 <= thread_cap() <= 4


def test_mining_is_thread_count_invariant(monkeypatch):
    table = _random_table(random.Random(99), n_attr=4, n_rows=40)
    monkeypatch.setenv("FAIRMINE_THREADS", "1")
    solo = mine_frequent(table, 2).patterns
    monkeypatch.setenv("FAIRMINE_THREADS", "4")
    quad = mine_frequent(table, 2).patterns
    assert solo == quad


def test_pattern_set_membership_and_items():
    pset = make_pset({("Sex=Female", "Job=Vet"): 45})
    assert parse_itemset(["Sex=Female", "Job=Vet"]) in pset
    assert pset.support(parse_itemset(["Sex=Male"])) is None
    assert Item("Job", "Vet") in pset.items()
