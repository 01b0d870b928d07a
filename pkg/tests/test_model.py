"""Core model layer: items, tables, the bitmap index, hierarchies, config."""

from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

import oracles
from conftest import BASE_CONFIG, DATA, make_config
from fairmine.model import (
    ConfigError,
    DecisionTable,
    GeneralizationHierarchy,
    Item,
    ItemIndex,
    SupportThreshold,
    itemset_key,
    load_config,
    load_hierarchies,
    load_table,
    make_itemset,
    negate,
    parse_itemset,
    render_itemset,
)


class TestItem:
    def test_parse_splits_on_first_equals(self):
        assert Item.parse("Salary=>15000") == Item("Salary", ">15000")

    @pytest.mark.parametrize("bad", ["Sex", "=Female", "Sex=", "="])
    def test_parse_rejects_malformed(self, bad):
        with pytest.raises(ConfigError):
            Item.parse(bad)

    def test_itemset_refuses_two_values_per_attribute(self):
        with pytest.raises(ConfigError, match="two values"):
            parse_itemset(["Sex=Female", "Sex=Male"])

    def test_render_is_sorted_and_key_orders_by_size_first(self):
        small = parse_itemset(["Zed=1"])
        big = parse_itemset(["Age=Old", "Sex=Female"])
        assert render_itemset(big) == ["Age=Old", "Sex=Female"]
        assert itemset_key(small) < itemset_key(big)


class TestLoadTable:
    def test_reference_csv_has_ten_records(self, approvals10):
        assert len(approvals10) == 10
        assert approvals10.class_attribute == "Credit_approved"

    def test_missing_value_rows_are_dropped_and_counted(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("Sex,Credit_approved\nMale,Yes\n?,No\nFemale,No\n")
        table = load_table(str(p), BASE_CONFIG)
        assert len(table) == 2
        assert table.load_report.rows_dropped == 1
        assert table.load_report.rows_read == 3

    def test_empty_data_section_errors(self, tmp_path):
        p = tmp_path / "empty.csv"
        p.write_text("Sex,Credit_approved\n")
        with pytest.raises(ConfigError, match="no records"):
            load_table(str(p), BASE_CONFIG)

    def test_non_binary_class_rejected(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("Credit_approved\nYes\nNo\nMaybe\n")
        with pytest.raises(ConfigError, match="binary"):
            load_table(str(p), BASE_CONFIG)

    def test_declared_domain_checked(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("Sex,Credit_approved\nMale,Yes\nFemale,No\n")
        cfg = dict(BASE_CONFIG, domains={"Sex": ["Male"]})
        with pytest.raises(ConfigError, match="outside its declared domain"):
            load_table(str(p), cfg)

    def test_save_and_reload_round_trips(self, approvals10, tmp_path):
        out = tmp_path / "again.csv"
        approvals10.save_csv(str(out))
        again = load_table(str(out), BASE_CONFIG)
        assert again.attributes == approvals10.attributes
        assert again.rows == approvals10.rows

    def test_replaced_keeps_schema_but_swaps_rows(self, approvals10):
        rows = [list(r) for r in approvals10.rows]
        rows[0][approvals10.column("Sex")] = "Female"
        other = approvals10.replaced([tuple(r) for r in rows])
        assert other.value(0, "Sex") == "Female"
        assert other.attributes == approvals10.attributes
        # the original is untouched
        assert approvals10.value(0, "Sex") == "Male"


# ---------------------------------------------------------------------------
# bitmap index vs. first-principles counting


def _records(table: DecisionTable) -> list[dict]:
    return [dict(zip(table.attributes, row)) for row in table.rows]


@st.composite
def small_tables(draw):
    n_attr = draw(st.integers(1, 3))
    attrs = [f"A{i}" for i in range(n_attr)] + ["K"]
    rows = []
    n = draw(st.integers(2, 9))
    for r in range(n):
        row = [draw(st.sampled_from(["x", "y", "z"])) for _ in range(n_attr)]
        # pin both class values so the binary invariant always holds
        row.append("Yes" if r == 0 else "No" if r == 1
                   else draw(st.sampled_from(["Yes", "No"])))
        rows.append(row)
    return DecisionTable(attrs, rows, "K")


@given(small_tables(), st.data())
def test_index_support_and_conf_match_linear_scan(table, data):
    index = ItemIndex(table)
    recs = _records(table)
    universe = sorted(index.masks)
    size = data.draw(st.integers(0, min(3, len(universe))))
    picked = data.draw(st.permutations(universe))[:size]
    try:
        itemset = make_itemset(picked)
    except ConfigError:
        return  # drew two values of one attribute; not a valid itemset
    pairs = [(i.attribute, i.value) for i in itemset]
    assert index.support(itemset) == oracles.support(recs, pairs)
    conclusion = data.draw(st.sampled_from(table.class_items()))
    got = index.conf(itemset, conclusion)
    want = oracles.confidence(recs, pairs, [(conclusion.attribute, conclusion.value)])
    assert got == want


def test_index_set_value_moves_one_bit(approvals10):
    index = ItemIndex(approvals10)
    male, female = Item("Sex", "Male"), Item("Sex", "Female")
    before = index.support(frozenset({male}))
    index.set_value(0, male, female)
    assert index.support(frozenset({male})) == before - 1
    assert index.mask(frozenset({female})) & 1


def test_negation_counts_on_reference_table(approvals10):
    index = ItemIndex(approvals10)
    sel = negate(parse_itemset(["Sex=Female"]))
    assert sel.mask(index).bit_count() == 6
    assert negate(parse_itemset(["Race=Black"])).mask(index).bit_count() == 7
    everything = negate(frozenset())
    assert everything.mask(index).bit_count() == len(approvals10)
    matched = [i for i in range(len(approvals10)) if sel.matches(approvals10, i)]
    assert len(matched) == 6


@given(small_tables())
def test_row_sum_identity_for_single_attribute_protected_part(table):
    """supp(B) = supp(A,B) + supp(¬A,B) whenever A covers one attribute."""
    index = ItemIndex(table)
    a = Item("A0", "x")
    b = frozenset({table.class_items()[0]})
    supp_b = index.support(b)
    supp_ab = index.support(b | {a})
    # ¬A here is the union of the other values of A0
    others = sum(index.support(b | {Item("A0", v)}) for v in ("y", "z"))
    assert supp_b == supp_ab + others
    assert negate(frozenset({a})).mask(index).bit_count() == index.n - index.support(frozenset({a}))


# ---------------------------------------------------------------------------
# hierarchies


class TestHierarchy:
    def test_chain_generalizes_and_reports_height(self, approvals10_hier):
        race = approvals10_hier["Race"]
        assert race.height == 2
        assert race.generalize_value("Black", 1) == "Colored"
        assert race.generalize_value("Black", 2) == "Any-race"
        assert race.generalize_value("Black", 0) == "Black"
        assert race.values_at(1) == ("Colored", "White")

    def test_level_zero_must_be_the_leaf_list(self):
        with pytest.raises(ConfigError, match="leaf value list"):
            GeneralizationHierarchy("Sex", [{"Male": "Any"}])

    def test_duplicate_leaves_rejected(self):
        with pytest.raises(ConfigError, match="duplicate leaf"):
            GeneralizationHierarchy("Sex", [["Male", "Male"], {"Male": "Any"}])

    def test_partial_level_map_rejected(self):
        with pytest.raises(ConfigError, match="misses"):
            GeneralizationHierarchy("Sex", [["Male", "Female"], {"Male": "Any"}])

    def test_top_level_must_be_singleton(self):
        with pytest.raises(ConfigError, match="top level"):
            GeneralizationHierarchy(
                "Sex", [["Male", "Female"], {"Male": "M", "Female": "F"}])

    def test_out_of_range_level_and_unknown_value(self, approvals10_hier):
        sex = approvals10_hier["Sex"]
        with pytest.raises(ConfigError, match="outside"):
            sex.generalize_value("Male", 5)
        with pytest.raises(ConfigError, match="not covered"):
            sex.generalize_value("Other", 1)

    def test_loader_rejects_duplicate_attributes(self, tmp_path):
        import json

        data = json.loads((DATA / "approvals10_hier.json").read_text())
        data["hierarchies"].append(data["hierarchies"][0])
        p = tmp_path / "h.json"
        p.write_text(json.dumps(data))
        with pytest.raises(ConfigError, match="duplicate hierarchy"):
            load_hierarchies(str(p))


# ---------------------------------------------------------------------------
# protection config


def test_support_threshold_forms():
    assert SupportThreshold.parse("5%").count(140) == 7
    assert SupportThreshold.parse(0.25).count(10) == 3   # ceil(2.5)
    assert SupportThreshold.parse(50).count(10) == 50    # absolute wins as-is
    assert SupportThreshold.parse("0.001").count(100) == 1  # floor of 1
    for bad in ("150%", 0, -3, 1.5, "junk"):
        with pytest.raises(ConfigError):
            SupportThreshold.parse(bad)


def test_config_rejects_unknown_keys():
    with pytest.raises(ConfigError, match="unknown config keys"):
        make_config(alpa="1.2")


def test_config_requires_matching_negative_class():
    with pytest.raises(ConfigError, match="does not belong"):
        load_config({"class_attribute": "Outcome", "negative_class": "Credit=No"})


@pytest.mark.parametrize(
    "measure,alpha",
    [("elift", "0.8"), ("slift_d", 0), ("elift_c", "1.2"), ("slift_c", 0)],
)
def test_alpha_range_is_measure_specific(measure, alpha):
    with pytest.raises(ConfigError, match="alpha"):
        make_config(measure=measure, alpha=alpha)


def test_alpha_equal_one_is_allowed_with_a_warning():
    config = make_config(measure="slift", alpha=1)
    assert config.alpha == 1
    assert any("alpha=1" in w for w in config.warnings)


def test_integer_thresholds_reject_bools_and_nonpositives():
    for overrides in ({"k": True}, {"k": 0}, {"sigma": True}, {"sigma": 0},
                      {"tau": 0}, {"tau": 2.5}):
        with pytest.raises(ConfigError):
            make_config(**overrides)


def test_protected_itemsets_must_avoid_the_class_attribute():
    with pytest.raises(ConfigError, match="class attribute"):
        make_config(protected_itemsets=[["Credit_approved=No"]])


def test_legally_grounded_cannot_draw_from_protected_attributes():
    with pytest.raises(ConfigError, match="protected attributes"):
        make_config(legally_grounded_itemsets=[["Sex=Male"]])


def test_pd_attributes_default_from_protected_groups():
    config = make_config(protected_itemsets=[["Sex=Female", "Age=Old"], ["Race=Black"]])
    assert config.pd_attributes == ("Age", "Race", "Sex")
    assert config.protected_pool == parse_itemset(["Sex=Female", "Age=Old", "Race=Black"])


def test_protected_part_prefers_the_largest_group_intersection():
    config = make_config(protected_itemsets=[["Sex=Female", "Age=Old"], ["Age=Old"]])
    premise = parse_itemset(["Sex=Female", "Age=Old", "City=Turin"])
    assert config.protected_part(premise) == parse_itemset(["Sex=Female", "Age=Old"])
    # singleton overlap falls back to the smaller member
    assert config.protected_part(parse_itemset(["Age=Old"])) == parse_itemset(["Age=Old"])


def test_positive_class_is_the_other_domain_value(approvals10):
    config = make_config()
    assert config.positive_class(approvals10) == Item("Credit_approved", "Yes")


def test_fraction_parsing_is_exact():
    config = make_config(measure="elift", alpha="1.2", d="0.9")
    assert config.alpha == Fraction(6, 5)
    assert config.d == Fraction(9, 10)
