"""Core data model shared by every pipeline.

Tables are categorical decision tables: a header of named attributes, one of
which is a binary class/decision attribute, and rows of string values.  All
counting everywhere else in the package goes through :class:`ItemIndex`, a
vertical bitmap index (one Python int per item), so supports are exact
integers and identical no matter how the work is partitioned.

Ratios (confidences, measure values, thresholds) are handled as
:class:`fractions.Fraction` throughout; floats appear only at the
serialization boundary.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Optional, Sequence, Union


class ConfigError(ValueError):
    """Invalid configuration or input data (maps to CLI exit code 2)."""


# ---------------------------------------------------------------------------
# items and itemsets


@dataclass(frozen=True, order=True)
class Item:
    """A single attribute=value pair."""

    attribute: str
    value: str

    def __str__(self) -> str:
        return f"{self.attribute}={self.value}"

    @classmethod
    def parse(cls, text: str) -> "Item":
        if "=" not in text:
            raise ConfigError(f"item {text!r} is not of the form attribute=value")
        attribute, value = text.split("=", 1)
        if not attribute or not value:
            raise ConfigError(f"item {text!r} has an empty attribute or value")
        return cls(attribute, value)


Itemset = frozenset  # frozenset[Item]; at most one item per attribute


def make_itemset(items: Iterable[Item]) -> Itemset:
    out = frozenset(items)
    seen: dict[str, Item] = {}
    for it in out:
        if it.attribute in seen:
            raise ConfigError(
                f"itemset assigns two values to {it.attribute!r}: "
                f"{seen[it.attribute].value!r} and {it.value!r}"
            )
        seen[it.attribute] = it
    return out


def parse_itemset(texts: Iterable[str]) -> Itemset:
    return make_itemset(Item.parse(t) for t in texts)


def itemset_key(itemset: Itemset) -> tuple:
    """Deterministic sort key: size, then sorted attribute=value strings."""
    return (len(itemset), tuple(sorted((i.attribute, i.value) for i in itemset)))


def render_itemset(itemset: Itemset) -> list[str]:
    return [str(i) for i in sorted(itemset)]


# ---------------------------------------------------------------------------
# schema / table


@dataclass(frozen=True)
class AttributeSchema:
    name: str
    domain: tuple[str, ...]          # observed (or declared) values, sorted
    kind: str                        # "qi" | "class"
    pd_flag: bool = False


@dataclass(frozen=True)
class LoadReport:
    path: str
    rows_read: int
    rows_dropped: int                # rows containing the missing-value token


class DecisionTable:
    """Immutable categorical table with a designated binary class attribute.

    Record ids are 1-based and stable (insertion order).  Mutation is done by
    building a new table (see `replaced`), never in place.
    """

    def __init__(
        self,
        attributes: Sequence[str],
        rows: Sequence[Sequence[str]],
        class_attribute: str,
        pd_attributes: Iterable[str] = (),
        declared_domains: Optional[Mapping[str, Sequence[str]]] = None,
        load_report: Optional[LoadReport] = None,
    ):
        if class_attribute not in attributes:
            raise ConfigError(f"class attribute {class_attribute!r} not in header {list(attributes)}")
        unknown = set(pd_attributes) - set(attributes)
        if unknown:
            raise ConfigError(f"pd_attributes not in header: {sorted(unknown)}")
        if not rows:
            raise ConfigError("no records")
        self.attributes: tuple[str, ...] = tuple(attributes)
        self.rows: tuple[tuple[str, ...], ...] = tuple(tuple(r) for r in rows)
        self.class_attribute = class_attribute
        self._col = {a: i for i, a in enumerate(self.attributes)}
        self.load_report = load_report

        for r_i, row in enumerate(self.rows):
            if len(row) != len(self.attributes):
                raise ConfigError(f"record {r_i + 1} has {len(row)} fields, header has {len(self.attributes)}")

        declared = dict(declared_domains or {})
        for a in declared:
            if a not in self._col:
                raise ConfigError(f"declared domain for unknown attribute {a!r}")
        pd_set = set(pd_attributes)
        schema = []
        for a in self.attributes:
            observed = sorted({row[self._col[a]] for row in self.rows})
            if a in declared:
                dom = tuple(declared[a])
                bad = set(observed) - set(dom)
                if bad:
                    raise ConfigError(f"attribute {a!r} has values outside its declared domain: {sorted(bad)}")
            else:
                dom = tuple(observed)
            schema.append(AttributeSchema(a, dom, "class" if a == class_attribute else "qi", a in pd_set))
        self.schema: tuple[AttributeSchema, ...] = tuple(schema)

        class_dom = self.schema[self._col[class_attribute]].domain
        if len(class_dom) != 2:
            raise ConfigError(
                f"class attribute {class_attribute!r} must be binary, found {len(class_dom)} values: {list(class_dom)}"
            )

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, attribute: str) -> int:
        try:
            return self._col[attribute]
        except KeyError:
            raise ConfigError(f"unknown attribute {attribute!r}") from None

    def value(self, record_idx: int, attribute: str) -> str:
        return self.rows[record_idx][self._col[attribute]]

    def record_items(self, record_idx: int) -> Itemset:
        row = self.rows[record_idx]
        return frozenset(Item(a, row[i]) for i, a in enumerate(self.attributes))

    def class_items(self) -> tuple[Item, Item]:
        dom = self.schema[self._col[self.class_attribute]].domain
        return (Item(self.class_attribute, dom[0]), Item(self.class_attribute, dom[1]))

    def replaced(self, rows: Sequence[Sequence[str]]) -> "DecisionTable":
        """New table with the same schema but different rows (same length)."""
        return DecisionTable(
            self.attributes,
            rows,
            self.class_attribute,
            [s.name for s in self.schema if s.pd_flag],
        )

    def save_csv(self, path: str) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.attributes)
            w.writerows(self.rows)


def load_table(csv_path: str, schema_cfg: Mapping) -> DecisionTable:
    """Load an RFC-4180 CSV with a header row.

    Rows containing the missing-value token ``?`` are dropped and counted in
    the table's load report.  The class attribute named by the config must be
    present and binary over the surviving rows.
    """
    class_attribute = schema_cfg.get("class_attribute")
    if not class_attribute:
        raise ConfigError('config is missing "class_attribute"')
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError("no records") from None
        header = [h.strip() for h in header]
        rows = []
        dropped = 0
        for row in reader:
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            row = [v.strip() for v in row]
            if "?" in row:
                dropped += 1
                continue
            rows.append(row)
    report = LoadReport(path=csv_path, rows_read=len(rows) + dropped, rows_dropped=dropped)
    return DecisionTable(
        header,
        rows,
        class_attribute,
        schema_cfg.get("pd_attributes", ()),
        schema_cfg.get("domains"),
        load_report=report,
    )


# ---------------------------------------------------------------------------
# vertical bitmap index


class ItemIndex:
    """Vertical bitmaps: one integer mask per item, bit r = record r holds it.

    The index is the only mutable counting structure in the package; the
    transformation pipelines update it in lockstep with their working rows.
    """

    def __init__(self, table: DecisionTable):
        self.n = len(table)
        self.attributes = table.attributes
        self.masks: dict[Item, int] = {}
        for r, row in enumerate(table.rows):
            bit = 1 << r
            for i, a in enumerate(table.attributes):
                it = Item(a, row[i])
                self.masks[it] = self.masks.get(it, 0) | bit

    def mask(self, itemset: Itemset) -> int:
        m = (1 << self.n) - 1
        for it in itemset:
            m &= self.masks.get(it, 0)
            if not m:
                return 0
        return m

    def support(self, itemset: Itemset) -> int:
        return self.mask(itemset).bit_count()

    def support_with(self, base_mask: int, item: Item) -> int:
        return (base_mask & self.masks.get(item, 0)).bit_count()

    def conf(self, premise: Itemset, conclusion: Item) -> Optional[Fraction]:
        n = self.support(premise)
        if n == 0:
            return None
        a = (self.mask(premise) & self.masks.get(conclusion, 0)).bit_count()
        return Fraction(a, n)

    def records(self, mask: int) -> Iterator[int]:
        while mask:
            low = mask & -mask
            yield low.bit_length() - 1
            mask ^= low

    def set_value(self, record_idx: int, item_old: Item, item_new: Item) -> None:
        bit = 1 << record_idx
        self.masks[item_old] = self.masks.get(item_old, 0) & ~bit
        self.masks[item_new] = self.masks.get(item_new, 0) | bit


@dataclass(frozen=True)
class NegatedSelector:
    """Matches records that fail to hold the full itemset.

    This is the set complement, so supp(¬A, B) = supp(B) − supp(A, B) holds
    by construction; support arithmetic relies on that identity and record
    matching is only used to pick transformation candidates.
    """

    itemset: Itemset

    def mask(self, index: ItemIndex) -> int:
        full = (1 << index.n) - 1
        if not self.itemset:
            return full  # nothing to contradict: every record qualifies
        return full & ~index.mask(self.itemset)

    def matches(self, table: DecisionTable, record_idx: int) -> bool:
        if not self.itemset:
            return True
        return any(table.value(record_idx, it.attribute) != it.value for it in self.itemset)


def negate(itemset: Itemset, schema=None) -> NegatedSelector:
    return NegatedSelector(frozenset(itemset))


# ---------------------------------------------------------------------------
# generalization hierarchies


class GeneralizationHierarchy:
    """Total child→parent maps per level; level 0 is the leaf domain.

    The JSON form is ``{"attribute": ..., "levels": [[leaves...], {child:
    parent, ...}, ...]}``; the top level must collapse to a single value.
    """

    def __init__(self, attribute: str, levels: Sequence):
        if not levels or not isinstance(levels[0], (list, tuple)):
            raise ConfigError(f"hierarchy for {attribute!r}: levels[0] must be the leaf value list")
        self.attribute = attribute
        self.leaves: tuple[str, ...] = tuple(levels[0])
        if len(set(self.leaves)) != len(self.leaves):
            raise ConfigError(f"hierarchy for {attribute!r}: duplicate leaf values")
        self.maps: tuple[Mapping[str, str], ...] = tuple(dict(m) for m in levels[1:])
        current = set(self.leaves)
        for j, m in enumerate(self.maps, start=1):
            missing = current - set(m)
            if missing:
                raise ConfigError(
                    f"hierarchy for {attribute!r}: level {j} map misses {sorted(missing)}"
                )
            current = set(m[v] for v in current)
        if len(current) != 1:
            raise ConfigError(f"hierarchy for {attribute!r}: top level has {len(current)} values, wanted 1")

    @property
    def height(self) -> int:
        return len(self.maps)

    def generalize_value(self, value: str, level: int) -> str:
        if not 0 <= level <= self.height:
            raise ConfigError(f"{self.attribute!r}: level {level} outside 0..{self.height}")
        v = value
        for j in range(level):
            try:
                v = self.maps[j][v]
            except KeyError:
                raise ConfigError(f"value {value!r} not covered by the {self.attribute!r} hierarchy") from None
        return v

    def values_at(self, level: int) -> tuple[str, ...]:
        return tuple(sorted({self.generalize_value(v, level) for v in self.leaves}))

    @classmethod
    def from_json(cls, obj: Mapping) -> "GeneralizationHierarchy":
        return cls(obj["attribute"], obj["levels"])


def load_hierarchies(path: str) -> dict[str, GeneralizationHierarchy]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if isinstance(data, Mapping):
        data = data.get("hierarchies", [])
    out = {}
    for obj in data:
        h = GeneralizationHierarchy.from_json(obj)
        if h.attribute in out:
            raise ConfigError(f"duplicate hierarchy for {h.attribute!r}")
        out[h.attribute] = h
    return out


# ---------------------------------------------------------------------------
# protection configuration

MEASURES = ("elift", "slift", "olift", "clift", "slift_d", "elift_d", "slift_c", "elift_c")
RATIO_MEASURES = ("elift", "slift", "olift", "clift")
DIFFERENCE_MEASURES = ("slift_d", "elift_d")
CHANCE_MEASURES = ("slift_c", "elift_c")

_CONFIG_KEYS = {
    "class_attribute", "negative_class", "measure", "alpha", "d", "k", "ms",
    "min_conf", "sigma", "tau", "protected_itemsets", "legally_grounded_itemsets",
    "pd_attributes", "domains",
}


def _as_fraction(value, key: str) -> Fraction:
    try:
        if isinstance(value, str):
            return Fraction(value.strip())
        if isinstance(value, bool):
            raise ValueError
        if isinstance(value, int):
            return Fraction(value)
        if isinstance(value, float):
            return Fraction(str(value))
    except (ValueError, ZeroDivisionError):
        pass
    raise ConfigError(f'config key "{key}" is not a number: {value!r}')


@dataclass(frozen=True)
class SupportThreshold:
    """ms as given: either a fraction of |D| or an absolute count."""

    fraction: Optional[Fraction] = None
    absolute: Optional[int] = None

    def count(self, n_records: int) -> int:
        if self.absolute is not None:
            return self.absolute
        return max(1, math.ceil(self.fraction * n_records))

    @classmethod
    def parse(cls, raw, key: str = "ms") -> "SupportThreshold":
        if isinstance(raw, str) and raw.strip().endswith("%"):
            frac = _as_fraction(raw.strip()[:-1], key) / 100
            if not 0 < frac <= 1:
                raise ConfigError(f'"{key}" percentage out of (0,100]: {raw!r}')
            return cls(fraction=frac)
        value = _as_fraction(raw, key)
        if value <= 0:
            raise ConfigError(f'"{key}" must be positive, got {raw!r}')
        if value < 1:
            return cls(fraction=value)
        if value.denominator != 1:
            raise ConfigError(f'"{key}" must be a fraction in (0,1) or a whole count, got {raw!r}')
        return cls(absolute=int(value))


@dataclass(frozen=True)
class ProtectionConfig:
    class_attribute: str
    negative_class: Item
    measure: str = "elift"
    alpha: Optional[Fraction] = None
    d: Fraction = Fraction(9, 10)
    k: int = 2
    ms: SupportThreshold = SupportThreshold(absolute=1)
    min_conf: Fraction = Fraction(0)
    sigma: int = 1
    tau: Optional[int] = None
    protected: tuple[Itemset, ...] = ()
    legally_grounded: tuple[Itemset, ...] = ()
    pd_attributes: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()

    @property
    def protected_pool(self) -> Itemset:
        """Union of all protected itemsets (the thesis's flat DI_b item pool)."""
        pool: set[Item] = set()
        for member in self.protected:
            pool |= member
        return frozenset(pool)

    def protected_part(self, premise: Itemset) -> Itemset:
        """A = the largest sub-itemset of the premise contained in some
        protected group; ties broken by the deterministic itemset order."""
        best: Itemset = frozenset()
        best_key = None
        for member in self.protected:
            cand = premise & member
            if not cand:
                continue
            key = (-len(cand), itemset_key(cand)[1])
            if best_key is None or key < best_key:
                best, best_key = cand, key
        return best

    def positive_class(self, table: DecisionTable) -> Item:
        c1, c2 = table.class_items()
        return c2 if c1 == self.negative_class else c1


def load_config(source: Union[str, Mapping]) -> ProtectionConfig:
    """Parse and validate the single JSON config document.

    Unknown keys are rejected (typos surface immediately), thresholds are
    converted to exact Fractions, and measure-specific alpha ranges are
    enforced: ratio measures need α ≥ 1 (the α=1 boundary is accepted — the
    strictest published settings use it — with a warning), differences need
    α > 0 and chance measures need 0 < α < 1.
    """
    if isinstance(source, str):
        try:
            with open(source, encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {source!r}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {source!r} is not valid JSON: {exc}") from None
    else:
        raw = dict(source)
    if not isinstance(raw, Mapping):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key in ("class_attribute", "negative_class"):
        if key not in raw:
            raise ConfigError(f'config is missing "{key}"')

    negative_class = Item.parse(raw["negative_class"])
    if negative_class.attribute != raw["class_attribute"]:
        raise ConfigError(
            f'"negative_class" {raw["negative_class"]!r} does not belong to '
            f'class attribute {raw["class_attribute"]!r}'
        )

    measure = raw.get("measure", "elift")
    if measure not in MEASURES:
        raise ConfigError(f'unknown measure {measure!r}; pick one of {", ".join(MEASURES)}')

    warnings: list[str] = []
    alpha = None
    if raw.get("alpha") is not None:
        alpha = _as_fraction(raw["alpha"], "alpha")
        if measure in RATIO_MEASURES:
            if alpha < 1:
                raise ConfigError(f"alpha must be ≥ 1 for ratio measure {measure}, got {raw['alpha']}")
            if alpha == 1:
                warnings.append("alpha=1 flags every ratio above parity as discriminatory")
        elif measure in DIFFERENCE_MEASURES and alpha <= 0:
            raise ConfigError(f"alpha must be > 0 for difference measure {measure}, got {raw['alpha']}")
        elif measure in CHANCE_MEASURES and not 0 < alpha < 1:
            raise ConfigError(f"alpha must be in (0,1) for chance measure {measure}, got {raw['alpha']}")

    d = _as_fraction(raw.get("d", "0.9"), "d")
    if not 0 <= d <= 1:
        raise ConfigError(f'"d" must lie in [0,1], got {raw.get("d")!r}')

    k = raw.get("k", 2)
    if not isinstance(k, int) or isinstance(k, bool) or k < 1:
        raise ConfigError(f'"k" must be a positive integer, got {k!r}')

    sigma = raw.get("sigma", 1)
    if not isinstance(sigma, int) or isinstance(sigma, bool) or sigma < 1:
        raise ConfigError(f'"sigma" must be a positive integer, got {sigma!r}')

    tau = raw.get("tau")
    if tau is not None and (not isinstance(tau, int) or isinstance(tau, bool) or tau < 1):
        raise ConfigError(f'"tau" must be a positive integer, got {tau!r}')

    min_conf = _as_fraction(raw.get("min_conf", 0), "min_conf")
    if not 0 <= min_conf <= 1:
        raise ConfigError(f'"min_conf" must lie in [0,1], got {raw.get("min_conf")!r}')

    protected = tuple(parse_itemset(member) for member in raw.get("protected_itemsets", ()))
    legally = tuple(parse_itemset(member) for member in raw.get("legally_grounded_itemsets", ()))
    pd_attributes = tuple(raw.get("pd_attributes", ()))
    pd_pool = set(pd_attributes) | {i.attribute for m in protected for i in m}
    for member in protected:
        for it in member:
            if it.attribute == raw["class_attribute"]:
                raise ConfigError(f"protected itemset {render_itemset(member)} uses the class attribute")
    for member in legally:
        overlap = {i.attribute for i in member} & pd_pool
        if overlap:
            raise ConfigError(
                f"legally grounded itemset {render_itemset(member)} draws from protected attributes {sorted(overlap)}"
            )

    return ProtectionConfig(
        class_attribute=raw["class_attribute"],
        negative_class=negative_class,
        measure=measure,
        alpha=alpha,
        d=d,
        k=k,
        ms=SupportThreshold.parse(raw.get("ms", 1)),
        min_conf=min_conf,
        sigma=sigma,
        tau=tau,
        protected=protected,
        legally_grounded=legally,
        pd_attributes=pd_attributes or tuple(sorted({i.attribute for m in protected for i in m})),
        warnings=tuple(warnings),
    )
