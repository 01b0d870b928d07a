"""Command-line front end.

Seven subcommands cover the pipelines: mine, measure, protect,
sanitize-patterns, anonymize, metrics, classify.  Every successful run
writes a manifest (command line, input/config/output digests, timing) that
validates against the schema shipped with the package.  Nothing here is
randomized, so reruns on the same inputs produce byte-identical outputs.

Exit codes: 0 success; 2 configuration error (including a missing
--config); 3 finished with unresolved-rule warnings; 64 usage error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import re
import sys
import time
from importlib import resources
from typing import Optional

from . import lattice, measures, metrics, mining, patternshield, ruleshield
from .model import (
    CHANCE_MEASURES,
    ConfigError,
    DecisionTable,
    ProtectionConfig,
    load_config,
    load_hierarchies,
    load_table,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNRESOLVED = 3
EXIT_USAGE = 64

_DETERMINISM_NOTE = (
    "seedless: every algorithm in this toolkit is deterministic; reruns on "
    "identical inputs produce byte-identical outputs")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


# ---------------------------------------------------------------------------
# manifest plumbing


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def manifest_schema() -> dict:
    text = resources.files(__package__).joinpath(
        "manifest_schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def validate_manifest(obj, schema=None, where="$") -> None:
    """Check an instance against the subset of JSON Schema the manifest uses
    (type/required/properties/additionalProperties/items/pattern)."""
    schema = manifest_schema() if schema is None else schema
    types = schema.get("type")
    if types is not None:
        allowed = types if isinstance(types, list) else [types]
        py = {"object": dict, "array": list, "string": str,
              "number": (int, float), "integer": int, "null": type(None)}
        if not any(isinstance(obj, py[t])
                   and not (t == "number" and isinstance(obj, bool))
                   and not (t == "integer" and isinstance(obj, bool))
                   for t in allowed):
            raise ValueError(f"{where}: expected {types}, got {type(obj).__name__}")
    if isinstance(obj, dict):
        for key in schema.get("required", ()):
            if key not in obj:
                raise ValueError(f"{where}: missing required key {key!r}")
        props = schema.get("properties", {})
        for key, value in obj.items():
            if key in props:
                validate_manifest(value, props[key], f"{where}.{key}")
            elif schema.get("additionalProperties") is False:
                raise ValueError(f"{where}: unexpected key {key!r}")
    if isinstance(obj, list) and "items" in schema:
        for i, value in enumerate(obj):
            validate_manifest(value, schema["items"], f"{where}[{i}]")
    if isinstance(obj, str) and "pattern" in schema:
        if not re.search(schema["pattern"], obj):
            raise ValueError(f"{where}: {obj!r} does not match {schema['pattern']!r}")


class _Run:
    """Collects the inputs and outputs a command touches."""

    def __init__(self, argv: list[str]):
        self.argv = list(argv)
        self.config_path: Optional[str] = None
        self.inputs: list[str] = []
        self.outputs: list[str] = []
        self.started = time.monotonic()

    def note_input(self, path: Optional[str]) -> None:
        if path and path not in self.inputs:
            self.inputs.append(path)

    def note_output(self, path: str) -> None:
        if path not in self.outputs:
            self.outputs.append(path)

    def write_manifest(self, path: str, exit_code: int) -> None:
        manifest = {
            "command": self.argv,
            "config_digest": _sha256(self.config_path) if self.config_path else None,
            "inputs": [{"path": p, "sha256": _sha256(p)} for p in self.inputs],
            "outputs": [{"path": p, "sha256": _sha256(p)} for p in self.outputs],
            "determinism": _DETERMINISM_NOTE,
            "timings": {"total_seconds": round(time.monotonic() - self.started, 6)},
            "exit_code": exit_code,
        }
        validate_manifest(manifest)
        _write_json(path, manifest)


def _write_json(path: str, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False))
        fh.write("\n")


def _print_json(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False))
    sys.stdout.write("\n")


# ---------------------------------------------------------------------------
# shared loading helpers


def _require(ns, flag: str):
    value = getattr(ns, flag.lstrip("-").replace("-", "_"))
    if value is None:
        raise _UsageError(f"the following arguments are required: {flag}")
    return value


def _load_config(ns, run: _Run) -> tuple[dict, ProtectionConfig]:
    if ns.config is None:
        raise ConfigError("missing --config")
    with open(ns.config, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    config = load_config(raw)
    run.config_path = ns.config
    for warning in config.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    return raw, config


def _load_data(ns, run: _Run, raw: dict, flag: str = "data") -> DecisionTable:
    path = _require(ns, f"--{flag}")
    table = load_table(path, raw)
    run.note_input(path)
    report = table.load_report
    if report is not None and report.rows_dropped:
        print(f"note: dropped {report.rows_dropped} record(s) with missing "
              "values", file=sys.stderr)
    return table


def _direction_note(config: ProtectionConfig) -> str:
    if config.measure in CHANCE_MEASURES:
        return (f"{config.measure} <= alpha flags a rule "
                "(chance measures fall as bias rises)")
    return f"{config.measure} >= alpha flags a rule"


# ---------------------------------------------------------------------------
# subcommands


def _cmd_mine(ns, run: _Run) -> int:
    raw, config = _load_config(ns, run)
    table = _load_data(ns, run, raw)
    out = _require(ns, "--out")
    if "pattern" in out.rsplit("/", 1)[-1]:
        pset = mining.mine_frequent(table, config.sigma)
        pset.to_jsonl(out)
        kind, count = "patterns", len(pset.patterns)
    else:
        rules = mining.mine_all_rules(
            table, config.ms.count(len(table)), config.min_conf)
        mining.write_rules(rules, out)
        kind, count = "rules", len(rules)
    run.note_output(out)
    print(f"wrote {count} {kind} to {out}", file=sys.stderr)
    return EXIT_OK


def _cmd_measure(ns, run: _Run) -> int:
    raw, config = _load_config(ns, run)
    table = _load_data(ns, run, raw)
    rules_path = _require(ns, "--rules")
    rules = mining.read_rules(rules_path)
    run.note_input(rules_path)
    index = mining.ItemIndex(table)
    audit = measures.audit_rules(rules, index, config)
    redlining = measures.find_redlining(rules, index, config)
    report = {
        "measure": config.measure,
        "alpha": None if config.alpha is None else float(config.alpha),
        "direction": _direction_note(config),
        "rules_audited": len(audit.pd_rules),
        "discriminatory": [a.to_json() for a in audit.MR],
        "protective_count": len(audit.PR),
        "redlining": [a.to_json() for a in redlining],
    }
    _print_json(report)
    return EXIT_OK


_METHODS = {
    "direct": ("drp1", "drp2", "drp-rg"),
    "indirect": ("irp1", "irp2"),
}


def _cmd_protect(ns, run: _Run) -> int:
    raw, config = _load_config(ns, run)
    table = _load_data(ns, run, raw)
    mode = _require(ns, "--mode")
    out = _require(ns, "--out")
    if mode == "both":
        if ns.method is not None:
            raise ConfigError(
                "--mode both runs the combined class-perturbation pipeline; "
                "it does not take --method")
    else:
        method = _require(ns, "--method")
        if method not in _METHODS[mode]:
            raise ConfigError(
                f"--method {method} does not apply to --mode {mode}; "
                f"choose one of {', '.join(_METHODS[mode])}")
    index = mining.ItemIndex(table)
    fr = mining.mine_all_rules(table, config.ms.count(len(table)),
                               config.min_conf, index)
    audit = measures.audit_rules(fr, index, config)
    plan = None
    if mode == "direct":
        if ns.method == "drp1":
            result = ruleshield.drp_method1(table, audit.MR, fr, config)
        elif ns.method == "drp2":
            result = ruleshield.drp_method2(table, audit.MR, fr, config)
        else:
            result, plan = ruleshield.drp_rg(table, audit.MR, fr, config)
    elif mode == "indirect":
        rr = measures.find_redlining(fr, index, config)
        result = ruleshield.irp(table, rr, fr, config,
                                method=1 if ns.method == "irp1" else 2)
    else:
        rr = measures.find_redlining(fr, index, config)
        result = ruleshield.simultaneous(table, audit.MR, rr, fr, config)
    result.table.save_csv(out)
    run.note_output(out)
    log = {
        "mode": mode,
        "method": ns.method,
        "measure": config.measure,
        "direction": _direction_note(config),
        "flagged_rules": len(audit.MR),
        **result.to_json(),
    }
    if plan is not None:
        log["plan"] = [e.to_json() for e in plan.entries]
    if ns.log:
        _write_json(ns.log, log)
        run.note_output(ns.log)
    else:
        _print_json(log)
    if result.unresolved:
        print(f"warning: {len(result.unresolved)} rule(s) unresolved",
              file=sys.stderr)
        return EXIT_UNRESOLVED
    return EXIT_OK


def _cmd_sanitize_patterns(ns, run: _Run) -> int:
    raw, config = _load_config(ns, run)
    patterns_path = _require(ns, "--patterns")
    out = _require(ns, "--out")
    mode = _require(ns, "--mode")
    pset = mining.PatternSet.from_jsonl(patterns_path, config.sigma)
    run.note_input(patterns_path)
    report = patternshield.SanitizationReport()
    if mode == "privacy":
        result = patternshield.privacy_additive_sanitize(pset, config.k, report)
    elif mode == "discrimination":
        flagged = patternshield.detect_disc_patterns(pset, config)
        result = patternshield.antidisc_sanitize(pset, flagged, config, report)
    elif mode == "unexplainable":
        flagged = patternshield.detect_unexplainable(pset, config)
        result = patternshield.unexplainable_sanitize(pset, flagged, config, report)
    else:  # both: k-anonymous plus protective, to a joint fixpoint
        result = patternshield.protect_patterns(
            pset, config.k, config,
            unexplainable=bool(config.legally_grounded), report=report)
    result.to_jsonl(out)
    run.note_output(out)
    summary = {"mode": mode, "measure": config.measure,
               "direction": _direction_note(config), **report.to_json()}
    _print_json(summary)
    if report.unresolved:
        print(f"warning: {len(report.unresolved)} pattern(s) unresolved",
              file=sys.stderr)
        return EXIT_UNRESOLVED
    return EXIT_OK


def _parse_node(text: str, qi: tuple[str, ...]) -> lattice.GenNode:
    levels = {}
    for part in text.split(","):
        name, sep, lvl = part.partition("=")
        if not sep or not lvl.strip().isdigit():
            raise ConfigError(
                f"bad generalization tuple component {part!r}; "
                "expected Attribute=level")
        levels[name.strip()] = int(lvl.strip())
    if tuple(sorted(levels)) != qi:
        raise ConfigError(
            f"the tuple must assign exactly the quasi-identifiers {list(qi)}")
    return lattice.node_from_mapping(levels)


def _cmd_anonymize(ns, run: _Run) -> int:
    raw, config = _load_config(ns, run)
    table = _load_data(ns, run, raw)
    hier_path = _require(ns, "--hierarchies")
    hier = load_hierarchies(hier_path)
    run.note_input(hier_path)
    if ns.list == (ns.apply is not None):  # exactly one of --list/--apply
        raise _UsageError("choose exactly one of --list or --apply")
    qi = tuple(sorted(a for a in hier if a != config.class_attribute))
    candidates = lattice.alpha_protective_incognito(table, hier, config, qi)
    criterion = ns.criterion or "gh"
    if ns.list:
        rows = []
        for node in candidates:
            q = lattice.quality(table, node, hier, config.class_attribute)
            rows.append({"levels": node.to_json(), "quality": q.to_json()})
        rows.sort(key=lambda r: (r["quality"][criterion],
                                 tuple(sorted(r["levels"].items()))))
        _print_json({"quasi_identifiers": list(qi), "k": config.k,
                     "criterion": criterion, "candidates": rows})
        return EXIT_OK
    if ns.apply == "best":
        node = lattice.select_minimal(candidates, table, hier, criterion,
                                      config.class_attribute)
    else:
        node = _parse_node(ns.apply, qi)
    generalized = lattice.generalize(table, node, hier)
    if ns.out:
        generalized.save_csv(ns.out)
        run.note_output(ns.out)
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(generalized.attributes)
        w.writerows(generalized.rows)
        sys.stdout.write(buf.getvalue())
    q = lattice.quality(table, node, hier, config.class_attribute)
    print(f"applied {node.to_json()} quality {q.to_json()}", file=sys.stderr)
    return EXIT_OK


def _metric_chart(report: dict, path: str) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    pairs = [(k, v) for k, v in sorted(report.items())
             if isinstance(v, (int, float)) and not isinstance(v, bool)]
    fig, ax = plt.subplots(figsize=(max(4, 1.2 * len(pairs)), 3.2))
    ax.bar([k for k, _ in pairs], [v for _, v in pairs], color="#4878a8")
    ax.set_ylabel("percent")
    ax.set_title("utility metrics")
    for tick in ax.get_xticklabels():
        tick.set_rotation(30)
        tick.set_ha("right")
    fig.tight_layout()
    fig.savefig(path, format="png", metadata={"Software": "fairmine"})
    plt.close(fig)


def _cmd_metrics(ns, run: _Run) -> int:
    raw, config = _load_config(ns, run)
    before = _require(ns, "--before")
    after = _require(ns, "--after")
    pattern_mode = before.endswith(".jsonl")
    if pattern_mode != after.endswith(".jsonl"):
        raise ConfigError("--before and --after must both be pattern files "
                          "(.jsonl) or both be data tables")
    if pattern_mode:
        fp = mining.PatternSet.from_jsonl(before, config.sigma)
        tp = mining.PatternSet.from_jsonl(after, config.sigma)
        report = metrics.pattern_utility(fp, tp, config).to_json()
    else:
        table_b = load_table(before, raw)
        table_a = load_table(after, raw)
        ms_b = config.ms.count(len(table_b))
        index_b = mining.ItemIndex(table_b)
        index_a = mining.ItemIndex(table_a)
        fr_b = mining.mine_all_rules(table_b, ms_b, config.min_conf, index_b)
        fr_a = mining.mine_all_rules(table_a, config.ms.count(len(table_a)),
                                     config.min_conf, index_a)
        audit_b = measures.audit_rules(fr_b, index_b, config)
        audit_a = measures.audit_rules(fr_a, index_a, config)
        rr_b = measures.find_redlining(fr_b, index_b, config)
        rr_a = measures.find_redlining(fr_a, index_a, config)
        report = metrics.rule_utility(fr_b, fr_a, audit_b, audit_a,
                                      rr_b, rr_a, config).to_json()
        report["rules_before"] = len(fr_b)
        report["rules_after"] = len(fr_a)
    run.note_input(before)
    run.note_input(after)
    report["measure"] = config.measure
    report["direction"] = _direction_note(config)
    _print_json(report)
    if ns.csv:
        keys = sorted(k for k in report if k != "notes")
        with open(ns.csv, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["before", "after"] + keys)
            w.writerow([before, after] + [report[k] for k in keys])
        run.note_output(ns.csv)
    if ns.plot:
        _metric_chart(report, ns.plot)
        run.note_output(ns.plot)
    return EXIT_OK


def _cmd_classify(ns, run: _Run) -> int:
    raw, config = _load_config(ns, run)
    train_path = _require(ns, "--train")
    train = mining.PatternSet.from_jsonl(train_path, config.sigma)
    run.note_input(train_path)
    test = _load_data(ns, run, raw, flag="test")
    report = metrics.cmar_classify(train, test, config)
    _print_json(report.to_json())
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser and dispatch


def build_parser() -> _Parser:
    parser = _Parser(
        prog="fairmine",
        description="discrimination- and privacy-aware data mining toolkit")
    sub = parser.add_subparsers(dest="cmd")

    def add(name, func, **flags):
        p = sub.add_parser(name, add_help=True)
        p.set_defaults(func=func)
        p.add_argument("--config")
        p.add_argument("--manifest")
        for flag, kwargs in flags.items():
            p.add_argument(f"--{flag.replace('_', '-')}", **kwargs)
        return p

    add("mine", _cmd_mine, data={}, out={})
    add("measure", _cmd_measure, rules={}, data={})
    add("protect", _cmd_protect,
        mode={"choices": ["direct", "indirect", "both"]},
        method={"choices": ["drp1", "drp2", "drp-rg", "irp1", "irp2"]},
        data={}, out={}, log={})
    add("sanitize-patterns", _cmd_sanitize_patterns,
        mode={"choices": ["privacy", "discrimination", "unexplainable", "both"]},
        patterns={}, out={})
    p = add("anonymize", _cmd_anonymize,
            data={}, hierarchies={}, apply={"metavar": "TUPLE"},
            criterion={"choices": ["gh", "dr", "cm"]}, out={})
    p.add_argument("--list", action="store_true")
    add("metrics", _cmd_metrics, before={}, after={}, csv={}, plot={})
    add("classify", _cmd_classify, train={}, test={})
    return parser


def _default_manifest_path(ns) -> str:
    out = getattr(ns, "out", None)
    if out:
        return out + ".manifest.json"
    return "fairmine-manifest.json"


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        if ns.cmd is None:
            raise _UsageError("a subcommand is required")
        run = _Run(argv)
        code = ns.func(ns, run)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    run.write_manifest(ns.manifest or _default_manifest_path(ns), code)
    return code


if __name__ == "__main__":
    sys.exit(main())
