"""Discrimination-aware and privacy-aware data mining toolkit.

The package splits along the pipeline: `model` holds tables, itemsets,
hierarchies and configuration; `mining` extracts frequent patterns and
classification rules; `measures` scores rules and finds redlining
companions; `ruleshield` and `patternshield` repair tables and pattern
sets; `lattice` searches generalizations that are anonymous and
protective at once; `metrics` quantifies what a repair cost.
"""

from .lattice import (
    GenNode,
    alpha_protective_incognito,
    check_alpha_protection,
    generalize,
    select_minimal,
)
from .measures import (
    AuditResult,
    MeasureValue,
    audit_rules,
    d_instance,
    elb,
    find_redlining,
    is_discriminatory,
    measure,
    most_favored_clift,
)
from .metrics import (
    CmarReport,
    PatternUtilityReport,
    QualityReport,
    RuleUtilityReport,
    cmar_classify,
    pattern_utility,
    quality,
    rule_utility,
)
from .mining import (
    ClassificationRule,
    ContingencyCounts,
    MinedRule,
    PatternSet,
    mine_all_rules,
    mine_frequent,
    mine_rules,
    read_rules,
    write_rules,
)
from .model import (
    ConfigError,
    DecisionTable,
    GeneralizationHierarchy,
    Item,
    ItemIndex,
    Itemset,
    ProtectionConfig,
    SupportThreshold,
    load_config,
    load_hierarchies,
    load_table,
    make_itemset,
    parse_itemset,
)
from .patternshield import (
    InferenceChannel,
    SanitizationReport,
    antidisc_sanitize,
    channel_support,
    detect_disc_patterns,
    detect_unexplainable,
    find_channels,
    is_k_anonymous,
    privacy_additive_sanitize,
    protect_patterns,
    unexplainable_sanitize,
)
from .ruleshield import (
    TransformPlan,
    TransformResult,
    drp_method1,
    drp_method2,
    drp_rg,
    irp,
    select_approach,
    simultaneous,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
