from __future__ import annotations

from pathlib import Path

import pytest

from fairmine import PatternSet, load_config, load_hierarchies, load_table
from fairmine.model import parse_itemset

DATA = Path(__file__).parent / "data"

BASE_CONFIG = {
    "class_attribute": "Credit_approved",
    "negative_class": "Credit_approved=No",
    "protected_itemsets": [["Sex=Female"]],
}


def make_config(**overrides):
    raw = dict(BASE_CONFIG)
    raw.update(overrides)
    return load_config(raw)


def make_pset(mapping, sigma: int = 1) -> PatternSet:
    return PatternSet({parse_itemset(texts): supp for texts, supp in mapping.items()},
                      sigma=sigma)


@pytest.fixture(scope="session")
def approvals10():
    return load_table(str(DATA / "approvals10.csv"), BASE_CONFIG)


@pytest.fixture(scope="session")
def approvals10_hier():
    return load_hierarchies(str(DATA / "approvals10_hier.json"))


@pytest.fixture(scope="session")
def approvals10_hier_full():
    return load_hierarchies(str(DATA / "approvals10_hier_full.json"))


@pytest.fixture(scope="session")
def credit7():
    return load_table(str(DATA / "credit7.csv"), BASE_CONFIG)


# ---------------------------------------------------------------------------
# published pattern-set case studies (veterinarian clientele, credit denial)


def vet_biased_pset() -> PatternSet:
    """Frequent patterns where the female group's denial rate stands out.

    slift = (32/45)/(16/58) ≈ 2.58; the {Female, Veterinarian} support sits
    3 below its salary extension, so k=8 privacy padding bumps it to 53,
    lowering slift to (32/53)/(16/58) ≈ 2.19 — still discriminatory.
    """
    return make_pset({
        ("Sex=Female", "Job=Veterinarian"): 45,
        ("Sex=Female", "Job=Veterinarian", "Salary=>15000"): 42,
        ("Sex=Female", "Job=Veterinarian", "Credit_approved=No"): 32,
        ("Sex=Male", "Job=Veterinarian", "Credit_approved=No"): 16,
        ("Sex=Male", "Job=Veterinarian"): 58,
    })


def vet_masked_pset() -> PatternSet:
    """Protective before privacy padding, discriminatory after.

    slift = (23/45)/(26/58) ≈ 1.14 < 1.25; padding the male group (+8 for
    its salary extension channel) shrinks its denial rate to 26/66, pushing
    the female slift to ≈ 1.30.
    """
    return make_pset({
        ("Sex=Male", "Job=Veterinarian"): 58,
        ("Sex=Male", "Job=Veterinarian", "Salary=>15000"): 56,
        ("Sex=Female", "Job=Veterinarian", "Credit_approved=No"): 23,
        ("Sex=Male", "Job=Veterinarian", "Credit_approved=No"): 26,
        ("Sex=Female", "Job=Veterinarian"): 45,
    })


def vet_explainable_pset() -> PatternSet:
    """Female denial covered by a delayed-payment history rule.

    The female rule's slift is (20/34)/(19/47) = 470/323 ≈ 1.455.  The
    legally grounded companion {Paid-delay, Veterinarian} → No holds with
    confidence 37/64 ≈ 0.578 ≥ 0.9 · (20/34), and 31 of the 34 female
    veterinarians carry the delayed-payment history (31/34 ≥ 0.9), so the
    rule is 0.9-explainable.
    """
    return make_pset({
        ("Sex=Female", "Job=Veterinarian"): 34,
        ("Credit_history=Paid-delay", "Job=Veterinarian", "Salary=>15000"): 59,
        ("Sex=Female", "Job=Veterinarian", "Credit_approved=No"): 20,
        ("Credit_history=Paid-delay", "Job=Veterinarian", "Credit_approved=No"): 37,
        ("Credit_history=Paid-delay", "Job=Veterinarian"): 64,
        ("Sex=Female", "Job=Veterinarian", "Credit_history=Paid-delay"): 31,
        ("Sex=Male", "Job=Veterinarian"): 47,
        ("Sex=Male", "Job=Veterinarian", "Credit_approved=No"): 19,
    })


def vet_unexplainable_pset() -> PatternSet:
    """Same shape, but the delayed-payment rule falls short of the d bound:
    23/27 ≈ 0.852 < 0.9 · (29/30) = 0.87."""
    return make_pset({
        ("Sex=Female", "Job=Veterinarian"): 30,
        ("Sex=Female", "Job=Veterinarian", "Salary=>15000"): 29,
        ("Sex=Female", "Job=Veterinarian", "Credit_approved=No"): 29,
        ("Credit_history=Paid-delay", "Job=Veterinarian", "Credit_approved=No"): 23,
        ("Credit_history=Paid-delay", "Job=Veterinarian"): 27,
        ("Sex=Female", "Job=Veterinarian", "Credit_history=Paid-delay"): 30,
        ("Sex=Male", "Job=Veterinarian"): 40,
        ("Sex=Male", "Job=Veterinarian", "Credit_approved=No"): 10,
    })


def vet_channel_pset() -> PatternSet:
    """41 approved veterinarians, 40 of them earning above 15000: anyone who
    knows a vet client below that salary learns their outcome (gap 1)."""
    return make_pset({
        ("Job=Veterinarian", "Credit_approved=Yes"): 41,
        ("Job=Veterinarian", "Salary=>15000", "Credit_approved=Yes"): 40,
    })


def tiny_delta_pset() -> PatternSet:
    """Four-pattern set where the female denial slift is (3/4)/(1/6) = 4.5;
    the minimal padding on {Sex=Female} that brings it under 1.25 is 11."""
    return make_pset({
        ("Sex=Female", "Credit_approved=No"): 3,
        ("Sex=Female",): 4,
        ("Sex=Male",): 6,
        ("Sex=Male", "Credit_approved=No"): 1,
    })


SLIFT_PATTERN_CONFIG = dict(
    measure="slift", alpha=1.25, k=8, sigma=15, min_conf=0.1,
)
