from __future__ import annotations

import pytest

from clarify.inventory import AnnotatedQuery, Intent, Inventory, Label

# Small hand-checkable universe used throughout the suite:
#   s0 "apply credit card"   s1 "apply loan"   s2 "apply QR code"
#   s3 "cancel credit card"
# labels: 0 "apply"->{s0,s1,s2}  1 "credit card"->{s0,s3}  2 "loan"->{s1}
#         3 "QR code"->{s2}      4 "cancel"->{s3}
S_APPLY_CC, S_APPLY_LOAN, S_APPLY_QR, S_CANCEL_CC = 0, 1, 2, 3
X_APPLY, X_CC, X_LOAN, X_QR, X_CANCEL = 0, 1, 2, 3, 4


def make_f1_inventory() -> Inventory:
    intents = [
        Intent(0, "apply credit card", "Fill in the credit card application."),
        Intent(1, "apply loan", "Submit a loan application with income proof."),
        Intent(2, "apply QR code", "Request a merchant QR code in the app."),
        Intent(3, "cancel credit card", "Call support to cancel the credit card."),
    ]
    labels = [
        Label(0, "apply", frozenset({0, 1, 2})),
        Label(1, "credit card", frozenset({0, 3})),
        Label(2, "loan", frozenset({1})),
        Label(3, "QR code", frozenset({2})),
        Label(4, "cancel", frozenset({3})),
    ]
    return Inventory(intents=intents, labels=labels)


@pytest.fixture(scope="session")
def inv_f1() -> Inventory:
    return make_f1_inventory()


@pytest.fixture
def aq_apply() -> AnnotatedQuery:
    """'how to apply' with potential intents {s0, s1, s2}."""
    return AnnotatedQuery("how to apply", frozenset({0, 1, 2}), "train")


@pytest.fixture
def aq_cancel() -> AnnotatedQuery:
    return AnnotatedQuery("cancel", frozenset({3}), "train")
