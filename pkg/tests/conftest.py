"""Shared fixtures: hand-countable tables and simulator configs.

The factorized table is built so that, within every (group, allowable,
non-allowable, pre-criterion) cell, the two later eligibility variables are
exactly independent with margins depending only on (n, a).  That makes the
identification algebra exact on the empirical measure, which is what the
1e-10 oracle-equivalence tests require.
"""

import numpy as np
import pandas as pd
import pytest

from disparitytrial import (
    Criterion,
    EligibilityPartition,
    ObservationTable,
    StandardPopulation,
    TableSchema,
    TrialSpec,
)

# margins for the intervened (wd) and post (wp) eligibility variables, by (n, a)
P_DAGGER = {(0, 0): 0.5, (0, 1): 0.75, (1, 0): 0.75, (1, 1): 0.5}
P_PRIME = {(0, 0): 0.75, (0, 1): 0.5, (1, 0): 0.5, (1, 1): 0.75}

# records per (r, a, n) cell with the pre-criterion satisfied / failed;
# deliberately unbalanced so no two standardized means coincide
COUNT_PRE = {
    (1, 0, 0): 64, (1, 0, 1): 32, (1, 1, 0): 16, (1, 1, 1): 48,
    (0, 0, 0): 32, (0, 0, 1): 48, (0, 1, 0): 64, (0, 1, 1): 16,
}
COUNT_NOPRE = {
    (1, 0, 0): 16, (1, 0, 1): 12, (1, 1, 0): 8, (1, 1, 1): 16,
    (0, 0, 0): 8, (0, 0, 1): 16, (0, 1, 0): 12, (0, 1, 1): 8,
}

# outcome probability by (r, n, a); realized as the nearest feasible count
MU = {
    (1, 0, 0): 0.60, (1, 0, 1): 0.50, (1, 1, 0): 0.75, (1, 1, 1): 0.65,
    (0, 0, 0): 0.35, (0, 0, 1): 0.25, (0, 1, 0): 0.50, (0, 1, 1): 0.40,
}


def _block(r, a, n, wdd, wd, wp, count, start):
    successes = int(round(count * MU[(r, n, a)]))
    successes = min(max(successes, 1), count - 1) if count > 1 else successes
    rows = []
    for i in range(count):
        rows.append(
            {
                "person_id": f"p{start + i:05d}",
                "visit_id": "v1",
                "cluster_id": f"c{(start + i) % 4}",
                "time_unit": 1,
                "R": r,
                "Y": 1.0 if i < successes else 0.0,
                "a": a,
                "n": n,
                "wdd": wdd,
                "wd": wd,
                "wp": wp,
                "one": 1,
            }
        )
    return rows


def build_factorized_table() -> ObservationTable:
    rows = []
    start = 0
    for (r, a, n), count in sorted(COUNT_PRE.items()):
        pd_ = P_DAGGER[(n, a)]
        pp = P_PRIME[(n, a)]
        for wd in (1, 0):
            for wp in (1, 0):
                sub = round(count * (pd_ if wd else 1 - pd_) * (pp if wp else 1 - pp))
                rows.extend(_block(r, a, n, 1, wd, wp, int(sub), start))
                start += int(sub)
    for (r, a, n), count in sorted(COUNT_NOPRE.items()):
        rows.extend(_block(r, a, n, 0, 0, 0, count, start))
        start += count
    frame = pd.DataFrame(rows)
    schema = TableSchema(
        covariates={"a": "binary", "n": "binary", "wdd": "binary",
                    "wd": "binary", "wp": "binary", "one": "binary"},
        outcome="binary",
    )
    return ObservationTable(frame, schema)


def make_spec(proposition, standard="privileged", estimator="both", trivial_prime=False):
    """TrialSpec over the factorized table's columns for any proposition."""
    wdd = (Criterion("wdd", (1,)),)
    wd = (Criterion("wd", (1,)),)
    wp = (Criterion("wp", (1,)),)
    if proposition == "I":
        partition = EligibilityPartition(w_ddagger=wdd + wd + wp)
    elif proposition == "II":
        partition = EligibilityPartition(w_ddagger=wdd, w_dagger=wd)
    else:
        prime = (Criterion("one", (1,)),) if trivial_prime else wp
        partition = EligibilityPartition(
            w_ddagger=wdd,
            w_dagger=wd,
            w_prime=prime,
            prime_affected_by_dagger=(proposition == "IV"),
        )
        if trivial_prime:
            # a trivially satisfied post-criterion keeps the eligible set equal
            # to proposition II's
            pass
    return TrialSpec(
        partition=partition,
        allowables=("a",),
        non_allowables=("n",),
        standard_population=StandardPopulation(standard),
        proposition=proposition,
        estimator=estimator,
    )


def build_twelve_record_table() -> ObservationTable:
    """The hand-countable Proposition I example: tau(marginalized) = 2/3."""
    rows = []
    data = [
        # (R, a, Y) -- marginalized: means 0.5 at a=0 (2 records), 1.0 at a=1
        (1, 0, 0), (1, 0, 1), (1, 1, 1),
        # privileged: 5 records at a=0 (mean 0.6), 4 at a=1 (mean 0.75)
        (0, 0, 0), (0, 0, 0), (0, 0, 1), (0, 0, 1), (0, 0, 1),
        (0, 1, 1), (0, 1, 1), (0, 1, 1), (0, 1, 0),
    ]
    for i, (r, a, y) in enumerate(data):
        rows.append(
            {
                "person_id": f"q{i:03d}",
                "visit_id": "v1",
                "cluster_id": f"c{i % 3}",
                "time_unit": 1,
                "R": r,
                "Y": float(y),
                "a": a,
                "w": 1,
            }
        )
    frame = pd.DataFrame(rows)
    schema = TableSchema(covariates={"a": "binary", "w": "binary"}, outcome="binary")
    return ObservationTable(frame, schema)


def twelve_record_spec(standard="marginalized", estimator="both"):
    return TrialSpec(
        partition=EligibilityPartition(w_ddagger=(Criterion("w", (1,)),)),
        allowables=("a",),
        standard_population=StandardPopulation(standard),
        proposition="I",
        estimator=estimator,
    )


@pytest.fixture(scope="session")
def factorized_table():
    return build_factorized_table()


@pytest.fixture(scope="session")
def twelve_table():
    return build_twelve_record_table()


# --- simulator configs -------------------------------------------------------


def fig2b_config(n=100_000, seed=11, l_to_wd=1.2, l_to_y=1.4, wd_to_y=0.5,
                 r_effects=True, clusters=None):
    """Figure-2B style graph: H -> (X, L, R); (X, L, R) -> W_ddagger, W_dagger, Y."""
    from disparitytrial import ClusterSpec, DagConfig, NodeSpec

    r_coef = 1.0 if r_effects else 0.0
    nodes = (
        NodeSpec("H", (), "logistic", {"intercept": 0.0}),
        NodeSpec("X", ("H",), "logistic", {"intercept": -0.3, "H": 0.9}),
        NodeSpec("L", ("H",), "logistic", {"intercept": -0.2, "H": 0.8}),
        NodeSpec("R", ("H",), "logistic", {"intercept": -0.4, "H": 0.7 if r_effects else 0.0}),
        NodeSpec("W_ddagger", ("X", "L", "R"), "logistic",
                 {"intercept": 0.4, "X": 0.5, "L": 0.6, "R": 0.4 * r_coef}),
        NodeSpec("W_dagger", ("X", "L", "R", "W_ddagger"), "logistic",
                 {"intercept": -0.4, "X": 0.6, "L": l_to_wd, "R": -0.5 * r_coef,
                  "W_ddagger": 0.3}),
        NodeSpec("Y", ("X", "L", "R", "W_dagger"), "logistic",
                 {"intercept": -0.8, "X": -0.4, "L": l_to_y, "R": 0.7 * r_coef,
                  "W_dagger": wd_to_y}),
    )
    cluster = ClusterSpec(**clusters) if clusters else None
    return DagConfig(nodes=nodes, n=n, seed=seed, cluster=cluster)


def fig2c_config(n=100_000, seed=13, wd_to_wp=0.0, l_to_wd=1.0, l_to_y=1.2):
    """Figure-2C style graph adding W_prime; wd_to_wp toggles the IV-vs-III edge."""
    from disparitytrial import DagConfig, NodeSpec

    wp_parents = ("X", "L", "R", "W_ddagger") + (("W_dagger",) if wd_to_wp else ())
    wp_coefs = {"intercept": -0.1, "X": 0.4, "L": 0.7, "R": -0.3, "W_ddagger": 0.3}
    if wd_to_wp:
        wp_coefs["W_dagger"] = wd_to_wp
    nodes = (
        NodeSpec("H", (), "logistic", {"intercept": 0.0}),
        NodeSpec("X", ("H",), "logistic", {"intercept": -0.3, "H": 0.9}),
        NodeSpec("L", ("H",), "logistic", {"intercept": -0.2, "H": 0.8}),
        NodeSpec("R", ("H",), "logistic", {"intercept": -0.4, "H": 0.7}),
        NodeSpec("W_ddagger", ("X", "L", "R"), "logistic",
                 {"intercept": 0.4, "X": 0.5, "L": 0.6, "R": 0.4}),
        NodeSpec("W_dagger", ("X", "L", "R", "W_ddagger"), "logistic",
                 {"intercept": -0.3, "X": 0.6, "L": l_to_wd, "R": -0.5, "W_ddagger": 0.3}),
        NodeSpec("W_prime", wp_parents, "logistic", wp_coefs),
        NodeSpec("Y", ("X", "L", "R", "W_dagger", "W_prime"), "logistic",
                 {"intercept": -0.8, "X": -0.4, "L": l_to_y, "R": 0.7,
                  "W_dagger": 0.4, "W_prime": 0.3}),
    )
    return DagConfig(nodes=nodes, n=n, seed=seed)


def sim_spec(proposition, standard="all_eligible", estimator="both"):
    """TrialSpec matched to the simulator's column names."""
    wdd = (Criterion("W_ddagger", (1,)),)
    wd = (Criterion("W_dagger", (1,)),)
    wp = (Criterion("W_prime", (1,)),)
    if proposition == "I":
        partition = EligibilityPartition(w_ddagger=wdd + wd)
    elif proposition == "II":
        partition = EligibilityPartition(w_ddagger=wdd, w_dagger=wd)
    else:
        partition = EligibilityPartition(
            w_ddagger=wdd, w_dagger=wd, w_prime=wp,
            prime_affected_by_dagger=(proposition == "IV"),
        )
    return TrialSpec(
        partition=partition,
        allowables=("X",),
        non_allowables=("L",),
        standard_population=StandardPopulation(standard),
        proposition=proposition,
        estimator=estimator,
    )
