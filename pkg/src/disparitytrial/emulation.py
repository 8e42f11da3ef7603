"""Trial emulation: eligibility flags, one-trial-per-time-unit selection, standard membership.

All operations are pure functions over immutable tables.  Trial selection is
seeded and preceded by a canonical sort on (person_id, time_unit, visit_id),
so its output is invariant under input row permutation.
"""

from __future__ import annotations

import numpy as np
import pandas as pd

from .data_model import EligibilityPartition, ObservationTable, TrialSpec
from .errors import EmptyStandard, UnknownVariable
from .rngutil import rng_for

#: column marking duplicated clusters in bootstrap resamples; when present it
#: joins the selection grouping key so cluster copies stay distinct.
COPY_COLUMN = "_resample_copy"


def evaluate_eligibility(table: ObservationTable, partition: EligibilityPartition) -> ObservationTable:
    """Annotate the table with q_ddagger, q_dagger, q_prime, and their product q.

    Each flag is the conjunction of set-membership indicators for its
    partition component; an empty component counts as satisfied.  The
    product identity q = q_ddagger * q_dagger * q_prime holds by
    construction.
    """
    flags = {}
    for name, criteria in (
        ("q_ddagger", partition.w_ddagger),
        ("q_dagger", partition.w_dagger),
        ("q_prime", partition.w_prime),
    ):
        value = np.ones(table.n, dtype=np.int8)
        for criterion in criteria:
            if not table.has_column(criterion.variable):
                raise UnknownVariable(
                    f"eligibility criterion references absent column {criterion.variable!r}"
                )
            value &= criterion.satisfied(table.column(criterion.variable))
        flags[name] = value
    flags["q"] = flags["q_ddagger"] * flags["q_dagger"] * flags["q_prime"]
    return table.with_columns(flags)


def _selection_codes(table: ObservationTable, one_per_person: bool) -> pd.DataFrame:
    key_cols = ["person_id"] if one_per_person else ["person_id", "time_unit"]
    if table.has_column(COPY_COLUMN):
        key_cols = [COPY_COLUMN] + key_cols
    return key_cols


def select_trials(
    table: ObservationTable,
    seed: int,
    one_per_person: bool = False,
) -> ObservationTable:
    """Keep exactly one record per (person, time unit), chosen uniformly at random.

    Records are first sorted by (person_id, time_unit, visit_id) so the
    draw is deterministic given the seed no matter how the input rows were
    ordered.  With one_per_person=True a single record is kept per person
    across all time units (the less efficient variant; pooling one trial
    per unit of time is the default).
    """
    key_cols = _selection_codes(table, one_per_person)
    sort_cols = key_cols + [c for c in ("time_unit", "visit_id") if c not in key_cols]
    order = table.frame.sort_values(sort_cols, kind="mergesort").index.to_numpy()
    sorted_table = table.take(order)

    codes = pd.MultiIndex.from_frame(sorted_table.frame[key_cols]).factorize()[0]
    u = rng_for(seed, "trial-selection").random(len(codes))
    # winner per group = the member with the largest random key
    rank = np.lexsort((u, codes))
    is_last = np.empty(len(codes), dtype=bool)
    is_last[:-1] = codes[rank][1:] != codes[rank][:-1]
    is_last[-1:] = True
    winners = np.sort(rank[is_last])
    return sorted_table.take(winners)


def _selector_mask(table: ObservationTable, spec: TrialSpec) -> np.ndarray:
    """Membership indicator for the standard-population selector, before the
    eligibility restriction (conditioning sets in the estimators apply it to
    partially eligible subsets as well)."""
    std = spec.standard_population
    if std.kind == "marginalized":
        return (table.column("R").astype(int) == 1).astype(np.int8)
    if std.kind == "privileged":
        return (table.column("R").astype(int) == 0).astype(np.int8)
    if std.kind == "all_eligible":
        return np.ones(table.n, dtype=np.int8)
    if not table.has_column(std.variable):
        raise UnknownVariable(f"standard-population predicate references absent column {std.variable!r}")
    return np.isin(table.column(std.variable), np.asarray(std.values)).astype(np.int8)


def assign_standard_membership(table: ObservationTable, spec: TrialSpec) -> ObservationTable:
    """Annotate the table with T = 1 for eligible records in the standard population.

    T = q * selector, so the standard population is always a subset of the
    eligible population.  Raises EmptyStandard when no record qualifies.
    """
    if not table.has_column("q"):
        table = evaluate_eligibility(table, spec.partition)
    t = table.column("q").astype(np.int8) * _selector_mask(table, spec)
    if int(t.sum()) == 0:
        raise EmptyStandard("no eligible record satisfies the standard-population selector")
    return table.with_columns({"T": t})


def annotate(table: ObservationTable, spec: TrialSpec) -> ObservationTable:
    """Eligibility flags plus standard membership in one step."""
    return assign_standard_membership(evaluate_eligibility(table, spec.partition), spec)
