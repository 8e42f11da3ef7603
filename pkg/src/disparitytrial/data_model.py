"""Tabular data model: long-format person-time records plus the trial declaration.

A table holds one row per (person, visit).  Base columns are fixed
(person_id, visit_id, cluster_id, time_unit, R, Y); everything else is a
named covariate declared in the schema as binary, categorical, or
continuous.  Missing values are rejected at load: the estimators assume
complete covariates and imputation would add untestable machinery.

Group coding is fixed to R in {0, 1} with 1 = marginalized and 0 = the
privileged referent; multi-group comparisons are run as repeated pairwise
analyses against the referent.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import (
    BadValue,
    DuplicateKey,
    MissingColumn,
    MissingValue,
    SpecMismatch,
)

BASE_COLUMNS = ("person_id", "visit_id", "cluster_id", "time_unit", "R", "Y")
ID_COLUMNS = ("person_id", "visit_id", "cluster_id")
FLAG_COLUMNS = ("q_ddagger", "q_dagger", "q_prime", "q", "T")
COVARIATE_KINDS = ("binary", "categorical", "continuous")


@dataclass(frozen=True)
class TableSchema:
    """Column declaration: covariate name -> kind, plus the outcome kind."""

    covariates: dict
    outcome: str = "binary"  # "binary" or "continuous"

    def __post_init__(self):
        for name, kind in self.covariates.items():
            if kind not in COVARIATE_KINDS:
                raise SpecMismatch(f"unknown covariate kind {kind!r} for {name!r}")
        if self.outcome not in ("binary", "continuous"):
            raise SpecMismatch(f"outcome kind must be binary or continuous, got {self.outcome!r}")

    def discrete_covariates(self):
        return [n for n, k in self.covariates.items() if k in ("binary", "categorical")]


class ObservationTable:
    """Immutable-by-convention wrapper around the long-format records.

    The underlying frame is never mutated in place; annotation steps return
    new tables.  Row order is deterministic given input order, so ingestion
    is stable and the table is safe to share read-only across workers.
    """

    def __init__(self, frame: pd.DataFrame, schema: TableSchema, check: bool = True):
        self.frame = frame
        self.schema = schema
        if check:
            self._check_invariants()

    # -- construction / validation -------------------------------------

    def _check_invariants(self):
        for col in BASE_COLUMNS:
            if col not in self.frame.columns:
                raise MissingColumn(f"base column {col!r} is missing")
        for col in self.schema.covariates:
            if col not in self.frame.columns:
                raise MissingColumn(f"declared covariate {col!r} is missing")
        dup = self.frame.duplicated(subset=["person_id", "visit_id"])
        if dup.any():
            first = self.frame.loc[dup, ["person_id", "visit_id"]].iloc[0]
            raise DuplicateKey(
                f"(person_id, visit_id) = ({first['person_id']!r}, {first['visit_id']!r}) "
                "appears more than once"
            )
        r = self.frame["R"].to_numpy()
        if not np.isin(r, (0, 1)).all():
            raise BadValue("group column R must be coded 0/1 (1 = marginalized)")
        if self.schema.outcome == "binary":
            y = self.frame["Y"].to_numpy()
            if not np.isin(y, (0, 1)).all():
                raise BadValue("outcome declared binary but values outside {0, 1} found")
        for name, kind in self.schema.covariates.items():
            if kind == "binary":
                v = self.frame[name].to_numpy()
                if not np.isin(v, (0, 1)).all():
                    raise BadValue(f"covariate {name!r} declared binary but values outside {{0, 1}} found")

    # -- accessors ------------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.frame)

    def column(self, name: str) -> np.ndarray:
        if name not in self.frame.columns:
            raise MissingColumn(f"no column named {name!r}")
        return self.frame[name].to_numpy()

    def has_column(self, name: str) -> bool:
        return name in self.frame.columns

    # -- derivation (annotation steps return new tables) -----------------

    def with_columns(self, new_columns: dict) -> "ObservationTable":
        frame = self.frame.copy()
        for name, values in new_columns.items():
            frame[name] = values
        return ObservationTable(frame, self.schema, check=False)

    def take(self, indices) -> "ObservationTable":
        frame = self.frame.iloc[np.asarray(indices)].reset_index(drop=True)
        return ObservationTable(frame, self.schema, check=False)

    def where(self, mask) -> "ObservationTable":
        return self.take(np.flatnonzero(np.asarray(mask)))

    # -- io ---------------------------------------------------------------

    def to_csv(self, path):
        self.frame.to_csv(path, index=False)


# --- eligibility partition and trial specification ---------------------------


@dataclass(frozen=True)
class Criterion:
    """One eligibility criterion: variable W_j with its admissible value set."""

    variable: str
    admissible: tuple

    def satisfied(self, values: np.ndarray) -> np.ndarray:
        return np.isin(values, np.asarray(self.admissible)).astype(np.int8)


@dataclass(frozen=True)
class EligibilityPartition:
    """Eligibility variables split by temporal order: before / at / after intervention."""

    w_ddagger: tuple = ()
    w_dagger: tuple = ()
    w_prime: tuple = ()
    prime_affected_by_dagger: bool = False

    def __post_init__(self):
        names = [c.variable for c in self.w_ddagger + self.w_dagger + self.w_prime]
        if len(names) != len(set(names)):
            raise SpecMismatch("partition components must reference disjoint variables")

    def variables(self):
        return [c.variable for c in self.w_ddagger + self.w_dagger + self.w_prime]


@dataclass(frozen=True)
class StandardPopulation:
    """Selector for the eligible subgroup whose allowable distribution is the standard.

    kind is one of "marginalized", "privileged", "all_eligible", or
    "predicate" (membership by a variable's value set).
    """

    kind: str
    variable: str = None
    values: tuple = None

    def __post_init__(self):
        if self.kind not in ("marginalized", "privileged", "all_eligible", "predicate"):
            raise SpecMismatch(f"unknown standard-population kind {self.kind!r}")
        if self.kind == "predicate" and (self.variable is None or self.values is None):
            raise SpecMismatch("predicate standard needs a variable and a value set")


PROPOSITIONS = ("I", "II", "III", "IV")


@dataclass(frozen=True)
class TrialSpec:
    """Full target-trial declaration.

    The proposition must match the partition shape: II needs intervened
    variables and no post-intervention ones; III/IV need post-intervention
    variables, distinguished by whether they respond to the intervened set.
    Only the difference scale is supported.
    """

    partition: EligibilityPartition
    allowables: tuple = ()
    non_allowables: tuple = ()
    standard_population: StandardPopulation = field(
        default_factory=lambda: StandardPopulation("all_eligible")
    )
    proposition: str = "I"
    estimator: str = "both"  # "weighting" | "ice" | "both"
    scale: str = "difference"

    def __post_init__(self):
        if self.proposition not in PROPOSITIONS:
            raise SpecMismatch(f"proposition must be one of {PROPOSITIONS}")
        if self.estimator not in ("weighting", "ice", "both"):
            raise SpecMismatch("estimator must be weighting, ice, or both")
        if self.scale != "difference":
            raise SpecMismatch("only the difference scale is supported")
        a, n = set(self.allowables), set(self.non_allowables)
        if a & n:
            raise SpecMismatch("allowables and non-allowables overlap")
        pvars = set(self.partition.variables())
        if (a | n) & pvars:
            raise SpecMismatch("covariates may not double as eligibility variables")
        p = self.partition
        if self.proposition == "I":
            if p.w_prime:
                raise SpecMismatch("proposition I admits no post-intervention eligibility variables")
        if self.proposition == "II":
            if not p.w_dagger:
                raise SpecMismatch("proposition II requires intervened eligibility variables")
            if p.w_prime:
                raise SpecMismatch("proposition II requires an empty post-intervention set")
        if self.proposition in ("III", "IV"):
            if not p.w_dagger:
                raise SpecMismatch("propositions III/IV require intervened eligibility variables")
            if not p.w_prime:
                raise SpecMismatch("propositions III/IV require post-intervention eligibility variables")
        if self.proposition == "III" and p.prime_affected_by_dagger:
            raise SpecMismatch("proposition III assumes W-prime is not affected by the intervened set")
        if self.proposition == "IV" and not p.prime_affected_by_dagger:
            raise SpecMismatch("proposition IV assumes W-prime is affected by the intervened set")

    def required_columns(self):
        return list(self.allowables) + list(self.non_allowables) + self.partition.variables()


# --- ingestion ----------------------------------------------------------------


def load_observations(path, schema: TableSchema) -> ObservationTable:
    """Ingest a UTF-8 CSV with a header row into an ObservationTable.

    Columns: person_id, visit_id, cluster_id, time_unit (integer), R (0/1),
    Y, then covariates.  Any empty cell in a base or declared column raises
    MissingValue; non-numeric content where numerics are declared raises
    BadValue.
    """
    raw = pd.read_csv(path, dtype=str, keep_default_na=False)
    for col in BASE_COLUMNS:
        if col not in raw.columns:
            raise MissingColumn(f"column {col!r} not found in {path}")
    for col in schema.covariates:
        if col not in raw.columns:
            raise MissingColumn(f"column {col!r} not found in {path}")

    needed = list(BASE_COLUMNS) + [c for c in schema.covariates if c not in BASE_COLUMNS]
    frame = pd.DataFrame()
    for col in needed:
        values = raw[col]
        if (values.str.strip() == "").any():
            row = int(np.flatnonzero((values.str.strip() == "").to_numpy())[0])
            raise MissingValue(f"empty cell in required column {col!r} (data row {row})")
        if col in ID_COLUMNS:
            frame[col] = values.to_numpy()
        elif col == "time_unit":
            frame[col] = _as_integer(values, col)
        elif col in ("R", "Y") or schema.covariates.get(col) in ("binary", "continuous"):
            frame[col] = _as_float(values, col)
        else:  # categorical: keep the codes as given
            frame[col] = values.to_numpy()

    frame["R"] = _as_integer(frame["R"].astype(str), "R")
    return ObservationTable(frame, schema)


def save_observations(table: ObservationTable, path):
    """Write a table back to CSV; load(save(t)) round-trips to an equal table."""
    table.frame.to_csv(path, index=False)


def _as_float(values, col):
    try:
        return pd.to_numeric(values, errors="raise").astype(float).to_numpy()
    except (ValueError, TypeError) as exc:
        raise BadValue(f"non-numeric value in numeric column {col!r}") from exc


def _as_integer(values, col):
    out = _as_float(values, col)
    if np.any(out != np.round(out)):
        raise BadValue(f"column {col!r} must hold integers")
    return out.astype(int)


# --- structural / statistical validation --------------------------------------


@dataclass
class Violation:
    assumption: str  # "A3" or "A4"
    stratum: dict
    group: int
    detail: str


@dataclass
class ValidationReport:
    """Outcome of positivity/overlap screening.  Violations are reported, not thrown."""

    cell_counts: pd.DataFrame
    violations: list
    warnings: list

    @property
    def ok(self) -> bool:
        return not self.violations


def _discretized(table: ObservationTable, names):
    """Discrete view of covariates: continuous ones are cut into deciles."""
    out = {}
    warn = []
    for name in names:
        kind = table.schema.covariates.get(name, "categorical")
        values = table.column(name)
        if kind == "continuous":
            deciles = np.unique(np.quantile(values.astype(float), np.linspace(0, 1, 11)))
            codes = np.digitize(values.astype(float), deciles[1:-1])
            out[name] = codes
            warn.append(
                f"continuous covariate {name!r} screened after decile discretization; "
                "positivity beyond deciles relies on model extrapolation"
            )
        else:
            out[name] = values
    return out, warn


def validate_table(table: ObservationTable, spec: TrialSpec) -> ValidationReport:
    """Screen empirical cell counts for overlap (A4) and positivity (A3).

    A4: within each discrete stratum of the allowables, both groups must be
    present among the eligible.  A3 (propositions II-IV): within each
    (allowable, non-allowable) stratum of each group among those satisfying
    the pre-intervention criteria, at least one record must satisfy the
    intervened criteria.  Empty cells are flagged; estimators decide whether
    to proceed.
    """
    from .emulation import evaluate_eligibility  # local import to avoid a cycle

    if not all(table.has_column(c) for c in ("q", "q_ddagger", "q_dagger")):
        table = evaluate_eligibility(table, spec.partition)

    violations = []
    warning_list = []
    r = table.column("R").astype(int)
    q = table.column("q").astype(bool)

    a_values, warn = _discretized(table, spec.allowables)
    warning_list.extend(warn)

    # A4 overlap among eligibles, per allowable stratum
    rows = []
    if spec.allowables:
        strata = pd.DataFrame(a_values).loc[q]
        grouped = strata.groupby(list(spec.allowables), sort=True)
        for key, idx in grouped.groups.items():
            key = key if isinstance(key, tuple) else (key,)
            stratum = dict(zip(spec.allowables, key))
            sub_r = r[np.asarray(idx)]
            counts = {g: int(np.sum(sub_r == g)) for g in (0, 1)}
            rows.append({**stratum, "group0": counts[0], "group1": counts[1], "check": "A4"})
            for g in (0, 1):
                if counts[g] == 0:
                    violations.append(
                        Violation("A4", stratum, g, f"no eligible group-{g} records in stratum {stratum}")
                    )
    else:
        for g in (0, 1):
            count = int(np.sum(r[q] == g))
            rows.append({"group0" if g == 0 else "group1": count, "check": "A4"})
            if count == 0:
                violations.append(Violation("A4", {}, g, f"no eligible group-{g} records"))

    # A3 positivity for the intervened criteria (propositions II-IV)
    if spec.proposition != "I" and spec.partition.w_dagger:
        qdd = table.column("q_ddagger").astype(bool)
        qd = table.column("q_dagger").astype(bool)
        n_values, warn = _discretized(table, spec.non_allowables)
        warning_list.extend(warn)
        cols = {**a_values, **n_values}
        names = list(spec.allowables) + list(spec.non_allowables)
        if names:
            strata = pd.DataFrame(cols).loc[qdd]
            grouped = strata.groupby(names, sort=True)
            for key, idx in grouped.groups.items():
                key = key if isinstance(key, tuple) else (key,)
                stratum = dict(zip(names, key))
                idx = np.asarray(idx)
                for g in (0, 1):
                    cell = idx[r[idx] == g]
                    if cell.size and not qd[cell].any():
                        violations.append(
                            Violation(
                                "A3",
                                stratum,
                                g,
                                f"group-{g} stratum {stratum} satisfies the pre-intervention "
                                "criteria but never the intervened ones",
                            )
                        )
                    rows.append(
                        {**stratum, "group": g, "n_pre": int(cell.size),
                         "n_intervened": int(qd[cell].sum()), "check": "A3"}
                    )

    if table.has_column("time_unit"):
        tu = table.column("time_unit")
        if len(np.unique(tu)) > 1 and "time_unit" not in spec.allowables:
            msg = (
                "multiple time units are present but time_unit is not listed among "
                "the allowables; pooled trials are then not standardized over calendar time"
            )
            warning_list.append(msg)
            warnings.warn(msg, stacklevel=2)

    return ValidationReport(pd.DataFrame(rows), violations, warning_list)
