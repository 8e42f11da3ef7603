"""Standardized disparity estimators for Propositions I-IV.

Two estimation routes are provided for every proposition: inverse-probability
weighting and g-computation by iterated conditional expectations (ICE).  Both
target the same standardized mean

    tau(r) = sum_a E(Y | eligible, R = r, a) P(a | eligible, standard),

with "eligible" meaning the counterfactual eligible population under the
proposition's stochastic intervention (observed eligibility for Proposition I).

Weighted means are computed in Hajek (normalized) form, and marginal
probabilities are empirical proportions rather than model predictions.
Every conditional-probability factor comes from its own logistic fit; with
``ModelConfig(mode="saturated")`` the fits are full-interaction cell models,
which makes weighting, ICE, and the brute-force identification sums in
:mod:`disparitytrial.oracle_sim` agree to numerical precision on discrete
tables.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from . import numerics
from .data_model import ObservationTable, TrialSpec
from .emulation import annotate, select_trials
from .errors import (
    EmptyGroup,
    EmptyStage,
    ModelFailure,
    PositivityViolation,
    SpecMismatch,
)
from .numerics import fit_logistic, fit_wls, predict_prob, spline_basis

PROB_FLOOR = 1e-10

#: tighter than the numerics default so saturated-model identities hold to 1e-10
FIT_TOL = 1e-12


@dataclass(frozen=True)
class ModelConfig:
    """How nuisance and outcome regressions are specified.

    mode "saturated" crosses every covariate into cells (exact stratum
    means; discrete covariates only).  mode "additive" uses main effects,
    with restricted cubic splines for continuous covariates (knots at the
    0.10/0.50/0.90 full-table quantiles unless given explicitly).
    """

    mode: str = "saturated"
    spline_knots: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in ("saturated", "additive"):
            raise SpecMismatch(f"unknown model mode {self.mode!r}")


@dataclass
class WeightVector:
    """Per-record estimation weights with audit components.

    values is aligned to the table rows; records outside the weight's
    support hold NaN.  Diagnostics are computed over the support (the
    eligible population), pooling both groups.
    """

    values: np.ndarray
    support: np.ndarray
    proposition: str
    components: dict
    mean: float
    min: float
    max: float
    models: list

    @classmethod
    def build(cls, values, support, proposition, components, models):
        on = values[support]
        return cls(
            values=values,
            support=support,
            proposition=proposition,
            components=components,
            mean=float(np.mean(on)),
            min=float(np.min(on)),
            max=float(np.max(on)),
            models=models,
        )


@dataclass
class TauEstimate:
    group: int
    value: float
    estimator: str
    models: list


@dataclass
class DisparityEstimate:
    tau_r: TauEstimate
    tau_rprime: TauEstimate
    difference: float
    ci: tuple = None
    replicates: np.ndarray = None
    seed: int = None
    weight_diagnostics: dict = None
    replicate_failures: int = 0


# ---------------------------------------------------------------------------
# nuisance-model factory
# ---------------------------------------------------------------------------


class Nuisance:
    """Fits conditional-mean models on subsets and predicts on the whole table.

    Fits are cached by (target, subset, covariates, weights) so identical
    requests (for example the numerator and denominator of a selection
    factor when there are no non-allowables) reuse one fit and cancel
    exactly.
    """

    def __init__(self, table: ObservationTable, spec: TrialSpec, config: ModelConfig):
        self.table = table
        self.spec = spec
        self.config = config
        self.n = table.n
        self.r = table.column("R").astype(int)
        self.y = table.column("Y").astype(float)
        self.q = table.column("q").astype(bool)
        self.qdd = table.column("q_ddagger").astype(bool)
        self.qd = table.column("q_dagger").astype(bool)
        self.qp = table.column("q_prime").astype(bool)
        # T = q * selector; the bare selector is needed because conditioning
        # sets on partially eligible subsets ({q_ddagger}, {q_ddagger &
        # q_prime}, ...) intersect with standard-population membership there.
        from .emulation import _selector_mask

        self.s = _selector_mask(table, spec).astype(bool)
        self._columns = {}
        self._codes = {}
        self._designs = {}
        self._fits = {}
        self.audit = []

    # -- column plumbing --------------------------------------------------

    def col(self, name):
        if name not in self._columns:
            if name == "R":
                self._columns[name] = self.r
            else:
                self._columns[name] = self.table.column(name)
        return self._columns[name]

    def target(self, name):
        return {
            "y": self.y,
            "q_dagger": self.qd.astype(float),
            "q_prime": self.qp.astype(float),
            "selector": self.s.astype(float),
            "r1": (self.r == 1).astype(float),
        }[name]

    # -- design construction ----------------------------------------------

    def _cell_codes(self, covars):
        if covars not in self._codes:
            if not covars:
                self._codes[covars] = (np.zeros(self.n, dtype=int), 1)
            else:
                frame = pd.DataFrame({c: self.col(c) for c in covars})
                codes = pd.MultiIndex.from_frame(frame).factorize(sort=True)[0]
                self._codes[covars] = (codes, int(codes.max()) + 1)
        return self._codes[covars]

    def _additive_design(self, covars):
        if covars not in self._designs:
            cols = [np.ones(self.n)]
            for c in covars:
                kind = "binary" if c == "R" else self.table.schema.covariates.get(c, "binary")
                v = self.col(c)
                if kind == "continuous":
                    knots = self.config.spline_knots.get(c, 3)
                    if isinstance(knots, int):
                        knots = numerics.default_knots(v, knots)
                    cols.append(spline_basis(v, knots))
                elif kind == "categorical":
                    levels = np.unique(v)
                    for lev in levels[1:]:
                        cols.append((v == lev).astype(float).reshape(-1, 1))
                else:
                    cols.append(np.asarray(v, dtype=float).reshape(-1, 1))
            self._designs[covars] = np.column_stack(
                [c if c.ndim == 2 else c.reshape(-1, 1) for c in cols]
            )
        return self._designs[covars]

    # -- fitting ------------------------------------------------------------

    def fit_mean(self, target, mask, covars, weights=None, family="logistic", label=""):
        """Fitted E[target | covars] on the masked subset, predicted for all rows.

        Returns an array over the full table; rows whose covariate cell was
        unseen in the fit subset hold NaN (saturated mode).
        """
        covars = tuple(covars)
        if isinstance(target, str):
            key = (target, _mask_key(mask), covars, _mask_key(weights), family)
            target_values = self.target(target)
        else:
            key = None
            target_values = np.asarray(target, dtype=float)
        if key is not None and key in self._fits:
            return self._fits[key]

        mask = np.asarray(mask, dtype=bool)
        if not mask.any():
            raise EmptyStage(f"no records available to fit {label or 'model'}")
        w = None if weights is None else np.asarray(weights, dtype=float)[mask]

        tol = max(FIT_TOL, 1e-14 * float(mask.sum()))
        sub = target_values[mask]
        if np.all(sub == sub[0]):
            # a constant target has itself as the exact fitted mean (and a
            # logistic fit could not represent a degenerate 0/1 constant)
            pred = np.full(self.n, float(sub[0]))
            if key is not None:
                self._fits[key] = pred
            return pred

        try:
            if self.config.mode == "saturated":
                pred = self._fit_saturated(target_values, mask, covars, w, family, tol)
            else:
                pred = self._fit_additive(target_values, mask, covars, w, family, tol)
        except (numerics.SeparationDetected, numerics.RankDeficient) as exc:
            raise ModelFailure(f"{label or 'nuisance fit'} failed: {exc}") from exc

        if key is not None:
            self._fits[key] = pred
        return pred

    def _fit_saturated(self, target, mask, covars, w, family, tol):
        codes, _ = self._cell_codes(covars)
        sub_codes = codes[mask]
        present = np.unique(sub_codes)
        onehot = (sub_codes[:, None] == present[None, :]).astype(float)
        ysub = target[mask]
        if family == "logistic":
            fit = fit_logistic(onehot, ysub, weights=w, tol=tol)
            by_cell = predict_prob(fit, np.eye(len(present)))
            self.audit.append({"covars": covars, "n": int(mask.sum()),
                               "cells": len(present), "converged": fit.converged,
                               "iterations": fit.iterations})
        else:
            coef = fit_wls(onehot, ysub, weights=w)
            by_cell = coef
            self.audit.append({"covars": covars, "n": int(mask.sum()),
                               "cells": len(present), "family": "linear"})
        lookup = np.full(codes.max() + 1, np.nan)
        lookup[present] = by_cell
        return lookup[codes]

    def _fit_additive(self, target, mask, covars, w, family, tol):
        X = self._additive_design(covars)
        if family == "logistic":
            fit = fit_logistic(X[mask], target[mask], weights=w, tol=tol)
            self.audit.append({"covars": covars, "n": int(mask.sum()),
                               "converged": fit.converged, "iterations": fit.iterations})
            return predict_prob(fit, X)
        coef = fit_wls(X[mask], target[mask], weights=w)
        self.audit.append({"covars": covars, "n": int(mask.sum()), "family": "linear"})
        return X @ coef

    # -- empirical marginals -------------------------------------------------

    def marginal(self, target, mask):
        mask = np.asarray(mask, dtype=bool)
        if not mask.any():
            raise EmptyStage("empty subset for an empirical marginal")
        return float(np.mean(self.target(target)[mask]))

    def own_group(self, pred_group1):
        """Per-record P(R = own group | ...) from a fitted P(R = 1 | ...)."""
        return np.where(self.r == 1, pred_group1, 1.0 - pred_group1)


def _mask_key(mask):
    if mask is None:
        return None
    return np.asarray(mask).tobytes()


def _guard(values, mask, what):
    used = values[mask]
    if np.any(~np.isfinite(used)):
        raise PositivityViolation(
            f"{what} is undefined on part of its support "
            "(a covariate cell required by the formula has no model support)"
        )
    if np.any(used < PROB_FLOOR):
        raise PositivityViolation(f"{what} fell below {PROB_FLOOR:g}")
    return values


# ---------------------------------------------------------------------------
# weighting estimators
# ---------------------------------------------------------------------------


def compute_weights(
    table: ObservationTable,
    spec: TrialSpec,
    config: ModelConfig = None,
    truncate=None,
    alternate_iii: bool = False,
) -> WeightVector:
    """Per-record weights for the proposition's weighting estimator.

    One vector covers every eligible record; the group-membership factors
    use each record's own group (the published formulas read r as the
    record's observed value).  With the marginalized group as the standard,
    every marginalized record's Proposition-I weight is exactly one.

    truncate, when given as (low, high) percentiles in (0, 1), applies
    symmetric percentile truncation over the support and is reported in the
    components; truncation changes the estimand and is never the default.
    """
    config = config or ModelConfig()
    table = _ensure_annotated(table, spec)
    nuis = Nuisance(table, spec, config)
    prop = spec.proposition

    if prop == "I":
        values, components = _weights_prop1(nuis)
    elif prop == "II":
        values, components = _weights_prop2(nuis)
    elif prop == "III":
        if alternate_iii:
            values, components = _weights_prop3_alternate(nuis)
        else:
            values, components = _weights_prop3(nuis)
    else:
        values, components = _weights_prop4(nuis)

    support = nuis.q.copy()
    if truncate is not None:
        low, high = truncate
        bounds = np.nanpercentile(values[support], [100 * low, 100 * high])
        values = np.clip(values, bounds[0], bounds[1])
        components["truncation"] = {"percentiles": (low, high), "bounds": tuple(bounds)}

    values = np.where(support, values, np.nan)
    return WeightVector.build(values, support, prop, components, nuis.audit)


def _standardization(nuis, mask, label):
    """[P(T=t' | mask, a) / P(R=own | mask, a)] x [P(R=own | mask) / P(T=t' | mask)]."""
    A = nuis.spec.allowables
    t_hat = _guard(nuis.fit_mean("selector", mask, A, label=f"{label} standard model"),
                   nuis.q, f"P(T|{label},a)")
    r1_hat = nuis.fit_mean("r1", mask, A, label=f"{label} group model")
    p_own = _guard(nuis.own_group(r1_hat), nuis.q, f"P(R|{label},a)")
    c_t = nuis.marginal("selector", mask)
    c_r1 = nuis.marginal("r1", mask)
    c_own = np.where(nuis.r == 1, c_r1, 1.0 - c_r1)
    if c_t < PROB_FLOOR:
        raise PositivityViolation("standard population has no mass on the conditioning set")
    return (t_hat / p_own) * (c_own / c_t), t_hat, p_own


def _weights_prop1(nuis):
    std, t_hat, p_own = _standardization(nuis, nuis.q, "Q=1")
    return std, {"standardization": std, "p_standard": t_hat, "p_group": p_own}


def _selection_factor(nuis):
    """P(Q_dagger=1 | Q_ddagger=1, R, a) / P(... | R, n, a) at each record's own covariates."""
    A, N = nuis.spec.allowables, nuis.spec.non_allowables
    num = nuis.fit_mean("q_dagger", nuis.qdd, ("R",) + tuple(A), label="selection numerator")
    den = nuis.fit_mean("q_dagger", nuis.qdd, ("R",) + tuple(N) + tuple(A),
                        label="selection denominator")
    _guard(num, nuis.q, "P(Qd|Qdd,R,a)")
    _guard(den, nuis.q, "P(Qd|Qdd,R,n,a)")
    return num / den


def _weights_prop2(nuis):
    selection = _selection_factor(nuis)
    std, t_hat, p_own = _standardization(nuis, nuis.q, "Q=1")
    values = selection * std
    return values, {"selection": selection, "standardization": std}


def _weights_prop3(nuis):
    A, N = nuis.spec.allowables, nuis.spec.non_allowables
    base = nuis.qdd & nuis.qp  # pre- and post-intervention criteria satisfied

    c1 = np.where(nuis.r == 1,
                  nuis.marginal("q_dagger", base & (nuis.r == 1)),
                  nuis.marginal("q_dagger", base & (nuis.r == 0)))
    m1 = _guard(nuis.fit_mean("q_dagger", base, ("R",) + tuple(N) + tuple(A),
                              label="prop III selection denominator"),
                nuis.q, "P(Qd|Qdd,Qp,R,n,a)")
    selection = c1 / m1

    m2 = _guard(nuis.fit_mean("q_dagger", nuis.qdd & nuis.s, tuple(A),
                              label="prop III intervention-draw model"),
                nuis.q, "P(Qd|Qdd,T,a)")
    c2 = nuis.marginal("q_dagger", nuis.qdd & nuis.s)
    draw = m2 / max(c2, PROB_FLOOR)

    std, _, _ = _standardization(nuis, base, "Qdd=Qp=1")
    values = selection * draw * std
    return values, {"selection": selection, "draw": draw, "standardization": std}


def _weights_prop3_alternate(nuis):
    """Alternate Proposition-III weights (more models, same estimand).

    The selection factor matches Proposition II, and the post-intervention
    criterion enters through its own probability ratio with models fit on
    the pre-eligible frame, where, under the proposition's structure, the
    post-criterion does not depend on the intervened one.
    """
    A = nuis.spec.allowables
    both = nuis.qdd & nuis.qd

    selection = _selection_factor(nuis)

    num_p = _guard(nuis.fit_mean("q_prime", nuis.qdd & nuis.s, tuple(A),
                                 label="prop III-alt prime/standard model"),
                   nuis.q, "P(Qp|Qdd,T,a)")
    den_p = _guard(nuis.fit_mean("q_prime", nuis.qdd, ("R",) + tuple(A),
                                 label="prop III-alt prime/group model"),
                   nuis.q, "P(Qp|Qdd,R,a)")
    c_own = np.where(nuis.r == 1,
                     nuis.marginal("q_prime", both & (nuis.r == 1)),
                     nuis.marginal("q_prime", both & (nuis.r == 0)))
    c_t = nuis.marginal("q_prime", both & nuis.s)
    prime = (num_p / den_p) * (c_own / max(c_t, PROB_FLOOR))

    std, _, _ = _standardization(nuis, both, "Qd=Qdd=1")
    values = selection * prime * std
    return values, {"selection": selection, "prime": prime, "standardization": std}


def _prop4_inner(nuis, group_mask, frame_mask, label):
    """E(Q_prime | Q_dagger=Q_ddagger=1, ., n, a) marginalized over N given (Q_ddagger=1, ., a).

    Realized as the published two-step construction: fit the post-criterion
    probability on (N, A) among the doubly-eligible subset, predict on the
    pre-eligible frame (Q_dagger set to 1), and regress the predictions on A
    there.
    """
    A, N = nuis.spec.allowables, nuis.spec.non_allowables
    pi = nuis.fit_mean("q_prime", nuis.qdd & nuis.qd & group_mask, tuple(N) + tuple(A),
                       label=f"{label} post-criterion model")
    _guard(pi, nuis.qdd & frame_mask, f"P(Qp|Qd,Qdd,{label},n,a)")
    smooth = nuis.fit_mean(pi, nuis.qdd & frame_mask, tuple(A),
                           label=f"{label} inner-expectation regression")
    return pi, smooth


def _weights_prop4(nuis):
    both = nuis.qdd & nuis.qd
    selection = _selection_factor(nuis)

    s_r = np.full(nuis.n, np.nan)
    cpi_own = np.full(nuis.n, np.nan)
    for g in (0, 1):
        gmask = nuis.r == g
        _, smooth = _prop4_inner(nuis, gmask, gmask, f"group-{g}")
        s_r = np.where(gmask, smooth, s_r)
        cpi_own = np.where(gmask, nuis.marginal("q_prime", both & gmask), cpi_own)
    _guard(s_r, nuis.q, "inner expectation (group)")

    _, s_t = _prop4_inner(nuis, nuis.s, nuis.s, "standard")
    _guard(s_t, nuis.q, "inner expectation (standard)")
    k_t = float(np.mean(s_t[both & nuis.s]))

    std, _, _ = _standardization(nuis, both, "Qd=Qdd=1")
    inner = (cpi_own / s_r) * (s_t / max(k_t, PROB_FLOOR))
    values = selection * inner * std
    return values, {"selection": selection, "inner": inner, "standardization": std}


def estimate_tau_weighting(
    table: ObservationTable,
    spec: TrialSpec,
    group: int,
    config: ModelConfig = None,
    weights: WeightVector = None,
    truncate=None,
) -> TauEstimate:
    """Hajek-weighted mean of Y over the eligible group-`group` records."""
    table = _ensure_annotated(table, spec)
    if weights is None:
        weights = compute_weights(table, spec, config, truncate=truncate)
    mask = weights.support & (table.column("R").astype(int) == group)
    if not mask.any():
        raise EmptyGroup(f"no eligible records in group {group}")
    w = weights.values[mask]
    y = table.column("Y").astype(float)[mask]
    total = float(np.sum(w))
    if total <= 0:
        raise PositivityViolation("weights sum to zero on the reference subpopulation")
    value = float(np.sum(w * y) / total)
    return TauEstimate(group=group, value=value, estimator="weighting", models=weights.models)


# ---------------------------------------------------------------------------
# iterated-conditional-expectation (g-computation) estimators
# ---------------------------------------------------------------------------


def estimate_tau_ice(
    table: ObservationTable,
    spec: TrialSpec,
    group: int,
    config: ModelConfig = None,
) -> TauEstimate:
    """Run the proposition's published regress-predict-average algorithm."""
    config = config or ModelConfig()
    table = _ensure_annotated(table, spec)
    nuis = Nuisance(table, spec, config)
    prop = spec.proposition
    family = "logistic" if table.schema.outcome == "binary" else "linear"
    A, N = tuple(spec.allowables), tuple(spec.non_allowables)
    gmask = nuis.r == group

    if not (nuis.q & gmask).any():
        raise EmptyGroup(f"no eligible records in group {group}")

    if prop == "I":
        h = nuis.fit_mean("y", nuis.q & gmask, A, family=family, label="outcome model")
        value = _finite_mean(h, nuis.q & nuis.s, "outcome predictions on the standard population")
    elif prop == "II":
        h1 = nuis.fit_mean("y", nuis.q & gmask, N + A, family=family, label="outcome model")
        _require(h1, nuis.qdd & gmask, "outcome predictions on the pre-eligible frame")
        h2 = nuis.fit_mean(h1, nuis.qdd & gmask, A, family=family, label="inner regression")
        value = _finite_mean(h2, nuis.q & nuis.s, "standardized predictions")
    elif prop == "III":
        base = nuis.qdd & nuis.qp
        m2 = nuis.fit_mean("q_dagger", nuis.qdd & nuis.s, A, label="intervention-draw model")
        c2 = nuis.marginal("q_dagger", nuis.qdd & nuis.s)
        w_ice = m2 / max(c2, PROB_FLOOR)
        h2 = nuis.fit_mean("y", nuis.q & gmask, N + A, family=family, label="outcome model")
        _require(h2, base & gmask, "outcome predictions on the pre/post-eligible frame")
        h3 = nuis.fit_mean(h2, base & gmask, A, family=family, label="inner regression")
        value = _finite_wmean(h3, w_ice, base & nuis.s, "weighted standardized predictions")
    else:  # IV
        both = nuis.qdd & nuis.qd
        pi_r, s_r = _prop4_inner(nuis, gmask, gmask, f"group-{group}")
        w_r = pi_r / np.where(s_r > PROB_FLOOR, s_r, np.nan)
        _, s_t = _prop4_inner(nuis, nuis.s, nuis.s, "standard")
        k_t = float(np.mean(s_t[both & nuis.s]))
        w_t = s_t / max(k_t, PROB_FLOOR)

        h5 = nuis.fit_mean("y", nuis.q & gmask, N + A, family=family, label="outcome model")
        _require(h5, nuis.qdd & gmask, "outcome predictions on the pre-eligible frame")
        _require(w_r, nuis.qdd & gmask, "inner weights")
        h6 = nuis.fit_mean(h5, nuis.qdd & gmask, A, weights=w_r, family=family,
                           label="weighted inner regression")
        value = _finite_wmean(h6, w_t, both & nuis.s, "weighted standardized predictions")

    return TauEstimate(group=group, value=float(value), estimator="ice", models=nuis.audit)


def _require(values, mask, what):
    if not np.asarray(mask).any():
        raise EmptyStage(f"empty subset for {what}")
    if np.any(~np.isfinite(values[mask])):
        raise PositivityViolation(f"{what} are undefined for part of the subset")


def _finite_mean(values, mask, what):
    _require(values, mask, what)
    return float(np.mean(values[mask]))


def _finite_wmean(values, weights, mask, what):
    _require(values, mask, what)
    _require(weights, mask, f"weights for {what}")
    w = weights[mask]
    return float(np.sum(w * values[mask]) / np.sum(w))


# ---------------------------------------------------------------------------
# disparity contrast
# ---------------------------------------------------------------------------


def _ensure_annotated(table: ObservationTable, spec: TrialSpec) -> ObservationTable:
    if all(table.has_column(c) for c in ("q", "q_ddagger", "q_dagger", "q_prime", "T")):
        return table
    return annotate(table, spec)


def _point_estimate(table, spec, estimator, config, truncate, seed, one_per_person):
    selected = select_trials(table, seed, one_per_person=one_per_person)
    if estimator == "weighting":
        weights = compute_weights(selected, spec, config, truncate=truncate)
        tau1 = estimate_tau_weighting(selected, spec, 1, config, weights=weights)
        tau0 = estimate_tau_weighting(selected, spec, 0, config, weights=weights)
        diagnostics = {"mean": weights.mean, "min": weights.min, "max": weights.max}
    else:
        tau1 = estimate_tau_ice(selected, spec, 1, config)
        tau0 = estimate_tau_ice(selected, spec, 0, config)
        diagnostics = None
    return tau1, tau0, diagnostics


def estimate_disparity(
    table: ObservationTable,
    spec: TrialSpec,
    seed: int = 0,
    config: ModelConfig = None,
    bootstrap=None,
    estimator: str = None,
    truncate=None,
    one_per_person: bool = False,
    workers: int = 1,
) -> DisparityEstimate:
    """tau(marginalized) - tau(privileged) with optional cluster-bootstrap CI.

    The input table should contain all candidate visits: one trial per
    (person, time unit) is drawn with the master seed for the point
    estimate, and selection is re-randomized inside every bootstrap
    replicate with the replicate's own seed, because selection randomness
    is part of the estimator.
    """
    config = config or ModelConfig()
    if estimator is None:
        estimator = "weighting" if spec.estimator == "both" else spec.estimator
    if estimator not in ("weighting", "ice"):
        raise SpecMismatch(f"unknown estimator {estimator!r}")

    table = _ensure_annotated(table, spec)
    tau1, tau0, diagnostics = _point_estimate(
        table, spec, estimator, config, truncate, seed, one_per_person
    )
    result = DisparityEstimate(
        tau_r=tau1,
        tau_rprime=tau0,
        difference=tau1.value - tau0.value,
        seed=seed,
        weight_diagnostics=diagnostics,
    )

    if bootstrap is not None:
        from .inference import cluster_bootstrap

        def replicate_estimator(replicate_table, replicate_seed):
            t1, t0, _ = _point_estimate(
                replicate_table, spec, estimator, config, truncate,
                replicate_seed, one_per_person,
            )
            return t1.value - t0.value

        _, lower, upper, replicates, failures = cluster_bootstrap(
            table, spec, bootstrap, replicate_estimator,
            point=result.difference, workers=workers,
        )
        result.ci = (lower, upper)
        result.replicates = replicates
        result.replicate_failures = failures
    return result
