"""Two-stage sampling design: the enrollment counterpart of the estimators.

Stage one realizes (or, under the counterfactual propositions, neutralizes)
selection into the eligible population; stage two balances the allowables to
the standard population's distribution.  Raw fractions are assembled from the
same conditional-probability fits the estimators use, then normalized to
valid inclusion probabilities, and realized as independent Bernoulli thinning
(inclusion probabilities proportional to the fractions).

With equal target sizes at every stage, the per-stratum product of the two
fractions is proportional to the corresponding estimation weight; the test
suite asserts that duality stratum by stratum.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .data_model import ObservationTable, TrialSpec
from .errors import DegenerateFractions, SpecMismatch
from .estimators import ModelConfig, Nuisance, _ensure_annotated, _selection_factor, _standardization
from .rngutil import rng_for


@dataclass(frozen=True)
class SamplingSizes:
    """Target marginal sizes per group, constrained to n0 > n1 > n2 > 0."""

    n0: int
    n1: int
    n2: int

    def __post_init__(self):
        if not (self.n0 >= self.n1 >= self.n2 > 0):
            raise SpecMismatch("sizes must satisfy n0 >= n1 >= n2 > 0")


@dataclass
class SamplingFractions:
    """Per-record sampling fractions over the eligible frame.

    stage1/stage2 are aligned to the table rows and NaN off the frame.  For
    Propositions I-III stage two varies only with the allowables; for
    Proposition IV it inherits non-allowable structure through the inner
    expectations, and the arrays simply carry whatever the formulas give.
    """

    stage1: np.ndarray
    stage2: np.ndarray
    frame: np.ndarray
    sizes: dict
    proposition: str
    normalized: bool = False

    def stratum_table(self, table: ObservationTable, spec: TrialSpec):
        import pandas as pd

        cols = {"R": table.column("R").astype(int)}
        for c in list(spec.non_allowables) + list(spec.allowables):
            cols[c] = table.column(c)
        frame = pd.DataFrame(cols)
        frame["stage1"] = self.stage1
        frame["stage2"] = self.stage2
        return frame.loc[self.frame].drop_duplicates().reset_index(drop=True)


def _sizes_by_group(sizes) -> dict:
    if isinstance(sizes, SamplingSizes):
        return {0: sizes, 1: sizes}
    return {int(g): s for g, s in sizes.items()}


def compute_sampling_fractions(
    table: ObservationTable,
    spec: TrialSpec,
    sizes,
    config: ModelConfig = None,
) -> SamplingFractions:
    """Raw stage-1 and stage-2 fractions per eligible record.

    Probabilities are empirical counts on discrete tables (saturated mode)
    and model plug-ins otherwise, using the same nuisance machinery as the
    estimators.  Proposition I's stage one is the constant n1/n0 per group.
    """
    config = config or ModelConfig()
    table = _ensure_annotated(table, spec)
    nuis = Nuisance(table, spec, config)
    sizes = _sizes_by_group(sizes)
    n = table.n
    prop = spec.proposition

    ratio1 = np.where(nuis.r == 1, sizes[1].n1 / sizes[1].n0, sizes[0].n1 / sizes[0].n0)
    ratio2 = np.where(nuis.r == 1, sizes[1].n2 / sizes[1].n1, sizes[0].n2 / sizes[0].n1)

    std_q, _, _ = _standardization(nuis, nuis.q, "Q=1")

    if prop == "I":
        stage1 = ratio1 * np.ones(n)
        stage2 = ratio2 * std_q
    elif prop == "II":
        stage1 = ratio1 * _selection_factor(nuis)
        stage2 = ratio2 * std_q
    elif prop == "III":
        stage1, stage2 = _fractions_prop3(nuis, ratio1, ratio2)
    else:
        stage1, stage2 = _fractions_prop4(nuis, ratio1, ratio2)

    frame = nuis.q.copy()
    stage1 = np.where(frame, stage1, np.nan)
    stage2 = np.where(frame, stage2, np.nan)
    return SamplingFractions(stage1, stage2, frame, sizes, prop)


def _group_marginal(nuis, target, base_mask):
    m1 = nuis.marginal(target, base_mask & (nuis.r == 1))
    m0 = nuis.marginal(target, base_mask & (nuis.r == 0))
    return np.where(nuis.r == 1, m1, m0)


def _fractions_prop3(nuis, ratio1, ratio2):
    A, N = nuis.spec.allowables, nuis.spec.non_allowables
    base = nuis.qdd & nuis.qp

    # stage 1: neutralize the selective mechanism on the pre/post frame,
    # then reweight toward the intervention draw
    m1 = nuis.fit_mean("q_dagger", base, ("R",) + tuple(N) + tuple(A),
                       label="prop III stage-1 denominator")
    c1 = _group_marginal(nuis, "q_dagger", base)
    draw_num = nuis.fit_mean("q_dagger", nuis.qdd, ("R",) + tuple(A),
                             label="prop III draw model")
    draw_den = _group_marginal(nuis, "q_dagger", nuis.qdd)
    stage1 = ratio1 * (c1 / m1) * (draw_num / draw_den)

    std_both, _, _ = _standardization(nuis, nuis.qdd & nuis.qd, "Qd=Qdd=1")
    std_base, _, _ = _standardization(nuis, base, "Qdd=Qp=1")
    std_pre, _, _ = _standardization(nuis, nuis.qdd, "Qdd=1")
    stage2 = ratio2 * std_both * std_base / std_pre
    return stage1, stage2


def _fractions_prop4(nuis, ratio1, ratio2):
    from .estimators import PROB_FLOOR, _prop4_inner

    A, N = nuis.spec.allowables, nuis.spec.non_allowables
    both = nuis.qdd & nuis.qd

    qd_and_qp = (nuis.qd & nuis.qp).astype(float)
    joint_num = nuis.fit_mean(qd_and_qp, nuis.qdd, ("R",) + tuple(A),
                              label="prop IV joint numerator")
    joint_den = nuis.fit_mean(qd_and_qp, nuis.qdd, ("R",) + tuple(N) + tuple(A),
                              label="prop IV joint denominator")

    s_own = np.full(nuis.n, np.nan)
    pi_own = np.full(nuis.n, np.nan)
    k_own = np.full(nuis.n, np.nan)
    cpi_own = np.full(nuis.n, np.nan)
    for g in (0, 1):
        gmask = nuis.r == g
        pi_g, s_g = _prop4_inner(nuis, gmask, gmask, f"group-{g}")
        s_own = np.where(gmask, s_g, s_own)
        pi_own = np.where(gmask, pi_g, pi_own)
        k_own = np.where(gmask, np.mean(s_g[both & gmask]), k_own)
        cpi_own = np.where(gmask, nuis.marginal("q_prime", both & gmask), cpi_own)
    pibar = nuis.fit_mean("q_prime", both, ("R",) + tuple(A), label="prop IV prime/group model")

    stage1 = (
        ratio1
        * (joint_num / joint_den)
        * (pi_own / s_own)
        * (cpi_own / pibar)
        * (s_own / k_own)
    )

    _, s_t = _prop4_inner(nuis, nuis.s, nuis.s, "standard")
    c_t = float(np.mean(s_t[both & nuis.s]))
    std_both, _, _ = _standardization(nuis, both, "Qd=Qdd=1")
    stage2 = ratio2 * std_both * (s_t / max(c_t, PROB_FLOOR)) * (k_own / s_own)
    return stage1, stage2


def normalize_fractions(fractions: SamplingFractions) -> SamplingFractions:
    """Rescale fractions into [0, 1] per stage and group, preserving ratios."""
    r_frame = None
    stage1 = fractions.stage1.copy()
    stage2 = fractions.stage2.copy()
    frame = fractions.frame
    if not frame.any():
        raise DegenerateFractions("eligible frame is empty")
    on1 = stage1[frame]
    on2 = stage2[frame]
    if np.all(np.nan_to_num(on1) == 0) or np.all(np.nan_to_num(on2) == 0):
        raise DegenerateFractions("all sampling fractions are zero")
    for values in (stage1, stage2):
        peak = np.nanmax(values[frame])
        if peak > 1.0:
            values[frame] = values[frame] / peak
    return replace(fractions, stage1=stage1, stage2=stage2, normalized=True)


def two_phase_sample(
    table: ObservationTable,
    fractions: SamplingFractions,
    seed: int,
    keep_stage1: bool = False,
) -> ObservationTable:
    """Realize the design: Bernoulli thinning of the eligible frame, twice.

    Returns the final sample (stage column = 2).  With keep_stage1=True the
    stage-1 survivors that were not retained at stage 2 are included as well,
    marked stage = 1.
    """
    if not fractions.normalized:
        if np.nanmax(fractions.stage1) > 1.0 or np.nanmax(fractions.stage2) > 1.0:
            raise SpecMismatch("fractions exceed 1; run normalize_fractions first")
    table = table if table.has_column("q") else _annotated_copy(table)
    frame_idx = np.flatnonzero(fractions.frame)
    rng1 = rng_for(seed, "stage1")
    rng2 = rng_for(seed, "stage2")
    u1 = rng1.random(table.n)
    u2 = rng2.random(table.n)
    stage1_mask = fractions.frame & (u1 < np.nan_to_num(fractions.stage1))
    stage2_mask = stage1_mask & (u2 < np.nan_to_num(fractions.stage2))

    keep = stage1_mask if keep_stage1 else stage2_mask
    idx = np.flatnonzero(keep)
    sampled = table.take(idx)
    stage = np.where(stage2_mask[idx], 2, 1)
    return sampled.with_columns({"stage": stage})


def _annotated_copy(table):
    raise SpecMismatch("two_phase_sample expects an eligibility-annotated table")
