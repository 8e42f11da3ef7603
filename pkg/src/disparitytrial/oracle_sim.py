"""Structural-equation simulator with potential-outcome bookkeeping.

Populations are drawn by ancestral sampling over the node vocabulary
{H, X, L, R, W_ddagger, W_dagger, W_prime, Y} with one shared uniform draw
per node per record, reused across counterfactual branches so that
consistency (the stored potential outcome equals the observed outcome
whenever the observed intervened variable equals the forced value) holds
exactly.

The module doubles as the repository's correctness oracle: ``true_tau``
evaluates the target quantity by direct grouped means over counterfactual
columns, and ``brute_force_identify`` evaluates each proposition's
identifying formula by literal nested enumeration with empirical
conditional probabilities, no models and no weights.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.special import expit
from scipy.stats import norm

from .data_model import (
    EligibilityPartition,
    ObservationTable,
    TableSchema,
    TrialSpec,
)
from .errors import BadDag, EmptyCell, EmptyConditioningCell, SpecMismatch
from .rngutil import rng_for

NODE_RANK = {
    "H": 0,
    "X": 1,
    "L": 1,
    "R": 1,
    "W_ddagger": 2,
    "W_dagger": 3,
    "W_prime": 4,
    "Y": 5,
}


@dataclass(frozen=True)
class NodeSpec:
    """One structural equation: main effects plus optional pairwise interactions.

    coefficients maps "intercept", parent names, and "P1:P2" interaction
    keys to reals.  link "logistic" yields a binary node; "linear" adds
    gaussian noise with sd ``noise_sd``.
    """

    name: str
    parents: tuple = ()
    link: str = "logistic"
    coefficients: dict = field(default_factory=dict)
    noise_sd: float = 1.0

    def linear_predictor(self, values: dict, n: int) -> np.ndarray:
        total = np.zeros(n)
        for key, coef in self.coefficients.items():
            if key == "intercept":
                total = total + coef
            elif ":" in key:
                a, b = key.split(":")
                total = total + coef * values[a] * values[b]
            else:
                total = total + coef * values[key]
        return total


@dataclass(frozen=True)
class ClusterSpec:
    count: int = 1
    sd: float = 0.0
    affects: tuple = ("Y",)


@dataclass(frozen=True)
class DagConfig:
    nodes: tuple
    n: int
    seed: int
    cluster: ClusterSpec = None

    def __post_init__(self):
        names = [node.name for node in self.nodes]
        if len(names) != len(set(names)):
            raise BadDag("duplicate node names")
        for node in self.nodes:
            if node.name not in NODE_RANK:
                raise BadDag(f"unknown node {node.name!r}")
            for parent in node.parents:
                if parent not in names:
                    raise BadDag(f"{node.name} lists undeclared parent {parent!r}")
                if NODE_RANK[parent] >= NODE_RANK[node.name]:
                    raise BadDag(
                        f"edge {parent} -> {node.name} violates the temporal ordering"
                    )
            for key in node.coefficients:
                if key == "intercept":
                    continue
                for piece in key.split(":"):
                    if piece not in node.parents:
                        raise BadDag(f"{node.name} coefficient references non-parent {piece!r}")

    def node(self, name):
        for node in self.nodes:
            if node.name == name:
                return node
        return None

    def has_edge(self, parent, child):
        node = self.node(child)
        return node is not None and parent in node.parents

    @classmethod
    def from_json(cls, source) -> "DagConfig":
        if isinstance(source, (str, bytes)):
            doc = json.loads(source)
        else:
            doc = json.load(source)
        nodes = tuple(
            NodeSpec(
                name=nd["name"],
                parents=tuple(nd.get("parents", ())),
                link=nd.get("link", "logistic"),
                coefficients=dict(nd.get("coefficients", {})),
                noise_sd=float(nd.get("noise_sd", 1.0)),
            )
            for nd in doc["nodes"]
        )
        cluster = None
        if doc.get("cluster"):
            c = doc["cluster"]
            cluster = ClusterSpec(
                count=int(c.get("count", 1)),
                sd=float(c.get("sd", 0.0)),
                affects=tuple(c.get("affects", ("Y",))),
            )
        return cls(nodes=nodes, n=int(doc["n"]), seed=int(doc["seed"]), cluster=cluster)

    def to_json(self) -> str:
        doc = {
            "n": self.n,
            "seed": self.seed,
            "nodes": [
                {
                    "name": nd.name,
                    "parents": list(nd.parents),
                    "link": nd.link,
                    "coefficients": nd.coefficients,
                    "noise_sd": nd.noise_sd,
                }
                for nd in self.nodes
            ],
        }
        if self.cluster:
            doc["cluster"] = {
                "count": self.cluster.count,
                "sd": self.cluster.sd,
                "affects": list(self.cluster.affects),
            }
        return json.dumps(doc, sort_keys=True, indent=2)


@dataclass
class SyntheticPopulation:
    """Simulator output: observable table plus hidden ground truth.

    y_pot[w] and wprime_pot[w] hold the potential outcome and the potential
    post-intervention eligibility variable under forcing W_dagger to w.
    After ``apply_stochastic_intervention`` the cf_* fields hold the drawn
    value, the counterfactual eligibility flags, and the counterfactual
    outcome for every record.
    """

    table: ObservationTable
    dag: DagConfig
    y_pot: dict = None
    wprime_pot: dict = None
    g_dagger: np.ndarray = None
    cf_y: np.ndarray = None
    cf_wprime: np.ndarray = None
    cf_flags: dict = None

    @property
    def intervened(self) -> bool:
        return self.g_dagger is not None


def _evaluate_node(node, values, u, cluster_effect):
    lp = node.linear_predictor(values, len(u))
    if cluster_effect is not None:
        lp = lp + cluster_effect
    if node.link == "logistic":
        return (u < expit(lp)).astype(np.int8)
    eps = norm.ppf(np.clip(u, 1e-12, 1 - 1e-12))
    return lp + node.noise_sd * eps


def simulate_population(dag: DagConfig) -> SyntheticPopulation:
    """Ancestral sampling with shared exogenous noise per node.

    Potential outcomes for the two values of W_dagger re-evaluate the
    descendant equations with the same uniform draws, so consistency holds
    record for record.
    """
    n = dag.n
    uniforms = {node.name: rng_for(dag.seed, "node", node.name).random(n) for node in dag.nodes}

    cluster_ids = np.zeros(n, dtype=int)
    effects = {}
    if dag.cluster and dag.cluster.count > 1:
        crng = rng_for(dag.seed, "cluster")
        cluster_ids = crng.integers(0, dag.cluster.count, size=n)
        raw = crng.normal(0.0, dag.cluster.sd, size=dag.cluster.count)
        for name in dag.cluster.affects:
            effects[name] = raw[cluster_ids]

    values = {}
    for node in sorted(dag.nodes, key=lambda nd: NODE_RANK[nd.name]):
        values[node.name] = _evaluate_node(
            node, values, uniforms[node.name], effects.get(node.name)
        )

    y_pot = None
    wprime_pot = None
    if dag.node("W_dagger") is not None:
        y_pot, wprime_pot = {}, {}
        for forced in (0, 1):
            branch = dict(values)
            branch["W_dagger"] = np.full(n, forced, dtype=np.int8)
            wp_node = dag.node("W_prime")
            if wp_node is not None:
                branch["W_prime"] = _evaluate_node(
                    wp_node, branch, uniforms["W_prime"], effects.get("W_prime")
                )
                wprime_pot[forced] = branch["W_prime"]
            y_node = dag.node("Y")
            y_pot[forced] = _evaluate_node(y_node, branch, uniforms["Y"], effects.get("Y"))
        if wp_node is None:
            wprime_pot = None

    frame = pd.DataFrame(
        {
            "person_id": [f"p{i:07d}" for i in range(n)],
            "visit_id": ["v1"] * n,
            "cluster_id": [f"c{c:03d}" for c in cluster_ids],
            "time_unit": np.ones(n, dtype=int),
            "R": values["R"].astype(int),
            "Y": np.asarray(values["Y"], dtype=float),
        }
    )
    covariates = {}
    for node in dag.nodes:
        if node.name in ("R", "Y"):
            continue
        frame[node.name] = values[node.name]
        covariates[node.name] = "binary" if node.link == "logistic" else "continuous"
    if y_pot is not None:
        for forced in (0, 1):
            frame[f"truth_y_wd{forced}"] = np.asarray(y_pot[forced], dtype=float)
            if wprime_pot is not None:
                frame[f"truth_wprime_wd{forced}"] = wprime_pot[forced]

    schema = TableSchema(covariates=covariates, outcome="binary" if dag.node("Y").link == "logistic" else "continuous")
    table = ObservationTable(frame, schema)
    return SyntheticPopulation(table=table, dag=dag, y_pot=y_pot, wprime_pot=wprime_pot)


# ---------------------------------------------------------------------------
# stochastic intervention
# ---------------------------------------------------------------------------


def _partition_and_allowables(spec_or_partition, allowables):
    if isinstance(spec_or_partition, TrialSpec):
        return spec_or_partition.partition, tuple(spec_or_partition.allowables)
    if allowables is None:
        raise SpecMismatch(
            "apply_stochastic_intervention needs the allowables; pass a TrialSpec "
            "or give allowables= explicitly"
        )
    return spec_or_partition, tuple(allowables)


def apply_stochastic_intervention(
    pop: SyntheticPopulation,
    spec_or_partition,
    seed: int,
    allowables=None,
) -> SyntheticPopulation:
    """Redraw W_dagger from its empirical conditional given (W_ddagger, A, R).

    Donors are records sharing the exact (pre-intervention eligibility
    variables, allowables, group) cell, so the redraw preserves
    P(W_dagger | W_ddagger, A, R) while severing every other dependence.
    The counterfactual outcome and post-intervention variable come from the
    stored potential-outcome columns for the drawn value.
    """
    partition, allow = _partition_and_allowables(spec_or_partition, allowables)
    if pop.y_pot is None:
        raise SpecMismatch("population was simulated without an intervened eligibility variable")
    table = pop.table
    n = table.n

    key_cols = [c.variable for c in partition.w_ddagger] + list(allow) + ["R"]
    for col in key_cols:
        if not table.has_column(col):
            raise EmptyConditioningCell(f"conditioning column {col!r} absent from the population")
    frame = table.frame
    codes = pd.MultiIndex.from_frame(frame[key_cols]).factorize(sort=True)[0] if key_cols else np.zeros(n, int)

    wd = table.column("W_dagger").astype(int)
    rng = rng_for(seed, "intervention")
    g = np.empty(n, dtype=np.int8)
    order = np.argsort(codes, kind="stable")
    bounds = np.flatnonzero(np.diff(codes[order], prepend=-1))
    starts = list(bounds) + [n]
    for i in range(len(starts) - 1):
        idx = order[starts[i]: starts[i + 1]]
        if idx.size == 0:
            raise EmptyConditioningCell("empty donor cell")
        g[idx] = wd[idx[rng.integers(0, idx.size, size=idx.size)]]

    cf_y = np.where(g == 1, pop.y_pot[1], pop.y_pot[0])
    cf_wprime = None
    if pop.wprime_pot is not None:
        cf_wprime = np.where(g == 1, pop.wprime_pot[1], pop.wprime_pot[0]).astype(np.int8)

    flags = {}
    qdd = np.ones(n, dtype=np.int8)
    for crit in partition.w_ddagger:
        qdd &= crit.satisfied(table.column(crit.variable))
    qd = np.ones(n, dtype=np.int8)
    for crit in partition.w_dagger:
        if crit.variable != "W_dagger":
            raise SpecMismatch("the simulator intervenes on W_dagger only")
        qd &= crit.satisfied(g)
    qp = np.ones(n, dtype=np.int8)
    for crit in partition.w_prime:
        if crit.variable != "W_prime":
            raise SpecMismatch("post-intervention criteria must reference W_prime")
        if cf_wprime is None:
            raise SpecMismatch("population has no W_prime node")
        qp &= crit.satisfied(cf_wprime)
    flags = {"q_ddagger": qdd, "q_dagger": qd, "q_prime": qp, "q": qdd * qd * qp}

    return SyntheticPopulation(
        table=table,
        dag=pop.dag,
        y_pot=pop.y_pot,
        wprime_pot=pop.wprime_pot,
        g_dagger=g,
        cf_y=cf_y,
        cf_wprime=cf_wprime,
        cf_flags=flags,
    )


def consistency_holds(pop: SyntheticPopulation) -> bool:
    """A2 by construction: Y(w) equals Y on records observed at W_dagger = w."""
    wd = pop.table.column("W_dagger").astype(int)
    y = pop.table.column("Y")
    for forced in (0, 1):
        if not np.array_equal(y[wd == forced], np.asarray(pop.y_pot[forced])[wd == forced]):
            return False
    if pop.wprime_pot is not None:
        wp = pop.table.column("W_prime")
        for forced in (0, 1):
            if not np.array_equal(wp[wd == forced], np.asarray(pop.wprime_pot[forced])[wd == forced]):
                return False
    return True


# ---------------------------------------------------------------------------
# ground truth and brute-force identification
# ---------------------------------------------------------------------------


def _selector_values(table, spec):
    from .emulation import _selector_mask

    return _selector_mask(table, spec).astype(bool)


def _standardized_mean(y, eligible, r, selector, a_key, group):
    """sum_a mean(y | eligible, R=group, a) P(a | eligible & selector)."""
    std_mask = eligible & selector
    if not std_mask.any():
        raise EmptyCell("standard population is empty")
    cells, counts = np.unique(a_key[std_mask], return_counts=True)
    total = counts.sum()
    value = 0.0
    for cell, count in zip(cells, counts):
        cell_mask = eligible & (r == group) & (a_key == cell)
        if not cell_mask.any():
            raise EmptyCell(f"no eligible group-{group} records in allowable stratum {cell}")
        value += np.mean(y[cell_mask]) * (count / total)
    return float(value)


def standardized_mean_se(y, eligible, r, selector, a_key, group):
    """Delta-method Monte Carlo standard error of the standardized mean."""
    std_mask = eligible & selector
    cells, counts = np.unique(a_key[std_mask], return_counts=True)
    total = counts.sum()
    tau = _standardized_mean(y, eligible, r, selector, a_key, group)
    var = 0.0
    for cell, count in zip(cells, counts):
        p = count / total
        cell_mask = eligible & (r == group) & (a_key == cell)
        m = np.mean(y[cell_mask])
        v = np.var(y[cell_mask])
        var += p**2 * v / max(cell_mask.sum(), 1)
        var += p * (m - tau) ** 2 / total
    return float(np.sqrt(var))


def _a_codes(table, allowables):
    if not allowables:
        return np.zeros(table.n, dtype=int)
    frame = pd.DataFrame({c: table.column(c) for c in allowables})
    return pd.MultiIndex.from_frame(frame).factorize(sort=True)[0]


def true_tau(pop: SyntheticPopulation, spec: TrialSpec, group: int) -> float:
    """Ground-truth standardized mean, computed with no models and no weights.

    Proposition I reads the observed eligible population; the counterfactual
    propositions require ``apply_stochastic_intervention`` to have been run.
    """
    table = pop.table
    r = table.column("R").astype(int)
    a_key = _a_codes(table, spec.allowables)
    selector = _selector_values(table, spec)

    if spec.proposition == "I":
        from .emulation import evaluate_eligibility

        flagged = evaluate_eligibility(table, spec.partition)
        eligible = flagged.column("q").astype(bool)
        return _standardized_mean(table.column("Y").astype(float), eligible, r, selector, a_key, group)

    if not pop.intervened:
        raise SpecMismatch("apply_stochastic_intervention first for propositions II-IV")
    eligible = pop.cf_flags["q"].astype(bool)
    return _standardized_mean(np.asarray(pop.cf_y, dtype=float), eligible, r, selector, a_key, group)


def true_tau_se(pop: SyntheticPopulation, spec: TrialSpec, group: int) -> float:
    table = pop.table
    r = table.column("R").astype(int)
    a_key = _a_codes(table, spec.allowables)
    selector = _selector_values(table, spec)
    if spec.proposition == "I":
        from .emulation import evaluate_eligibility

        flagged = evaluate_eligibility(table, spec.partition)
        eligible = flagged.column("q").astype(bool)
        return standardized_mean_se(table.column("Y").astype(float), eligible, r, selector, a_key, group)
    eligible = pop.cf_flags["q"].astype(bool)
    return standardized_mean_se(np.asarray(pop.cf_y, dtype=float), eligible, r, selector, a_key, group)


# -- literal evaluation of the identifying formulas ---------------------------


class _Counter:
    """Empirical conditional probabilities by explicit counting."""

    def __init__(self):
        self.hits = defaultdict(float)
        self.totals = defaultdict(float)

    def add(self, key, value):
        self.totals[key] += 1.0
        self.hits[key] += float(value)

    def mean(self, key, what="conditional"):
        if self.totals[key] == 0:
            raise EmptyCell(f"{what} conditions on an unpopulated cell {key}")
        return self.hits[key] / self.totals[key]


def brute_force_identify(table: ObservationTable, spec: TrialSpec, proposition: str = None) -> dict:
    """Evaluate the identifying formula by nested enumeration over strata.

    Returns {group: tau} for both groups.  All covariates must be discrete;
    this is the model-free oracle the estimators are tested against.
    """
    proposition = proposition or spec.proposition
    for name in list(spec.allowables) + list(spec.non_allowables):
        if table.schema.covariates.get(name) == "continuous":
            raise SpecMismatch("brute-force identification requires discrete covariates")

    n = table.n
    r = table.column("R").astype(int)
    y = table.column("Y").astype(float)
    selector = _selector_values(table, spec)

    qdd = np.ones(n, dtype=bool)
    for crit in spec.partition.w_ddagger:
        qdd &= crit.satisfied(table.column(crit.variable)).astype(bool)
    qd = np.ones(n, dtype=bool)
    for crit in spec.partition.w_dagger:
        qd &= crit.satisfied(table.column(crit.variable)).astype(bool)
    qp = np.ones(n, dtype=bool)
    for crit in spec.partition.w_prime:
        qp &= crit.satisfied(table.column(crit.variable)).astype(bool)
    q = qdd & qd & qp

    a_vals = [tuple(table.column(c)[i] for c in spec.allowables) for i in range(n)]
    n_vals = [tuple(table.column(c)[i] for c in spec.non_allowables) for i in range(n)]

    # outcome means within (group, n, a) among the fully eligible
    m = _Counter()
    for i in range(n):
        if q[i]:
            m.add((r[i], n_vals[i], a_vals[i]), y[i])

    out = {}
    for group in (0, 1):
        if proposition == "I":
            out[group] = _bf_prop1(n, q, selector, r, a_vals, group, m)
        elif proposition == "II":
            out[group] = _bf_prop2(n, q, qdd, selector, r, a_vals, n_vals, group, m)
        elif proposition == "III":
            out[group] = _bf_prop3(n, qdd, qd, qp, selector, r, a_vals, n_vals, group, m)
        else:
            out[group] = _bf_prop4(n, qdd, qd, qp, selector, r, a_vals, n_vals, group, m)
    return out


def _a_distribution(n, mask, a_vals):
    counts = defaultdict(float)
    for i in range(n):
        if mask[i]:
            counts[a_vals[i]] += 1.0
    total = sum(counts.values())
    if total == 0:
        raise EmptyCell("standard population is empty")
    return {a: c / total for a, c in counts.items()}


def _bf_prop1(n, q, sel, r, a_vals, group, m):
    adist = _a_distribution(n, q & sel, a_vals)
    return sum(_pooled_outcome(m, group, a) * p for a, p in adist.items())


def _pooled_outcome(m, group, a):
    """mean(Y | Q=1, R=group, a), pooling the non-allowable strata."""
    hits = totals = 0.0
    for (g, nv, av), tot in m.totals.items():
        if g == group and av == a:
            totals += tot
            hits += m.hits[(g, nv, av)]
    if totals == 0:
        raise EmptyCell(f"no eligible group-{group} records with allowables {a}")
    return hits / totals


def _n_given(n, mask, a_vals, n_vals):
    """{a: {n_value: P(n | mask, a)}} by counting."""
    counts = defaultdict(lambda: defaultdict(float))
    for i in range(n):
        if mask[i]:
            counts[a_vals[i]][n_vals[i]] += 1.0
    out = {}
    for a, by_n in counts.items():
        total = sum(by_n.values())
        out[a] = {nv: c / total for nv, c in by_n.items()}
    return out


def _bf_prop2(n, q, qdd, sel, r, a_vals, n_vals, group, m):
    ncond = _n_given(n, qdd & (r == group), a_vals, n_vals)
    adist = _a_distribution(n, q & sel, a_vals)
    tau = 0.0
    for a, p_a in adist.items():
        if a not in ncond:
            raise EmptyCell(f"no group-{group} pre-eligible records with allowables {a}")
        inner = sum(m.mean((group, nv, a)) * p for nv, p in ncond[a].items())
        tau += inner * p_a
    return tau


def _bf_prop3(n, qdd, qd, qp, sel, r, a_vals, n_vals, group, m):
    base = qdd & qp
    ncond = _n_given(n, base & (r == group), a_vals, n_vals)
    # draw probability P(Q_dagger=1 | Q_ddagger=1, standard, a)
    draw = _Counter()
    for i in range(n):
        if qdd[i] and sel[i]:
            draw.add(a_vals[i], qd[i])
    adist = _a_distribution(n, base & sel, a_vals)

    weights = {
        a: draw.mean(a, "intervention draw") * p_a for a, p_a in adist.items()
    }
    norm = sum(weights.values())
    if norm <= 0:
        raise EmptyCell("intervention draw has no mass on the standard population")

    tau = 0.0
    for a, w in weights.items():
        if a not in ncond:
            raise EmptyCell(f"no group-{group} records with allowables {a} in the pre/post frame")
        inner = sum(m.mean((group, nv, a)) * p for nv, p in ncond[a].items())
        tau += inner * (w / norm)
    return tau


def _bf_prop4(n, qdd, qd, qp, sel, r, a_vals, n_vals, group, m):
    both = qdd & qd

    def pi_prime(member):
        """P(Q_prime=1 | Q_dagger=Q_ddagger=1, member, n, a) by counting."""
        c = _Counter()
        for i in range(n):
            if both[i] and member[i]:
                c.add((n_vals[i], a_vals[i]), qp[i])
        return c

    member_g = r == group
    pi_g = pi_prime(member_g)
    npre_g = _n_given(n, qdd & member_g, a_vals, n_vals)
    pi_t = pi_prime(sel)
    npre_t = _n_given(n, qdd & sel, a_vals, n_vals)
    adist = _a_distribution(n, both & sel, a_vals)

    def s_factor(pi, npre, a):
        if a not in npre:
            raise EmptyCell(f"no pre-eligible records with allowables {a}")
        return sum(
            pi.mean((nv, a), "post-criterion probability") * p
            for nv, p in npre[a].items()
        )

    weights = {a: s_factor(pi_t, npre_t, a) * p_a for a, p_a in adist.items()}
    norm = sum(weights.values())
    if norm <= 0:
        raise EmptyCell("counterfactual eligibility has no mass on the standard population")

    tau = 0.0
    for a, w in weights.items():
        if a not in npre_g:
            raise EmptyCell(f"no group-{group} pre-eligible records with allowables {a}")
        num = den = 0.0
        for nv, p in npre_g[a].items():
            pi = pi_g.mean((nv, a), "post-criterion probability")
            num += m.mean((group, nv, a)) * pi * p
            den += pi * p
        if den <= 0:
            raise EmptyCell(f"degenerate post-criterion mass for allowables {a}")
        tau += (num / den) * (w / norm)
    return tau


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------


def exchangeability_pvalue(
    pop: SyntheticPopulation,
    conditioning: tuple,
    seed: int = 0,
    permutations: int = 200,
    forced: int = 1,
) -> float:
    """Permutation diagnostic for Y(w) independent of W_dagger given the conditioning set.

    Within each conditioning stratum the observed association between
    W_dagger and the stored potential outcome is compared against its
    permutation distribution; returns the two-sided p-value.
    """
    table = pop.table
    wd = table.column("W_dagger").astype(int)
    ypot = np.asarray(pop.y_pot[forced], dtype=float)
    frame = pd.DataFrame({c: table.column(c) for c in conditioning})
    codes = pd.MultiIndex.from_frame(frame).factorize(sort=True)[0]

    def statistic(assignment):
        stat = 0.0
        for cell in np.unique(codes):
            mask = codes == cell
            a = assignment[mask]
            if a.min() == a.max():
                continue
            d = ypot[mask][a == 1].mean() - ypot[mask][a == 0].mean()
            stat += mask.sum() * abs(d)
        return stat

    rng = rng_for(seed, "exchangeability")
    observed = statistic(wd)
    hits = 0
    for _ in range(permutations):
        perm = wd.copy()
        for cell in np.unique(codes):
            mask = codes == cell
            perm[mask] = rng.permutation(perm[mask])
        if statistic(perm) >= observed - 1e-12:
            hits += 1
    return (hits + 1) / (permutations + 1)
