"""Config-driven command line: estimation, simulation, design realization, validation.

One JSON document describes one analysis, echoing the trial-specification
checklist (enrollment groups, eligibility, allowability, standard, time
zero, outcome, analysis).  Flags override config fields.  Reports are JSON
with stable keys and numbers at 10 significant digits, so identical inputs
produce byte-identical reports.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .data_model import (
    Criterion,
    EligibilityPartition,
    StandardPopulation,
    TableSchema,
    TrialSpec,
    load_observations,
    validate_table,
)
from .emulation import annotate, select_trials
from .errors import (
    BadDag,
    BadValue,
    ConfigError,
    DisparityTrialError,
    DuplicateKey,
    EmptyConditioningCell,
    IoError,
    MissingColumn,
    MissingValue,
    SpecMismatch,
    UnknownVariable,
)
from .estimators import ModelConfig, estimate_disparity
from .inference import InferenceConfig
from .oracle_sim import DagConfig, apply_stochastic_intervention, simulate_population, true_tau
from .sampling_design import SamplingSizes, compute_sampling_fractions, normalize_fractions, two_phase_sample

MODES = ("estimate", "simulate", "sample", "validate", "oracle")

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_ESTIMATION = 4
EXIT_IO = 5

_DATA_ERRORS = (MissingColumn, DuplicateKey, BadValue, MissingValue, UnknownVariable)

EXIT_CODE_DOC = """exit codes:
  0  success
  1  unexpected internal error
  2  configuration missing, malformed, or inconsistent
  3  data ingestion error (missing column/value, duplicate key, bad value)
  4  estimation error (positivity, model failure, empty subset, too few clusters)
  5  report or table could not be written
"""


class RunConfig:
    """Parsed run configuration; see build_trial_spec for the trial body."""

    def __init__(self, doc: dict):
        if not isinstance(doc, dict):
            raise ConfigError("run config must be a JSON object")
        self.doc = doc
        self.mode = doc.get("mode", "estimate")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        self.data = doc.get("data")
        self.out = doc.get("out")
        self.seed = doc.get("seed")
        self.dag = doc.get("dag")
        if self.mode in ("estimate", "sample", "validate") and not self.data:
            raise ConfigError(f"mode {self.mode!r} needs a data path")
        if self.mode in ("simulate", "oracle") and not self.dag:
            raise ConfigError(f"mode {self.mode!r} needs a DAG config path")
        if self.seed is None and self.mode != "validate":
            raise ConfigError("a master seed is required whenever randomness is used")

    @property
    def trial(self):
        if "trial" not in self.doc:
            raise ConfigError("config is missing the trial specification body")
        return self.doc["trial"]


def _criteria(items):
    out = []
    for item in items or ():
        try:
            out.append(Criterion(item["variable"], tuple(item["values"])))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad eligibility criterion {item!r}") from exc
    return tuple(out)


def build_trial_spec(trial: dict) -> TrialSpec:
    try:
        elig = trial.get("eligibility", {})
        partition = EligibilityPartition(
            w_ddagger=_criteria(elig.get("w_ddagger")),
            w_dagger=_criteria(elig.get("w_dagger")),
            w_prime=_criteria(elig.get("w_prime")),
            prime_affected_by_dagger=bool(elig.get("prime_affected_by_dagger", False)),
        )
        std = trial.get("standard", {"kind": "all_eligible"})
        standard = StandardPopulation(
            kind=std.get("kind", "all_eligible"),
            variable=std.get("variable"),
            values=tuple(std["values"]) if std.get("values") is not None else None,
        )
        analysis = trial.get("analysis", {})
        return TrialSpec(
            partition=partition,
            allowables=tuple(trial.get("allowability", ())),
            non_allowables=tuple(trial.get("non_allowables", ())),
            standard_population=standard,
            proposition=analysis.get("proposition", "I"),
            estimator=analysis.get("estimator", "both"),
            scale=analysis.get("scale", "difference"),
        )
    except SpecMismatch as exc:
        raise ConfigError(str(exc)) from exc


def build_schema(config: RunConfig) -> TableSchema:
    columns = config.doc.get("columns")
    if not isinstance(columns, dict) or not columns:
        raise ConfigError("config needs a 'columns' object declaring covariate kinds")
    try:
        return TableSchema(covariates=dict(columns), outcome=config.doc.get("outcome", "binary"))
    except SpecMismatch as exc:
        raise ConfigError(str(exc)) from exc


def _model_config(trial: dict) -> ModelConfig:
    analysis = trial.get("analysis", {})
    models = analysis.get("models", "saturated")
    if isinstance(models, str):
        return ModelConfig(mode=models, spline_knots=dict(analysis.get("spline_knots", {})))
    return ModelConfig(
        mode=models.get("mode", "saturated"),
        spline_knots=dict(models.get("spline_knots", {})),
    )


def _inference_config(config: RunConfig):
    body = config.doc.get("bootstrap")
    if not body:
        return None, 1
    try:
        return (
            InferenceConfig(
                replicates=int(body.get("replicates", 1000)),
                mode=body.get("mode", "with_replacement"),
                level=float(body.get("level", 0.95)),
                seed=int(config.seed),
                m=body.get("m"),
            ),
            int(body.get("workers", 1)),
        )
    except SpecMismatch as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# report emission
# ---------------------------------------------------------------------------


def _round_floats(value):
    if isinstance(value, float):
        return float(f"{value:.10g}")
    if isinstance(value, dict):
        return {k: _round_floats(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_round_floats(v) for v in value]
    return value


def emit_report(results: dict, path=None) -> str:
    """Stable-key JSON with numbers at 10 significant digits."""
    text = json.dumps(_round_floats(results), sort_keys=True, indent=2) + "\n"
    if path:
        try:
            with open(path, "w", encoding="utf-8") as handle:
                handle.write(text)
        except OSError as exc:
            raise IoError(f"could not write report to {path}: {exc}") from exc
    return text


def _eligibility_counts(table):
    return {
        "q_ddagger": int(table.column("q_ddagger").sum()),
        "q_dagger": int(table.column("q_dagger").sum()),
        "q_prime": int(table.column("q_prime").sum()),
        "q": int(table.column("q").sum()),
        "standard": int(table.column("T").sum()),
    }


def _estimate_block(result):
    block = {
        "tau_marginalized": result.tau_r.value,
        "tau_privileged": result.tau_rprime.value,
        "difference": result.difference,
        "ci": list(result.ci) if result.ci is not None else None,
        "weight_diagnostics": result.weight_diagnostics,
        "replicate_failures": result.replicate_failures,
    }
    return block


# ---------------------------------------------------------------------------
# pipeline modes
# ---------------------------------------------------------------------------


def _run_estimate(config: RunConfig) -> dict:
    schema = build_schema(config)
    spec = build_trial_spec(config.trial)
    table = load_observations(config.data, schema)
    table = annotate(table, spec)
    report_validation = validate_table(table, spec)

    analysis = config.trial.get("analysis", {})
    model_config = _model_config(config.trial)
    truncate = analysis.get("truncate")
    truncate = tuple(truncate) if truncate else None
    one_per_person = bool(analysis.get("one_per_person", False))
    inference, workers = _inference_config(config)

    kinds = [spec.estimator] if spec.estimator != "both" else ["weighting", "ice"]
    estimates = {}
    for kind in kinds:
        result = estimate_disparity(
            table,
            spec,
            seed=int(config.seed),
            config=model_config,
            bootstrap=inference,
            estimator=kind,
            truncate=truncate,
            one_per_person=one_per_person,
            workers=workers,
        )
        estimates[kind] = _estimate_block(result)

    selected = select_trials(table, int(config.seed), one_per_person=one_per_person)
    r = selected.column("R").astype(int)
    return {
        "software": {"name": "disparitytrial", "version": __version__},
        "mode": "estimate",
        "spec": config.trial,
        "n_by_group": {"privileged": int((r == 0).sum()), "marginalized": int((r == 1).sum())},
        "eligibility_counts": _eligibility_counts(selected),
        "estimates": estimates,
        "validation": {
            "violations": [
                {"assumption": v.assumption, "stratum": _round_floats(_stratum(v.stratum)),
                 "group": v.group, "detail": v.detail}
                for v in report_validation.violations
            ],
            "warnings": report_validation.warnings,
        },
        "bootstrap": config.doc.get("bootstrap"),
        "seeds": {"master": int(config.seed)},
    }


def _stratum(stratum):
    return {k: (v.item() if hasattr(v, "item") else v) for k, v in stratum.items()}


def _run_validate(config: RunConfig) -> dict:
    schema = build_schema(config)
    spec = build_trial_spec(config.trial)
    table = load_observations(config.data, schema)
    report = validate_table(annotate(table, spec), spec)
    return {
        "software": {"name": "disparitytrial", "version": __version__},
        "mode": "validate",
        "spec": config.trial,
        "ok": report.ok,
        "violations": [
            {"assumption": v.assumption, "stratum": _round_floats(_stratum(v.stratum)),
             "group": v.group, "detail": v.detail}
            for v in report.violations
        ],
        "warnings": report.warnings,
    }


def _run_simulate(config: RunConfig) -> dict:
    with open(config.dag, "r", encoding="utf-8") as handle:
        dag = DagConfig.from_json(handle)
    pop = simulate_population(dag)
    if config.out:
        try:
            pop.table.to_csv(config.out)
        except OSError as exc:
            raise IoError(f"could not write population to {config.out}: {exc}") from exc
    counts = {name: float(pop.table.column(name).mean()) for name in ("R", "Y")}
    return {
        "software": {"name": "disparitytrial", "version": __version__},
        "mode": "simulate",
        "n": pop.table.n,
        "seeds": {"master": dag.seed},
        "marginal_means": counts,
        "out": config.out,
    }


def _run_oracle(config: RunConfig) -> dict:
    with open(config.dag, "r", encoding="utf-8") as handle:
        dag = DagConfig.from_json(handle)
    spec = build_trial_spec(config.trial)
    pop = simulate_population(dag)

    prop1_spec = TrialSpec(
        partition=EligibilityPartition(
            w_ddagger=spec.partition.w_ddagger + spec.partition.w_dagger + spec.partition.w_prime
        ),
        allowables=spec.allowables,
        non_allowables=spec.non_allowables,
        standard_population=spec.standard_population,
        proposition="I",
        estimator=spec.estimator,
    )
    truth = {
        "I": {
            "tau_marginalized": true_tau(pop, prop1_spec, 1),
            "tau_privileged": true_tau(pop, prop1_spec, 0),
        }
    }
    if spec.proposition != "I":
        intervened = apply_stochastic_intervention(pop, spec, int(config.seed))
        truth[spec.proposition] = {
            "tau_marginalized": true_tau(intervened, spec, 1),
            "tau_privileged": true_tau(intervened, spec, 0),
        }
    for block in truth.values():
        block["difference"] = block["tau_marginalized"] - block["tau_privileged"]

    model_config = _model_config(config.trial)
    kinds = [spec.estimator] if spec.estimator != "both" else ["weighting", "ice"]
    estimates = {}
    table = annotate(pop.table, spec)
    for kind in kinds:
        result = estimate_disparity(
            table, spec, seed=int(config.seed), config=model_config, estimator=kind
        )
        estimates[kind] = _estimate_block(result)

    return {
        "software": {"name": "disparitytrial", "version": __version__},
        "mode": "oracle",
        "spec": config.trial,
        "true_tau": truth,
        "estimates": estimates,
        "seeds": {"master": int(config.seed), "dag": dag.seed},
    }


def _run_sample(config: RunConfig) -> dict:
    schema = build_schema(config)
    spec = build_trial_spec(config.trial)
    table = load_observations(config.data, schema)
    table = annotate(table, spec)

    sizes_doc = config.doc.get("sizes")
    if not sizes_doc:
        raise ConfigError("sample mode needs a 'sizes' object with n0/n1/n2")
    try:
        if "n0" in sizes_doc:
            sizes = SamplingSizes(int(sizes_doc["n0"]), int(sizes_doc["n1"]), int(sizes_doc["n2"]))
        else:
            sizes = {
                int(g): SamplingSizes(int(s["n0"]), int(s["n1"]), int(s["n2"]))
                for g, s in sizes_doc.items()
            }
    except (KeyError, TypeError, SpecMismatch) as exc:
        raise ConfigError(f"bad sizes object: {exc}") from exc

    fractions = normalize_fractions(
        compute_sampling_fractions(table, spec, sizes, _model_config(config.trial))
    )
    sampled = two_phase_sample(table, fractions, int(config.seed), keep_stage1=True)
    if config.out:
        try:
            sampled.to_csv(config.out)
        except OSError as exc:
            raise IoError(f"could not write sample to {config.out}: {exc}") from exc
    stage = sampled.column("stage")
    return {
        "software": {"name": "disparitytrial", "version": __version__},
        "mode": "sample",
        "spec": config.trial,
        "n_stage1": int((stage >= 1).sum()),
        "n_stage2": int((stage == 2).sum()),
        "seeds": {"master": int(config.seed)},
        "out": config.out,
    }


def run_pipeline(config: RunConfig):
    """Execute the configured mode; returns (exit_status, report dict)."""
    runner = {
        "estimate": _run_estimate,
        "validate": _run_validate,
        "simulate": _run_simulate,
        "oracle": _run_oracle,
        "sample": _run_sample,
    }[config.mode]
    report = runner(config)
    return EXIT_OK, report


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="disparitytrial",
        description="Measure group disparity by emulating an observational target trial.",
        epilog=EXIT_CODE_DOC,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--config", help="JSON run configuration (one file = one analysis)")
    parser.add_argument("--mode", choices=MODES, help="override the config's mode")
    parser.add_argument("--data", help="override the config's data CSV path")
    parser.add_argument("--out", help="override the config's output path")
    parser.add_argument("--seed", type=int, help="override the config's master seed")
    parser.add_argument("--bootstrap", type=int, metavar="B",
                        help="override the number of bootstrap replicates")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return parser


def load_config(args) -> RunConfig:
    doc = {}
    if args.config:
        try:
            with open(args.config, "r", encoding="utf-8") as handle:
                doc = json.load(handle)
        except OSError as exc:
            raise ConfigError(f"could not read config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {args.config} is not valid JSON: {exc}") from exc
    for key in ("mode", "data", "out", "seed"):
        value = getattr(args, key)
        if value is not None:
            doc[key] = value
    if args.bootstrap is not None:
        body = doc.get("bootstrap") or {}
        body["replicates"] = args.bootstrap
        doc["bootstrap"] = body
    config = RunConfig(doc)
    if config.mode in ("estimate", "sample", "validate") or config.dag:
        _check_paths(config)
    return config


def _check_paths(config: RunConfig):
    import os

    for label, path in (("data", config.data), ("dag", config.dag)):
        if path and not os.path.exists(path):
            raise ConfigError(f"{label} file does not exist: {path}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args)
        status, report = run_pipeline(config)
    except ConfigError as exc:
        _emit_error("config", exc)
        return EXIT_CONFIG
    except _DATA_ERRORS as exc:
        _emit_error("data_model", exc)
        return EXIT_DATA
    except (BadDag, EmptyConditioningCell) as exc:
        _emit_error("oracle_sim", exc)
        return EXIT_ESTIMATION
    except IoError as exc:
        _emit_error("io", exc)
        return EXIT_IO
    except DisparityTrialError as exc:
        _emit_error("estimation", exc)
        return EXIT_ESTIMATION
    except Exception as exc:  # pragma: no cover - defensive
        _emit_error("internal", exc)
        return EXIT_UNEXPECTED

    out_path = None
    if config.mode in ("estimate", "validate", "oracle"):
        out_path = config.out
    text = emit_report(report, out_path)
    if not out_path:
        sys.stdout.write(text)
    return status


def _emit_error(module: str, exc: Exception):
    block = {"error": {"module": module, "kind": type(exc).__name__, "message": str(exc)}}
    sys.stderr.write(json.dumps(block, sort_keys=True) + "\n")


if __name__ == "__main__":
    sys.exit(main())
