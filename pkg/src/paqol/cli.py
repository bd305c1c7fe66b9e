"""Pipeline orchestrator: the four-stage workflow as subcommands.

    simulate -> discover -> edit -> estimate -> refute -> report

plus ``pipeline`` to chain them. All randomness flows from the single config
seed through per-stage derivation, so rerunning any stage with the same
config reproduces its outputs byte for byte (timestamps live only in
run.json, which is excluded from that guarantee).
"""

from __future__ import annotations

import dataclasses
import datetime as dt
import hashlib
import json
from pathlib import Path
from typing import Sequence

import click

from . import __version__
from .boosting import BoostingError, TreeParams
from .data import (
    Cohort,
    DataError,
    Timepoint,
    drop_incomplete,
    load_cohort,
    load_schema,
    save_cohort,
    save_schema,
    standardize,
)
from .discovery import DiscoveryConfig, DiscoveryError, ges_details, gies_details, pc_details
from .estimation import EstimationError, estimate_effects
from .graphs import (
    Cpdag,
    Dag,
    GraphError,
    apply_edits,
    extend_to_dag,
    parse_edit_script,
    parse_graph,
    serialize_graph,
)
from .refutation import (
    DEFAULT_ROBUSTNESS_BOUND,
    DEFAULT_STRENGTHS,
    AtePipeline,
    RefutationError,
    RefutationMethod,
    Verdict,
    aggregate_verdict,
    run_refuters,
)
from .report import render_report
from .scm import (
    ScmError,
    linear_mediation_truth,
    load_scm,
    sample,
    save_scm,
    scm_dag,
    study_template,
    true_ate,
)

_PIPELINE_ERRORS = (
    DataError,
    GraphError,
    DiscoveryError,
    EstimationError,
    RefutationError,
    BoostingError,
    ScmError,
    OSError,
    KeyError,
    ValueError,
)

_METHOD_KEYS = {
    "placebo": RefutationMethod.PLACEBO_TREATMENT,
    "subset": RefutationMethod.DATA_SUBSET,
    "random_common_cause": RefutationMethod.ADD_RANDOM_COMMON_CAUSE,
    "unobserved_common_cause": RefutationMethod.UNOBSERVED_COMMON_CAUSE,
}


def derive_seed(seed: int, stage: str) -> int:
    """Per-stage seed: hash of the stage name mixed with the config seed."""
    digest = hashlib.sha256(f"{stage}:{seed}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


@dataclasses.dataclass
class PipelineConfig:
    seed: int
    out_dir: Path
    timepoint: Timepoint = Timepoint.GEST_WEEK_15
    cohort_path: Path | None = None
    schema_path: Path | None = None
    daily_activity_path: Path | None = None
    simulate_template: bool = False
    simulate_scm: Path | None = None
    simulate_n: int = 5000
    effect_overrides: dict[str, float] = dataclasses.field(default_factory=dict)
    roles: dict[str, str] = dataclasses.field(default_factory=dict)
    algorithm: str = "pc"
    alpha: float = 0.05
    max_cond_size: int = 3
    bic_penalty: float = 1.0
    edits_path: Path | None = None
    trees: TreeParams = TreeParams()
    transition: tuple[float, float] = (0.0, 1.0)
    replicates: int = 100
    subset_fraction: float = 0.8
    strengths: tuple[tuple[float, float], ...] = DEFAULT_STRENGTHS
    robustness_bound: float = DEFAULT_ROBUSTNESS_BOUND
    methods: tuple[str, ...] = tuple(_METHOD_KEYS)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "out_dir": str(self.out_dir),
            "timepoint": self.timepoint.value,
            "data": {
                "cohort": str(self.cohort_path) if self.cohort_path else None,
                "schema": str(self.schema_path) if self.schema_path else None,
                "daily_activity": str(self.daily_activity_path)
                if self.daily_activity_path
                else None,
            },
            "simulate": {
                "template": self.simulate_template,
                "scm": str(self.simulate_scm) if self.simulate_scm else None,
                "n": self.simulate_n,
                "effect_overrides": dict(self.effect_overrides),
            },
            "roles": dict(self.roles),
            "discovery": {
                "algorithm": self.algorithm,
                "alpha": self.alpha,
                "max_cond_size": self.max_cond_size,
                "bic_penalty": self.bic_penalty,
            },
            "edits": str(self.edits_path) if self.edits_path else None,
            "trees": dataclasses.asdict(self.trees),
            "transition": list(self.transition),
            "refutation": {
                "replicates": self.replicates,
                "subset_fraction": self.subset_fraction,
                "strengths": [list(s) for s in self.strengths],
                "robustness_bound": self.robustness_bound,
                "methods": list(self.methods),
            },
        }


def load_config(
    config_path: str | None,
    seed: int | None = None,
    out_dir: str | None = None,
    algo: str | None = None,
    edits: str | None = None,
    methods: str | None = None,
    template: bool = False,
    n: int | None = None,
) -> PipelineConfig:
    """Merge the config file (optional) with command-line overrides."""
    raw: dict = {}
    if config_path is not None:
        raw = json.loads(Path(config_path).read_text(encoding="utf-8"))
    data = raw.get("data", {})
    sim = raw.get("simulate", {})
    disc = raw.get("discovery", {})
    refute = raw.get("refutation", {})
    trees = raw.get("trees", {})

    resolved_seed = seed if seed is not None else raw.get("seed")
    if resolved_seed is None:
        raise click.UsageError("a seed is required (config 'seed' or --seed)")
    resolved_out = out_dir or raw.get("out_dir") or "run"
    method_names = tuple(
        m.strip() for m in methods.split(",")
    ) if methods else tuple(refute.get("methods", list(_METHOD_KEYS)))
    for name in method_names:
        if name not in _METHOD_KEYS:
            raise click.UsageError(
                f"unknown refutation method {name!r}; choose from {sorted(_METHOD_KEYS)}"
            )
    timepoint_raw = raw.get("timepoint", Timepoint.GEST_WEEK_15.value)
    try:
        timepoint = Timepoint(timepoint_raw)
    except ValueError:
        raise click.UsageError(f"unknown timepoint {timepoint_raw!r}")

    def _opt_path(value) -> Path | None:
        return Path(value) if value else None

    return PipelineConfig(
        seed=int(resolved_seed),
        out_dir=Path(resolved_out),
        timepoint=timepoint,
        cohort_path=_opt_path(data.get("cohort")),
        schema_path=_opt_path(data.get("schema")),
        daily_activity_path=_opt_path(data.get("daily_activity")),
        simulate_template=bool(template or sim.get("template", False)),
        simulate_scm=_opt_path(sim.get("scm")),
        simulate_n=int(n if n is not None else sim.get("n", 5000)),
        effect_overrides=dict(sim.get("effect_overrides", {})),
        roles=dict(raw.get("roles", {})),
        algorithm=algo or disc.get("algorithm", "pc"),
        alpha=float(disc.get("alpha", 0.05)),
        max_cond_size=int(disc.get("max_cond_size", 3)),
        bic_penalty=float(disc.get("bic_penalty", 1.0)),
        edits_path=_opt_path(edits or raw.get("edits")),
        trees=TreeParams(
            max_depth=int(trees.get("max_depth", 2)),
            min_child_samples=int(trees.get("min_child_samples", 60)),
            n_trees=int(trees.get("n_trees", 100)),
            learning_rate=float(trees.get("learning_rate", 0.1)),
        ),
        transition=tuple(float(v) for v in raw.get("transition", (0, 1))),
        replicates=int(refute.get("replicates", 100)),
        subset_fraction=float(refute.get("subset_fraction", 0.8)),
        strengths=tuple(
            (float(kt), float(ky)) for kt, ky in refute.get("strengths", DEFAULT_STRENGTHS)
        ),
        robustness_bound=float(refute.get("robustness_bound", DEFAULT_ROBUSTNESS_BOUND)),
        methods=method_names,
    )


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _read_json(path: Path):
    if not path.exists():
        raise click.ClickException(f"missing artifact {path}; run the earlier stage first")
    return json.loads(path.read_text(encoding="utf-8"))


def _prepare_out(cfg: PipelineConfig, command: str) -> None:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(cfg.out_dir / "config.json", cfg.to_dict())
    (cfg.out_dir / "run.json").write_text(
        json.dumps(
            {
                "created_at": dt.datetime.now(dt.timezone.utc).isoformat(),
                "command": command,
                "paqol_version": __version__,
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )


def _cohort_file(cfg: PipelineConfig) -> Path:
    if cfg.cohort_path is not None:
        return cfg.cohort_path
    return cfg.out_dir / f"cohort_{cfg.timepoint.value}.csv"


def _schema_file(cfg: PipelineConfig) -> Path:
    if cfg.schema_path is not None:
        return cfg.schema_path
    return cfg.out_dir / "schema.json"


def _load_input_cohort(cfg: PipelineConfig) -> Cohort:
    schema = load_schema(_schema_file(cfg))
    cohort = load_cohort(_cohort_file(cfg), schema, cfg.timepoint)
    if cfg.roles:
        cohort = cohort.with_roles(cfg.roles)
    return cohort


def _subset_columns(cohort: Cohort, names: Sequence[str]) -> Cohort:
    schema = tuple(v for v in cohort.schema if v.name in names)
    return Cohort(schema, cohort.columns([v.name for v in schema]), cohort.timepoint)


# ---------------------------------------------------------------------------
# Stage implementations


def run_simulate(cfg: PipelineConfig) -> dict:
    if cfg.simulate_template:
        scm = study_template(cfg.effect_overrides)
    elif cfg.simulate_scm is not None:
        scm = load_scm(cfg.simulate_scm)
    else:
        raise ScmError("simulate needs --template or a simulate.scm path in the config")
    save_scm(scm, cfg.out_dir / "scm.json")
    save_schema(scm.schema(), cfg.out_dir / "schema.json")

    treatments = [n for n, r in scm.roles.items() if r == "treatment"]
    if len(treatments) != 1:
        raise ScmError("the simulated model must designate exactly one treatment")
    treatment = treatments[0]
    dag = scm_dag(scm)
    sinks = [
        n
        for n in scm.nodes
        if not dag.children(n) and n in dag.descendants(treatment)
    ]
    effects = {}
    for sink in sinks:
        try:
            effects[sink] = linear_mediation_truth(scm, treatment, sink)
        except ScmError:
            effects[sink] = {"ate": true_ate(scm, treatment, sink).value}

    cohorts = {}
    for tp in Timepoint:
        tp_seed = derive_seed(cfg.seed, f"simulate:{tp.value}")
        cohort = sample(scm, cfg.simulate_n, tp_seed, tp)
        path = cfg.out_dir / f"cohort_{tp.value}.csv"
        save_cohort(cohort, path)
        cohorts[tp.value] = path.name
    manifest = {
        "n": cfg.simulate_n,
        "seed": cfg.seed,
        "treatment": treatment,
        "cohorts": cohorts,
        "effects": effects,
        "scm": "scm.json",
    }
    _write_json(cfg.out_dir / "truth.json", manifest)
    return manifest


def run_discover(cfg: PipelineConfig) -> Cpdag:
    cohort = _load_input_cohort(cfg)
    columns = [v.name for v in cohort.schema if v.role != "auxiliary"]
    working = _subset_columns(cohort, columns)
    working, dropped = drop_incomplete(working, working.names)
    working, _ = standardize(working)
    disc_cfg = DiscoveryConfig(
        alpha=cfg.alpha, max_cond_size=cfg.max_cond_size, bic_penalty=cfg.bic_penalty
    )
    manifest: dict = {
        "algorithm": cfg.algorithm,
        "alpha": cfg.alpha,
        "max_cond_size": cfg.max_cond_size,
        "bic_penalty": cfg.bic_penalty,
        "columns": list(working.names),
        "rows_used": working.n_rows,
        "dropped_rows": dropped,
        "seed": cfg.seed,
    }
    if cfg.algorithm == "pc":
        result = pc_details(working, disc_cfg)
        cpdag = result.cpdag
        manifest["separating_sets"] = {
            "|".join(sorted(pair)): list(s) for pair, s in sorted(
                result.separating_sets.items(), key=lambda kv: sorted(kv[0])
            )
        }
        manifest["n_tests"] = result.n_tests
    elif cfg.algorithm == "ges":
        result = ges_details(working, disc_cfg)
        cpdag = result.cpdag
        manifest["score"] = result.score
        manifest["forward_scores"] = list(result.forward_scores)
        manifest["backward_scores"] = list(result.backward_scores)
    elif cfg.algorithm == "gies":
        result = gies_details(working, disc_cfg)
        cpdag = result.cpdag
        manifest["score"] = result.score
    else:
        raise DiscoveryError(f"unknown algorithm {cfg.algorithm!r}")
    (cfg.out_dir / "graph.dot").write_text(serialize_graph(cpdag), encoding="utf-8")
    _write_json(cfg.out_dir / "discover.json", manifest)
    return cpdag


def run_edit(cfg: PipelineConfig, edits_path: Path) -> None:
    graph_file = cfg.out_dir / "graph.dot"
    if not graph_file.exists():
        raise GraphError(f"missing {graph_file}; run discover first")
    graph = parse_graph(graph_file.read_text(encoding="utf-8"))
    script = parse_edit_script(Path(edits_path).read_text(encoding="utf-8"))
    edited = apply_edits(graph, script)
    graph_file.write_text(serialize_graph(edited), encoding="utf-8")


def run_estimate(cfg: PipelineConfig, edits_path: Path | None = None) -> dict:
    cohort = _load_input_cohort(cfg)
    graph_file = cfg.out_dir / "graph.dot"
    if not graph_file.exists():
        raise GraphError(f"missing {graph_file}; run discover first")
    graph = parse_graph(graph_file.read_text(encoding="utf-8"))
    if edits_path is not None:
        script = parse_edit_script(Path(edits_path).read_text(encoding="utf-8"))
        graph = apply_edits(graph, script)
    dag = graph if isinstance(graph, Dag) else extend_to_dag(graph)

    used = [n for n in cohort.names if dag.has_node(n)]
    working = _subset_columns(cohort, used)
    working, dropped = drop_incomplete(working, working.names)
    x, x_prime = cfg.transition
    run = estimate_effects(
        working,
        dag,
        params=cfg.trees,
        x=x,
        x_prime=x_prime,
        seed=derive_seed(cfg.seed, "estimate"),
    )
    payload = {
        "timepoint": cfg.timepoint.value,
        "treatment": run.treatment,
        "outcome": run.outcome,
        "backdoor": list(run.backdoor),
        "backdoor_verified": run.backdoor_verified,
        "mediators": list(run.mediator_names),
        "transition": [x, x_prime],
        "ate": run.result.ate,
        "nde": run.result.nde,
        "nie": run.result.nie,
        "nie_reverse": run.result.nie_reverse,
        "te": run.result.te,
        "control_mean": run.control_mean,
        "dropped_rows": dropped,
        "params": dataclasses.asdict(run.params),
        "seed": run.seed,
    }
    _write_json(cfg.out_dir / "estimate.json", payload)
    return payload


def run_refute(cfg: PipelineConfig) -> dict:
    estimate = _read_json(cfg.out_dir / "estimate.json")
    cohort = _load_input_cohort(cfg)
    needed = [estimate["treatment"], estimate["outcome"], *estimate["backdoor"]]
    working = _subset_columns(cohort, needed)
    working, _ = drop_incomplete(working, working.names)
    pipeline = AtePipeline(
        treatment=estimate["treatment"],
        outcome=estimate["outcome"],
        features=tuple(estimate["backdoor"]),
        params=TreeParams(**estimate["params"]),
        seed=estimate["seed"],
    )
    methods = [_METHOD_KEYS[name] for name in cfg.methods]
    results = run_refuters(
        pipeline,
        working,
        methods=methods,
        b=cfg.replicates,
        seed=derive_seed(cfg.seed, "refute"),
        subset_fraction=cfg.subset_fraction,
        strengths=cfg.strengths,
        robustness_bound=cfg.robustness_bound,
    )
    payload = {
        "timepoint": cfg.timepoint.value,
        "seed": cfg.seed,
        "replicates": cfg.replicates,
        "aggregate_verdict": aggregate_verdict(results).value,
        "results": [
            {
                "method": r.method.value,
                "original_effect": r.original_effect,
                "new_effect": list(r.new_effect)
                if isinstance(r.new_effect, tuple)
                else r.new_effect,
                "p_value": r.p_value,
                "replicates": r.replicates,
                "verdict": r.verdict.value,
                "seed": r.seed,
                **({"strengths": [list(s) for s in r.strengths]} if r.strengths else {}),
            }
            for r in results
        ],
    }
    _write_json(cfg.out_dir / "refute.json", payload)
    return payload


def run_report(cfg: PipelineConfig) -> str:
    estimate = _read_json(cfg.out_dir / "estimate.json")
    refutation = _read_json(cfg.out_dir / "refute.json")
    config_bytes = (cfg.out_dir / "config.json").read_bytes()
    digest = "sha256:" + hashlib.sha256(config_bytes).hexdigest()
    text = render_report(estimate, refutation, digest)
    (cfg.out_dir / "report.md").write_text(text, encoding="utf-8")
    return text


# ---------------------------------------------------------------------------
# Click wiring


def _common_options(fn):
    fn = click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None, help="Pipeline config JSON.")(fn)
    fn = click.option("--seed", type=int, default=None, help="Overrides the config seed.")(fn)
    fn = click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None, help="Run directory.")(fn)
    return fn


def _fail(exc: Exception) -> None:
    raise click.ClickException(str(exc)) from exc


@click.group()
@click.version_option(__version__)
def main() -> None:
    """Causal ML pipeline: discovery, mediation-aware estimation, refutation."""


@main.command()
@_common_options
@click.option("--template", is_flag=True, help="Use the built-in study template SCM.")
@click.option("--n", type=int, default=None, help="Rows per timepoint cohort.")
def simulate(config_path, seed, out_dir, template, n):
    """Write synthetic cohorts and a ground-truth manifest."""
    cfg = load_config(config_path, seed=seed, out_dir=out_dir, template=template, n=n)
    _prepare_out(cfg, "simulate")
    try:
        manifest = run_simulate(cfg)
    except _PIPELINE_ERRORS as exc:
        _fail(exc)
    click.echo(f"simulated {len(manifest['cohorts'])} cohorts into {cfg.out_dir}")


@main.command()
@_common_options
@click.option("--algo", type=click.Choice(["pc", "ges", "gies"]), default=None)
def discover(config_path, seed, out_dir, algo):
    """Learn a causal graph and write graph.dot plus a run manifest."""
    cfg = load_config(config_path, seed=seed, out_dir=out_dir, algo=algo)
    _prepare_out(cfg, "discover")
    try:
        cpdag = run_discover(cfg)
    except _PIPELINE_ERRORS as exc:
        _fail(exc)
    click.echo(
        f"{cfg.algorithm}: {len(cpdag.directed)} directed, "
        f"{len(cpdag.undirected)} undirected edges -> {cfg.out_dir / 'graph.dot'}"
    )


@main.command()
@_common_options
@click.option("--edits", "edits_path", type=click.Path(exists=True, dir_okay=False), required=True)
def edit(config_path, seed, out_dir, edits_path):
    """Apply an expert edit script to the run's graph."""
    cfg = load_config(config_path, seed=seed, out_dir=out_dir)
    _prepare_out(cfg, "edit")
    try:
        run_edit(cfg, Path(edits_path))
    except _PIPELINE_ERRORS as exc:
        _fail(exc)
    click.echo(f"edited {cfg.out_dir / 'graph.dot'}")


@main.command()
@_common_options
@click.option("--edits", "edits_path", type=click.Path(exists=True, dir_okay=False), default=None)
def estimate(config_path, seed, out_dir, edits_path):
    """Identify, fit the T-learners, and write estimate.json."""
    cfg = load_config(config_path, seed=seed, out_dir=out_dir, edits=edits_path)
    _prepare_out(cfg, "estimate")
    try:
        payload = run_estimate(cfg, cfg.edits_path)
    except _PIPELINE_ERRORS as exc:
        _fail(exc)
    click.echo(
        f"ate={payload['ate']:.3f} nde={payload['nde']:.3f} "
        f"nie={payload['nie']:.3f} te={payload['te']:.3f}"
    )


@main.command()
@_common_options
@click.option("--methods", default=None, help="Comma-separated refuter subset.")
@click.option("--no-verdict-exit", is_flag=True, help="Exit 0 even when a refuter fails.")
def refute(config_path, seed, out_dir, methods, no_verdict_exit):
    """Run the refutation battery and write refute.json."""
    cfg = load_config(config_path, seed=seed, out_dir=out_dir, methods=methods)
    _prepare_out(cfg, "refute")
    try:
        payload = run_refute(cfg)
    except _PIPELINE_ERRORS as exc:
        _fail(exc)
    click.echo(f"aggregate verdict: {payload['aggregate_verdict']}")
    if payload["aggregate_verdict"] != Verdict.PASSED.value and not no_verdict_exit:
        raise SystemExit(1)


@main.command()
@_common_options
def report(config_path, seed, out_dir):
    """Render report.md from the estimation and refutation artifacts."""
    cfg = load_config(config_path, seed=seed, out_dir=out_dir)
    _prepare_out(cfg, "report")
    try:
        run_report(cfg)
    except _PIPELINE_ERRORS as exc:
        _fail(exc)
    click.echo(f"wrote {cfg.out_dir / 'report.md'}")


@main.command()
@_common_options
@click.option("--template", is_flag=True)
@click.option("--n", type=int, default=None)
@click.option("--algo", type=click.Choice(["pc", "ges", "gies"]), default=None)
@click.option("--edits", "edits_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--methods", default=None)
@click.option("--no-verdict-exit", is_flag=True)
def pipeline(config_path, seed, out_dir, template, n, algo, edits_path, methods, no_verdict_exit):
    """Run every stage in order with per-stage derived seeds."""
    cfg = load_config(
        config_path,
        seed=seed,
        out_dir=out_dir,
        algo=algo,
        edits=edits_path,
        methods=methods,
        template=template,
        n=n,
    )
    _prepare_out(cfg, "pipeline")
    try:
        if cfg.simulate_template or cfg.simulate_scm is not None:
            run_simulate(cfg)
        run_discover(cfg)
        if cfg.edits_path is not None:
            run_edit(cfg, cfg.edits_path)
        run_estimate(cfg)
        payload = run_refute(cfg)
        run_report(cfg)
    except _PIPELINE_ERRORS as exc:
        _fail(exc)
    click.echo(f"pipeline complete; aggregate verdict {payload['aggregate_verdict']}")
    if payload["aggregate_verdict"] != Verdict.PASSED.value and not no_verdict_exit:
        raise SystemExit(1)


if __name__ == "__main__":
    main()
