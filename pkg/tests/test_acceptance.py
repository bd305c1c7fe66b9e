"""Acceptance criteria, one test per criterion, at their stated tolerances.

Each test prints a single PASS line (run with ``pytest -s`` to see them all,
or rely on the assertion to flag FAIL). Runtime budgets are asserted too.
"""

import dataclasses
import json
import time

import numpy as np
from click.testing import CliRunner

from helpers import (
    d_separated_by_paths,
    linear_scm_from_dag,
    random_dag,
    template_estimation_dag,
)
from paqol.boosting import TreeParams, fit_boosted_trees, leaf_sample_counts
from paqol.cli import main
from paqol.data import Cohort, VariableSchema, covariance_matrix, standardize
from paqol.discovery import (
    DiscoveryConfig,
    GaussianBicScore,
    dsep_oracle_test,
    ges,
    ges_details,
    pc,
    pc_from_ci,
)
from paqol.estimation import ate, fit_t_learner, nde, nie, total_effect
from paqol.graphs import (
    Cpdag,
    Dag,
    cpdag_of_dag,
    d_separated,
    edits_to_reach,
    parse_graph,
    serialize_edit_script,
)
from paqol.refutation import (
    AtePipeline,
    Verdict,
    refute_placebo,
    refute_random_common_cause,
    refute_subset,
    refute_unobserved_common_cause,
)
from paqol.scm import (
    BernoulliLogistic,
    DiscreteScm,
    LinearGaussian,
    Scm,
    discrete_node,
    oracle_mediation,
    sample,
    sample_discrete,
)


def _report(criterion: str, detail: str, elapsed: float, budget: float) -> None:
    print(f"[acceptance] {criterion}: PASS ({detail}; {elapsed:.1f}s of {budget:.0f}s budget)")
    assert elapsed < budget, f"{criterion} exceeded its runtime budget"


def _linear_refutation_scm(effect=10.0) -> Scm:
    return Scm(
        ("C", "T", "Y"),
        {
            "C": LinearGaussian((), (), 0.0, 1.0),
            "T": BernoulliLogistic((), (), 0.0),
            "Y": LinearGaussian(("T", "C"), (effect, 3.0), 0.0, 1.0),
        },
        roles={"C": "covariate", "T": "treatment", "Y": "outcome"},
    )


def test_criterion_1_mediation_oracle_equivalence():
    start = time.perf_counter()
    x = discrete_node("x", (0, 1), rows=(0.5, 0.5))
    z = discrete_node("z", (0, 1), ("x",), {(0.0,): (0.8, 0.2), (1.0,): (0.2, 0.8)})
    means = {(xv, zv): 2 * xv + 3 * zv for xv in (0.0, 1.0) for zv in (0.0, 1.0)}
    dscm = DiscreteScm(x, (z,), "y", means, outcome_noise_sd=1.0)

    truth = oracle_mediation(dscm, 0, 1)
    assert abs(truth.nde - 2.0) <= 1e-9
    assert abs(truth.nie_reverse - (-1.8)) <= 1e-9
    assert abs(truth.te - 3.8) <= 1e-9
    assert abs(truth.ate - (4.4 - 0.6)) <= 1e-9
    assert abs(truth.te - truth.ate) <= 1e-12  # identity under enumeration

    cohort = sample_discrete(dscm, 20_000, 101)
    learner = fit_t_learner(cohort, "x", "y", ("z",))
    nde_hat = nde(learner, cohort, 0, 1)
    nie_rev_hat = nie(learner, cohort, 1, 0)
    te_hat = total_effect(nde_hat, nie_rev_hat)
    assert abs(nde_hat - truth.nde) <= 0.05
    assert abs(nie_rev_hat - truth.nie_reverse) <= 0.05
    assert abs(nie(learner, cohort, 0, 1) - truth.nie) <= 0.05
    assert abs(te_hat - truth.te) <= 0.05
    _report(
        "criterion 1 (mediation oracle equivalence)",
        f"plug-in errors nde={abs(nde_hat-2):.3f} te={abs(te_hat-3.8):.3f}",
        time.perf_counter() - start,
        10.0,
    )


def _three_node_scm(structure: str) -> tuple[Scm, Cpdag]:
    mechanisms = {
        "chain": {
            "X": LinearGaussian((), (), 0.0, 1.0),
            "Z": LinearGaussian(("X",), (1.0,), 0.0, 1.0),
            "Y": LinearGaussian(("Z",), (1.0,), 0.0, 1.0),
        },
        "fork": {
            "Z": LinearGaussian((), (), 0.0, 1.0),
            "X": LinearGaussian(("Z",), (1.0,), 0.0, 1.0),
            "Y": LinearGaussian(("Z",), (1.0,), 0.0, 1.0),
        },
        "collider": {
            "X": LinearGaussian((), (), 0.0, 1.0),
            "Y": LinearGaussian((), (), 0.0, 1.0),
            "Z": LinearGaussian(("X", "Y"), (1.0, 1.0), 0.0, 1.0),
        },
    }[structure]
    order = {"chain": ("X", "Z", "Y"), "fork": ("Z", "X", "Y"), "collider": ("X", "Y", "Z")}[
        structure
    ]
    scm = Scm(order, mechanisms)
    truth_edges = {
        "chain": [("X", "Z"), ("Z", "Y")],
        "fork": [("Z", "X"), ("Z", "Y")],
        "collider": [("X", "Z"), ("Y", "Z")],
    }[structure]
    truth = cpdag_of_dag(Dag(order, truth_edges))
    return scm, truth


def test_criterion_2_graph_recovery():
    start = time.perf_counter()
    scores = {}
    for structure in ("chain", "fork", "collider"):
        scm, truth = _three_node_scm(structure)
        for algo_name, algo in (("pc", pc), ("ges", ges)):
            hits = 0
            for seed in range(10):
                cohort, _ = standardize(sample(scm, 50_000, 1000 * seed + 17))
                if algo(cohort) == truth:
                    hits += 1
            scores[(structure, algo_name)] = hits
            assert hits >= 9, f"{algo_name} on {structure}: {hits}/10"
    detail = ", ".join(f"{s}/{a}={h}" for (s, a), h in scores.items())
    _report("criterion 2 (graph recovery)", detail, time.perf_counter() - start, 60.0)


def test_criterion_3_perfect_oracle_pc():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    hits = 0
    for trial in range(100):
        n_nodes = int(rng.integers(2, 6))
        dag = random_dag(rng, n_nodes, float(rng.uniform(0.2, 0.8)))
        oracle = dsep_oracle_test(dag, dag.nodes)
        cfg = DiscoveryConfig(max_cond_size=max(n_nodes - 2, 0))
        result = pc_from_ci(dag.nodes, oracle, cfg)
        hits += result.cpdag == cpdag_of_dag(dag)
    assert hits == 100
    _report("criterion 3 (perfect-oracle PC)", "100/100", time.perf_counter() - start, 30.0)


def test_criterion_4_synthetic_study_replication(tmp_path):
    start = time.perf_counter()
    runner = CliRunner()
    target_dag = template_estimation_dag()
    successes = 0
    results = []
    for seed in range(10):
        out = tmp_path / f"seed{seed}"
        assert (
            runner.invoke(
                main,
                [
                    "simulate", "--template", "--n", "5000",
                    "--seed", str(seed), "--out", str(out),
                ],
            ).exit_code
            == 0
        )
        assert (
            runner.invoke(
                main, ["discover", "--seed", str(seed), "--out", str(out), "--algo", "pc"]
            ).exit_code
            == 0
        )
        graph = parse_graph((out / "graph.dot").read_text())
        edits = out / "to_template.txt"
        edits.write_text(serialize_edit_script(edits_to_reach(graph, target_dag)))
        assert (
            runner.invoke(
                main,
                ["estimate", "--seed", str(seed), "--out", str(out), "--edits", str(edits)],
            ).exit_code
            == 0
        )
        payload = json.loads((out / "estimate.json").read_text())
        ate_ok = abs(payload["ate"] - 7.3) <= 0.15 * 7.3
        te_ok = abs(payload["te"] - 7.3) <= 0.20 * 7.3
        successes += ate_ok and te_ok
        results.append((round(payload["ate"], 2), round(payload["te"], 2)))
    assert successes >= 8, f"only {successes}/10 seeds in tolerance: {results}"
    _report(
        "criterion 4 (synthetic study replication)",
        f"{successes}/10 seeds, (ate, te) per seed {results}",
        time.perf_counter() - start,
        300.0,
    )


def test_criterion_5_refutation_behavior():
    start = time.perf_counter()
    scm = _linear_refutation_scm()
    pipeline = AtePipeline(treatment="T", outcome="Y", features=("C",))
    counts = {"placebo": 0, "subset": 0, "random_cause": 0, "unobserved": 0}
    for seed in range(10):
        cohort = sample(scm, 5_000, seed)
        p = refute_placebo(pipeline, cohort, b=100, seed=seed)
        counts["placebo"] += p.p_value >= 0.05 and abs(p.new_effect) <= 1.0
        s = refute_subset(pipeline, cohort, fraction=0.8, b=100, seed=seed)
        counts["subset"] += (
            s.p_value >= 0.05 and abs(s.new_effect - s.original_effect) <= 1.5
        )
        r = refute_random_common_cause(pipeline, cohort, b=100, seed=seed)
        counts["random_cause"] += (
            r.p_value >= 0.05 and abs(r.new_effect - r.original_effect) <= 1.5
        )
        u = refute_unobserved_common_cause(
            pipeline, cohort, strengths=[(0.0, 5.0)], seed=seed
        )
        counts["unobserved"] += abs(u.new_effect[0] - u.original_effect) <= 1.0
    for method, hits in counts.items():
        assert hits >= 9, f"{method}: {hits}/10"
    _report(
        "criterion 5 (refutation on valid synthetic data)",
        ", ".join(f"{m}={h}/10" for m, h in counts.items()),
        time.perf_counter() - start,
        600.0,
    )


@dataclasses.dataclass(frozen=True)
class _BrokenPipeline:
    value: float
    treatment: str = "T"
    outcome: str = "Y"

    def estimate(self, cohort, extra_features=()):
        return self.value


def test_criterion_6_refutation_negative_control():
    start = time.perf_counter()
    scm = _linear_refutation_scm()
    hits = 0
    for seed in range(10):
        cohort = sample(scm, 1_000, 50 + seed)
        res = refute_placebo(_BrokenPipeline(5.0), cohort, b=100, seed=seed)
        hits += res.p_value < 0.05 and res.verdict is Verdict.FAILED
    assert hits >= 9
    _report(
        "criterion 6 (negative control flags broken estimator)",
        f"{hits}/10 seeds with p < 0.05",
        time.perf_counter() - start,
        60.0,
    )


def test_criterion_7_invariant_suites(tmp_path):
    start = time.perf_counter()

    # d-separation vs path enumeration on 200 random graphs.
    rng = np.random.default_rng(77)
    for _ in range(200):
        dag = random_dag(rng, int(rng.integers(3, 7)), float(rng.uniform(0.1, 0.5)))
        nodes = list(dag.nodes)
        for _ in range(4):
            a, b = rng.choice(nodes, size=2, replace=False)
            rest = [n for n in nodes if n not in (a, b)]
            size = int(rng.integers(0, len(rest) + 1))
            z = set(rng.choice(rest, size=size, replace=False)) if size else set()
            assert d_separated(dag, a, b, z) == d_separated_by_paths(dag, a, b, z)

    # GES score decomposability and phase monotonicity.
    for trial in range(3):
        dag = random_dag(rng, 4, 0.5)
        scm = linear_scm_from_dag(dag, rng)
        cohort, _ = standardize(sample(scm, 4_000, trial))
        details = ges_details(cohort)
        score = GaussianBicScore(cohort.values)
        index = {n: i for i, n in enumerate(cohort.names)}
        from paqol.graphs import extend_to_dag

        extension = extend_to_dag(details.cpdag)
        total = score.total(extension, cohort.names)
        parts = sum(
            score.local(index[v], [index[p] for p in extension.parents(v)])
            for v in extension.nodes
        )
        assert abs(total - parts) <= 1e-9
        fw, bw = details.forward_scores, details.backward_scores
        assert all(b >= a - 1e-6 for a, b in zip(fw, fw[1:]))
        assert all(b >= a - 1e-6 for a, b in zip(bw, bw[1:]))

    # Outcome-scale equivariance and label-swap antisymmetry (exact).
    cohort = sample(_linear_refutation_scm(), 2_000, 7)
    learner = fit_t_learner(cohort, "T", "Y", ("C",))
    base_ate = ate(learner, cohort)
    doubled = cohort.replace_column("Y", 2.0 * cohort.column("Y"))
    assert ate(fit_t_learner(doubled, "T", "Y", ("C",)), doubled) == 2.0 * base_ate
    flipped = cohort.replace_column("T", 1.0 - cohort.column("T"))
    assert ate(fit_t_learner(flipped, "T", "Y", ("C",)), flipped) == -base_ate

    # Unit diagonal after standardization.
    wide = Cohort(
        tuple(VariableSchema(f"v{i}") for i in range(5)),
        np.random.default_rng(5).normal(3, 11, (300, 5)),
    )
    std, _ = standardize(wide)
    assert np.max(np.abs(np.diag(covariance_matrix(std)) - 1.0)) < 1e-12

    # min_child_samples structural audit.
    x = np.random.default_rng(6).standard_normal((2_000, 3))
    y = x @ np.array([1.0, -1.0, 2.0]) + np.random.default_rng(7).standard_normal(2_000)
    params = TreeParams()
    model = fit_boosted_trees(x, y, params)
    counts = leaf_sample_counts(model)
    assert counts and min(counts) >= params.min_child_samples

    # Byte-identical reruns under a fixed seed (full CLI pipeline twice).
    out = tmp_path / "repro"
    cfg = tmp_path / "cfg.json"
    cfg.write_text(
        json.dumps(
            {
                "seed": 99,
                "out_dir": str(out),
                "simulate": {"template": True, "n": 800},
                "refutation": {"replicates": 5},
            }
        )
    )
    runner = CliRunner()
    assert runner.invoke(main, ["pipeline", "--config", str(cfg)]).exit_code == 0
    watched = ["graph.dot", "estimate.json", "refute.json", "report.md", "truth.json"]
    first = {name: (out / name).read_bytes() for name in watched}
    assert runner.invoke(main, ["pipeline", "--config", str(cfg)]).exit_code == 0
    for name in watched:
        assert (out / name).read_bytes() == first[name], name

    _report(
        "criterion 7 (invariant suites)",
        "d-sep oracle 200 graphs, GES monotone+decomposable, exact equivariances, "
        "unit diagonal, leaf audit, byte-identical rerun",
        time.perf_counter() - start,
        300.0,
    )


def test_criterion_8_report_fidelity(tmp_path):
    start = time.perf_counter()
    out = tmp_path / "run"
    out.mkdir()
    estimate = {
        "timepoint": "GestWeek15",
        "treatment": "active",
        "outcome": "qol_physical",
        "transition": [0, 1],
        "ate": 10.08,
        "nde": 6.0,
        "nie": 4.08,
        "nie_reverse": -4.08,
        "te": 10.08,
        "control_mean": 61.0,
    }
    refutation = {
        "timepoint": "GestWeek15",
        "aggregate_verdict": "Passed",
        "results": [
            {
                "method": "PlaceboTreatment",
                "original_effect": 10.08,
                "new_effect": 0.48,
                "p_value": 0.38,
                "replicates": 100,
                "verdict": "Passed",
                "seed": 0,
            },
            {
                "method": "AddRandomCommonCause",
                "original_effect": 10.08,
                "new_effect": 9.88,
                "p_value": 0.38,
                "replicates": 100,
                "verdict": "Passed",
                "seed": 0,
            },
            {
                "method": "DataSubset",
                "original_effect": 10.08,
                "new_effect": 9.95,
                "p_value": 0.32,
                "replicates": 100,
                "verdict": "Passed",
                "seed": 0,
            },
            {
                "method": "UnobservedCommonCause",
                "original_effect": 10.08,
                "new_effect": [10.04],
                "p_value": None,
                "strengths": [[0.1, 1.0]],
                "replicates": 1,
                "verdict": "Passed",
                "seed": 0,
            },
        ],
    }
    (out / "estimate.json").write_text(json.dumps(estimate))
    (out / "refute.json").write_text(json.dumps(refutation))
    runner = CliRunner()
    assert runner.invoke(main, ["report", "--seed", "1", "--out", str(out)]).exit_code == 0
    report = (out / "report.md").read_text()
    assert "Placebo treatment | 10.08 | 0.48 | 0.38" in report
    assert "| Unobserved random cause | 10.08 | 10.04 | — |" in report
    _report(
        "criterion 8 (report fidelity)",
        "published week-15 row and em-dash cell rendered",
        time.perf_counter() - start,
        10.0,
    )
