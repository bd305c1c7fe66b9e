"""Structural-causal-model simulator: synthetic cohorts with known ground
truth, exact effect oracles, and the built-in study template.

Linear ground-truth effects come from the path-coefficient sum; nonlinear
ones from Monte-Carlo evaluation of the do-operator. ``DiscreteScm`` gives
exact enumeration of natural direct/indirect and total effects for finite
treatment/mediator supports, for validating the plug-in estimators.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Sequence, Union

import numpy as np
from scipy.special import expit

from .data import Cohort, Timepoint, VariableSchema
from .estimation import MediationResult
from .graphs import Dag

__all__ = [
    "ScmError",
    "LinearGaussian",
    "BernoulliLogistic",
    "CategoricalTable",
    "Scm",
    "DiscreteNode",
    "DiscreteScm",
    "discrete_node",
    "sample_discrete",
    "TrueEffect",
    "sample",
    "intervene",
    "scm_dag",
    "true_ate",
    "linear_mediation_truth",
    "oracle_mediation",
    "study_template",
    "scm_to_dict",
    "scm_from_dict",
    "load_scm",
    "save_scm",
]

_PROB_TOL = 1e-12


class ScmError(ValueError):
    """Malformed structural model or invalid query."""


@dataclass(frozen=True)
class LinearGaussian:
    """value = intercept + coefficients . parents + N(0, noise_sd), then
    optionally clipped to ``clip`` (clipping is a sampling-time guard; exact
    effect computations treat the mechanism as linear)."""

    parents: tuple[str, ...]
    coefficients: tuple[float, ...]
    intercept: float
    noise_sd: float
    clip: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        if len(self.parents) != len(self.coefficients):
            raise ScmError("coefficient count must match parent count")
        if self.noise_sd < 0:
            raise ScmError("noise_sd must be >= 0")


@dataclass(frozen=True)
class BernoulliLogistic:
    """P(value = 1) = sigmoid(intercept + coefficients . parents)."""

    parents: tuple[str, ...]
    coefficients: tuple[float, ...]
    intercept: float

    def __post_init__(self) -> None:
        if len(self.parents) != len(self.coefficients):
            raise ScmError("coefficient count must match parent count")


@dataclass(frozen=True)
class CategoricalTable:
    """Full conditional probability table over discrete parent configurations."""

    parents: tuple[str, ...]
    levels: tuple[float, ...]
    rows: tuple[tuple[tuple[float, ...], tuple[float, ...]], ...]

    def __post_init__(self) -> None:
        for config, probs in self.rows:
            if len(config) != len(self.parents):
                raise ScmError("CPT row config length must match parent count")
            if len(probs) != len(self.levels):
                raise ScmError("CPT row must give one probability per level")
            if abs(sum(probs) - 1.0) > _PROB_TOL:
                raise ScmError(f"CPT row for {config} sums to {sum(probs)}, not 1")
            if any(p < 0 for p in probs):
                raise ScmError("negative probability")

    def prob_row(self, config: tuple[float, ...]) -> tuple[float, ...]:
        for c, probs in self.rows:
            if c == config:
                return probs
        raise ScmError(f"no CPT row for parent configuration {config}")


Mechanism = Union[LinearGaussian, BernoulliLogistic, CategoricalTable]


@dataclass
class Scm:
    """Nodes in topological order with one generating mechanism each."""

    nodes: tuple[str, ...]
    mechanisms: dict[str, Mechanism]
    roles: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.nodes = tuple(self.nodes)
        seen: set[str] = set()
        for node in self.nodes:
            if node not in self.mechanisms:
                raise ScmError(f"node {node!r} has no mechanism")
            for parent in self.mechanisms[node].parents:
                if parent not in seen:
                    raise ScmError(
                        f"node {node!r} references {parent!r} before it is defined"
                    )
            seen.add(node)
        if set(self.mechanisms) != seen:
            raise ScmError("mechanisms given for unknown nodes")

    def kind_of(self, node: str) -> str:
        mech = self.mechanisms[node]
        if isinstance(mech, LinearGaussian):
            return "continuous"
        if isinstance(mech, BernoulliLogistic):
            return "binary"
        return "binary" if set(mech.levels) <= {0.0, 1.0} else "categorical"

    def parents(self, node: str) -> tuple[str, ...]:
        return self.mechanisms[node].parents

    def children(self, node: str) -> tuple[str, ...]:
        return tuple(c for c in self.nodes if node in self.mechanisms[c].parents)

    def schema(self) -> tuple[VariableSchema, ...]:
        out = []
        for node in self.nodes:
            kind = self.kind_of(node)
            levels = None
            mech = self.mechanisms[node]
            if kind == "categorical" and isinstance(mech, CategoricalTable):
                levels = mech.levels
            out.append(
                VariableSchema(
                    name=node,
                    kind=kind,
                    role=self.roles.get(node, "covariate"),
                    levels=levels,
                )
            )
        return tuple(out)


def scm_dag(scm: Scm) -> Dag:
    edges = [
        (parent, node) for node in scm.nodes for parent in scm.parents(node)
    ]
    return Dag(scm.nodes, edges)


def sample(scm: Scm, n: int, seed, timepoint: Timepoint = Timepoint.GEST_WEEK_15) -> Cohort:
    """Ancestral sampling in declared node order; deterministic given seed."""
    if n < 1:
        raise ScmError("n must be >= 1")
    rng = np.random.default_rng(seed)
    columns: dict[str, np.ndarray] = {}
    for node in scm.nodes:
        mech = scm.mechanisms[node]
        if isinstance(mech, LinearGaussian):
            val = np.full(n, mech.intercept)
            for parent, coef in zip(mech.parents, mech.coefficients):
                val = val + coef * columns[parent]
            if mech.noise_sd > 0:
                val = val + mech.noise_sd * rng.standard_normal(n)
            else:
                rng.standard_normal(n)  # keep the stream aligned across mechanisms
            if mech.clip is not None:
                val = np.clip(val, mech.clip[0], mech.clip[1])
        elif isinstance(mech, BernoulliLogistic):
            logit = np.full(n, mech.intercept)
            for parent, coef in zip(mech.parents, mech.coefficients):
                logit = logit + coef * columns[parent]
            val = (rng.random(n) < expit(logit)).astype(np.float64)
        else:
            probs = np.empty((n, len(mech.levels)))
            configs = np.column_stack([columns[p] for p in mech.parents]) if mech.parents else None
            if configs is None:
                probs[:] = mech.prob_row(())
            else:
                lookup = {c: p for c, p in mech.rows}
                for i in range(n):
                    key = tuple(float(v) for v in configs[i])
                    if key not in lookup:
                        raise ScmError(f"no CPT row for parent configuration {key}")
                    probs[i] = lookup[key]
            draws = rng.random(n)
            cdf = np.cumsum(probs, axis=1)
            idx = (draws[:, None] > cdf).sum(axis=1)
            val = np.asarray(mech.levels, dtype=np.float64)[idx]
        columns[node] = val
    values = np.column_stack([columns[node] for node in scm.nodes])
    return Cohort(scm.schema(), values, timepoint)


def intervene(scm: Scm, assignments: Mapping[str, float]) -> Scm:
    """do(): replace each assigned node's mechanism with the constant value."""
    mechanisms = dict(scm.mechanisms)
    for node, value in assignments.items():
        if node not in mechanisms:
            raise ScmError(f"unknown node {node!r}")
        mechanisms[node] = LinearGaussian((), (), float(value), 0.0)
    return Scm(scm.nodes, mechanisms, dict(scm.roles))


class TrueEffect(NamedTuple):
    value: float
    standard_error: float
    method: str


def _on_causal_paths(scm: Scm, treatment: str, outcome: str) -> set[str]:
    """Nodes strictly after treatment lying on a directed path to the outcome."""
    dag = scm_dag(scm)
    relevant = set(dag.descendants(treatment) & (dag.ancestors(outcome) | {outcome}))
    return relevant if outcome in dag.descendants(treatment) else set()


def true_ate(
    scm: Scm,
    treatment: str,
    outcome: str,
    mc_samples: int = 400_000,
    seed: int = 0,
) -> TrueEffect:
    """Ground-truth average treatment effect of a binary treatment.

    Exact path-coefficient sum when every node on a causal path carries a
    linear mechanism; otherwise Monte-Carlo contrast of do(1) vs do(0) with
    its standard error.
    """
    for node in (treatment, outcome):
        if node not in scm.mechanisms:
            raise ScmError(f"unknown node {node!r}")
    if scm.kind_of(treatment) != "binary":
        raise ScmError(f"treatment {treatment!r} is not binary")
    relevant = _on_causal_paths(scm, treatment, outcome)
    if not relevant:
        return TrueEffect(0.0, 0.0, "path_sum")
    if all(isinstance(scm.mechanisms[v], LinearGaussian) for v in relevant):
        effect_on_outcome = {outcome: 1.0}
        for node in reversed(scm.nodes):
            if node not in relevant and node != treatment:
                continue
            if node == outcome:
                continue
            acc = 0.0
            for child in scm.children(node):
                if child in relevant:
                    mech = scm.mechanisms[child]
                    coef = mech.coefficients[mech.parents.index(node)]
                    acc += coef * effect_on_outcome[child]
            effect_on_outcome[node] = acc
        return TrueEffect(effect_on_outcome[treatment], 0.0, "path_sum")

    y1 = sample(intervene(scm, {treatment: 1.0}), mc_samples, seed).column(outcome)
    y0 = sample(intervene(scm, {treatment: 0.0}), mc_samples, seed + 1).column(outcome)
    value = float(y1.mean() - y0.mean())
    se = math.sqrt(y1.var(ddof=1) / mc_samples + y0.var(ddof=1) / mc_samples)
    return TrueEffect(value, se, "monte_carlo")


def linear_mediation_truth(scm: Scm, treatment: str, outcome: str) -> dict[str, float]:
    """Exact NDE/NIE/TE for an all-linear outcome: the direct coefficient and
    the mediated path sum. Raises unless every causal-path node is linear."""
    relevant = _on_causal_paths(scm, treatment, outcome)
    if relevant and not all(isinstance(scm.mechanisms[v], LinearGaussian) for v in relevant):
        raise ScmError("mediation ground truth requires linear causal paths")
    total = true_ate(scm, treatment, outcome).value
    out_mech = scm.mechanisms[outcome]
    direct = 0.0
    if treatment in out_mech.parents:
        direct = out_mech.coefficients[out_mech.parents.index(treatment)]
    return {"ate": total, "nde": direct, "nie": total - direct, "te": total}


# ---------------------------------------------------------------------------
# Discrete oracle


@dataclass(frozen=True)
class DiscreteNode:
    name: str
    levels: tuple[float, ...]
    parents: tuple[str, ...]
    cpt: CategoricalTable

    def __post_init__(self) -> None:
        if self.cpt.parents != self.parents or self.cpt.levels != self.levels:
            raise ScmError(f"CPT of {self.name!r} disagrees with node declaration")


def discrete_node(
    name: str,
    levels: Sequence[float],
    parents: Sequence[str] = (),
    rows: Mapping[tuple[float, ...], Sequence[float]] | Sequence[float] | None = None,
) -> DiscreteNode:
    """Convenience constructor; ``rows`` maps parent configs to probabilities
    (or is a single probability row for a root node)."""
    levels = tuple(float(v) for v in levels)
    parents = tuple(parents)
    if rows is None:
        raise ScmError(f"node {name!r} needs probabilities")
    if not parents:
        table = (((), tuple(float(p) for p in rows)),)
    else:
        table = tuple(
            (tuple(float(v) for v in config), tuple(float(p) for p in probs))
            for config, probs in rows.items()
        )
    return DiscreteNode(name, levels, parents, CategoricalTable(parents, levels, table))


@dataclass
class DiscreteScm:
    """Binary treatment, discrete mediators, and an outcome defined by its
    conditional mean per (treatment, mediators) cell. Treatment is a root;
    mediators may depend on the treatment and on earlier mediators."""

    treatment: DiscreteNode
    mediators: tuple[DiscreteNode, ...]
    outcome_name: str
    outcome_mean: dict[tuple[float, ...], float]
    outcome_noise_sd: float = 1.0

    def __post_init__(self) -> None:
        if tuple(self.treatment.levels) != (0.0, 1.0):
            raise ScmError("treatment must be binary with levels (0, 1)")
        if self.treatment.parents:
            raise ScmError("treatment must be a root node")
        known = {self.treatment.name}
        for node in self.mediators:
            for parent in node.parents:
                if parent not in known:
                    raise ScmError(f"mediator {node.name!r} references unknown parent {parent!r}")
            known.add(node.name)
        for config in self._cells():
            if config not in self.outcome_mean:
                raise ScmError(f"outcome mean missing for cell {config}")

    def _cells(self) -> Iterable[tuple[float, ...]]:
        spaces = [self.treatment.levels] + [m.levels for m in self.mediators]
        return (tuple(c) for c in product(*spaces))

    def mediator_configs(self) -> list[tuple[float, ...]]:
        return [tuple(c) for c in product(*[m.levels for m in self.mediators])]

    def config_probability(self, z: tuple[float, ...], x: float) -> float:
        """P(mediators = z | treatment = x) by chaining the CPTs."""
        values = {self.treatment.name: float(x)}
        prob = 1.0
        for node, value in zip(self.mediators, z):
            parent_vals = tuple(values[p] for p in node.parents)
            probs = node.cpt.prob_row(parent_vals)
            prob *= probs[node.levels.index(value)]
            values[node.name] = value
        return prob

    def mean_outcome(self, x: float, z: tuple[float, ...]) -> float:
        return self.outcome_mean[(float(x), *z)]


def oracle_mediation(dscm: DiscreteScm, x: float, x_prime: float) -> MediationResult:
    """Exact enumeration of the natural direct/indirect effects and the total
    effect for the x -> x' transition, with the do-operator contrast stored in
    ``ate`` for cross-validation."""
    x, x_prime = float(x), float(x_prime)
    configs = dscm.mediator_configs()

    def p_given(value: float) -> list[float]:
        return [dscm.config_probability(z, value) for z in configs]

    p_x = p_given(x)
    p_xp = p_given(x_prime)
    nde = sum(
        (dscm.mean_outcome(x_prime, z) - dscm.mean_outcome(x, z)) * w
        for z, w in zip(configs, p_x)
    )
    nie = sum(
        dscm.mean_outcome(x, z) * (wp - w)
        for z, w, wp in zip(configs, p_x, p_xp)
    )
    nie_reverse = sum(
        dscm.mean_outcome(x_prime, z) * (w - wp)
        for z, w, wp in zip(configs, p_x, p_xp)
    )
    te = nde - nie_reverse
    do_contrast = sum(
        dscm.mean_outcome(x_prime, z) * wp - dscm.mean_outcome(x, z) * w
        for z, w, wp in zip(configs, p_x, p_xp)
    )
    return MediationResult(
        nde=nde,
        nie=nie,
        nie_reverse=nie_reverse,
        te=te,
        ate=do_contrast,
        transition=(x, x_prime),
    )


def sample_discrete(
    dscm: DiscreteScm, n: int, seed, timepoint: Timepoint = Timepoint.GEST_WEEK_15
) -> Cohort:
    """Sample (treatment, mediators, outcome) rows from the discrete model."""
    if n < 1:
        raise ScmError("n must be >= 1")
    rng = np.random.default_rng(seed)
    nodes = [dscm.treatment, *dscm.mediators]
    columns: dict[str, np.ndarray] = {}
    for node in nodes:
        draws = rng.random(n)
        values = np.empty(n)
        if not node.parents:
            probs = np.asarray(node.cpt.prob_row(()))
            cdf = np.cumsum(probs)
            values = np.asarray(node.levels)[np.minimum((draws[:, None] > cdf[None, :]).sum(axis=1), len(node.levels) - 1)]
        else:
            parent_cols = np.column_stack([columns[p] for p in node.parents])
            for i in range(n):
                probs = node.cpt.prob_row(tuple(float(v) for v in parent_cols[i]))
                cdf = np.cumsum(probs)
                values[i] = node.levels[min(int((draws[i] > cdf).sum()), len(node.levels) - 1)]
        columns[node.name] = values
    means = np.array(
        [
            dscm.mean_outcome(columns[dscm.treatment.name][i], tuple(columns[m.name][i] for m in dscm.mediators))
            for i in range(n)
        ]
    )
    y = means + dscm.outcome_noise_sd * rng.standard_normal(n)
    schema = [VariableSchema(dscm.treatment.name, "binary", "treatment")]
    for m in dscm.mediators:
        kind = "binary" if set(m.levels) <= {0.0, 1.0} else "categorical"
        schema.append(
            VariableSchema(m.name, kind, "mediator", levels=m.levels if kind == "categorical" else None)
        )
    schema.append(VariableSchema(dscm.outcome_name, "continuous", "outcome"))
    values = np.column_stack([columns[dscm.treatment.name]] + [columns[m.name] for m in dscm.mediators] + [y])
    return Cohort(tuple(schema), values, timepoint)


# ---------------------------------------------------------------------------
# Study template

# Treated prevalence implied by the template's logistic treatment mechanism
# (measured at n = 4e5); frozen so marginal means can be matched analytically.
_TEMPLATE_P_ACTIVE = 0.4635


def study_template(effect_overrides: Mapping[str, float] | None = None) -> Scm:
    """The built-in study SCM: binary activity treatment, three mediators
    (steps, average MET, depression score), three covariates feeding both the
    treatment and the outcomes, and two 0-100 outcome scores.

    Default totals: 7.3 on the physical score and 3.4 on the psychological
    score. ``effect_overrides`` maps "parent->child" edge names to replacement
    coefficients.
    """
    p_active = _TEMPLATE_P_ACTIVE
    mechanisms: dict[str, Mechanism] = {
        "age": LinearGaussian((), (), 29.3, 4.6),
        "bmi": LinearGaussian((), (), 30.69, 4.74),
        "children": LinearGaussian((), (), 1.2, 1.6),
        "work": BernoulliLogistic((), (), 1.337),
        "relationship": BernoulliLogistic((), (), 3.84),
        "active": BernoulliLogistic(
            ("children", "work", "relationship"), (-0.15, 0.8, 0.5), -1.10
        ),
        "steps": LinearGaussian(("active",), (2500.0,), 7000.0, 2500.0),
        "average_met": LinearGaussian(("active",), (0.15,), 1.40, 0.20),
        "epds": LinearGaussian(("active",), (-1.4,), 6.1 + 1.4 * p_active, 4.1),
        "qol_physical": LinearGaussian(
            ("active", "steps", "average_met", "epds", "children", "work", "relationship"),
            (4.0, 0.0008, 4.0, -0.5, -1.0, 2.0, 3.0),
            50.0,
            8.0,
            clip=(0.0, 100.0),
        ),
        "qol_psychological": LinearGaussian(
            ("active", "steps", "average_met", "epds", "children", "work", "relationship"),
            (1.2, 0.0002, 2.0, -1.0, -0.5, 1.5, 2.5),
            58.0,
            8.0,
            clip=(0.0, 100.0),
        ),
    }
    roles = {
        "age": "auxiliary",
        "bmi": "auxiliary",
        "children": "covariate",
        "work": "covariate",
        "relationship": "covariate",
        "active": "treatment",
        "steps": "mediator",
        "average_met": "mediator",
        "epds": "mediator",
        "qol_physical": "outcome",
        "qol_psychological": "auxiliary",
    }
    nodes = (
        "age",
        "bmi",
        "children",
        "work",
        "relationship",
        "active",
        "steps",
        "average_met",
        "epds",
        "qol_physical",
        "qol_psychological",
    )
    if effect_overrides:
        for edge, coef in effect_overrides.items():
            try:
                parent, child = edge.split("->")
            except ValueError:
                raise ScmError(f"override key {edge!r} is not 'parent->child'") from None
            parent, child = parent.strip(), child.strip()
            mech = mechanisms.get(child)
            if mech is None or parent not in mech.parents:
                raise ScmError(f"override names unknown edge {parent!r} -> {child!r}")
            coefs = list(mech.coefficients)
            coefs[mech.parents.index(parent)] = float(coef)
            if isinstance(mech, LinearGaussian):
                mechanisms[child] = LinearGaussian(
                    mech.parents, tuple(coefs), mech.intercept, mech.noise_sd, mech.clip
                )
            else:
                mechanisms[child] = BernoulliLogistic(mech.parents, tuple(coefs), mech.intercept)
    return Scm(nodes, mechanisms, roles)


# ---------------------------------------------------------------------------
# JSON round trip


def scm_to_dict(scm: Scm) -> dict:
    nodes = []
    for name in scm.nodes:
        mech = scm.mechanisms[name]
        entry: dict = {"name": name, "role": scm.roles.get(name, "covariate")}
        if isinstance(mech, LinearGaussian):
            entry.update(
                mechanism="linear_gaussian",
                parents=list(mech.parents),
                coefficients=list(mech.coefficients),
                intercept=mech.intercept,
                noise_sd=mech.noise_sd,
            )
            if mech.clip is not None:
                entry["clip"] = list(mech.clip)
        elif isinstance(mech, BernoulliLogistic):
            entry.update(
                mechanism="bernoulli_logistic",
                parents=list(mech.parents),
                coefficients=list(mech.coefficients),
                intercept=mech.intercept,
            )
        else:
            entry.update(
                mechanism="categorical",
                parents=list(mech.parents),
                levels=list(mech.levels),
                rows=[[list(c), list(p)] for c, p in mech.rows],
            )
        nodes.append(entry)
    return {"nodes": nodes}


def scm_from_dict(payload: Mapping) -> Scm:
    names = []
    mechanisms: dict[str, Mechanism] = {}
    roles: dict[str, str] = {}
    for entry in payload["nodes"]:
        name = entry["name"]
        names.append(name)
        roles[name] = entry.get("role", "covariate")
        kind = entry["mechanism"]
        parents = tuple(entry.get("parents", ()))
        if kind == "linear_gaussian":
            clip = entry.get("clip")
            mechanisms[name] = LinearGaussian(
                parents,
                tuple(entry["coefficients"]),
                float(entry["intercept"]),
                float(entry["noise_sd"]),
                tuple(clip) if clip is not None else None,
            )
        elif kind == "bernoulli_logistic":
            mechanisms[name] = BernoulliLogistic(
                parents, tuple(entry["coefficients"]), float(entry["intercept"])
            )
        elif kind == "categorical":
            mechanisms[name] = CategoricalTable(
                parents,
                tuple(entry["levels"]),
                tuple((tuple(c), tuple(p)) for c, p in entry["rows"]),
            )
        else:
            raise ScmError(f"unknown mechanism kind {kind!r}")
    return Scm(tuple(names), mechanisms, roles)


def load_scm(path: str | Path) -> Scm:
    return scm_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def save_scm(scm: Scm, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scm_to_dict(scm), indent=2, sort_keys=True) + "\n", encoding="utf-8")
