"""T-learner effect estimation and plug-in mediation estimators.

One boosted-tree model is fitted per treatment arm. The average treatment
effect averages the per-row model contrast over the whole cohort. The
natural direct and indirect effects are plug-in estimates: the sums over the
mediator distribution are realized as empirical means over the treatment
arm that the conditioning distribution refers to. The total effect for the
x -> x' transition subtracts the reverse-transition indirect effect from the
direct effect.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .boosting import BoostedTreeModel, TreeParams, fit_boosted_trees, predict
from .data import Cohort
from .graphs import Dag, backdoor_set, mediators

__all__ = [
    "EstimationError",
    "TLearner",
    "MediationResult",
    "EstimationRun",
    "fit_t_learner",
    "ate",
    "nde",
    "nie",
    "total_effect",
    "mediation_effects",
    "estimate_effects",
]


class EstimationError(ValueError):
    """Contract violation while estimating effects."""


@dataclass(frozen=True)
class TLearner:
    """Per-arm outcome models over one shared feature set."""

    mu0: BoostedTreeModel
    mu1: BoostedTreeModel
    feature_names: tuple[str, ...]


@dataclass(frozen=True)
class MediationResult:
    """Effects for the (x, x') treatment transition, in outcome units.

    ``nie`` is the forward indirect effect for (x, x'); ``nie_reverse`` the
    (x', x) one actually subtracted in ``te``, kept so either total-effect
    convention can be reconstructed. ``ate`` comes from the covariate-only
    learner (or the do-operator, for oracles).
    """

    nde: float
    nie: float
    nie_reverse: float
    te: float
    ate: float
    transition: tuple[float, float]


def fit_t_learner(
    cohort: Cohort,
    treatment: str,
    outcome: str,
    features: Sequence[str],
    params: TreeParams = TreeParams(),
    seed: int = 0,
) -> TLearner:
    """Fit one model per treatment arm on the given feature columns."""
    features = tuple(features)
    if treatment in features or outcome in features:
        raise EstimationError("features must exclude the treatment and outcome columns")
    if cohort.variable(treatment).kind != "binary":
        raise EstimationError(f"treatment column {treatment!r} must be binary")
    t = cohort.column(treatment)
    y = cohort.column(outcome)
    if np.isnan(t).any():
        raise EstimationError("treatment column has missing values")
    if np.isnan(y).any():
        raise EstimationError("outcome column has missing values")
    x = cohort.columns(features)
    if np.isnan(x).any():
        raise EstimationError("feature columns have missing values")
    models = {}
    for arm in (0.0, 1.0):
        rows = t == arm
        if not rows.any():
            raise EstimationError(f"treatment arm {int(arm)} is empty")
        models[arm] = fit_boosted_trees(x[rows], y[rows], params, seed)
    return TLearner(mu0=models[0.0], mu1=models[1.0], feature_names=features)


def _arm_model(learner: TLearner, value: float) -> BoostedTreeModel:
    if value == 0.0:
        return learner.mu0
    if value == 1.0:
        return learner.mu1
    raise EstimationError(f"treatment value must be 0 or 1, got {value}")


def ate(learner: TLearner, cohort: Cohort) -> float:
    """Mean over all rows of mu1(features) - mu0(features)."""
    x = cohort.columns(learner.feature_names)
    if np.isnan(x).any():
        raise EstimationError("feature columns have missing values")
    return float(np.mean(predict(learner.mu1, x) - predict(learner.mu0, x)))


def nde(learner: TLearner, cohort: Cohort, x: float, x_prime: float) -> float:
    """Natural direct effect of shifting treatment x -> x'.

    Plug-in: average, over rows with treatment = x, of
    mu_{x'}(mediators, covariates) - mu_x(mediators, covariates); the
    empirical mean over that arm realizes the sum against P(mediators | x).
    """
    _check_transition(x, x_prime)
    t = cohort.column(cohort.treatment_name())
    rows = t == float(x)
    if not rows.any():
        raise EstimationError(f"no rows with treatment = {x}")
    feats = cohort.columns(learner.feature_names)[rows]
    return float(
        np.mean(predict(_arm_model(learner, x_prime), feats) - predict(_arm_model(learner, x), feats))
    )


def nie(learner: TLearner, cohort: Cohort, x: float, x_prime: float) -> float:
    """Natural indirect effect: the outcome model for arm x averaged over the
    mediator rows of arm x' minus its average over the rows of arm x."""
    _check_transition(x, x_prime)
    t = cohort.column(cohort.treatment_name())
    model = _arm_model(learner, x)
    means = {}
    for arm in (x, x_prime):
        rows = t == float(arm)
        if not rows.any():
            raise EstimationError(f"no rows with treatment = {arm}")
        means[arm] = float(np.mean(predict(model, cohort.columns(learner.feature_names)[rows])))
    return means[x_prime] - means[x]


def total_effect(nde_value: float, nie_reverse_value: float) -> float:
    """TE_{x,x'} = NDE_{x,x'} - NIE_{x',x} (reverse-transition indirect effect)."""
    return nde_value - nie_reverse_value


def _check_transition(x: float, x_prime: float) -> None:
    if float(x) not in (0.0, 1.0) or float(x_prime) not in (0.0, 1.0):
        raise EstimationError("transition values must be 0 or 1")
    if float(x) == float(x_prime):
        raise EstimationError("transition must change the treatment value")


def mediation_effects(
    learner: TLearner,
    cohort: Cohort,
    x: float,
    x_prime: float,
    ate_value: float,
) -> MediationResult:
    """All plug-in mediation quantities for the (x, x') transition."""
    nde_v = nde(learner, cohort, x, x_prime)
    nie_v = nie(learner, cohort, x, x_prime)
    nie_r = nie(learner, cohort, x_prime, x)
    return MediationResult(
        nde=nde_v,
        nie=nie_v,
        nie_reverse=nie_r,
        te=total_effect(nde_v, nie_r),
        ate=ate_value,
        transition=(float(x), float(x_prime)),
    )


@dataclass(frozen=True)
class EstimationRun:
    """Everything the pipeline reports about one estimation."""

    result: MediationResult
    treatment: str
    outcome: str
    backdoor: tuple[str, ...]
    backdoor_verified: bool
    mediator_names: tuple[str, ...]
    control_mean: float
    params: TreeParams
    seed: int


def estimate_effects(
    cohort: Cohort,
    dag: Dag,
    params: TreeParams = TreeParams(),
    x: float = 0.0,
    x_prime: float = 1.0,
    seed: int = 0,
) -> EstimationRun:
    """Identify (backdoor set, mediators) from the DAG, fit the two
    T-learners, and assemble the effect report.

    The ATE learner adjusts for the backdoor set only; the mediation learner
    sees mediators plus the backdoor set, keeping its cell means
    confounding-adjusted.
    """
    treatment = cohort.treatment_name()
    outcome = cohort.outcome_name()
    for node in (treatment, outcome):
        if not dag.has_node(node):
            raise EstimationError(f"graph is missing the {node!r} column")
    bd = backdoor_set(dag, treatment, outcome)
    med_names = mediators(dag, treatment, outcome)
    for name in sorted(bd.variables | med_names):
        cohort.index(name)  # identification must name real columns

    ate_features = tuple(sorted(bd.variables))
    med_features = tuple(sorted(set(med_names) | bd.variables))
    ate_learner = fit_t_learner(cohort, treatment, outcome, ate_features, params, seed)
    ate_value = ate(ate_learner, cohort)
    if med_features == ate_features:
        med_learner = ate_learner
    else:
        med_learner = fit_t_learner(cohort, treatment, outcome, med_features, params, seed)
    result = mediation_effects(med_learner, cohort, x, x_prime, ate_value)

    t_col = cohort.column(treatment)
    control_rows = t_col == float(x)
    control_mean = float(np.mean(cohort.column(outcome)[control_rows]))
    return EstimationRun(
        result=result,
        treatment=treatment,
        outcome=outcome,
        backdoor=ate_features,
        backdoor_verified=bd.verified,
        mediator_names=tuple(sorted(med_names)),
        control_mean=control_mean,
        params=params,
        seed=seed,
    )
