"""Four refutation analyses over a fitted estimation pipeline.

Each refuter perturbs the data (or the adjustment set), re-estimates the
effect, and summarizes the replicate distribution. For the placebo test the
re-estimates should collapse toward zero; for subset and random-common-cause
they should stay at the original value; the unobserved-common-cause probe
reports per-strength deviations and no p-value. A p-value below 0.05 fails
the test.

Replicates derive their RNG from (seed, replicate index), so results do not
depend on execution order.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np
from scipy.stats import norm

from .boosting import TreeParams
from .data import Cohort, VariableSchema
from .estimation import ate, fit_t_learner

__all__ = [
    "RefutationError",
    "RefutationMethod",
    "Verdict",
    "RefutationResult",
    "AtePipeline",
    "refute_placebo",
    "refute_subset",
    "refute_random_common_cause",
    "refute_unobserved_common_cause",
    "run_refuters",
    "aggregate_verdict",
]

P_FAIL_THRESHOLD = 0.05
_MAX_REDRAWS = 10
_RCC_COLUMN = "random_cause_probe"

DEFAULT_STRENGTHS = ((0.0, 1.0), (0.02, 2.0))
DEFAULT_ROBUSTNESS_BOUND = 1.0


class RefutationError(ValueError):
    """Contract violation while refuting."""


class RefutationMethod(enum.Enum):
    PLACEBO_TREATMENT = "PlaceboTreatment"
    DATA_SUBSET = "DataSubset"
    ADD_RANDOM_COMMON_CAUSE = "AddRandomCommonCause"
    UNOBSERVED_COMMON_CAUSE = "UnobservedCommonCause"


class Verdict(enum.Enum):
    PASSED = "Passed"
    FAILED = "Failed"
    NOT_APPLICABLE = "NotApplicable"


@dataclass(frozen=True)
class RefutationResult:
    method: RefutationMethod
    original_effect: float
    new_effect: float | tuple[float, ...]
    p_value: float | None
    replicates: int
    verdict: Verdict
    seed: int
    strengths: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self) -> None:
        absent = self.p_value is None
        if absent != (self.method is RefutationMethod.UNOBSERVED_COMMON_CAUSE):
            raise RefutationError(
                "p_value must be absent exactly for the unobserved-common-cause method"
            )
        if self.p_value is not None and not 0.0 <= self.p_value <= 1.0:
            raise RefutationError(f"p-value {self.p_value} outside [0, 1]")


class EstimationPipeline(Protocol):
    treatment: str
    outcome: str

    def estimate(self, cohort: Cohort, extra_features: Sequence[str] = ()) -> float: ...


@dataclass(frozen=True)
class AtePipeline:
    """Refit-from-scratch T-learner ATE pipeline used by the refuters."""

    treatment: str
    outcome: str
    features: tuple[str, ...]
    params: TreeParams = TreeParams()
    seed: int = 0

    def estimate(self, cohort: Cohort, extra_features: Sequence[str] = ()) -> float:
        learner = fit_t_learner(
            cohort,
            self.treatment,
            self.outcome,
            self.features + tuple(extra_features),
            self.params,
            self.seed,
        )
        return ate(learner, cohort)


def _replicate_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


def _normal_tail_p(target: float, effects: np.ndarray) -> float:
    mean = float(effects.mean())
    sd = float(effects.std(ddof=1)) if effects.size > 1 else 0.0
    if sd == 0.0:
        return 1.0 if mean == target else 0.0
    return 2.0 * float(norm.sf(abs(target - mean) / sd))


def _p_verdict(p: float) -> Verdict:
    return Verdict.FAILED if p < P_FAIL_THRESHOLD else Verdict.PASSED


def refute_placebo(
    pipeline: EstimationPipeline, cohort: Cohort, b: int = 100, seed: int = 0
) -> RefutationResult:
    """Replace the treatment with independent Bernoulli draws (at the observed
    treated fraction) and test whether the re-estimates center on zero."""
    if b < 1:
        raise RefutationError("placebo refutation needs at least one replicate")
    original = pipeline.estimate(cohort)
    t = cohort.column(pipeline.treatment)
    p_hat = float(np.mean(t))
    effects = np.empty(b)
    for r in range(b):
        rng = _replicate_rng(seed, r)
        draws = _nondegenerate_bernoulli(rng, cohort.n_rows, p_hat)
        effects[r] = pipeline.estimate(cohort.replace_column(pipeline.treatment, draws))
    p = _normal_tail_p(0.0, effects)
    return RefutationResult(
        method=RefutationMethod.PLACEBO_TREATMENT,
        original_effect=original,
        new_effect=float(effects.mean()),
        p_value=p,
        replicates=b,
        verdict=_p_verdict(p),
        seed=seed,
    )


def _nondegenerate_bernoulli(rng: np.random.Generator, n: int, p_hat: float) -> np.ndarray:
    for _ in range(_MAX_REDRAWS):
        draws = (rng.random(n) < p_hat).astype(np.float64)
        if 0.0 < draws.mean() < 1.0:
            return draws
    raise RefutationError("placebo draws kept producing a single-arm treatment")


def refute_subset(
    pipeline: EstimationPipeline,
    cohort: Cohort,
    fraction: float = 0.8,
    b: int = 100,
    seed: int = 0,
) -> RefutationResult:
    """Re-estimate on random row subsets; the original effect should sit
    inside the replicate distribution."""
    if not 0.0 < fraction <= 1.0:
        raise RefutationError("fraction must be in (0, 1]")
    if b < 1:
        raise RefutationError("subset refutation needs at least one replicate")
    original = pipeline.estimate(cohort)
    n = cohort.n_rows
    size = max(1, math.floor(fraction * n))
    t = cohort.column(pipeline.treatment)
    effects = np.empty(b)
    for r in range(b):
        if size == n:
            effects[r] = pipeline.estimate(cohort)
            continue
        rng = _replicate_rng(seed, r)
        rows = _two_arm_subset(rng, t, n, size)
        effects[r] = pipeline.estimate(cohort.take_rows(rows))
    p = _normal_tail_p(original, effects)
    return RefutationResult(
        method=RefutationMethod.DATA_SUBSET,
        original_effect=original,
        new_effect=float(effects.mean()),
        p_value=p,
        replicates=b,
        verdict=_p_verdict(p),
        seed=seed,
    )


def _two_arm_subset(rng: np.random.Generator, t: np.ndarray, n: int, size: int) -> np.ndarray:
    for _ in range(_MAX_REDRAWS):
        rows = np.sort(rng.choice(n, size=size, replace=False))
        picked = t[rows]
        if 0.0 < picked.mean() < 1.0:
            return rows
    raise RefutationError("subsets kept losing one treatment arm entirely")


def refute_random_common_cause(
    pipeline: EstimationPipeline, cohort: Cohort, b: int = 100, seed: int = 0
) -> RefutationResult:
    """Append an independent standard-normal adjustment column per replicate;
    the effect should be unchanged."""
    if b < 1:
        raise RefutationError("random-common-cause refutation needs at least one replicate")
    original = pipeline.estimate(cohort)
    probe_var = VariableSchema(_RCC_COLUMN, "continuous", "covariate")
    effects = np.empty(b)
    for r in range(b):
        rng = _replicate_rng(seed, r)
        augmented = cohort.with_column(probe_var, rng.standard_normal(cohort.n_rows))
        effects[r] = pipeline.estimate(augmented, extra_features=(_RCC_COLUMN,))
    p = _normal_tail_p(original, effects)
    return RefutationResult(
        method=RefutationMethod.ADD_RANDOM_COMMON_CAUSE,
        original_effect=original,
        new_effect=float(effects.mean()),
        p_value=p,
        replicates=b,
        verdict=_p_verdict(p),
        seed=seed,
    )


def refute_unobserved_common_cause(
    pipeline: EstimationPipeline,
    cohort: Cohort,
    strengths: Sequence[tuple[float, float]] = DEFAULT_STRENGTHS,
    seed: int = 0,
    robustness_bound: float = DEFAULT_ROBUSTNESS_BOUND,
) -> RefutationResult:
    """Inject a synthetic latent confounder at each (kappa_t, kappa_y)
    strength: treatment flips toward sign(U) with probability
    kappa_t * |U| / max|U|, and kappa_y * U is added to the outcome. Reports
    per-strength re-estimates; passes when the largest deviation stays within
    ``robustness_bound``. No p-value is defined for this probe.
    """
    strengths = tuple((float(kt), float(ky)) for kt, ky in strengths)
    if not strengths:
        raise RefutationError("strength grid must be non-empty")
    for kt, _ in strengths:
        if not 0.0 <= kt < 1.0:
            raise RefutationError(f"kappa_t {kt} outside [0, 1)")
    original = pipeline.estimate(cohort)
    effects = []
    for g, (kt, ky) in enumerate(strengths):
        if kt == 0.0 and ky == 0.0:
            effects.append(original)
            continue
        rng = _replicate_rng(seed, g)
        u = rng.standard_normal(cohort.n_rows)
        modified = cohort
        if kt > 0.0:
            flip_p = kt * np.abs(u) / np.abs(u).max()
            toward = (u > 0).astype(np.float64)
            t = cohort.column(pipeline.treatment)
            t_new = np.where(rng.random(cohort.n_rows) < flip_p, toward, t)
            if not 0.0 < t_new.mean() < 1.0:
                raise RefutationError("confounder strength degenerated the treatment")
            modified = modified.replace_column(pipeline.treatment, t_new)
        if ky != 0.0:
            modified = modified.replace_column(
                pipeline.outcome, modified.column(pipeline.outcome) + ky * u
            )
        effects.append(pipeline.estimate(modified))
    deviation = max(abs(e - original) for e in effects)
    return RefutationResult(
        method=RefutationMethod.UNOBSERVED_COMMON_CAUSE,
        original_effect=original,
        new_effect=tuple(effects),
        p_value=None,
        replicates=len(strengths),
        verdict=Verdict.PASSED if deviation <= robustness_bound else Verdict.FAILED,
        seed=seed,
        strengths=strengths,
    )


def run_refuters(
    pipeline: EstimationPipeline,
    cohort: Cohort,
    methods: Sequence[RefutationMethod] = tuple(RefutationMethod),
    b: int = 100,
    seed: int = 0,
    subset_fraction: float = 0.8,
    strengths: Sequence[tuple[float, float]] = DEFAULT_STRENGTHS,
    robustness_bound: float = DEFAULT_ROBUSTNESS_BOUND,
) -> list[RefutationResult]:
    """Run the selected refuters with per-method derived seeds."""
    results = []
    for method in methods:
        method_seed = seed + 1000 * list(RefutationMethod).index(method)
        if method is RefutationMethod.PLACEBO_TREATMENT:
            results.append(refute_placebo(pipeline, cohort, b, method_seed))
        elif method is RefutationMethod.DATA_SUBSET:
            results.append(refute_subset(pipeline, cohort, subset_fraction, b, method_seed))
        elif method is RefutationMethod.ADD_RANDOM_COMMON_CAUSE:
            results.append(refute_random_common_cause(pipeline, cohort, b, method_seed))
        else:
            results.append(
                refute_unobserved_common_cause(
                    pipeline, cohort, strengths, method_seed, robustness_bound
                )
            )
    return results


def aggregate_verdict(results: Sequence[RefutationResult]) -> Verdict:
    return (
        Verdict.FAILED
        if any(r.verdict is Verdict.FAILED for r in results)
        else Verdict.PASSED
    )
