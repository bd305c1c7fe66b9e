"""Causal structure learning over cohort data.

Three algorithms share one partial-correlation engine:

* ``pc`` - order-stable PC: skeleton by Fisher-z conditional-independence
  tests with per-level batched removals, v-structure orientation from the
  recorded separating sets, then Meek closure.
* ``ges`` - two-phase greedy equivalence search (insert to a local optimum,
  then delete) scored by a decomposable Gaussian BIC.
* ``gies`` - the same search with per-node scores that skip samples in which
  the node was intervened on, and interventional edge orientation.

All searches are deterministic given column order; ties break lexicographically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.stats import norm

from .data import Cohort
from .graphs import Cpdag, Dag, cpdag_of_dag, d_separated, extend_to_dag, meek_orient

__all__ = [
    "DiscoveryError",
    "CiTestResult",
    "DiscoveryConfig",
    "FisherZTest",
    "fisher_z_test",
    "dsep_oracle_test",
    "PcResult",
    "pc",
    "pc_details",
    "GaussianBicScore",
    "GesResult",
    "ges",
    "ges_details",
    "gies",
    "gies_details",
]

_R_CLAMP = 1.0 - 1e-12


class DiscoveryError(ValueError):
    """Contract violation during structure learning."""


@dataclass(frozen=True)
class CiTestResult:
    statistic: float
    p_value: float
    conditioning_size: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_value <= 1.0:
            raise DiscoveryError(f"p-value {self.p_value} outside [0, 1]")


@dataclass(frozen=True)
class DiscoveryConfig:
    alpha: float = 0.05
    max_cond_size: int = 3
    bic_penalty: float = 1.0
    intervention_targets: tuple[frozenset[str], ...] = ()

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise DiscoveryError(f"alpha {self.alpha} outside (0, 1)")
        if self.bic_penalty <= 0.0:
            raise DiscoveryError("bic_penalty must be positive")
        if self.max_cond_size < 0:
            raise DiscoveryError("max_cond_size must be >= 0")
        object.__setattr__(
            self,
            "intervention_targets",
            tuple(frozenset(t) for t in self.intervention_targets),
        )


# ---------------------------------------------------------------------------
# Conditional-independence testing


class FisherZTest:
    """Fisher-z partial-correlation test backed by one precomputed
    correlation matrix.

    The partial correlation of columns i, j given s is read off the inverse
    of the correlation submatrix over {i, j} | s; the z statistic is
    0.5 * ln((1+r)/(1-r)) * sqrt(n - |s| - 3) with a two-sided normal tail.
    Perfect correlations are clamped at |r| = 1 - 1e-12.
    """

    def __init__(self, data: np.ndarray):
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 2:
            raise DiscoveryError("data must be 2-d")
        if np.isnan(data).any():
            raise DiscoveryError("CI testing requires a cohort without missing cells")
        if np.any(data.std(axis=0) == 0.0):
            raise DiscoveryError("constant column: correlation undefined")
        self.n = data.shape[0]
        self.corr = np.corrcoef(data, rowvar=False)

    def __call__(self, i: int, j: int, s: Sequence[int] = ()) -> CiTestResult:
        s = tuple(s)
        if i == j or i in s or j in s:
            raise DiscoveryError("test variables must be distinct from the conditioning set")
        if self.n <= len(s) + 3:
            raise DiscoveryError(
                f"sample size {self.n} too small for conditioning set of {len(s)}"
            )
        # Canonical variable order makes test(i,j|s) == test(j,i|s) exact.
        a, b = (i, j) if i < j else (j, i)
        if not s:
            r = float(self.corr[a, b])
        else:
            idx = [a, b, *sorted(s)]
            sub = self.corr[np.ix_(idx, idx)]
            try:
                prec = np.linalg.inv(sub)
            except np.linalg.LinAlgError:
                raise DiscoveryError(
                    f"singular correlation submatrix for ({i}, {j} | {sorted(s)})"
                ) from None
            r = -prec[0, 1] / math.sqrt(prec[0, 0] * prec[1, 1])
        r = min(max(r, -_R_CLAMP), _R_CLAMP)
        z = 0.5 * math.log((1.0 + r) / (1.0 - r)) * math.sqrt(self.n - len(s) - 3)
        p = 2.0 * float(norm.sf(abs(z)))
        return CiTestResult(statistic=z, p_value=p, conditioning_size=len(s))


def fisher_z_test(
    cohort: Cohort, i: str, j: str, s: Iterable[str] = ()
) -> CiTestResult:
    """One-shot Fisher-z test on named cohort columns (expects standardized,
    complete data)."""
    test = FisherZTest(cohort.values)
    return test(cohort.index(i), cohort.index(j), tuple(cohort.index(k) for k in s))


def dsep_oracle_test(dag: Dag, names: Sequence[str]) -> Callable[[int, int, Sequence[int]], CiTestResult]:
    """Perfect CI oracle: p = 1 when d-separated in ``dag``, else 0.

    Lets PC run against graphical ground truth instead of data.
    """
    names = tuple(names)

    def oracle(i: int, j: int, s: Sequence[int] = ()) -> CiTestResult:
        sep = d_separated(dag, names[i], names[j], [names[k] for k in s])
        return CiTestResult(0.0, 1.0 if sep else 0.0, len(s))

    return oracle


# ---------------------------------------------------------------------------
# PC


@dataclass(frozen=True)
class PcResult:
    cpdag: Cpdag
    separating_sets: dict[frozenset[str], tuple[str, ...]]
    n_tests: int


def pc(data: Cohort, cfg: DiscoveryConfig = DiscoveryConfig()) -> Cpdag:
    """Order-stable PC on a standardized, complete cohort."""
    return pc_details(data, cfg).cpdag


def pc_details(data: Cohort, cfg: DiscoveryConfig = DiscoveryConfig()) -> PcResult:
    test = FisherZTest(data.values)
    return pc_from_ci(data.names, test, cfg)


def pc_from_ci(
    names: Sequence[str],
    ci: Callable[[int, int, Sequence[int]], CiTestResult],
    cfg: DiscoveryConfig = DiscoveryConfig(),
) -> PcResult:
    """PC with a pluggable CI test (index-based); used both for data-driven
    runs and for oracle-based validation."""
    names = tuple(names)
    p = len(names)
    adjacency: dict[int, set[int]] = {i: set(range(p)) - {i} for i in range(p)}
    sepsets: dict[frozenset[int], frozenset[int]] = {}
    n_tests = 0

    level = 0
    while level <= cfg.max_cond_size:
        if all(len(adjacency[i]) - 1 < level for i in range(p)):
            break
        # Stable variant: adjacencies are frozen for the whole level and
        # removals applied in one batch at the end.
        frozen = {i: sorted(adjacency[i]) for i in range(p)}
        removals: list[tuple[int, int]] = []
        for i in range(p):
            for j in frozen[i]:
                if j < i:
                    continue
                done = False
                seen: set[frozenset[int]] = set()
                for side_i, side_j in ((i, j), (j, i)):
                    pool = [k for k in frozen[side_i] if k != side_j]
                    for s in combinations(pool, level):
                        key = frozenset(s)
                        if key in seen:
                            continue
                        seen.add(key)
                        n_tests += 1
                        if ci(i, j, s).p_value > cfg.alpha:
                            removals.append((i, j))
                            sepsets[frozenset((i, j))] = key
                            done = True
                            break
                    if done:
                        break
        for i, j in removals:
            adjacency[i].discard(j)
            adjacency[j].discard(i)
        level += 1

    undirected = {frozenset((names[i], names[j])) for i in range(p) for j in adjacency[i] if i < j}
    directed: set[tuple[str, str]] = set()

    def still_undirected(a: str, c: str) -> bool:
        return frozenset((a, c)) in undirected and (c, a) not in directed

    for i, j in sorted(tuple(sorted(pair)) for pair in sepsets):
        common = sorted(adjacency[i] & adjacency[j])
        for k in common:
            if k in sepsets[frozenset((i, j))]:
                continue
            for a in (names[i], names[j]):
                c = names[k]
                if still_undirected(a, c):
                    undirected.discard(frozenset((a, c)))
                    directed.add((a, c))

    skeleton = Cpdag(names, directed, undirected)
    cpdag = meek_orient(skeleton)
    named_sepsets = {}
    for pair, s in sepsets.items():
        i, j = sorted(pair)
        named_sepsets[frozenset((names[i], names[j]))] = tuple(sorted(names[k] for k in s))
    return PcResult(cpdag=cpdag, separating_sets=named_sepsets, n_tests=n_tests)


# ---------------------------------------------------------------------------
# Gaussian BIC scoring


class GaussianBicScore:
    """Decomposable Gaussian BIC: per-node score
    -(n/2) ln(residual variance) - penalty * (|parents| + 1) * ln(n) / 2.

    Residual variance is the MLE (divisor n) from regressing the node on its
    parents with intercept. ``node_masks`` restricts each node's score to a
    row subset (interventional scoring for GIES).
    """

    def __init__(
        self,
        data: np.ndarray,
        penalty: float = 1.0,
        node_masks: dict[int, np.ndarray] | None = None,
    ):
        data = np.asarray(data, dtype=np.float64)
        if np.isnan(data).any():
            raise DiscoveryError("scoring requires a cohort without missing cells")
        self._data = data
        self.penalty = penalty
        self._masks = node_masks or {}
        self._suffstats: dict[bytes, tuple[np.ndarray, int]] = {}
        self._cache: dict[tuple[int, frozenset[int]], float] = {}
        self.n_evals = 0

    def _stats_for(self, v: int) -> tuple[np.ndarray, int]:
        mask = self._masks.get(v)
        key = b"all" if mask is None else mask.tobytes()
        if key not in self._suffstats:
            rows = self._data if mask is None else self._data[mask]
            n = rows.shape[0]
            if n < 3:
                raise DiscoveryError(f"node {v}: too few usable rows ({n}) to score")
            centered = rows - rows.mean(axis=0)
            self._suffstats[key] = (centered.T @ centered / n, n)
        return self._suffstats[key]

    def local(self, v: int, parents: Iterable[int]) -> float:
        parents = frozenset(parents)
        key = (v, parents)
        if key in self._cache:
            return self._cache[key]
        cov, n = self._stats_for(v)
        ps = sorted(parents)
        if ps:
            spp = cov[np.ix_(ps, ps)]
            spv = cov[ps, v]
            try:
                beta = np.linalg.solve(spp, spv)
            except np.linalg.LinAlgError:
                raise DiscoveryError(f"collinear parents {ps} for node {v}") from None
            resvar = float(cov[v, v] - spv @ beta)
        else:
            resvar = float(cov[v, v])
        if not math.isfinite(resvar) or resvar <= 1e-12:
            raise DiscoveryError(f"degenerate residual variance for node {v} given {ps}")
        value = -(n / 2.0) * math.log(resvar) - self.penalty * (len(ps) + 1) * math.log(n) / 2.0
        self._cache[key] = value
        self.n_evals += 1
        return value

    def total(self, dag: Dag, names: Sequence[str]) -> float:
        index = {name: k for k, name in enumerate(names)}
        return sum(
            self.local(index[v], [index[q] for q in dag.parents(v)]) for v in dag.nodes
        )


# ---------------------------------------------------------------------------
# GES / GIES


@dataclass(frozen=True)
class GesResult:
    cpdag: Cpdag
    score: float
    forward_scores: tuple[float, ...]
    backward_scores: tuple[float, ...]


_PROGRESS_TOL = 1e-9


def ges(data: Cohort, cfg: DiscoveryConfig = DiscoveryConfig()) -> Cpdag:
    """Greedy equivalence search on a standardized, complete cohort."""
    return ges_details(data, cfg).cpdag


def ges_details(data: Cohort, cfg: DiscoveryConfig = DiscoveryConfig()) -> GesResult:
    score = GaussianBicScore(data.values, penalty=cfg.bic_penalty)
    return _ges_search(data.names, score, intervention_targets=())


def gies(
    data: Cohort,
    cfg: DiscoveryConfig = DiscoveryConfig(),
    regimes: np.ndarray | None = None,
) -> Cpdag:
    """Greedy interventional equivalence search.

    ``regimes[i]`` indexes ``cfg.intervention_targets`` for row i (-1 marks an
    observational row). With no intervention targets this is exactly ``ges``.
    """
    return gies_details(data, cfg, regimes).cpdag


def gies_details(
    data: Cohort,
    cfg: DiscoveryConfig = DiscoveryConfig(),
    regimes: np.ndarray | None = None,
) -> GesResult:
    if not cfg.intervention_targets:
        return ges_details(data, cfg)
    names = data.names
    for targets in cfg.intervention_targets:
        for node in targets:
            if node not in names:
                raise DiscoveryError(f"intervention target {node!r} is not a column")
    if regimes is None:
        raise DiscoveryError("interventional scoring needs a per-row regime array")
    regimes = np.asarray(regimes, dtype=np.int64)
    if regimes.shape != (data.n_rows,):
        raise DiscoveryError("regimes must have one entry per row")
    if regimes.max(initial=-1) >= len(cfg.intervention_targets) or regimes.min(initial=0) < -1:
        raise DiscoveryError("regime index out of range")

    node_masks: dict[int, np.ndarray] = {}
    for v, name in enumerate(names):
        hit = np.zeros(data.n_rows, dtype=bool)
        for k, targets in enumerate(cfg.intervention_targets):
            if name in targets:
                hit |= regimes == k
        if hit.any():
            node_masks[v] = ~hit
    score = GaussianBicScore(data.values, penalty=cfg.bic_penalty, node_masks=node_masks)
    return _ges_search(names, score, intervention_targets=cfg.intervention_targets)


def _subsets_by_size(pool: Sequence[str]) -> Iterable[tuple[str, ...]]:
    pool = sorted(pool)
    for size in range(len(pool) + 1):
        yield from combinations(pool, size)


def _is_clique(state: Cpdag, group: Iterable[str]) -> bool:
    group = sorted(group)
    return all(state.adjacent(a, b) for a, b in combinations(group, 2))


def _semidirected_blocked(state: Cpdag, src: str, dst: str, blocked: frozenset[str]) -> bool:
    """True iff every semi-directed path src -> ... -> dst meets ``blocked``."""
    if src in blocked:
        return True
    stack = [src]
    seen = {src}
    while stack:
        u = stack.pop()
        if u == dst:
            return False
        for w in sorted(state.children(u) | state.neighbors(u)):
            if w not in seen and w not in blocked:
                seen.add(w)
                stack.append(w)
    return True


def _ges_search(
    names: Sequence[str],
    score: GaussianBicScore,
    intervention_targets: Sequence[frozenset[str]],
) -> GesResult:
    names = tuple(names)
    index = {name: k for k, name in enumerate(names)}
    state = Cpdag(names, (), ())

    def local_for(y: str, parent_names: Iterable[str]) -> float:
        return score.local(index[y], [index[q] for q in parent_names])

    def completion(pdag: Cpdag) -> Cpdag:
        dag = extend_to_dag(pdag)
        return cpdag_of_dag(dag, intervention_targets)

    def total(s: Cpdag) -> float:
        return score.total(extend_to_dag(s), names)

    forward_trace = [total(state)]
    while True:
        step = _best_insert(state, names, local_for)
        if step is None:
            break
        x, y, t_set = step
        directed = set(state.directed) | {(x, y)} | {(t, y) for t in t_set}
        undirected = {p for p in state.undirected if not (y in p and p & set(t_set))}
        state = completion(Cpdag(names, directed, undirected))
        forward_trace.append(total(state))

    backward_trace = [forward_trace[-1]]
    while True:
        step = _best_delete(state, names, local_for)
        if step is None:
            break
        x, y, h_set = step
        directed = set(state.directed) - {(x, y)}
        undirected = set(state.undirected) - {frozenset((x, y))}
        for h in h_set:
            undirected.discard(frozenset((y, h)))
            directed.add((y, h))
            if frozenset((x, h)) in undirected:
                undirected.discard(frozenset((x, h)))
                directed.add((x, h))
        state = completion(Cpdag(names, directed, undirected))
        backward_trace.append(total(state))

    return GesResult(
        cpdag=state,
        score=backward_trace[-1],
        forward_scores=tuple(forward_trace),
        backward_scores=tuple(backward_trace),
    )


def _best_insert(state, names, local_for):
    best = None
    best_delta = _PROGRESS_TOL
    for x in names:
        for y in names:
            if x == y or state.adjacent(x, y):
                continue
            na = state.neighbors(y) & state.adjacencies(x)
            pool = state.neighbors(y) - state.adjacencies(x) - {x}
            pa = state.parents(y)
            for t_set in _subsets_by_size(pool):
                na_t = na | set(t_set)
                if not _is_clique(state, na_t):
                    continue
                if not _semidirected_blocked(state, y, x, frozenset(na_t)):
                    continue
                baseline = pa | na_t
                delta = local_for(y, baseline | {x}) - local_for(y, baseline)
                if delta > best_delta:
                    best_delta = delta
                    best = (x, y, t_set)
    return best


def _best_delete(state, names, local_for):
    best = None
    best_delta = _PROGRESS_TOL
    for x in names:
        for y in names:
            if x == y:
                continue
            if (x, y) not in state.directed and frozenset((x, y)) not in state.undirected:
                continue
            na = state.neighbors(y) & state.adjacencies(x)
            pa = state.parents(y)
            for h_set in _subsets_by_size(na):
                if not _is_clique(state, na - set(h_set)):
                    continue
                keep = pa | (na - set(h_set))
                delta = local_for(y, keep - {x}) - local_for(y, keep | {x})
                if delta > best_delta:
                    best_delta = delta
                    best = (x, y, h_set)
    return best
