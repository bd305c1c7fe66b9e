"""Independent oracles and generators shared across the test suite.

Everything here deliberately avoids the library's own algorithms: d-separation
is re-derived by exhaustive path enumeration, CPDAGs by enumerating entire
equivalence classes, so the production implementations are checked against
genuinely independent routes.
"""

from __future__ import annotations

from itertools import combinations, product

import numpy as np

from paqol.graphs import Cpdag, Dag
from paqol.scm import LinearGaussian, Scm


def random_dag(rng: np.random.Generator, n_nodes: int, p_edge: float) -> Dag:
    names = [f"n{i}" for i in range(n_nodes)]
    order = list(rng.permutation(n_nodes))
    edges = []
    for i in range(n_nodes):
        for j in range(i + 1, n_nodes):
            if rng.random() < p_edge:
                edges.append((names[order[i]], names[order[j]]))
    return Dag(names, edges)


def d_separated_by_paths(dag: Dag, a: str, b: str, z) -> bool:
    """Brute force: enumerate every simple path and apply the blocking rules.

    A path is blocked when some intermediate node is a non-collider in z, or
    a collider with neither itself nor any descendant in z.
    """
    z = frozenset(z)
    adjacency: dict[str, set[str]] = {n: set() for n in dag.nodes}
    for u, v in dag.edges:
        adjacency[u].add(v)
        adjacency[v].add(u)

    def open_path(path: list[str]) -> bool:
        for i in range(1, len(path) - 1):
            into_left = (path[i - 1], path[i]) in dag.edges
            into_right = (path[i + 1], path[i]) in dag.edges
            if into_left and into_right:  # collider
                if path[i] not in z and not (dag.descendants(path[i]) & z):
                    return False
            else:
                if path[i] in z:
                    return False
        return True

    stack = [[a]]
    while stack:
        path = stack.pop()
        last = path[-1]
        if last == b:
            if open_path(path):
                return False
            continue
        for nxt in adjacency[last]:
            if nxt not in path:
                stack.append(path + [nxt])
    return True


def _v_structures_of(nodes, edges: frozenset) -> frozenset:
    out = set()
    parents = {n: {a for a, b in edges if b == n} for n in nodes}
    for c in nodes:
        for a, b in combinations(sorted(parents[c]), 2):
            if (a, b) not in edges and (b, a) not in edges:
                out.add((a, c, b))
    return frozenset(out)


def _is_acyclic(nodes, edges) -> bool:
    remaining = {n: {a for a, b in edges if b == n} for n in nodes}
    ready = [n for n, ps in remaining.items() if not ps]
    seen = 0
    while ready:
        n = ready.pop()
        seen += 1
        for m, ps in remaining.items():
            if n in ps:
                ps.remove(n)
                if not ps:
                    ready.append(m)
    return seen == len(nodes)


def cpdag_by_enumeration(dag: Dag) -> Cpdag:
    """The equivalence class computed the slow, certain way: try every
    orientation of the skeleton, keep acyclic ones with the same v-structures,
    and mark edges directed only when all class members agree."""
    skeleton = sorted(tuple(sorted(p)) for p in dag.skeleton())
    target_v = _v_structures_of(dag.nodes, dag.edges)
    members = []
    for pattern in product((0, 1), repeat=len(skeleton)):
        edges = frozenset(
            (a, b) if bit == 0 else (b, a)
            for (a, b), bit in zip(skeleton, pattern)
        )
        if not _is_acyclic(dag.nodes, edges):
            continue
        if _v_structures_of(dag.nodes, edges) != target_v:
            continue
        members.append(edges)
    assert members, "equivalence class cannot be empty"
    directed = set.intersection(*(set(m) for m in members))
    undirected = {frozenset(e) for m in members for e in m if e not in directed}
    return Cpdag(dag.nodes, directed, undirected)


def linear_scm_from_dag(
    dag: Dag, rng: np.random.Generator, coef_range=(0.6, 1.4), noise_sd=1.0
) -> Scm:
    """Random linear-Gaussian SCM over a DAG with coefficients bounded away
    from zero (so every edge is detectable)."""
    order = dag.topological_order()
    mechanisms = {}
    for node in order:
        parents = tuple(sorted(dag.parents(node)))
        coefs = tuple(
            float(rng.uniform(*coef_range) * rng.choice((-1.0, 1.0))) for _ in parents
        )
        mechanisms[node] = LinearGaussian(parents, coefs, 0.0, noise_sd)
    return Scm(tuple(order), mechanisms)


def template_estimation_dag() -> Dag:
    """The study template restricted to its non-auxiliary columns, as a DAG."""
    from paqol.scm import scm_dag, study_template

    template = study_template()
    keep = [
        n
        for n, r in template.roles.items()
        if r in ("treatment", "outcome", "mediator", "covariate")
    ]
    full = scm_dag(template)
    return Dag(tuple(keep), [(a, b) for a, b in full.edges if a in keep and b in keep])
