"""DAG / CPDAG algebra: d-separation, Meek orientation, consistent extension,
backdoor and mediator identification, expert edit scripts, DOT-subset I/O.

Graphs are immutable values; every operation returns a new graph. ``Cpdag``
is the container for any partially directed graph (equivalence classes as
produced by discovery, and intermediate states while orienting).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, NamedTuple, Sequence, Union

__all__ = [
    "GraphError",
    "CycleError",
    "NotExtendableError",
    "EditError",
    "GraphParseError",
    "Dag",
    "Cpdag",
    "AddEdge",
    "RemoveEdge",
    "Orient",
    "EditScript",
    "BackdoorResult",
    "d_separated",
    "v_structures",
    "cpdag_of_dag",
    "meek_orient",
    "extend_to_dag",
    "apply_edits",
    "backdoor_set",
    "mediators",
    "parse_graph",
    "serialize_graph",
    "parse_edit_script",
    "serialize_edit_script",
    "edits_to_reach",
]


class GraphError(ValueError):
    """Structural contract violation on a graph value."""


class CycleError(GraphError):
    """A directed cycle was created or detected."""


class NotExtendableError(GraphError):
    """The partially directed graph admits no consistent DAG extension."""


class EditError(GraphError):
    """An edit-script command could not be applied."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)


class GraphParseError(GraphError):
    """Syntax error in a graph or edit-script file."""

    def __init__(self, message: str, line: int):
        self.line = line
        super().__init__(f"line {line}: {message}")


_ID = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def _check_nodes(nodes: Sequence[str]) -> tuple[str, ...]:
    nodes = tuple(nodes)
    if len(set(nodes)) != len(nodes):
        raise GraphError("duplicate node names")
    for n in nodes:
        if not _ID.match(n):
            raise GraphError(f"invalid node identifier {n!r}")
    return nodes


def _toposort(nodes: Sequence[str], edges: Iterable[tuple[str, str]]) -> list[str]:
    """Kahn's algorithm; raises CycleError if no topological order exists."""
    indegree = {n: 0 for n in nodes}
    children: dict[str, list[str]] = {n: [] for n in nodes}
    for a, b in edges:
        indegree[b] += 1
        children[a].append(b)
    ready = sorted(n for n, d in indegree.items() if d == 0)
    order = []
    while ready:
        n = ready.pop(0)
        order.append(n)
        for c in sorted(children[n]):
            indegree[c] -= 1
            if indegree[c] == 0:
                ready.append(c)
        ready.sort()
    if len(order) != len(indegree):
        raise CycleError("graph contains a directed cycle")
    return order


@dataclass(frozen=True, eq=False)
class Dag:
    """Directed acyclic graph over named nodes.

    Equality ignores node order: two DAGs are equal when they have the same
    node set and the same directed edge set.
    """

    nodes: tuple[str, ...]
    edges: frozenset[tuple[str, str]]

    def __init__(self, nodes: Sequence[str], edges: Iterable[tuple[str, str]] = ()):
        object.__setattr__(self, "nodes", _check_nodes(nodes))
        edge_list = [tuple(e) for e in edges]
        edge_set = frozenset(edge_list)
        if len(edge_set) != len(edge_list):
            raise GraphError("duplicate edges")
        known = set(self.nodes)
        for a, b in edge_set:
            if a == b:
                raise GraphError(f"self-loop on {a!r}")
            if a not in known or b not in known:
                raise GraphError(f"edge ({a!r}, {b!r}) references unknown node")
        object.__setattr__(self, "edges", edge_set)
        _toposort(self.nodes, edge_set)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dag):
            return NotImplemented
        return set(self.nodes) == set(other.nodes) and self.edges == other.edges

    def __hash__(self) -> int:
        return hash((frozenset(self.nodes), self.edges))

    def has_node(self, n: str) -> bool:
        return n in self.nodes

    def parents(self, n: str) -> frozenset[str]:
        return frozenset(a for a, b in self.edges if b == n)

    def children(self, n: str) -> frozenset[str]:
        return frozenset(b for a, b in self.edges if a == n)

    def adjacent(self, a: str, b: str) -> bool:
        return (a, b) in self.edges or (b, a) in self.edges

    def ancestors(self, n: str) -> frozenset[str]:
        """Strict ancestors of ``n``."""
        seen: set[str] = set()
        stack = list(self.parents(n))
        while stack:
            m = stack.pop()
            if m not in seen:
                seen.add(m)
                stack.extend(self.parents(m))
        return frozenset(seen)

    def descendants(self, n: str) -> frozenset[str]:
        """Strict descendants of ``n``."""
        seen: set[str] = set()
        stack = list(self.children(n))
        while stack:
            m = stack.pop()
            if m not in seen:
                seen.add(m)
                stack.extend(self.children(m))
        return frozenset(seen)

    def topological_order(self) -> list[str]:
        return _toposort(self.nodes, self.edges)

    def skeleton(self) -> frozenset[frozenset[str]]:
        return frozenset(frozenset(e) for e in self.edges)


@dataclass(frozen=True, eq=False)
class Cpdag:
    """Partially directed graph: directed plus undirected edges.

    Used both for completed equivalence classes (CPDAGs proper) and for
    intermediate partially oriented graphs. No pair of nodes may carry more
    than one edge (directed in either direction, or undirected).
    """

    nodes: tuple[str, ...]
    directed: frozenset[tuple[str, str]]
    undirected: frozenset[frozenset[str]]

    def __init__(
        self,
        nodes: Sequence[str],
        directed: Iterable[tuple[str, str]] = (),
        undirected: Iterable[Iterable[str]] = (),
    ):
        object.__setattr__(self, "nodes", _check_nodes(nodes))
        dir_set = frozenset(tuple(e) for e in directed)
        und_set = frozenset(frozenset(e) for e in undirected)
        known = set(self.nodes)
        for a, b in dir_set:
            if a == b:
                raise GraphError(f"self-loop on {a!r}")
            if a not in known or b not in known:
                raise GraphError(f"edge ({a!r}, {b!r}) references unknown node")
            if (b, a) in dir_set:
                raise GraphError(f"edge {a!r},{b!r} directed both ways")
            if frozenset((a, b)) in und_set:
                raise GraphError(f"pair {a!r},{b!r} is both directed and undirected")
        for pair in und_set:
            if len(pair) != 2:
                raise GraphError("undirected edge must join two distinct nodes")
            if not pair <= known:
                raise GraphError(f"undirected edge {set(pair)} references unknown node")
        object.__setattr__(self, "directed", dir_set)
        object.__setattr__(self, "undirected", und_set)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Cpdag):
            return NotImplemented
        return (
            set(self.nodes) == set(other.nodes)
            and self.directed == other.directed
            and self.undirected == other.undirected
        )

    def __hash__(self) -> int:
        return hash((frozenset(self.nodes), self.directed, self.undirected))

    def has_node(self, n: str) -> bool:
        return n in self.nodes

    def parents(self, n: str) -> frozenset[str]:
        return frozenset(a for a, b in self.directed if b == n)

    def children(self, n: str) -> frozenset[str]:
        return frozenset(b for a, b in self.directed if a == n)

    def neighbors(self, n: str) -> frozenset[str]:
        """Nodes joined to ``n`` by an undirected edge."""
        return frozenset(next(iter(p - {n})) for p in self.undirected if n in p)

    def adjacent(self, a: str, b: str) -> bool:
        return (
            (a, b) in self.directed
            or (b, a) in self.directed
            or frozenset((a, b)) in self.undirected
        )

    def adjacencies(self, n: str) -> frozenset[str]:
        return self.parents(n) | self.children(n) | self.neighbors(n)

    def skeleton(self) -> frozenset[frozenset[str]]:
        return frozenset(frozenset(e) for e in self.directed) | self.undirected


Graph = Union[Dag, Cpdag]


# ---------------------------------------------------------------------------
# d-separation


def d_separated(g: Dag, a: str, b: str, z: Iterable[str] = ()) -> bool:
    """True iff every path between ``a`` and ``b`` is blocked by ``z``.

    Uses the moralized-ancestral-graph criterion: a and b are d-separated by
    z exactly when they are disconnected in the moral graph of the subgraph
    induced by the ancestors of {a, b} union z, after removing z.
    """
    z = frozenset(z)
    for n in {a, b} | z:
        if not g.has_node(n):
            raise GraphError(f"unknown node {n!r}")
    if a == b or a in z or b in z:
        raise GraphError("endpoints must be distinct and not conditioned on")

    relevant = {a, b} | z
    for n in list(relevant):
        relevant |= g.ancestors(n)
    sub_edges = [(u, v) for u, v in g.edges if u in relevant and v in relevant]

    # Moralize: connect co-parents, then drop directions.
    moral: dict[str, set[str]] = {n: set() for n in relevant}
    for u, v in sub_edges:
        moral[u].add(v)
        moral[v].add(u)
    parents_of: dict[str, set[str]] = {n: set() for n in relevant}
    for u, v in sub_edges:
        parents_of[v].add(u)
    for ps in parents_of.values():
        for u, v in combinations(sorted(ps), 2):
            moral[u].add(v)
            moral[v].add(u)

    stack = [a]
    seen = {a}
    while stack:
        n = stack.pop()
        if n == b:
            return False
        for m in moral[n]:
            if m not in seen and m not in z:
                seen.add(m)
                stack.append(m)
    return True


# ---------------------------------------------------------------------------
# CPDAG construction and Meek orientation


def v_structures(g: Graph) -> frozenset[tuple[str, str, str]]:
    """Collider triples (a, c, b) with a -> c <- b, a and b nonadjacent, a < b."""
    out = set()
    for c in g.nodes:
        ps = sorted(g.parents(c))
        for a, b in combinations(ps, 2):
            if not g.adjacent(a, b):
                out.add((a, c, b))
    return frozenset(out)


def cpdag_of_dag(g: Dag, intervention_targets: Sequence[Iterable[str]] = ()) -> Cpdag:
    """Equivalence class of ``g``: skeleton plus v-structures, closed under the
    Meek rules.

    With ``intervention_targets`` (one node set per interventional regime),
    every skeleton edge with exactly one endpoint in some target set is also
    oriented as in ``g`` before closure, yielding the interventional
    equivalence class.
    """
    directed: set[tuple[str, str]] = set()
    for a, c, b in v_structures(g):
        directed.add((a, c))
        directed.add((b, c))
    for targets in intervention_targets:
        tset = frozenset(targets)
        for n in tset:
            if not g.has_node(n):
                raise GraphError(f"intervention target {n!r} not in graph")
        for a, b in g.edges:
            if (a in tset) != (b in tset):
                directed.add((a, b))
    undirected = {frozenset(e) for e in g.edges} - {frozenset(e) for e in directed}
    pdag = Cpdag(g.nodes, directed, undirected)
    return meek_orient(pdag)


def meek_orient(g: Cpdag) -> Cpdag:
    """Close a partially directed graph under the four Meek rules.

    Directed edges are only ever added (undirected ones become directed);
    the result is idempotent under re-application.
    """
    directed = set(g.directed)
    undirected = {tuple(sorted(p)) for p in g.undirected}

    def adjacent(a: str, b: str) -> bool:
        return (
            (a, b) in directed
            or (b, a) in directed
            or tuple(sorted((a, b))) in undirected
        )

    def orient(a: str, b: str) -> None:
        undirected.discard(tuple(sorted((a, b))))
        directed.add((a, b))

    changed = True
    while changed:
        changed = False
        for x, y in sorted(undirected):
            for a, b in ((x, y), (y, x)):
                # Rule 1: c -> a, a - b, c and b nonadjacent  =>  a -> b.
                if any(
                    (c, a) in directed and not adjacent(c, b)
                    for c in sorted({u for u, v in directed if v == a})
                ):
                    orient(a, b)
                    changed = True
                    break
                # Rule 2: a -> c -> b with a - b  =>  a -> b.
                if any(
                    (a, c) in directed and (c, b) in directed
                    for c in sorted({v for u, v in directed if u == a})
                ):
                    orient(a, b)
                    changed = True
                    break
                nbrs_a = sorted(
                    {n for p in undirected for n in p if a in p and n != a}
                )
                # Rule 3: a - c, a - d, c -> b, d -> b, c and d nonadjacent.
                r3 = False
                for c, d in combinations(nbrs_a, 2):
                    if (
                        (c, b) in directed
                        and (d, b) in directed
                        and not adjacent(c, d)
                    ):
                        orient(a, b)
                        changed = True
                        r3 = True
                        break
                if r3:
                    break
                # Rule 4: a - c, c -> d, d -> b, c and b nonadjacent,
                # a and d adjacent  =>  a -> b.
                r4 = False
                for c in nbrs_a:
                    if c == b or adjacent(c, b):
                        continue
                    for d in sorted({v for u, v in directed if u == c}):
                        if d in (a, b):
                            continue
                        if (d, b) in directed and adjacent(a, d):
                            orient(a, b)
                            changed = True
                            r4 = True
                            break
                    if r4:
                        break
                if r4:
                    break
    return Cpdag(g.nodes, directed, undirected)


def extend_to_dag(g: Cpdag) -> Dag:
    """Consistent extension: a DAG with the same skeleton and v-structures.

    Implements the recursive sink-elimination construction; candidates are
    scanned in node-name order, so the result is deterministic. Raises
    ``NotExtendableError`` when no consistent extension exists.
    """
    remaining = set(g.nodes)
    directed = set(g.directed)
    undirected = {tuple(sorted(p)) for p in g.undirected}
    oriented: set[tuple[str, str]] = set()

    def adj_in(x: str) -> set[str]:
        out = set()
        for a, b in directed:
            if a == x and b in remaining:
                out.add(b)
            elif b == x and a in remaining:
                out.add(a)
        for p in undirected:
            if x in p:
                other = p[0] if p[1] == x else p[1]
                if other in remaining:
                    out.add(other)
        return out

    while remaining:
        found = None
        for x in sorted(remaining):
            if any(a == x and b in remaining for a, b in directed):
                continue  # not a sink
            nbrs = {
                (p[0] if p[1] == x else p[1])
                for p in undirected
                if x in p and (p[0] in remaining and p[1] in remaining)
            }
            adj_x = adj_in(x)
            if all(
                (adj_in(y) | {y}) >= adj_x - {y}
                for y in nbrs
            ):
                found = x
                break
        if found is None:
            raise NotExtendableError("no consistent extension exists")
        for p in list(undirected):
            if found in p:
                other = p[0] if p[1] == found else p[1]
                if other in remaining:
                    oriented.add((other, found))
                    undirected.remove(p)
        remaining.remove(found)

    return Dag(g.nodes, directed | oriented)


# ---------------------------------------------------------------------------
# Identification


class BackdoorResult(NamedTuple):
    variables: frozenset[str]
    verified: bool


def backdoor_set(g: Dag, t: str, y: str) -> BackdoorResult:
    """Canonical adjustment set for t -> y: the parents of t.

    Verifies the backdoor criterion by checking d-separation of t and y in
    the graph with t's outgoing edges removed; `verified` reports the check.
    """
    for n in (t, y):
        if not g.has_node(n):
            raise GraphError(f"unknown node {n!r}")
    if t == y:
        raise GraphError("treatment and outcome must differ")
    zs = g.parents(t)
    stripped = Dag(g.nodes, [(a, b) for a, b in g.edges if a != t])
    verified = d_separated(stripped, t, y, zs) if y not in zs else False
    return BackdoorResult(zs, verified)


def mediators(g: Dag, t: str, y: str) -> frozenset[str]:
    """Nodes on at least one directed path from t to y, excluding endpoints."""
    for n in (t, y):
        if not g.has_node(n):
            raise GraphError(f"unknown node {n!r}")
    if t == y:
        raise GraphError("treatment and outcome must differ")
    return (g.descendants(t) & g.ancestors(y)) - {t, y}


# ---------------------------------------------------------------------------
# Edit scripts


@dataclass(frozen=True)
class AddEdge:
    a: str
    b: str
    line: int | None = None


@dataclass(frozen=True)
class RemoveEdge:
    a: str
    b: str
    line: int | None = None


@dataclass(frozen=True)
class Orient:
    a: str
    b: str
    line: int | None = None


EditCommand = Union[AddEdge, RemoveEdge, Orient]
EditScript = tuple[EditCommand, ...]


def apply_edits(g: Graph, script: Sequence[EditCommand]) -> Graph:
    """Apply edit commands in order; fail fast with the offending command.

    On a DAG, additions that would create a cycle raise ``EditError``. On a
    partially directed graph, ``Orient`` requires an existing undirected edge
    and ``RemoveEdge`` removes a directed edge, or the undirected edge on the
    same pair when no directed one exists.
    """
    if isinstance(g, Dag):
        edges = set(g.edges)
        for cmd in script:
            _check_cmd_nodes(g, cmd)
            if isinstance(cmd, AddEdge):
                if (cmd.a, cmd.b) in edges or (cmd.b, cmd.a) in edges:
                    raise EditError(f"edge {cmd.a} -> {cmd.b}: pair already connected", cmd.line)
                edges.add((cmd.a, cmd.b))
                try:
                    _toposort(g.nodes, edges)
                except CycleError:
                    raise EditError(
                        f"adding {cmd.a} -> {cmd.b} creates a cycle", cmd.line
                    ) from None
            elif isinstance(cmd, RemoveEdge):
                if (cmd.a, cmd.b) not in edges:
                    raise EditError(f"no edge {cmd.a} -> {cmd.b} to remove", cmd.line)
                edges.remove((cmd.a, cmd.b))
            else:
                raise EditError("orient is not applicable to a fully directed graph", cmd.line)
        return Dag(g.nodes, edges)

    directed = set(g.directed)
    undirected = set(g.undirected)
    for cmd in script:
        _check_cmd_nodes(g, cmd)
        pair = frozenset((cmd.a, cmd.b))
        if isinstance(cmd, AddEdge):
            if (cmd.a, cmd.b) in directed or (cmd.b, cmd.a) in directed or pair in undirected:
                raise EditError(f"edge {cmd.a} -> {cmd.b}: pair already connected", cmd.line)
            directed.add((cmd.a, cmd.b))
        elif isinstance(cmd, RemoveEdge):
            if (cmd.a, cmd.b) in directed:
                directed.remove((cmd.a, cmd.b))
            elif pair in undirected:
                undirected.remove(pair)
            else:
                raise EditError(f"no edge {cmd.a} -> {cmd.b} to remove", cmd.line)
        else:
            if pair not in undirected:
                raise EditError(f"no undirected edge {cmd.a} - {cmd.b} to orient", cmd.line)
            undirected.remove(pair)
            directed.add((cmd.a, cmd.b))
    return Cpdag(g.nodes, directed, undirected)


def _check_cmd_nodes(g: Graph, cmd: EditCommand) -> None:
    for n in (cmd.a, cmd.b):
        if not g.has_node(n):
            raise EditError(f"unknown node {n!r}", cmd.line)
    if cmd.a == cmd.b:
        raise EditError("self-loops are not allowed", cmd.line)


_NAME = r"[A-Za-z_][A-Za-z0-9_]*"
_EDIT_ADD = re.compile(rf"^add\s+({_NAME})\s*->\s*({_NAME})$")
_EDIT_REMOVE = re.compile(rf"^remove\s+({_NAME})\s*->\s*({_NAME})$")
_EDIT_ORIENT = re.compile(
    rf"^orient\s+({_NAME})\s*-\s*({_NAME})\s+as\s+({_NAME})\s*->\s*({_NAME})$"
)


def parse_edit_script(text: str) -> EditScript:
    """Parse the line-based edit grammar: ``add A -> B``, ``remove A -> B``,
    ``orient A - B as A -> B``; ``#`` starts a comment."""
    commands: list[EditCommand] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if m := _EDIT_ADD.match(line):
            commands.append(AddEdge(m.group(1), m.group(2), lineno))
        elif m := _EDIT_REMOVE.match(line):
            commands.append(RemoveEdge(m.group(1), m.group(2), lineno))
        elif m := _EDIT_ORIENT.match(line):
            a, b, c, d = m.groups()
            if {a, b} != {c, d}:
                raise GraphParseError(
                    f"orient names {{{a}, {b}}} but directs {{{c}, {d}}}", lineno
                )
            commands.append(Orient(c, d, lineno))
        else:
            raise GraphParseError(f"unrecognized edit command {line!r}", lineno)
    return tuple(commands)


def serialize_edit_script(script: Sequence[EditCommand]) -> str:
    lines = []
    for cmd in script:
        if isinstance(cmd, AddEdge):
            lines.append(f"add {cmd.a} -> {cmd.b}")
        elif isinstance(cmd, RemoveEdge):
            lines.append(f"remove {cmd.a} -> {cmd.b}")
        else:
            lines.append(f"orient {cmd.a} - {cmd.b} as {cmd.a} -> {cmd.b}")
    return "\n".join(lines) + ("\n" if lines else "")


def edits_to_reach(g: Cpdag, target: Dag) -> EditScript:
    """Edit script transforming ``g`` into ``target`` (orient, remove, add).

    Useful for pinning a discovered equivalence class to an expert graph.
    """
    if set(g.nodes) != set(target.nodes):
        raise GraphError("graphs are over different node sets")
    commands: list[EditCommand] = []
    for pair in sorted(g.undirected, key=sorted):
        a, b = sorted(pair)
        if (a, b) in target.edges:
            commands.append(Orient(a, b))
        elif (b, a) in target.edges:
            commands.append(Orient(b, a))
        else:
            commands.append(RemoveEdge(a, b))
    for a, b in sorted(g.directed):
        if (a, b) not in target.edges:
            commands.append(RemoveEdge(a, b))
    have = g.directed | {
        (a, b) for pair in g.undirected for a, b in [sorted(pair)]
    } | {(b, a) for pair in g.undirected for a, b in [sorted(pair)]}
    for a, b in sorted(target.edges):
        if (a, b) not in have:
            commands.append(AddEdge(a, b))
    return tuple(commands)


# ---------------------------------------------------------------------------
# DOT-subset serialization
#
# ``digraph`` files hold fully directed graphs (only ``->`` statements) and
# parse to Dag; ``graph`` files hold partially directed graphs (``--`` and
# ``->`` statements) and parse to Cpdag. One statement per line, no
# attributes; a bare ``name;`` line declares an isolated node.

_HEADER = re.compile(rf"(digraph|graph)\s+({_NAME})\s*\{{")
_STMT_EDGE = re.compile(rf"({_NAME})\s*(->|--)\s*({_NAME})\s*;")
_STMT_NODE = re.compile(rf"({_NAME})\s*;")


def parse_graph(text: str) -> Graph:
    """Parse the DOT subset; returns Dag for ``digraph``, Cpdag for ``graph``."""
    kind = None
    nodes: list[str] = []
    seen: set[str] = set()
    directed: list[tuple[str, str]] = []
    undirected: list[tuple[str, str]] = []
    closed = False

    def note(n: str) -> None:
        if n not in seen:
            seen.add(n)
            nodes.append(n)

    for lineno, raw in enumerate(text.splitlines(), start=1):
        rest = raw.split("#", 1)[0].strip()
        while rest:
            if closed:
                raise GraphParseError("content after closing brace", lineno)
            if kind is None:
                m = _HEADER.match(rest)
                if not m:
                    raise GraphParseError("expected 'digraph NAME {' or 'graph NAME {'", lineno)
                kind = m.group(1)
            elif rest.startswith("}"):
                closed = True
                rest = rest[1:].lstrip()
                continue
            elif m := _STMT_EDGE.match(rest):
                a, op, b = m.groups()
                if a == b:
                    raise GraphParseError(f"self-loop on {a!r}", lineno)
                note(a)
                note(b)
                if op == "->":
                    directed.append((a, b))
                else:
                    if kind == "digraph":
                        raise GraphParseError("'--' not allowed in a digraph", lineno)
                    undirected.append((a, b))
            elif m := _STMT_NODE.match(rest):
                note(m.group(1))
            else:
                raise GraphParseError(f"unrecognized statement {rest!r}", lineno)
            rest = rest[m.end():].lstrip()

    if kind is None:
        raise GraphParseError("empty graph file", 1)
    if not closed:
        raise GraphParseError("missing closing brace", len(text.splitlines()) or 1)
    try:
        if kind == "digraph":
            return Dag(nodes, directed)
        return Cpdag(nodes, directed, undirected)
    except GraphError as exc:
        raise GraphError(f"invalid graph: {exc}") from exc


def serialize_graph(g: Graph) -> str:
    """Inverse of :func:`parse_graph`; round-trips both graph kinds."""
    lines = []
    if isinstance(g, Dag):
        lines.append("digraph g {")
        for n in g.nodes:
            lines.append(f"  {n};")
        for a, b in sorted(g.edges):
            lines.append(f"  {a} -> {b};")
    else:
        lines.append("graph g {")
        for n in g.nodes:
            lines.append(f"  {n};")
        for a, b in sorted(g.directed):
            lines.append(f"  {a} -> {b};")
        for pair in sorted(g.undirected, key=sorted):
            a, b = sorted(pair)
            lines.append(f"  {a} -- {b};")
    lines.append("}")
    return "\n".join(lines) + "\n"
