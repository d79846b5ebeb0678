"""Finite directed graphs and their vertex-set combinatorics.

Edges carry ``src`` and ``dst``.  In the groupoid literature used here
``src`` is the source map ``s(e)`` and ``dst`` is the range map ``r(e)``;
finite paths ``e1 e2 ... ek`` compose when ``dst(e_{i+1}) == src(e_i)``,
so an infinite path is read by walking edges *backwards* (from ``dst``
to ``src``).
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import InputError, ResourceError

CONVENTION_NOTE = "src = s(e) (source map), dst = r(e) (range map); paths compose when dst(e[i+1]) == src(e[i])"

ORIENTATIONS = ("edges", "paths")


@dataclass(frozen=True)
class Edge:
    id: str
    src: str
    dst: str


@dataclass(frozen=True)
class DirectedGraph:
    """A finite directed graph with opaque string ids.

    Construction never raises on structural problems; use
    :func:`validate_graph` (or :meth:`require_valid`) to check them.
    """

    vertices: tuple = ()
    edges: tuple = ()
    _by_id: Mapping = field(default=None, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(str(v) for v in self.vertices))
        object.__setattr__(
            self, "edges", tuple(e if isinstance(e, Edge) else Edge(*(str(x) for x in e)) for e in self.edges)
        )
        by_id = {}
        for e in self.edges:
            by_id.setdefault(e.id, e)
        object.__setattr__(self, "_by_id", by_id)

    @classmethod
    def from_edges(cls, vertices: Iterable, edges: Iterable):
        """``edges`` is an iterable of ``(id, src, dst)`` triples."""
        return cls(tuple(vertices), tuple(Edge(str(i), str(s), str(d)) for i, s, d in edges))

    @classmethod
    def from_json(cls, doc):
        if isinstance(doc, str):
            doc = json.loads(doc)
        try:
            return cls(tuple(doc["vertices"]), tuple(Edge(str(e["id"]), str(e["src"]), str(e["dst"])) for e in doc["edges"]))
        except (KeyError, TypeError) as exc:
            raise InputError(f"malformed graph document: {exc}") from exc

    def to_json(self):
        return {
            "vertices": sorted(self.vertices),
            "edges": [{"id": e.id, "src": e.src, "dst": e.dst} for e in sorted(self.edges, key=lambda e: e.id)],
        }

    # -- lookups -----------------------------------------------------------

    def edge(self, edge_id) -> Edge:
        try:
            return self._by_id[edge_id]
        except KeyError:
            raise InputError(f"unknown edge {edge_id!r}") from None

    def src(self, edge_id):
        return self.edge(edge_id).src

    def dst(self, edge_id):
        return self.edge(edge_id).dst

    def edges_into(self, v):
        """Edges with ``dst == v``, sorted by id, i.e. ``r^{-1}(v)``."""
        return sorted((e for e in self.edges if e.dst == v), key=lambda e: e.id)

    def edges_out(self, v):
        """Edges with ``src == v``, sorted by id, i.e. ``s^{-1}(v)``."""
        return sorted((e for e in self.edges if e.src == v), key=lambda e: e.id)

    def sorted_vertices(self):
        return sorted(set(self.vertices))

    def sorted_edge_ids(self):
        return sorted(self._by_id)

    def require_valid(self):
        report = validate_graph(self)
        if not report["ok"]:
            raise InputError("invalid graph: " + "; ".join(report["violations"]))
        return self

    def reversed(self):
        """The same graph with every edge turned around."""
        return DirectedGraph(self.vertices, tuple(Edge(e.id, e.dst, e.src) for e in self.edges))

    def path(self, edge_ids, vertex=None):
        from .pathspace import Path

        return Path.from_edges(self, edge_ids, vertex=vertex)


def cuntz_graph(n, vertex="v"):
    """One vertex with ``n`` loops labelled ``e1..en``; its algebra is O_n."""
    return DirectedGraph.from_edges([vertex], [(f"e{i}", vertex, vertex) for i in range(1, n + 1)])


def validate_graph(g: DirectedGraph):
    """Return ``{"ok": bool, "violations": [...]}``; never raises."""
    violations = []
    seen = set()
    for v in g.vertices:
        if v in seen:
            violations.append(f"duplicate vertex id {v!r}")
        seen.add(v)
    ids = set()
    for e in g.edges:
        if e.id in ids:
            violations.append(f"duplicate edge id {e.id!r}")
        ids.add(e.id)
        for end in (e.src, e.dst):
            if end not in seen:
                violations.append(f"edge {e.id!r} has dangling endpoint {end!r}")
    for v in sorted(seen):
        if not any(e.dst == v for e in g.edges):
            violations.append(f"{v} is a source (no edge has dst={v})")
        if not any(e.src == v for e in g.edges):
            violations.append(f"{v} is a sink (no edge has src={v})")
    return {"ok": not violations, "violations": violations, "convention": CONVENTION_NOTE}


def _check_subset(g, H):
    H = frozenset(str(v) for v in H)
    unknown = H - set(g.vertices)
    if unknown:
        raise InputError(f"vertex set contains unknown vertices {sorted(unknown)}")
    return H


def _oriented(g, orientation):
    if orientation not in ORIENTATIONS:
        raise InputError(f"orientation must be one of {ORIENTATIONS}")
    return g if orientation == "edges" else g.reversed()


def is_hereditary(g: DirectedGraph, H, orientation="edges") -> bool:
    """``src(e) in H`` implies ``dst(e) in H``.

    ``orientation="paths"`` applies the same test to the reversed graph,
    i.e. closure along the direction in which paths are traversed
    (``dst(e) in H`` implies ``src(e) in H``).
    """
    H = _check_subset(g, H)
    return all(e.dst in H for e in _oriented(g, orientation).edges if e.src in H)


def is_saturated(g: DirectedGraph, H, orientation="edges") -> bool:
    """Every vertex that emits edges, all landing in ``H``, lies in ``H``.

    Vertices emitting no edge impose nothing (see :func:`validate_graph`,
    which rejects such sinks anyway).
    """
    H = _check_subset(g, H)
    og = _oriented(g, orientation)
    for v in set(og.vertices) - H:
        targets = [e.dst for e in og.edges if e.src == v]
        if targets and all(t in H for t in targets):
            return False
    return True


def _canonical_key(H):
    return (len(H), tuple(sorted(H)))


def saturated_hereditary_lattice(g: DirectedGraph, orientation="edges", max_vertices=20):
    """All hereditary and saturated subsets, sorted by (size, members)."""
    verts = g.sorted_vertices()
    if len(verts) > max_vertices:
        raise ResourceError(f"{len(verts)} vertices exceed the enumeration bound {max_vertices}", required=len(verts))
    out = []
    for r in range(len(verts) + 1):
        for combo in itertools.combinations(verts, r):
            H = frozenset(combo)
            if is_hereditary(g, H, orientation) and is_saturated(g, H, orientation):
                out.append(H)
    return sorted(out, key=_canonical_key)


def _return_path_counts(g, v, max_len):
    # number of paths that leave v and come back to v without visiting v in between
    others = [u for u in g.sorted_vertices() if u != v]
    idx = {u: i for i, u in enumerate(others)}
    # walk along edges src -> dst; the count is orientation independent
    start = [0] * len(others)
    total = 0
    for e in g.edges:
        if e.src == v:
            if e.dst == v:
                total += 1
            else:
                start[idx[e.dst]] += 1
    back = [0] * len(others)
    for e in g.edges:
        if e.dst == v and e.src != v:
            back[idx[e.src]] += 1
    vec = start
    for _ in range(max_len - 1):
        total += sum(a * b for a, b in zip(vec, back))
        if total >= 2:
            return total
        nxt = [0] * len(others)
        for e in g.edges:
            if e.src != v and e.dst != v and vec[idx[e.src]]:
                nxt[idx[e.dst]] += vec[idx[e.src]]
        vec = nxt
        if not any(vec):
            break
    return total


def satisfies_condition_K(g: DirectedGraph):
    """Condition (K): each vertex has no return path or at least two.

    A return path at ``v`` is a cycle based at ``v`` that meets ``v`` only
    at its endpoints.  Returns ``(ok, offending_vertices)``.
    """
    n = len(set(g.vertices))
    bad = []
    for v in g.sorted_vertices():
        # a second return path, if any exists, has length <= 2n
        if _return_path_counts(g, v, 2 * n + 1) == 1:
            bad.append(v)
    return (not bad), bad


@dataclass(frozen=True)
class FiniteGroup:
    """A finite group given by its elements and a multiplication table."""

    elements: tuple
    table: Mapping

    def __post_init__(self):
        els = tuple(str(x) for x in self.elements)
        object.__setattr__(self, "elements", els)
        tab = {(str(a), str(b)): str(c) for (a, b), c in dict(self.table).items()}
        object.__setattr__(self, "table", tab)
        self._check()

    @classmethod
    def cyclic(cls, n):
        els = [str(i) for i in range(n)]
        return cls(els, {(a, b): str((int(a) + int(b)) % n) for a in els for b in els})

    def mul(self, a, b):
        return self.table[(str(a), str(b))]

    def _check(self):
        els = self.elements
        for a in els:
            for b in els:
                if self.table.get((a, b)) not in els:
                    raise InputError(f"group table is not closed at ({a},{b})")
        units = [u for u in els if all(self.table[(u, a)] == a == self.table[(a, u)] for a in els)]
        if not units:
            raise InputError("group table has no identity")
        u = units[0]
        object.__setattr__(self, "identity", u)
        for a in els:
            if not any(self.table[(a, b)] == u for b in els):
                raise InputError(f"element {a} has no inverse")
        for a, b, c in itertools.product(els, repeat=3):
            if self.table[(self.table[(a, b)], c)] != self.table[(a, self.table[(b, c)])]:
                raise InputError(f"group table is not associative at ({a},{b},{c})")


def _pair(a, g):
    return f"({a},{g})"


def skew_product(E: DirectedGraph, group: FiniteGroup, c: Mapping, vertex_labels: Mapping | None = None):
    """The skew-product graph ``E x_c group`` for a finite group.

    Vertices ``(v, g)``, edges ``(e, g)`` with ``src(e,g) = (src(e), g)``
    and ``dst(e,g) = (dst(e), g*c(e))``.  Ids are rendered ``"(a,g)"``.
    """
    if vertex_labels:
        for v, lab in vertex_labels.items():
            if str(lab) != group.identity:
                raise InputError(f"vertex label of {v} must be the group identity for a finite group")
    missing = [e.id for e in E.edges if e.id not in c]
    if missing:
        raise InputError(f"cocycle is not defined on edges {missing}")
    for e, val in c.items():
        if str(val) not in group.elements:
            raise InputError(f"cocycle value {val!r} on {e} is not a group element")
    verts = [_pair(v, g) for v in E.sorted_vertices() for g in group.elements]
    edges = [
        (_pair(e.id, g), _pair(e.src, g), _pair(e.dst, group.mul(g, c[e.id])))
        for e in sorted(E.edges, key=lambda e: e.id)
        for g in group.elements
    ]
    return DirectedGraph.from_edges(verts, edges)


def skew_quotient(S: DirectedGraph):
    """Quotient of a skew product by the left group action ``h.(a,g) = (a,hg)``.

    The action is free and commutes with ``src``/``dst``, so each orbit is
    labelled by its first coordinate.
    """

    def first(label):
        return label[1:-1].rsplit(",", 1)[0]

    verts = sorted({first(v) for v in S.vertices})
    edges = {}
    for e in S.edges:
        edges.setdefault(first(e.id), (first(e.src), first(e.dst)))
    return DirectedGraph.from_edges(verts, [(i, s, d) for i, (s, d) in sorted(edges.items())])


def canonical_form(g: DirectedGraph):
    """Brute-force canonical labelling (small graphs only) for isomorphism tests."""
    verts = g.sorted_vertices()
    best = None
    for perm in itertools.permutations(range(len(verts))):
        relabel = dict(zip(verts, perm))
        code = tuple(sorted((relabel[e.src], relabel[e.dst]) for e in g.edges))
        if best is None or code < best:
            best = code
    return (len(verts), best)


def random_graph(rng, n_vertices, extra_edges=2, loops=True):
    """A seeded random graph with no sources and no sinks.

    A Hamiltonian cycle (a loop when ``n_vertices == 1``) guarantees the
    standing hypothesis; ``extra_edges`` more edges are then drawn
    uniformly, loops allowed unless ``loops`` is false.
    """
    verts = [f"v{i}" for i in range(n_vertices)]
    order = list(verts)
    rng.shuffle(order)
    edges = [(order[i], order[(i + 1) % n_vertices]) for i in range(n_vertices)]
    for _ in range(extra_edges):
        a, b = rng.choice(verts), rng.choice(verts)
        if a == b and not loops:
            continue
        edges.append((a, b))
    return DirectedGraph.from_edges(verts, [(f"x{i}", a, b) for i, (a, b) in enumerate(edges)])
