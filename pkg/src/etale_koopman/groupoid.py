"""Symbolic model of the graph groupoid ``G(X, T)``.

The compact open bisections ``Z(alpha, beta) = {(alpha x, |alpha|-|beta|, beta x)}``
are closed under products and inverses; their indicator functions span
the convolution algebra ``C_c(G)``.  Since ``G`` is étale with counting
Haar system, convolution of indicators is the bilinear extension of the
bisection product.
"""

from __future__ import annotations

import random
from collections import defaultdict, deque
from dataclasses import dataclass
from fractions import Fraction

from ._rational import fmt, to_fraction
from .errors import DomainError, InputError, ResourceError, SpecificationError
from .graph import DirectedGraph
from .pathspace import Path, extensions, paths_up_to


@dataclass(frozen=True, order=True)
class BisectionSymbol:
    alpha: Path
    beta: Path

    def __post_init__(self):
        if self.alpha.s != self.beta.s:
            raise InputError(f"Z(alpha,beta) needs s(alpha) == s(beta), got {self.alpha.s} and {self.beta.s}")

    @property
    def degree(self):
        return len(self.alpha) - len(self.beta)

    @property
    def source_vertex(self):
        return self.alpha.s

    def label(self):
        return f"Z({self.alpha.label()},{self.beta.label()})"

    def to_json(self):
        return {"alpha": list(self.alpha.edges), "beta": list(self.beta.edges), "vertex": self.alpha.s}


def vertex_symbol(v):
    p = Path.vertex(v)
    return BisectionSymbol(p, p)


def edge_symbol(g, e):
    """``Z(e, s(e))``, whose Koopman image is the partial isometry ``S_e``."""
    return BisectionSymbol(g.path([e]), Path.vertex(g.src(e)))


def symbol(g, alpha, beta, vertex=None):
    """Build ``Z(alpha, beta)`` from edge-id sequences.

    ``vertex`` names the common source when both paths are empty.
    """
    alpha, beta = tuple(alpha), tuple(beta)
    if not alpha and not beta:
        if vertex is None:
            raise InputError("Z(v,v) needs its vertex")
        return vertex_symbol(vertex)
    a = g.path(alpha) if alpha else None
    b = g.path(beta) if beta else None
    a = a or Path.vertex(b.s)
    b = b or Path.vertex(a.s)
    return BisectionSymbol(a, b)


def multiply(g, a: BisectionSymbol, b: BisectionSymbol):
    """``Z(alpha,beta) Z(gamma,delta)``, or ``None`` when the product is empty."""
    beta, gamma = a.beta, b.alpha
    if beta.is_prefix_of(gamma):
        eps = gamma.drop(g, len(beta))
        return BisectionSymbol(a.alpha.concat(g, eps), b.beta)
    if gamma.is_prefix_of(beta):
        eps = beta.drop(g, len(gamma))
        return BisectionSymbol(a.alpha, b.beta.concat(g, eps))
    return None


def adjoint(a: BisectionSymbol) -> BisectionSymbol:
    return BisectionSymbol(a.beta, a.alpha)


def refine_symbol(g, a: BisectionSymbol, k):
    """``Z(alpha,beta)`` as the disjoint union of ``Z(alpha eps, beta eps)``, ``|eps| = k``."""
    out = []
    for ext in extensions(g, Path.vertex(a.alpha.s), k):
        out.append(BisectionSymbol(a.alpha.concat(g, ext), a.beta.concat(g, ext)))
    return out


def _parent(g, a: BisectionSymbol):
    if a.alpha.edges and a.beta.edges and a.alpha.edges[-1] == a.beta.edges[-1]:
        return BisectionSymbol(a.alpha.take(g, len(a.alpha) - 1), a.beta.take(g, len(a.beta) - 1))
    return None


def _canonicalize(g, terms):
    """Reduce ``{symbol: coeff}`` to the coarsest disjoint representation.

    Same-degree bisections are either disjoint or nested, so refining every
    symbol of a degree to a common depth and merging complete sibling
    families with equal coefficients gives a unique form.
    """
    by_degree = defaultdict(dict)
    for sym, c in terms.items():
        if c:
            by_degree[sym.degree][sym] = by_degree[sym.degree].get(sym, 0) + c
    out = {}
    for k, part in by_degree.items():
        depth = max(min(len(s.alpha), len(s.beta)) for s in part)
        fine = defaultdict(Fraction)
        for sym, c in part.items():
            for leaf in refine_symbol(g, sym, depth - min(len(sym.alpha), len(sym.beta))):
                fine[leaf] += c
        current = {s: c for s, c in fine.items() if c}
        changed = True
        while changed:
            changed = False
            groups = defaultdict(list)
            for s in current:
                p = _parent(g, s)
                if p is not None:
                    groups[p].append(s)
            for p, kids in groups.items():
                n_children = len(g.edges_into(p.alpha.s))
                vals = {current[s] for s in kids}
                if len(kids) == n_children and len(vals) == 1:
                    (val,) = vals
                    for s in kids:
                        del current[s]
                    current[p] = val
                    changed = True
        out.update(current)
    return out


class AlgebraElement:
    """A finite rational combination of bisection indicators in ``C_c(G)``."""

    __slots__ = ("graph", "_terms", "_hash")

    def __init__(self, graph: DirectedGraph, terms=None, canonical=False):
        self.graph = graph
        terms = {s: to_fraction(c) for s, c in dict(terms or {}).items()}
        if not canonical:
            terms = _canonicalize(graph, terms)
        self._terms = tuple(sorted((s, c) for s, c in terms.items() if c))
        self._hash = None

    @classmethod
    def of(cls, graph, sym: BisectionSymbol, coeff=1):
        return cls(graph, {sym: coeff})

    @classmethod
    def unit(cls, graph):
        """``sum_v 1_{Z(v,v)}``, the identity of the (unital) algebra."""
        return cls(graph, {vertex_symbol(v): 1 for v in graph.sorted_vertices()})

    @property
    def terms(self):
        return dict(self._terms)

    def items(self):
        return iter(self._terms)

    def symbols(self):
        return [s for s, _ in self._terms]

    def is_zero(self):
        return not self._terms

    def degrees(self):
        return sorted({s.degree for s, _ in self._terms})

    def homogeneous(self, k):
        """The degree-``k`` component."""
        return AlgebraElement(self.graph, {s: c for s, c in self._terms if s.degree == k}, canonical=True)

    def max_beta(self):
        return max((len(s.beta) for s, _ in self._terms), default=0)

    def max_alpha(self):
        return max((len(s.alpha) for s, _ in self._terms), default=0)

    def is_gauge_core(self):
        return all(s.degree == 0 for s, _ in self._terms)

    def __eq__(self, other):
        return isinstance(other, AlgebraElement) and self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self._terms)
        return self._hash

    def __add__(self, other):
        t = defaultdict(Fraction, self.terms)
        for s, c in other.items():
            t[s] += c
        return AlgebraElement(self.graph, t)

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        c = to_fraction(c)
        return AlgebraElement(self.graph, {s: c * v for s, v in self._terms}, canonical=True)

    def __mul__(self, other):
        if isinstance(other, AlgebraElement):
            return convolve(self, other)
        return self.scale(other)

    __rmul__ = scale

    def star(self):
        # coefficients are real rationals, so conjugation is trivial
        return AlgebraElement(self.graph, {adjoint(s): c for s, c in self._terms})

    def to_json(self):
        return [
            {"alpha": list(s.alpha.edges), "beta": list(s.beta.edges), **({"vertex": s.alpha.s} if not s.alpha.edges and not s.beta.edges else {}), "coeff": fmt(c)}
            for s, c in self._terms
        ]

    @classmethod
    def from_json(cls, graph, doc):
        terms = defaultdict(Fraction)
        for item in doc:
            sym = symbol(graph, item.get("alpha", []), item.get("beta", []), vertex=item.get("vertex"))
            terms[sym] += to_fraction(item.get("coeff", 1))
        return cls(graph, terms)

    def __repr__(self):
        if not self._terms:
            return "AlgebraElement(0)"
        return " + ".join(f"{fmt(c)}*{s.label()}" for s, c in self._terms)


def convolve(f: AlgebraElement, h: AlgebraElement) -> AlgebraElement:
    g = f.graph
    out = defaultdict(Fraction)
    for a, ca in f.items():
        for b, cb in h.items():
            ab = multiply(g, a, b)
            if ab is not None:
                assert ab.degree == a.degree + b.degree
                out[ab] += ca * cb
    return AlgebraElement(g, out)


def all_symbols(g, max_len):
    """Every ``Z(alpha,beta)`` with ``|alpha|, |beta| <= max_len``, in canonical order."""
    by_source = defaultdict(list)
    for p in paths_up_to(g, max_len):
        by_source[p.s].append(p)
    out = []
    for v in sorted(by_source):
        for a in by_source[v]:
            for b in by_source[v]:
                out.append(BisectionSymbol(a, b))
    return sorted(out)


def random_element(g, rng: random.Random, max_len=3, max_terms=3, coeff_range=3):
    syms = []
    paths = paths_up_to(g, max_len)
    for _ in range(rng.randint(1, max_terms)):
        a = rng.choice(paths)
        candidates = [p for p in paths if p.s == a.s]
        syms.append((BisectionSymbol(a, rng.choice(candidates)), Fraction(rng.randint(-coeff_range, coeff_range), rng.randint(1, 2))))
    terms = defaultdict(Fraction)
    for s, c in syms:
        terms[s] += c
    return AlgebraElement(g, terms)


# -- points of the orbit of a truncated base point ---------------------------


@dataclass(frozen=True, order=True)
class OrbitPoint:
    """The point ``word . T^offset(x)`` for a fixed, finitely known base point ``x``.

    ``x`` is represented by a finite path standing for a generic point of
    its cylinder; normal form forbids ``word`` ending in the edge it would
    cancel against (``x[offset-1]``).
    """

    word: tuple
    offset: int

    def label(self):
        return f"{'.'.join(self.word) or '()'}|{self.offset}"


class BasePoint:
    """A depth-truncated point of the path space (a finite path prefix)."""

    def __init__(self, g, path: Path):
        self.graph = g
        self.path = path

    @property
    def depth(self):
        return len(self.path)

    def vertex_at(self, m):
        """Range vertex of ``T^m x``."""
        if m == 0:
            return self.path.r
        return self.graph.src(self.path.edges[m - 1])

    def start(self):
        return OrbitPoint((), 0)

    def range_vertex(self, pt: OrbitPoint):
        if pt.word:
            return self.graph.dst(pt.word[0])
        return self.vertex_at(pt.offset)

    def normalize(self, word, m):
        while word and m > 0 and word[-1] == self.path.edges[m - 1]:
            word, m = word[:-1], m - 1
        return OrbitPoint(tuple(word), m)

    def replace_prefix(self, pt: OrbitPoint, old: Path, new: Path):
        """Image of ``pt`` under the bisection map ``old . z -> new . z``.

        Returns ``None`` when ``pt`` does not start with ``old``.  Raises
        :class:`ResourceError` when deciding needs more of the base point.
        """
        word, m = pt.word, pt.offset
        if not old.edges:
            if self.range_vertex(pt) != old.r:
                return None
            return self.normalize(tuple(new.edges) + word, m)
        k = len(old)
        if len(word) >= k:
            if word[:k] != old.edges:
                return None
            return self.normalize(tuple(new.edges) + word[k:], m)
        if old.edges[: len(word)] != word:
            return None
        need = k - len(word)
        if m + need > self.depth:
            raise ResourceError(f"base point must be known to depth {m + need}", required=m + need)
        if self.path.edges[m : m + need] != old.edges[len(word) :]:
            return None
        return self.normalize(tuple(new.edges), m + need)


def cayley_ball(g: DirectedGraph, S, base: Path, radius: int):
    """Radius-``radius`` ball around the unit in the Cayley graph ``G(x, S)``.

    Vertices are groupoid elements ``h`` with ``r(h) = x`` reachable by at
    most ``radius`` right multiplications by ``S`` or ``S^{-1}``; an edge
    ``h1 -> h2`` means ``h2 = h1 s`` with ``s`` in ``S``.  Each element is
    stored through its source point ``y = word . T^offset(x)``.
    """
    bp = BasePoint(g, base)
    S = list(S)

    def right(pt, s):
        # (x,k,y) * (gamma z, ., delta z) is defined iff y = gamma z; the source becomes delta z
        return bp.replace_prefix(pt, s.alpha, s.beta)

    def right_inv(pt, s):
        return bp.replace_prefix(pt, s.beta, s.alpha)

    start = bp.start()
    dist = {start: 0}
    queue = deque([start])
    while queue:
        pt = queue.popleft()
        if dist[pt] == radius:
            continue
        for s in S:
            for move in (right, right_inv):
                try:
                    nxt = move(pt, s)
                except ResourceError as exc:
                    raise ResourceError(
                        f"radius {radius} needs base point depth {exc.required}", required=exc.required
                    ) from None
                if nxt is not None and nxt not in dist:
                    dist[nxt] = dist[pt] + 1
                    queue.append(nxt)
    verts = sorted(dist)
    edges = []
    for pt in verts:
        for i, s in enumerate(S):
            try:
                nxt = right(pt, s)
            except ResourceError:
                nxt = None
            if nxt is not None and nxt in dist:
                edges.append((f"{pt.label()}*s{i}", pt.label(), nxt.label()))
    ball = DirectedGraph.from_edges([p.label() for p in verts], edges)
    return ball, {p.label(): d for p, d in dist.items()}


def ball_degrees(ball: DirectedGraph, distances, radius):
    """Total degree (in + out) of every interior vertex of a ball."""
    deg = defaultdict(int)
    for e in ball.edges:
        deg[e.src] += 1
        deg[e.dst] += 1
    return {v: deg[v] for v, d in distances.items() if d < radius}


# -- groupoid actions and the lifted shift -----------------------------------


class ActionSpec:
    """A left ``G(X,T)``-space given symbolically.

    Subclasses implement :meth:`anchor` (a path prefix of ``omega(z)``),
    :meth:`act` (the action of one bisection on a symbolic point, ``None``
    off its domain) and :meth:`sample_points`.
    """

    graph: DirectedGraph

    def anchor(self, z) -> Path:
        raise NotImplementedError

    def act(self, sym: BisectionSymbol, z):
        raise NotImplementedError

    def sample_points(self, depth):
        raise NotImplementedError

    def depth(self, z):
        return len(self.anchor(z))


class UnitSpaceAction(ActionSpec):
    """``G(X,T)`` acting on its unit space: ``(x,k,y) . y = x``, anchor the identity."""

    def __init__(self, graph):
        self.graph = graph

    def anchor(self, z):
        return z

    def act(self, sym, z):
        if not sym.beta.is_prefix_of(z):
            return None
        return sym.alpha.concat(self.graph, z.drop(self.graph, len(sym.beta)))

    def sample_points(self, depth):
        return [p for p in paths_up_to(self.graph, depth) if len(p) >= 1]


def shift_symbol(g, z_anchor: Path):
    """The bisection ``Z(s(e), e)`` containing ``(T x, -1, x)`` for ``x`` starting with ``e``."""
    e = z_anchor.edges[0]
    return BisectionSymbol(Path.vertex(g.src(e)), g.path([e]))


class LiftedShift:
    """``T~(z) = (T omega(z), -1, omega(z)) . z`` with its isomorphism checks."""

    def __init__(self, spec: ActionSpec):
        self.spec = spec
        self.graph = spec.graph

    def __call__(self, z):
        x = self.spec.anchor(z)
        if not x.edges:
            raise DomainError("T~ needs a point whose anchor has at least one edge")
        return self.spec.act(shift_symbol(self.graph, x), z)

    def iterate(self, z, n):
        for _ in range(n):
            z = self(z)
        return z

    def _check_axioms(self, points, symbols):
        g, spec = self.graph, self.spec
        for z in points:
            x = spec.anchor(z)
            if spec.act(vertex_symbol(x.r), z) != z:
                raise SpecificationError("unit", f"unit at omega(z) moves {z}")
            for a in symbols:
                gz = spec.act(a, z)
                if gz is None:
                    continue
                if not a.alpha.is_prefix_of(spec.anchor(gz)):
                    raise SpecificationError("anchor", f"omega({a.label()} . z) does not lie in r({a.label()})")
                for b in symbols:
                    bz = spec.act(b, z)
                    if bz is None:
                        continue
                    ab = multiply(g, a, b)
                    lhs = spec.act(a, bz)
                    rhs = spec.act(ab, z) if ab is not None else None
                    if lhs is not None and lhs != rhs:
                        raise SpecificationError("associativity", f"g1.(g2.z) != (g1 g2).z for {a.label()}, {b.label()}")

    def check(self, depth=4, samples=200, seed=0):
        """Verify ``omega o T~ = T o omega`` and that ``Psi`` preserves products.

        Returns a report dict; action-axiom violations raise
        :class:`SpecificationError`.
        """
        g, spec = self.graph, self.spec
        rng = random.Random(seed)
        points = [z for z in spec.sample_points(depth)]
        small = [s for s in all_symbols(g, 1)]
        self._check_axioms(points[: min(len(points), 40)], small)
        failures = []
        for z in points:
            if len(spec.anchor(z)) == 0:
                continue
            tz = self(z)
            if spec.anchor(tz) != spec.anchor(z).drop(g, 1):
                failures.append(f"omega(T~ z) != T omega(z) at {z}")
        # elements of G(Y,T~): (z, m-n, y) with T~^m z = T~^n y
        deep = [z for z in points if spec.depth(z) >= 2]

        def sample_element(y):
            n = rng.randint(0, min(2, spec.depth(y)))
            q = self.iterate(y, n)
            q_anchor = spec.anchor(q)
            # grow alpha leftwards so that s(alpha) = r(omega(q))
            alpha = Path.vertex(q_anchor.r)
            for _ in range(rng.randint(0, 2)):
                e = rng.choice(g.edges_out(alpha.r))
                alpha = Path((e.id,) + alpha.edges, e.dst, alpha.s)
            z = spec.act(BisectionSymbol(alpha, Path.vertex(alpha.s)), q)
            return z, len(alpha) - n, y, alpha, spec.anchor(y).take(g, n)

        checked = 0
        for _ in range(samples):
            if not deep:
                break
            v = rng.choice(deep)
            y, l, v_, a2, b2 = sample_element(v)
            z, k, y_, a1, b1 = sample_element(y)
            assert y_ == y and v_ == v
            # Psi((z,k,y)) = ((omega z, k, omega y), y): the G-element must move y to z
            g1, g2 = BisectionSymbol(a1, b1), BisectionSymbol(a2, b2)
            if spec.act(g1, y) != z:
                failures.append(f"Psi: {g1.label()} . y != z")
            if spec.act(g2, v) != y:
                failures.append(f"Psi: {g2.label()} . v != y")
            prod = multiply(g, g1, g2)
            if prod is None or prod.degree != k + l or spec.act(prod, v) != z:
                failures.append(f"Psi does not preserve the product of {g1.label()} and {g2.label()}")
            checked += 1
        return {"ok": not failures, "failures": failures[:10], "points": len(points), "pairs": checked}


def lift_shift(spec: ActionSpec) -> LiftedShift:
    return LiftedShift(spec)
