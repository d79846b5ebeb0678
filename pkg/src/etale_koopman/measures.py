"""Quasi-invariant measures on path space and their cocycles.

Markov measures are exact (``Fraction``) throughout.  Self-similar
(Hausdorff) weights are irrational in general and are carried as floats;
every exact-equality check then takes an explicit tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from ._rational import fmt, to_fraction
from .errors import DegenerateInputError, DomainError, InputError
from .graph import DirectedGraph, is_hereditary, is_saturated
from .pathspace import Path, paths_of_length, refine


def _num(x):
    return x if isinstance(x, float) else to_fraction(x)


@dataclass(frozen=True)
class MarkovWeights:
    """Vertex distribution ``mu0`` and edge weights ``p`` with ``sum_{dst(e)=v} p(e) = 1``.

    ``null_set`` names a vertex set ``H`` on which the measure is meant to
    vanish (``mu0 = 0`` on ``H`` and ``p = 0`` on edges leaving ``H``).  It
    must be hereditary and saturated along paths; normalisation is then
    only required off ``H`` since no positive cylinder ever visits ``H``.
    """

    graph: DirectedGraph
    mu0: Mapping
    p: Mapping
    null_set: frozenset = field(default_factory=frozenset)
    tol: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "mu0", {str(k): _num(v) for k, v in dict(self.mu0).items()})
        object.__setattr__(self, "p", {str(k): _num(v) for k, v in dict(self.p).items()})
        object.__setattr__(self, "null_set", frozenset(self.null_set))
        self._validate()

    def _close(self, a, b):
        return abs(a - b) <= self.tol if self.tol else a == b

    def _validate(self):
        g, H = self.graph, self.null_set
        for v in g.vertices:
            if v not in self.mu0:
                raise InputError(f"mu0 is missing vertex {v}")
        for e in g.edges:
            if e.id not in self.p:
                raise InputError(f"p is missing edge {e.id}")
        if any(x < 0 for x in self.mu0.values()) or any(x < 0 for x in self.p.values()):
            raise InputError("weights must be non-negative")
        total = sum(self.mu0.values())
        if set(H) == set(g.vertices):
            if total != 0:
                raise InputError("mu0 must vanish when the null set is every vertex")
        elif not self._close(total, 1):
            raise InputError(f"mu0 sums to {total}, not 1")
        if H:
            if not (is_hereditary(g, H, "paths") and is_saturated(g, H, "paths")):
                raise InputError("null set must be hereditary and saturated along paths")
            if any(self.mu0[v] != 0 for v in H):
                raise InputError("mu0 must vanish on the null set")
            if any(self.p[e.id] != 0 for e in g.edges if e.src in H):
                raise InputError("p must vanish on edges e with s(e) in the null set")
        for v in g.vertices:
            into = sum((self.p[e.id] for e in g.edges if e.dst == v), Fraction(0))
            if v in H:
                continue
            if not self._close(into, 1):
                raise InputError(f"sum of p over edges with dst={v} is {into}, not 1")
        if not H:
            if any(x == 0 for x in self.mu0.values()) or any(x == 0 for x in self.p.values()):
                raise InputError("zero weights require a declared null set")

    @classmethod
    def uniform(cls, g: DirectedGraph):
        """``mu0`` uniform on vertices and ``p`` uniform on each ``r^{-1}(v)``."""
        verts = g.sorted_vertices()
        mu0 = {v: Fraction(1, len(verts)) for v in verts}
        p = {}
        for v in verts:
            ins = g.edges_into(v)
            for e in ins:
                p[e.id] = Fraction(1, len(ins))
        return cls(g, mu0, p)

    @classmethod
    def from_json(cls, g, doc, **kw):
        return cls(g, doc["mu0"], doc["p"], **kw)

    def to_json(self):
        return {
            "mu0": {v: fmt(self.mu0[v]) for v in sorted(self.mu0)},
            "p": {e: fmt(self.p[e]) for e in sorted(self.p)},
        }

    def with_mu0(self, mu0):
        return MarkovWeights(self.graph, mu0, self.p, self.null_set, self.tol)

    def is_exact(self):
        return not self.tol


def ideal_weights(g: DirectedGraph, H):
    """Weights vanishing exactly on ``H`` and on edges leaving ``H``, uniform elsewhere.

    ``H`` must be hereditary and saturated along paths (``orientation="paths"``).
    """
    H = frozenset(str(v) for v in H)
    if not is_hereditary(g, H, "paths"):
        raise InputError(f"{sorted(H)} is not hereditary (along paths)")
    if not is_saturated(g, H, "paths"):
        raise InputError(f"{sorted(H)} is not saturated (along paths)")
    live = [v for v in g.sorted_vertices() if v not in H]
    mu0 = {v: (Fraction(1, len(live)) if v not in H else Fraction(0)) for v in g.sorted_vertices()}
    p = {}
    for v in g.sorted_vertices():
        ins = [e for e in g.edges_into(v) if e.src not in H]
        for e in g.edges_into(v):
            p[e.id] = Fraction(1, len(ins)) if (e.src not in H and v not in H) else Fraction(0)
    return MarkovWeights(g, mu0, p, null_set=H)


def cylinder_measure(w: MarkovWeights, alpha: Path):
    """``mu(Z(e1...en)) = mu0(r(e1)) p(e1) ... p(en)``."""
    m = w.mu0[alpha.r]
    for e in alpha.edges:
        m = m * w.p[e]
    return m


def path_weight(w: MarkovWeights, alpha: Path):
    out = Fraction(1)
    for e in alpha.edges:
        out = out * w.p[e]
    return out


def radon_nikodym(w: MarkovWeights, a, tail: Path | None = None):
    """``D(gamma)`` for ``gamma`` in ``Z(alpha, beta)`` as a cylinder-measure ratio.

    ``D = mu(Z(alpha tau)) / mu(Z(beta tau))``; the ratio does not depend
    on the tail ``tau`` and equals ``mu(Z(alpha)) / mu(Z(beta))``.
    """
    g = w.graph
    tail = tail if tail is not None else Path.vertex(a.alpha.s)
    if tail.r != a.alpha.s:
        raise DomainError(f"tail must start at s(alpha) = {a.alpha.s}")
    num = cylinder_measure(w, a.alpha.concat(g, tail))
    den = cylinder_measure(w, a.beta.concat(g, tail))
    if num == 0 or den == 0:
        raise DegenerateInputError(f"{a.label()} meets a zero-measure cylinder; use the kernel regime instead")
    d = num / den
    short = cylinder_measure(w, a.alpha) / cylinder_measure(w, a.beta)
    if w.is_exact():
        assert d == short, "cocycle depends on the tail"
    return d


def edge_cocycle(w: MarkovWeights, e):
    """``D(e x, 1, x)`` for ``x`` in ``Z(s(e))``: ``mu0(r(e)) p(e) / mu0(s(e))``."""
    g = w.graph
    return w.mu0[g.dst(e)] * w.p[e] / w.mu0[g.src(e)]


def markov_potential(w: MarkovWeights):
    """The depth-1 potential ``psi`` with ``L_psi^* mu = mu`` for a Markov ``mu``.

    ``psi(x) = mu0(r(x_1)) p(x_1) / mu0(s(x_1))``; it reduces to
    ``p(x_1)`` when ``mu0`` is uniform.
    """
    return TransferSpec(1, {(e.id,): edge_cocycle(w, e.id) for e in w.graph.edges})


@dataclass(frozen=True)
class SelfSimilarWeights:
    """Contraction ratios and the exponent solving ``sum r_i^s = 1``."""

    ratios: tuple
    hdim: float

    @classmethod
    def solve(cls, ratios, tol=1e-12):
        return cls(tuple(float(to_fraction(r)) for r in ratios), hausdorff_dimension(ratios, tol))

    def residual(self):
        return abs(sum(r ** self.hdim for r in self.ratios) - 1.0)

    def graph(self):
        from .graph import cuntz_graph

        return cuntz_graph(len(self.ratios))

    def markov(self):
        """The Hausdorff measure ``mu(Z(x_0...x_n)) = prod r_{x_i}^s`` as float Markov weights."""
        g = self.graph()
        return MarkovWeights(g, {"v": 1.0}, {f"e{i + 1}": r ** self.hdim for i, r in enumerate(self.ratios)}, tol=1e-9)

    def potential(self):
        """``psi = phi^{-s}`` with ``phi(x) = 1 / r_{x_0}``."""
        return TransferSpec(1, {(f"e{i + 1}",): (1.0 / r) ** (-self.hdim) for i, r in enumerate(self.ratios)})


@dataclass(frozen=True)
class TransferSpec:
    """A positive potential ``psi`` depending on the first ``depth`` edges."""

    depth: int
    values: Mapping

    def __post_init__(self):
        object.__setattr__(self, "values", {tuple(k): _num(v) for k, v in dict(self.values).items()})
        if self.depth < 1:
            raise InputError("potential depth must be >= 1")
        if any(v <= 0 for v in self.values.values()):
            raise InputError("potential must be strictly positive")

    @classmethod
    def constant(cls, g, c):
        return cls(1, {(e,): c for e in g.sorted_edge_ids()})

    @classmethod
    def from_edge_weights(cls, w: MarkovWeights):
        """``psi(x) = p(x_1)``."""
        return cls(1, {(e,): w.p[e] for e in w.graph.sorted_edge_ids()})

    def __call__(self, prefix):
        key = tuple(prefix[: self.depth])
        if len(key) < self.depth:
            raise DomainError(f"potential needs a prefix of depth {self.depth}")
        try:
            return self.values[key]
        except KeyError:
            raise DomainError(f"potential undefined on prefix {key}") from None


def cocycle_Dpsi(psi: TransferSpec, a, tail: Path | None = None):
    """``D_psi(x, m-n, y) = prod_{i<m} psi(T^i x) / prod_{j<n} psi(T^j y)``.

    ``x = alpha tau ...``, ``y = beta tau ...``; the tail must supply
    ``psi.depth - 1`` edges past the bisection's prefixes.
    """
    tail_edges = tuple(tail.edges) if tail is not None else ()
    need = psi.depth - 1
    if (len(a.alpha) or len(a.beta)) and len(tail_edges) < need:
        raise DomainError(f"D_psi on {a.label()} needs a tail of depth {need}")
    x = a.alpha.edges + tail_edges
    y = a.beta.edges + tail_edges
    num = den = Fraction(1)
    for i in range(len(a.alpha)):
        num = num * psi(x[i:])
    for j in range(len(a.beta)):
        den = den * psi(y[j:])
    return num / den


def transfer_apply(g, psi: TransferSpec, f: Mapping, depth: int):
    """``(L_psi f)(x) = sum_{T y = x} psi(y) f(y)`` on cylinder functions.

    ``f`` maps depth-``depth`` paths to coefficients; the result lives on
    depth ``depth - 1``.
    """
    if depth < 1:
        raise DomainError("transfer operator needs a depth >= 1 input")
    if depth < psi.depth:
        raise DomainError(f"input depth {depth} is below the potential depth {psi.depth}")
    out = {}
    for beta in paths_of_length(g, depth - 1):
        acc = 0
        for e in g.edges_out(beta.r):
            key = Path((e.id,), e.dst, e.src).concat(g, beta)
            c = f.get(key, 0)
            if c:
                acc = acc + psi(key.edges) * c
        if acc:
            out[beta] = acc
    return out


def integrate(w: MarkovWeights, f: Mapping):
    return sum((c * cylinder_measure(w, alpha) for alpha, c in f.items()), Fraction(0))


def is_transfer_fixed(w: MarkovWeights, psi: TransferSpec, depth: int):
    """Check ``int L_psi f dmu = int f dmu`` for every cylinder indicator of depth ``<= depth``.

    Returns ``(ok, first_violating_path)``.  Indicators shallower than the
    potential are refined to its depth first.
    """
    if depth < 1:
        raise DomainError("depth must be >= 1")
    g = w.graph
    tol = w.tol
    for k in range(0, depth + 1):
        for gamma in paths_of_length(g, k):
            work = max(k, psi.depth, 1)
            f = {leaf: 1 for leaf in refine(g, gamma, work)}
            lhs = integrate(w, transfer_apply(g, psi, f, work))
            rhs = integrate(w, f)
            if (abs(lhs - rhs) > tol) if tol else (lhs != rhs):
                return False, gamma
    return True, None


def hausdorff_dimension(ratios, tol=1e-12):
    """Solve ``r_1^s + ... + r_k^s = 1`` by bisection.

    The map ``s -> sum r_i^s`` is strictly decreasing from ``k`` at
    ``s = 0``; the upper bracket is doubled until the sum drops below 1.
    """
    rs = [float(to_fraction(r)) for r in ratios]
    if len(rs) < 2:
        raise InputError("need at least two ratios")
    if any(not (0 < r < 1) for r in rs):
        raise InputError("ratios must lie in (0, 1)")
    if tol <= 0:
        raise InputError("tolerance must be positive")

    def h(s):
        return math.fsum(r ** s for r in rs) - 1.0

    lo, hi = 0.0, 1.0
    while h(hi) > 0:
        lo, hi = hi, 2 * hi
    while True:
        mid = 0.5 * (lo + hi)
        val = h(mid)
        if abs(val) <= tol or hi - lo <= 4 * math.ulp(mid):
            return mid
        if val > 0:
            lo = mid
        else:
            hi = mid


def kms_state_eval(w: MarkovWeights, f):
    """``phi_mu(f) = int f|_{G^(0)} dmu``: diagonal symbols weighted by cylinder mass."""
    total = Fraction(0)
    for s, c in f.items():
        if s.alpha == s.beta:
            total += c * cylinder_measure(w, s.alpha)
    return total


def kms_inverse_temperature(w: MarkovWeights, tol=0.0):
    """``beta`` with ``D = exp(-beta c)``, or ``None`` if the edge cocycle is not constant."""
    vals = sorted({edge_cocycle(w, e) for e in w.graph.sorted_edge_ids()})
    if not vals:
        return None
    if (vals[-1] - vals[0] > tol) if tol else len(vals) > 1:
        return None
    return -math.log(float(vals[0]))


def quasi_invariance_defect(w: MarkovWeights, e, depth, cocycle):
    """Largest ``|mu(Z(e sigma)) - cocycle * mu(Z(sigma))|`` over ``|sigma| = depth``.

    Zero for the cocycle of ``Z(e, s(e))``; used to compare candidate
    Radon-Nikodym formulas against the change-of-variables identity.
    """
    g = w.graph
    worst = Fraction(0)
    for sigma in paths_of_length(g, depth):
        if sigma.r != g.src(e):
            continue
        lhs = cylinder_measure(w, Path((e,), g.dst(e), g.src(e)).concat(g, sigma))
        rhs = cocycle * cylinder_measure(w, sigma)
        worst = max(worst, abs(lhs - rhs))
    return worst


def random_weights(g: DirectedGraph, rng, uniform_mu0=True, denominator=12):
    """Seeded positive rational weights; ``mu0`` is uniform unless asked otherwise."""
    verts = g.sorted_vertices()
    if uniform_mu0:
        mu0 = {v: Fraction(1, len(verts)) for v in verts}
    else:
        raw = {v: rng.randint(1, denominator) for v in verts}
        tot = sum(raw.values())
        mu0 = {v: Fraction(x, tot) for v, x in raw.items()}
    p = {}
    for v in verts:
        ins = g.edges_into(v)
        raw = [rng.randint(1, denominator) for _ in ins]
        tot = sum(raw)
        for e, x in zip(ins, raw):
            p[e.id] = Fraction(x, tot)
    return MarkovWeights(g, mu0, p)
