"""Finite paths, cylinders and the one-sided shift on a graph's path space."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DomainError, InputError


@dataclass(frozen=True, order=True)
class Path:
    """A finite path ``e1 ... ek`` with ``dst(e_{i+1}) == src(e_i)``.

    ``r`` is the range vertex ``dst(e1)`` and ``s`` the source vertex
    ``src(ek)``; an empty path is just a vertex with ``r == s``.
    Ordering is by edge tuple first, which gives the canonical order.
    """

    edges: tuple
    r: str
    s: str

    @classmethod
    def vertex(cls, v):
        return cls((), str(v), str(v))

    @classmethod
    def from_edges(cls, g, edge_ids, vertex=None):
        edge_ids = tuple(str(e) for e in edge_ids)
        if not edge_ids:
            if vertex is None:
                raise InputError("an empty path needs its vertex")
            if vertex not in g.vertices:
                raise InputError(f"unknown vertex {vertex!r}")
            return cls.vertex(vertex)
        for a, b in zip(edge_ids, edge_ids[1:]):
            if g.dst(b) != g.src(a):
                raise InputError(f"edges {a},{b} do not compose: dst({b}) != src({a})")
        p = cls(edge_ids, g.dst(edge_ids[0]), g.src(edge_ids[-1]))
        if vertex is not None and vertex != p.r:
            raise InputError(f"path starts at {p.r}, not {vertex}")
        return p

    def __len__(self):
        return len(self.edges)

    def is_prefix_of(self, other: "Path") -> bool:
        if len(self) > len(other):
            return False
        if not self.edges:
            return self.r == other.r
        return other.edges[: len(self)] == self.edges

    def concat(self, g, other: "Path") -> "Path":
        if other.r != self.s:
            raise DomainError(f"cannot append a path at {other.r} to one ending at {self.s}")
        if not other.edges:
            return self
        if not self.edges:
            return other
        return Path(self.edges + other.edges, self.r, other.s)

    def drop(self, g, k) -> "Path":
        """Remove the first ``k`` edges."""
        if k > len(self):
            raise DomainError("cannot drop more edges than the path has")
        if k == 0:
            return self
        if k == len(self):
            return Path.vertex(self.s)
        rest = self.edges[k:]
        return Path(rest, g.dst(rest[0]), self.s)

    def take(self, g, k) -> "Path":
        """The prefix of length ``k``."""
        if k > len(self):
            raise DomainError("prefix longer than the path")
        if k == 0:
            return Path.vertex(self.r)
        head = self.edges[:k]
        return Path(head, self.r, g.src(head[-1]))

    def to_json(self):
        return list(self.edges) if self.edges else {"vertex": self.r}

    @classmethod
    def from_json(cls, g, doc):
        if isinstance(doc, dict):
            return cls.from_edges(g, (), vertex=str(doc["vertex"]))
        return cls.from_edges(g, doc)

    def label(self):
        return ".".join(self.edges) if self.edges else f"[{self.r}]"


def paths_of_length(g, n):
    """Every path of length ``n`` in canonical order; ``n == 0`` gives the vertices."""
    if n < 0:
        raise DomainError("path length must be >= 0")
    if n == 0:
        return [Path.vertex(v) for v in g.sorted_vertices()]
    level = [Path((e,), g.dst(e), g.src(e)) for e in g.sorted_edge_ids()]
    for _ in range(n - 1):
        nxt = []
        for p in level:
            for e in g.edges_into(p.s):
                nxt.append(Path(p.edges + (e.id,), p.r, e.src))
        level = nxt
    return sorted(level)


def paths_up_to(g, n):
    out = []
    for k in range(n + 1):
        out.extend(paths_of_length(g, k))
    return out


def shift(g, alpha: Path) -> Path:
    """Drop the first edge (the shift ``T`` on finite prefixes)."""
    if not alpha.edges:
        raise DomainError("the shift is undefined on an empty path")
    return alpha.drop(g, 1)


def prepend(g, e, alpha: Path) -> Path:
    """``e`` followed by ``alpha``; needs ``src(e) == r(alpha)``."""
    return Path((e,), g.dst(e), g.src(e)).concat(g, alpha)


def extensions(g, alpha: Path, k):
    """All paths ``alpha eps`` with ``|eps| == k``, in canonical order."""
    level = [alpha]
    for _ in range(k):
        level = [Path(p.edges + (e.id,), p.r, e.src) for p in level for e in g.edges_into(p.s)]
    return sorted(level)


def refine(g, alpha: Path, n):
    """Extensions of ``alpha`` to length ``n``; their cylinders partition ``Z(alpha)``."""
    if n < len(alpha):
        raise DomainError(f"target depth {n} is below the path length {len(alpha)}")
    return extensions(g, alpha, n - len(alpha))
