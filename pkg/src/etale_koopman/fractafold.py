"""Symbolic fractafold bundle of a totally disconnected IFS.

Blow-ups follow ``F_{w(n)}^{-1} = F_{w_1}^{-1} o ... o F_{w_n}^{-1}``.
Fractal words are addresses, ``F_u(K) = F_{u_1} o ... o F_{u_k}(K)``.
A cell ``(w, n, u)`` stands for ``Z(w) x F_{w(n)}^{-1}(F_u(K))``.  Since
``F_{w(n)}^{-1}(A) = F_{w(n+1)}^{-1}(F_{w_{n+1}}(A))`` its normal form is
``(w, |w|, reversed(w[n:]) + u)``.  Cells are in bijection with words only when
the pieces ``F_i(K)`` are disjoint, so nothing else is accepted.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

from ._rational import fmt, to_fraction
from .errors import InputError, ResourceError
from .graph import cuntz_graph
from .groupoid import ActionSpec
from .koopman import KoopmanMatrix
from .measures import MarkovWeights
from .pathspace import Path
from .sparse import SparseRationalMatrix


@dataclass(frozen=True)
class IFSSpec:
    N: int
    weights: tuple
    ratios: tuple = ()
    totally_disconnected: bool = True

    def __post_init__(self):
        if self.N < 2:
            raise InputError("an IFS needs at least two maps")
        w = tuple(to_fraction(x) for x in self.weights) if self.weights else (Fraction(1, self.N),) * self.N
        object.__setattr__(self, "weights", w)
        if len(w) != self.N:
            raise InputError(f"expected {self.N} weights, got {len(w)}")
        if any(x <= 0 for x in w):
            raise InputError("weights must be strictly positive")
        if sum(w) != 1:
            raise InputError(f"weights sum to {fmt(sum(w))}, not 1")
        if not self.totally_disconnected:
            raise InputError("only totally disconnected IFS are supported")

    @classmethod
    def uniform(cls, N):
        return cls(N, ())

    @classmethod
    def from_json(cls, doc):
        return cls(int(doc["N"]), tuple(doc.get("weights") or ()), tuple(doc.get("ratios") or ()), bool(doc.get("totally_disconnected", False)))

    def to_json(self):
        doc = {"N": self.N, "weights": [fmt(x) for x in self.weights], "totally_disconnected": True}
        if self.ratios:
            doc["ratios"] = [str(r) for r in self.ratios]
        return doc

    def labels(self):
        return tuple(range(1, self.N + 1))

    def p(self, i):
        return self.weights[i - 1]

    def word_weight(self, word):
        out = Fraction(1)
        for i in word:
            out *= self.p(i)
        return out


@dataclass(frozen=True, order=True)
class FractafoldCell:
    base: tuple
    level: int
    fractal: tuple

    def __post_init__(self):
        object.__setattr__(self, "base", tuple(int(i) for i in self.base))
        object.__setattr__(self, "fractal", tuple(int(i) for i in self.fractal))
        if not 0 <= self.level <= len(self.base):
            raise InputError(f"blow-up level {self.level} must lie in [0, {len(self.base)}]")

    def normal(self):
        n = len(self.base)
        if self.level == n:
            return self
        return FractafoldCell(self.base, n, tuple(reversed(self.base[self.level :])) + self.fractal)

    def is_normal(self):
        return self.level == len(self.base)

    @classmethod
    def from_json(cls, doc):
        return cls(tuple(doc["base"]), int(doc["level"]), tuple(doc["fractal"]))

    def to_json(self):
        return {"base": list(self.base), "level": self.level, "fractal": list(self.fractal)}

    def label(self):
        return f"{''.join(map(str, self.base)) or '-'}/{self.level}/{''.join(map(str, self.fractal)) or '-'}"


def _check_labels(spec, word):
    for i in word:
        if not 1 <= i <= spec.N:
            raise InputError(f"branch label {i} is not in 1..{spec.N}")


def mu_infinity(spec: IFSSpec, cell: FractafoldCell):
    """``nu(T^n Z(w)) * mu(F_{w(n)}(A))`` for ``A = F_{w(n)}^{-1}(F_u K)``.

    Both factors are products of branch weights: ``nu(Z(w[n:]))`` and
    ``mu(F_u K)``.
    """
    _check_labels(spec, cell.base + cell.fractal)
    return spec.word_weight(cell.base[cell.level :]) * spec.word_weight(cell.fractal)


def refine_base(cell: FractafoldCell, spec: IFSSpec):
    """Split ``Z(w)`` into the ``Z(wj)``; results are normal."""
    c = cell.normal()
    return [FractafoldCell(c.base + (j,), c.level + 1, (j,) + c.fractal) for j in spec.labels()]


def refine_fractal(cell: FractafoldCell, spec: IFSSpec):
    """Split ``F_u K`` into the ``F_{uj} K``."""
    c = cell.normal()
    return [FractafoldCell(c.base, c.level, c.fractal + (j,)) for j in spec.labels()]


def cells(spec: IFSSpec, L: int, m: int):
    """Normal cells with ``|w| = L`` and ``|u| = m``; they partition the level-``L`` blow-up."""
    ws = list(itertools.product(spec.labels(), repeat=L))
    us = list(itertools.product(spec.labels(), repeat=m))
    return [FractafoldCell(w, L, u) for w in ws for u in us]


def action_image(cell: FractafoldCell, alpha: tuple, beta: tuple):
    """Image of a cell under ``Z(alpha, beta)``, or ``None`` if ``w`` does not start with ``beta``."""
    c = cell.normal()
    k = len(beta)
    if c.base[:k] != tuple(beta):
        return None
    w = tuple(alpha) + c.base[k:]
    return FractafoldCell(w, len(w), c.fractal)


def fractafold_isometry(spec: IFSSpec, i: int, L: int, fractal_depth: int | None = None):
    """``kappa(S_i)`` from level ``L-1`` cells to level ``L`` cells.

    ``kappa(S_i) xi (x, t) = xi(T x, F_i t)`` on ``Z(i)`` sends the cell over
    ``w`` to the cell over ``iw``; both have the same ``mu_infinity``, so
    the coefficient between normalised indicators is 1.
    """
    if L < 1:
        raise ResourceError("kappa(S_i) needs a working level L >= 1", required=1)
    _check_labels(spec, (i,))
    m = L - 1 if fractal_depth is None else fractal_depth
    dom = cells(spec, L - 1, m)
    cod = cells(spec, L, m)
    idx = {c: k for k, c in enumerate(cod)}
    entries = {}
    for j, c in enumerate(dom):
        img = action_image(c, (i,), ())
        entries[(idx[img], j)] = 1
    return KoopmanMatrix(L - 1, {1: SparseRationalMatrix(cod, dom, entries)})


def cell_vector(spec, target_cells, region: FractafoldCell):
    """Coordinates of ``1_region`` in the normalised basis of ``target_cells``.

    Entries are ``sqrt(mu(cell))``, returned squared (exact) as a dict
    index -> ``mu(cell)`` for cells contained in the region.
    """
    reg = region.normal()
    out = {}
    for k, c in enumerate(target_cells):
        if _contained(c, reg):
            out[k] = mu_infinity(spec, c)
    return out


def _contained(c: FractafoldCell, reg: FractafoldCell):
    """Whether normal cell ``c`` lies inside normal cell ``reg``."""
    k = len(reg.base)
    if len(c.base) < k or c.base[:k] != reg.base:
        return False
    # push reg down to c's base length
    frac = tuple(reversed(c.base[k:])) + reg.fractal
    return c.fractal[: len(frac)] == frac


def verify_on_fractafold(spec: IFSSpec, L: int):
    """Nonvanishing and the O_N relations for the ``kappa(S_i)`` at level ``L``."""
    if L < 1:
        raise ResourceError("level must be >= 1", required=1)
    m = L - 1
    checks = []

    def record(name, ok, witness=None):
        item = {"identity": name, "status": "pass" if ok else "fail"}
        if not ok and witness is not None:
            item["witness"] = witness
        checks.append(item)

    S = {i: fractafold_isometry(spec, i, L, m).block(1) for i in spec.labels()}
    dom = cells(spec, L - 1, m)
    cod = cells(spec, L, m)
    whole = FractafoldCell((), 0, ())
    v0 = cell_vector(spec, dom, whole)
    for i, M in S.items():
        # kappa(S_i) 1_{F_0}: squared coordinates must match 1_{Z(i) x F_i^{-1}(K)}
        img = {}
        for (r, c), val in M.entries.items():
            if c in v0:
                img[r] = img.get(r, 0) + val * val * v0[c]
        target = cell_vector(spec, cod, FractafoldCell((i,), 1, ()))
        record(f"kappa(S_{i}) 1_F0 = 1_(Z({i}) x F_{i}^-1 K)", img == target)
        record(f"kappa(S_{i}) != 0", not M.is_zero())
    I_dom = SparseRationalMatrix.identity(dom)
    I_cod = SparseRationalMatrix.identity(cod)
    total = None
    for i in spec.labels():
        for j in spec.labels():
            prod = S[i].T @ S[j]
            want = I_dom if i == j else SparseRationalMatrix(dom, dom)
            diff = prod.first_difference(want)
            name = f"S_{i}^* S_{j} = {'I' if i == j else '0'}"
            record(name, diff is None, None if diff is None else {"row": diff[0].label(), "col": diff[1].label()})
        term = S[i] @ S[i].T
        total = term if total is None else total + term
    diff = total.first_difference(I_cod)
    record("sum_i S_i S_i^* = I", diff is None, None if diff is None else {"row": diff[0].label(), "col": diff[1].label()})
    failed = [c for c in checks if c["status"] != "pass"]
    return {
        "check": "fractafold",
        "ifs": spec.to_json(),
        "level": L,
        "status": "pass" if not failed else "fail",
        "identities": checks,
        "first_failure": failed[0] if failed else None,
    }


def unit_space_model(spec: IFSSpec):
    """The ``O_N`` path-space model with edges ``e1..eN`` carrying the IFS weights."""
    g = cuntz_graph(spec.N)
    return g, MarkovWeights(g, {"v": Fraction(1)}, {f"e{i}": spec.p(i) for i in spec.labels()})


def word_to_path(g, word):
    return g.path([f"e{i}" for i in word]) if word else Path.vertex("v")


class FractafoldAction(ActionSpec):
    """``G(X,T)`` acting on fractafold cells through the anchor ``omega(x, t) = x``."""

    def __init__(self, spec: IFSSpec, fractal_depth=1):
        self.ifs = spec
        self.graph, _ = unit_space_model(spec)
        self.fractal_depth = fractal_depth

    def anchor(self, z):
        return word_to_path(self.graph, z.normal().base)

    def act(self, sym, z):
        alpha = tuple(int(e[1:]) for e in sym.alpha.edges)
        beta = tuple(int(e[1:]) for e in sym.beta.edges)
        return action_image(z, alpha, beta)

    def sample_points(self, depth):
        out = []
        for L in range(1, depth + 1):
            out.extend(cells(self.ifs, L, self.fractal_depth))
        return out
