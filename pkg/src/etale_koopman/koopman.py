"""Exact finite realisations of the Koopman and regular representations.

Operators act between depth-indexed cylinder spaces.  ``V_L`` is spanned
by the normalised indicators ``chi_alpha / sqrt(mu(Z(alpha)))`` with
``|alpha| = L`` and ``mu(Z(alpha)) > 0``.  Using the measure-ratio
cocycle, ``kappa(1_{Z(alpha,beta)})`` sends the basis vector at
``beta tau`` to the one at ``alpha tau`` with coefficient exactly 1, so a
degree-``k`` element is an exact rational map ``V_L -> V_{L+k}``.
Elements of mixed degree are stored block by block; real numbers only
enter when norms of compressions are computed.
"""

from __future__ import annotations

import math
import os
import random
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.sparse as sp

from ._rational import exact_sqrt, fmt
from .errors import InputError, ResourceError
from .graph import is_hereditary, is_saturated
from .groupoid import AlgebraElement, BasePoint, OrbitPoint, all_symbols, edge_symbol, vertex_symbol
from .measures import MarkovWeights, cylinder_measure, ideal_weights
from .pathspace import Path, paths_of_length, paths_up_to, refine

THREADS_ENV = "ETALE_KOOPMAN_THREADS"


def default_workers():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


class CylinderBasis:
    """Positive-measure cylinders of depth ``L`` in canonical order."""

    def __init__(self, w: MarkovWeights, depth: int):
        self.weights = w
        self.depth = depth
        self.paths = tuple(p for p in paths_of_length(w.graph, depth) if cylinder_measure(w, p) > 0)
        self.index = {p: i for i, p in enumerate(self.paths)}

    def __len__(self):
        return len(self.paths)

    def labels(self):
        return self.paths


_basis_cache = {}


def cylinder_basis(w, depth):
    key = (id(w), depth)
    hit = _basis_cache.get(key)
    if hit is None or hit[0] is not w:
        if len(_basis_cache) > 256:
            _basis_cache.clear()
        hit = (w, CylinderBasis(w, depth))
        _basis_cache[key] = hit
    return hit[1]


@dataclass
class KoopmanMatrix:
    """``kappa(f)`` restricted to ``V_{domain_depth}``, one exact block per degree.

    ``blocks[k]`` maps ``V_L`` into ``V_{L+k}``; ``codomain_depth`` is the
    deepest target level.
    """

    domain_depth: int
    blocks: dict
    element: AlgebraElement | None = None
    weights: MarkovWeights | None = field(default=None, repr=False)

    @property
    def codomain_depth(self):
        if not self.blocks:
            return self.domain_depth
        return self.domain_depth + max(self.blocks)

    def block(self, k):
        if k in self.blocks:
            return self.blocks[k]
        w = self.weights
        return _zero_block(w, self.domain_depth, self.domain_depth + k)

    def is_zero(self):
        return all(b.is_zero() for b in self.blocks.values())

    def __eq__(self, other):
        if not isinstance(other, KoopmanMatrix) or self.domain_depth != other.domain_depth:
            return False
        ks = set(self.blocks) | set(other.blocks)
        return all(self.block(k) == other.block(k) for k in ks)

    def to_json(self):
        out = []
        for k in sorted(self.blocks):
            b = self.blocks[k]
            out.append(
                {
                    "rows": len(b.rows),
                    "cols": len(b.cols),
                    "entries": b.triplets(),
                    "domain_depth": self.domain_depth,
                    "codomain_depth": self.domain_depth + k,
                    "row_basis": [p.to_json() for p in b.rows],
                    "col_basis": [p.to_json() for p in b.cols],
                }
            )
        return out

    def to_csv(self):
        lines = ["degree,row,col,value"]
        for k in sorted(self.blocks):
            for i, j, v in self.blocks[k].triplets():
                lines.append(f"{k},{i},{j},{v}")
        return "\n".join(lines) + "\n"


def _zero_block(w, dom, cod):
    from .sparse import SparseRationalMatrix

    rows = cylinder_basis(w, cod).paths if cod >= 0 else ()
    return SparseRationalMatrix(rows, cylinder_basis(w, dom).paths)


def _assemble(items, w, L, k, workers):
    from .sparse import SparseRationalMatrix

    g = w.graph
    dom = cylinder_basis(w, L)
    cod = cylinder_basis(w, L + k)

    def work(chunk):
        part = []
        for sym, c in chunk:
            for src in refine(g, sym.beta, L):
                j = dom.index.get(src)
                if j is None:
                    continue
                tgt = sym.alpha.concat(g, src.drop(g, len(sym.beta)))
                i = cod.index.get(tgt)
                if i is not None:
                    part.append((i, j, c))
        return part

    if workers > 1 and len(items) > 1:
        chunks = [items[i::workers] for i in range(workers)]
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(work, chunks))
    else:
        parts = [work(items)]
    acc = defaultdict(Fraction)
    # summation order is fixed by sorting, so the result is independent of the worker count
    for i, j, c in sorted(t for part in parts for t in part):
        acc[(i, j)] += c
    return SparseRationalMatrix(cod.paths, dom.paths, acc)


def koopman_matrix(f: AlgebraElement, w: MarkovWeights, L: int, headroom: int = 0, workers: int | None = None):
    """Exact matrix of ``kappa^mu(f)`` on ``V_L``.

    Needs ``L >= max|beta| + headroom`` so that ``f`` is defined on every
    level a planned composition may feed it.
    """
    required = f.max_beta() + headroom
    if L < required:
        raise ResourceError(f"depth {L} is too small; need L >= {required} (max |beta| = {f.max_beta()}, headroom {headroom})", required=required)
    workers = workers or default_workers()
    by_deg = defaultdict(list)
    for s, c in f.items():
        by_deg[s.degree].append((s, c))
    blocks = {}
    for k, items in sorted(by_deg.items()):
        if L + k < 0:
            raise ResourceError(f"degree {k} sends depth {L} below zero", required=-k)
        blocks[k] = _assemble(items, w, L, k, workers)
    return KoopmanMatrix(L, blocks, f, w)


def compose(f: AlgebraElement, gm: KoopmanMatrix, w: MarkovWeights):
    """``kappa(f) kappa(g)`` on ``V_L`` given ``kappa(g)`` there, block by block."""
    L = gm.domain_depth
    out = {}
    for k2, B in gm.blocks.items():
        fm = koopman_matrix(f, w, L + k2)
        for k1, A in fm.blocks.items():
            prod = A @ B
            k = k1 + k2
            out[k] = out[k] + prod if k in out else prod
    return KoopmanMatrix(L, {k: m for k, m in out.items()}, None, w)


def adjoint_matches(f: AlgebraElement, w: MarkovWeights, L: int):
    """``kappa(f^*)`` on ``V_{L+k}`` equals the transpose of ``kappa(f)``'s degree-``k`` block."""
    fm = koopman_matrix(f, w, L)
    for k, B in fm.blocks.items():
        # only the degree-k part lands in this block; it alone needs depth L + k
        other = koopman_matrix(f.homogeneous(k).star(), w, L + k)
        if other.block(-k) != B.T:
            return False
    return True


def _report(name, checks):
    failed = [c for c in checks if c["status"] != "pass"]
    return {"check": name, "status": "pass" if not failed else "fail", "identities": checks}


def _check(identity, lhs, rhs):
    diff = lhs.first_difference(rhs)
    if diff is None:
        return {"identity": identity, "status": "pass"}
    r, c, a, b = diff
    return {"identity": identity, "status": "fail", "witness": {"row": r.to_json(), "col": c.to_json(), "lhs": fmt(a), "rhs": fmt(b)}}


def edge_shorthand_matrix(w: MarkovWeights, e, L):
    """``S_e`` built from the edge-only cocycle ``1/p(e)`` (ignoring ``mu0``).

    In the normalised basis its entries are ``sqrt(mu0(r(e)) / mu0(s(e)))``;
    only ratios that are rational squares can be represented exactly.
    """
    g = w.graph
    ratio = w.mu0[g.dst(e)] / w.mu0[g.src(e)]
    c = exact_sqrt(ratio)
    if c is None:
        raise InputError(f"sqrt({ratio}) is irrational; pick mu0 with square ratios")
    return koopman_matrix(AlgebraElement.of(g, edge_symbol(g, e), c), w, L).block(1)


def verify_cuntz_krieger(g, w: MarkovWeights, L: int, edge_matrix=None):
    """Check the Cuntz-Krieger relations exactly on ``V_L`` and ``V_{L+1}``.

    ``P_v^* = P_v = P_v^2``, ``sum_v P_v = I``, ``S_e^* S_e = P_{s(e)}`` and
    ``sum_{dst(e)=v} S_e S_e^* = P_v``.  ``edge_matrix(w, e, L)`` may
    replace the construction of ``S_e`` (used for negative controls).
    """
    if w.null_set:
        raise InputError("degenerate weights: use kernel_ideal for the ideal regime")
    if L < 2:
        raise ResourceError("Cuntz-Krieger verification needs L >= 2", required=2)
    checks = []
    P = {}
    for lvl in (L, L + 1):
        basis = cylinder_basis(w, lvl).paths
        total = None
        for v in g.sorted_vertices():
            m = koopman_matrix(AlgebraElement.of(g, vertex_symbol(v)), w, lvl).block(0)
            P[(v, lvl)] = m
            checks.append(_check(f"P_{v}^* = P_{v} (depth {lvl})", m.T, m))
            checks.append(_check(f"P_{v}^2 = P_{v} (depth {lvl})", m @ m, m))
            total = m if total is None else total + m
        from .sparse import SparseRationalMatrix

        checks.append(_check(f"sum_v P_v = I (depth {lvl})", total, SparseRationalMatrix.identity(basis)))
    S = {}
    for e in g.sorted_edge_ids():
        if edge_matrix is None:
            S[e] = koopman_matrix(AlgebraElement.of(g, edge_symbol(g, e)), w, L).block(1)
        else:
            S[e] = edge_matrix(w, e, L)
        adj = koopman_matrix(AlgebraElement.of(g, edge_symbol(g, e)).star(), w, L + 1).block(-1)
        if edge_matrix is None:
            checks.append(_check(f"kappa(S_{e}^*) = S_{e}^T", adj, S[e].T))
        checks.append(_check(f"S_{e}^* S_{e} = P_{g.src(e)}", S[e].T @ S[e], P[(g.src(e), L)]))
    for v in g.sorted_vertices():
        total = None
        for e in g.edges_into(v):
            term = S[e.id] @ S[e.id].T
            total = term if total is None else total + term
        checks.append(_check(f"sum_(dst(e)={v}) S_e S_e^* = P_{v} (depth {L + 1})", total, P[(v, L + 1)]))
    rep = _report("cuntz-krieger", checks)
    rep["depth"] = L
    first = next((c for c in checks if c["status"] != "pass"), None)
    rep["first_failure"] = first
    return rep


def kernel_ideal(g, H, L: int):
    """Compare the vanishing Koopman generators with the ideal ``I(H)``.

    Weights vanish exactly on ``H`` and on the edges leaving it.  For every
    ``Z(alpha, beta)`` with ``|alpha|, |beta| <= L`` the matrix must be zero
    iff ``s(alpha)`` lies in ``H``.  ``H`` must be hereditary and saturated
    along paths (``orientation="paths"``).
    """
    H = frozenset(str(v) for v in H)
    if not is_hereditary(g, H, "paths"):
        raise InputError(f"H = {sorted(H)} violates hereditary closure (along paths)")
    if not is_saturated(g, H, "paths"):
        raise InputError(f"H = {sorted(H)} violates the saturation condition (along paths)")
    w = ideal_weights(g, H)
    mismatches = []
    zero_count = 0
    syms = all_symbols(g, L)
    for s in syms:
        m = koopman_matrix(AlgebraElement(g, {s: 1}, canonical=True), w, max(len(s.beta), 0))
        zero = m.is_zero()
        zero_count += zero
        if zero != (s.alpha.s in H):
            mismatches.append(s.label())
    return {
        "check": "kernel-ideal",
        "status": "pass" if not mismatches else "fail",
        "H": sorted(H),
        "symbols": len(syms),
        "vanishing": zero_count,
        "mismatches": mismatches[:20],
    }


# -- real-valued compressions and norms -------------------------------------


def embedding(w: MarkovWeights, a: int, b: int):
    """Isometry ``V_a -> V_b`` (``a <= b``) from ``chi_gamma = sum chi_{gamma eps}``."""
    g = w.graph
    src = cylinder_basis(w, a)
    dst = cylinder_basis(w, b)
    rows, cols, vals = [], [], []
    for j, gamma in enumerate(src.paths):
        mg = cylinder_measure(w, gamma)
        for ext in refine(g, gamma, b):
            i = dst.index.get(ext)
            if i is not None:
                rows.append(i)
                cols.append(j)
                vals.append(math.sqrt(float(cylinder_measure(w, ext) / mg)))
    return sp.csr_matrix((vals, (rows, cols)), shape=(len(dst), len(src)))


def koopman_compression(f: AlgebraElement, w: MarkovWeights, L: int):
    """``P_L kappa(f) P_L`` as a float matrix on ``V_L``.

    The spaces ``V_L`` increase with ``L``, so the norms of these
    compressions never decrease and never exceed ``||kappa(f)||``.
    """
    M = max(L, f.max_beta())
    km = koopman_matrix(f, w, M)
    F = max([L] + [M + k for k in km.blocks])
    n_dom = len(cylinder_basis(w, L))
    total = sp.csr_matrix((len(cylinder_basis(w, F)), n_dom))
    J_in = embedding(w, L, M)
    for k, B in km.blocks.items():
        total = total + embedding(w, M + k, F) @ B.to_scipy() @ J_in
    return (embedding(w, L, F).T @ total).tocsr()


def operator_norm(m, tol=1e-12, max_iter=200000, return_info=False):
    """Largest singular value by power iteration on ``m^T m``.

    The start vector is fixed (seeded), and iteration stops once the
    Rayleigh quotient moves by less than ``tol`` relatively and the
    eigen-residual is small.
    """
    from .sparse import SparseRationalMatrix

    if isinstance(m, SparseRationalMatrix):
        m = m.to_scipy()
    elif not sp.issparse(m):
        m = np.asarray(m, dtype=float)
    n = m.shape[1]
    if n == 0 or m.shape[0] == 0:
        return (0.0, {"iterations": 0, "converged": True}) if return_info else 0.0
    mt = m.T
    v = np.random.default_rng(12345).standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    it = 0
    converged = False
    for it in range(1, max_iter + 1):
        wv = mt @ (m @ v)
        new = float(v @ wv)
        nw = np.linalg.norm(wv)
        if nw == 0.0:
            lam, converged = 0.0, True
            break
        resid = np.linalg.norm(wv - new * v)
        if abs(new - lam) <= tol * max(abs(new), 1e-300) and resid <= 1e-7 * max(new, 1e-300):
            lam, converged = new, True
            break
        lam = new
        v = wv / nw
    val = math.sqrt(max(lam, 0.0))
    if return_info:
        return val, {"iterations": it, "converged": converged}
    return val


class RegularTruncation:
    """A finite piece of ``G_u = {g : s(g) = u}`` for a truncated unit ``u``.

    Each element ``(y, |word| - offset, u)`` is stored through
    ``y = word . T^offset(u)`` in normal form; the truncation at level
    ``L`` keeps ``offset <= L`` and ``|word| <= L``.
    """

    def __init__(self, g, base: Path, L: int):
        self.graph = g
        self.base = BasePoint(g, base)
        self.level = L
        if len(base) < L:
            raise ResourceError(f"base point must be known to depth {L}", required=L)
        pts = []
        for m in range(L + 1):
            v = self.base.vertex_at(m)
            for word in paths_up_to(g, L):
                if word.s != v:
                    continue
                if word.edges and m > 0 and word.edges[-1] == base.edges[m - 1]:
                    continue
                if not word.edges and word.r != v:
                    continue
                pts.append(OrbitPoint(word.edges, m))
        self.points = tuple(sorted(set(pts)))
        self.index = {p: i for i, p in enumerate(self.points)}

    def __len__(self):
        return len(self.points)


def regular_matrix(f: AlgebraElement, u: Path, L: int, headroom=None):
    """Compression of ``Ind delta_u(f)`` (left convolution on ``G_u``) to the level-``L`` truncation.

    Counting measure only, so entries are the rational coefficients of ``f``.
    The base point must be known ``max|beta|`` edges past ``L``.
    """
    from .sparse import SparseRationalMatrix

    g = f.graph
    need = L + (f.max_beta() if headroom is None else headroom)
    if len(u) < need:
        raise ResourceError(f"base point must be known to depth {need}", required=need)
    trunc = RegularTruncation(g, u, L)
    bp = trunc.base
    acc = defaultdict(Fraction)
    for j, pt in enumerate(trunc.points):
        for s, c in f.items():
            img = bp.replace_prefix(pt, s.beta, s.alpha)
            if img is None:
                continue
            i = trunc.index.get(img)
            if i is not None:
                acc[(i, j)] += c
    return SparseRationalMatrix(trunc.points, trunc.points, acc)


def random_base_path(g, length, rng: random.Random, weights: MarkovWeights | None = None):
    """A random path of the given length, uniform or following the Markov chain."""
    verts = g.sorted_vertices()
    if weights is None:
        v = rng.choice(verts)
    else:
        live = [x for x in verts if weights.mu0[x] > 0]
        v = rng.choices(live, [float(weights.mu0[x]) for x in live])[0]
    edges = []
    cur = v
    for _ in range(length):
        ins = g.edges_into(cur)
        if weights is not None:
            ins = [e for e in ins if weights.p[e.id] > 0]
            e = rng.choices(ins, [float(weights.p[x.id]) for x in ins])[0]
        else:
            e = rng.choice(ins)
        edges.append(e.id)
        cur = e.src
    return g.path(edges) if edges else Path.vertex(v)


STABILITY = 1e-9


def compare_norms(f: AlgebraElement, w: MarkovWeights, schedule, samples=3, seed=0):
    """Norms of compressions of ``kappa^mu(f)``, ``rho(f)`` and ``Ind mu~(f)`` along a depth schedule.

    ``n_rho`` maximises over uniformly sampled base points and ``n_ind``
    over base points sampled from ``mu``.  Inequalities are only judged
    on stabilised values; otherwise the status is ``"inconclusive"``.
    """
    g = f.graph
    schedule = sorted(schedule)
    if w.null_set:
        raise InputError("norm comparison needs full-support weights")
    rng = random.Random(seed)
    length = schedule[-1] + f.max_beta() + 1
    uni = [random_base_path(g, length, rng) for _ in range(samples)]
    mus = [random_base_path(g, length, rng, w) for _ in range(samples)]
    rows = []
    for L in schedule:
        nk = operator_norm(koopman_compression(f, w, L))
        nr = max(operator_norm(regular_matrix(f, u, L)) for u in uni)
        ni = max(operator_norm(regular_matrix(f, u, L)) for u in mus)
        rows.append({"depth": L, "n_kappa": nk, "n_rho": nr, "n_ind": ni})
    mono = all(b[key] >= a[key] - 1e-10 for a, b in zip(rows, rows[1:]) for key in ("n_kappa", "n_rho", "n_ind"))
    stable = {}
    for key in ("n_kappa", "n_rho", "n_ind"):
        stable[key] = len(rows) >= 2 and abs(rows[-1][key] - rows[-2][key]) < STABILITY
    last = rows[-1]
    nonneg = all(c > 0 for _, c in f.items())
    result = {
        "check": "norm-comparison",
        "element": f.to_json(),
        "schedule": schedule,
        "rows": rows,
        "monotone": mono,
        "stabilized": stable,
        "nonnegative": nonneg,
        "gauge_core": f.is_gauge_core(),
    }
    if not mono:
        result["status"] = "fail"
        result["reason"] = "compression norms decreased along the schedule"
        return result
    if not all(stable.values()):
        result["status"] = "inconclusive"
        result["reason"] = "not stabilised: " + ", ".join(k for k, ok in stable.items() if not ok)
        return result
    ineq = {
        "ind_le_kappa": last["n_ind"] <= last["n_kappa"] + STABILITY,
        "kappa_le_rho": last["n_kappa"] <= last["n_rho"] + STABILITY,
        "kappa_eq_rho": abs(last["n_kappa"] - last["n_rho"]) <= 1e-6,
    }
    result["inequalities"] = ineq
    result["status"] = "pass" if all(ineq.values()) else "fail"
    return result
