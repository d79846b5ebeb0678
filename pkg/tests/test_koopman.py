import random
from fractions import Fraction

import numpy as np
import pytest
import scipy.sparse.linalg as sla
import sympy

from etale_koopman import (
    AlgebraElement,
    InputError,
    MarkovWeights,
    ResourceError,
    SparseRationalMatrix,
    compare_norms,
    cuntz_graph,
    edge_symbol,
    kernel_ideal,
    koopman_matrix,
    operator_norm,
    regular_matrix,
    symbol,
    verify_cuntz_krieger,
    vertex_symbol,
)
from etale_koopman.groupoid import all_symbols, random_element
from etale_koopman.koopman import (
    RegularTruncation,
    cylinder_basis,
    edge_shorthand_matrix,
    koopman_compression,
    random_base_path,
)
from etale_koopman.measures import ideal_weights

from corpus import four_vertex_weights, one_way, two_vertex

F = Fraction
O2 = cuntz_graph(2)
W2 = MarkovWeights.uniform(O2)


def el(g, a, b, v=None, c=1):
    return AlgebraElement.of(g, symbol(g, a, b, vertex=v), c)


# -- single generators --------------------------------------------------------------


def test_vertex_projection():
    w = four_vertex_weights()
    g = w.graph
    for v in g.sorted_vertices():
        m = koopman_matrix(AlgebraElement.of(g, vertex_symbol(v)), w, 3).block(0)
        basis = cylinder_basis(w, 3).paths
        want = {(i, i): 1 for i, a in enumerate(basis) if a.r == v}
        assert m.entries == want


def test_edge_isometry_moves_cylinders():
    w = four_vertex_weights()
    g = w.graph
    for e in g.sorted_edge_ids():
        m = koopman_matrix(AlgebraElement.of(g, edge_symbol(g, e)), w, 2).block(1)
        for (i, j), c in m.entries.items():
            assert c == 1
            assert m.rows[i].edges == (e,) + m.cols[j].edges
        assert m.nnz == sum(1 for b in cylinder_basis(w, 2).paths if b.r == g.src(e))


def test_zero_element():
    m = koopman_matrix(AlgebraElement(O2), W2, 2)
    assert m.is_zero()


def test_partial_permutation_structure():
    w = four_vertex_weights()
    g = w.graph
    for s in all_symbols(g, 2)[::7]:
        m = koopman_matrix(AlgebraElement(g, {s: F(5, 3)}, canonical=True), w, 3)
        for b in m.blocks.values():
            rows = [i for i, _ in b.entries]
            cols = [j for _, j in b.entries]
            assert len(rows) == len(set(rows)) and len(cols) == len(set(cols))
            assert set(b.entries.values()) <= {F(5, 3)}


def test_grading_and_depths():
    f = el(O2, ["e1", "e2"], []) + el(O2, [], ["e1"]) + el(O2, ["e2"], ["e2"])
    m = koopman_matrix(f, W2, 3)
    assert sorted(m.blocks) == [-1, 0, 2]
    assert m.domain_depth == 3 and m.codomain_depth == 5
    assert m.block(2).shape == (32, 8)
    assert m.block(-1).shape == (4, 8)


def test_resource_error_names_requirement():
    f = el(O2, ["e1"], ["e1", "e2", "e1"])
    with pytest.raises(ResourceError) as exc:
        koopman_matrix(f, W2, 2)
    assert exc.value.required == 3
    with pytest.raises(ResourceError) as exc:
        koopman_matrix(f, W2, 3, headroom=2)
    assert exc.value.required == 5


def test_worker_count_does_not_change_result(monkeypatch):
    g = two_vertex()
    w = MarkovWeights.uniform(g)
    rng = random.Random(4)
    f = random_element(g, rng, max_terms=6)
    one = koopman_matrix(f, w, 4, workers=1)
    many = koopman_matrix(f, w, 4, workers=4)
    assert one == many
    monkeypatch.setenv("ETALE_KOOPMAN_THREADS", "3")
    assert koopman_matrix(f, w, 4) == one
    assert one.to_json() == many.to_json()


def test_export_formats():
    m = koopman_matrix(AlgebraElement.of(O2, edge_symbol(O2, "e1")), W2, 1)
    (doc,) = m.to_json()
    assert {"rows", "cols", "entries", "domain_depth", "codomain_depth"} <= set(doc)
    assert (doc["rows"], doc["cols"], doc["domain_depth"], doc["codomain_depth"]) == (4, 2, 1, 2)
    assert doc["entries"] == [[0, 0, "1/1"], [1, 1, "1/1"]]
    assert m.to_csv().splitlines() == ["degree,row,col,value", "1,0,0,1/1", "1,1,1,1/1"]


# -- Cuntz-Krieger -----------------------------------------------------------------


def test_ck_o2_uniform():
    assert verify_cuntz_krieger(O2, W2, 4)["status"] == "pass"


def test_ck_o3_weighted():
    g = cuntz_graph(3)
    w = MarkovWeights(g, {"v": 1}, {"e1": F(1, 2), "e2": F(1, 4), "e3": F(1, 4)})
    rep = verify_cuntz_krieger(g, w, 3)
    assert rep["status"] == "pass" and rep["first_failure"] is None


def test_ck_corrupted_edge_fails():
    g = two_vertex()
    # mu0 ratios 4 and 1/4 are rational squares, so the shorthand matrix is exact
    w = MarkovWeights(g, {"u": F(1, 5), "v": F(4, 5)}, {"a": F(1, 2), "c": F(1, 2), "b": F(1, 3), "d": F(2, 3)})
    assert verify_cuntz_krieger(g, w, 3)["status"] == "pass"
    rep = verify_cuntz_krieger(g, w, 3, edge_matrix=edge_shorthand_matrix)
    assert rep["status"] == "fail"
    first = rep["first_failure"]
    assert first["identity"].startswith("S_b^* S_b = P_u")
    assert first["witness"]["lhs"] == "4/1" and first["witness"]["rhs"] == "1/1"


def test_shorthand_needs_square_ratio():
    g = two_vertex()
    w = MarkovWeights(g, {"u": F(1, 3), "v": F(2, 3)}, {"a": F(1, 2), "c": F(1, 2), "b": F(1, 2), "d": F(1, 2)})
    with pytest.raises(InputError):
        edge_shorthand_matrix(w, "b", 2)


def test_ck_preconditions():
    with pytest.raises(InputError):
        verify_cuntz_krieger(one_way(), ideal_weights(one_way(), {"v"}), 3)
    with pytest.raises(ResourceError):
        verify_cuntz_krieger(O2, W2, 1)


# -- kernel / ideal ------------------------------------------------------------------


def vanishing_oracle(w, s):
    """Independent recomputation: Z(alpha,beta) acts as 0 iff Z(alpha) or Z(beta) is null."""

    def mass(p):
        m = w.mu0[p.r]
        for e in p.edges:
            m *= w.p[e]
        return m

    return mass(s.alpha) == 0 or mass(s.beta) == 0


def test_kernel_trivial_ideals():
    g = two_vertex()
    rep = kernel_ideal(g, [], 3)
    assert rep["status"] == "pass" and rep["vanishing"] == 0
    rep = kernel_ideal(g, ["u", "v"], 3)
    assert rep["status"] == "pass" and rep["vanishing"] == rep["symbols"]


def test_kernel_two_vertex_bruteforce():
    g = one_way()
    H = {"v"}
    rep = kernel_ideal(g, H, 4)
    assert rep["status"] == "pass" and rep["mismatches"] == []
    w = ideal_weights(g, H)
    syms = all_symbols(g, 4)
    want = sum(vanishing_oracle(w, s) for s in syms)
    assert rep["vanishing"] == want
    assert want == sum(s.alpha.s in H for s in syms)


def test_kernel_rejects_bad_sets():
    g = one_way()
    with pytest.raises(InputError, match="hereditary"):
        kernel_ideal(g, ["w"], 2)
    from etale_koopman import DirectedGraph

    # along paths the only edge ending at y starts in H = {v}
    g3 = DirectedGraph.from_edges(["v", "y"], [("a", "v", "v"), ("b", "v", "y")])
    with pytest.raises(InputError, match="saturation"):
        kernel_ideal(g3, ["v"], 2)


# -- regular representation -------------------------------------------------------


def test_regular_unit_space():
    g = two_vertex()
    u = g.path(["b", "a", "a", "c", "d", "b", "a"])
    for v in g.sorted_vertices():
        m = regular_matrix(AlgebraElement.of(g, vertex_symbol(v)), u, 3)
        assert all(i == j and c == 1 for (i, j), c in m.entries.items())
        trunc = RegularTruncation(g, u, 3)
        bp = trunc.base
        assert m.nnz == sum(bp.range_vertex(p) == v for p in trunc.points)
    one = regular_matrix(AlgebraElement.unit(g), u, 3)
    assert one == SparseRationalMatrix.identity(one.rows)


def test_regular_resource_error():
    with pytest.raises(ResourceError):
        regular_matrix(el(O2, ["e1"], ["e1", "e2"]), O2.path(["e1", "e2"]), 2)


def restrict_cols(m, keep):
    return {k: v for k, v in m.entries.items() if k[1] in keep}


def test_regular_is_multiplicative_on_interior():
    g = two_vertex()
    rng = random.Random(21)
    L0, L = 2, 6
    u = random_base_path(g, 10, rng)
    trunc = RegularTruncation(g, u, L)
    inner = {i for i, p in enumerate(trunc.points) if p.offset <= L0 and len(p.word) <= L0}
    for _ in range(100):
        f = random_element(g, rng, max_len=2)
        h = random_element(g, rng, max_len=2)
        lhs = regular_matrix(f, u, L) @ regular_matrix(h, u, L)
        rhs = regular_matrix(f * h, u, L)
        assert restrict_cols(lhs, inner) == restrict_cols(rhs, inner)
        star = regular_matrix(f.star(), u, L)
        assert restrict_cols(star, inner) == restrict_cols(regular_matrix(f, u, L).T, inner)


# -- norms ----------------------------------------------------------------------


def test_operator_norm_trivial():
    assert operator_norm(np.eye(6)) == pytest.approx(1, rel=1e-12)
    single = SparseRationalMatrix(range(3), range(4), {(1, 2): 3})
    assert operator_norm(single) == pytest.approx(3, rel=1e-12)
    assert operator_norm(np.zeros((3, 3))) == 0.0


def test_operator_norm_matches_charpoly():
    rng = random.Random(17)
    for _ in range(5):
        rows = [[F(rng.randint(-9, 9), rng.randint(1, 5)) for _ in range(5)] for _ in range(5)]
        M = sympy.Matrix(rows)
        lam = sympy.symbols("lam")
        poly = sympy.Poly((M.T * M).charpoly(lam).as_expr(), lam)
        roots = [complex(r).real for r in sympy.Poly(poly, lam).nroots(n=30)]
        want = max(roots) ** 0.5
        dense = np.array([[float(x) for x in r] for r in rows])
        got = operator_norm(SparseRationalMatrix(range(5), range(5), {(i, j): rows[i][j] for i in range(5) for j in range(5)}))
        assert got == pytest.approx(want, rel=1e-9)
        assert got == pytest.approx(np.linalg.norm(dense, 2), rel=1e-9)


def test_operator_norm_sparse_large():
    rng = np.random.default_rng(3)
    import scipy.sparse as sp

    m = sp.random(200, 150, density=0.05, random_state=rng, format="csr")
    want = sla.svds(m, k=1, return_singular_vectors=False)[0]
    assert operator_norm(m) == pytest.approx(want, rel=1e-9)


def test_compression_monotone():
    f = el(O2, ["e1"], []) + el(O2, [], ["e1"]) * 2 + el(O2, ["e2", "e1"], ["e1"])
    norms = [operator_norm(koopman_compression(f, W2, L)) for L in range(1, 6)]
    assert all(b >= a - 1e-12 for a, b in zip(norms, norms[1:]))


def test_compare_identity():
    rep = compare_norms(AlgebraElement.unit(O2), W2, [2, 3, 4], samples=2, seed=1)
    assert rep["status"] == "pass"
    for r in rep["rows"]:
        assert r["n_kappa"] == pytest.approx(1, abs=1e-12)
        assert r["n_rho"] == pytest.approx(1, abs=1e-12)


def test_compare_gauge_projection_difference():
    f = el(O2, ["e1"], ["e1"]) - el(O2, ["e2"], ["e2"])
    rep = compare_norms(f, W2, [2, 3, 4], samples=2, seed=1)
    assert rep["status"] == "pass" and rep["gauge_core"]
    assert rep["rows"][-1]["n_kappa"] == pytest.approx(1, abs=1e-12)


def test_compare_requires_full_support():
    with pytest.raises(InputError):
        compare_norms(AlgebraElement.unit(one_way()), ideal_weights(one_way(), {"v"}), [2, 3])


def test_compare_never_false_pass():
    # adjacency of the 3-regular tree: finite compressions keep growing
    f = sum((el(O2, [e], []) + el(O2, [], [e]) for e in ("e1", "e2")), AlgebraElement(O2))
    rep = compare_norms(f, W2, [2, 3, 4], samples=2, seed=0)
    assert rep["status"] == "inconclusive"
    assert "n_rho" in rep["reason"]
    assert rep["rows"][-1]["n_kappa"] == pytest.approx(2 * 2**0.5, rel=1e-12)


def test_adjoint_of_mixed_degrees():
    # degree +3 and -3 parts: each block needs only its own component starred
    f = el(O2, ["e1", "e2", "e1"], []) + el(O2, [], ["e2", "e2", "e1"])
    from etale_koopman.koopman import adjoint_matches, compose

    assert adjoint_matches(f, W2, 3)
    assert f.homogeneous(3) + f.homogeneous(-3) == f
    assert f.homogeneous(0).is_zero()
    h = el(O2, ["e2"], ["e1"])
    assert koopman_matrix(f * h, W2, 4) == compose(f, koopman_matrix(h, W2, 4), W2)
