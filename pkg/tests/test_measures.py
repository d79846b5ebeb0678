import math
import random
from fractions import Fraction

import pytest
from scipy.optimize import brentq

from etale_koopman import (
    AlgebraElement,
    DegenerateInputError,
    InputError,
    MarkovWeights,
    Path,
    SelfSimilarWeights,
    TransferSpec,
    UnitSpaceAction,
    adjoint,
    cuntz_graph,
    cylinder_measure,
    edge_cocycle,
    edge_symbol,
    hausdorff_dimension,
    is_transfer_fixed,
    kms_inverse_temperature,
    markov_potential,
    radon_nikodym,
    symbol,
    vertex_symbol,
)
from etale_koopman.graph import random_graph
from etale_koopman.groupoid import all_symbols
from etale_koopman.measures import (
    cocycle_Dpsi,
    ideal_weights,
    integrate,
    kms_state_eval,
    quasi_invariance_defect,
    random_weights,
    transfer_apply,
)
from etale_koopman.pathspace import paths_of_length

from corpus import one_way, two_vertex

F = Fraction


def skewed_two_vertex():
    # mu0 = (1/3, 2/3); into u: a, c; into v: b, d
    return MarkovWeights(two_vertex(), {"u": F(1, 3), "v": F(2, 3)}, {"a": F(1, 4), "c": F(3, 4), "b": F(1, 2), "d": F(1, 2)})


# -- MarkovWeights --------------------------------------------------------------


def test_weights_validation():
    g = two_vertex()
    good = skewed_two_vertex()
    assert MarkovWeights.from_json(g, good.to_json()) == good
    assert good.to_json()["p"]["c"] == "3/4"
    with pytest.raises(InputError):
        MarkovWeights(g, {"u": F(1, 2), "v": F(1, 3)}, good.p)
    with pytest.raises(InputError):
        MarkovWeights(g, good.mu0, {**good.p, "a": F(1, 2)})
    with pytest.raises(InputError):
        MarkovWeights(g, good.mu0, {**good.p, "a": F(0), "c": F(1)})
    with pytest.raises(InputError):
        MarkovWeights(g, {"u": F(3, 2), "v": F(-1, 2)}, good.p)


def test_decimal_weights_are_exact():
    g = cuntz_graph(2)
    w = MarkovWeights(g, {"v": "1"}, {"e1": "0.25", "e2": "3/4"})
    assert w.p["e1"] == F(1, 4) and w.is_exact()


def test_ideal_weights():
    g = one_way()
    w = ideal_weights(g, {"v"})
    assert w.mu0 == {"v": 0, "w": 1}
    assert w.p["a"] == 0 and w.p["b"] == 0 and w.p["c"] == 1
    with pytest.raises(InputError):
        ideal_weights(g, {"w"})


# -- cylinder measures -----------------------------------------------------------


def test_uniform_cuntz_cylinders():
    for n in (2, 3):
        w = MarkovWeights.uniform(cuntz_graph(n))
        for k in range(4):
            assert all(cylinder_measure(w, a) == F(1, n**k) for a in paths_of_length(w.graph, k))


def test_empty_path_and_additivity():
    w = skewed_two_vertex()
    g = w.graph
    assert cylinder_measure(w, Path.vertex("v")) == F(2, 3)
    rng = random.Random(0)
    for _ in range(100):
        gr = random_graph(rng, rng.randint(1, 4), extra_edges=2)
        wr = random_weights(gr, rng, uniform_mu0=False)
        a = rng.choice(paths_of_length(gr, rng.randint(0, 3)))
        kids = [Path((a.edges + (e.id,)), a.r, e.src) for e in gr.edges_into(a.s)]
        assert sum(cylinder_measure(wr, k) for k in kids) == cylinder_measure(wr, a)
    assert cylinder_measure(w, g.path(["b", "a"])) == F(2, 3) * F(1, 2) * F(1, 4)


# -- Radon-Nikodym cocycle -------------------------------------------------------


def test_rn_uniform_cuntz():
    for n in (2, 3):
        g = cuntz_graph(n)
        w = MarkovWeights.uniform(g)
        for e in g.sorted_edge_ids():
            assert radon_nikodym(w, edge_symbol(g, e)) == F(1, n)
            assert edge_cocycle(w, e) == F(1, n)


def test_rn_frozen_values():
    w = skewed_two_vertex()
    g = w.graph
    # mu0(v) p(b) / mu0(u) and mu0(u) p(c) / mu0(v)
    assert radon_nikodym(w, edge_symbol(g, "b")) == 1
    assert radon_nikodym(w, edge_symbol(g, "c")) == F(3, 8)
    # (1/3 * 3/4) / (2/3 * 1/2)
    assert radon_nikodym(w, symbol(g, ["c"], ["d"])) == F(3, 4)
    for a in all_symbols(g, 2):
        if a.alpha == a.beta:
            assert radon_nikodym(w, a) == 1


def test_rn_tail_independent():
    w = skewed_two_vertex()
    g = w.graph
    for a in all_symbols(g, 2):
        d = radon_nikodym(w, a)
        for tail in paths_of_length(g, 2):
            if tail.r == a.alpha.s:
                assert radon_nikodym(w, a, tail) == d


def test_rn_inverse_and_product():
    w = skewed_two_vertex()
    g = w.graph
    from etale_koopman import multiply

    syms = all_symbols(g, 2)
    for a in syms:
        assert radon_nikodym(w, adjoint(a)) == 1 / radon_nikodym(w, a)
        for b in syms:
            ab = multiply(g, a, b)
            if ab is not None:
                assert radon_nikodym(w, ab) == radon_nikodym(w, a) * radon_nikodym(w, b)


def test_rn_degenerate():
    g = one_way()
    w = ideal_weights(g, {"v"})
    with pytest.raises(DegenerateInputError):
        radon_nikodym(w, edge_symbol(g, "a"))


def test_quasi_invariance_zero_sets():
    g = one_way()
    w = ideal_weights(g, {"v"})
    for e in g.sorted_edge_ids():
        a = edge_symbol(g, e)
        for sigma in paths_of_length(g, 3):
            if sigma.r != a.beta.s:
                continue
            img = a.alpha.concat(g, sigma)
            assert (cylinder_measure(w, sigma) == 0) == (cylinder_measure(w, img) == 0)


def test_measure_ratio_resolves_the_edge_formula():
    # mu0 = (1/3, 2/3) on a 2-vertex graph: which cocycle satisfies mu(Z(e sigma)) = D mu(Z(sigma))?
    w = skewed_two_vertex()
    g = w.graph
    for e in g.sorted_edge_ids():
        assert quasi_invariance_defect(w, e, 3, edge_cocycle(w, e)) == 0
    bad = [e for e in g.sorted_edge_ids() if quasi_invariance_defect(w, e, 3, 1 / w.p[e]) != 0]
    # reading 1/p(e) as the reverse-direction derivative fails too unless mu0(r(e)) = mu0(s(e))
    rev = [e for e in g.sorted_edge_ids() if quasi_invariance_defect(w, e, 3, w.p[e]) != 0]
    assert bad == ["a", "b", "c", "d"]
    assert rev == ["b", "c"]


def test_unit_space_action_cocycle_matches():
    w = skewed_two_vertex()
    g = w.graph
    act = UnitSpaceAction(g)
    for a in all_symbols(g, 3):
        z = a.beta
        image = act.act(a, z)
        assert cylinder_measure(w, image) / cylinder_measure(w, z) == radon_nikodym(w, a)


# -- D_psi ----------------------------------------------------------------------


def test_dpsi_constant_one():
    g = two_vertex()
    psi = TransferSpec.constant(g, 1)
    assert all(cocycle_Dpsi(psi, a) == 1 for a in all_symbols(g, 2))


def test_dpsi_matches_rn_for_uniform_mu0():
    rng = random.Random(3)
    for _ in range(5):
        g = random_graph(rng, 3, extra_edges=2)
        w = random_weights(g, rng, uniform_mu0=True)
        psi = TransferSpec.from_edge_weights(w)
        for a in all_symbols(g, 3):
            assert cocycle_Dpsi(psi, a) == radon_nikodym(w, a)


def test_dpsi_self_similar():
    sw = SelfSimilarWeights.solve(["1/2", "1/4"])
    psi = sw.potential()
    g = sw.graph()
    for i, r in enumerate(sw.ratios, start=1):
        d = cocycle_Dpsi(psi, edge_symbol(g, f"e{i}"))
        assert d == pytest.approx(r**sw.hdim, rel=1e-14)


# -- transfer operator ----------------------------------------------------------


def test_transfer_constant():
    g = cuntz_graph(2)
    psi = TransferSpec.constant(g, F(1, 2))
    one = {a: 1 for a in paths_of_length(g, 2)}
    assert transfer_apply(g, psi, one, 2) == {a: 1 for a in paths_of_length(g, 1)}


def test_transfer_indicator():
    w = skewed_two_vertex()
    g = w.graph
    psi = TransferSpec.from_edge_weights(w)
    f = {g.path(["b"]): 1}
    # L f at beta = vertex u: the only preimage in Z(b) is b itself
    assert transfer_apply(g, psi, f, 1) == {Path.vertex("u"): F(1, 2)}


def test_transfer_linear():
    rng = random.Random(1)
    w = skewed_two_vertex()
    g = w.graph
    psi = markov_potential(w)
    cyl = paths_of_length(g, 3)
    for _ in range(20):
        f = {a: F(rng.randint(-3, 3)) for a in cyl}
        h = {a: F(rng.randint(-3, 3)) for a in cyl}
        s = {a: 2 * f[a] + h[a] for a in cyl}
        Lf, Lh, Ls = (transfer_apply(g, psi, x, 3) for x in (f, h, s))
        keys = set(Lf) | set(Lh) | set(Ls)
        assert all(Ls.get(k, 0) == 2 * Lf.get(k, 0) + Lh.get(k, 0) for k in keys)


def test_fixed_point_markov_potential():
    w = skewed_two_vertex()
    assert is_transfer_fixed(w, markov_potential(w), 5) == (True, None)
    # p(x_1) alone is only invariant for uniform mu0
    ok, bad = is_transfer_fixed(w, TransferSpec.from_edge_weights(w), 5)
    assert not ok and bad is not None
    wu = w.with_mu0({"u": F(1, 2), "v": F(1, 2)})
    assert is_transfer_fixed(wu, TransferSpec.from_edge_weights(wu), 5)[0]


def test_fixed_point_negative_control():
    g = cuntz_graph(2)
    w = MarkovWeights.uniform(g)
    ok, bad = is_transfer_fixed(w, TransferSpec.constant(g, F(1, 3)), 3)
    assert not ok
    assert integrate(w, {Path.vertex("v"): 1}) == 1


def test_fixed_point_hausdorff():
    sw = SelfSimilarWeights.solve(["1/2", "1/4", "0.2"])
    assert is_transfer_fixed(sw.markov(), sw.potential(), 4)[0]


# -- Hausdorff dimension -----------------------------------------------------------


def test_hausdorff_trivial():
    assert hausdorff_dimension(["1/3"] * 3) == pytest.approx(1, abs=1e-12)
    assert hausdorff_dimension(["1/2", "1/2"]) == pytest.approx(1, abs=1e-12)


def test_hausdorff_golden():
    s = hausdorff_dimension(["1/2", "1/4"], tol=1e-12)
    assert abs(s - math.log((1 + math.sqrt(5)) / 2) / math.log(2)) <= 1e-10
    oracle = brentq(lambda t: 0.5**t + 0.25**t - 1, 0.0, 1.0, xtol=1e-15)
    assert abs(s - oracle) <= 1e-10


def test_hausdorff_residual_and_monotone():
    rng = random.Random(5)
    for _ in range(50):
        rs = [rng.uniform(0.01, 0.99) for _ in range(rng.randint(2, 5))]
        s = hausdorff_dimension(rs, tol=1e-12)
        assert abs(sum(r**s for r in rs) - 1) <= 1e-12
        smaller = [rs[0] * 0.9] + rs[1:]
        assert hausdorff_dimension(smaller) < s


def test_hausdorff_errors():
    for bad in (["1/2"], ["0", "1/2"], ["1", "1/2"], ["3/2", "1/2"]):
        with pytest.raises(InputError):
            hausdorff_dimension(bad)
    with pytest.raises(InputError):
        hausdorff_dimension(["1/2", "1/2"], tol=0)


# -- KMS ---------------------------------------------------------------------


def test_kms_state():
    w = skewed_two_vertex()
    g = w.graph
    assert kms_state_eval(w, AlgebraElement.of(g, vertex_symbol("v"))) == F(2, 3)
    assert kms_state_eval(w, AlgebraElement.of(g, edge_symbol(g, "a"))) == 0
    assert kms_state_eval(w, AlgebraElement.unit(g)) == 1


def test_kms_beta():
    for n in (2, 3, 5):
        assert kms_inverse_temperature(MarkovWeights.uniform(cuntz_graph(n))) == pytest.approx(math.log(n), rel=1e-15)
    g = cuntz_graph(2)
    assert kms_inverse_temperature(MarkovWeights(g, {"v": 1}, {"e1": F(1, 3), "e2": F(2, 3)})) is None
    sw = SelfSimilarWeights.solve(["1/3"] * 2)
    beta = kms_inverse_temperature(sw.markov(), tol=1e-12)
    assert beta == pytest.approx(-sw.hdim * math.log(1 / 3), rel=1e-12)
