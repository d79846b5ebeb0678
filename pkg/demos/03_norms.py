"""Compression norms of the Koopman and regular representations.

For the gauge element the norms settle at once. For the adjacency
operator of the 3-regular tree the Koopman compressions sit at 2 sqrt 2
while the regular ones creep up towards it without settling.
"""
from etale_koopman import AlgebraElement, MarkovWeights, compare_norms, cuntz_graph, symbol

g = cuntz_graph(2)
w = MarkovWeights.uniform(g)


def Z(a, b):
    return AlgebraElement.of(g, symbol(g, a, b))


gauge = Z(["e1"], ["e1"]) - Z(["e2"], ["e2"])
tree = Z(["e1"], []) + Z([], ["e1"]) + Z(["e2"], []) + Z([], ["e2"])

for name, f in [("gauge", gauge), ("tree", tree)]:
    rep = compare_norms(f, w, [2, 3, 4, 5, 6], samples=2)
    print(name, rep["status"], rep.get("reason", ""))
    for r in rep["rows"]:
        print(f"  L={r['depth']}  kappa={r['n_kappa']:.6f}  rho={r['n_rho']:.6f}")
print("2 sqrt 2 =", 2 * 2 ** 0.5)
