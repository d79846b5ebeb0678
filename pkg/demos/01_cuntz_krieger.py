"""Koopman operators of a Markov measure on the path space of a graph.

Builds the projections P_v and partial isometries S_e as exact rational
matrices between cylinder spaces and checks the Cuntz-Krieger relations.
"""
from fractions import Fraction as F

from etale_koopman import (AlgebraElement, DirectedGraph, MarkovWeights, edge_symbol,
                           koopman_matrix, satisfies_condition_K, verify_cuntz_krieger)

# %% a 4-vertex graph with condition (K)
g = DirectedGraph.from_edges(
    ["p", "q", "r", "s"],
    [("a", "p", "q"), ("b", "q", "r"), ("c", "r", "s"), ("d", "s", "p"),
     ("e", "p", "p"), ("f", "r", "p"), ("g", "q", "s")])
print("condition (K):", satisfies_condition_K(g))

# weights: mu0 on vertices, p(e) summing to 1 over the edges into each vertex
w = MarkovWeights(g, {"p": F(1, 10), "q": F(2, 10), "r": F(3, 10), "s": F(4, 10)},
                  {"d": F(1, 2), "e": F(1, 3), "f": F(1, 6), "a": 1, "b": 1, "c": F(3, 4), "g": F(1, 4)})

# %% S_e moves chi_beta to chi_{e beta}; on normalised cylinders every entry is 1
S_e = koopman_matrix(AlgebraElement.of(g, edge_symbol(g, "e")), w, 2)
blk = S_e.block(1)
print("S_e: level", S_e.domain_depth, "->", S_e.codomain_depth, "shape", blk.shape, "nnz", blk.nnz)
for (i, j), c in sorted(blk.entries.items())[:4]:
    print("  ", blk.cols[j].label(), "->", blk.rows[i].label(), c)

# %% all four relation families, exactly
for L in (3, 4, 5):
    rep = verify_cuntz_krieger(g, w, L)
    print(f"depth {L}: {rep['status']} ({len(rep['identities'])} identities)")
