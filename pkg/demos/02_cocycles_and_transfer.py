"""Radon-Nikodym cocycle of a Markov measure and the transfer-operator fixed point."""
import math
from fractions import Fraction
import random

from etale_koopman import (MarkovWeights, TransferSpec, cuntz_graph, hausdorff_dimension,
                           is_transfer_fixed, markov_potential, radon_nikodym, symbol)
from etale_koopman.graph import random_graph
from etale_koopman.groupoid import multiply
from etale_koopman.measures import random_weights

rng = random.Random(1)
g = random_graph(rng, 3, extra_edges=2)
w = random_weights(g, rng, uniform_mu0=False)
print(w.to_json())

# %% D(Z(alpha, beta)) = mu(Z(alpha)) / mu(Z(beta)) is multiplicative
e = g.sorted_edge_ids()
a = symbol(g, [e[0]], [])
b = symbol(g, [], [e[0]])
for s in (a, b, multiply(g, a, b)):
    print(s.label(), radon_nikodym(w, s))

# %% L_psi^* mu = mu for psi(x) = mu0(r(x1)) p(x1) / mu0(s(x1))
psi = markov_potential(w)
print("markov potential fixed:", is_transfer_fixed(w, psi, 5)[0])
bad = TransferSpec.constant(cuntz_graph(2), Fraction(1, 3))
print("psi = 1/3 on O_2 fixed:", is_transfer_fixed(MarkovWeights.uniform(cuntz_graph(2)), bad, 5)[0])

# %% Moran equation r1^s + r2^s = 1
s = hausdorff_dimension(["1/2", "1/4"])
print("s =", s, " golden ratio check:", math.log((1 + 5 ** 0.5) / 2, 2))
