"""Cells of the fractafold bundle of a Cantor-type IFS and the O_N isometries."""
from fractions import Fraction as F

from etale_koopman import FractafoldCell, IFSSpec, mu_infinity, verify_on_fractafold
from etale_koopman.fractafold import cells, refine_base, refine_fractal

spec = IFSSpec(3, (F(1, 2), F(1, 4), F(1, 4)))

# %% (w, n, u) is Z(w) x F_{w(n)}^{-1}(F_u K); normal form pushes n up to |w|
c = FractafoldCell((1, 2), 0, (3,))
print(c.label(), "->", c.normal().label(), "mu_inf =", mu_infinity(spec, c))
print("refinements add up:",
      sum(mu_infinity(spec, d) for d in refine_base(c, spec)),
      sum(mu_infinity(spec, d) for d in refine_fractal(c, spec)))
print("Z(i) x F_i^-1 K:", [str(mu_infinity(spec, FractafoldCell((i,), 1, ()))) for i in spec.labels()])
print("cells at level 2, fractal depth 1:", len(cells(spec, 2, 1)))

# %% kappa(S_i) and the O_N relations
rep = verify_on_fractafold(spec, 4)
print(rep["status"])
for item in rep["identities"]:
    print("  ", item["status"], item["identity"])
