"""Averages on the three-fold joining over the Kronecker factor.

Points ``(x, xi1, xi2)`` are drawn from the joining measure. For a
Bernoulli base the Kronecker factor is trivial and the fourfold averages
go to zero. On a rotation the bilinear average at ``x`` of
``cos(4 pi x)`` and ``cos(-2 pi x)`` with exponents ``(1, 2)`` matches the
fibre integral ``cos(2 pi x)/2``.

Run: ``python3 demos/joining.py``
"""

from ergolab import observables as O
from ergolab.extension import corollary_experiment, generic_point_check
from ergolab.systems import SystemSpec, make_system

bern = make_system(SystemSpec.bernoulli())
rep = corollary_experiment(bern, O.symbol(), O.symbol(), 1, 2, N=20_000, samples=30, rng=0)
print(f"bernoulli fourfold: mean |avg| = {rep.mean_abs:.4f} +/- {rep.stderr:.4f}")

rot = make_system(SystemSpec.rotation("sqrt2-1"))
for x in rot.sample(5, 4):
    r = generic_point_check(rot, O.cos_char(k=2), O.cos_char(k=-1), 1, 2, x, N=20_000,
                            mc=2000, rng=1)
    print(f"x={x!r:>24s} lhs={r.lhs:+.4f} rhs={r.rhs:+.4f} +/- {r.rhs_stderr:.4f} "
          f"passed={r.passed}")
