"""The orthogonality criterion on a bilinear weight.

The weight ``c_n = f(T^n x) f(T^{2n} x)`` built from a Bernoulli orbit has
vanishing correlations, so the set of lags where the normalised
correlation is small has full tail density and the criterion value is 1.
A rotation weight keeps a correlation of fixed size at every lag and the
criterion fails. Short weights only reach small ``L`` in the schedule,
where the Bernoulli densities are still below 1, so ``N`` is kept at 10^5.

Run: ``python3 demos/orthogonality_criterion.py``
"""

from ergolab import observables as O
from ergolab.criterion import bfko_report, make_weight
from ergolab.systems import SystemSpec, make_system

N, horizon = 100_000, 10_000
for name, spec, f in [("bernoulli", SystemSpec.bernoulli(), O.symbol()),
                      ("rotation", SystemSpec.rotation("sqrt2-1"), O.cos_char())]:
    system = make_system(spec)
    x = system.sample(1, 1)[0]
    weight = make_weight(system, f, f, 1, 2, x, N + horizon)
    rep = bfko_report(weight.values, horizon=horizon)
    print(f"{name:10s} criterion={rep.criterion_value:.3f} verdict={rep.verdict}")
    for (delta, L, R), v in sorted(rep.densities.items())[:4]:
        print(f"    delta={delta:<5g} L={L:<6d} R={R:<6d} density={v:.3f}")
