"""Fisher information for the parametric two-index model, and rate tables.

Run with ``python demos/fisher_and_rates.py``.
"""

# %%
from fractions import Fraction

from bgindex.fisher import (
    ParametricModel,
    efficiency_limit,
    fisher_diagonal,
    fit_exponent,
    optimal_rates,
    rate_comparison,
    theoretical_exponents,
)

model = ParametricModel(c=0.1, beta1=1.0, a1=1.0, beta2=0.75, a2=1.0)
deltas = (1e-2, 1e-3, 1e-4, 1e-5)

# %%
# the index entries shrink like delta^(1 - beta/2) up to a log factor
th = theoretical_exponents(1.0, 0.75)
for k in ("beta1", "beta2"):
    vals = [fisher_diagonal(model, d, k) for d in deltas]
    print(k, ["%.3e" % v for v in vals], "slope %.3f (theory %.3f)" % (fit_exponent(deltas, vals, th[k][1]), th[k][0]))

# %%
# best attainable rates versus what the contrast estimator reaches
for k, r in optimal_rates(Fraction(1), Fraction(3, 4)).items():
    print(f"optimal {k}: delta^{r.delta_exponent} log^{r.log_exponent}")
c = rate_comparison(Fraction(1), Fraction(3, 4))
print("efficiency ratio:", c["beta1"]["efficiency"], "| as beta1 -> 2:", efficiency_limit(Fraction(2)))
