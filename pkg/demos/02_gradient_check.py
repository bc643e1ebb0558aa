"""The adjoint gradient against central finite differences, node by node.

Each objective variant is checked for the linear and a weakly nonlinear
model; the worst componentwise relative error is printed.
"""

from boussinesq_inverse import Variant, finite_difference_check
from boussinesq_inverse.harness import gradcheck_setup

for alpha_tilde in (0.0, 0.05):
    for variant in Variant:
        spec, problem = gradcheck_setup(alpha_tilde, 0.1, variant.value, 1e-3)
        res = finite_difference_check(spec, problem)
        print(f"alpha_tilde={alpha_tilde:<5} {variant.value:12s} max rel error {res.max_rel_error:.2e}")
