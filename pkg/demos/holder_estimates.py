"""Empirical Holder, gradient and Hessian constants for an alpha = 1.8 model.

With beta = 0.6, alpha_h + beta ^ alpha_h = 2.4, so the estimates hold
up to level 2.  Each constant is measured on two grid densities; a stable
verdict means they agree within 15%.  A model with alpha = 0.6 and
beta = 0.3 is refused at level 1.
"""
from levy_parametrix import HypothesisNotSatisfiedError, ParametrixConfig, build_model, scale_profile
from levy_parametrix.verify import SampleGrid, check_theorem_holder, refinement_solvers


def sine_model(alpha, beta):
    return build_model(
        {"nu": {"family": "stable", "alpha": alpha}, "beta": beta, "coefficient": {"terms": [{"x": {"family": "sine", "amplitude": 0.25}}]}}
    )


m = sine_model(1.8, 0.6)
sp = scale_profile(m)
grid = SampleGrid()
solvers = refinement_solvers(m, ParametrixConfig(y_eval=grid.y_points), 2)
for level, r_grid in ((0, [0.0, 0.5]), (1, [0.0, 0.25]), (2, [0.2])):
    rep = check_theorem_holder(m, level, r_grid, xy_grid=grid, profile=sp, solvers=solvers)
    for s in rep.slices:
        a, b = s.refinement_series
        print(f"level {level} r={s.params['r']!s:5}  {a:.4f} -> {b:.4f}  {s.verdict}")

try:
    check_theorem_holder(sine_model(0.6, 0.3), 1, [0.0], solvers=[])
except HypothesisNotSatisfiedError as e:
    print("refused:", e)
