import numpy as np
import pytest

from conftest import stable_model, stable_symbol_constant
from levy_parametrix import FirstMomentDivergenceError, GeneratorSpec, apply_generator, build_model, build_symbol, generator_difference
from levy_parametrix.generator import TestFunction as Smooth
from levy_parametrix.generator import grid_function

COS = Smooth(np.cos, (lambda x: -np.sin(x), lambda x: -np.cos(x), np.sin, np.cos))
GAUSS = Smooth(
    lambda x: np.exp(-np.asarray(x) ** 2),
    (lambda x: -2 * x * np.exp(-x**2), lambda x: (4 * x**2 - 2) * np.exp(-x**2)),
)
X = np.linspace(-2, 2, 9)


def one_sided():
    return build_model({"nu": {"alpha": 1.5}, "coefficient": {"base": 0.5, "terms": [{"z": "positive"}]}, "kappa0": 0.5, "kappa1": 1.5})


@pytest.mark.parametrize("form", ["compensated", "symmetrized", "pure_jump"])
def test_constant_function_maps_to_zero(form):
    m = stable_model(0.5 if form == "pure_jump" else 1.5, amplitude=0.25)
    const = Smooth(lambda x: np.full(np.shape(x), 3.0), (lambda x: 0 * x, lambda x: 0 * x))
    assert np.max(np.abs(apply_generator(m, GeneratorSpec(form=form), const, X))) <= 1e-9


def test_cauchy_cosine(cauchy):
    out = apply_generator(cauchy, GeneratorSpec(form="symmetrized"), COS, X)
    assert np.max(np.abs(out + np.cos(X))) <= 1e-4 * np.max(np.abs(np.cos(X)))


@pytest.mark.parametrize("alpha, xi", [(1.5, 1.0), (1.5, 3.0), (0.8, 2.0)])
def test_stable_cosine_scaled(alpha, xi):
    m = stable_model(alpha)
    f = Smooth(lambda x: np.cos(xi * x), (lambda x: -xi * np.sin(xi * x), lambda x: -(xi**2) * np.cos(xi * x)))
    out = apply_generator(m, GeneratorSpec(), f, X)
    ref = -stable_symbol_constant(alpha) * xi**alpha * np.cos(xi * X)
    assert np.max(np.abs(out - ref)) <= 1e-4 * np.max(np.abs(ref))


def test_linear_function_symmetrized(sine15):
    lin = Smooth(lambda x: 2.5 * np.asarray(x), (lambda x: 2.5 + 0 * x, lambda x: 0 * x))
    assert np.max(np.abs(apply_generator(sine15, GeneratorSpec(form="symmetrized"), lin, X))) <= 1e-9
    # alpha <= 1: still exact, the two far-field halves cancel before any first moment is needed
    cauchy_like = stable_model(0.8, amplitude=0.25)
    assert np.max(np.abs(apply_generator(cauchy_like, GeneratorSpec(form="symmetrized"), lin, X))) <= 1e-9


def test_symbol_consistency_asymmetric():
    m = one_sided()
    sym = build_symbol(m, 0.0)
    spec = GeneratorSpec()
    for xi in (0.7, 2.0):
        psi = complex(sym.psi(np.array([xi]))[0])
        # four derivatives: the odd Taylor term on |z| < delta survives for an asymmetric weight
        c = Smooth(lambda x: np.cos(xi * x), tuple(lambda x, k=k: xi**k * np.cos(xi * x + k * np.pi / 2) for k in range(1, 5)))
        s = Smooth(lambda x: np.sin(xi * x), tuple(lambda x, k=k: xi**k * np.sin(xi * x + k * np.pi / 2) for k in range(1, 5)))
        ref = -psi * np.exp(1j * xi * X)
        got = apply_generator(m, spec, c, X, freeze=0.0) + 1j * apply_generator(m, spec, s, X, freeze=0.0)
        assert np.max(np.abs(got - ref)) <= 1e-4 * abs(psi)


def test_linearity_in_f(sine15):
    spec = GeneratorSpec()
    a, b = 1.7, -0.4
    cos2 = Smooth(np.cos, COS.derivs[:2])
    comb = Smooth(lambda x: a * np.cos(x) + b * np.exp(-x**2), tuple(lambda x, i=i: a * COS.derivs[i](x) + b * GAUSS.derivs[i](x) for i in range(2)))
    lhs = apply_generator(sine15, spec, comb, X)
    rhs = a * apply_generator(sine15, spec, cos2, X) + b * apply_generator(sine15, spec, GAUSS, X)
    assert np.max(np.abs(lhs - rhs)) <= 1e-10 * np.max(np.abs(rhs))


def test_symmetrized_equals_compensated_for_even_kappa(sine15):
    a = apply_generator(sine15, GeneratorSpec(form="symmetrized"), GAUSS, X)
    b = apply_generator(sine15, GeneratorSpec(form="compensated"), GAUSS, X)
    assert np.max(np.abs(a - b)) <= 1e-8 * np.max(np.abs(a))


def test_pure_jump_divergent_first_moment(sine15):
    with pytest.raises(FirstMomentDivergenceError):
        apply_generator(sine15, GeneratorSpec(form="pure_jump"), GAUSS, X)


def test_difference_with_equal_freeze_points_is_zero(sine15):
    assert np.all(generator_difference(sine15, GeneratorSpec(), GAUSS, X, 0.4, 0.4) == 0.0)


def test_difference_matches_subtraction(sine15):
    spec = GeneratorSpec()
    for w1, w2 in ((0.0, 1.0), (-2.0, 0.3)):
        d = generator_difference(sine15, spec, GAUSS, X, w1, w2)
        sub = apply_generator(sine15, spec, GAUSS, X, freeze=w1) - apply_generator(sine15, spec, GAUSS, X, freeze=w2)
        scale = np.max(np.abs(apply_generator(sine15, spec, GAUSS, X, freeze=w1)))
        assert np.max(np.abs(d - sub)) <= 1e-8 * scale


def test_difference_holder_bound(sine15):
    spec = GeneratorSpec()
    for w1, w2 in ((0.0, 0.5), (-1.0, 2.0), (0.2, 0.21)):
        d = np.abs(generator_difference(sine15, spec, GAUSS, X, w1, w2))
        maj = sine15.kappa2 * abs(w1 - w2) ** sine15.beta * generator_difference(sine15, spec, GAUSS, X, w1, w2, absolute=True)
        assert np.all(d <= maj)


def test_grid_function_reproduces_callable_result(sine15):
    x = np.linspace(-30, 30, 6001)
    g = grid_function(x, np.exp(-x**2))
    spec = GeneratorSpec(inner_radius=2 * (x[1] - x[0]), span=60.0, length_scale=0.05, n_gauss=8)
    exact = apply_generator(sine15, GeneratorSpec(), GAUSS, X)
    approx = apply_generator(sine15, spec, g, X)
    assert np.max(np.abs(approx - exact)) <= 1e-3 * np.max(np.abs(exact))
