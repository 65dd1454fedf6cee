import numpy as np
import pytest

from conftest import cauchy_density, stable_model, stable_symbol_constant
from levy_parametrix import (
    BoundFunction,
    FFTSettings,
    FirstMomentDivergenceError,
    ResolutionExceededError,
    build_model,
    build_symbol,
    frozen_kernel,
    scale_profile,
)
from levy_parametrix.frozen import (
    IncrementGrid,
    check_increment_bounds,
    increment_ratios,
    kernel_bound_constant,
    kernel_on_grid,
    mass,
    mass_on_grid,
)
from levy_parametrix.generator import GeneratorSpec, apply_generator
from levy_parametrix.generator import TestFunction as Smooth


def one_sided_drift():
    # kappa = 1/2 + 1{z > 0}: three times more jumps to the right
    return build_model({"nu": {"alpha": 1.5}, "coefficient": {"base": 0.5, "terms": [{"z": "positive"}]}, "kappa0": 0.5, "kappa1": 1.5})


# symbols ---------------------------------------------------------------------


@pytest.mark.parametrize("form", ["symmetrized", "compensated"])
def test_cauchy_symbol_is_abs_xi(cauchy, form):
    xi = np.geomspace(0.1, 50, 40)
    psi = build_symbol(cauchy, 0.0, form).psi(xi)
    assert np.max(np.abs(psi - xi) / xi) <= 1e-4
    assert np.max(np.abs(psi.imag)) <= 1e-12


@pytest.mark.parametrize("alpha", [0.5, 1.5, 1.8])
def test_stable_symbol_closed_form(alpha):
    xi = np.geomspace(0.05, 100, 30)
    psi = build_symbol(stable_model(alpha), 0.0).psi(xi)
    ref = stable_symbol_constant(alpha) * xi**alpha
    assert np.max(np.abs(psi - ref) / ref) <= 1e-5


def test_symbol_at_zero(sine15):
    for form in ("compensated", "symmetrized"):
        assert build_symbol(sine15, 0.3, form).psi(np.array([0.0]))[0] == 0


def test_symbol_linear_in_kappa():
    a = build_symbol(stable_model(1.5), 0.0).psi(np.linspace(0.1, 9, 17))
    b = build_symbol(stable_model(1.5, scale=2.5), 0.0).psi(np.linspace(0.1, 9, 17))
    assert np.allclose(b, 2.5 * a, rtol=1e-9)


def test_asymmetric_symbol_properties():
    sym = build_symbol(one_sided_drift(), 0.0)
    xi = np.linspace(0.1, 20, 50)
    p, n = sym.psi(xi), sym.psi(-xi)
    assert np.all(p.real >= 0)
    assert np.allclose(n, np.conj(p), rtol=0, atol=0)
    assert np.max(np.abs(p.imag)) > 0.1


def test_pure_jump_needs_finite_first_moment(sine15):
    with pytest.raises(FirstMomentDivergenceError):
        build_symbol(sine15, 0.0, "pure_jump").psi(np.array([1.0]))
    sym = build_symbol(stable_model(0.5, amplitude=0.25), 0.0, "pure_jump")
    xi = np.array([0.5, 2.0])
    ref = stable_symbol_constant(0.5) * xi**0.5
    assert np.allclose(sym.psi(xi).real, ref, rtol=1e-5)


def test_unknown_form_rejected(sine15):
    with pytest.raises(ValueError):
        build_symbol(sine15, 0.0, "bogus")


# kernels ---------------------------------------------------------------------


def test_cauchy_kernel_examples(cauchy):
    sym = build_symbol(cauchy, 0.0)
    assert frozen_kernel(sym, 1.0, 0.0, 0.0) == pytest.approx(1 / np.pi, rel=1e-6)
    assert frozen_kernel(sym, 1.0, 0.0, 1.0) == pytest.approx(1 / (2 * np.pi), rel=1e-6)
    assert abs(frozen_kernel(sym, 1.0, 0.0, 0.0, 1)) <= 1e-12


@pytest.mark.parametrize("t", [0.25, 1.0])
def test_cauchy_kernel_closed_form(cauchy, t):
    sym = build_symbol(cauchy, 0.0)
    u = np.linspace(-5, 5, 81)
    k = frozen_kernel(sym, t, 0.0, u)
    assert np.max(np.abs(k - cauchy_density(t, u)) / cauchy_density(t, u)) <= 1e-3


def test_kernel_on_grid_matches_direct(sine15):
    sym = build_symbol(sine15, 0.4)
    u, v = kernel_on_grid(sym, 0.3, 0.05, 100)
    assert np.allclose(v, frozen_kernel(sym, 0.3, 0.0, u), rtol=1e-8, atol=1e-10)


def test_orientation_pinned_by_one_sided_model():
    # far field p ~ t kappa(z) J(z) at z = y - x: the right tail is three times heavier
    sym = build_symbol(one_sided_drift(), 0.0)
    t, u = 0.02, 15.0
    right = frozen_kernel(sym, t, 0.0, u)
    left = frozen_kernel(sym, t, 0.0, -u)
    assert right / left == pytest.approx(3.0, rel=0.02)
    assert right == pytest.approx(t * 1.5 * u**-2.5, rel=0.02)
    # and shifting x moves the kernel the same way
    assert frozen_kernel(sym, t, 1.0, u + 1.0) == pytest.approx(right, rel=1e-10)


def test_mass_is_one(sine15):
    for w in (-1.0, 0.0, 1.3):
        sym = build_symbol(sine15, w)
        for t in (0.05, 0.25, 1.0):
            assert abs(mass(sym, t) - 1) <= 1e-6


def test_mass_on_grid_with_tail(sine15):
    sym = build_symbol(sine15, 0.5)
    y = np.linspace(-30, 30, 6001)
    assert abs(mass_on_grid(sym, 0.25, y) - 1) <= 1e-4


def test_positivity(sine15):
    sym = build_symbol(sine15, 0.0)
    u = np.linspace(-40, 40, 801)
    for t in (0.05, 0.5):
        k = frozen_kernel(sym, t, 0.0, u)
        assert k.min() >= -1e-9 * k.max()


def test_gradient_consistency(sine15):
    sym = build_symbol(sine15, 0.2)
    t, h = 0.25, 1e-3
    x = np.linspace(-2, 2, 21)
    p = lambda xx: frozen_kernel(sym, t, xx, 0.0)  # noqa: E731
    d1 = frozen_kernel(sym, t, x, 0.0, 1)
    d2 = frozen_kernel(sym, t, x, 0.0, 2)
    fd1 = (p(x + h) - p(x - h)) / (2 * h)
    fd2 = (p(x + h) - 2 * p(x) + p(x - h)) / h**2
    assert np.max(np.abs(fd1 - d1)) <= 1e-4 * np.max(np.abs(d1))
    assert np.max(np.abs(fd2 - d2)) <= 1e-4 * np.max(np.abs(d2))


def test_chapman_kolmogorov_frozen(sine15):
    sym = build_symbol(sine15, -0.3)
    du, n = 0.01, 8000
    u, ps = kernel_on_grid(sym, 0.1, du, n)
    _, pt = kernel_on_grid(sym, 0.15, du, n)
    # p(t, z, y) = f_t(y - z), so the z integral is a discrete convolution
    conv = np.convolve(ps, pt, mode="same") * du
    inner = np.abs(u) <= 2
    ref = frozen_kernel(sym, 0.25, 0.0, u[inner])
    conv = conv[inner]
    assert np.max(np.abs(conv - ref)) <= 1e-4 * ref.max()


def test_frozen_heat_equation(sine15):
    w, y = 0.7, 0.0
    sym = build_symbol(sine15, w)
    t, dt = 0.25, 1e-4
    fft = FFTSettings(fft_size=2**12)
    f = Smooth(
        lambda u: frozen_kernel(sym, t, u, y, 0, fft),
        (lambda u: frozen_kernel(sym, t, u, y, 1, fft), lambda u: frozen_kernel(sym, t, u, y, 2, fft)),
    )
    x = np.array([-1.0, 0.0, 1.5])
    dp = (frozen_kernel(sym, t + dt, x, y, 0, fft) - frozen_kernel(sym, t - dt, x, y, 0, fft)) / (2 * dt)
    spec = GeneratorSpec(inner_radius=0.01, span=40.0, length_scale=0.25, n_gauss=8)
    Lp = apply_generator(sine15, spec, f, x, freeze=w)
    assert np.max(np.abs(dp - Lp)) <= 1e-3 * np.max(np.abs(dp))


def test_resolution_exceeded(sine15):
    sym = build_symbol(sine15, 0.0)
    small = FFTSettings(fft_size=256)
    with pytest.raises(ResolutionExceededError) as info:
        frozen_kernel(sym, 1e-4, 0.0, 0.0, fft=small)
    t_min = info.value.t_min
    assert 1e-4 < t_min < 1
    frozen_kernel(sym, 1.01 * t_min, 0.0, 0.0, fft=small)


# increment bounds -----------------------------------------------------------


def test_identical_points_give_zero_ratio(cauchy):
    bf = BoundFunction(scale_profile(cauchy))
    x = np.linspace(-1, 1, 5)
    D = np.ones((5, 5))
    assert increment_ratios(D, x, x, 0.5, bf, 1.0, 0)[0] == 0.0


def test_cauchy_increment_bounds_stable(cauchy):
    sym = build_symbol(cauchy, 0.0)
    bf = BoundFunction(scale_profile(cauchy))
    rep = check_increment_bounds(sym, bf, IncrementGrid(gammas=(0.0, 1.0), orders=(0,)))
    assert rep.verdict == "stable"
    assert np.isfinite(rep.max_ratio)
    # gamma = 0 is the triangle bound: its constant cannot exceed sup p / rho
    c_upper, _ = kernel_bound_constant(sym, bf, 1.0, np.linspace(-4, 4, 401))
    c_upper = max(c_upper, kernel_bound_constant(sym, bf, 0.5, np.linspace(-4, 4, 401))[0])
    g0 = [s for s in rep.slices if s.params.get("gamma") == 0.0]
    assert max(s.max_ratio for s in g0) <= c_upper * (1 + 1e-9)


def test_kernel_upper_bound_constant_refinement_stable(sine15, sine15_profile):
    sym = build_symbol(sine15, 0.0)
    bf = BoundFunction(sine15_profile)
    for t in (0.1, 0.5):
        coarse = kernel_bound_constant(sym, bf, t, np.linspace(-20, 20, 401))
        fine = kernel_bound_constant(sym, bf, t, np.linspace(-20, 20, 801))
        assert np.all(np.isfinite(coarse))
        assert np.allclose(fine, coarse, rtol=0.15)
