import numpy as np
import pytest

from conftest import cauchy_density
from levy_parametrix import (
    BoundFunction,
    GeneratorSpec,
    Parametrix,
    ParametrixConfig,
    PicardDivergenceError,
    build_symbol,
    frozen_kernel,
    generator_difference,
    picard_solve,
)
from levy_parametrix.generator import TestFunction as Smooth
from levy_parametrix.parametrix import _check_divergence, q0, time_grid
from levy_parametrix.scales import rho_family
from levy_parametrix.verify import derivative_consistency

SMALL = ParametrixConfig(n_time=8, n_space=101, y_eval=None)


@pytest.fixture(scope="module")
def sine_pm(sine15):
    pm = Parametrix(sine15, ParametrixConfig(n_time=16, n_space=201, y_eval=None))
    pm.picard_solve()
    return pm


# configuration -----------------------------------------------------------------


@pytest.mark.parametrize("kw", [{"grading": 1.0}, {"n_space": 200}, {"n_picard": -1}])
def test_config_rejects_bad_values(kw):
    with pytest.raises(ValueError):
        ParametrixConfig(**kw)


def test_time_grid_graded_towards_zero():
    e = time_grid(0.5, 8, 2.0)
    assert e[0] == 0 and e[-1] == pytest.approx(0.5)
    assert np.all(np.diff(np.diff(e)) > 0)
    a = time_grid(0.3, 6, 2.0, anchor=0.25)
    k = np.searchsorted(a, 0.25) - 1
    assert 0.5 * (a[k] + a[k + 1]) == pytest.approx(0.25)


def test_nonseparable_model_rejected(sine15):
    from dataclasses import replace

    with pytest.raises(NotImplementedError):
        Parametrix(replace(sine15, decomposition=None))


# q0 ----------------------------------------------------------------------------


def test_q0_vanishes_on_diagonal(sine15):
    for y in (-1.0, 0.0, 0.7):
        assert q0(sine15, 0.2, y, y) == 0.0


def test_q0_vanishes_for_constant_kappa(cauchy):
    assert np.all(q0(cauchy, 0.3, np.linspace(-3, 3, 13), 0.0) == 0.0)


def test_q0_grid_matches_pointwise(sine15):
    pm = Parametrix(sine15, SMALL)
    t = 0.2
    G = pm.q0_grid(t)
    j = int(np.argmin(np.abs(pm.x - 0.48)))
    pts = q0(sine15, t, pm.x, pm.x[j])
    # the grid path lives on a period of about 32 and corrects images by their far field
    assert np.max(np.abs(G[:, j] - pts)) <= 1e-4 * np.max(np.abs(pts))


def test_q0_equals_generator_difference_on_frozen_kernel(sine15):
    # definition: (L^{K_x} - L^{K_y}) applied in x to p^{K_y}(t, ., y)
    t, y = 0.25, 0.3
    sym = build_symbol(sine15, y)
    f = Smooth(lambda u: frozen_kernel(sym, t, u, y), tuple(lambda u, k=k: frozen_kernel(sym, t, u, y, k) for k in (1, 2)))
    spec = GeneratorSpec(inner_radius=0.01, span=40.0, length_scale=0.25, n_gauss=8)
    for x in (-1.0, 0.9, 2.0):
        ref = generator_difference(sine15, spec, f, x, x, y)
        assert q0(sine15, t, x, y) == pytest.approx(ref, rel=1e-3, abs=1e-6)


def test_q0_bound_ratio_refinement_stable(sine15, sine15_profile):
    bf = BoundFunction(sine15_profile)
    b1 = sine15.beta
    ratios = []
    for n in (81, 161):
        x = np.linspace(-4, 4, n)
        r = 0.0
        for t in (0.05, 0.1, 0.25):
            v = np.abs(q0(sine15, t, x, 0.0))
            E = rho_family(bf, 0, b1, t, x, True) + rho_family(bf, b1, 0, t, x, True)
            r = max(r, float(np.max(v / E)))
        ratios.append(r)
    assert np.isfinite(ratios).all()
    assert ratios[1] == pytest.approx(ratios[0], rel=0.15)


# Picard --------------------------------------------------------------------


def test_constant_kappa_gives_zero_q_at_every_iteration(cauchy):
    q = picard_solve(cauchy, ParametrixConfig(n_time=6, n_space=101, n_picard=3))
    assert np.all(q.iterates == 0.0)
    assert q.deltas == (0.0, 0.0, 0.0)


def test_zero_iterations_return_q0_panel_averages(sine15):
    pm = Parametrix(sine15, ParametrixConfig(n_time=6, n_space=101, n_picard=0, y_eval=(0.0,)))
    q = pm.picard_solve()
    assert q.iterates.shape[0] == 1 and q.deltas == ()
    s, w = np.polynomial.legendre.leggauss(24)
    for k in (2, 4):
        a, b = pm.edges[k], pm.edges[k + 1]
        avg = sum(wi * pm.q0_grid(a + (b - a) * (si + 1) / 2) for si, wi in zip(s, w)) / 2
        assert np.max(np.abs(q.field.values[k] - avg)) <= 1e-8 * np.max(np.abs(avg))


def test_picard_contraction(sine_pm):
    d = np.array(sine_pm.q.deltas)
    assert np.all(d[2:] / d[1:-1] < 0.5)


def test_picard_deltas_reproduced_on_halved_grid(sine15):
    a = picard_solve(sine15, ParametrixConfig(n_time=8, n_space=101)).deltas
    b = picard_solve(sine15, ParametrixConfig(n_time=16, n_space=201)).deltas
    # same geometric decay: the ratios agree within a factor 2
    ra, rb = np.array(a[2:]) / np.array(a[1:-1]), np.array(b[2:]) / np.array(b[1:-1])
    assert np.all(np.abs(np.log(ra / rb)) < np.log(2))


def test_divergence_detection():
    _check_divergence([1.0, 0.5, 0.6, 0.7])
    with pytest.raises(PicardDivergenceError):
        _check_divergence([1.0, 0.5, 0.6, 0.7, 0.8])


# phi and p^kappa --------------------------------------------------------------


def test_constant_kappa_reduces_to_cauchy_kernel(cauchy):
    pm = Parametrix(cauchy, ParametrixConfig(n_time=8, n_space=201, t_max=1.0, n_picard=2, y_eval=(0.0, 1.0)))
    for t in (0.25, 1.0):
        assert np.all(pm.phi(t) == 0.0)
        P = pm.heat_kernel(t)
        assert np.array_equal(P, pm.frozen_part(t))
        ref = cauchy_density(t, pm.y[None, :] - pm.x[:, None])
        inner = np.abs(pm.x) <= 5
        assert np.max(np.abs(P[inner] - ref[inner]) / ref[inner]) <= 1e-3


@pytest.mark.parametrize("order", [1, 2])
def test_derivatives_match_finite_differences(sine_pm, order):
    assert derivative_consistency(sine_pm, 0.25, order) <= 1e-3


def test_positivity(sine_pm):
    for t in (0.05, 0.25, 0.5):
        P = sine_pm.heat_kernel(t)
        assert P.min() >= -1e-6 * P.max()


def test_mass_conservation(sine_pm):
    idx = np.nonzero(np.abs(sine_pm.x) <= 4)[0]
    assert np.max(np.abs(sine_pm.mass(0.25, idx) - 1)) <= 5e-3


def test_phi_bound_ratio_refinement_stable(sine15, sine15_profile):
    bf = BoundFunction(sine15_profile)
    ratios = []
    for cfg in (ParametrixConfig(n_time=8, n_space=101, y_eval=(0.0,)), ParametrixConfig(n_time=16, n_space=201, y_eval=(0.0,))):
        pm = Parametrix(sine15, cfg)
        inner = np.abs(pm.x) <= 4
        r = 0.0
        for t in (0.1, 0.25, 0.5):
            ph = np.abs(pm.phi(t)[inner, 0])
            E = rho_family(bf, 0, sine15.beta, t, pm.x[inner], False) + rho_family(bf, sine15.beta, 0, t, pm.x[inner], False)
            r = max(r, float(np.max(ph / E)))
        ratios.append(r)
    assert ratios[1] == pytest.approx(ratios[0], rel=0.15)


def test_phi_beyond_horizon_rejected(sine_pm):
    with pytest.raises(ValueError):
        sine_pm.phi(0.6)


def test_save_and_load_roundtrip(sine15, tmp_path):
    cfg = ParametrixConfig(n_time=6, n_space=101)
    a = Parametrix(sine15, cfg)
    a.picard_solve()
    a.save_q(tmp_path / "q.npz")
    b = Parametrix(sine15, cfg)
    b.load_q(tmp_path / "q.npz")
    assert np.array_equal(a.heat_kernel(0.3), b.heat_kernel(0.3))
    with pytest.raises(ValueError):
        Parametrix(sine15, cfg.refined()).load_q(tmp_path / "q.npz")
    with pytest.raises(ValueError):
        Parametrix(sine15, ParametrixConfig(n_time=6, n_space=101, n_picard=2)).load_q(tmp_path / "q.npz")


def test_second_order_warning():
    from levy_parametrix.parametrix import warn_second_order

    with pytest.warns(UserWarning):
        warn_second_order(1.5, 0.4)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("error")
        warn_second_order(1.8, 0.6)
