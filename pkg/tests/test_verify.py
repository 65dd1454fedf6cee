import numpy as np
import pytest
from scipy.special import voigt_profile

from conftest import stable_model
from levy_parametrix import FirstMomentDivergenceError, HypothesisNotSatisfiedError, ParametrixConfig, SchemeRejectedError
from levy_parametrix._report import EstimateReport, verdict_of
from levy_parametrix.verify import (
    MCSettings,
    SampleGrid,
    admissible_window,
    chapman_kolmogorov,
    check_q_regularity,
    check_theorem_holder,
    derivative_consistency,
    gaussian_smooth,
    mc_agreement,
    mc_oracle,
    refinement_solvers,
)

SMALL = ParametrixConfig(n_time=8, n_space=101, t_max=0.5)
# dx = 0.16 on the coarse solver: sample points and columns sit on both grids
GRID = SampleGrid(x_half_width=1.6, x_step=0.16, y_points=(0.0, 0.48))


# preconditions ---------------------------------------------------------------


@pytest.mark.parametrize("alpha_h, beta, level", [(1.2, 0.6, 2), (0.6, 0.3, 1), (0.4, 0.5, 1)])
def test_admissible_window_refuses(alpha_h, beta, level):
    with pytest.raises(HypothesisNotSatisfiedError):
        admissible_window(alpha_h, beta, level)


@pytest.mark.parametrize("alpha_h, beta, level, r0", [(1.8, 0.6, 1, 1.0), (1.8, 0.6, 2, 0.4), (1.5, 0.5, 0, 1.0), (0.6, 0.3, 0, 0.9)])
def test_admissible_window_values(alpha_h, beta, level, r0):
    assert admissible_window(alpha_h, beta, level) == pytest.approx(r0)


def test_holder_check_refuses_before_solving():
    m = stable_model(0.6, amplitude=0.25, beta=0.3)
    with pytest.raises(HypothesisNotSatisfiedError):
        check_theorem_holder(m, 1, [0.0], solvers=[])


def test_q_regularity_parameter_checks(sine15, sine15_profile):
    with pytest.raises(HypothesisNotSatisfiedError):
        check_q_regularity(sine15, 0.6, [0.1], profile=sine15_profile, solvers=[])
    with pytest.raises(HypothesisNotSatisfiedError):
        check_q_regularity(sine15, 0.5, [0.0, 0.5], profile=sine15_profile, solvers=[])


# verdicts --------------------------------------------------------------------


@pytest.mark.parametrize(
    "series, verdict",
    [
        ((1.0, 1.1), "stable"),
        ((1.0, 0.9), "stable"),
        ((2.0, 1.0, 1.14), "stable"),
        ((1.0, 1.2), "diverging"),
        ((1.0, np.inf), "diverging"),
        ((1.0, 0.5), "inconclusive"),
        ((1.0,), "inconclusive"),
        ((0.0, 0.0), "stable"),
    ],
)
def test_verdict_rule(series, verdict):
    assert verdict_of(series) == verdict


def test_combined_report_takes_worst_slice():
    a = EstimateReport("x", {"r": 0}, (1.0, 1.0))
    b = EstimateReport("x", {"r": 1}, (1.0, 2.0))
    rep = EstimateReport.combine("x", {}, [a, b])
    assert rep.refinement_series == (1.0, 2.0)
    assert rep.verdict == "diverging"
    assert len(list(rep.rows())) == 2


# parametrix harnesses -----------------------------------------------------------


@pytest.fixture(scope="module")
def sine_solvers(sine15):
    cfg = ParametrixConfig(**{**SMALL.__dict__, "y_eval": GRID.y_points})
    return refinement_solvers(sine15, cfg, 2)


def test_holder_harness_on_sine_model(sine15, sine15_profile, sine_solvers):
    rep = check_theorem_holder(sine15, 0, [0.0, 0.5, 1.0], (0.1, 0.25), GRID, profile=sine15_profile, solvers=sine_solvers)
    # r = 1 is outside the admissible window r < 1 and only reported
    assert {s.params["r"] for s in rep.slices} == {0.0, 0.5, "pure"}
    assert 1.0 in rep.params["outside_window"]
    assert all(np.isfinite(s.refinement_series).all() and s.max_ratio > 0 for s in rep.slices)
    assert rep.verdict == "stable"


def test_sample_points_must_lie_on_grid(sine15, sine15_profile, sine_solvers):
    bad = SampleGrid(x_half_width=1.0, x_step=0.1, y_points=(0.0,))
    with pytest.raises(ValueError):
        check_theorem_holder(sine15, 0, [0.0], (0.25,), bad, profile=sine15_profile, solvers=sine_solvers)


def test_derivative_consistency_rejects_order(sine_solvers):
    with pytest.raises(ValueError):
        derivative_consistency(sine_solvers[0], 0.25, 3)


def test_chapman_kolmogorov_needs_all_columns(sine_solvers):
    with pytest.raises(ValueError):
        chapman_kolmogorov(sine_solvers[0], 0.1, 0.1)


# Monte Carlo -----------------------------------------------------------------

Y = np.linspace(-2, 2, 21)
FAST = MCSettings(n_steps=10, batch=5000, seed=3)


def test_mc_cauchy_against_voigt_profile(cauchy):
    # KDE of a Cauchy(t) sample has mean Cauchy * Gaussian(bandwidth) = Voigt profile
    t, bw = 0.5, 0.2
    mc = mc_oracle(cauchy, t, 0.0, 40000, bw, Y, settings=FAST)
    ref = voigt_profile(Y, bw, t)
    assert mc_agreement(mc, ref) >= 0.9
    assert np.max(np.abs(mc.density - ref)) <= 0.05 * ref.max()


def test_mc_ci_halves_when_paths_quadruple(cauchy):
    a = mc_oracle(cauchy, 0.5, 0.0, 5000, 0.2, Y, settings=FAST)
    b = mc_oracle(cauchy, 0.5, 0.0, 20000, 0.2, Y, settings=FAST)
    ratio = np.median(a.half_width / b.half_width)
    assert ratio == pytest.approx(2.0, rel=0.2)


def test_mc_is_deterministic_for_a_seed(cauchy):
    a = mc_oracle(cauchy, 0.5, 0.3, 6000, 0.2, Y, settings=FAST)
    b = mc_oracle(cauchy, 0.5, 0.3, 6000, 0.2, Y, settings=FAST)
    c = mc_oracle(cauchy, 0.5, 0.3, 6000, 0.2, Y, settings=MCSettings(n_steps=10, batch=5000, seed=4))
    assert np.array_equal(a.density, b.density) and np.array_equal(a.half_width, b.half_width)
    assert not np.array_equal(a.density, c.density)


def test_mc_scheme_rejected_for_coarse_cutoff(cauchy):
    with pytest.raises(SchemeRejectedError):
        mc_oracle(cauchy, 0.5, 0.0, 100, 1e-4, Y, settings=FAST)


def test_mc_pure_jump_needs_first_moment(sine15):
    with pytest.raises(FirstMomentDivergenceError):
        mc_oracle(sine15, 0.25, 0.0, 100, 0.2, Y, form="pure_jump", settings=MCSettings(n_steps=200))


def test_gaussian_smooth_of_gaussian():
    s, bw = 0.5, 0.2
    u = np.linspace(-8, 8, 4001)
    g = np.exp(-0.5 * (u / s) ** 2) / (np.sqrt(2 * np.pi) * s)
    v = np.hypot(s, bw)
    ref = np.exp(-0.5 * (Y / v) ** 2) / (np.sqrt(2 * np.pi) * v)
    assert np.allclose(gaussian_smooth(u, g, Y, bw), ref, rtol=1e-8, atol=1e-12)
