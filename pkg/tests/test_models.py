import math

import numpy as np
import pytest
from scipy.integrate import quad

from conftest import stable_model
from levy_parametrix import (
    JumpModel,
    ModelEvaluationError,
    UnclassifiableModelError,
    build_model,
    classify_case,
    scale_profile,
    validate_model,
)
from levy_parametrix.models import SampleSpec, criticality_integral, report_passed


def by_name(report):
    return {c.invariant: c for c in report}


def test_constant_coefficient_model_passes_every_invariant(inv_square):
    rep = validate_model(inv_square)
    assert report_passed(rep)
    assert set(by_name(rep)) == {"nu_nonincreasing", "levy_integrable", "J_comparable", "kappa_bounds", "kappa_holder"}


def test_sine_coefficient_passes_with_lipschitz_exponent():
    # |sin x - sin y| / 2 <= kappa2 |x - y|^beta needs beta close to 1 for kappa2 = 1/2
    m = build_model({"nu": {"alpha": 1.0}, "beta": 0.9, "kappa2": 0.5, "coefficient": {"terms": [{"x": {"family": "sine", "amplitude": 0.5}}]}})
    assert (m.kappa0, m.kappa1) == (0.5, 1.5)
    assert report_passed(validate_model(m))


def test_sine_coefficient_with_small_beta_is_flagged():
    m = build_model({"nu": {"alpha": 1.0}, "beta": 0.5, "kappa2": 0.5, "coefficient": {"terms": [{"x": {"family": "sine", "amplitude": 0.5}}]}})
    c = by_name(validate_model(m))["kappa_holder"]
    assert not c.passed and c.lhs > c.rhs


def test_step_coefficient_fails_holder_near_origin():
    m = build_model({"nu": {"alpha": 1.0}, "beta": 0.5, "kappa2": 0.5, "coefficient": {"terms": [{"x": {"family": "step", "amplitude": 0.5}}]}})
    c = by_name(validate_model(m))["kappa_holder"]
    assert not c.passed
    x1, x2, _ = c.witness
    assert x1[0] < 0 < x2[0] or x2[0] < 0 < x1[0]
    assert c.lhs == pytest.approx(1.0)


def test_derived_holder_constant_is_valid(sine15):
    assert report_passed(validate_model(sine15, SampleSpec().refined()))


def test_nonfinite_evaluation_reports_location():
    def kappa(x, z):
        return np.where(np.asarray(x) > 1.0, np.nan, 1.0) + 0 * np.asarray(z)

    m = JumpModel(1, lambda r: np.asarray(r) ** -2.0, lambda z: np.abs(np.asarray(z)) ** -2.0, kappa)
    with pytest.raises(ModelEvaluationError, match="kappa"):
        validate_model(m)


def test_increasing_nu_fails_monotonicity():
    nu = lambda r: np.asarray(r) ** -2.0 * (1 + (np.asarray(r) > 1))  # noqa: E731
    m = JumpModel(1, nu, lambda z: nu(np.abs(z)), lambda x, z: np.ones(np.broadcast(x, z).shape), C_J=1.0)
    assert not by_name(validate_model(m))["nu_nonincreasing"].passed


def test_non_levy_profile_fails_integrability():
    m = build_model({"nu": {"alpha": 2.5}})
    assert not by_name(validate_model(m))["levy_integrable"].passed


def test_comparability_with_cj():
    nu = lambda r: np.asarray(r, dtype=float) ** -2.0  # noqa: E731
    J = lambda z: 3 * nu(np.abs(z))  # noqa: E731
    one = lambda x, z: np.ones(np.broadcast(x, z).shape)  # noqa: E731
    assert not by_name(validate_model(JumpModel(1, nu, J, one, C_J=2.0)))["J_comparable"].passed
    assert by_name(validate_model(JumpModel(1, nu, J, one, C_J=3.0)))["J_comparable"].passed


# criticality integrals ------------------------------------------------------


def one_sided():
    # kappa = 1 on z > 0 and 2 on z < 0
    return build_model({"nu": {"alpha": 1.0}, "coefficient": {"base": 1.0, "terms": [{"x": {"family": "constant"}, "z": "negative"}]}, "kappa0": 1.0, "kappa1": 2.0})


def test_criticality_vanishes_for_symmetric_model(sine15):
    for x in (-1.0, 0.3, 2.0):
        assert criticality_integral(sine15, x, 0.5)[0] == 0.0


def test_criticality_one_sided_is_minus_log2():
    m = one_sided()
    oracle = quad(lambda z: z * z**-2.0, 0.5, 1.0)[0] - 2 * quad(lambda z: z * z**-2.0, 0.5, 1.0)[0]
    assert oracle == pytest.approx(-math.log(2), abs=1e-12)
    assert criticality_integral(m, 0.0, 0.5)[0] == pytest.approx(oracle, abs=1e-9)


def test_criticality_at_r_one_is_zero():
    assert np.array_equal(criticality_integral(one_sided(), 0.0, 1.0), np.zeros(1))


def test_criticality_antisymmetric_under_reflection():
    bounds = {"kappa0": 1.0, "kappa1": 2.0}
    pos = build_model({"nu": {"alpha": 1.0}, "coefficient": {"terms": [{"z": "positive"}]}, **bounds})
    neg = build_model({"nu": {"alpha": 1.0}, "coefficient": {"terms": [{"z": "negative"}]}, **bounds})
    for r in (0.1, 0.5):
        assert criticality_integral(pos, 0.0, r)[0] == pytest.approx(-criticality_integral(neg, 0.0, r)[0], rel=1e-14)


def test_criticality_x_independent_for_x_free_kappa():
    m = one_sided()
    vals = {criticality_integral(m, x, 0.2)[0] for x in np.linspace(-3, 3, 7)}
    assert len(vals) == 1


# classification ------------------------------------------------------------


@pytest.mark.parametrize("alpha, case", [(1.5, "P1"), (0.5, "P2"), (1.0, "P3")])
def test_classification_examples(alpha, case):
    m = stable_model(alpha, amplitude=0.5, beta=0.5)
    sp = scale_profile(m)
    assert classify_case(m, sp).case == case
    if alpha != 1.0:
        assert sp.alpha_h == pytest.approx(alpha, abs=0.05)


def test_classification_stable_under_refinement():
    for alpha in (1.5, 0.5, 1.0):
        m = stable_model(alpha, amplitude=0.5)
        coarse = classify_case(m, scale_profile(m, per_decade=16)).case
        fine = classify_case(m, scale_profile(m, per_decade=32)).case
        assert coarse == fine


def test_q1_example_has_finite_criticality_constants():
    m = stable_model(1.0, amplitude=0.3, z_profile={"family": "odd_far", "cut": 0.5})
    tag = classify_case(m, scale_profile(m))
    assert tag.case == "Q1"
    assert np.isfinite(tag.kappa_crit) and np.isfinite(tag.kappa_crit_holder)
    # |I| <= 2 a ln 2 for every r (both half-lines), and r h(r) = 4 for nu = r^-2
    assert tag.kappa_crit == pytest.approx(2 * 0.3 * math.log(2) / 4 * max(abs(np.sin(np.linspace(-4, 4, 33)))), rel=1e-6)


def test_unclassifiable_lists_each_case():
    # mixed indices 0.3 near r = 1 and 1.3 near r = 0, asymmetric in z
    nu = lambda r: np.asarray(r, dtype=float) ** -1.3 + 0.01 * np.asarray(r, dtype=float) ** -2.3  # noqa: E731
    one = lambda x, z: np.ones(np.broadcast(x, z).shape)  # noqa: E731
    m = JumpModel(1, nu, lambda z: nu(np.abs(z)), one, symmetric_kappa_in_z=False)
    with pytest.raises(UnclassifiableModelError) as info:
        classify_case(m, scale_profile(m))
    assert set(info.value.failures) == {"P1", "P2", "P3", "Q1", "Q2"}
