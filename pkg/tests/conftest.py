"""Shared models and the acceptance summary printed at the end of the run."""
import math

import numpy as np
import pytest

from levy_parametrix import build_model, scale_profile

ACCEPTANCE_LINES = []

# 1/pi: J(z) = 1/(pi z^2) has symbol |xi| and the Cauchy heat kernel.
CAUCHY_SCALE = 1 / math.pi


def stable_model(alpha, amplitude=0.0, beta=0.5, scale=1.0, z_profile=None, name="m"):
    """``nu = scale r^(-1-alpha)``, ``kappa = 1 + amplitude sin(x) [b(z)]``."""
    spec = {"name": name, "nu": {"family": "stable", "alpha": alpha, "scale": scale}, "beta": beta}
    if amplitude:
        term = {"x": {"family": "sine", "amplitude": amplitude}}
        if z_profile is not None:
            term["z"] = z_profile
        spec["coefficient"] = {"base": 1.0, "terms": [term]}
    return build_model(spec)


def stable_symbol_constant(alpha):
    """``int (1 - cos z) |z|^(-1-alpha) dz``, so that ``psi(xi) = c |xi|^alpha``."""
    if alpha == 1:
        return math.pi
    return 2 * math.gamma(1 - alpha) * math.cos(math.pi * alpha / 2) / alpha


def cauchy_density(t, u):
    return t / (np.pi * (t**2 + np.asarray(u) ** 2))


@pytest.fixture(scope="session")
def cauchy():
    return stable_model(1.0, scale=CAUCHY_SCALE, name="cauchy")


@pytest.fixture(scope="session")
def inv_square():
    """``nu(r) = r^-2``, ``kappa = 1``."""
    return stable_model(1.0, name="inv_square")


@pytest.fixture(scope="session")
def inv_square_profile(inv_square):
    return scale_profile(inv_square)


@pytest.fixture(scope="session")
def sine15():
    return stable_model(1.5, amplitude=0.25, beta=0.5, name="sine15")


@pytest.fixture(scope="session")
def sine15_profile(sine15):
    return scale_profile(sine15)


@pytest.fixture(scope="session")
def sine18():
    return stable_model(1.8, amplitude=0.25, beta=0.6, name="sine18")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
