"""Jump models: the radial profile nu, kernel J, coefficient kappa(x, z).

Besides plain callables a model may carry a *separable decomposition*
``kappa(x, z) = sum_m a_m(x) b_m(z)``.  All built-in coefficient families are
of this form; the symbol and parametrix code exploit it to build every
frozen symbol from a handful of basis transforms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gamma as _gamma

from ._quadrature import HalfLine, local_exponent, log_nodes
from .errors import (
    DivergentIntegralError,
    ModelEvaluationError,
    QuadratureError,
    UnclassifiableModelError,
)

CASES = ("P1", "P2", "P3", "Q1", "Q2")
FORM_OF_CASE = {
    "P1": "compensated",
    "Q1": "compensated",
    "Q2": "compensated",
    "P2": "pure_jump",
    "P3": "symmetrized",
}


def sphere_area(d: int) -> float:
    """Surface measure of the unit sphere in R^d (2 for d=1)."""
    return 2 * math.pi ** (d / 2) / _gamma(d / 2)


# ---------------------------------------------------------------------------
# profiles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Profile:
    """A named scalar function of x (coefficient amplitude) or of z (jump direction).

    x-families: ``constant``, ``sine``, ``holder_sine``, ``bump``,
    ``piecewise_holder``, ``step``.  z-families: ``one``, ``positive``,
    ``negative``, ``odd_far``.
    """

    family: str
    params: tuple = ()

    def p(self, key, default=None):
        return dict(self.params).get(key, default)

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        f = self.family
        if f in ("constant", "one"):
            return np.full(v.shape, float(self.p("value", 1.0)))
        if f == "sine":
            return self.p("amplitude", 1.0) * np.sin(self.p("frequency", 1.0) * v + self.p("phase", 0.0))
        if f == "holder_sine":
            s = np.sin(self.p("frequency", 1.0) * v)
            return self.p("amplitude", 1.0) * np.sign(s) * np.abs(s) ** self.p("exponent", 0.5)
        if f == "bump":
            u = (v - self.p("center", 0.0)) / self.p("width", 1.0)
            with np.errstate(divide="ignore", over="ignore"):
                out = np.where(np.abs(u) < 1, np.exp(1.0 - 1.0 / np.maximum(1e-300, 1.0 - u * u)), 0.0)
            return self.p("amplitude", 1.0) * out
        if f == "piecewise_holder":
            u = np.minimum(np.abs(v) / self.p("scale", 1.0), 1.0)
            return self.p("amplitude", 1.0) * np.sign(v) * u ** self.p("exponent", 0.5)
        if f == "step":
            return self.p("amplitude", 1.0) * np.sign(v)
        if f == "positive":
            return (v > 0).astype(float)
        if f == "negative":
            return (v < 0).astype(float)
        if f == "odd_far":
            return np.sign(v) * (np.abs(v) >= self.p("cut", 0.5))
        raise ValueError(f"unknown profile family {f!r}")

    @property
    def breaks(self):
        """Discontinuity radii of a z-profile (on either half-line)."""
        if self.family == "odd_far":
            return (float(self.p("cut", 0.5)),)
        return ()

    @property
    def sup(self):
        if self.family in ("constant", "one"):
            return abs(float(self.p("value", 1.0)))
        if self.family in ("positive", "negative", "odd_far"):
            return 1.0
        return abs(float(self.p("amplitude", 1.0)))

    def holder_constant(self, beta):
        """A constant c with ``|f(x) - f(y)| <= c |x - y|^beta`` for all x, y.

        Uses ``min(L s, 2A) <= (2A)^(1-beta) L^beta s^beta`` for a Lipschitz
        profile bounded by ``A``; ``inf`` when no such constant exists.
        """
        f, A = self.family, self.sup
        if f in ("constant", "one"):
            return 0.0
        if f == "sine":
            return (2 * A) ** (1 - beta) * (A * self.p("frequency", 1.0)) ** beta
        if f in ("holder_sine", "piecewise_holder"):
            gam = self.p("exponent", 0.5)
            if beta > gam:
                return np.inf
            k = self.p("frequency", 1.0) if f == "holder_sine" else 1.0 / self.p("scale", 1.0)
            return A * 2 ** (1 - beta) * k**beta
        if f == "bump":
            lip = A * 2.0 / self.p("width", 1.0)  # crude bound on |bump'|
            return (2 * A) ** (1 - beta) * lip**beta
        return np.inf

    @property
    def is_constant(self):
        return self.family in ("constant", "one")


def _freeze_params(d):
    return tuple(sorted((k, v) for k, v in (d or {}).items() if k != "family"))


def profile(spec) -> Profile:
    if isinstance(spec, Profile):
        return spec
    if isinstance(spec, str):
        return Profile(spec)
    spec = dict(spec)
    return Profile(spec["family"], _freeze_params(spec))


@dataclass(frozen=True)
class Coefficient:
    """``kappa(x, z) = base + sum_m a_m(x) b_m(z)``."""

    base: float = 1.0
    terms: tuple = ()  # tuple[(Profile x, Profile z)]

    def __call__(self, x, z):
        x = np.asarray(x, dtype=float)
        z = np.asarray(z, dtype=float)
        out = np.full(np.broadcast(x, z).shape, float(self.base))
        for a, b in self.terms:
            out = out + a(x) * b(z)
        return out

    def decomposition(self):
        """``[(a_m, b_m)]`` including the constant base term."""
        parts = [(Profile("constant", (("value", float(self.base)),)), Profile("one"))]
        parts.extend(self.terms)
        return parts

    @property
    def bounds(self):
        spread = sum(a.sup * b.sup for a, b in self.terms)
        return self.base - spread, self.base + spread

    def holder_constant(self, beta):
        return sum(a.holder_constant(beta) * b.sup for a, b in self.terms)

    @property
    def x_independent(self):
        return all(a.is_constant for a, _ in self.terms)

    @property
    def symmetric_in_z(self):
        return all(b.family == "one" for _, b in self.terms)

    @property
    def breaks(self):
        return tuple(sorted({r for _, b in self.terms for r in b.breaks}))


# ---------------------------------------------------------------------------
# the model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JumpModel:
    """The data ``(nu, J, kappa)`` of a Levy-type operator with its constants.

    ``nu`` acts on radii, ``J`` on points of R^d (arrays of shape ``(..., d)``,
    or plain arrays when ``dim == 1``), ``kappa(x, z)`` on pairs of such.
    """

    dim: int
    nu: Callable
    J: Callable
    kappa: Callable
    C_J: float = 1.0
    kappa0: float = 1.0
    kappa1: float = 1.0
    kappa2: float = 0.0
    beta: float = 0.5
    symmetric_J: bool = True
    symmetric_kappa_in_z: bool = True
    decomposition: tuple | None = None  # ((a_m, b_m), ...)
    z_breaks: tuple = ()
    name: str = "model"
    family: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be a positive integer")
        if self.C_J < 1:
            raise ValueError("C_J must be >= 1")
        if not 0 < self.kappa0 <= self.kappa1:
            raise ValueError("need 0 < kappa0 <= kappa1")
        if self.kappa2 < 0 or not 0 < self.beta < 1:
            raise ValueError("need kappa2 >= 0 and beta in (0, 1)")

    @property
    def x_independent(self):
        if self.decomposition is not None:
            return all(getattr(a, "is_constant", False) for a, _ in self.decomposition)
        return False

    def half_line_weight(self, sign, b=None):
        """``z -> b(sign z) J(sign z)`` on ``z > 0`` (1-D only)."""
        J = self.J
        if b is None:
            return lambda z: J(sign * np.asarray(z, dtype=float))
        return lambda z: b(sign * np.asarray(z, dtype=float)) * J(sign * np.asarray(z, dtype=float))


def stable_nu(alpha, dim=1, scale=1.0):
    def nu(r):
        with np.errstate(divide="ignore"):
            return scale * np.asarray(r, dtype=float) ** (-dim - alpha)

    return nu


def tempered_nu(alpha, dim=1, scale=1.0, rate=1.0):
    def nu(r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return scale * r ** (-dim - alpha) * np.exp(-rate * r)

    return nu


def build_model(spec: dict) -> JumpModel:
    """Build a model from a configuration mapping.

    Keys: ``nu`` (``{family: stable|tempered, alpha, scale, rate}``),
    ``coefficient`` (``{base, terms: [{x: {...}, z: {...}}]}``), optional
    ``dim``, ``beta``, ``C_J``, ``kappa0``, ``kappa1``, ``kappa2``,
    ``name``.  Constants not given are derived from the families.
    """
    spec = dict(spec)
    dim = int(spec.get("dim", 1))
    nus = dict(spec.get("nu", {"family": "stable", "alpha": 1.5}))
    fam = nus.get("family", "stable")
    alpha = float(nus["alpha"])
    scale = float(nus.get("scale", 1.0))
    if fam == "stable":
        nu = stable_nu(alpha, dim, scale)
    elif fam == "tempered":
        nu = tempered_nu(alpha, dim, scale, float(nus.get("rate", 1.0)))
    else:
        raise ValueError(f"unknown nu family {fam!r}")

    if dim == 1:
        J = lambda z: nu(np.abs(np.asarray(z, dtype=float)))  # noqa: E731
    else:
        J = lambda z: nu(np.linalg.norm(np.asarray(z, dtype=float), axis=-1))  # noqa: E731

    cs = dict(spec.get("coefficient", {}))
    terms = []
    for t in cs.get("terms", []):
        terms.append((profile(t.get("x", "constant")), profile(t.get("z", "one"))))
    coef = Coefficient(float(cs.get("base", 1.0)), tuple(terms))
    beta = float(spec.get("beta", 0.5))
    lo, hi = coef.bounds
    k2 = spec.get("kappa2")
    k2 = coef.holder_constant(beta) if k2 is None else float(k2)
    if dim == 1:
        kappa = coef
    else:
        # z-profiles act on the first coordinate of z
        kappa = lambda x, z: coef(np.asarray(x)[..., 0], np.asarray(z)[..., 0])  # noqa: E731
    return JumpModel(
        dim=dim,
        nu=nu,
        J=J,
        kappa=kappa,
        C_J=float(spec.get("C_J", 1.0)),
        kappa0=float(spec.get("kappa0", lo)),
        kappa1=float(spec.get("kappa1", hi)),
        kappa2=float(k2) if np.isfinite(k2) else 1e300,
        beta=beta,
        symmetric_J=True,
        symmetric_kappa_in_z=coef.symmetric_in_z,
        decomposition=tuple(coef.decomposition()),
        z_breaks=coef.breaks,
        name=str(spec.get("name", "model")),
        family={"nu": fam, "alpha": alpha, "scale": scale, **({"rate": nus.get("rate", 1.0)} if fam == "tempered" else {})},
    )


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SampleSpec:
    """Finite grids on which the universally quantified assumptions are checked."""

    x: np.ndarray = field(default_factory=lambda: np.linspace(-4, 4, 33))
    z_radii: np.ndarray = field(default_factory=lambda: np.logspace(-4, 2, 61))
    r: np.ndarray = field(default_factory=lambda: np.logspace(-3, 0, 25))
    n_directions: int = 8

    def refined(self, factor=2):
        return SampleSpec(
            x=np.linspace(self.x[0], self.x[-1], factor * (len(self.x) - 1) + 1),
            z_radii=np.geomspace(self.z_radii[0], self.z_radii[-1], factor * (len(self.z_radii) - 1) + 1),
            r=np.geomspace(self.r[0], self.r[-1], factor * (len(self.r) - 1) + 1),
            n_directions=factor * self.n_directions,
        )

    def z_points(self, dim):
        if dim == 1:
            return np.concatenate([-self.z_radii[::-1], self.z_radii])
        rng = np.random.default_rng(12345)
        u = rng.normal(size=(self.n_directions, dim))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        return (self.z_radii[:, None, None] * u[None]).reshape(-1, dim)

    def x_points(self, dim):
        if dim == 1:
            return self.x
        return np.stack(np.meshgrid(*[self.x] * dim, indexing="ij"), -1).reshape(-1, dim)


@dataclass(frozen=True)
class Check:
    invariant: str
    passed: bool
    witness: tuple = ()
    lhs: float = float("nan")
    rhs: float = float("nan")


def _finite(values, what, where):
    values = np.asarray(values, dtype=float)
    bad = ~np.isfinite(values)
    if bad.any():
        idx = np.unravel_index(np.argmax(bad), values.shape)
        raise ModelEvaluationError(f"non-finite {what}", location=where(idx))
    return values


def levy_integral(m: JumpModel, cutoff=100.0):
    """``int (1 ^ |z|^2) nu(|z|) dz`` with a power-law tail beyond ``cutoff``."""
    area = sphere_area(m.dim)
    w = lambda r: np.asarray(r, dtype=float) ** (m.dim - 1) * m.nu(r)  # noqa: E731
    mom = HalfLine(w).moments(1.0, kmax=2)[2]
    zs, wt = log_nodes(1.0, cutoff)
    mid = float(np.sum(w(zs) * wt))
    nu_c = float(m.nu(np.array([cutoff]))[0])
    p = float(local_exponent(m.nu, cutoff))
    if nu_c == 0.0:
        tail = 0.0
    elif p > m.dim:
        tail = cutoff**m.dim * nu_c / (p - m.dim)
    else:
        tail = np.inf
    return area * (mom + mid + tail)


def validate_model(m: JumpModel, sample: SampleSpec | None = None) -> list[Check]:
    """Check the standing assumptions on finite sample grids.

    Returns one :class:`Check` per invariant; failed checks carry the
    witnessing sample point and both sides of the violated inequality.
    """
    s = sample or SampleSpec()
    out = []

    r = np.sort(s.z_radii)
    nu_r = _finite(m.nu(r), "nu", lambda i: {"r": float(r[i])})
    dec = np.diff(nu_r) > 1e-12 * np.abs(nu_r[:-1])
    if dec.any():
        i = int(np.argmax(dec))
        out.append(Check("nu_nonincreasing", False, (float(r[i]), float(r[i + 1])), float(nu_r[i + 1]), float(nu_r[i])))
    else:
        out.append(Check("nu_nonincreasing", True))

    try:
        L = levy_integral(m)
    except DivergentIntegralError:
        L = np.inf
    out.append(Check("levy_integrable", bool(np.isfinite(L)), (), float(L), float("inf")))

    z = s.z_points(m.dim)
    zn = np.abs(z) if m.dim == 1 else np.linalg.norm(z, axis=-1)
    Jz = _finite(m.J(z), "J", lambda i: {"z": z[i[0]].tolist() if m.dim > 1 else float(z[i[0]])})
    nz = m.nu(zn)
    lo = nz / m.C_J
    hi = nz * m.C_J
    tol = 1e-12 * nz
    bad_lo = Jz < lo - tol
    bad_hi = Jz > hi + tol
    if bad_lo.any():
        i = int(np.argmax(bad_lo))
        out.append(Check("J_comparable", False, (np.atleast_1d(z[i]).tolist(),), float(lo[i]), float(Jz[i])))
    elif bad_hi.any():
        i = int(np.argmax(bad_hi))
        out.append(Check("J_comparable", False, (np.atleast_1d(z[i]).tolist(),), float(Jz[i]), float(hi[i])))
    else:
        out.append(Check("J_comparable", True))

    xs = s.x_points(m.dim)
    if m.dim == 1:
        X, Z = np.meshgrid(xs, z, indexing="ij")
        K = _finite(m.kappa(X, Z), "kappa", lambda i: {"x": float(xs[i[0]]), "z": float(z[i[1]])})
    else:
        K = _finite(
            m.kappa(xs[:, None, :], z[None, :, :]),
            "kappa",
            lambda i: {"x": xs[i[0]].tolist(), "z": z[i[1]].tolist()},
        )
    tol = 1e-12 * max(1.0, m.kappa1)
    if (K < m.kappa0 - tol).any():
        i = np.unravel_index(np.argmin(K), K.shape)
        out.append(Check("kappa_bounds", False, (np.atleast_1d(xs[i[0]]).tolist(), np.atleast_1d(z[i[1]]).tolist()), m.kappa0, float(K[i])))
    elif (K > m.kappa1 + tol).any():
        i = np.unravel_index(np.argmax(K), K.shape)
        out.append(Check("kappa_bounds", False, (np.atleast_1d(xs[i[0]]).tolist(), np.atleast_1d(z[i[1]]).tolist()), float(K[i]), m.kappa1))
    else:
        out.append(Check("kappa_bounds", True))

    # Holder in x: brute force over all pairs, per z
    if m.dim == 1:
        dist = np.abs(xs[:, None] - xs[None, :])
    else:
        dist = np.linalg.norm(xs[:, None, :] - xs[None, :, :], axis=-1)
    iu = np.triu_indices(len(xs), 1)
    rhs = m.kappa2 * dist[iu] ** m.beta
    worst, wit = -np.inf, None
    for j in range(K.shape[1]):
        lhs = np.abs(K[:, j][:, None] - K[:, j][None, :])[iu]
        excess = lhs - rhs - 1e-12
        k = int(np.argmax(excess))
        if excess[k] > worst:
            worst = excess[k]
            wit = (k, j, float(lhs[k]), float(rhs[k]))
    k, j, lhs_v, rhs_v = wit
    a, b = iu[0][k], iu[1][k]
    witness = (np.atleast_1d(xs[a]).tolist(), np.atleast_1d(xs[b]).tolist(), np.atleast_1d(z[j]).tolist())
    out.append(Check("kappa_holder", bool(worst <= 0), witness, lhs_v, rhs_v))
    return out


def report_passed(report) -> bool:
    return all(c.passed for c in report)


# ---------------------------------------------------------------------------
# criticality integrals and classification
# ---------------------------------------------------------------------------


def criticality_integral(m: JumpModel, x, r, tol=1e-9):
    """``int_{r <= |z| < 1} z kappa(x, z) J(z) dz`` (1-D), as a length-1 vector.

    Both half-lines share the same nodes, so a z-symmetric integrand gives
    exactly zero.
    """
    if m.dim != 1:
        raise NotImplementedError("criticality integrals are implemented for d = 1")
    if not 0 < r <= 1:
        raise ValueError("need 0 < r <= 1")
    if r == 1:
        return np.zeros(1)
    x = float(x)

    def integral(n):
        zz, wt = log_nodes(r, 1.0, m.z_breaks, n=n, per_unit=2.0)
        g = m.kappa(x, zz) * m.J(zz) - m.kappa(x, -zz) * m.J(-zz)
        return float(np.sum(zz * g * wt))

    fine, coarse = integral(24), integral(12)
    if abs(fine - coarse) > tol * max(1.0, abs(fine)):
        raise QuadratureError(f"criticality integral not converged at x={x}, r={r}: {coarse} vs {fine}")
    return np.array([fine])


@dataclass(frozen=True)
class CaseTag:
    case: str
    params: dict
    kappa_crit: float | None = None
    kappa_crit_holder: float | None = None

    @property
    def form(self):
        return FORM_OF_CASE[self.case]


def fit_criticality(m: JumpModel, sp, xs=None, rs=None):
    """Smallest constants ``(kappa~0, kappa~1)`` valid on the sampled ``(x, r)`` grid."""
    xs = np.linspace(-4, 4, 33) if xs is None else np.asarray(xs)
    rs = np.logspace(-3, 0, 25) if rs is None else np.asarray(rs)
    rs = rs[rs < 1]
    I = np.array([[criticality_integral(m, x, r)[0] for r in rs] for x in xs])
    rh = rs * sp.h(rs)
    k0 = float(np.max(np.abs(I) / rh[None, :]))
    d = np.abs(xs[:, None] - xs[None, :]) ** m.beta
    iu = np.triu_indices(len(xs), 1)
    diff = np.abs(I[:, None, :] - I[None, :, :])[iu] / (d[iu][:, None] * rh[None, :])
    k1 = float(np.max(diff)) if diff.size else 0.0
    return k0, k1


def classify_case(m: JumpModel, sp, xs=None, rs=None, q1_tol=0.02) -> CaseTag:
    """First matching case in the order P1, P2, P3, Q1, Q2.

    ``sp`` is a fitted :class:`~levy_parametrix.scales.ScaleProfile`.
    """
    a, b = sp.alpha_h, sp.beta_h
    base = {"C_J": m.C_J, "kappa0": m.kappa0, "kappa1": m.kappa1, "alpha_h": a, "C_h": sp.C_h}
    ext = {"kappa2": m.kappa2}
    failures = {}
    if a > 1 + 1e-12:
        return CaseTag("P1", {**base, **ext})
    failures["P1"] = f"alpha_h={a:.2f} is not > 1"
    upper_ok = b is not None and 0 < a <= b < 1
    if upper_ok:
        return CaseTag("P2", {**base, "beta_h": b, "c_h": sp.c_h, **ext})
    failures["P2"] = f"need 0 < alpha_h <= beta_h < 1 (alpha_h={a:.2f}, beta_h={b})"
    if m.symmetric_J and m.symmetric_kappa_in_z:
        return CaseTag("P3", {**base, **ext})
    failures["P3"] = "J or kappa(x, .) not symmetric"
    q1 = abs(a - 1) <= q1_tol
    q2 = upper_ok and 1 - a < min(m.beta, a)
    if q1 or q2:
        k0, k1 = fit_criticality(m, sp, xs, rs)
        if np.isfinite(k0) and np.isfinite(k1):
            case = "Q1" if q1 else "Q2"
            return CaseTag(case, {**base, "kappa_crit": k0, **ext, "kappa_crit_holder": k1}, k0, k1)
        failures["Q1" if q1 else "Q2"] = "criticality constants not finite"
    else:
        failures["Q1"] = f"|alpha_h - 1| = {abs(a - 1):.3f} > {q1_tol}"
        failures["Q2"] = "scaling or 1 - alpha_h < beta ^ alpha_h fails"
    raise UnclassifiableModelError(failures)


def model_from_callables(nu, J, kappa, dim=1, **constants) -> JumpModel:
    """Wrap arbitrary callables; no decomposition is assumed."""
    return JumpModel(dim=dim, nu=nu, J=J, kappa=kappa, **constants)


__all__ = [
    "CASES",
    "CaseTag",
    "Check",
    "Coefficient",
    "JumpModel",
    "Profile",
    "SampleSpec",
    "build_model",
    "classify_case",
    "criticality_integral",
    "fit_criticality",
    "levy_integral",
    "model_from_callables",
    "profile",
    "report_passed",
    "sphere_area",
    "stable_nu",
    "tempered_nu",
    "validate_model",
]

