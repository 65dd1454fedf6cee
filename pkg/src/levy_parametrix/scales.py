"""Scale functions h, K, the inverse of h, weak scaling fits and the bound function.

``h(r) = int (1 ^ |x|^2/r^2) nu(|x|) dx`` and
``K(r) = r^-2 int_{|x|<r} |x|^2 nu(|x|) dx`` are computed on a log table
once; bulk evaluation goes through cubic splines in log-log coordinates,
which reproduce pure power laws exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator
from scipy.optimize import brentq

from ._io import write_csv
from ._quadrature import HalfLine
from .errors import DivergentIntegralError, OutOfRangeError
from .models import JumpModel, sphere_area

EXPONENT_STEP = 0.01
SCALING_SLACK = 1.05


def _radial(m: JumpModel):
    d = m.dim
    return HalfLine(lambda s: np.asarray(s, dtype=float) ** (d - 1) * m.nu(s))


def _h_and_K(m: JumpModel, r):
    hl = _radial(m)
    area = sphere_area(m.dim)
    r = float(r)
    if not r > 0:
        raise ValueError("r must be positive")
    inner = hl.moments(r, kmax=2)[2]
    if not np.isfinite(inner):
        raise DivergentIntegralError("not a Levy profile: second moment diverges at the origin")
    try:
        outer = hl.upper(r)
    except DivergentIntegralError as e:
        raise DivergentIntegralError("not a Levy profile: nu is not integrable at infinity") from e
    K = area * inner / r**2
    return K + area * outer, K


def compute_h(m: JumpModel, r):
    """``h(r)`` by split quadrature at ``|x| = r``; scalar or array ``r``."""
    r = np.asarray(r, dtype=float)
    out = np.array([_h_and_K(m, v)[0] for v in r.ravel()])
    return out.reshape(r.shape) if r.ndim else float(out[0])


def compute_K(m: JumpModel, r):
    """``K(r) = r^-2 int_{|x|<r} |x|^2 nu(|x|) dx``."""
    r = np.asarray(r, dtype=float)
    out = np.array([_h_and_K(m, v)[1] for v in r.ravel()])
    return out.reshape(r.shape) if r.ndim else float(out[0])


class LogLogTable:
    """Spline of ``log f`` against ``log r`` with linear extrapolation at both ends."""

    def __init__(self, r, f):
        self.lr = np.log(r)
        self.lf = np.log(f)
        self.spline = CubicSpline(self.lr, self.lf)
        d = self.spline.derivative()
        self.slopes = (float(d(self.lr[0])), float(d(self.lr[-1])))

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            x = np.log(r)
        lo, hi = self.lr[0], self.lr[-1]
        y = self.spline(np.clip(x, lo, hi))
        y = np.where(x < lo, self.lf[0] + self.slopes[0] * (x - lo), y)
        y = np.where(x > hi, self.lf[-1] + self.slopes[1] * (x - hi), y)
        return np.exp(y)


def fit_scaling(h, lower=True, fit_range=(1e-3, 1.0), n=31, slack=SCALING_SLACK):
    """Weak scaling exponent and constant for ``h`` on a log grid of ``(lambda, r)``.

    ``lower=True``: the largest ``alpha`` on a 0.01 grid whose smallest
    constant ``C = max h(r) / (lambda^alpha h(lambda r))`` is at most
    ``slack``; returns ``(alpha, C)``.  ``lower=False``: the smallest
    ``beta`` with ``c = min h(r) / (lambda^beta h(lambda r)) >= 1/slack``;
    returns ``(None, None)`` when no ``beta <= 2`` qualifies.
    """
    g = np.geomspace(fit_range[0], fit_range[1], n)
    lam, r = np.meshgrid(g, g, indexing="ij")
    logR = np.log(h(r) / h(lam * r)).ravel()
    loglam = np.log(lam).ravel()
    exps = np.round(np.arange(1, 201) * EXPONENT_STEP, 2)
    consts = [np.exp((logR - a * loglam).max() if lower else (logR - a * loglam).min()) for a in exps]
    consts = np.array(consts)
    if lower:
        ok = np.nonzero(consts <= slack)[0]
        i = ok[-1] if len(ok) else 0
        return float(exps[i]), max(1.0, float(consts[i]))
    ok = np.nonzero(consts >= 1 / slack)[0]
    if not len(ok):
        return None, None
    i = ok[0]
    return float(exps[i]), min(1.0, float(consts[i]))


@dataclass(frozen=True, eq=False)
class ScaleProfile:
    """``h``, ``K``, ``h^-1`` of a model plus fitted scaling exponents.

    ``h`` and ``K`` are log-log spline tables over ``table_range``;
    ``h_inv`` is the monotone interpolant of the same table, while
    :func:`invert_h` solves ``h(r) = u`` to full precision.
    """

    dim: int
    h: LogLogTable
    K: LogLogTable
    h_inv: PchipInterpolator
    alpha_h: float
    C_h: float
    beta_h: float | None
    c_h: float | None
    fit_range: tuple
    table_range: tuple

    @property
    def h_range(self):
        return float(self.h(self.table_range[1])), float(self.h(self.table_range[0]))


def scale_profile(m: JumpModel, fit_range=(1e-3, 1.0), table_range=(1e-7, 1e4), per_decade=16) -> ScaleProfile:
    """Tabulate ``h`` and ``K`` and fit both scaling conditions."""
    lo, hi = table_range
    nr = int(round(np.log10(hi / lo) * per_decade)) + 1
    r = np.geomspace(lo, hi, nr)
    hk = np.array([_h_and_K(m, v) for v in r])
    h = LogLogTable(r, hk[:, 0])
    K = LogLogTable(r, hk[:, 1])
    lu = np.log(hk[::-1, 0])
    lr = np.log(r[::-1])
    inv = PchipInterpolator(lu, lr, extrapolate=False)
    h_inv = lambda u: np.exp(inv(np.log(np.asarray(u, dtype=float))))  # noqa: E731
    a, C = fit_scaling(h, True, fit_range)
    b, c = fit_scaling(h, False, fit_range)
    return ScaleProfile(m.dim, h, K, h_inv, a, C, b, c, tuple(fit_range), tuple(table_range))


def invert_h(sp: ScaleProfile, u):
    """``r`` with ``h(r) = u`` to relative accuracy 1e-8 or better (bracketed root find)."""
    u = float(u)
    lo, hi = sp.h_range
    if not lo <= u <= hi:
        raise OutOfRangeError(u, (lo, hi))
    lu = np.log(u)
    f = lambda s: float(np.log(sp.h(np.exp(s)))) - lu  # noqa: E731
    a, b = np.log(sp.table_range[0]), np.log(sp.table_range[1])
    if f(a) == 0:
        return float(sp.table_range[0])
    if f(b) == 0:
        return float(sp.table_range[1])
    return float(np.exp(brentq(f, a, b, xtol=1e-14, rtol=4 * np.finfo(float).eps)))


def scale_at_time(sp: ScaleProfile, t):
    """``h^-1(1/t)`` for scalar or array ``t`` (table interpolation)."""
    t = np.asarray(t, dtype=float)
    out = sp.h_inv(1.0 / t)
    if np.any(~np.isfinite(out)):
        raise OutOfRangeError(float(np.min(1 / t)), sp.h_range)
    return out


@dataclass(frozen=True, eq=False)
class BoundFunction:
    """``rho_t(x) = min([h^-1(1/t)]^-d, t K(|x|) / |x|^d)``."""

    profile: ScaleProfile
    dim: int = 1

    def _norm(self, x):
        x = np.asarray(x, dtype=float)
        return np.abs(x) if self.dim == 1 else np.linalg.norm(x, axis=-1)


def rho(bf: BoundFunction, t, x):
    """Bound function; broadcasts over ``t`` and ``x``."""
    t = np.asarray(t, dtype=float)
    r = bf._norm(x)
    s = scale_at_time(bf.profile, t)
    diag = s ** (-bf.dim)
    with np.errstate(divide="ignore", invalid="ignore"):
        off = np.where(r > 0, t * bf.profile.K(np.where(r > 0, r, 1.0)) / np.where(r > 0, r, 1.0) ** bf.dim, np.inf)
    out = np.minimum(diag, off)
    return out if out.ndim else float(out)


def rho_family(bf: BoundFunction, gamma, beta, t, x, per_time=False):
    """``[h^-1(1/t)]^gamma (|x|^beta ^ 1) rho_t(x)``.

    ``per_time=True`` adds a factor ``1/t``, the normalisation under which the
    family bounds the correction density ``q``.
    """
    s = scale_at_time(bf.profile, t)
    w = np.minimum(bf._norm(x) ** beta, 1.0)
    out = s**gamma * w * rho(bf, t, x)
    if per_time:
        out = out / np.asarray(t, dtype=float)
    return out if np.ndim(out) else float(out)


def frak_F2(bf: BoundFunction, t, x, y, z):
    """``rho_t(y-x-z) 1{|z| >= s} + (|z|/s ^ 1) rho_t(y-x)`` with ``s = h^-1(1/t)``."""
    x, y, z = (np.asarray(v, dtype=float) for v in (x, y, z))
    s = scale_at_time(bf.profile, t)
    zn = bf._norm(z)
    far = np.where(zn >= s, rho(bf, t, y - x - z), 0.0)
    out = far + np.minimum(zn / s, 1.0) * rho(bf, t, y - x)
    return out if np.ndim(out) else float(out)


def write_scale_table(sp: ScaleProfile, path, r, chash="none"):
    r = np.asarray(r, dtype=float)
    return write_csv(path, ["r", "h", "K"], zip(r, sp.h(r), sp.K(r)), chash)


def write_rho_table(bf: BoundFunction, path, t, x, chash="none"):
    rows = [(tt, abs(xx), rho(bf, tt, xx)) for tt in np.atleast_1d(t) for xx in np.atleast_1d(x)]
    return write_csv(path, ["t", "abs_x", "rho"], rows, chash)


__all__ = [
    "BoundFunction",
    "LogLogTable",
    "ScaleProfile",
    "compute_K",
    "compute_h",
    "fit_scaling",
    "frak_F2",
    "invert_h",
    "rho",
    "rho_family",
    "scale_at_time",
    "scale_profile",
    "write_rho_table",
    "write_scale_table",
]
