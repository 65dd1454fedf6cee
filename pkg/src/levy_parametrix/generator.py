"""Singular-integral evaluation of the Levy-type operator in its three forms (d = 1).

``compensated``  int (f(x+z) - f(x) - 1{|z|<1} z f'(x)) k(z) J(z) dz
``pure_jump``    int (f(x+z) - f(x)) k(z) J(z) dz
``symmetrized``  1/2 int (f(x+z) + f(x-z) - 2 f(x)) k(z) J(z) dz

with ``k(z) = kappa(x, z)``, ``kappa(w, z)`` (frozen) or
``kappa(w1, z) - kappa(w2, z)`` (difference).  On ``|z| < delta`` the
integrand is replaced by its Taylor polynomial; the rest is integrated on
Gauss-Legendre panels that are geometric near ``delta`` and uniform (width
``length_scale``) out to ``span``, plus an exact tail for the ``-f(x)`` term.
Beyond ``span`` the shifted values ``f(x + z)`` are taken as mean-zero
(decaying or oscillating ``f``) unless samples at ``span * (1, 2, 4, 8)`` are
affine in ``z``; then the affine continuation is integrated against the
exact tail moments of the weight, so constants and linear functions are
handled exactly.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import factorial
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from ._quadrature import composite_nodes, local_exponent, log_nodes, HalfLine
from .errors import DivergentIntegralError, FirstMomentDivergenceError
from .frozen import canonical_form
from .models import JumpModel


@dataclass(frozen=True)
class GeneratorSpec:
    """Quadrature settings.

    ``inner_radius`` is the Taylor radius ``delta``; ``span`` bounds the
    explicit outer quadrature (the ``f(x)`` part of the integrand is
    integrated to infinity in closed form).  ``hessian`` selects derivatives
    supplied with the test function (``callable``) or central differences
    (``finite_difference``).
    """

    form: str = "compensated"
    inner_radius: float = 0.02
    span: float = 200.0
    length_scale: float = 0.25
    n_gauss: int = 16
    hessian: str = "callable"
    fd_step: float = 1e-3

    def __post_init__(self):
        if not 0 < self.inner_radius <= 1:
            raise ValueError("inner radius must lie in (0, 1]")
        object.__setattr__(self, "form", canonical_form(self.form))
        if self.hessian not in ("callable", "finite_difference"):
            raise ValueError("hessian must be 'callable' or 'finite_difference'")


@dataclass(frozen=True)
class TestFunction:
    """``f`` with optional derivative callables ``derivs = (f', f'', ...)``.

    ``support`` marks an interval outside of which ``f`` vanishes.
    """

    f: Callable
    derivs: tuple = ()
    support: tuple | None = None

    def __call__(self, x):
        return self.f(x)


def as_test_function(f) -> TestFunction:
    return f if isinstance(f, TestFunction) else TestFunction(f)


def grid_function(x_grid, values, outside=None) -> TestFunction:
    """Cubic-spline extension of grid samples.

    Outside the grid the function is ``outside(u)`` if given, else zero.
    Derivatives are the second-order central differences on the grid's own
    spacing, so at grid points they only see the sampled values.
    """
    x = np.asarray(x_grid, dtype=float)
    v = np.asarray(values, dtype=float)
    dx = float(x[1] - x[0])
    sp = CubicSpline(x, v)
    lo, hi = float(x[0]), float(x[-1])

    def f(u):
        u = np.asarray(u, dtype=float)
        ext = 0.0 if outside is None else outside(u)
        return np.where((u >= lo) & (u <= hi), sp(np.clip(u, lo, hi)), ext)

    d1 = lambda u: (f(u + dx) - f(u - dx)) / (2 * dx)  # noqa: E731
    d2 = lambda u: (f(u + dx) - 2 * f(u) + f(u - dx)) / dx**2  # noqa: E731
    return TestFunction(f, (d1, d2), (lo, hi) if outside is None else None)


def _derivatives(tf: TestFunction, x, spec: GeneratorSpec, order):
    """``[f^(1)(x), ..., f^(order)(x)]``; missing ones by central differences."""
    out = []
    h = spec.fd_step
    f = tf.f
    fd = [
        lambda u: (f(u + h) - f(u - h)) / (2 * h),
        lambda u: (f(u + h) - 2 * f(u) + f(u - h)) / h**2,
        lambda u: (f(u + 2 * h) - 2 * f(u + h) + 2 * f(u - h) - f(u - 2 * h)) / (2 * h**3),
        lambda u: (f(u + 2 * h) - 4 * f(u + h) + 6 * f(u) - 4 * f(u - h) + f(u - 2 * h)) / h**4,
    ]
    for k in range(1, order + 1):
        if spec.hessian == "callable" and len(tf.derivs) >= k:
            out.append(np.asarray(tf.derivs[k - 1](x), dtype=float))
        elif k <= 2:
            out.append(np.asarray(fd[k - 1](x), dtype=float))
    return out


def _outer_edges(delta, span, length_scale, breaks):
    a = max(delta, length_scale)
    m = max(1, int(np.ceil(np.log2(a / delta))))
    geo = delta * (a / delta) ** (np.arange(m + 1) / m)
    uni = np.arange(a, span, length_scale)
    edges = np.unique(np.concatenate([geo, uni, [span], [b for b in breaks if delta < b < span]]))
    return edges


def _inner_moments(m: JumpModel, coef, xs, delta, sign, kmax):
    """``int_0^delta z^k c(x, sign z) J(sign z) dz`` for ``k = 0..kmax``; shape (kmax+1, len(xs))."""
    zlo = delta * 1e-6
    z, wt = log_nodes(zlo, delta, tuple(m.z_breaks))
    W = coef(xs[:, None], sign * z[None, :]) * m.J(sign * z)[None, :] * wt
    p = float(local_exponent(lambda r: m.J(sign * np.asarray(r)), zlo))
    edge = coef(xs, np.full(xs.shape, sign * zlo)) * float(m.J(np.array([sign * zlo]))[0])
    out = []
    zk = np.ones_like(z)
    for k in range(kmax + 1):
        body = W @ zk
        if np.any(edge != 0):
            if k + 1 - p <= 1e-9:
                rem = np.where(edge != 0, np.inf, 0.0)
            else:
                rem = zlo ** (k + 1) * edge / (k + 1 - p)
        else:
            rem = 0.0
        out.append(body + rem)
        zk = zk * z
    return np.array(out)


def _tail(m: JumpModel, coef, xs, a, sign):
    """``int_a^inf c(x, sign z) J(sign z) dz`` per ``x``."""
    return np.array([HalfLine(lambda z, x=x: coef(x, sign * np.asarray(z)) * m.J(sign * np.asarray(z))).upper(a) for x in xs])


def _affine_far(tf: TestFunction, xs, span, direction):
    """``(a, b, ok)`` with ``f(x + direction z) = a + b z`` for ``z >= span`` where ``ok``."""
    zs = span * np.array([1.0, 2.0, 4.0, 8.0])
    S = np.stack([np.asarray(tf.f(xs + direction * z), dtype=float) for z in zs], axis=-1)
    b = (S[:, 1] - S[:, 0]) / (zs[1] - zs[0])
    a = S[:, 0] - b * zs[0]
    resid = np.abs(S - (a[:, None] + b[:, None] * zs[None, :])).max(axis=1)
    ok = (resid <= 1e-9 * np.abs(S).max(axis=1)) & np.any(S != 0, axis=1)
    return a, b, ok


def _far_moment(m: JumpModel, coef, x, a, sign):
    """``int_a^inf z c(x, sign z) J(sign z) dz``."""
    try:
        return HalfLine(lambda z: coef(x, sign * np.asarray(z)) * m.J(sign * np.asarray(z))).upper(a, k=1)
    except DivergentIntegralError as e:
        raise DivergentIntegralError("test function grows linearly but the jump weight has no first moment at infinity") from e


def _far_part(m, coef, tf, xs, span, sign, tail, directions):
    """Mean over ``directions`` of ``int_span^inf f(x + d z) c(x, sign z) J(sign z) dz`` per ``x``.

    Uses the affine continuation where it applies; ``tail`` is the zeroth
    moment of the weight.  Linear parts are combined before the first
    moment is taken, so they may cancel even when that moment diverges.
    """
    a, b = np.zeros(len(xs)), np.zeros(len(xs))
    for d in directions:
        ad, bd, ok = _affine_far(tf, xs, span, d)
        a += np.where(ok, ad, 0.0) / len(directions)
        b += np.where(ok, bd, 0.0) / len(directions)
    out = a * tail
    for i in np.nonzero(np.abs(b) > 1e-12 * (np.abs(a) + 1.0))[0]:
        out[i] += b[i] * _far_moment(m, coef, xs[i], span, sign)
    return out


def _apply(m: JumpModel, spec: GeneratorSpec, f, x, coef, absolute=False):
    if m.dim != 1:
        raise NotImplementedError("the generator is implemented for d = 1")
    tf = as_test_function(f)
    xs = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
    form = spec.form
    delta = spec.inner_radius
    fx = np.asarray(tf.f(xs), dtype=float)
    ders = _derivatives(tf, xs, spec, 4)
    n_taylor = len(ders)

    # inner Taylor part
    total = np.zeros(xs.shape)
    for sign in (1, -1):
        mom = _inner_moments(m, coef, xs, delta, sign, n_taylor)
        for k in range(1, n_taylor + 1):
            if form == "compensated" and k == 1:
                continue  # cancelled by the compensator
            if form == "symmetrized" and k % 2:
                continue
            mk = mom[k]
            if form == "pure_jump" and k == 1 and np.any(~np.isfinite(mk)):
                raise FirstMomentDivergenceError("pure-jump form needs a finite small-jump first moment")
            term = ders[k - 1] * sign**k * mk / factorial(k)
            total += np.abs(term) if absolute else term

    # outer quadrature
    span = spec.span
    if tf.support is not None:
        span = min(span, tf.support[1] - tf.support[0] + delta)
    edges = _outer_edges(delta, span, spec.length_scale, (1.0,) + tuple(m.z_breaks))
    z, wt = composite_nodes(edges, spec.n_gauss)
    inside = z < 1
    for sign in (1, -1):
        zz = sign * z
        W = coef(xs[:, None], zz[None, :]) * m.J(zz)[None, :] * wt
        fp = tf.f(xs[:, None] + zz[None, :])
        if form == "symmetrized":
            g = 0.5 * (fp + tf.f(xs[:, None] - zz[None, :])) - fx[:, None]
        else:
            g = fp - fx[:, None]
            if form == "compensated":
                g = g - np.where(inside, zz, 0.0)[None, :] * ders[0][:, None]
        total += (np.abs(g) * np.abs(W)).sum(1) if absolute else (g * W).sum(1)
        tail = _tail(m, coef, xs, span, sign)
        far = _far_part(m, coef, tf, xs, span, sign, tail, (sign, -sign) if form == "symmetrized" else (sign,))
        total += np.abs(far) + np.abs(fx * tail) if absolute else far - fx * tail
    return total.reshape(np.shape(x)) if np.ndim(x) else float(total[0])


def apply_generator(m: JumpModel, spec: GeneratorSpec, f, x, freeze=None):
    """``L f(x)`` with coefficient ``kappa(x, .)`` or, if given, ``kappa(freeze, .)``."""
    if freeze is None:
        coef = m.kappa
    else:
        w = float(freeze)
        coef = lambda xx, z: m.kappa(np.full(np.broadcast(xx, z).shape, w), z)  # noqa: E731
    return _apply(m, spec, f, x, coef)


def generator_difference(m: JumpModel, spec: GeneratorSpec, f, x, w1, w2, absolute=False):
    """``(L^{K_w1} - L^{K_w2}) f(x)`` in one pass with coefficient ``kappa(w1, .) - kappa(w2, .)``.

    ``absolute=True`` integrates ``|integrand|`` with coefficient 1 instead,
    the majorant used for the pointwise Holder bound.
    """
    w1, w2 = float(w1), float(w2)
    if absolute:
        coef = lambda xx, z: np.ones(np.broadcast(xx, z).shape)  # noqa: E731
    else:
        coef = lambda xx, z: m.kappa(np.full(np.broadcast(xx, z).shape, w1), z) - m.kappa(  # noqa: E731
            np.full(np.broadcast(xx, z).shape, w2), z
        )
    return _apply(m, spec, f, x, coef, absolute)


__all__ = [
    "GeneratorSpec",
    "TestFunction",
    "apply_generator",
    "as_test_function",
    "generator_difference",
    "grid_function",
]
