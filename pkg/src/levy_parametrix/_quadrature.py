"""Quadrature primitives shared by the symbol, generator and criticality code.

Everything here works on a single half-line ``z > 0`` with a weight ``w(z)``
that may be singular like a power at the origin and heavy-tailed at infinity.
Power-law behaviour at both ends is handled by local exponent extrapolation,
which is exact for the stable and tempered families.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import DivergentIntegralError, FirstMomentDivergenceError

_FACT = np.array([1.0, 1.0, 2.0, 6.0, 24.0, 120.0, 720.0, 5040.0, 40320.0])


@lru_cache(maxsize=None)
def gauss_legendre(n: int):
    x, w = leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def composite_nodes(edges, n=16):
    """Composite Gauss-Legendre nodes and weights over consecutive ``edges``."""
    edges = np.asarray(edges, dtype=float)
    x, w = gauss_legendre(n)
    a = edges[:-1, None]
    b = edges[1:, None]
    half = 0.5 * (b - a)
    return (0.5 * (a + b) + half * x).ravel(), (half * w).ravel()


def log_nodes(lo, hi, breaks=(), n=16, per_unit=1.0):
    """Nodes/weights for ``int_lo^hi f(z) dz`` on panels uniform in ``log z``.

    ``breaks`` inside ``(lo, hi)`` become panel edges so that piecewise
    weights are integrated exactly.
    """
    ulo, uhi = np.log(lo), np.log(hi)
    m = max(1, int(np.ceil((uhi - ulo) * per_unit)))
    edges = np.linspace(ulo, uhi, m + 1)
    inner = [np.log(b) for b in breaks if lo < b < hi]
    if inner:
        edges = np.unique(np.concatenate([edges, inner]))
    u, wu = composite_nodes(edges, n)
    z = np.exp(u)
    return z, wu * z


def local_exponent(w, z, h=1e-3):
    """``p`` such that ``|w| ~ z**(-p)`` near ``z``; ``nan`` where ``w`` vanishes."""
    z = np.asarray(z, dtype=float)
    up = np.abs(w(z * np.exp(h)))
    dn = np.abs(w(z * np.exp(-h)))
    with np.errstate(divide="ignore", invalid="ignore"):
        p = -(np.log(up) - np.log(dn)) / (2 * h)
    return np.where((up > 0) & (dn > 0), p, np.nan)


class HalfLine:
    """Integrals of a weight ``w`` on ``(0, inf)``.

    Parameters
    ----------
    w : callable
        Vectorized, finite for ``z > 0``.
    breaks : sequence of float
        Points where ``w`` may be discontinuous.
    inner_scale : float
        Taylor/numeric split radius at unit frequency; the split radius
        for frequency ``xi`` is ``min(inner_scale, inner_scale / xi)``.
    """

    lower_decades = 6.0
    upper_limit = 1e6
    v_span = 200.0

    def __init__(self, w, breaks=(), inner_scale=0.1):
        self.w = w
        self.breaks = tuple(sorted(float(b) for b in breaks if b > 0))
        self.inner_scale = float(inner_scale)

    # -- non-oscillatory pieces -------------------------------------------
    def moments(self, delta, kmax=8):
        """``[int_0^delta z^k w dz for k in 0..kmax]``; divergent entries are ``inf``."""
        zlo = delta * 10.0 ** (-self.lower_decades)
        z, wt = log_nodes(zlo, delta, self.breaks)
        wz = self.w(z) * wt
        out = np.empty(kmax + 1)
        wl = float(self.w(np.array([zlo]))[0])
        p = float(local_exponent(self.w, zlo))
        zk = np.ones_like(z)
        for k in range(kmax + 1):
            body = float(np.sum(zk * wz))
            if wl == 0.0 or np.isnan(p):
                rem = 0.0
            elif k + 1 - p > 1e-9:
                rem = zlo ** (k + 1) * wl / (k + 1 - p)
            else:
                rem = np.inf
            out[k] = body + rem
            zk = zk * z
        return out

    def upper(self, a, b=np.inf, k=0):
        """``int_a^b z^k w dz`` with a power-law tail beyond ``upper_limit``."""
        if b <= a:
            return 0.0
        top = min(b, max(self.upper_limit, 10 * a))
        z, wt = log_nodes(a, top, self.breaks)
        val = float(np.sum(z**k * self.w(z) * wt))
        if np.isinf(b):
            wl = float(self.w(np.array([top]))[0])
            if wl != 0.0:
                p = float(local_exponent(self.w, top))
                if np.isnan(p) or p - k - 1 <= 1e-9:
                    raise DivergentIntegralError("weight is not integrable at infinity")
                val += top ** (k + 1) * wl / (p - k - 1)
        return val

    # -- oscillatory piece ------------------------------------------------
    def _osc_segment(self, xi, a, b):
        va = xi * a
        vb = xi * b
        edges_geo = []
        start = va
        if va < 1.0:
            top = min(1.0, vb)
            m = max(1, int(np.ceil(np.log2(top / va))))
            edges_geo = va * (top / va) ** (np.arange(m + 1) / m)
            start = top
        vals = 0.0 + 0.0j
        g = lambda v: self.w(v / xi) / xi  # noqa: E731
        if len(edges_geo):
            v, wt = composite_nodes(edges_geo, 16)
            vals += np.sum(np.exp(1j * v) * g(v) * wt)
        if start < vb:
            vend = vb if np.isfinite(vb) else start + self.v_span
            m = max(1, int(np.ceil((vend - start) / (np.pi / 2))))
            v, wt = composite_nodes(np.linspace(start, vend, m + 1), 8)
            vals += np.sum(np.exp(1j * v) * g(v) * wt)
            if not np.isfinite(vb):
                hstep = 1e-3 * vend
                gv = float(g(np.array([vend]))[0])
                gp = float((g(np.array([vend + hstep])) - g(np.array([vend - hstep])))[0]) / (2 * hstep)
                vals += np.exp(1j * vend) * (1j * gv - gp)
        return vals

    def fourier(self, xi, a):
        """``int_a^inf exp(i xi z) w(z) dz`` for scalar ``xi > 0``."""
        cuts = [a] + [c for c in self.breaks if c > a] + [np.inf]
        return sum(self._osc_segment(xi, lo, hi) for lo, hi in zip(cuts[:-1], cuts[1:]))

    # -- symbol pieces ----------------------------------------------------
    def transforms(self, xi, kind="compensated"):
        """Half-line symbol pieces on an array of frequencies ``xi >= 0``.

        Returns ``(C, S)`` with ``C = int (1 - cos xi z) w`` and
        ``S = int (sin xi z - xi z 1_{z<1}) w`` for ``kind='compensated'``,
        ``S = int sin(xi z) w`` for ``kind='pure_jump'``; ``S`` is zero for
        ``kind='symmetrized'``.
        """
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        C = np.zeros(xi.shape)
        S = np.zeros(xi.shape)
        for i, x in enumerate(xi):
            if x == 0.0:
                continue
            if x < 0:
                raise ValueError("transforms expects non-negative frequencies")
            delta = min(self.inner_scale, self.inner_scale / x)
            mu = self.moments(delta)
            if not np.isfinite(mu[2]):
                raise DivergentIntegralError("second moment of the jump weight diverges at 0")
            tail = self.upper(delta)
            F = self.fourier(x, delta)
            # 1 - cos a = a^2/2 - a^4/24 + a^6/720 - a^8/40320
            c_in = sum((-1) ** (j + 1) * x ** (2 * j) * mu[2 * j] / _FACT[2 * j] for j in (1, 2, 3, 4))
            C[i] = c_in + tail - F.real
            if kind == "symmetrized":
                continue
            # sin a - a = -a^3/6 + a^5/120 - a^7/5040
            s_in = sum((-1) ** j * x ** (2 * j + 1) * mu[2 * j + 1] / _FACT[2 * j + 1] for j in (1, 2, 3))
            if kind == "compensated":
                S[i] = s_in + F.imag - x * self.upper(delta, 1.0, k=1)
            elif kind == "pure_jump":
                if not np.isfinite(mu[1]):
                    raise FirstMomentDivergenceError(
                        "pure-jump form needs int_{|z|<1} |z| J(z) dz < inf"
                    )
                S[i] = x * mu[1] + s_in + F.imag
            else:
                raise ValueError(f"unknown operator form {kind!r}")
        return C, S
