"""Frozen-coefficient symbols and heat kernels (d = 1).

Conventions.  For ``K(z) = kappa(w, z)`` the characteristic exponent is

    psi(xi) = int (1 - exp(i xi z) + i xi z 1{|z|<1}) K(z) J(z) dz

(compensated form; the pure-jump form drops the compensator, the symmetrized
form keeps only ``1 - cos``).  The frozen kernel is ``p(t, x, y) = f_t(y - x)``
with

    f_t(u) = (1 / 2 pi) int exp(-i xi u) exp(-t psi(xi)) d xi,

so ``x -> p(t, x, y)`` differentiates into a factor ``+i xi``.  This is the
orientation under which jumps with ``z > 0`` move mass towards ``y > x``.

Each half-line piece of ``psi`` is tabulated once on a logarithmic frequency
grid and interpolated; see :class:`HalfLineTable`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.fft import irfft, next_fast_len
from scipy.interpolate import CubicSpline

from ._io import write_csv
from ._quadrature import HalfLine
from ._report import EstimateReport
from .errors import ResolutionExceededError
from .models import FORM_OF_CASE, JumpModel, Profile
from .scales import BoundFunction, rho, scale_at_time

FORMS = ("compensated", "pure_jump", "symmetrized")
CUTOFF = np.log(1e12)


def canonical_form(form: str) -> str:
    form = form.replace("-", "_")
    if form in FORM_OF_CASE:
        form = FORM_OF_CASE[form]
    if form not in FORMS:
        raise ValueError(f"unknown operator form {form!r}")
    return form


class HalfLineTable:
    """Interpolated ``C(xi)`` and ``S(xi)`` for one half-line weight.

    ``R(xi) = int (1 - cos xi z) |w|`` is splined in log-log coordinates;
    ``C`` and ``S`` are splined after division by ``D = xi + R``, which keeps
    both quotients bounded and smooth in ``log xi`` for every regime of the
    weight (power-law at 0 and infinity, tempered, signed).  Weights with
    discontinuities get extra uniformly spaced nodes that resolve the
    resulting oscillations in ``xi``.
    """

    def __init__(self, w, breaks=(), kind="compensated", xi_range=(1e-4, 1e5), per_decade=40):
        self.kind = kind
        lo, hi = xi_range
        xi = np.geomspace(lo, hi, int(round(np.log10(hi / lo) * per_decade)) + 1)
        if breaks:
            step = np.pi / (8 * max(breaks))
            xi = np.union1d(xi, np.arange(step, 400.0, step))
        hl = HalfLine(w, breaks)
        C, S = hl.transforms(xi, kind)
        probe = np.geomspace(1e-6, 1e6, 241)
        signed = bool(np.any(w(probe) < 0))
        if signed:
            R, _ = HalfLine(lambda z: np.abs(w(z)), breaks).transforms(xi, "symmetrized")
        else:
            R = C
        nz = R > 0
        self.empty = not nz.any()
        if self.empty:
            return
        xi, C, S, R = xi[nz], C[nz], S[nz], R[nz]
        self.lx = np.log(xi)
        self.lR = CubicSpline(self.lx, np.log(R))
        d = self.lR.derivative()
        self.slopes = (float(d(self.lx[0])), float(d(self.lx[-1])))
        D = xi + R
        self.c = CubicSpline(self.lx, C / D)
        self.s = CubicSpline(self.lx, S / D)

    def __call__(self, xi):
        """``(C, S)`` at ``xi >= 0``."""
        xi = np.asarray(xi, dtype=float)
        if self.empty:
            return np.zeros(xi.shape), np.zeros(xi.shape)
        pos = xi > 0
        with np.errstate(divide="ignore"):
            lx = np.log(np.where(pos, xi, 1.0))
        lo, hi = self.lx[0], self.lx[-1]
        cl = np.clip(lx, lo, hi)
        lR = self.lR(cl)
        lR = np.where(lx < lo, self.lR(lo) + self.slopes[0] * (lx - lo), lR)
        lR = np.where(lx > hi, self.lR(hi) + self.slopes[1] * (lx - hi), lR)
        D = xi + np.exp(lR)
        C = np.where(pos, self.c(cl) * D, 0.0)
        S = np.where(pos, self.s(cl) * D, 0.0) if self.kind != "symmetrized" else np.zeros(xi.shape)
        return C, S


@lru_cache(maxsize=64)
def _table(J, b: Profile, sign: int, kind: str, breaks: tuple):
    w = lambda z: b(sign * np.asarray(z, dtype=float)) * J(sign * np.asarray(z, dtype=float))  # noqa: E731
    return HalfLineTable(w, breaks, kind)


class SymbolBank:
    """Basis symbols ``Psi_b`` for each distinct z-profile ``b`` of a separable model.

    ``psi_w(xi) = sum_b A_b(w) Psi_b(xi)`` where ``A_b`` sums the x-profiles
    sharing ``b``.  Models without a decomposition get one table pair per
    freeze point instead.
    """

    def __init__(self, m: JumpModel, form="compensated"):
        if m.dim != 1:
            raise NotImplementedError("frozen symbols are implemented for d = 1")
        self.model = m
        self.form = canonical_form(form)
        self._kind = self.form
        if m.decomposition is not None:
            groups: dict = {}
            for a, b in m.decomposition:
                groups.setdefault(b, []).append(a)
            self.z_profiles = tuple(groups)
            self.x_profiles = tuple(tuple(v) for v in groups.values())
            self.tables = [self._tables_for(b) for b in self.z_profiles]
        else:
            self.z_profiles = None
            self._per_w = {}

    def _tables_for(self, b):
        brk = tuple(b.breaks)
        return _table(self.model.J, b, 1, self._kind, brk), _table(self.model.J, b, -1, self._kind, brk)

    @property
    def separable(self):
        return self.z_profiles is not None

    def _combine(self, tp, tm, xi):
        xi = np.asarray(xi, dtype=float)
        a = np.abs(xi)
        Cp, Sp = tp(a)
        Cm, Sm = tm(a)
        out = (Cp + Cm) + 1j * (Sm - Sp)
        return np.where(xi < 0, np.conj(out), out)

    def basis(self, xi):
        """``(n_b, len(xi))`` complex array of basis symbols."""
        return np.stack([self._combine(tp, tm, xi) for tp, tm in self.tables])

    def coefficients(self, w):
        """``(len(w), n_b)`` real array ``A_b(w)``."""
        w = np.atleast_1d(np.asarray(w, dtype=float))
        return np.stack([sum(a(w) for a in group) for group in self.x_profiles], axis=-1)

    def psi(self, w, xi):
        """Symbol frozen at scalar ``w``."""
        if self.separable:
            return self.coefficients([w])[0] @ self.basis(np.atleast_1d(xi)).reshape(len(self.tables), -1)
        key = float(w)
        if key not in self._per_w:
            m = self.model
            brk = tuple(m.z_breaks)
            wp = lambda z: m.kappa(key, z) * m.J(z)  # noqa: E731
            wm = lambda z: m.kappa(key, -z) * m.J(-z)  # noqa: E731
            self._per_w[key] = (HalfLineTable(wp, brk, self._kind), HalfLineTable(wm, brk, self._kind))
        return self._combine(*self._per_w[key], np.atleast_1d(xi))


@dataclass(frozen=True, eq=False)
class FrozenSymbol:
    """Characteristic exponent of the operator with coefficient ``kappa(w, .)``."""

    w: float
    form: str
    bank: SymbolBank = field(repr=False)

    def psi(self, xi):
        xi = np.asarray(xi, dtype=float)
        return self.bank.psi(self.w, xi.ravel()).reshape(xi.shape)


def build_symbol(m: JumpModel, w, form="compensated", bank: SymbolBank | None = None) -> FrozenSymbol:
    """Frozen symbol at ``w``; ``bank`` lets many freeze points share basis tables."""
    form = canonical_form(form)
    if bank is None or bank.form != form or bank.model is not m:
        bank = SymbolBank(m, form)
    return FrozenSymbol(float(w), form, bank)


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------


def _xi_grid(xi_cap=1e7):
    return np.geomspace(1e-2, xi_cap, 1201)


def xi_box(sym, t, deriv_order=0, xi_cap=1e7):
    """Smallest ``xi_max`` beyond which ``|xi|^k exp(-t Re psi) < 1e-12``."""
    grid = _xi_grid(xi_cap)
    decay = t * sym.psi(grid).real - deriv_order * np.log(np.maximum(grid, 1.0))
    ok = decay >= CUTOFF
    bad = np.nonzero(~ok)[0]
    if not len(bad):
        return float(grid[0])
    if bad[-1] == len(grid) - 1:
        return float("inf")
    return float(grid[bad[-1] + 1])


def _min_feasible_t(sym, deriv_order, xi_limit):
    """Smallest ``t`` whose :func:`xi_box` stays within ``xi_limit``."""
    grid = _xi_grid()
    g = grid[grid <= xi_limit]
    g = g[-1] if len(g) else grid[0]
    re = float(sym.psi(np.array([g])).real[0])
    return (CUTOFF + deriv_order * np.log(max(g, 1.0))) / max(re, 1e-300)


@dataclass(frozen=True)
class FFTSettings:
    """Frequency-box knobs.

    ``fft_size`` nodes span ``[-xi_max, xi_max]``; the implied period
    ``L = pi fft_size / xi_max`` must exceed ``min_period``.  With
    ``image_correction`` the periodic images ``f(u + kL)``, ``k != 0``, are
    subtracted using the far-field form ``f(v) ~ t kappa(w, v) J(v)``.
    """

    fft_size: int = 2**14
    min_period: float = 50.0
    image_correction: bool = True
    n_images: int = 64


def _far_field(sym, t, v, deriv_order):
    """``t d^k/dx^k [K J](y - x)`` at ``v = y - x`` (first-order jump term)."""
    m = sym.bank.model
    g = lambda z: t * m.kappa(sym.w, z) * m.J(z)  # noqa: E731
    if deriv_order == 0:
        return g(v)
    hstep = 1e-3 * np.abs(v)
    if deriv_order == 1:
        return -(g(v + hstep) - g(v - hstep)) / (2 * hstep)
    return (g(v + hstep) - 2 * g(v) + g(v - hstep)) / hstep**2


def image_sum(sym, t, u, L, deriv_order=0, n_images=64):
    """``sum_{k != 0} f(u + kL)`` with ``f`` replaced by its far field.

    For ``deriv_order = 0`` the images beyond ``n_images`` are added as an
    integral remainder.
    """
    u = np.asarray(u, dtype=float)
    k = np.arange(1, n_images + 1)[:, None]
    flat = u.ravel()[None, :]
    tot = (_far_field(sym, t, flat + k * L, deriv_order) + _far_field(sym, t, flat - k * L, deriv_order)).sum(0)
    if deriv_order == 0:
        m = sym.bank.model
        up = HalfLine(lambda z: t * m.kappa(sym.w, z) * m.J(z))
        dn = HalfLine(lambda z: t * m.kappa(sym.w, -z) * m.J(-z))
        edge = (n_images + 0.5) * L
        tot = tot + np.array([up.upper(edge + v) + dn.upper(edge - v) for v in flat[0]]) / L
    return tot.reshape(u.shape)


def _nodes(sym, t, deriv_order, fft: FFTSettings):
    xi_max = xi_box(sym, t, deriv_order)
    limit = np.pi * fft.fft_size / fft.min_period
    if not xi_max <= limit:
        raise ResolutionExceededError(t, _min_feasible_t(sym, deriv_order, limit))
    n = fft.fft_size // 2
    dxi = xi_max / n
    xi = dxi * np.arange(n + 1)
    G = np.exp(-t * sym.psi(xi)) * (1j * xi) ** deriv_order
    G[0] *= 0.5
    G[-1] *= 0.5
    return xi, G, dxi


def frozen_kernel(sym: FrozenSymbol, t, x, y, deriv_order=0, fft: FFTSettings | None = None):
    """``d^k/dx^k p(t, x, y)`` of the frozen kernel at arbitrary points.

    Trapezoid sum over the frequency box (the same nodes an FFT of size
    ``fft.fft_size`` would use), evaluated directly at ``u = y - x``.
    """
    fft = fft or FFTSettings()
    t = float(t)
    u = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
    xi, G, dxi = _nodes(sym, t, deriv_order, fft)
    flat = u.ravel()
    out = np.empty(flat.shape)
    step = max(1, 2**22 // len(xi))
    for i in range(0, len(flat), step):
        ph = np.exp(-1j * np.outer(flat[i : i + step], xi))
        out[i : i + step] = (ph @ G).real
    out *= dxi / np.pi
    if fft.image_correction:
        out -= image_sum(sym, t, flat, 2 * np.pi / dxi, deriv_order, fft.n_images)
    return out.reshape(u.shape) if u.ndim else float(out[0])


def kernel_on_grid(sym: FrozenSymbol, t, du, n, deriv_order=0, fft: FFTSettings | None = None):
    """Values at ``u = k du`` for ``k = -n..n`` by one inverse FFT.

    The transform runs on a grid ``du / m`` with ``m`` the smallest integer
    resolving the frequency box, then is decimated.
    """
    fft = fft or FFTSettings()
    xi_max = xi_box(sym, t, deriv_order)
    m = max(1, int(np.ceil(du * xi_max / np.pi)))
    h = du / m
    N = next_fast_len(max(fft.fft_size, 4 * (n + 1) * m))
    if N * h < max(fft.min_period, 2 * n * du):
        limit = np.pi * fft.fft_size / fft.min_period
        raise ResolutionExceededError(t, _min_feasible_t(sym, deriv_order, limit))
    xi = 2 * np.pi * np.arange(N // 2 + 1) / (N * h)
    G = np.exp(-t * sym.psi(xi)) * (1j * xi) ** deriv_order
    vals = irfft(np.conj(G), N) / h
    k = np.arange(-n, n + 1)
    out = vals[(k * m) % N]
    if fft.image_correction:
        out = out - image_sum(sym, t, k * du, N * h, deriv_order, fft.n_images)
    return k * du, out


def mass(sym: FrozenSymbol, t, fft: FFTSettings | None = None):
    """Total mass by the trapezoid rule over one full period of the FFT grid.

    Periodization folds the tails back into the period, so no separate tail
    estimate is needed.
    """
    fft = fft or FFTSettings()
    xi_max = xi_box(sym, t)
    N = fft.fft_size
    h = np.pi / xi_max
    xi = 2 * np.pi * np.arange(N // 2 + 1) / (N * h)
    vals = irfft(np.conj(np.exp(-t * sym.psi(xi))), N) / h
    return float(vals.sum() * h)


def mass_on_grid(sym: FrozenSymbol, t, y, x=0.0, tail=True):
    """Trapezoid mass over a finite ``y`` grid plus the first-order tail ``t int_{|u|>Y} K J``."""
    y = np.asarray(y, dtype=float)
    p = frozen_kernel(sym, t, x, y)
    total = float(np.trapezoid(p, y))
    if tail:
        m = sym.bank.model
        K = lambda z: m.kappa(sym.w, z) * m.J(z)  # noqa: E731
        total += t * (HalfLine(K).upper(y[-1] - x) + HalfLine(lambda z: K(-z)).upper(x - y[0]))
    return total


@dataclass(frozen=True)
class KernelField:
    """Sampled ``(t, x, y)`` field with ``values[i, j, k] = F(t_i, x_j, y_k)``."""

    t_grid: np.ndarray
    x_grid: np.ndarray
    y_grid: np.ndarray
    values: np.ndarray
    deriv_order: int = 0
    meta: str = "frozen"

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != (len(self.t_grid), len(self.x_grid), len(self.y_grid)):
            raise ValueError("values must have shape (len(t), len(x), len(y))")
        if not np.all(np.isfinite(v)):
            raise ValueError("kernel field contains non-finite values")
        if np.any(np.diff(self.t_grid) <= 0) or np.any(np.asarray(self.t_grid) <= 0):
            raise ValueError("t_grid must be increasing and positive")
        if self.deriv_order == 0 and self.meta == "frozen":
            if v.min() < -1e-9 * max(v.max(), 0.0):
                raise ValueError("frozen kernel field is negative beyond quadrature noise")

    def to_csv(self, path, chash="none"):
        rows = (
            (t, x, y, self.values[i, j, k])
            for i, t in enumerate(self.t_grid)
            for j, x in enumerate(self.x_grid)
            for k, y in enumerate(self.y_grid)
        )
        return write_csv(path, ["t", "x", "y", f"{self.meta}_d{self.deriv_order}"], rows, chash)


def frozen_field(sym: FrozenSymbol, t_grid, x_grid, y_grid, deriv_order=0, fft=None) -> KernelField:
    X, Y = np.meshgrid(x_grid, y_grid, indexing="ij")
    vals = np.stack([frozen_kernel(sym, t, X, Y, deriv_order, fft) for t in t_grid])
    return KernelField(np.asarray(t_grid, float), np.asarray(x_grid, float), np.asarray(y_grid, float), vals, deriv_order, "frozen")


# ---------------------------------------------------------------------------
# increment bounds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IncrementGrid:
    """Sample grid for increment checks: ``n`` points on ``[-half_width, half_width]``
    for both ``x`` and ``y``; ``refine`` doubles the point density."""

    t: tuple = (0.5, 1.0)
    half_width: float = 2.0
    n: int = 41
    gammas: tuple = (0.0, 0.5, 1.0)
    orders: tuple = (0, 1, 2)
    levels: int = 2

    def points(self, level):
        return np.linspace(-self.half_width, self.half_width, (self.n - 1) * 2**level + 1)


def increment_ratios(D, x, y, t, bf, gamma, order, form="holder"):
    """Max of ``|D(x') - D(x)| / rhs`` over pairs ``x != x'`` and all ``y``.

    ``D[i, k]`` holds the order-``order`` derivative at ``(x_i, y_k)``.
    ``form='holder'``: ``rhs = (|x - x'|^gamma ^ 1) s^(-gamma-order) (rho(y-x') + rho(y-x))``;
    ``form='F2'``: ``rhs = s^-order F2(t, x, y; x' - x)``, with ``s = h^-1(1/t)``.
    Returns ``(ratio, (x, x', y))``.
    """
    s = float(scale_at_time(bf.profile, t))
    R = rho(bf, t, y[None, :] - x[:, None])  # (nx, ny)
    best, wit = 0.0, ()
    for i in range(len(x)):
        dx = np.abs(x - x[i])
        num = np.abs(D - D[i])  # rows x', columns y
        if form == "holder":
            rhs = (np.minimum(dx**gamma, 1.0) * s ** (-gamma - order))[:, None] * (R + R[i])
        else:
            z = x - x[i]
            far = np.where(np.abs(z)[:, None] >= s, rho(bf, t, y[None, :] - x[i] - z[:, None]), 0.0)
            rhs = s**-order * (far + np.minimum(np.abs(z) / s, 1.0)[:, None] * R[i])
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(num > 0, num / rhs, 0.0)
        k = np.unravel_index(np.argmax(ratio), ratio.shape)
        if ratio[k] > best:
            best, wit = float(ratio[k]), (float(x[i]), float(x[k[0]]), float(y[k[1]]))
    return best, wit


def check_increment_bounds(sym: FrozenSymbol, bf: BoundFunction, grid: IncrementGrid | None = None, fft=None) -> EstimateReport:
    """Empirical constants of the frozen-kernel increment inequalities.

    One slice per ``(order, gamma, t)`` in the Holder form and one per
    ``(order, t)`` in the ``F2`` form, each measured at ``grid.levels``
    point densities.
    """
    g = grid or IncrementGrid()
    cache = {}

    def D(level, t, order):
        key = (level, t, order)
        if key not in cache:
            x = g.points(level)
            # the frozen kernel depends on y - x only: evaluate on the difference grid
            n = len(x)
            du = x[1] - x[0]
            vals = frozen_kernel(sym, t, 0.0, np.arange(-(n - 1), n) * du, order, fft)
            k = np.arange(n)
            cache[key] = vals[k[None, :] - k[:, None] + n - 1]
        return cache[key]

    slices = []
    for order in g.orders:
        for t in g.t:
            specs = [("holder", gm) for gm in g.gammas] + [("F2", None)]
            for form, gm in specs:
                series, wit = [], ()
                for level in range(g.levels):
                    x = g.points(level)
                    r, w = increment_ratios(D(level, t, order), x, x, t, bf, gm or 0.0, order, form)
                    series.append(r)
                    wit = w
                params = {"order": order, "t": t, "form": form}
                if gm is not None:
                    params["gamma"] = gm
                slices.append(EstimateReport("increment_bounds_frozen", params, tuple(series), wit))
    return EstimateReport.combine("increment_bounds_frozen", {"w": sym.w, "form": sym.form}, slices)


def kernel_bound_constant(sym: FrozenSymbol, bf: BoundFunction, t, u, fft=None):
    """``max p / rho`` and ``max rho / p`` over the sample ``u``."""
    p = frozen_kernel(sym, t, 0.0, u, 0, fft)
    r = rho(bf, t, u)
    return float(np.max(p / r)), float(np.max(r / np.maximum(p, 1e-300)))


__all__ = [
    "FFTSettings",
    "FORMS",
    "FrozenSymbol",
    "HalfLineTable",
    "IncrementGrid",
    "KernelField",
    "SymbolBank",
    "build_symbol",
    "canonical_form",
    "check_increment_bounds",
    "frozen_field",
    "frozen_kernel",
    "increment_ratios",
    "kernel_bound_constant",
    "kernel_on_grid",
    "mass",
    "mass_on_grid",
    "xi_box",
]
