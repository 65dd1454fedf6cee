"""Levi parametrix on a uniform grid (d = 1).

Space.  Points ``x_k = -X + k dx`` (``k < N``, ``N`` odd so that 0 is a node).
Kernels of the form ``x, z -> F^{-1}[G_z](z - x)`` are evaluated for all
freeze points at once by a real inverse FFT of length ``N_fft >= 2N - 1``
on the frequency band ``xi_m = 2 pi m / (N_fft dx)``, so differences
``z - x`` never wrap around.  With the separable decomposition
``psi_w = sum_b A_b(w) Psi_b`` the generator-difference kernel reads

    q0-type kernel[x, z] = sum_b (A_b(z) - A_b(x)) F^{-1}[Psi_b G_z](z - x),

which vanishes identically when the coefficient does not depend on x.
The periodic images of both kernel types (period ``N_fft dx``) are removed
with their far fields: ``F^{-1}[Psi_b g(psi)](u) ~ -g(0) j_b(u)`` and
``F^{-1}[g(psi)](u) ~ -g'(0) sum_b A_b j_b(u)`` where ``j_b`` is the jump
density of basis ``b``.

Time.  ``q(s, ., y)`` is approximated by its averages ``Q_k`` over panels
``[a_k, b_k]`` graded towards ``s = 0``.  All time integrals of
``exp(-s psi)`` are done exactly, which gives the discrete Volterra system

    Q_k = A_k + sum_{j<k} B_kj Q_j dz + B_kk Q_k dz,

    A_k  ~ (psi_y - psi_x) exp(-a_k psi_y) phi1(D_k psi_y)
    B_kj ~ (psi_z - psi_x) exp(-(a_k - b_j) psi_z) D_j phi1(D_j psi_z) phi1(D_k psi_z)
    B_kk ~ (psi_z - psi_x) D_k phi2(D_k psi_z)

with ``phi1(z) = (1 - e^-z) / z`` and ``phi2(z) = (1 - phi1(z)) / z``.
Picard iterates are advanced layer by layer in time, all of them in a
single sweep.  Only the requested columns ``y`` are solved for: the
equation is linear and column-wise independent.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.fft import irfft, next_fast_len

from ._io import write_csv
from ._quadrature import HalfLine
from .errors import PicardDivergenceError, ResolutionExceededError
from .frozen import CUTOFF, FFTSettings, KernelField, SymbolBank, _min_feasible_t, _nodes, build_symbol, canonical_form
from .models import JumpModel


def phi1(z):
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-8
    zs = np.where(small, 1.0, z)
    return np.where(small, 1 - z / 2, -np.expm1(-zs) / zs)


def phi2(z):
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-2
    zs = np.where(small, 1.0, z)
    series = 0.5 - z / 6 + z**2 / 24 - z**3 / 120 + z**4 / 720
    return np.where(small, series, (1 - phi1(zs)) / zs)


def odd_fast_len(n):
    n = int(n) | 1
    while next_fast_len(n) != n:
        n += 2
    return n


def time_grid(t_max, n, grading=2.0, anchor=None):
    """Panel edges on ``[0, t_max]``.

    Without ``anchor``: ``s_i = t_max (i/n)^grading``.  With ``anchor``:
    uniform panels of width ``t_max/n`` with one panel centred on ``anchor``,
    and graded panels on ``[0, anchor - width/2]``.
    """
    if grading < 1:
        raise ValueError("grading exponent must be >= 1")
    if anchor is None:
        return t_max * (np.arange(n + 1) / n) ** grading
    h = t_max / n
    a0 = anchor - h / 2
    if a0 <= 0 or anchor + h / 2 > t_max + 1e-12:
        raise ValueError("anchor panel must fit inside (0, t_max]")
    n0 = max(1, int(np.ceil(a0 / h)))
    low = a0 * (np.arange(n0 + 1) / n0) ** grading
    n_up = max(1, int(round((t_max - anchor - h / 2) / h)))
    up = np.linspace(anchor + h / 2, t_max, n_up + 1) if t_max - anchor - h / 2 > 1e-12 else np.array([anchor + h / 2])
    return np.concatenate([low, up])


@dataclass(frozen=True)
class ParametrixConfig:
    """Grids and iteration count.

    ``n_time`` panels on ``[0, t_max]`` graded towards ``s = 0`` with
    exponent ``grading`` (optionally with a panel centred on ``t_anchor``);
    ``n_space`` points on ``[-half_width, half_width]``; ``y_eval`` lists
    the columns ``y`` to solve for (snapped to the grid, ``None`` for all).
    """

    n_picard: int = 6
    n_time: int = 16
    grading: float = 2.0
    t_max: float = 0.5
    t_anchor: float | None = None
    half_width: float = 8.0
    n_space: int = 201
    y_eval: tuple | None = (0.0,)
    fft: FFTSettings = field(default_factory=FFTSettings)

    def __post_init__(self):
        if self.n_picard < 0:
            raise ValueError("n_picard must be >= 0")
        if self.grading <= 1:
            raise ValueError("grading exponent must be > 1")
        if self.n_space % 2 == 0:
            raise ValueError("n_space must be odd")

    def refined(self, factor=2):
        return replace(self, n_time=self.n_time * factor, n_space=(self.n_space - 1) * factor + 1)

    @property
    def x_grid(self):
        return np.linspace(-self.half_width, self.half_width, self.n_space)

    @property
    def dx(self):
        return 2 * self.half_width / (self.n_space - 1)


@dataclass(frozen=True)
class QField:
    """Panel averages of ``q`` (``field.t_grid`` are panel midpoints) and Picard deltas."""

    field: KernelField
    deltas: tuple
    edges: np.ndarray
    iterates: np.ndarray = field(repr=False, default=None)  # (n+1, K, N, n_y)


class Parametrix:
    """Discrete parametrix for a separable model.

    Parameters
    ----------
    model : JumpModel
        Must carry a separable coefficient decomposition.
    config : ParametrixConfig
    form : str
        Operator form (``compensated``, ``pure_jump``, ``symmetrized``) or a case tag.
    """

    def __init__(self, model: JumpModel, config: ParametrixConfig | None = None, form="compensated"):
        if model.dim != 1:
            raise NotImplementedError("the parametrix is implemented for d = 1")
        if model.decomposition is None:
            raise NotImplementedError("the parametrix needs a separable coefficient decomposition")
        self.model = model
        self.cfg = cfg = config or ParametrixConfig()
        self.form = canonical_form(form)
        self.bank = SymbolBank(model, self.form)
        self.x = cfg.x_grid
        self.dx = cfg.dx
        self.N = len(self.x)
        self.n_fft = odd_fast_len(2 * self.N)
        self.xi = 2 * np.pi * np.arange(self.n_fft // 2 + 1) / (self.n_fft * self.dx)
        self.Psi = self.bank.basis(self.xi)  # (n_b, M)
        self.A = self.bank.coefficients(self.x)  # (N, n_b)
        self.psi = self.A @ self.Psi  # (N, M): psi frozen at each grid point
        if cfg.y_eval is None:
            self.cols = np.arange(self.N)
        else:
            self.cols = np.array(sorted({int(np.argmin(np.abs(self.x - y))) for y in cfg.y_eval}))
        self.y = self.x[self.cols]
        self.edges = time_grid(cfg.t_max, cfg.n_time, cfg.grading, cfg.t_anchor)
        self._q = None
        self._syms = {}
        self._img = {}

    def _images(self, deriv_order=0, shift=0.0):
        """``(n_b, 2N - 1)`` image sums of ``d^k/dx^k j_b(z - x)`` at ``z - x = k dx - shift``, ``|k| < N``."""
        key = (deriv_order, float(shift))
        if key in self._img:
            return self._img[key]
        fft = self.cfg.fft
        L = self.n_fft * self.dx
        u = np.arange(-(self.N - 1), self.N) * self.dx - shift
        out = np.zeros((len(self.bank.z_profiles), len(u)))
        if fft.image_correction:
            J = self.model.J
            shifts = np.arange(1, fft.n_images + 1)[:, None] * L
            for b, zb in enumerate(self.bank.z_profiles):
                g = lambda v, zb=zb: zb(v) * J(v)  # noqa: E731

                def d(v, g=g):
                    if deriv_order == 0:
                        return g(v)
                    hs = 1e-3 * np.abs(v)
                    if deriv_order == 1:  # d/dx = -d/du
                        return -(g(v + hs) - g(v - hs)) / (2 * hs)
                    return (g(v + hs) - 2 * g(v) + g(v - hs)) / hs**2

                out[b] = (d(u[None, :] + shifts) + d(u[None, :] - shifts)).sum(0)
                if deriv_order == 0:
                    edge = (fft.n_images + 0.5) * L
                    up = HalfLine(lambda z, zb=zb: zb(z) * J(z)).upper(edge)
                    dn = HalfLine(lambda z, zb=zb: zb(-z) * J(-z)).upper(edge)
                    out[b] += (up + dn) / L
        self._img[key] = out
        return out

    def _image_at(self, deriv_order, cols, shift=0.0):
        """Image sums at ``z_c - x - shift`` for all grid ``x``; shape ``(n_b, N, len(cols))``."""
        idx = cols[None, :] - np.arange(self.N)[:, None] + self.N - 1
        return self._images(deriv_order, shift)[:, idx]

    # -- kernels ----------------------------------------------------------
    def _gather(self, vals, cols):
        idx = (cols[None, :] - np.arange(self.N)[:, None]) % self.n_fft
        return vals[np.arange(len(cols))[None, :], idx]

    def _ift(self, G):
        """Grid values of ``F^{-1}[G]`` along the last axis."""
        return irfft(np.conj(G), self.n_fft, axis=-1) / self.dx

    def difference_kernel(self, E, cols):
        """``K[x, c] = sum_b (A_b(z_c) - A_b(x)) F^{-1}[Psi_b E_c](z_c - x)``; ``E`` is ``(len(cols), M)``."""
        out = np.zeros((self.N, len(cols)))
        img = self._image_at(0, cols)
        g0 = E[:, 0].real[None, :]
        for b in range(self.Psi.shape[0]):
            dA = self.A[cols, b][None, :] - self.A[:, b][:, None]
            if not np.any(dA):
                continue
            out += dA * (self._gather(self._ift(self.Psi[b][None, :] * E), cols) + g0 * img[b])
        return out

    def plain_kernel(self, E, cols, deriv_order=0, slope=0.0, shift=0.0):
        """``K[x, c] = d^k/dx^k F^{-1}[E_c](z_c - x - shift)``.

        ``slope`` is ``g'(0)`` when ``E = g(psi)``; it sets the far field used
        for the image correction.  A nonzero ``shift`` evaluates off the grid
        through the phase factor ``exp(i xi shift)``.
        """
        G = (1j * self.xi) ** deriv_order * E
        if shift:
            G = G * np.exp(1j * self.xi * shift)
        out = self._gather(self._ift(G), cols)
        if slope:
            img = self._image_at(deriv_order, cols, shift)
            out = out + slope * np.einsum("cb,bxc->xc", self.A[cols], img)
        return out

    # -- q0 ---------------------------------------------------------------
    def q0_grid(self, t, cols=None):
        """``q0(t, x, y)`` for all grid ``x`` and columns ``y``."""
        cols = self.cols if cols is None else np.asarray(cols)
        return self.difference_kernel(np.exp(-t * self.psi[cols]), cols)

    # -- Picard -----------------------------------------------------------
    def picard_solve(self) -> QField:
        cfg = self.cfg
        e = self.edges
        a, b = e[:-1], e[1:]
        D = b - a
        K = len(D)
        n = cfg.n_picard
        allc = np.arange(self.N)
        psiy = self.psi[self.cols]
        Q = np.zeros((n + 1, K, self.N, len(self.cols)))
        for k in range(K):
            Ak = self.difference_kernel(np.exp(-a[k] * psiy) * phi1(D[k] * psiy), self.cols)
            Q[:, k] = Ak
            if n == 0:
                continue
            acc = np.zeros((n, self.N, len(self.cols)))
            f1k = phi1(D[k] * self.psi)
            for j in range(k):
                E = np.exp(-(a[k] - b[j]) * self.psi) * (D[j] * phi1(D[j] * self.psi)) * f1k
                Bkj = self.difference_kernel(E, allc)
                acc += np.matmul(Bkj, Q[:n, j])
            Bkk = self.difference_kernel(D[k] * phi2(D[k] * self.psi), allc)
            for it in range(1, n + 1):
                Q[it, k] = Ak + self.dx * (acc[it - 1] + Bkk @ Q[it - 1, k])
        deltas = tuple(float(np.max(np.abs(Q[i] - Q[i - 1]))) for i in range(1, n + 1))
        _check_divergence(deltas)
        mids = 0.5 * (a + b)
        fld = KernelField(mids, self.x, self.y, Q[n], 0, "q")
        self._q = QField(fld, deltas, e, Q)
        return self._q

    @property
    def q(self) -> QField:
        return self._q if self._q is not None else self.picard_solve()

    # -- time factors -----------------------------------------------------
    def _panel_factors(self, t):
        """``[(j, F_j, g_j'(0))]`` with ``F_j = int_{panel j, s<t} exp(-(t-s) psi_z) ds`` for all grid ``z``."""
        out = []
        for j, (aj, bj) in enumerate(zip(self.edges[:-1], self.edges[1:])):
            if aj >= t:
                break
            top = min(bj, t)
            w = top - aj
            slope = -((t - aj) ** 2 - (t - top) ** 2) / 2
            out.append((j, np.exp(-(t - top) * self.psi) * (w * phi1(w * self.psi)), slope))
        return out

    def phi(self, t, deriv_order=0, iterate=None, shift=0.0):
        """``d^k/dx^k phi_y(t, x + shift)`` for grid ``x``; shape ``(N, len(y))``."""
        if t > self.edges[-1] + 1e-12:
            raise ValueError(f"t={t} beyond the solved horizon {self.edges[-1]}")
        Q = self.q.iterates[self.cfg.n_picard if iterate is None else iterate]
        allc = np.arange(self.N)
        out = np.zeros((self.N, len(self.cols)))
        for j, F, slope in self._panel_factors(t):
            out += self.plain_kernel(F, allc, deriv_order, slope, shift) @ Q[j] * self.dx
        return out

    def q_at(self, t):
        """Nystrom extension ``q(t) = q0(t) + sum_j F^{-1}[(psi_z - psi_x) F_j] Q_j dz``."""
        Q = self.q.iterates[self.cfg.n_picard]
        allc = np.arange(self.N)
        out = self.q0_grid(t)
        for j, F, _ in self._panel_factors(t):
            out = out + self.difference_kernel(F, allc) @ Q[j] * self.dx
        return out

    def frozen_batch(self, t, freeze_idx, deriv_order=0, shift=0.0):
        """Frozen kernels for freeze points ``x[freeze_idx]`` at ``u = k dx - shift``, ``|k| < N``.

        One batched inverse FFT on a grid ``dx / m`` fine enough for the
        frequency box of every freeze point, then the periodic images are
        subtracted with the far-field form ``t kappa(w, u) J(u)``.
        Returns an array of shape ``(len(freeze_idx), 2N - 1)``.
        """
        fft = self.cfg.fft
        freeze_idx = np.asarray(freeze_idx)
        probe = np.geomspace(1e-2, 1e7, 1201)
        Ap = self.A[freeze_idx]
        decay = t * (Ap @ self.bank.basis(probe)).real - deriv_order * np.log(np.maximum(probe, 1.0))
        bad = np.nonzero(np.any(decay < CUTOFF, axis=0))[0]
        xi_max = probe[min(bad[-1] + 1, len(probe) - 1)] if len(bad) else probe[0]
        m = max(1, int(np.ceil(self.dx * xi_max / np.pi)))
        h = self.dx / m
        n = self.N - 1
        Nf = next_fast_len(max(fft.fft_size, 4 * (n + 1) * m))
        if Nf * h < max(fft.min_period, 2 * n * self.dx) or Nf > 8 * fft.fft_size:
            sym = build_symbol(self.model, self.x[freeze_idx[0]], self.form, self.bank)
            limit = np.pi * fft.fft_size / fft.min_period
            raise ResolutionExceededError(t, _min_feasible_t(sym, deriv_order, limit))
        xi = 2 * np.pi * np.arange(Nf // 2 + 1) / (Nf * h)
        G = np.exp(-t * (Ap @ self.bank.basis(xi))) * (1j * xi) ** deriv_order
        if shift:
            G = G * np.exp(1j * xi * shift)
        k = np.arange(-n, n + 1)
        vals = (irfft(np.conj(G), Nf, axis=1) / h)[:, (k * m) % Nf]
        if fft.image_correction:
            L = Nf * h
            u = k * self.dx - shift
            w = self.x[freeze_idx][:, None, None]
            imgs = np.arange(1, fft.n_images + 1)[None, :, None] * L
            kap, J = self.model.kappa, self.model.J

            def far(v):
                g = lambda z: t * kap(np.broadcast_to(w, np.broadcast(w, z).shape), z) * J(z)  # noqa: E731
                if deriv_order == 0:
                    return g(v)
                hs = 1e-3 * np.abs(v)
                if deriv_order == 1:
                    return -(g(v + hs) - g(v - hs)) / (2 * hs)
                return (g(v + hs) - 2 * g(v) + g(v - hs)) / hs**2

            corr = (far(u[None, None, :] + imgs) + far(u[None, None, :] - imgs)).sum(1)
            if deriv_order == 0:
                edge = (fft.n_images + 0.5) * L
                for r, wi in enumerate(self.x[freeze_idx]):
                    up = HalfLine(lambda z: t * kap(wi, z) * J(z)).upper(edge)
                    dn = HalfLine(lambda z: t * kap(wi, -z) * J(-z)).upper(edge)
                    corr[r] += (up + dn) / L
            vals = vals - corr
        return vals

    def frozen_part(self, t, deriv_order=0, shift=0.0):
        """``d^k/dx^k p^{K_y}(t, x + shift, y)`` at full accuracy; shape ``(N, len(y))``."""
        vals = self.frozen_batch(t, self.cols, deriv_order, shift)
        idx = self.cols[None, :] - np.arange(self.N)[:, None] + self.N - 1
        return vals[np.arange(len(self.cols))[None, :], idx]

    def off_grid_mass(self, t, x_idx):
        """Mass of ``p^{K_x}(t, x, .)`` outside the grid, for each ``x = x[x_idx]``.

        Serves as the tail estimate of ``p^kappa(t, x, .)`` beyond the grid:
        far from ``x`` both kernels are governed by the jump intensity at ``x``.
        """
        x_idx = np.atleast_1d(x_idx)
        vals = self.frozen_batch(t, x_idx)
        idx = np.arange(self.N)[None, :] - x_idx[:, None] + self.N - 1
        rows = vals[np.arange(len(x_idx))[:, None], idx]
        return 1.0 - np.trapezoid(rows, dx=self.dx, axis=1)

    def mass(self, t, x_idx=None):
        """``int p^kappa(t, x, y) dy``: trapezoid over the grid plus :meth:`off_grid_mass`.

        Needs every grid column (``y_eval=None``).
        """
        if len(self.cols) != self.N:
            raise ValueError("mass needs all grid columns (y_eval=None)")
        x_idx = np.arange(self.N) if x_idx is None else np.atleast_1d(x_idx)
        P = self.heat_kernel(t)[x_idx]
        return np.trapezoid(P, dx=self.dx, axis=1) + self.off_grid_mass(t, x_idx)

    def heat_kernel(self, t, deriv_order=0, shift=0.0):
        """``d^k/dx^k p^kappa(t, x + shift, y) = p^{K_y} + phi_y`` for grid ``x``; shape ``(N, len(y))``."""
        return self.frozen_part(t, deriv_order, shift) + self.phi(t, deriv_order, shift=shift)

    def heat_kernel_field(self, t_grid, deriv_order=0, x_index=None) -> KernelField:
        xi = slice(None) if x_index is None else np.asarray(x_index)
        vals = np.stack([self.heat_kernel(t, deriv_order)[xi] for t in t_grid])
        return KernelField(np.asarray(t_grid, float), self.x[xi], self.y, vals, deriv_order, "p_kappa")

    # -- cache ------------------------------------------------------------
    def save_q(self, path):
        """Store the Picard iterates (``.npz``) for :meth:`load_q`."""
        q = self.q
        np.savez(path, iterates=q.iterates, deltas=np.array(q.deltas), edges=q.edges, x=self.x, y=self.y)

    def load_q(self, path) -> QField:
        """Restore iterates saved by :meth:`save_q` for the same grids."""
        with np.load(path) as d:
            same = all(np.array_equal(d[k], v) for k, v in (("edges", self.edges), ("x", self.x), ("y", self.y)))
            if not same or d["iterates"].shape[0] != self.cfg.n_picard + 1:
                raise ValueError("cached iterates do not match this configuration")
            Q = d["iterates"]
            deltas = tuple(float(v) for v in d["deltas"])
        mids = 0.5 * (self.edges[:-1] + self.edges[1:])
        self._q = QField(KernelField(mids, self.x, self.y, Q[-1], 0, "q"), deltas, self.edges, Q)
        return self._q

    # -- output -----------------------------------------------------------
    def write_deltas(self, path, chash="none"):
        rows = [(i + 1, d) for i, d in enumerate(self.q.deltas)]
        return write_csv(path, ["iteration", "sup_delta"], rows, chash)


def _check_divergence(deltas, run=3):
    up = 0
    for prev, cur in zip(deltas, deltas[1:]):
        up = up + 1 if cur > prev else 0
        if up >= run:
            raise PicardDivergenceError(deltas)


def picard_solve(model: JumpModel, cfg: ParametrixConfig, form="compensated") -> QField:
    """Solve ``q = q0 + q0 * q`` by ``cfg.n_picard`` Picard steps."""
    return Parametrix(model, cfg, form).picard_solve()


def q0(model: JumpModel, t, x, y, form="compensated", fft: FFTSettings | None = None):
    """``q0(t, x, y) = (L^{K_x} - L^{K_y}) p^{K_y}(t, ., y)(x)`` by Fourier inversion.

    Uses ``F^{-1}[(psi_y - psi_x) exp(-t psi_y)](y - x)`` on the frequency
    nodes of the frozen kernel; exactly zero when ``x = y`` or when
    ``kappa`` does not depend on ``x``.
    """
    if model.decomposition is None:
        raise NotImplementedError("q0 needs a separable coefficient decomposition")
    bank = SymbolBank(model, form)
    fft = fft or FFTSettings()
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    x, y = np.broadcast_arrays(x, y)
    out = np.zeros(x.shape)
    for yv in np.unique(y):
        sel = y == yv
        sym = build_symbol(model, yv, form, bank)
        xi, G, dxi = _nodes(sym, float(t), 0, replace(fft, image_correction=False))
        Psi = bank.basis(xi)
        dA = bank.coefficients([yv])[0][None, :] - bank.coefficients(x[sel])  # (n, n_b)
        if not np.any(dA):
            continue
        ph = np.exp(-1j * np.outer(yv - x[sel], xi))
        vals = ((ph * G[None, :]) @ Psi.T).real  # (n, n_b)
        out[sel] = (dA * vals).sum(1) * dxi / np.pi
    return out if out.size > 1 else float(out[0])


def dump_slice(pm: Parametrix, t, path, chash="none", deriv_order=0):
    """CSV of ``p^kappa(t, x, y)`` for all grid ``x`` and the solved columns ``y``."""
    P = pm.heat_kernel(t, deriv_order)
    rows = ((t, x, y, P[i, c]) for c, y in enumerate(pm.y) for i, x in enumerate(pm.x))
    return write_csv(path, ["t", "x", "y", f"p_kappa_d{deriv_order}"], rows, chash)


def warn_second_order(alpha_h, beta):
    if alpha_h + min(beta, alpha_h) <= 2:
        warnings.warn("second derivative requested outside alpha_h + beta ^ alpha_h > 2", stacklevel=2)


__all__ = [
    "Parametrix",
    "ParametrixConfig",
    "QField",
    "dump_slice",
    "phi1",
    "phi2",
    "picard_solve",
    "q0",
    "time_grid",
]
