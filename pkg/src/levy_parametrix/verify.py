"""Empirical estimate checks for the parametrix heat kernel and a Monte Carlo oracle.

A bound ``|lhs| <= c rhs`` is checked by the largest ratio ``lhs / rhs`` over
configured grids.  Each check runs at two grid densities (the parametrix grid
and the sample grid are refined together), and the verdict compares the two
maxima.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._io import write_csv
from ._quadrature import HalfLine
from ._report import EstimateReport, verdict_of
from .errors import FirstMomentDivergenceError, HypothesisNotSatisfiedError, SchemeRejectedError
from .frozen import canonical_form
from .generator import GeneratorSpec, apply_generator, grid_function
from .models import JumpModel
from .parametrix import Parametrix, ParametrixConfig
from .scales import BoundFunction, ScaleProfile, invert_h, rho, rho_family, scale_at_time, scale_profile

LEVEL_NAMES = {0: "holder", 1: "gradient", 2: "hessian"}


# ---------------------------------------------------------------------------
# grids and solvers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SampleGrid:
    """Sample points ``x`` (spacing ``x_step / 2^k`` on ``[-x_half_width, x_half_width]``) and columns ``y``."""

    x_half_width: float = 2.0
    x_step: float = 0.16
    y_points: tuple = (0.0, 0.4)

    def x_points(self, level=0):
        step = self.x_step / 2**level
        n = int(round(self.x_half_width / step))
        return np.arange(-n, n + 1) * step


def admissible_window(alpha_h, beta, level):
    """``r0 = min(1, alpha_h + beta ^ alpha_h - level)``; raises when not positive."""
    s = alpha_h + min(beta, alpha_h)
    if not s > level:
        raise HypothesisNotSatisfiedError(
            f"level {level} needs alpha_h + beta ^ alpha_h > {level}, got {alpha_h:.3g} + {min(beta, alpha_h):.3g} = {s:.3g}"
        )
    return min(1.0, s - level)


def refinement_solvers(model: JumpModel, config: ParametrixConfig, levels=2, form="compensated"):
    """Solved parametrices at densities ``1, 2, ..., 2^(levels-1)``."""
    out = []
    cfg = config
    for _ in range(levels):
        pm = Parametrix(model, cfg, form)
        pm.picard_solve()
        out.append(pm)
        cfg = cfg.refined()
    return out


def _indices(pm: Parametrix, pts):
    idx = np.rint((np.asarray(pts) + pm.cfg.half_width) / pm.dx).astype(int)
    if np.any(np.abs(pm.x[idx] - pts) > 1e-9 * max(1.0, pm.cfg.half_width)):
        raise ValueError("sample points must lie on the parametrix grid; choose x_step as a multiple of dx")
    return idx


def _columns(pm: Parametrix, ys):
    cols = []
    for y in ys:
        hit = np.nonzero(np.abs(pm.y - y) < 1e-9)[0]
        if not len(hit):
            raise ValueError(f"column y={y} was not solved; add it to y_eval")
        cols.append(int(hit[0]))
    return cols


def _pair_ratios(v, xs, y, t, r, level, bf):
    """Max of the Holder-type increment ratio over all pairs ``x != x'``; returns ``(ratio, (x, x'))``."""
    s = float(scale_at_time(bf.profile, t))
    rh = rho(bf, t, y - xs)
    dx = np.abs(xs[:, None] - xs[None, :])
    num = np.abs(v[:, None] - v[None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        den = np.minimum(dx**r, 1.0) * s ** (-level - r) * (rh[:, None] + rh[None, :])
        R = np.where(dx > 0, num / den, 0.0)
    i, j = np.unravel_index(np.argmax(R), R.shape)
    return float(R[i, j]), (float(xs[i]), float(xs[j]))


# ---------------------------------------------------------------------------
# Holder / gradient / Hessian estimates of p^kappa
# ---------------------------------------------------------------------------


def check_theorem_holder(
    model: JumpModel,
    level,
    r_grid,
    t_grid=(0.1, 0.25, 0.5),
    xy_grid: SampleGrid | None = None,
    config: ParametrixConfig | None = None,
    form="compensated",
    profile: ScaleProfile | None = None,
    solvers=None,
    levels=2,
):
    """Increment bound for ``D^level p^kappa`` in ``x``.

    For each ``r`` in ``r_grid`` below ``r0`` the ratio

        |D p(t,x,y) - D p(t,x',y)| / [(|x-x'|^r ^ 1) s^(-level-r) (rho_t(y-x') + rho_t(y-x))]

    with ``s = h^-1(1/t)`` is maximised over the sample grid.  A ``pure``
    slice records ``|D p| / (s^-level rho_t(y-x))``.  Values of ``r`` at or
    beyond ``r0`` are measured too but only reported in
    ``params['outside_window']``.

    Raises
    ------
    HypothesisNotSatisfiedError
        If ``alpha_h + beta ^ alpha_h <= level``.
    """
    level = int(level)
    if level not in LEVEL_NAMES:
        raise ValueError("level must be 0, 1 or 2")
    sp = profile or scale_profile(model)
    r0 = admissible_window(sp.alpha_h, model.beta, level)
    grid = xy_grid or SampleGrid()
    t_grid = tuple(float(t) for t in t_grid)
    if solvers is None:
        cfg = config or ParametrixConfig()
        cfg = ParametrixConfig(**{**cfg.__dict__, "y_eval": tuple(grid.y_points), "t_max": max(cfg.t_max, max(t_grid))})
        solvers = refinement_solvers(model, cfg, levels, form)
    bf = BoundFunction(sp, model.dim)
    r_all = [float(r) for r in r_grid]
    series = {r: [] for r in r_all}
    witness = {r: None for r in r_all}
    pure, pure_w = [], None
    for k, pm in enumerate(solvers):
        xs = grid.x_points(k)
        idx = _indices(pm, xs)
        cols = _columns(pm, grid.y_points)
        best = {r: (-1.0, None) for r in r_all}
        pbest = (-1.0, None)
        for t in t_grid:
            D = pm.heat_kernel(t, level)
            s = float(scale_at_time(sp, t))
            for c, y in zip(cols, grid.y_points):
                v = D[idx, c]
                for r in r_all:
                    val, (a, b) = _pair_ratios(v, xs, y, t, r, level, bf)
                    if val > best[r][0]:
                        best[r] = (val, (t, a, b, y))
                pr = np.abs(v) / (s ** (-level) * rho(bf, t, y - xs))
                i = int(np.argmax(pr))
                if pr[i] > pbest[0]:
                    pbest = (float(pr[i]), (t, float(xs[i]), float(xs[i]), y))
        for r in r_all:
            series[r].append(best[r][0])
            witness[r] = best[r][1]
        pure.append(pbest[0])
        pure_w = pbest[1]
    common = {"level": level, "t_grid": t_grid, "n_space": solvers[0].cfg.n_space, "r0": round(r0, 6)}
    slices = [EstimateReport(f"{LEVEL_NAMES[level]}_increment", {**common, "r": r}, tuple(series[r]), witness[r]) for r in r_all if r < r0]
    slices.append(EstimateReport(f"{LEVEL_NAMES[level]}_pure_bound", {**common, "r": "pure"}, tuple(pure), pure_w))
    outside = {r: (tuple(series[r]), verdict_of(series[r])) for r in r_all if r >= r0}
    return EstimateReport.combine(f"theorem_holder_level{level}", {**common, "outside_window": outside}, slices)


def derivative_consistency(pm: Parametrix, t, deriv_order, step=1e-3, x_half_width=4.0):
    """Relative sup difference between the spectral derivative and central differences of order 0.

    Order-0 values at ``x +- step`` come from the exact off-grid evaluation of
    the kernel, so the comparison is not limited by the grid spacing.
    """
    if deriv_order not in (1, 2):
        raise ValueError("deriv_order must be 1 or 2")
    I = np.abs(pm.x) <= x_half_width
    lo, mid, hi = (pm.heat_kernel(t, 0, shift=s)[I] for s in (-step, 0.0, step))
    fd = (hi - lo) / (2 * step) if deriv_order == 1 else (hi - 2 * mid + lo) / step**2
    ref = pm.heat_kernel(t, deriv_order)[I]
    return float(np.max(np.abs(fd - ref)) / np.max(np.abs(ref)))


def heat_equation_residual(pm: Parametrix, t, window=2.0, dt=None):
    """``max |d/dt p - L^kappa p|`` over grid ``x`` with ``|x - y| <= window``, per solved column.

    ``d/dt`` is a central difference with step ``dt`` (default: a tenth of
    the time panel containing ``t``); ``L^kappa`` is applied to the spline
    of the grid values, continued outside the grid by the far field
    ``t kappa(x, y - x) J(y - x)``.
    """
    m = pm.model
    if dt is None:
        k = int(np.searchsorted(pm.edges, t)) - 1
        k = min(max(k, 0), len(pm.edges) - 2)
        dt = (pm.edges[k + 1] - pm.edges[k]) / 10
    dP = (pm.heat_kernel(t + dt) - pm.heat_kernel(t - dt)) / (2 * dt)
    P = pm.heat_kernel(t)
    spec = GeneratorSpec(form=pm.form, inner_radius=2 * pm.dx, span=60.0, length_scale=pm.dx, n_gauss=8)
    out = []
    for c, y in enumerate(pm.y):
        far = lambda u, y=y: t * m.kappa(u, y - u) * m.J(y - u)  # noqa: E731
        g = grid_function(pm.x, P[:, c], outside=far)
        I = np.nonzero(np.abs(pm.x - y) <= window)[0]
        out.append(float(np.max(np.abs(dP[I, c] - apply_generator(m, spec, g, pm.x[I])))))
    return np.array(out)


def chapman_kolmogorov(pm: Parametrix, s, t, x_half_width=2.0, scale_multiple=2.0, profile=None):
    """Relative defect of ``p(s+t, x, y) = int p(s, x, z) p(t, z, y) dz`` at kernel-scale points.

    Points are grid ``x`` with ``|x| <= x_half_width`` and ``|y - x| <=
    scale_multiple * h^-1(1/(s+t))``.  Needs all columns (``y_eval=None``).
    Returns ``(max relative defect, (x, y))``.
    """
    if len(pm.cols) != pm.N:
        raise ValueError("the semigroup check needs all grid columns (y_eval=None)")
    sp = profile or scale_profile(pm.model)
    Ps, Pt, Pst = pm.heat_kernel(s), pm.heat_kernel(t), pm.heat_kernel(s + t)
    w = np.full(pm.N, pm.dx)
    w[[0, -1]] *= 0.5
    conv = (Ps * w[None, :]) @ Pt
    reach = scale_multiple * float(scale_at_time(sp, s + t))
    X, Y = np.meshgrid(pm.x, pm.x, indexing="ij")
    mask = (np.abs(X) <= x_half_width) & (np.abs(Y - X) <= reach)
    rel = np.where(mask, np.abs(conv - Pst) / np.abs(Pst), 0.0)
    i, j = np.unravel_index(np.argmax(rel), rel.shape)
    return float(rel[i, j]), (float(pm.x[i]), float(pm.x[j]))


# ---------------------------------------------------------------------------
# q regularity
# ---------------------------------------------------------------------------


def check_q_regularity(
    model: JumpModel,
    beta1,
    gamma_grid,
    t_grid=(0.05, 0.1, 0.25),
    xy_grid: SampleGrid | None = None,
    config: ParametrixConfig | None = None,
    form="compensated",
    profile: ScaleProfile | None = None,
    solvers=None,
    levels=2,
):
    """Holder bound for ``q`` with a constant uniform in ``gamma``.

    Ratio ``|q(t,x,y) - q(t,x',y)| / [(|x-x'|^(beta1-gamma) ^ 1) (E(t,x-y) + E(t,x'-y))]``
    with ``E = err(gamma, 0) + err(gamma - beta1, beta1)`` in the per-time
    normalisation.  ``params['uniformity']`` is the largest over smallest
    slice maximum across ``gamma``.
    """
    sp = profile or scale_profile(model)
    beta1 = float(beta1)
    if not (0 < beta1 <= model.beta and beta1 < sp.alpha_h):
        raise HypothesisNotSatisfiedError(f"beta1={beta1} must lie in (0, beta] and below alpha_h={sp.alpha_h}")
    gammas = [float(g) for g in gamma_grid]
    if any(not 0 < g <= beta1 for g in gammas):
        raise HypothesisNotSatisfiedError("every gamma must lie in (0, beta1]")
    grid = xy_grid or SampleGrid()
    if solvers is None:
        cfg = config or ParametrixConfig()
        cfg = ParametrixConfig(**{**cfg.__dict__, "y_eval": tuple(grid.y_points), "t_max": max(cfg.t_max, max(t_grid))})
        solvers = refinement_solvers(model, cfg, levels, form)
    bf = BoundFunction(sp, model.dim)
    series = {g: [] for g in gammas}
    witness = {}
    for k, pm in enumerate(solvers):
        xs = grid.x_points(k)
        idx = _indices(pm, xs)
        cols = _columns(pm, grid.y_points)
        best = {g: (-1.0, None) for g in gammas}
        for t in t_grid:
            Q = pm.q_at(t)
            for c, y in zip(cols, grid.y_points):
                v = Q[idx, c]
                dx = np.abs(xs[:, None] - xs[None, :])
                num = np.abs(v[:, None] - v[None, :])
                for g in gammas:
                    E = rho_family(bf, g, 0.0, t, xs - y, True) + rho_family(bf, g - beta1, beta1, t, xs - y, True)
                    with np.errstate(divide="ignore", invalid="ignore"):
                        R = np.where(dx > 0, num / (np.minimum(dx ** (beta1 - g), 1.0) * (E[:, None] + E[None, :])), 0.0)
                    i, j = np.unravel_index(np.argmax(R), R.shape)
                    if R[i, j] > best[g][0]:
                        best[g] = (float(R[i, j]), (t, float(xs[i]), float(xs[j]), y))
        for g in gammas:
            series[g].append(best[g][0])
            witness[g] = best[g][1]
    slices = [EstimateReport("q_holder", {"beta1": beta1, "gamma": round(g, 10)}, tuple(series[g]), witness[g]) for g in gammas]
    tops = [s.max_ratio for s in slices]
    pos = [v for v in tops if v > 0]
    uniformity = (max(pos) / min(pos)) if pos else 1.0
    return EstimateReport.combine("q_holder", {"beta1": beta1, "uniformity": uniformity}, slices)


# ---------------------------------------------------------------------------
# Monte Carlo oracle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MCSettings:
    """Euler-type splitting scheme.

    ``eps=None`` uses ``h^-1(1/ds)`` per step ``ds = t / n_steps``.  The
    scheme is rejected unless ``eps <= max_eps_ratio * bandwidth``: the
    Gaussian small-jump replacement acts on length scale ``eps`` and has to
    stay below the resolution of the density estimate.
    """

    n_steps: int = 50
    eps: float | None = None
    batch: int = 20000
    seed: int = 12345
    max_eps_ratio: float = 1.0
    z_max: float = 1e6
    table_size: int = 4000


@dataclass(frozen=True)
class MCResult:
    y: np.ndarray
    density: np.ndarray
    half_width: np.ndarray
    bandwidth: float
    meta: dict = field(default_factory=dict)

    def to_csv(self, path, chash="none"):
        rows = zip(self.y, self.density, self.half_width)
        return write_csv(path, ["y", "kde", "ci_half_width"], rows, chash)


class _TailSampler:
    """Inverse-CDF sampling from ``J`` restricted to ``sign z >= eps`` on one half-line."""

    def __init__(self, w, eps, z_max, n):
        z = np.geomspace(eps, z_max, n)
        hl = HalfLine(w)
        seg = np.array([hl.upper(a, b) for a, b in zip(z[:-1], z[1:])])
        tail = hl.upper(z_max)
        self.mass = float(seg.sum() + tail)
        cdf = np.concatenate([[0.0], np.cumsum(seg)]) / self.mass
        self.z, self.cdf = z, cdf

    def __call__(self, u):
        u = np.minimum(u, self.cdf[-1])
        return np.exp(np.interp(u, self.cdf, np.log(self.z)))


def _half_moments(model: JumpModel, sign, eps, b=None):
    """``(int_0^eps z^2 w, int_0^eps z w, int_eps^1 z w)`` for ``w(z) = b(sign z) J(sign z)``."""
    hl = HalfLine(model.half_line_weight(sign, b))
    mom = hl.moments(eps, 2)
    mid = hl.upper(eps, 1.0, k=1) if eps < 1 else -hl.upper(1.0, eps, k=1)
    return float(mom[2]), float(mom[1]), float(mid)


def mc_oracle(model: JumpModel, t, x, n_paths, bandwidth, y_grid, form="compensated", settings: MCSettings | None = None, profile=None) -> MCResult:
    """Kernel-density estimate of ``p^kappa(t, x, .)`` from simulated paths.

    Each step of length ``ds`` freezes the coefficient at the current state.
    Jumps with ``|z| >= eps`` form a compound Poisson draw with intensity
    ``kappa(X, z) J(z)``, sampled from ``kappa1 J`` and thinned.  Smaller
    jumps are replaced according to the operator form: a Gaussian with
    matched variance (compensated and symmetrized) or their mean drift
    (pure jump).  The compensated form adds the drift of the compensator on
    ``eps <= |z| < 1``.  Confidence half-widths are ``1.96 sd / sqrt(n)``.
    """
    if model.dim != 1:
        raise NotImplementedError("the Monte Carlo oracle is implemented for d = 1")
    if model.decomposition is None:
        raise NotImplementedError("the Monte Carlo oracle needs a separable coefficient")
    if not t > 0:
        raise ValueError("t must be positive")
    st = settings or MCSettings()
    form = canonical_form(form)
    ds = t / st.n_steps
    sp = profile or scale_profile(model)
    eps = float(st.eps) if st.eps is not None else invert_h(sp, 1.0 / ds)
    if eps > st.max_eps_ratio * bandwidth:
        raise SchemeRejectedError(f"small-jump cutoff eps={eps:.3g} exceeds {st.max_eps_ratio} x bandwidth={bandwidth}")

    # per-term constants: kappa(x, z) = sum_i a_i(x) b_i(z)
    terms = model.decomposition
    var, drift_small, drift_mid = [], [], []
    for _, b in terms:
        pv = _half_moments(model, 1, eps, b)
        mv = _half_moments(model, -1, eps, b)
        var.append(pv[0] + mv[0])
        drift_small.append(pv[1] - mv[1])
        drift_mid.append(pv[2] - mv[2])
    var, drift_small, drift_mid = map(np.array, (var, drift_small, drift_mid))
    if form == "pure_jump" and not np.all(np.isfinite(drift_small)):
        raise FirstMomentDivergenceError("pure-jump form needs a finite small-jump first moment")
    up = _TailSampler(model.half_line_weight(1), eps, st.z_max, st.table_size)
    dn = _TailSampler(model.half_line_weight(-1), eps, st.z_max, st.table_size)
    lam = model.kappa1 * (up.mass + dn.mass)
    p_up = up.mass / (up.mass + dn.mass)

    def coeffs(X):
        return np.stack([a(X) for a, _ in terms], axis=-1)

    y = np.asarray(y_grid, dtype=float)
    ss = np.random.SeedSequence(st.seed)
    n_batches = -(-int(n_paths) // st.batch)
    S1 = np.zeros_like(y)
    S2 = np.zeros_like(y)
    norm = 1.0 / (np.sqrt(2 * np.pi) * bandwidth)
    for bi, child in enumerate(ss.spawn(n_batches)):
        rng = np.random.default_rng(child)
        n = min(st.batch, int(n_paths) - bi * st.batch)
        X = np.full(n, float(x))
        for _ in range(st.n_steps):
            A = coeffs(X)
            # small jumps
            if form == "compensated":
                X_new = X + np.sqrt(np.maximum(A @ var, 0.0) * ds) * rng.standard_normal(n) - ds * (A @ drift_mid)
            elif form == "symmetrized":
                X_new = X + np.sqrt(np.maximum(A @ var, 0.0) * ds) * rng.standard_normal(n)
            else:
                X_new = X + ds * (A @ drift_small)
            # big jumps by thinning
            counts = rng.poisson(lam * ds, n)
            total = int(counts.sum())
            if total:
                owner = np.repeat(np.arange(n), counts)
                sign = np.where(rng.random(total) < p_up, 1.0, -1.0)
                u = rng.random(total)
                z = np.where(sign > 0, up(u), dn(u)) * sign
                keep = rng.random(total) * model.kappa1 < model.kappa(X[owner], z)
                if form == "symmetrized":
                    z = np.where(rng.random(total) < 0.5, z, -z)
                np.add.at(X_new, owner[keep], z[keep])
            X = X_new
        K = norm * np.exp(-0.5 * ((y[None, :] - X[:, None]) / bandwidth) ** 2)
        S1 += K.sum(0)
        S2 += (K**2).sum(0)
    n = float(n_paths)
    mean = S1 / n
    sd = np.sqrt(np.maximum(S2 / n - mean**2, 0.0) * n / (n - 1))
    meta = {"t": t, "x": x, "n_paths": int(n_paths), "eps": eps, "n_steps": st.n_steps, "seed": st.seed, "form": form}
    return MCResult(y, mean, 1.96 * sd / np.sqrt(n), float(bandwidth), meta)


def gaussian_smooth(y_grid, values, y_out, bandwidth):
    """Trapezoid convolution of grid values with the Gaussian KDE kernel."""
    y_grid = np.asarray(y_grid, dtype=float)
    K = np.exp(-0.5 * ((np.asarray(y_out)[:, None] - y_grid[None, :]) / bandwidth) ** 2) / (np.sqrt(2 * np.pi) * bandwidth)
    return np.trapezoid(K * np.asarray(values)[None, :], y_grid, axis=1)


def mc_agreement(mc: MCResult, reference, n_ci=3.0):
    """Fraction of points where ``|kde - reference| <= n_ci * half_width``."""
    ok = np.abs(mc.density - np.asarray(reference)) <= n_ci * mc.half_width
    return float(np.mean(ok))


__all__ = [
    "EstimateReport",
    "MCResult",
    "MCSettings",
    "SampleGrid",
    "admissible_window",
    "check_q_regularity",
    "chapman_kolmogorov",
    "check_theorem_holder",
    "derivative_consistency",
    "gaussian_smooth",
    "heat_equation_residual",
    "mc_agreement",
    "mc_oracle",
    "refinement_solvers",
]
