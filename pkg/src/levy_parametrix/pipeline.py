"""Config-driven experiment pipeline: validate, classify, build kernels, run checks, write CSVs.

A config is a YAML mapping (grammar in ``docs/config.md``).  Every CSV
starts with a ``# config_hash=..., version=...`` line; wall-clock timings
go to ``timings.json`` only, so CSVs of two runs with the same config and
seed are byte-identical.
"""
from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from ._io import VERSION, config_hash, write_csv
from .errors import ConfigError, HypothesisNotSatisfiedError, ParametrixError
from .frozen import FFTSettings, IncrementGrid, build_symbol, check_increment_bounds, frozen_kernel, mass
from .models import build_model, classify_case, report_passed, validate_model
from .parametrix import Parametrix, ParametrixConfig, q0
from .scales import BoundFunction, scale_profile, write_scale_table
from .verify import (
    MCSettings,
    SampleGrid,
    admissible_window,
    chapman_kolmogorov,
    check_q_regularity,
    check_theorem_holder,
    derivative_consistency,
    gaussian_smooth,
    heat_equation_residual,
    mc_agreement,
    mc_oracle,
)

OUTPUT_ENV = "LEVY_PARAMETRIX_OUTPUT"
TOP_KEYS = {"name", "seed", "output_dir", "workers", "model", "form", "scales", "fft", "parametrix", "checks"}
log = logging.getLogger("levy_parametrix")


# ---------------------------------------------------------------------------
# check catalog
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CheckInfo:
    name: str
    tag: str
    description: str
    needs_seed: bool = False


CATALOG = {
    c.name: c
    for c in (
        CheckInfo("frozen_closed_form", "oracle: Cauchy heat kernel", "frozen kernel vs t/(pi(t^2+u^2)); stable alpha=1, constant coefficient"),
        CheckInfo("frozen_mass", "frozen kernel conservation", "total mass of the frozen kernel"),
        CheckInfo("increment_bounds_frozen", "lemma: increment bounds of the frozen kernel", "Holder and F2-type increment ratios of frozen-kernel derivatives"),
        CheckInfo("constant_coefficient", "degeneracy: x-independent coefficient", "q0 vanishes and p^kappa equals the frozen kernel"),
        CheckInfo("q_convergence", "Picard convergence of q", "sup-norm deltas of consecutive Picard iterates"),
        CheckInfo("parametrix_mass", "conservation of p^kappa", "int p^kappa(t,x,y) dy"),
        CheckInfo("chapman_kolmogorov", "semigroup property of p^kappa", "p(s+t) vs int p(s) p(t) at kernel-scale points"),
        CheckInfo("pde_residual", "fundamental solution residual", "|d/dt p - L p| at base and refined grids"),
        CheckInfo("derivative_consistency", "spectral vs finite-difference derivatives", "order-1/2 fields vs central differences of order 0"),
        CheckInfo("theorem_holder_level0", "theorem: Holder continuity of p^kappa", "increment ratios of p^kappa in x"),
        CheckInfo("theorem_holder_level1", "theorem: gradient estimate of p^kappa", "increment ratios of the x-gradient"),
        CheckInfo("theorem_holder_level2", "theorem: Hessian estimate of p^kappa", "pure bound and increment ratios of the x-Hessian"),
        CheckInfo("q_regularity", "lemma: gamma-uniform Holder bound of q", "increment ratios of q over a gamma sweep"),
        CheckInfo("mc_cross_validation", "Monte Carlo cross-validation", "KDE of simulated paths vs smoothed p^kappa", needs_seed=True),
    )
}


def list_checks():
    """``[(name, tag, description)]`` in a fixed order."""
    return [(c.name, c.tag, c.description) for c in sorted(CATALOG.values(), key=lambda c: c.name)]


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------


def bundled_configs():
    root = resources.files("levy_parametrix") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def resolve_config_path(ref) -> Path:
    p = Path(ref)
    if p.exists():
        return p
    root = resources.files("levy_parametrix") / "configs"
    cand = root / f"{ref}.yaml"
    if cand.is_file():
        return Path(str(cand))
    raise ConfigError(f"config {ref!r} not found (bundled: {', '.join(bundled_configs())})")


def load_config(ref) -> dict:
    """Parse and validate a config file or bundled config name."""
    path = resolve_config_path(ref)
    try:
        cfg = yaml.safe_load(path.read_text())
    except yaml.MarkedYAMLError as e:
        mark = e.problem_mark
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"{path}: YAML parse error{where}: {e.problem}") from e
    validate_config(cfg, str(path))
    return cfg


def validate_config(cfg, source="config"):
    if not isinstance(cfg, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    extra = set(cfg) - TOP_KEYS
    if extra:
        raise ConfigError(f"{source}: unknown key(s) {sorted(extra)}")
    for key in ("name", "model"):
        if key not in cfg:
            raise ConfigError(f"{source}: missing key {key!r}")
    try:
        build_model(cfg["model"])
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"{source}: key 'model': {e}") from e
    for sect in ("scales", "fft", "parametrix"):
        if not isinstance(cfg.get(sect, {}), dict):
            raise ConfigError(f"{source}: key {sect!r} must be a mapping")
    try:
        FFTSettings(**cfg.get("fft", {}))
        _pm_config(cfg, {})
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{source}: {e}") from e
    checks = cfg.get("checks", [])
    if not isinstance(checks, list):
        raise ConfigError(f"{source}: key 'checks' must be a list")
    for i, c in enumerate(checks):
        name = c.get("name") if isinstance(c, dict) else c
        if name not in CATALOG:
            raise ConfigError(f"{source}: key 'checks[{i}].name': unknown check {name!r}")
        if CATALOG[name].needs_seed and "seed" not in cfg:
            raise ConfigError(f"{source}: check {name!r} needs a top-level 'seed'")
    out = Path(output_root()) / cfg.get("output_dir", cfg["name"])
    parent = next((p for p in (out, *out.parents) if p.exists()), Path("."))
    if not os.access(parent, os.W_OK):
        raise ConfigError(f"{source}: output directory {out} is not writable")
    return cfg


def output_root():
    return os.environ.get(OUTPUT_ENV, "runs")


def _pm_config(cfg, override) -> ParametrixConfig:
    sect = {**cfg.get("parametrix", {}), **override}
    if "y_eval" in sect and sect["y_eval"] is not None:
        sect["y_eval"] = tuple(float(v) for v in sect["y_eval"])
    return ParametrixConfig(**sect, fft=FFTSettings(**cfg.get("fft", {})))


def _hashable(cfg):
    return {k: v for k, v in cfg.items() if k not in ("output_dir", "workers")}


# ---------------------------------------------------------------------------
# run context
# ---------------------------------------------------------------------------


@dataclass
class Context:
    cfg: dict
    out: Path
    chash: str
    cache_dir: Path
    stages: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    _model: object = None
    _profile: object = None
    form: str = "compensated"
    case: object = None

    @property
    def model(self):
        if self._model is None:
            self._model = build_model(self.cfg["model"])
        return self._model

    @property
    def profile(self):
        if self._profile is None:
            self._profile = scale_profile(self.model, **_scale_kwargs(self.cfg))
        return self._profile

    def csv(self, name, columns, rows):
        return write_csv(self.out / name, columns, rows, self.chash).name

    def solver(self, **override) -> Parametrix:
        """Solved parametrix, reused from the on-disk stage cache when possible."""
        pcfg = _pm_config(self.cfg, override)
        pm = Parametrix(self.model, pcfg, self.form)
        key = config_hash({"model": self.cfg["model"], "form": self.form, "fft": self.cfg.get("fft", {}), "parametrix": repr(pcfg)})
        path = self.cache_dir / f"q_{key}.npz"
        if path.exists():
            try:
                pm.load_q(path)
                log.info("  parametrix %s loaded from cache", key)
                return pm
            except ValueError:
                pass
        pm.picard_solve()
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        pm.save_q(path)
        return pm

    def solvers(self, levels=2, **override):
        out, cfg = [], _pm_config(self.cfg, override)
        for _ in range(levels):
            out.append(self.solver(**{k: v for k, v in cfg.__dict__.items() if k != "fft"}))
            cfg = cfg.refined()
        return out


def _scale_kwargs(cfg):
    s = cfg.get("scales", {})
    kw = {}
    for k in ("fit_range", "table_range"):
        if k in s:
            kw[k] = tuple(float(v) for v in s[k])
    if "per_decade" in s:
        kw["per_decade"] = int(s["per_decade"])
    return kw


def _report_rows(ctx, rep, name):
    return rep.to_csv(ctx.out / name, ctx.chash).name


def _status(ok):
    return "pass" if ok else "fail"


# ---------------------------------------------------------------------------
# checks; each returns (status, metrics, files)
# ---------------------------------------------------------------------------


def _frozen_closed_form(ctx, p):
    m = ctx.model
    fam = m.family
    if fam.get("nu") != "stable" or abs(fam.get("alpha", 0) - 1.0) > 1e-12 or not m.x_independent or not m.symmetric_kappa_in_z:
        raise ConfigError("frozen_closed_form needs a stable alpha = 1 model with constant symmetric coefficient")
    sym = build_symbol(m, 0.0, ctx.form)
    c = float(np.real(sym.psi(np.array([1.0]))[0]))  # psi(xi) = c |xi|
    u = np.linspace(-float(p.get("u_max", 5.0)), float(p.get("u_max", 5.0)), int(p.get("n", 101)))
    rows, worst = [], 0.0
    for t in p.get("t_grid", [0.25, 1.0]):
        t = float(t)
        k = frozen_kernel(sym, t, 0.0, u, 0, FFTSettings(**ctx.cfg.get("fft", {})))
        ref = c * t / (np.pi * ((c * t) ** 2 + u**2))
        rel = np.abs(k - ref) / ref
        worst = max(worst, float(rel.max()))
        rows += [(t, a, b, e, r) for a, b, e, r in zip(u, k, ref, rel)]
    tol = float(p.get("tol", 1e-3))
    f = ctx.csv("frozen_closed_form.csv", ["t", "u", "kernel", "closed_form", "rel_error"], rows)
    return _status(worst <= tol), {"max_rel_error": worst, "tol": tol}, [f]


def _frozen_mass(ctx, p):
    rows, worst = [], 0.0
    fft = FFTSettings(**ctx.cfg.get("fft", {}))
    for w in p.get("w_points", [0.0]):
        sym = build_symbol(ctx.model, float(w), ctx.form)
        for t in p.get("t_grid", [0.25, 1.0]):
            mm = float(mass(sym, float(t), fft))
            worst = max(worst, abs(mm - 1))
            rows.append((float(w), float(t), mm))
    tol = float(p.get("tol", 1e-6))
    f = ctx.csv("frozen_mass.csv", ["w", "t", "mass"], rows)
    return _status(worst <= tol), {"max_abs_mass_error": worst, "tol": tol}, [f]


def _increment_frozen(ctx, p):
    g = IncrementGrid(
        t=tuple(float(v) for v in p.get("t_grid", (0.5, 1.0))),
        half_width=float(p.get("half_width", 2.0)),
        n=int(p.get("n", 41)),
        gammas=tuple(float(v) for v in p.get("gammas", (0.0, 0.5, 1.0))),
        orders=tuple(int(v) for v in p.get("orders", (0, 1, 2))),
    )
    sym = build_symbol(ctx.model, float(p.get("w", 0.0)), ctx.form)
    rep = check_increment_bounds(sym, BoundFunction(ctx.profile), g, FFTSettings(**ctx.cfg.get("fft", {})))
    f = _report_rows(ctx, rep, "increment_bounds_frozen.csv")
    return rep.verdict, {"max_ratio": rep.max_ratio, "verdict": rep.verdict}, [f]


def _constant_coefficient(ctx, p):
    if not ctx.model.x_independent:
        raise ConfigError("constant_coefficient needs a coefficient that does not depend on x")
    t = float(p.get("t", 0.25))
    pm = ctx.solver(y_eval=(0.0,), t_max=max(t, ctx.cfg.get("parametrix", {}).get("t_max", 0.5)))
    qmax = float(np.max(np.abs(pm.q0_grid(t))))
    xs = np.linspace(-2, 2, 9)
    qpt = float(np.max(np.abs(q0(ctx.model, t, xs, 0.0, ctx.form))))
    diff = float(np.max(np.abs(pm.heat_kernel(t) - pm.frozen_part(t))))
    tol = float(p.get("tol", 1e-12))
    worst = max(qmax, qpt, diff)
    f = ctx.csv("constant_coefficient.csv", ["quantity", "max_abs"], [("q0_grid", qmax), ("q0_pointwise", qpt), ("p_minus_frozen", diff)])
    return _status(worst <= tol), {"max_abs": worst, "tol": tol}, [f]


def _q_convergence(ctx, p):
    pm = ctx.solver()
    f = pm.write_deltas(ctx.out / "q_convergence.csv", ctx.chash).name
    d = pm.q.deltas
    return "pass", {"last_delta": d[-1] if d else 0.0, "n_picard": len(d)}, [f]


def _parametrix_mass(ctx, p):
    t = float(p.get("t", 0.25))
    pm = ctx.solver(y_eval=None, t_max=t)
    xw = float(p.get("x_half_width", pm.cfg.half_width / 2))
    idx = np.nonzero(np.abs(pm.x) <= xw)[0]
    M = pm.mass(t, idx)
    worst = float(np.max(np.abs(M - 1)))
    tol = float(p.get("tol", 5e-3))
    f = ctx.csv("parametrix_mass.csv", ["t", "x", "mass"], [(t, pm.x[i], v) for i, v in zip(idx, M)])
    return _status(worst <= tol), {"max_abs_mass_error": worst, "tol": tol}, [f]


def _chapman(ctx, p):
    s, t = float(p.get("s", 0.125)), float(p.get("t", 0.125))
    pm = ctx.solver(y_eval=None, t_max=s + t)
    rel, wit = chapman_kolmogorov(pm, s, t, float(p.get("x_half_width", 2.0)), float(p.get("scale_multiple", 2.0)), ctx.profile)
    tol = float(p.get("tol", 1e-2))
    f = ctx.csv("chapman_kolmogorov.csv", ["s", "t", "max_rel_defect", "x", "y"], [(s, t, rel, *wit)])
    return _status(rel <= tol), {"max_rel_defect": rel, "tol": tol}, [f]


def _pde_residual(ctx, p):
    t = float(p.get("t", 0.25))
    ys = tuple(float(v) for v in p.get("y_points", (0.0, 1.0)))
    over = {"t_anchor": t, "t_max": float(p.get("t_max", t + 0.05)), "n_time": int(p.get("n_time", 12)), "y_eval": ys}
    if "n_picard" in p:
        over["n_picard"] = int(p["n_picard"])
    res = [heat_equation_residual(pm, t, float(p.get("window", 2.0))) for pm in ctx.solvers(2, **over)]
    ratio = float(np.min(res[0] / res[1]))
    rows = [(y, a, b, a / b) for y, a, b in zip(ys, res[0], res[1])]
    f = ctx.csv("pde_residual.csv", ["y", "residual_1x", "residual_2x", "decrease"], rows)
    need = float(p.get("min_decrease", 2.0))
    return _status(ratio >= need), {"min_decrease": ratio, "required": need}, [f]


def _derivatives(ctx, p):
    t = float(p.get("t", 0.25))
    pm = ctx.solver(t_max=max(t, ctx.cfg.get("parametrix", {}).get("t_max", 0.5)))
    rows = [(t, k, derivative_consistency(pm, t, k, float(p.get("step", 1e-3)))) for k in p.get("orders", (1, 2))]
    worst = max(r[2] for r in rows)
    tol = float(p.get("tol", 1e-3))
    f = ctx.csv("derivative_consistency.csv", ["t", "order", "rel_error"], rows)
    return _status(worst <= tol), {"max_rel_error": worst, "tol": tol}, [f]


def _sample_grid(p):
    g = SampleGrid()
    return SampleGrid(
        float(p.get("x_half_width", g.x_half_width)), float(p.get("x_step", g.x_step)), tuple(float(v) for v in p.get("y_points", g.y_points))
    )


def _holder(level):
    def run(ctx, p):
        grid = _sample_grid(p)
        t_grid = tuple(float(v) for v in p.get("t_grid", (0.1, 0.25, 0.5)))
        try:
            admissible_window(ctx.profile.alpha_h, ctx.model.beta, level)
        except HypothesisNotSatisfiedError as e:
            return "hypothesis not satisfied", {"reason": str(e)}, []
        solvers = ctx.solvers(int(p.get("levels", 2)), y_eval=grid.y_points, t_max=max(max(t_grid), ctx.cfg.get("parametrix", {}).get("t_max", 0.5)))
        rep = check_theorem_holder(ctx.model, level, p.get("r_grid", [0.0]), t_grid, grid, form=ctx.form, profile=ctx.profile, solvers=solvers)
        f = _report_rows(ctx, rep, f"theorem_holder_level{level}.csv")
        return rep.verdict, {"max_ratio": rep.max_ratio, "verdict": rep.verdict}, [f]

    return run


def _q_regularity(ctx, p):
    grid = _sample_grid(p)
    t_grid = tuple(float(v) for v in p.get("t_grid", (0.05, 0.1, 0.25)))
    beta1 = float(p.get("beta1", ctx.model.beta))
    gam = p.get("gamma_grid", list(np.linspace(beta1 / 5, beta1, 5)))
    solvers = ctx.solvers(int(p.get("levels", 2)), y_eval=grid.y_points, t_max=max(max(t_grid), ctx.cfg.get("parametrix", {}).get("t_max", 0.5)))
    try:
        rep = check_q_regularity(ctx.model, beta1, gam, t_grid, grid, form=ctx.form, profile=ctx.profile, solvers=solvers)
    except HypothesisNotSatisfiedError as e:
        return "hypothesis not satisfied", {"reason": str(e)}, []
    f = _report_rows(ctx, rep, "q_regularity.csv")
    return rep.verdict, {"max_ratio": rep.max_ratio, "uniformity": rep.params["uniformity"], "verdict": rep.verdict}, [f]


def _mc(ctx, p):
    t, x = float(p.get("t", 0.25)), float(p.get("x", 0.0))
    bw = float(p.get("bandwidth", 0.1))
    y = np.linspace(*[float(v) for v in p.get("y_range", (-3.0, 3.0))], int(p.get("n_y", 61)))
    st = MCSettings(n_steps=int(p.get("n_steps", 50)), seed=int(ctx.cfg["seed"]), batch=int(p.get("batch", 20000)))
    res = mc_oracle(ctx.model, t, x, int(p.get("n_paths", 100000)), bw, y, ctx.form, st, ctx.profile)
    pm = ctx.solver(y_eval=None, t_max=t)
    i = int(np.argmin(np.abs(pm.x - x)))
    ref = gaussian_smooth(pm.x, pm.heat_kernel(t)[i], y, bw)
    frac = mc_agreement(res, ref, float(p.get("n_ci", 3.0)))
    rows = zip(y, res.density, res.half_width, ref)
    f = ctx.csv("mc_cross_validation.csv", ["y", "kde", "ci_half_width", "parametrix_smoothed"], rows)
    need = float(p.get("min_fraction", 0.9))
    return _status(frac >= need), {"fraction_within_ci": frac, "required": need, "eps": res.meta["eps"]}, [f]


RUNNERS = {
    "frozen_closed_form": _frozen_closed_form,
    "frozen_mass": _frozen_mass,
    "increment_bounds_frozen": _increment_frozen,
    "constant_coefficient": _constant_coefficient,
    "q_convergence": _q_convergence,
    "parametrix_mass": _parametrix_mass,
    "chapman_kolmogorov": _chapman,
    "pde_residual": _pde_residual,
    "derivative_consistency": _derivatives,
    "theorem_holder_level0": _holder(0),
    "theorem_holder_level1": _holder(1),
    "theorem_holder_level2": _holder(2),
    "q_regularity": _q_regularity,
    "mc_cross_validation": _mc,
}


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(u) for k, u in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(u) for u in v]
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def run(ref) -> int:
    """Run a config; returns the exit status (0 ok, 1 diverging estimate, 2 hard error)."""
    try:
        cfg = load_config(ref)
    except ConfigError as e:
        log.error("%s", e)
        return 2
    out = Path(output_root()) / cfg.get("output_dir", cfg["name"])
    out.mkdir(parents=True, exist_ok=True)
    ctx = Context(cfg, out, config_hash(_hashable(cfg)), Path(output_root()) / ".cache")
    handler = logging.FileHandler(out / "run.log", mode="w")
    handler.setFormatter(logging.Formatter("%(message)s"))
    log.addHandler(handler)
    status = 0
    try:
        log.info("config %s (hash %s, version %s)", cfg["name"], ctx.chash, VERSION)
        status = _run_stages(ctx)
    finally:
        (out / "summary.json").write_text(json.dumps(_jsonable(ctx.stages), indent=2, sort_keys=True) + "\n")
        (out / "timings.json").write_text(json.dumps(ctx.timings, indent=2, sort_keys=True) + "\n")
        log.info("exit status %d", status)
        log.removeHandler(handler)
        handler.close()
    return status


def _stage(ctx, name, fn):
    t0 = time.perf_counter()
    log.info("stage %s", name)
    try:
        status, metrics, files = fn()
    except (ParametrixError, ValueError, NotImplementedError) as e:
        ctx.timings[name] = time.perf_counter() - t0
        ctx.stages.append({"stage": name, "status": "error", "metrics": {"error": f"{type(e).__name__}: {e}"}, "files": []})
        log.error("  stage %s failed: %s: %s", name, type(e).__name__, e)
        raise _StageFailed(name) from e
    ctx.timings[name] = time.perf_counter() - t0
    ctx.stages.append({"stage": name, "status": status, "metrics": metrics, "files": files})
    log.info("  %s %s", status, json.dumps(_jsonable(metrics), sort_keys=True))
    return status


class _StageFailed(Exception):
    pass


def _run_stages(ctx) -> int:
    cfg = ctx.cfg
    try:

        def validation():
            checks = validate_model(ctx.model)
            f = ctx.csv("validation.csv", ["invariant", "passed", "witness", "lhs", "rhs"], [(c.invariant, c.passed, c.witness, c.lhs, c.rhs) for c in checks])
            ok = report_passed(checks)
            if not ok:
                bad = [c.invariant for c in checks if not c.passed]
                raise ValueError(f"model validation failed: {', '.join(bad)}")
            return "pass", {"invariants": len(checks)}, [f]

        def scales():
            sp = ctx.profile
            r = np.geomspace(1e-3, 1e2, 51)
            f = write_scale_table(sp, ctx.out / "scales.csv", r, ctx.chash).name
            return "pass", {"alpha_h": sp.alpha_h, "C_h": sp.C_h, "beta_h": sp.beta_h, "c_h": sp.c_h}, [f]

        def classification():
            tag = classify_case(ctx.model, ctx.profile)
            ctx.case = tag
            ctx.form = cfg.get("form") or tag.form
            f = ctx.csv("classification.csv", ["case", "form", "param", "value"], [(tag.case, ctx.form, k, v) for k, v in sorted(tag.params.items())])
            return "pass", {"case": tag.case, "form": ctx.form}, [f]

        _stage(ctx, "validate", validation)
        _stage(ctx, "scales", scales)
        _stage(ctx, "classify", classification)
        diverging = False
        for entry in cfg.get("checks", []):
            p = dict(entry) if isinstance(entry, dict) else {"name": entry}
            name = p.pop("name")
            st = _stage(ctx, name, lambda: RUNNERS[name](ctx, p))
            diverging |= st == "diverging"
        return 1 if diverging else 0
    except _StageFailed:
        return 2


__all__ = ["CATALOG", "OUTPUT_ENV", "bundled_configs", "list_checks", "load_config", "run", "validate_config"]
