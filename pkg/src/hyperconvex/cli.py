"""Config-driven experiments: ``hyperconvex --config run.cfg --out results/``.

Configuration is line based: ``[section]`` headers followed by ``key=value``
lines; ``#`` starts a comment.  Keys placed before the first header belong to
``[domain]``.  Unknown sections or keys are errors.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .barriers import BarrierFamily, BarrierParams, make_eta
from .bounds import (
    decay_bounds_ladder,
    eta_divergence_test,
    holder_rate_exponent,
    lipschitz_tau,
    write_integrand_trace,
)
from .envelope import harmonic_oracle, save_field, solve_envelope_grid
from .errors import DomainError, HypothesisError, ParameterError, UnsupportedKindError
from .geometry import (
    Annulus,
    Ball,
    GraphDomain,
    Grid,
    HartogsTriangle,
    Polydisc,
    sampled_graph,
    verify_dilation_bounds,
)
from .harness import (
    CheckReport,
    check_holder_rate,
    check_key_lemma,
    check_lipschitz_rate,
    classify_hyperconvexity,
    decay_profile,
    geometric_ladder,
    write_decay_table,
    write_fit_table,
)

log = logging.getLogger("hyperconvex")

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_SOLVER, EXIT_OUTPUT = 0, 1, 2, 3, 4

KINDS = ("oracle", "holder", "lipschitz", "eta", "hartogs", "key_lemma")

SCHEMA = {
    "experiment": {"kind", "expect", "max_error", "tau_fraction", "rate_allowance"},
    "domain": {
        "kind", "n", "center", "radius", "inner", "outer", "radii",
        "holder_exponent", "holder_constant", "g", "slice_radius",
    },
    "obstacle": {"center", "radius"},
    "grid": {"h", "nodes_per_axis", "cell_centered"},
    "barrier": {"family", "alpha", "epsilon", "gamma", "beta_dil", "c_demailly", "eta", "r0", "t0"},
    "ladder": {"t_min", "t_max", "points_per_decade"},
    "solver": {"tol", "max_iter", "method"},
    "quadrature": {"rtol", "max_evals"},
}


class ConfigError(Exception):
    def __init__(self, message, line=None, path=None):
        where = f"{path or '<config>'}:{line}: " if line is not None else f"{path or '<config>'}: "
        super().__init__(where + message)
        self.line = line


@dataclass
class Config:
    """Parsed sections; ``lines`` maps ``(section, key)`` to its line number."""

    sections: dict = field(default_factory=dict)
    lines: dict = field(default_factory=dict)
    path: str | None = None
    base_dir: str = "."

    def has(self, section, key):
        return key in self.sections.get(section, {})

    def raw(self, section, key, default=None):
        return self.sections.get(section, {}).get(key, default)

    def error(self, section, key, message):
        return ConfigError(f"[{section}] {key}: {message}", self.lines.get((section, key)), self.path)

    def get(self, section, key, kind=str, default=None, required=False):
        if not self.has(section, key):
            if required:
                raise ConfigError(f"missing required key [{section}] {key}", None, self.path)
            return default
        text = self.sections[section][key]
        try:
            if kind is bool:
                if text.lower() not in ("true", "false", "1", "0", "yes", "no"):
                    raise ValueError(text)
                return text.lower() in ("true", "1", "yes")
            if kind == "vector":
                return np.array([float(v) for v in text.split(",")])
            return kind(text)
        except ValueError:
            raise self.error(section, key, f"cannot parse {text!r}") from None


def parse_config(text, path=None) -> Config:
    cfg = Config(path=path, base_dir=os.path.dirname(os.path.abspath(path)) if path else ".")
    section = "domain"
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {raw.strip()!r}", lineno, path)
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]", lineno, path)
            cfg.sections.setdefault(section, {})
            continue
        if "=" not in line:
            raise ConfigError(f"expected key=value, got {raw.strip()!r}", lineno, path)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA[section]:
            raise ConfigError(f"unknown key {key!r} in [{section}]", lineno, path)
        if key in cfg.sections.get(section, {}):
            raise ConfigError(f"duplicate key {key!r} in [{section}]", lineno, path)
        cfg.sections.setdefault(section, {})[key] = value
        cfg.lines[(section, key)] = lineno
    return cfg


def load_config(path) -> Config:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), path)


# -- building objects ---------------------------------------------------------


def build_domain(cfg: Config):
    kind = cfg.get("domain", "kind", required=True)
    n = cfg.get("domain", "n", int, 1)
    try:
        if kind == "ball":
            center = cfg.get("domain", "center", "vector", np.zeros(2 * n))
            return Ball(center, cfg.get("domain", "radius", float, 1.0))
        if kind == "annulus":
            return Annulus(
                cfg.get("domain", "inner", float, required=True),
                cfg.get("domain", "outer", float, required=True),
                cfg.get("domain", "center", "vector"),
                n=n,
            )
        if kind == "polydisc":
            return Polydisc(cfg.get("domain", "radii", "vector", required=True), cfg.get("domain", "center", "vector"))
        if kind == "hartogs_triangle":
            return HartogsTriangle()
        if kind == "graph":
            spec = cfg.get("domain", "g", str, "closed_form:zero")
            source, _, name = spec.partition(":")
            if source == "closed_form":
                g = name
            elif source == "samples":
                path = name if os.path.isabs(name) else os.path.join(cfg.base_dir, name)
                g = sampled_graph(np.loadtxt(path, ndmin=2), n)
            else:
                raise cfg.error("domain", "g", f"unknown graph source {source!r}")
            return GraphDomain(
                g,
                cfg.get("domain", "holder_exponent", float, 1.0),
                cfg.get("domain", "holder_constant", float, 1.0),
                cfg.get("domain", "radius", float, 1.0),
                n=n,
                slice_radius=cfg.get("domain", "slice_radius", float),
            )
    except (ParameterError, DomainError) as exc:
        raise cfg.error("domain", "kind", str(exc)) from None
    raise cfg.error("domain", "kind", f"unknown domain kind {kind!r}")


def build_obstacle(cfg: Config, domain):
    center = cfg.get("obstacle", "center", "vector", required=True)
    radius = cfg.get("obstacle", "radius", float, required=True)
    if center.size != domain.dim:
        raise cfg.error("obstacle", "center", f"needs {domain.dim} coordinates")
    if radius <= 0:
        raise cfg.error("obstacle", "radius", "obstacle radius must be positive")
    if not domain.contains_points(center[None, :])[0]:
        raise cfg.error("obstacle", "center", "invariant violated: obstacle centre lies outside the domain")
    depth = float(domain.distance_points(center[None, :])[0])
    if radius >= depth:
        raise cfg.error(
            "obstacle", "radius", f"invariant violated: obstacle not strictly inside the domain (radius {radius} >= boundary distance {depth:.6g})"
        )
    return Ball(center, radius), 0.5 * (depth - radius)


def build_grid(cfg: Config, domain):
    nodes = cfg.get("grid", "nodes_per_axis", int)
    h = cfg.get("grid", "h", float)
    if (nodes is None) == (h is None):
        raise ConfigError("[grid] needs exactly one of h or nodes_per_axis", None, cfg.path)
    return Grid.covering(domain, h=h, nodes_per_axis=nodes, cell_centered=cfg.get("grid", "cell_centered", bool, False))


def build_params(cfg: Config, domain, r0):
    eta = None
    if cfg.has("barrier", "eta"):
        try:
            eta = make_eta(cfg.get("barrier", "eta"), cfg.base_dir)
        except (ParameterError, OSError) as exc:
            raise cfg.error("barrier", "eta", str(exc)) from None
    gamma_default = getattr(domain, "gamma", 1.0)
    beta_default = getattr(domain, "beta_dil", 1.0)
    try:
        return BarrierParams(
            alpha=cfg.get("barrier", "alpha", float, 0.1),
            epsilon=cfg.get("barrier", "epsilon", float),
            gamma=cfg.get("barrier", "gamma", float, gamma_default),
            beta_dil=cfg.get("barrier", "beta_dil", float, beta_default),
            c_demailly=cfg.get("barrier", "c_demailly", float, 0.0),
            eta=eta,
            r0=cfg.get("barrier", "r0", float, r0),
            t0=cfg.get("barrier", "t0", float),
        )
    except ParameterError as exc:
        raise cfg.error("barrier", "alpha", str(exc)) from None


def build_ladder(cfg: Config, lo, hi, h=None):
    t_min = cfg.get("ladder", "t_min", float, lo)
    t_max = cfg.get("ladder", "t_max", float, hi)
    if not 0 < t_min < t_max:
        raise ConfigError("[ladder] needs 0 < t_min < t_max", cfg.lines.get(("ladder", "t_min")), cfg.path)
    if t_max > hi * (1 + 1e-12):
        raise cfg.error("ladder", "t_max", f"invariant violated: ladder exceeds its upper limit {hi:.6g}")
    return geometric_ladder(t_min, t_max, cfg.get("ladder", "points_per_decade", int, 4))


# -- output -------------------------------------------------------------------


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.16e}"
    return str(v)


class Results:
    """Collects summary entries and checks, then writes files under ``out``."""

    def __init__(self, out):
        self.out = out
        self.summary = []
        self.checks = []

    def path(self, name):
        return os.path.join(self.out, name)

    def note(self, key, value):
        self.summary.append((key, value))

    def check(self, name, ok):
        self.checks.append((name, bool(ok)))

    @property
    def passed(self):
        return len(self.checks) > 0 and all(ok for _, ok in self.checks)

    def write_dat(self, name, x, y):
        with open(self.path(name), "w", encoding="utf-8", newline="\n") as fh:
            for a, b in zip(x, y):
                fh.write(f"{a:.16e} {b:.16e}\n")

    def write_summary(self):
        with open(self.path("summary.txt"), "w", encoding="utf-8", newline="\n") as fh:
            for k, v in self.summary:
                fh.write(f"{k}={_fmt(v)}\n")
            for name, ok in self.checks:
                fh.write(f"check.{name}={'pass' if ok else 'fail'}\n")
            fh.write(f"status={'pass' if self.passed else 'fail'}\n")


def _solve(cfg, domain, obstacle, grid, opts, res: Results):
    tol = opts["tol"] if opts["tol"] is not None else cfg.get("solver", "tol", float, 1e-10)
    max_iter = opts["max_iter"] if opts["max_iter"] is not None else cfg.get("solver", "max_iter", int, 100000)
    method = cfg.get("solver", "method", str, "policy")
    start = time.perf_counter()
    fld = solve_envelope_grid(domain, obstacle, grid, tol=tol, max_iter=max_iter, method=method, workers=opts["workers"])
    log.info("solve: %.2f s, residual %.3e", time.perf_counter() - start, fld.info["residual"])
    res.note("solver.method", fld.info["method"])
    res.note("solver.residual", float(fld.info["residual"]))
    res.note("solver.converged", bool(fld.info["converged"]))
    res.note("grid.h", grid.h)
    res.note("grid.inside_nodes", int(grid.inside.sum()))
    save_field(fld, res.path("field.txt"))
    if not fld.info["converged"]:
        raise SolverError(f"solver did not converge: residual {fld.info['residual']:.3e} after {fld.info['iterations']} iterations")
    return fld


class SolverError(Exception):
    pass


def _profile(cfg, fld, ladder, res: Results):
    prof = decay_profile(fld, ladder)
    res.write_dat("profile.dat", prof.ts, prof.M)
    res.note("profile.points", len(prof.ts))
    res.note("profile.skipped", len(prof.skipped))
    res.note("profile.monotone", prof.monotone)
    res.check("profile_monotone", prof.monotone and np.all((prof.M > 0) & (prof.M <= 1 + 1e-12)))
    label = classify_hyperconvexity(prof)
    res.note("classification", label)
    return prof, label


# -- experiments --------------------------------------------------------------


def run_oracle(cfg, opts, res):
    domain = build_domain(cfg)
    if not isinstance(domain, Ball) or domain.n != 1:
        raise cfg.error("domain", "kind", "oracle runs need a disc in C^1")
    obstacle, r0 = build_obstacle(cfg, domain)
    if np.linalg.norm(obstacle.center - domain.center) > 0:
        raise cfg.error("obstacle", "center", "oracle runs need a concentric obstacle")
    grid = build_grid(cfg, domain)
    fld = _solve(cfg, domain, obstacle, grid, opts, res)
    R, s0 = domain.radius, obstacle.radius
    pts = grid.points()[grid.inside.ravel()] - domain.center
    exact = harmonic_oracle(pts / R, s0 / R)
    err = float(np.max(np.abs(fld.values[grid.inside] - exact)))
    limit = cfg.get("experiment", "max_error", float, 1e-3)
    res.note("oracle.s0", s0)
    res.note("oracle.max_error", err)
    res.check("oracle_error", err <= limit)
    ladder = build_ladder(cfg, r0 / 100, r0)
    prof, label = _profile(cfg, fld, ladder, res)
    closed = np.log(R / (R - prof.ts)) / np.log(R / s0)
    rep = CheckReport("oracle_profile")
    for t, m, c in zip(prof.ts, prof.M, closed):
        margin = limit - abs(m - c)
        rep.rows.append({"t": t, "M": m, "bound": c, "margin": margin, "status": "pass" if margin >= 0 else "fail"})
    write_decay_table(rep, res.path("decay_table.csv"))
    write_fit_table(prof, res.path("fits.csv"))
    res.check("oracle_profile", rep.passed)
    res.check("classification", label == "hyperconvex-consistent")


def _graph_setup(cfg):
    domain = build_domain(cfg)
    obstacle, r0 = build_obstacle(cfg, domain)
    grid = build_grid(cfg, domain)
    params = build_params(cfg, domain, r0)
    return domain, obstacle, r0, grid, params


def run_key_lemma(cfg, opts, res):
    domain, obstacle, r0, grid, params = _graph_setup(cfg)
    family = BarrierFamily(cfg.get("barrier", "family", str, "holder"), params, domain)
    fld = _solve(cfg, domain, obstacle, grid, opts, res)
    a = params.alpha
    ladder = build_ladder(cfg, a * params.r0 / 100, a * params.r0)
    prof, label = _profile(cfg, fld, ladder, res)
    start = time.perf_counter()
    bounds = decay_bounds_ladder(
        (family, grid),
        prof.ts,
        params.r0,
        rtol=cfg.get("quadrature", "rtol", float, 1e-6),
        max_evals=cfg.get("quadrature", "max_evals", int, 2000),
    )
    log.info("quadrature: %.2f s, %d kappa samples", time.perf_counter() - start, len(bounds[0].samples))
    rep = check_key_lemma(prof, bounds, grid.h)
    write_decay_table(rep, res.path("decay_table.csv"))
    write_integrand_trace(bounds[0], res.path("integrand_trace.csv"))
    write_fit_table(prof, res.path("fits.csv"))
    res.write_dat("bound.dat", [b.r for b in bounds], [b.value for b in bounds])
    res.note("r0", params.r0)
    res.note("quadrature.rel_error", bounds[0].error_estimate / bounds[0].integral if bounds[0].integral else 0.0)
    res.note("quadrature.converged", bounds[0].converged)
    res.note("key_lemma.slack", rep.notes["slack"])
    res.note("key_lemma.worst_margin", rep.worst["margin"])
    res.check("key_lemma", rep.passed)


def run_holder(cfg, opts, res):
    domain, obstacle, r0, grid, params = _graph_setup(cfg)
    if not isinstance(domain, GraphDomain):
        raise cfg.error("domain", "kind", "holder runs need a graph domain")
    cert = verify_dilation_bounds(domain, geometric_ladder(1e-3, 0.1, 3))
    res.note("dilation.worst_lower_margin", cert.worst_lower_margin)
    res.note("dilation.worst_upper_margin", cert.worst_upper_margin)
    res.check("dilation_certificate", cert.passed)
    fld = _solve(cfg, domain, obstacle, grid, opts, res)
    prof, label = _profile(cfg, fld, build_ladder(cfg, r0 / 100, r0), res)
    beta = domain.holder_exponent
    extra = []
    if beta < 1:
        tau = cfg.get("experiment", "tau_fraction", float, 0.8) * beta / (1 - beta)
        rate = holder_rate_exponent(params)
        extra = [
            ("rate_exponent", rate.exponent, 0.0),
            ("rate_supremal", rate.supremal, 0.0),
            ("graph_target", rate.graph_target, 0.0),
            ("calibrated_tau", tau, 0.0),
        ]
        rep = check_holder_rate(prof, tau)
        res.note("holder.tau", tau)
        res.note("holder.C", rep.notes["C"])
        write_decay_table(rep, res.path("decay_table.csv"))
        res.check("holder_rate", rep.passed)
    else:
        res.check("fitted_exponent_log", prof.fitted_exponent_log > 0)
    res.note("fitted_exponent_log", prof.fitted_exponent_log)
    write_fit_table(prof, res.path("fits.csv"), extra)
    res.check("classification", label == "hyperconvex-consistent")


def run_lipschitz(cfg, opts, res):
    domain = build_domain(cfg)
    obstacle, r0 = build_obstacle(cfg, domain)
    grid = build_grid(cfg, domain)
    params = build_params(cfg, domain, r0)
    try:
        tau = lipschitz_tau(params)
    except ParameterError as exc:
        raise cfg.error("barrier", "c_demailly", str(exc)) from None
    fld = _solve(cfg, domain, obstacle, grid, opts, res)
    prof, label = _profile(cfg, fld, build_ladder(cfg, r0 / 100, r0), res)
    allowance = cfg.get("experiment", "rate_allowance", float, 0.05)
    rep = check_lipschitz_rate(prof, tau, allowance)
    write_decay_table(rep, res.path("decay_table.csv"))
    write_fit_table(prof, res.path("fits.csv"), [("lipschitz_tau", tau, 0.0)])
    res.note("lipschitz.tau", tau)
    res.note("fitted_exponent_power", prof.fitted_exponent_power)
    res.check("lipschitz_rate", rep.passed)
    res.check("classification", label == "hyperconvex-consistent")


def run_eta(cfg, opts, res):
    if not cfg.has("barrier", "eta"):
        raise ConfigError("missing required key [barrier] eta", None, cfg.path)
    eta = make_eta(cfg.get("barrier", "eta"), cfg.base_dir)
    r0 = cfg.get("barrier", "r0", float, 0.1)
    try:
        out = eta_divergence_test(eta, r0)
    except ParameterError as exc:
        raise cfg.error("barrier", "eta", str(exc)) from None
    res.write_dat("eta_partial.dat", out.ladder, out.partial_integrals)
    res.note("eta", eta.name)
    res.note("eta.r0", r0)
    res.note("eta.cauchy_gap", out.cauchy_gap)
    res.note("eta.min_slope", float(np.min(out.slopes)))
    res.note("classification", out.label)
    expect = cfg.get("experiment", "expect", str)
    res.check("classification", out.label == expect if expect else out.label != "inconclusive")


def run_hartogs(cfg, opts, res):
    domain = build_domain(cfg)
    if not isinstance(domain, HartogsTriangle):
        raise cfg.error("domain", "kind", "hartogs runs need kind=hartogs_triangle")
    obstacle, r0 = build_obstacle(cfg, domain)
    grid = build_grid(cfg, domain)
    fld = _solve(cfg, domain, obstacle, grid, opts, res)
    prof, label = _profile(cfg, fld, build_ladder(cfg, r0 / 100, r0), res)
    rep = CheckReport("hartogs")
    top = prof.M[-1] if len(prof.M) else np.nan
    for t, m in zip(prof.ts, prof.M):
        margin = m - 0.9 * top
        rep.rows.append({"t": t, "M": m, "bound": 0.9 * top, "margin": margin, "status": "pass" if margin >= 0 else "fail"})
    write_decay_table(rep, res.path("decay_table.csv"))
    write_fit_table(prof, res.path("fits.csv"))
    res.note("r0", r0)
    res.check("classification", label == "obstructed")


RUNNERS = {
    "oracle": run_oracle,
    "key_lemma": run_key_lemma,
    "holder": run_holder,
    "lipschitz": run_lipschitz,
    "eta": run_eta,
    "hartogs": run_hartogs,
}


def run_experiment(cfg: Config, out, workers=1, tol=None, max_iter=None) -> int:
    """Run one experiment and write its artifacts; returns the exit status."""
    kind = cfg.get("experiment", "kind", required=True)
    if kind not in KINDS:
        raise cfg.error("experiment", "kind", f"unknown experiment kind (choose from {', '.join(KINDS)})")
    try:
        os.makedirs(out, exist_ok=True)
        probe = os.path.join(out, ".write_probe")
        with open(probe, "w") as fh:
            fh.write("")
        os.remove(probe)
    except OSError as exc:
        print(f"error: output directory {out!r} is not writable: {exc}", file=sys.stderr)
        return EXIT_OUTPUT
    res = Results(out)
    res.note("experiment", kind)
    res.note("version", __version__)
    opts = {"workers": workers, "tol": tol, "max_iter": max_iter}
    try:
        RUNNERS[kind](cfg, opts, res)
    except SolverError as exc:
        res.write_summary()
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except HypothesisError as exc:
        res.note("hypothesis_failure_t", exc.t)
        res.check("hypothesis", False)
        res.write_summary()
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED
    res.write_summary()
    for name, ok in res.checks:
        log.info("check %s: %s", name, "pass" if ok else "fail")
    return EXIT_OK if res.passed else EXIT_FAILED


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="hyperconvex", description=__doc__.splitlines()[0])
    ap.add_argument("--config", required=True, help="experiment configuration file")
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--workers", type=int, default=1, help="worker threads for sweeps")
    ap.add_argument("--tol", type=float, default=None, help="solver residual tolerance")
    ap.add_argument("--max-iter", type=int, default=None, help="solver iteration cap")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.workers < 1:
        ap.error("--workers must be >= 1")
    try:
        cfg = load_config(args.config)
        return run_experiment(cfg, args.out, args.workers, args.tol, args.max_iter)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParameterError, DomainError, UnsupportedKindError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
