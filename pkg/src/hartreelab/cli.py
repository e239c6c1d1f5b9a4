"""Command-line front end: every module behind one `hartreelab` entry point.

Seven subcommands (constants, bubble-check, kernel, delaunay,
moving-spheres, asymptotics, hls-check), each driven by a flat config that
resolves in three layers: schema defaults, then a JSON config file, then
explicit flags, with flags winning.  A run with --out records its resolved
config next to its artifacts, every artifact embeds the config hash, and
re-running from a recorded config reproduces the artifacts byte for byte;
all randomness flows from the single `seed` through counter-based Philox
streams.

Exit codes: 0 success, 2 config error, 3 numerical-accuracy failure,
4 non-convergence.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import artifacts, asymptotics, cylinder, riesz, spheres
from .constants import sharp_constants
from .errors import (AccuracyError, ConvergenceError, GridError,
                     HartreelabError, IntegrabilityError, ParameterDomainError,
                     ParameterRangeError, SamplingError,
                     UnsupportedDimensionError)
from .fields import Field, make_bubble, make_singular_power, sample_radial
from .params import ProblemParams


class ConfigError(Exception):
    """A config file or flag set that fails its command's schema."""


# ============================================================
# schemas
# ============================================================


@dataclass(frozen=True)
class _Opt:
    default: object
    kind: type        # int, float, str, bool
    help: str


def _common(**extra):
    base = {
        "n": _Opt(3, int, "space dimension"),
        "alpha": _Opt(2.0, float, "order of the convolution kernel, 0 < alpha < n"),
        "out": _Opt("", str, "output directory for artifacts (none when empty)"),
    }
    base.update(extra)
    return base


SCHEMAS = {
    "constants": _common(),
    "bubble-check": _common(
        window_lo=_Opt(0.05, float, "residual window, inner radius"),
        window_hi=_Opt(20.0, float, "residual window, outer radius"),
        per_decade=_Opt(96, int, "radial grid resolution"),
        tolerance=_Opt(1e-3, float, "relative residual required of both forms"),
        plot=_Opt(False, bool, "write an SVG of the residual profiles"),
    ),
    "kernel": _common(
        t_max=_Opt(10.0, float, "half-width of the tabulated t range"),
        points=_Opt(201, int, "rows in the kernel table artifact"),
        pairs=_Opt(100, int, "random (r, s) pairs for the identity check"),
        seed=_Opt(20240817, int, "Philox stream for the identity pairs"),
        tolerance=_Opt(1e-8, float, "max allowed identity mismatch"),
        plot=_Opt(False, bool, "write an SVG of the kernel"),
    ),
    "delaunay": _common(
        period=_Opt(0.0, float, "explicit period L (0 means period_factor * L_0)"),
        period_factor=_Opt(1.05, float, "period as a multiple of the bifurcation L_0"),
        epsilon_factor=_Opt(0.5, float, "neck target as a multiple of U_c"),
        steps=_Opt(30, int, "continuation ladder length"),
        nodes=_Opt(512, int, "collocation points per period (even, <= 2048)"),
        plot=_Opt(False, bool, "write an SVG of the orbit"),
    ),
    "moving-spheres": _common(
        field=_Opt("singular", str, "test field: singular | bubble | constant"),
        field_mu=_Opt(1.0, float, "bubble shape parameter (field=bubble)"),
        field_center=_Opt(0.0, float, "bubble center offset along e_1 (field=bubble)"),
        field_value=_Opt(1.0, float, "constant value (field=constant)"),
        x_offset=_Opt(0.5, float, "inversion center x = x_offset * e_1"),
        mu=_Opt(0.4, float, "sphere radius for the single deficit report"),
        mu_hi=_Opt(8.0, float, "bisection ceiling for the critical radius"),
        xtol=_Opt(1e-4, float, "bisection width"),
        seed=_Opt(20240817, int, "Philox stream for test sets and fit clouds"),
    ),
    "asymptotics": _common(
        field=_Opt("bubble", str, "test field: bubble | singular | perturbed_bubble"),
        field_mu=_Opt(1.0, float, "bubble shape parameter"),
        field_center=_Opt(0.0, float, "field center offset along e_1"),
        r_min=_Opt(1e-3, float, "smallest probe radius"),
        r_max=_Opt(2.0, float, "largest probe radius"),
        plot=_Opt(False, bool, "write an SVG of the scans"),
    ),
    "hls-check": _common(
        mu=_Opt(1.0, float, "extremal scale"),
        per_decade=_Opt(96, int, "radial grid resolution"),
        tolerance=_Opt(1e-3, float, "allowed |ratio - 1| at the extremal"),
    ),
}

# keys that do not change computed numbers and stay out of the config hash
_NON_SEMANTIC = ("out", "plot")


# ============================================================
# config resolution
# ============================================================


def _coerce(command: str, key: str, value, kind: type):
    if kind is bool:
        if isinstance(value, bool):
            return value
        raise ConfigError(f"{command}.{key}: expected a boolean, got {value!r}")
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{command}.{key}: expected an integer, got {value!r}")
        return value
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{command}.{key}: expected a number, got {value!r}")
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"{command}.{key}: expected a string, got {value!r}")
    return value


def resolve_config(command: str, config_path: Optional[str], overrides: dict) -> dict:
    """Defaults, then the config file, then flags; unknown keys are errors."""
    schema = SCHEMAS[command]
    cfg = {k: opt.default for k, opt in schema.items()}
    if config_path:
        try:
            body = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}")
        if not isinstance(body, dict):
            raise ConfigError("config file must hold a JSON object")
        recorded = body.pop("command", command)
        if recorded != command:
            raise ConfigError(
                f"command: config file records {recorded!r}, invoked as {command!r}")
        body.pop("config_hash", None)   # recorded configs carry their own hash
        for key, value in body.items():
            if key not in schema:
                raise ConfigError(f"{command}.{key}: unknown config key")
            cfg[key] = _coerce(command, key, value, schema[key].kind)
    for key, value in overrides.items():
        cfg[key] = _coerce(command, key, value, schema[key].kind)
    return cfg


def _params(cfg: dict) -> ProblemParams:
    try:
        return ProblemParams(cfg["n"], cfg["alpha"])
    except HartreelabError as exc:
        raise ConfigError(f"params: {exc}")


def _hash(command: str, cfg: dict) -> str:
    doc = {"command": command}
    doc.update({k: v for k, v in cfg.items() if k not in _NON_SEMANTIC})
    return artifacts.config_hash(doc)


class _Emitter:
    """Collects artifacts for one run: config stamp, JSON, CSV, SVG."""

    def __init__(self, command: str, cfg: dict):
        self.command = command
        self.cfg = cfg
        self.hash = _hash(command, cfg)
        self.out = Path(cfg["out"]) if cfg["out"] else None
        self.written = []
        if self.out is not None:
            self.out.mkdir(parents=True, exist_ok=True)
            doc = {"command": command, "config_hash": self.hash}
            doc.update(cfg)
            self._write_json("config.json", doc, stamp=False)

    def _write_json(self, name, doc, stamp=True):
        if self.out is None:
            return
        if stamp:
            doc = dict(doc)
            doc["config_hash"] = self.hash
        artifacts.write_json(self.out / name, doc)
        self.written.append(name)

    def json(self, name, doc):
        self._write_json(name, doc)

    def csv(self, name, columns, header=()):
        if self.out is None:
            return
        artifacts.write_csv(self.out / name, columns,
                            [f"config_hash={self.hash}", *header])
        self.written.append(name)

    def svg(self, name, series, **kw):
        if self.out is None or not self.cfg.get("plot", False):
            return
        kw["title"] = f"{kw.get('title', self.command)}  [cfg {self.hash[:12]}]"
        artifacts.svg_plot(self.out / name, series, **kw)
        self.written.append(name)

    def summary(self, doc: dict) -> dict:
        full = {"command": self.command, "config_hash": self.hash}
        full.update(doc)
        if self.written:
            full["artifacts"] = sorted(self.written)
        return full


# ============================================================
# commands
# ============================================================


def _cmd_constants(cfg: dict) -> dict:
    params = _params(cfg)
    em = _Emitter("constants", cfg)
    sc = sharp_constants(params)
    doc = {
        "n": params.n,
        "alpha": params.alpha,
        "p": sc.p,
        "nu": params.nu,
        "s_n": sc.s_n,
        "h_n": sc.h_n,
        "k_n": sc.k_n,
        "c_n": sc.c_n,
    }
    em.json("constants.json", doc)
    return em.summary(doc)


def _cmd_bubble_check(cfg: dict) -> dict:
    params = _params(cfg)
    em = _Emitter("bubble-check", cfg)
    window = (cfg["window_lo"], cfg["window_hi"])
    cal = riesz.calibrate_cf(params, window=window, per_decade=cfg["per_decade"])
    nl = riesz.nonlinearity_for(params, c_f=cal.c_f)
    bub = make_bubble(params)
    prof = sample_radial(bub, riesz.default_grid(cfg["per_decade"]))
    reports = {}
    for form in ("differential", "integral"):
        rep = riesz.residual(prof, params, nl, form=form, window=window,
                             u_exact=bub.radial_fn)
        reports[form] = rep
        em.csv(f"residual_{form}.csv",
               {"r": rep.residual.grid.r, "residual": rep.residual.values,
                "scale": rep.scale.values},
               [f"form={form}", f"rel_norm={artifacts.format_float(rep.rel_norm)}"])
    gap = riesz.residual_forms_gap(prof, params, nl, window=window,
                                   u_exact=bub.radial_fn)
    doc = {
        "n": params.n,
        "alpha": params.alpha,
        "c_f": cal.c_f,
        "c_f_fit_residual": cal.residual_norm,
        "window": list(window),
        "differential": reports["differential"].summary(),
        "integral": reports["integral"].summary(),
        "forms_gap": gap,
        "tolerance": cfg["tolerance"],
    }
    em.json("bubble_check.json", doc)
    em.svg("bubble_check.svg",
           [(form, reports[form].residual.grid.r, np.abs(reports[form].residual.values))
            for form in ("differential", "integral")],
           xlabel="r", ylabel="|residual|", logx=True, logy=True)
    worst = max(reports["differential"].rel_norm, reports["integral"].rel_norm,
                gap)
    if worst > cfg["tolerance"]:
        raise AccuracyError(
            f"bubble residual {worst:.3e} exceeds the required {cfg['tolerance']:.1e}",
            achieved=worst)
    return em.summary(doc)


def _cmd_kernel(cfg: dict) -> dict:
    params = _params(cfg)
    em = _Emitter("kernel", cfg)
    t = np.linspace(-cfg["t_max"], cfg["t_max"], cfg["points"])
    khat = cylinder.kernel_hat(params, t)
    em.csv("kernel_hat.csv", {"t": t, "khat": khat})
    rng = np.random.Generator(np.random.Philox(cfg["seed"]))
    r = np.exp(rng.uniform(-3.0, 3.0, cfg["pairs"]))
    s = np.exp(rng.uniform(-3.0, 3.0, cfg["pairs"]))
    spec = riesz.AngularKernelSpec(params.n, params.alpha)
    lhs = (r * s) ** ((params.n - params.alpha) / 2.0) * riesz.angular_kernel(spec, r, s)
    rhs = cylinder.kernel_hat(params, np.log(r / s))
    identity_err = float(np.max(np.abs(lhs / rhs - 1.0)))
    doc = {
        "n": params.n,
        "alpha": params.alpha,
        "t_max": cfg["t_max"],
        "identity_pairs": cfg["pairs"],
        "identity_max_error": identity_err,
        "decay_constant": cylinder.kernel_table(params).decay_constant
        if params.alpha > 1.0 else None,
        "tolerance": cfg["tolerance"],
    }
    em.json("kernel_check.json", doc)
    em.svg("kernel_hat.svg", [("khat", t, khat)], xlabel="t", ylabel="Khat",
           logy=True)
    if identity_err > cfg["tolerance"]:
        raise AccuracyError(
            f"kernel identity mismatch {identity_err:.3e} exceeds {cfg['tolerance']:.1e}",
            achieved=identity_err)
    return em.summary(doc)


def _cmd_delaunay(cfg: dict) -> dict:
    params = _params(cfg)
    em = _Emitter("delaunay", cfg)
    kt = cylinder.kernel_table(params)
    nl = riesz.nonlinearity_for(params)
    u_c, l_0 = cylinder.dispersion_root(params, nl, kt)
    if cfg["period"] > 0.0:
        period = cfg["period"]
    else:
        if l_0 is None:
            raise ConvergenceError(
                "no local bifurcation: the dispersion relation has no positive "
                "root, and no explicit period was configured")
        period = cfg["period_factor"] * l_0
    sol = cylinder.find_delaunay(params, nl, cfg["epsilon_factor"] * u_c, period,
                                 cfg["steps"], kt=kt, n_nodes=cfg["nodes"])
    doc = {"l_0": l_0, "u_c": u_c}
    doc.update(sol.summary())
    em.json("delaunay.json", doc)
    if em.out is not None:
        sol.to_csv(em.out / "delaunay_profile.csv")
        em.written.append("delaunay_profile.csv")
    em.svg("delaunay.svg", [("U", sol.profile.t, sol.profile.values)],
           xlabel="t", ylabel="U")
    if not sol.converged:
        raise ConvergenceError(
            f"no converged orbit: last residual {sol.residual_norm:.3e}")
    return em.summary(doc)


def _make_field(cfg: dict, params: ProblemParams) -> Field:
    kind = cfg["field"]
    center = np.zeros(params.n)
    center[0] = cfg.get("field_center", 0.0)
    if kind == "singular":
        return make_singular_power(params)
    if kind == "bubble":
        return make_bubble(params, center=center, mu=cfg.get("field_mu", 1.0))
    if kind == "constant":
        value = cfg.get("field_value", 1.0)
        return Field(n=params.n, fn=lambda pts: np.full(pts.shape[0], float(value)))
    if kind == "perturbed_bubble":
        bub = make_bubble(params, center=center, mu=cfg.get("field_mu", 1.0))
        return Field(n=params.n,
                     fn=lambda pts: (1.0 + np.linalg.norm(pts, axis=1)) * bub(pts))
    raise ConfigError(f"field: unknown kind {kind!r}")


def _cmd_moving_spheres(cfg: dict) -> dict:
    params = _params(cfg)
    em = _Emitter("moving-spheres", cfg)
    u = _make_field(cfg, params)
    x = np.zeros(params.n)
    x[0] = cfg["x_offset"]
    spec = spheres.TestSetSpec(seed=cfg["seed"])
    mu_bar = spheres.critical_radius(u, x, spec, mu_hi=cfg["mu_hi"],
                                     xtol=cfg["xtol"], alpha=params.alpha)
    inv = spheres.SphereInversion(x, cfg["mu"])
    report = spheres.comparison_deficit(
        u, inv, spheres.deficit_test_set(params.n, x, cfg["mu"], spec),
        alpha=params.alpha)
    fit_doc = None
    if cfg["field"] == "bubble":
        rng = np.random.Generator(np.random.Philox([cfg["seed"], 1]))
        center = np.zeros(params.n)
        center[0] = cfg["field_center"]
        cloud = center[None, :] + rng.normal(size=(400, params.n)) * 1.5
        fit = spheres.equality_fit(u, cloud)
        fit_doc = {
            "x0": [float(v) for v in fit.x0],
            "mu_bar": fit.mu_bar,
            "amplitude": fit.amplitude,
            "fit_error": fit.fit_error,
            "note": fit.note,
        }
    doc = {
        "n": params.n,
        "alpha": params.alpha,
        "field": cfg["field"],
        "x": [float(v) for v in x],
        "critical_radius": float(mu_bar),
        "critical_radius_note": mu_bar.note,
        "critical_radius_unbounded": mu_bar.unbounded,
        "deficit": report.summary(),
        "equality_fit": fit_doc,
    }
    em.json("moving_spheres.json", doc)
    if em.out is not None and not report.ok:
        report.violations_to_csv(em.out / "deficit_violations.csv")
        em.written.append("deficit_violations.csv")
    return em.summary(doc)


def _cmd_asymptotics(cfg: dict) -> dict:
    params = _params(cfg)
    em = _Emitter("asymptotics", cfg)
    u = _make_field(cfg, params)
    radii = asymptotics.default_radii(cfg["r_min"], cfg["r_max"])
    center = np.zeros(params.n)
    rep = asymptotics.asymptotics_report(u, radii, params,
                                         candidates=("cylinder_bubble",),
                                         center=center)
    doc = rep.summary()
    em.json("asymptotics.json", doc)
    em.csv("upper_bound_scan.csv", rep.upper.rows())
    em.csv("symmetry_ratio.csv", rep.symmetry.rows())
    em.svg("asymptotics.svg",
           [("scaled average", rep.upper.radii, rep.upper.s_values),
            ("oscillation", rep.symmetry.radii,
             np.maximum(rep.symmetry.ratios, 1e-17))],
           xlabel="r", ylabel="", logx=True, logy=True)
    return em.summary(doc)


def _cmd_hls_check(cfg: dict) -> dict:
    params = _params(cfg)
    em = _Emitter("hls-check", cfg)
    check = riesz.hls_ratio(params, mu=cfg["mu"], per_decade=cfg["per_decade"])
    doc = {
        "n": params.n,
        "alpha": params.alpha,
        "mu": cfg["mu"],
        "ratio": check.ratio,
        "double_integral": check.double_integral,
        "sharp_bound": check.sharp_bound,
        "tolerance": cfg["tolerance"],
    }
    em.json("hls_check.json", doc)
    gap = abs(check.ratio - 1.0)
    if gap > cfg["tolerance"]:
        raise AccuracyError(
            f"extremal misses the sharp bound by {gap:.3e} (> {cfg['tolerance']:.1e})",
            achieved=gap)
    return em.summary(doc)


COMMANDS = {
    "constants": _cmd_constants,
    "bubble-check": _cmd_bubble_check,
    "kernel": _cmd_kernel,
    "delaunay": _cmd_delaunay,
    "moving-spheres": _cmd_moving_spheres,
    "asymptotics": _cmd_asymptotics,
    "hls-check": _cmd_hls_check,
}


# ============================================================
# entry point
# ============================================================


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hartreelab",
        description="Numerical toolkit for a critical nonlocal elliptic equation: "
                    "sharp constants, bubble residuals, cylinder kernels, "
                    "Delaunay orbits, moving-spheres comparisons, and "
                    "singularity asymptotics.")
    sub = parser.add_subparsers(dest="command", metavar="command")
    for command, schema in SCHEMAS.items():
        sp = sub.add_parser(command, help=f"run the {command} pipeline")
        sp.add_argument("--config", default=None, metavar="FILE",
                        help="JSON config; flags override its values")
        for key, opt in schema.items():
            flag = "--" + key.replace("_", "-")
            if opt.kind is bool:
                sp.add_argument(flag, dest=key, action="store_true",
                                default=argparse.SUPPRESS, help=opt.help)
            else:
                sp.add_argument(flag, dest=key, type=opt.kind,
                                default=argparse.SUPPRESS, help=opt.help)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    overrides = {k: v for k, v in vars(args).items()
                 if k not in ("command", "config")}
    try:
        cfg = resolve_config(args.command, args.config, overrides)
    except ConfigError as exc:
        print(artifacts.dumps_json({"error": "ConfigError", "message": str(exc)}),
              file=sys.stderr, end="")
        return 2
    try:
        summary = COMMANDS[args.command](cfg)
    except ConvergenceError as exc:
        print(artifacts.dumps_json({"error": type(exc).__name__,
                                    "message": str(exc)}),
              file=sys.stderr, end="")
        return 4
    except ConfigError as exc:
        print(artifacts.dumps_json({"error": "ConfigError", "message": str(exc)}),
              file=sys.stderr, end="")
        return 2
    except HartreelabError as exc:
        print(artifacts.dumps_json({"error": type(exc).__name__,
                                    "message": str(exc)}),
              file=sys.stderr, end="")
        return 3
    print(artifacts.dumps_json(summary), end="")
    return 0


if __name__ == "__main__":
    sys.exit(main())
