"""Command-line front end.

Subcommands: tube and shell compute the closed-form constants and their
supporting quantities; certify runs the vector-field lower-bound engine;
oracle runs the discrete Cheeger-cut solver; report joins previously
written outputs into a comparison.  Every command prints a structured-text
report to stdout and optionally writes the same bytes to --out.

Determinism contract: identical flags (and seed) produce byte-identical
reports.  Wall-clock timings are therefore only appended when --timings is
passed explicitly.

Exit codes: 0 success (and Certified verdicts), 1 usage or configuration
error, 2 computation error (including Inconclusive certificates), 3 a
certificate verdict of Violated.

Relative output paths resolve against $CHEEGERKIT_OUTDIR when it is set.
An optional config file (key = value lines, '#' comments) supplies
defaults for any long flag of the subcommand; explicit flags win.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from . import certify as _certify
from . import curves as _curves
from . import oracle as _oracle
from . import report as _report
from . import shell as _shell
from . import tube as _tube
from .errors import CheegerKitError, ConfigurationError

__all__ = ["main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_COMPUTATION = 2
EXIT_VIOLATED = 3

OUTPUT_DIR_ENV = "CHEEGERKIT_OUTDIR"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors; the contract here is 1
    def error(self, message):
        raise _UsageError(message)


def _bool_from_text(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "1", "yes", "on"):
        return True
    if t in ("false", "0", "no", "off"):
        return False
    raise ConfigurationError(f"expected a boolean, got {text!r}")


# Option tables: (flags, dest, converter, default, help).  Argparse defaults
# stay None so a config file can fill anything not given explicitly.
_CURVE_OPTS = [
    (("--preset",), "preset", str, "circle", "curve preset: circle, ellipse, trefoil"),
    (("--rho",), "rho", float, 2.0, "circle radius"),
    (("--ea",), "ea", float, 2.0, "ellipse semi-axis along x"),
    (("--eb",), "eb", float, 1.0, "ellipse semi-axis along y"),
    (("--table",), "table", str, None, "closed-curve sample table file (overrides --preset)"),
]

_OPTS = {
    "tube": _CURVE_OPTS
    + [
        (("--a",), "a", float, None, "tube radius (required)"),
        (("--d",), "d", int, 3, "ambient dimension"),
        (("--n-frame",), "n_frame", int, 4096, "frame integration steps"),
        (("--out",), "out", str, None, "also write the report to this path"),
        (("--timings",), "timings", _bool_from_text, False, "append wall-clock timings"),
    ],
    "shell": [
        (("--r",), "r", float, None, "inner radius (required)"),
        (("--R",), "R", float, None, "outer radius (required)"),
        (("--d",), "d", int, 3, "ambient dimension"),
        (("--out",), "out", str, None, "also write the report to this path"),
        (("--timings",), "timings", _bool_from_text, False, "append wall-clock timings"),
    ],
    "certify": _CURVE_OPTS
    + [
        (("--domain",), "domain", str, None, "domain kind: tube or shell (required)"),
        (("--a",), "a", float, None, "tube radius"),
        (("--r",), "r", float, None, "shell inner radius"),
        (("--R",), "R", float, None, "shell outer radius"),
        (("--d",), "d", int, 3, "ambient dimension"),
        (("--n-frame",), "n_frame", int, 4096, "frame integration steps (tube)"),
        (("--claimed-c",), "claimed_c", float, None, "claimed lower bound (default: closed form)"),
        (("--field",), "field", str, None, "tabulated field file (default: analytic field)"),
        (("--sampler",), "sampler", str, "halton", "sampler: halton or uniform"),
        (("--n",), "n", int, 100000, "number of interior samples"),
        (("--seed",), "seed", int, 0, "seed for the uniform sampler"),
        (("--h-fd",), "h_fd", float, None, "finite-difference step (default: domain-scaled)"),
        (("--eps-div",), "eps_div", float, None, "divergence tolerance (default: 1e-3 c)"),
        (("--eps-norm",), "eps_norm", float, 1e-9, "norm tolerance"),
        (("--out",), "out", str, None, "also write the report to this path"),
        (("--timings",), "timings", _bool_from_text, False, "append wall-clock timings"),
    ],
    "oracle": _CURVE_OPTS
    + [
        (("--shape",), "shape", str, None, "domain: disk, annulus, square, tube (required)"),
        (("--radius",), "radius", float, 1.0, "disk radius"),
        (("--r",), "r", float, None, "annulus inner radius"),
        (("--R",), "R", float, None, "annulus outer radius"),
        (("--side",), "side", float, 1.0, "square side length"),
        (("--a",), "a", float, None, "tube radius"),
        (("--d",), "d", int, None, "ambient dimension (default: 2, tube: 3)"),
        (("--n",), "n", int, 256, "grid resolution along the longest axis"),
        (("--stencil",), "stencil", int, None, "neighbor stencil (default 16 in 2D, 18 in 3D)"),
        (("--tol",), "tol", float, 1e-4, "relative ratio-drop stopping tolerance"),
        (("--allow-large",), "allow_large", _bool_from_text, False, "lift the 3D resolution cap"),
        (("--svg",), "svg", str, None, "write an SVG of the cut (2D only)"),
        (("--mask",), "mask", str, None, "write the cut mask (run-length text)"),
        (("--out",), "out", str, None, "also write the report to this path"),
        (("--timings",), "timings", _bool_from_text, False, "append wall-clock timings"),
    ],
    "report": [
        (("--closed-form",), "closed_form", str, None, "tube or shell report file (required)"),
        (("--certificate",), "certificate", str, None, "certificate report file"),
        (("--oracle",), "oracle", str, None, "oracle report file"),
        (("--out",), "out", str, None, "also write the report to this path"),
    ],
}

_FLAG_DESTS = {"timings", "allow_large"}


def _build_parser() -> _Parser:
    parser = _Parser(prog="cheegerkit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="command")
    for name, opts in _OPTS.items():
        p = sub.add_parser(name, add_help=True)
        p.add_argument("--config", default=None, help="config file with flag defaults")
        for flags, dest, conv, _default, help_text in opts:
            if dest in _FLAG_DESTS:
                p.add_argument(*flags, dest=dest, action="store_true", default=None, help=help_text)
            else:
                p.add_argument(*flags, dest=dest, type=conv, default=None, help=help_text)
    return parser


def _load_config(path) -> dict:
    values = {}
    try:
        fh = open(path)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file: {exc}") from exc
    with fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            if not sep:
                raise ConfigurationError(f"malformed config line {raw.strip()!r}")
            values[key.strip()] = val.strip()
    return values


def _resolve_options(args: argparse.Namespace, command: str) -> dict:
    """Merge CLI values, config file values, and table defaults."""
    table = _OPTS[command]
    config = _load_config(args.config) if args.config else {}
    known = {dest for _, dest, _, _, _ in table}
    for key in config:
        dest = key.replace("-", "_")
        if dest not in known:
            raise ConfigurationError(
                f"unknown config key {key!r} for command {command!r}"
            )
    opts = {}
    for flags, dest, conv, default, _help in table:
        value = getattr(args, dest, None)
        if value is None:
            key = flags[0].lstrip("-")
            raw = config.get(key, config.get(dest))
            if raw is not None:
                value = _bool_from_text(raw) if dest in _FLAG_DESTS else conv(raw)
        if value is None:
            value = default
        opts[dest] = value
    return opts


def _require(opts: dict, dest: str, command: str):
    if opts.get(dest) is None:
        flag = "--" + dest.replace("_", "-")
        raise _UsageError(f"{command} requires {flag}")
    return opts[dest]


def _resolve_out(path):
    if path is None:
        return None
    if os.path.isabs(path):
        return path
    base = os.environ.get(OUTPUT_DIR_ENV)
    if not base:
        return path
    os.makedirs(base, exist_ok=True)
    return os.path.join(base, path)


def _emit(schema: str, items, out_path, timing_items=()) -> str:
    items = list(items) + list(timing_items)
    text = _report.render_report(schema, items)
    sys.stdout.write(text)
    out_path = _resolve_out(out_path)
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    return text


# ---------------------------------------------------------------------------
# geometry construction shared by tube/certify/oracle


def _build_curve(opts: dict, d: int):
    if opts.get("table"):
        return _curves.load_curve_table(opts["table"])
    preset = opts["preset"]
    if preset == "circle":
        return _curves.circle(opts["rho"], d=d)
    if preset == "ellipse":
        return _curves.ellipse(opts["ea"], opts["eb"], d=d)
    if preset == "trefoil":
        if d != 3:
            raise ConfigurationError("the trefoil preset is a space curve; pass --d 3")
        return _curves.trefoil()
    raise ConfigurationError(
        f"unknown preset {preset!r}; choose circle, ellipse, or trefoil"
    )


def _tube_geom_items(opts: dict, curve, a: float, d: int):
    if opts.get("table"):
        params = f"n={curve.params[0]}"
        name = "table"
    elif curve.name == "circle":
        params = f"rho={curve.params[0]!r}"
        name = "circle"
    elif curve.name == "ellipse":
        params = f"ea={curve.params[0]!r} eb={curve.params[1]!r}"
        name = "ellipse"
    else:
        params = "none"
        name = curve.name
    return [
        ("geom_kind", "tube"),
        ("geom_preset", name),
        ("geom_params", params),
        ("geom_d", d),
        ("geom_a", float(a)),
    ]


def _shell_geom_items(r: float, rr: float, d: int):
    return [
        ("geom_kind", "shell"),
        ("geom_r_inner", float(r)),
        ("geom_r_outer", float(rr)),
        ("geom_d", d),
    ]


# ---------------------------------------------------------------------------
# subcommands


def _cmd_tube(opts: dict) -> int:
    a = _require(opts, "a", "tube")
    d = opts["d"]
    t0 = time.perf_counter()
    curve = _build_curve(opts, d)
    spec = _tube.build_tube(curve, a, n_frame=opts["n_frame"])
    ov = spec.overlap
    items = _tube_geom_items(opts, curve, a, d) + [
        ("n_frame", opts["n_frame"]),
        ("curve_length", spec.L),
        ("kappa_sup", spec.frame.kappa_sup()),
        ("overlap_verdict", ov.verdict),
        ("overlap_sufficient_value", ov.sufficient_value),
        ("overlap_min_separation", ov.min_separation),
        ("overlap_n_samples", ov.n_samples),
    ]
    code = EXIT_OK
    if ov.verdict == _tube.OVERLAP_DETECTED:
        sys.stderr.write(
            "tube overlaps itself; closed-form quantities are not valid\n"
        )
        code = EXIT_COMPUTATION
    else:
        geo = _tube.tube_geometry(spec)
        items += [
            ("cross_section_volume", geo.cross_section),
            ("tube_volume", geo.volume),
            ("boundary_area", geo.boundary_area),
            ("cheeger_h", geo.cheeger),
        ]
    timings = (
        [("timing_total_s", time.perf_counter() - t0)] if opts["timings"] else []
    )
    _emit("tube", items, opts["out"], timings)
    return code


def _cmd_shell(opts: dict) -> int:
    r = _require(opts, "r", "shell")
    rr = _require(opts, "R", "shell")
    d = opts["d"]
    t0 = time.perf_counter()
    spec = _shell.ShellSpec(r=r, R=rr, d=d)
    prof = _shell.shell_profile(spec)
    inner, outer = prof.boundary_values()
    max_tf, margin = prof.margin()
    per, vol = _shell.shell_perimeter_volume(spec)
    midpoint = np.zeros(d)
    midpoint[0] = 0.5 * (r + rr)
    items = _shell_geom_items(r, rr, d) + [
        ("shape_constant", prof.C),
        ("cheeger_h", _shell.shell_cheeger(spec)),
        ("boundary_perimeter", per),
        ("volume", vol),
        ("profile_inner_boundary", inner),
        ("profile_outer_boundary", outer),
        ("profile_max_tf", max_tf),
        ("profile_margin", margin),
        ("divergence", _shell.shell_divergence(spec, midpoint)),
    ]
    timings = (
        [("timing_total_s", time.perf_counter() - t0)] if opts["timings"] else []
    )
    _emit("shell", items, opts["out"], timings)
    return EXIT_OK


def _cmd_certify(opts: dict) -> int:
    domain = _require(opts, "domain", "certify")
    t0 = time.perf_counter()
    if domain == "tube":
        a = _require(opts, "a", "certify")
        d = opts["d"]
        curve = _build_curve(opts, d)
        tspec = _tube.build_tube(curve, a, n_frame=opts["n_frame"])
        fs = _certify.tube_field_spec(tspec, claimed_c=opts["claimed_c"])
        geom = _tube_geom_items(opts, curve, a, d)
    elif domain == "shell":
        r = _require(opts, "r", "certify")
        rr = _require(opts, "R", "certify")
        d = opts["d"]
        sspec = _shell.ShellSpec(r=r, R=rr, d=d)
        fs = _certify.shell_field_spec(sspec, claimed_c=opts["claimed_c"])
        geom = _shell_geom_items(r, rr, d)
    else:
        raise ConfigurationError(f"unknown domain {domain!r}; use tube or shell")
    if opts["field"]:
        if opts["claimed_c"] is None:
            raise ConfigurationError(
                "--field requires an explicit --claimed-c (no closed form applies)"
            )
        origin, spacing, values = _certify.load_tabulated_field(opts["field"])
        fs = _certify.tabulated_field_spec(
            fs, origin, spacing, values, claimed_c=opts["claimed_c"]
        )
    cert = _certify.certify_lower_bound(
        fs,
        sampler=opts["sampler"],
        n=opts["n"],
        h_fd=opts["h_fd"],
        eps_norm=opts["eps_norm"],
        eps_div=opts["eps_div"],
        seed=opts["seed"],
    )
    items = geom + [
        ("field_kind", cert.kind),
        ("claimed_c", cert.claimed_c),
        ("sampler", cert.sampler),
        ("seed", cert.seed),
        ("n_requested", cert.n_requested),
        ("n_used", cert.n_used),
        ("excluded_fraction", cert.excluded_fraction),
        ("h_fd", cert.h_fd),
        ("eps_norm", cert.eps_norm),
        ("eps_div", cert.eps_div),
        ("interior_margin", cert.margin),
        ("max_norm", cert.max_norm),
        ("min_div", cert.min_div),
        ("max_div", cert.max_div),
        ("norm_margin", cert.norm_margin),
        ("div_margin", cert.div_margin),
        ("verdict", cert.verdict),
        ("n_violations", len(cert.violations)),
    ]
    for k, (kind, magnitude, point) in enumerate(cert.violations):
        items.append((f"violation_{k + 1}", [kind, magnitude, *point]))
    timings = (
        [("timing_total_s", time.perf_counter() - t0)] if opts["timings"] else []
    )
    _emit("certificate", items, opts["out"], timings)
    if cert.verdict == _certify.VIOLATED:
        return EXIT_VIOLATED
    if cert.verdict == _certify.CERTIFIED:
        return EXIT_OK
    return EXIT_COMPUTATION


def _cmd_oracle(opts: dict) -> int:
    shape = _require(opts, "shape", "oracle")
    n = opts["n"]
    t0 = time.perf_counter()
    if shape == "disk":
        d = 2 if opts["d"] is None else opts["d"]
        radius = opts["radius"]
        domain = _oracle.rasterize_ball(radius, d, n)
        geom = [("geom_kind", "ball"), ("geom_radius", float(radius)), ("geom_d", d)]
    elif shape == "annulus":
        d = 2 if opts["d"] is None else opts["d"]
        r = _require(opts, "r", "oracle")
        rr = _require(opts, "R", "oracle")
        sspec = _shell.ShellSpec(r=r, R=rr, d=d)
        domain = _oracle.rasterize_shell(sspec, n)
        geom = _shell_geom_items(r, rr, d)
    elif shape == "square":
        side = opts["side"]
        domain = _oracle.rasterize_box([side, side], n)
        geom = [("geom_kind", "box"), ("geom_side", float(side)), ("geom_d", 2)]
    elif shape == "tube":
        d = 3 if opts["d"] is None else opts["d"]
        a = _require(opts, "a", "oracle")
        curve = _build_curve(opts, d)
        tspec = _tube.build_tube(curve, a)
        domain = _oracle.rasterize(
            lambda x: _tube.membership_many(tspec, x),
            _tube.bounding_box(tspec),
            n,
            allow_large=opts["allow_large"],
        )
        geom = _tube_geom_items(opts, curve, a, d)
    else:
        raise ConfigurationError(
            f"unknown shape {shape!r}; choose disk, annulus, square, or tube"
        )
    result = _oracle.dinkelbach_cheeger(domain, stencil=opts["stencil"], tol=opts["tol"])
    items = geom + [
        ("resolution", n),
        ("stencil", result.stencil),
        ("tol", opts["tol"]),
        ("delta", domain.delta),
        ("grid_shape", list(domain.shape)),
        ("n_cells", domain.n_cells),
        ("h", result.h),
        ("per", result.per),
        ("vol", result.vol),
        ("subset_cells", int(result.subset.sum())),
        ("coverage", result.coverage),
        ("n_iter", result.n_iter),
    ]
    for k, (lam, energy, size) in enumerate(result.trace):
        items.append((f"trace_{k + 1}", [lam, energy, size]))
    if opts["svg"]:
        _oracle.save_cut_svg(_resolve_out(opts["svg"]), domain, result.subset)
    if opts["mask"]:
        _oracle.save_mask(
            _resolve_out(opts["mask"]), result.subset, domain.delta, domain.origin
        )
    timings = (
        [("timing_total_s", time.perf_counter() - t0)] if opts["timings"] else []
    )
    _emit("oracle", items, opts["out"], timings)
    return EXIT_OK


def _cmd_report(opts: dict) -> int:
    path = _require(opts, "closed_form", "report")
    closed = _report.read_report(path)
    if closed.schema not in ("tube", "shell"):
        raise ConfigurationError(
            f"--closed-form must be a tube or shell report, got schema {closed.schema!r}"
        )
    if not opts["certificate"] and not opts["oracle"]:
        raise _UsageError("report needs --certificate and/or --oracle to compare")
    h = closed.get_float("cheeger_h")
    items = [(k, v) for k, v in _report.geometry_echo(closed).items()]
    items.append(("closed_form_h", h))
    code = EXIT_OK
    if opts["certificate"]:
        cert = _report.read_report(opts["certificate"])
        if cert.schema != "certificate":
            raise ConfigurationError(
                f"--certificate file has schema {cert.schema!r}, expected certificate"
            )
        _report.require_matching_geometry(closed, cert, "the certificate report")
        verdict = cert.get("verdict")
        items += [
            ("certificate_verdict", verdict),
            ("certificate_bound", cert.get_float("claimed_c")),
            ("certificate_max_norm", cert.get_float("max_norm")),
            ("certificate_min_div", cert.get_float("min_div")),
            ("certificate_n", int(cert.get_float("n_requested"))),
            ("certificate_seed", int(cert.get_float("seed"))),
            ("certificate_eps_norm", cert.get_float("eps_norm")),
            ("certificate_eps_div", cert.get_float("eps_div")),
        ]
        if verdict == _certify.VIOLATED:
            code = EXIT_VIOLATED
    if opts["oracle"]:
        orc = _report.read_report(opts["oracle"])
        if orc.schema != "oracle":
            raise ConfigurationError(
                f"--oracle file has schema {orc.schema!r}, expected oracle"
            )
        _report.require_matching_geometry(closed, orc, "the oracle report")
        oh = orc.get_float("h")
        items += [
            ("oracle_h", oh),
            ("oracle_relative_deviation", abs(oh - h) / abs(h)),
            ("oracle_resolution", int(orc.get_float("resolution"))),
            ("oracle_stencil", int(orc.get_float("stencil"))),
            ("oracle_tol", orc.get_float("tol")),
        ]
    _emit("comparison", items, opts["out"])
    return code


_COMMANDS = {
    "tube": _cmd_tube,
    "shell": _cmd_shell,
    "certify": _cmd_certify,
    "oracle": _cmd_oracle,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise _UsageError("a command is required (tube, shell, certify, oracle, report)")
        opts = _resolve_options(args, args.command)
        return _COMMANDS[args.command](opts)
    except _UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    except ConfigurationError as exc:
        sys.stderr.write(f"configuration error: {exc}\n")
        return EXIT_USAGE
    except CheegerKitError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_COMPUTATION
    except OSError as exc:
        sys.stderr.write(f"i/o error: {exc}\n")
        return EXIT_COMPUTATION


if __name__ == "__main__":
    sys.exit(main())
