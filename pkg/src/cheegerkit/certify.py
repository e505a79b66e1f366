"""Vector-field lower-bound certificates for Cheeger constants.

A smooth field V on a domain Omega with |V| <= 1 and div V >= c everywhere
certifies h(Omega) >= c.  This module verifies those two inequalities
numerically: deterministic interior sampling (low-discrepancy by default),
exact field evaluation, and central-difference divergence.  The outcome is a
Certificate whose verdict is Certified (no violations), Violated (a clear
violation, at least 10x tolerance), or Inconclusive (tolerance-level noise
only).  Sampling can falsify or support the inequalities, never prove them;
a Certified verdict is numerical evidence, not a proof.

Field kinds: the tube projection field V(x) = (x - gamma(s*))/a with
div V = (d-1)/a, the shell radial field V(x) = f(|x|) x with div V = d C,
and user-supplied grid-tabulated fields with multilinear interpolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.special import ndtri
from scipy.stats import qmc

from . import shell as _shell
from . import tube as _tube
from .errors import (
    ConfigurationError,
    DomainError,
    StencilError,
    TooFewSamplesError,
    UndersampledError,
)
from .shell import ShellSpec
from .tube import TubeSpec

__all__ = [
    "TUBE_PROJECTION_FIELD",
    "SHELL_RADIAL_FIELD",
    "TABULATED_FIELD",
    "CERTIFIED",
    "VIOLATED",
    "INCONCLUSIVE",
    "FieldSpec",
    "Certificate",
    "tube_field",
    "tube_field_many",
    "tube_field_spec",
    "shell_field_spec",
    "tabulated_field_spec",
    "load_tabulated_field",
    "save_tabulated_field",
    "numeric_divergence",
    "certify_lower_bound",
]

TUBE_PROJECTION_FIELD = "TubeProjectionField"
SHELL_RADIAL_FIELD = "ShellRadialField"
TABULATED_FIELD = "TabulatedField"

CERTIFIED = "Certified"
VIOLATED = "Violated"
INCONCLUSIVE = "Inconclusive"

# a violation must exceed its tolerance by this factor to count as a clear
# falsification rather than noise
_VIOLATION_FACTOR = 10.0
_MAX_RECORDED_VIOLATIONS = 16


@dataclass(frozen=True)
class FieldSpec:
    """A candidate certificate: field, claimed constant, and domain adapters.

    evaluate maps points (n, d) -> field values (n, d).  sample_interior
    draws interior points with the requested margin from the boundary;
    boundary_distance gives the distance to the domain boundary (used by the
    uniform sampler's margin filter and the divergence stencil check).
    """

    kind: str
    d: int
    claimed_c: float
    evaluate: Callable[[np.ndarray], np.ndarray]
    sample_interior: Callable[[int, float, str, int], np.ndarray]
    boundary_distance: Callable[[np.ndarray], np.ndarray]
    h_fd_default: float
    margin_default: float
    domain_label: str


@dataclass(frozen=True)
class Certificate:
    """Outcome of a lower-bound verification run.

    Certified requires max |V| <= 1 + eps_norm and min div_fd >= c - eps_div
    over every sample; Violated requires at least one recorded violation
    exceeding its tolerance by 10x.  Everything in between is Inconclusive.
    """

    kind: str
    domain_label: str
    claimed_c: float
    n_requested: int
    n_used: int
    excluded_fraction: float
    max_norm: float
    min_div: float
    max_div: float
    h_fd: float
    eps_norm: float
    eps_div: float
    margin: float
    sampler: str
    seed: int
    verdict: str
    violations: tuple = dc_field(default_factory=tuple)

    @property
    def norm_margin(self) -> float:
        """Slack of the norm inequality: 1 - max |V|."""
        return 1.0 - self.max_norm

    @property
    def div_margin(self) -> float:
        """Slack of the divergence inequality: min div - c (negative when
        the claim fails; its magnitude is the falsification margin)."""
        return self.min_div - self.claimed_c


# ---------------------------------------------------------------------------
# tube projection field


def tube_field(spec: TubeSpec, x) -> np.ndarray:
    """Unit chord field V(x) = (x - q(x)) / a at one interior point.

    q(x) is the trailing contact point: the unique curve point at chord
    distance exactly a found walking backward along the curve from the
    nearest parameter.  |V| = 1 identically and div V = (d - 1)/a on the
    whole open tube (the chords x - q sweep the tube as translated radius
    vectors of a half-sphere of radius a, so V extends the radial field of
    a ball along the curve).

    Raises DomainError outside the tube and AmbiguousProjectionError when
    the nearest curve point is not unique (possible only for overlapping
    tubes; the trailing contact itself is unique under the curvature
    bound).
    """
    x = np.asarray(x, float)
    _, dist = _tube.nearest_point(spec, x, detect_ambiguity=True)
    if dist >= spec.a:
        raise DomainError(
            f"point at distance {dist:.6g} >= a = {spec.a:.6g} is outside the tube"
        )
    contact = _tube.trailing_points_many(spec, x[None])[0]
    return (x - contact) / spec.a


def tube_field_many(spec: TubeSpec, x: np.ndarray) -> np.ndarray:
    """Batched unit chord field; points must be interior (engine path)."""
    x = np.atleast_2d(np.asarray(x, float))
    contact = _tube.trailing_points_many(spec, x)
    return (x - contact) / spec.a


def _tube_sampler(spec: TubeSpec) -> Callable:
    """Sampler of uniform interior points of a tube with a boundary margin.

    Low-discrepancy mode: Halton points in Fermi coordinates (arc length,
    cross-section direction, radius), thinned against the Jacobian
    f = 1 - kappa_mu t_mu so the accepted points are uniform in physical
    volume; the radial range [0, a - margin] builds the margin in exactly.
    Uniform mode: seeded rejection sampling in the bounding box.
    """
    d = spec.d
    a = spec.a
    kap = spec.frame.kappa_sup()

    def sample(n: int, margin: float, mode: str, seed: int) -> np.ndarray:
        if margin >= a:
            raise UndersampledError("margin exceeds the tube radius")
        if mode == "uniform":
            return _uniform_rejection(
                n,
                _tube.bounding_box(spec),
                lambda pts: _tube.nearest_point_many(spec, pts, return_s=False)[1],
                lambda dist: a - dist,
                margin,
                seed,
            )
        halton = qmc.Halton(d=d + 2, scramble=False)
        halton.fast_forward(1)  # first point is the degenerate origin
        f_max = 1.0 + a * kap
        out = []
        got = 0
        for _ in range(64):
            m = max(int(1.5 * (n - got) * f_max), 1024)
            u = halton.random(m)
            s = u[:, 0] * spec.L
            if d == 2:
                w = np.where(u[:, 1] < 0.5, -1.0, 1.0)[:, None]
            else:
                z = ndtri(np.clip(u[:, 1:d], 1e-12, 1 - 1e-12))
                w = z / np.linalg.norm(z, axis=1, keepdims=True)
            rho = (a - margin) * u[:, d] ** (1.0 / (d - 1))
            t = rho[:, None] * w
            f = 1.0 - np.einsum(
                "nm,nm->n", spec.frame.kappa_at(s), t
            )
            keep = u[:, d + 1] * f_max < f
            if np.any(keep):
                pts = _tube.fermi_map(spec, s[keep], t[keep])
                out.append(pts)
                got += len(pts)
            if got >= n:
                break
        if got < n:
            raise UndersampledError(
                f"tube sampler produced {got} of {n} requested points"
            )
        return np.concatenate(out)[:n]

    return sample


def _tube_boundary_distance(spec: TubeSpec) -> Callable:
    def bd(x: np.ndarray) -> np.ndarray:
        _, dist = _tube.nearest_point_many(spec, x, return_s=False)
        return spec.a - dist

    return bd


def tube_field_spec(spec: TubeSpec, claimed_c: Optional[float] = None) -> FieldSpec:
    """FieldSpec of the tube unit chord field; default claim (d-1)/a.

    The sampling margin defaults to a/100: the chord direction turns fast
    near the boundary wall it trails along, so the central-difference
    truncation error grows ~ h^2 / margin^2.5 there.  At margin a/100 the
    error is ~1e-4 of the claimed constant; at margin 2 h_fd it would
    exceed the constant itself.
    """
    c = (spec.d - 1) / spec.a if claimed_c is None else float(claimed_c)
    return FieldSpec(
        kind=TUBE_PROJECTION_FIELD,
        d=spec.d,
        claimed_c=c,
        evaluate=lambda x: tube_field_many(spec, x),
        sample_interior=_tube_sampler(spec),
        boundary_distance=_tube_boundary_distance(spec),
        h_fd_default=1e-4 * spec.a,
        margin_default=1e-2 * spec.a,
        domain_label=(
            f"tube({spec.curve.name}{spec.curve.params}, a={spec.a}, d={spec.d})"
        ),
    )


# ---------------------------------------------------------------------------
# shell radial field


def _shell_sampler(spec: ShellSpec) -> Callable:
    """Uniform interior points of a shell with a boundary margin.

    Low-discrepancy mode: Halton directions (inverse-normal map) and the
    exact radial inverse CDF on [r + margin, R - margin]; no rejection.
    Uniform mode: seeded rejection in the bounding box.
    """
    d = spec.d

    def sample(n: int, margin: float, mode: str, seed: int) -> np.ndarray:
        r_eff = spec.r + margin
        R_eff = spec.R - margin
        if r_eff >= R_eff:
            raise UndersampledError("margin exceeds the shell thickness")
        if mode == "uniform":
            return _uniform_rejection(
                n,
                _shell.bounding_box(spec),
                lambda pts: np.linalg.norm(pts, axis=1),
                lambda t: np.minimum(t - spec.r, spec.R - t),
                margin,
                seed,
            )
        halton = qmc.Halton(d=d + 1, scramble=False)
        halton.fast_forward(1)
        u = halton.random(n)
        z = ndtri(np.clip(u[:, :d], 1e-12, 1 - 1e-12))
        w = z / np.linalg.norm(z, axis=1, keepdims=True)
        beta = (r_eff / R_eff) ** d
        t = R_eff * (beta + u[:, d] * (1.0 - beta)) ** (1.0 / d)
        return t[:, None] * w

    return sample


def shell_field_spec(spec: ShellSpec, claimed_c: Optional[float] = None) -> FieldSpec:
    """FieldSpec of the shell radial field; default claim d C."""
    c = _shell.shell_cheeger(spec) if claimed_c is None else float(claimed_c)
    return FieldSpec(
        kind=SHELL_RADIAL_FIELD,
        d=spec.d,
        claimed_c=c,
        evaluate=lambda x: _shell.shell_field(spec, np.atleast_2d(x)),
        sample_interior=_shell_sampler(spec),
        boundary_distance=lambda x: np.minimum(
            np.linalg.norm(np.atleast_2d(x), axis=1) - spec.r,
            spec.R - np.linalg.norm(np.atleast_2d(x), axis=1),
        ),
        h_fd_default=1e-4 * (spec.R - spec.r),
        margin_default=2e-4 * (spec.R - spec.r),
        domain_label=f"shell(r={spec.r}, R={spec.R}, d={spec.d})",
    )


# ---------------------------------------------------------------------------
# tabulated fields


def save_tabulated_field(path, origin, spacing, values: np.ndarray):
    """Write a grid-sampled field: header (dims, spacing, origin) + rows of
    field components in C order."""
    values = np.asarray(values, float)
    d = values.shape[-1]
    shape = values.shape[:-1]
    if len(shape) != d:
        raise DomainError("tabulated field must be a d-grid of d-vectors")
    with open(path, "w") as fh:
        fh.write("# cheegerkit field v1\n")
        fh.write(f"d = {d}\n")
        fh.write("shape = " + " ".join(str(s) for s in shape) + "\n")
        fh.write("spacing = " + " ".join(repr(float(s)) for s in np.broadcast_to(spacing, (d,))) + "\n")
        fh.write("origin = " + " ".join(repr(float(o)) for o in np.broadcast_to(origin, (d,))) + "\n")
        fh.write("data:\n")
        for row in values.reshape(-1, d):
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def load_tabulated_field(path):
    """Read a grid field written by save_tabulated_field.

    Returns (origin, spacing, values) with values of shape (*grid, d).
    """
    header = {}
    rows = []
    in_data = False
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if in_data:
                rows.append([float(tok) for tok in line.split()])
            elif line == "data:":
                in_data = True
            else:
                key, _, val = line.partition("=")
                header[key.strip()] = val.strip()
    try:
        d = int(header["d"])
        shape = tuple(int(tok) for tok in header["shape"].split())
        spacing = np.array([float(tok) for tok in header["spacing"].split()])
        origin = np.array([float(tok) for tok in header["origin"].split()])
    except KeyError as exc:
        raise DomainError(f"tabulated field header missing {exc}") from exc
    values = np.asarray(rows, float)
    if values.shape != (int(np.prod(shape)), d):
        raise DomainError(
            f"tabulated field data shape {values.shape} does not match header"
        )
    return origin, spacing, values.reshape(*shape, d)


def tabulated_field_spec(
    domain: FieldSpec,
    origin,
    spacing,
    values: np.ndarray,
    claimed_c: float,
) -> FieldSpec:
    """Certificate candidate from a grid-sampled field over an existing
    domain (reuses the domain adapters of a tube/shell FieldSpec).

    Multilinear interpolation between grid nodes; linear extrapolation
    outside the grid (the grid should cover the domain).
    """
    values = np.asarray(values, float)
    d = values.shape[-1]
    if d != domain.d:
        raise DomainError(
            f"field dimension {d} does not match domain dimension {domain.d}"
        )
    axes = [
        origin[i] + spacing[i] * np.arange(values.shape[i]) for i in range(d)
    ]
    interp = RegularGridInterpolator(
        axes, values, method="linear", bounds_error=False, fill_value=None
    )
    return FieldSpec(
        kind=TABULATED_FIELD,
        d=d,
        claimed_c=float(claimed_c),
        evaluate=lambda x: np.atleast_2d(interp(np.atleast_2d(x))),
        sample_interior=domain.sample_interior,
        boundary_distance=domain.boundary_distance,
        h_fd_default=domain.h_fd_default,
        margin_default=domain.margin_default,
        domain_label=domain.domain_label,
    )


# ---------------------------------------------------------------------------
# engine


def _uniform_rejection(n, box, dist_info, boundary_from_info, margin, seed):
    """Seeded uniform rejection sampler with explicit margin filtering.

    Draws box-uniform candidates until n interior points are found, then
    keeps the ones farther than `margin` from the boundary; raises the
    undersampled error when fewer than n/2 survive.
    """
    lo, hi = box
    rng = np.random.default_rng(seed)
    interior = []
    got = 0
    for _ in range(1024):
        pts = lo + (hi - lo) * rng.random((max(4 * (n - got), 1024), len(lo)))
        info = dist_info(pts)
        bdist = boundary_from_info(info)
        inside = bdist > 0.0
        if np.any(inside):
            interior.append((pts[inside], bdist[inside]))
            got += int(inside.sum())
        if got >= n:
            break
    if got < n:
        raise UndersampledError(
            f"uniform sampler produced {got} of {n} interior points"
        )
    pts = np.concatenate([p for p, _ in interior])[:n]
    bdist = np.concatenate([b for _, b in interior])[:n]
    keep = bdist > margin
    if int(keep.sum()) < n // 2:
        raise UndersampledError(
            f"only {int(keep.sum())} of {n} samples admissible after margin filtering"
        )
    return pts[keep]


def _divergence_many(field: FieldSpec, x: np.ndarray, h: float):
    """Central-difference divergence at a batch of interior points."""
    div = np.zeros(len(x))
    for i in range(field.d):
        e = np.zeros(field.d)
        e[i] = h
        div += (field.evaluate(x + e)[:, i] - field.evaluate(x - e)[:, i]) / (2 * h)
    return div


def numeric_divergence(field: FieldSpec, x, h_fd: Optional[float] = None) -> float:
    """Central-difference divergence at one point, O(h^2) for smooth fields.

    Raises StencilError when the +-h_fd stencil leaves the domain.
    """
    x = np.asarray(x, float)
    if x.shape != (field.d,):
        raise DomainError(f"point must have dimension {field.d}")
    h = field.h_fd_default if h_fd is None else float(h_fd)
    if h <= 0:
        raise DomainError("finite-difference step must be positive")
    if float(field.boundary_distance(x[None])[0]) <= h:
        raise StencilError(
            "finite-difference stencil leaves the domain at this point"
        )
    return float(_divergence_many(field, x[None], h)[0])


def certify_lower_bound(
    field: FieldSpec,
    sampler: str = "halton",
    n: int = 100_000,
    h_fd: Optional[float] = None,
    eps_norm: float = 1e-9,
    eps_div: Optional[float] = None,
    seed: int = 0,
    margin: Optional[float] = None,
) -> Certificate:
    """Sample-based verification of |V| <= 1 and div V >= c on the domain.

    Draws n interior points at a boundary margin of at least 2 h_fd (so
    every divergence stencil stays inside), evaluates the field norm and
    the central-difference divergence at each, and fills a Certificate.
    Deterministic given (field, sampler, n, tolerances, seed).

    The margin defaults to the larger of 2 h_fd and the field's own
    margin_default (fields whose finite-difference error blows up at the
    boundary set a larger exclusion layer; the Certificate records the
    value actually used).  eps_div defaults to 1e-3 * c; eps_norm to 1e-9;
    h_fd to the field's domain-scaled default (1e-4 times the tube radius
    / shell thickness).
    """
    if n < 1000:
        raise TooFewSamplesError(f"need at least 1000 samples, got {n}")
    if sampler not in ("halton", "uniform"):
        raise ConfigurationError(
            f"unknown sampler {sampler!r}; use halton or uniform"
        )
    c = field.claimed_c
    h = field.h_fd_default if h_fd is None else float(h_fd)
    if h <= 0:
        raise DomainError("finite-difference step must be positive")
    e_div = abs(1e-3 * c) if eps_div is None else float(eps_div)
    if margin is None:
        margin = max(2.0 * h, field.margin_default)
    else:
        margin = max(float(margin), 2.0 * h)

    pts = field.sample_interior(n, margin, sampler, seed)
    n_used = len(pts)

    V = field.evaluate(pts)
    norms = np.linalg.norm(V, axis=1)
    div = _divergence_many(field, pts, h)

    viol = []
    bad_norm = norms > 1.0 + eps_norm
    for i in np.flatnonzero(bad_norm)[:_MAX_RECORDED_VIOLATIONS]:
        viol.append(("norm", float(norms[i] - 1.0), tuple(map(float, pts[i]))))
    bad_div = div < c - e_div
    for i in np.flatnonzero(bad_div)[:_MAX_RECORDED_VIOLATIONS]:
        viol.append(("div", float(c - div[i]), tuple(map(float, pts[i]))))

    if not viol:
        verdict = CERTIFIED
    else:
        clear = any(
            (kind == "norm" and mag >= _VIOLATION_FACTOR * eps_norm)
            or (kind == "div" and mag >= _VIOLATION_FACTOR * e_div)
            for kind, mag, _ in viol
        )
        verdict = VIOLATED if clear else INCONCLUSIVE

    return Certificate(
        kind=field.kind,
        domain_label=field.domain_label,
        claimed_c=c,
        n_requested=n,
        n_used=n_used,
        excluded_fraction=1.0 - n_used / n,
        max_norm=float(norms.max()),
        min_div=float(div.min()),
        max_div=float(div.max()),
        h_fd=h,
        eps_norm=eps_norm,
        eps_div=e_div,
        margin=margin,
        sampler=sampler,
        seed=seed,
        verdict=verdict,
        violations=tuple(viol[:_MAX_RECORDED_VIOLATIONS]),
    )
