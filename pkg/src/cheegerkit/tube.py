"""Tubular neighbourhoods of closed curves and their closed-form Cheeger data.

The open tube of radius a around a closed curve Gamma in R^d is
Omega_a = {x : dist(x, Gamma) < a}.  When the tube does not overlap itself
(sufficient condition: a * sup kappa < 1) its volume is |Gamma| |D_a| with
|D_a| the (d-1)-ball cross-section, its boundary area is (d-1)/a times the
volume, and its Cheeger constant is exactly (d-1)/a.  This module provides
those closed forms, a sampled non-overlap check, Fermi coordinates, a fast
nearest-point/membership oracle, and a Monte Carlo volume estimator used to
cross-check the volume identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import curves as _curves
from .curves import ArcLengthTable, CurveSpec, FrameField
from .errors import (
    AmbiguousProjectionError,
    DomainError,
    HypothesisViolatedError,
    InvalidGeometryError,
    NumericError,
    TooFewSamplesError,
)

__all__ = [
    "TubeSpec",
    "TubeGeometry",
    "OverlapStatus",
    "CERTIFIED_SUFFICIENT",
    "SUFFICIENT_FAILS_GLOBAL_PASSED",
    "OVERLAP_DETECTED",
    "build_tube",
    "unit_ball_volume",
    "check_nonoverlap",
    "fermi_map",
    "jacobian",
    "tube_volume",
    "tube_boundary_area",
    "tube_cheeger",
    "unbounded_segment_upper_bound",
    "nearest_point",
    "nearest_point_many",
    "foot_points_many",
    "trailing_points_many",
    "membership",
    "membership_many",
    "bounding_box",
    "montecarlo_volume",
]

CERTIFIED_SUFFICIENT = "CertifiedSufficient"
SUFFICIENT_FAILS_GLOBAL_PASSED = "SufficientFails_GlobalPassed"
OVERLAP_DETECTED = "OverlapDetected"


def unit_ball_volume(m: int) -> float:
    """Volume of the m-dimensional unit ball, pi^(m/2) / Gamma(m/2 + 1).

    Evaluated in log space so large m stays finite and accurate.
    """
    if m <= 0:
        raise DomainError(f"ball dimension must be >= 1, got {m}")
    return math.exp(0.5 * m * math.log(math.pi) - math.lgamma(0.5 * m + 1.0))


@dataclass(frozen=True)
class OverlapStatus:
    """Outcome of the non-overlap check for a tube.

    sufficient_value is a * max kappa over the frame grid (a grid lower bound
    of a * sup kappa); min_separation is the smallest Euclidean distance found
    between curve samples whose arc separation exceeds 2a (inf when no pair
    qualifies).  verdict is CertifiedSufficient exactly when the sufficient
    condition holds and the global sampling found no double point.
    """

    sufficient_value: float
    verdict: str
    min_separation: float
    n_samples: int


@dataclass(frozen=True)
class TubeSpec:
    """Tube of radius a > 0 around a closed curve, with its frame data.

    Carries the arc-length table, Bishop frame, overlap status, and a dense
    point cache for nearest-point queries.  Build with build_tube().
    """

    curve: CurveSpec
    table: ArcLengthTable
    frame: FrameField
    a: float
    overlap: OverlapStatus
    dense_u: np.ndarray
    dense_pts: np.ndarray

    @property
    def d(self) -> int:
        return self.curve.d

    @property
    def L(self) -> float:
        return self.table.L


@dataclass(frozen=True)
class TubeGeometry:
    """Closed-form geometric quantities of a valid tube."""

    curve_length: float
    cross_section: float
    volume: float
    boundary_area: float
    cheeger: float


def build_tube(
    curve: CurveSpec,
    a: float,
    n_frame: int = 4096,
    n_dense: int = 2048,
    overlap_samples: int = 1024,
    tol: float = 1e-10,
) -> TubeSpec:
    """Construct a TubeSpec: arc length, frame, overlap status, point cache."""
    if a <= 0:
        raise DomainError(f"tube radius must be positive, got {a}")
    table = _curves.arc_length(curve, tol=tol)
    frame = _curves.bishop_frame(curve, table, n_frame)
    dense_u = np.arange(n_dense) / n_dense
    dense_pts = curve.p(dense_u)
    spec = TubeSpec(
        curve=curve,
        table=table,
        frame=frame,
        a=a,
        overlap=OverlapStatus(0.0, CERTIFIED_SUFFICIENT, np.inf, 0),
        dense_u=dense_u,
        dense_pts=dense_pts,
    )
    return replace(spec, overlap=check_nonoverlap(spec, overlap_samples))


def check_nonoverlap(spec: TubeSpec, n_samples: int = 1024) -> OverlapStatus:
    """Sampled non-overlap verdict for the tube.

    Computes a * max kappa from the frame grid and scans sample pairs for
    near-critical chords: chords nearly perpendicular to the tangents at
    both endpoints.  A critical chord shorter than 2a is a genuine double
    point of the tube (its midpoint lies on the normal disks of both
    endpoints), so min_separation records the shortest near-critical chord
    found and any value <= 2a flags overlap.  Pairs at arc separation below
    pi / max kappa are skipped: a curvature comparison keeps the
    chord-tangent angle under 90 degrees on that band, so no critical pair
    exists there.  Passing the scan is necessary evidence only (sampling,
    not a proof).
    """
    a, L = spec.a, spec.L
    kappa = spec.frame.kappa_sup()
    sufficient = a * kappa
    ds = L / n_samples
    s = np.arange(n_samples) * ds
    u = spec.table.u_of_s(s)
    pts = spec.curve.p(u)
    dp = spec.curve.dp(u)
    tang = dp / np.linalg.norm(dp, axis=-1, keepdims=True)

    arc = np.abs(s[None, :] - s[:, None])
    arc = np.minimum(arc, L - arc)
    diff = pts[None, :, :] - pts[:, None, :]
    dist = np.linalg.norm(diff, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        chord = diff / dist[:, :, None]
        g_i = np.einsum("ijd,id->ij", chord, tang)
        g_j = np.einsum("ijd,jd->ij", chord, tang)
        # a true critical pair within half a grid cell of (i, j) keeps both
        # sampled alignments below this (rate of change <= kappa + 2/dist)
        tol = ds * (kappa + 1.0 / dist)
    band = max(np.pi / kappa - 2.0 * ds, 0.0) if kappa > 0 else np.inf
    qualify = (
        (arc >= band)
        & (dist > 0)
        & (np.abs(g_i) <= tol)
        & (np.abs(g_j) <= tol)
    )
    if np.any(qualify):
        min_sep = float(dist[qualify].min())
    else:
        min_sep = np.inf
    if min_sep <= 2.0 * a:
        verdict = OVERLAP_DETECTED
    elif sufficient < 1.0:
        verdict = CERTIFIED_SUFFICIENT
    else:
        verdict = SUFFICIENT_FAILS_GLOBAL_PASSED
    return OverlapStatus(
        sufficient_value=float(sufficient),
        verdict=verdict,
        min_separation=min_sep,
        n_samples=n_samples,
    )


def _require_valid(spec: TubeSpec, exc):
    if spec.overlap.verdict == OVERLAP_DETECTED:
        raise exc(
            "tube overlaps itself (double point at separation "
            f"{spec.overlap.min_separation:.6g} <= 2a = {2 * spec.a:.6g})"
        )


def fermi_map(spec: TubeSpec, s, t) -> np.ndarray:
    """Fermi coordinates to ambient space: phi(s, t) = gamma(s) + t_mu e_mu(s).

    t is a (d-1)-vector of normal coordinates with |t| < a; batched inputs
    (s of shape (n,), t of shape (n, d-1)) are supported.
    """
    t = np.asarray(t, float)
    scalar = t.ndim == 1
    t2 = np.atleast_2d(t)
    if t2.shape[-1] != spec.d - 1:
        raise DomainError(f"t must have {spec.d - 1} components")
    if np.any(np.linalg.norm(t2, axis=-1) >= spec.a):
        raise DomainError("normal offset |t| must be < tube radius a")
    frames = spec.frame.frame_at(np.atleast_1d(np.asarray(s, float)))
    pts = _curves.point_at(spec.curve, spec.table, np.atleast_1d(np.asarray(s, float)))
    out = pts + np.einsum("nm,nmi->ni", t2, frames[:, 1:, :])
    return out[0] if scalar else out


def jacobian(spec: TubeSpec, s, t) -> np.ndarray:
    """Fermi-coordinate Jacobian f(s, t) = 1 - kappa_mu(s) t_mu.

    Strictly positive throughout the tube whenever a * sup kappa < 1.
    """
    t = np.asarray(t, float)
    scalar = t.ndim == 1
    t2 = np.atleast_2d(t)
    if t2.shape[-1] != spec.d - 1:
        raise DomainError(f"t must have {spec.d - 1} components")
    if np.any(np.linalg.norm(t2, axis=-1) >= spec.a):
        raise DomainError("normal offset |t| must be < tube radius a")
    kap = spec.frame.kappa_at(np.atleast_1d(np.asarray(s, float)))
    f = 1.0 - np.einsum("nm,nm->n", kap, t2)
    return float(f[0]) if scalar else f


def tube_volume(spec: TubeSpec) -> float:
    """|Omega_a| = |Gamma| * |D_a|, the length times the cross-section ball."""
    _require_valid(spec, InvalidGeometryError)
    d = spec.d
    return spec.L * unit_ball_volume(d - 1) * spec.a ** (d - 1)


def tube_boundary_area(spec: TubeSpec) -> float:
    """|boundary Omega_a| = (d-1)/a * |Omega_a|."""
    return (spec.d - 1) / spec.a * tube_volume(spec)


def tube_cheeger(spec: TubeSpec) -> float:
    """Closed-form Cheeger constant h(Omega_a) = (d-1)/a (exact).

    Valid only for non-overlapping tubes; an OverlapDetected verdict voids
    the formula's hypotheses and raises HypothesisViolatedError.
    """
    _require_valid(spec, HypothesisViolatedError)
    return (spec.d - 1) / spec.a


def tube_geometry(spec: TubeSpec) -> TubeGeometry:
    """Bundle of the closed-form quantities for reporting."""
    vol = tube_volume(spec)
    return TubeGeometry(
        curve_length=spec.L,
        cross_section=unit_ball_volume(spec.d - 1) * spec.a ** (spec.d - 1),
        volume=vol,
        boundary_area=(spec.d - 1) / spec.a * vol,
        cheeger=tube_cheeger(spec),
    )


def unbounded_segment_upper_bound(segment_length: float, a: float, d: int) -> float:
    """Cheeger upper bound of a straight finite tube segment of length |I|:

        ((d-1)/a |I| |D_a| + 2 |D_a|) / (|I| |D_a|) = (d-1)/a + 2/|I|,

    strictly decreasing in |I| with limit (d-1)/a.
    """
    if segment_length <= 0 or a <= 0 or d < 2:
        raise DomainError("segment length and radius must be positive, d >= 2")
    return (d - 1) / a + 2.0 / segment_length


# ---------------------------------------------------------------------------
# nearest point / membership

_CHUNK = 16384


def _coarse_nearest(spec: TubeSpec, x: np.ndarray) -> np.ndarray:
    """Index of the nearest dense curve sample per query point (chunked)."""
    P = spec.dense_pts
    pp = np.einsum("ij,ij->i", P, P)
    idx = np.empty(len(x), dtype=np.int64)
    for lo in range(0, len(x), _CHUNK):
        blk = x[lo : lo + _CHUNK]
        d2 = pp[None, :] - 2.0 * (blk @ P.T)
        idx[lo : lo + _CHUNK] = np.argmin(d2, axis=1)
    return idx


def _refine_u(spec: TubeSpec, x: np.ndarray, u0: np.ndarray) -> np.ndarray:
    """Newton refinement of the squared-distance stationarity g(u) = 0.

    g(u) = (p(u) - x) . p'(u),  g'(u) = |p'|^2 + (p - x) . p''.
    Starts inside the bracketing coarse cell; non-converged entries (rare,
    g' near zero) fall back to bisection on the bracket.
    """
    curve = spec.curve
    m = len(spec.dense_u)
    lo = (u0 - 1.5 / m)
    hi = (u0 + 1.5 / m)
    u = u0.copy()

    def g_and_dg(u_arr):
        p = curve.p(u_arr)
        dp = curve.dp(u_arr)
        ddp = curve.ddp(u_arr)
        diff = p - x
        g = np.einsum("ij,ij->i", diff, dp)
        dg = np.einsum("ij,ij->i", dp, dp) + np.einsum("ij,ij->i", diff, ddp)
        return g, dg

    for _ in range(10):
        g, dg = g_and_dg(u)
        step = np.where(np.abs(dg) > 1e-300, g / dg, 0.0)
        u = np.clip(u - step, lo, hi)
    g, dg = g_and_dg(u)
    speed2 = np.einsum("ij,ij->i", curve.dp(u), curve.dp(u))
    bad = np.abs(g) > 1e-9 * np.sqrt(speed2) * np.maximum(
        np.linalg.norm(x - curve.p(u), axis=1), 1e-30
    )
    if np.any(bad):
        ul, uh = lo[bad].copy(), hi[bad].copy()
        xb = x[bad]
        gl = np.einsum("ij,ij->i", curve.p(ul) - xb, curve.dp(ul))
        for _ in range(60):
            um = 0.5 * (ul + uh)
            gm = np.einsum("ij,ij->i", curve.p(um) - xb, curve.dp(um))
            left = gl * gm <= 0
            uh = np.where(left, um, uh)
            ul = np.where(left, ul, um)
            gl = np.where(left, gl, gm)
        u[bad] = 0.5 * (ul + uh)
    return u


def _nearest_u(spec: TubeSpec, x: np.ndarray):
    """Nearest curve parameter u in [0,1) and distance for a point batch."""
    x = np.atleast_2d(np.asarray(x, float))
    if x.shape[1] != spec.d:
        raise DomainError(f"points must have dimension {spec.d}")
    idx = _coarse_nearest(spec, x)
    # the flat minimizer may sit in a neighbouring cell when the coarse
    # argmin lands on a cell edge; the clamp window of 1.5 cells covers it
    u = np.mod(_refine_u(spec, x, spec.dense_u[idx]), 1.0)
    dist = np.linalg.norm(x - spec.curve.p(u), axis=1)
    return u, dist


def nearest_point_many(spec: TubeSpec, x: np.ndarray, return_s: bool = True):
    """Nearest curve parameter and distance for a batch of points.

    Returns (s_star, dist) arrays; with return_s=False s_star is skipped
    (hot paths like membership need only the distance).  Coarse scan over the
    dense sample cache brackets the minimizer, Newton polishes it to machine
    accuracy (far below the 1e-10 * L contract).
    """
    u, dist = _nearest_u(spec, x)
    if return_s:
        return spec.table.s_of_u(u), dist
    return None, dist


def foot_points_many(spec: TubeSpec, x: np.ndarray):
    """Nearest points on the curve, gamma(s*(x)), with distances.

    Skips the u -> s conversion that nearest_point_many performs (callers
    that only need the foot point itself save the quadrature).
    """
    u, dist = _nearest_u(spec, x)
    return spec.curve.p(u), dist


_TRAIL_PROBE_ARC = 1.0 / 6.0  # probe spacing in units of a (arc length)
_TRAIL_MAX_PROBES = 24  # total probed arc 4a; contact is within ~2a
_TRAIL_BISECT_ITERS = 52


def trailing_points_many(spec: TubeSpec, x: np.ndarray):
    """Curve points at chord distance exactly a behind a batch of points.

    For interior x (dist(x, Gamma) < a), walking backward along the curve
    from the nearest parameter, |x - gamma| grows from dist(x, Gamma)
    through a; the first crossing is the unique contact point whose chord
    x - gamma has positive tangent alignment.  The unit chords (x - q)/a
    form the divergence-constant field used by the tube certificate.

    Bracketing probes step a/6 of arc at the local speed; the contact lies
    within arc 2a for any tube satisfying the curvature bound (the probe
    budget of 4a has slack 2x).  Bisection then resolves u to machine
    accuracy; no derivative conditioning enters, so the solve stays exact
    even where the chord is nearly tangent (points close to the boundary).
    """
    x = np.atleast_2d(np.asarray(x, float))
    u_star, dist = _nearest_u(spec, x)
    a = spec.a
    if np.any(dist >= a):
        raise DomainError(
            "trailing contact is defined for interior points only"
        )
    p = spec.curve.p

    def gap(u, pts):
        diff = pts - p(np.mod(u, 1.0))
        return np.einsum("nd,nd->n", diff, diff) - a * a

    # backward probes; hi tracks the last parameter with gap < 0 per lane
    hi = u_star.copy()
    lo = u_star.copy()
    done = np.zeros(len(x), bool)
    for _ in range(_TRAIL_MAX_PROBES):
        act = np.flatnonzero(~done)
        if act.size == 0:
            break
        speed = spec.table.speed(np.mod(lo[act], 1.0))
        probe = lo[act] - _TRAIL_PROBE_ARC * a / speed
        crossed = gap(probe, x[act]) >= 0.0
        hi[act[~crossed]] = probe[~crossed]
        lo[act] = probe
        done[act[crossed]] = True
    if not done.all():
        raise NumericError(
            "no contact point within the probe window; the curvature bound "
            "of the tube is likely violated"
        )
    for _ in range(_TRAIL_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        neg = gap(mid, x) < 0.0
        hi = np.where(neg, mid, hi)
        lo = np.where(neg, lo, mid)
    u_root = np.mod(0.5 * (lo + hi), 1.0)
    return p(u_root)


def nearest_point(spec: TubeSpec, x, detect_ambiguity: bool = False):
    """Arc length s* minimizing |x - gamma(s)| and the attained distance.

    With detect_ambiguity=True, raises AmbiguousProjectionError when a curve
    sample at arc separation > min(2a, L/3) from s* comes within refinement
    tolerance of the minimal distance (two essentially tied projections; only
    possible when the tube overlaps itself).
    """
    x = np.asarray(x, float)
    if x.shape != (spec.d,):
        raise DomainError(f"point must have dimension {spec.d}")
    if not np.all(np.isfinite(x)):
        raise DomainError("point must be finite")
    s, dist = nearest_point_many(spec, x[None])
    s0, d0 = float(s[0]), float(dist[0])
    if detect_ambiguity:
        L = spec.L
        s_grid = spec.table.s_of_u(spec.dense_u)
        arc = np.abs(s_grid - s0)
        arc = np.minimum(arc, L - arc)
        far = arc > min(2.0 * spec.a, L / 3.0)
        if np.any(far):
            d_far = np.linalg.norm(spec.dense_pts[far] - x, axis=1).min()
            if d_far <= d0 + 1e-9 * max(spec.a, 1.0):
                raise AmbiguousProjectionError(
                    f"two nearest-point candidates at distance ~{d0:.6g}; "
                    "tube overlaps itself"
                )
    return s0, d0


def membership(spec: TubeSpec, x) -> bool:
    """True iff dist(x, Gamma) < a (the tube is open)."""
    x = np.asarray(x, float)
    if x.shape != (spec.d,):
        raise DomainError(f"point must have dimension {spec.d}")
    _, dist = nearest_point_many(spec, x[None], return_s=False)
    return bool(dist[0] < spec.a)


def membership_many(spec: TubeSpec, x: np.ndarray) -> np.ndarray:
    """Vectorized membership for rasterization and Monte Carlo."""
    _, dist = nearest_point_many(spec, np.atleast_2d(x), return_s=False)
    return dist < spec.a


def bounding_box(spec: TubeSpec):
    """Axis-aligned box of the curve samples inflated by a (conservative)."""
    lo = spec.dense_pts.min(axis=0) - spec.a
    hi = spec.dense_pts.max(axis=0) + spec.a
    return lo, hi


def montecarlo_volume(spec: TubeSpec, n: int, seed: int = 0):
    """Rejection-sampling estimate of the tube volume with standard error.

    Uniform samples in the bounding box; unbiased estimator
    box_volume * (hits / n), standard error box_volume * sqrt(p(1-p)/n).
    Deterministic for a fixed seed (single stream, fixed chunking).
    """
    if n < 1000:
        raise TooFewSamplesError(f"need at least 1000 samples, got {n}")
    lo, hi = bounding_box(spec)
    box_vol = float(np.prod(hi - lo))
    rng = np.random.default_rng(seed)
    hits = 0
    for start in range(0, n, _CHUNK):
        m = min(_CHUNK, n - start)
        pts = lo + (hi - lo) * rng.random((m, spec.d))
        hits += int(membership_many(spec, pts).sum())
    p = hits / n
    est = box_vol * p
    se = box_vol * math.sqrt(max(p * (1.0 - p), 0.0) / n)
    return est, se
