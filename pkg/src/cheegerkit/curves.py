"""Closed curves in R^d: arc length, tangent/curvature, parallel frames.

A curve is given by a periodic parametrization p(u), u in [0,1), either as a
named analytic preset (circle, ellipse, trefoil) with exact derivatives or as
a dense sample table interpolated by a periodic cubic spline.  All downstream
geometry works in arc-length parametrization gamma(s) = p(u(s)), which this
module provides together with the parallel-transport (Bishop) frame
e_1 = gamma', e_2, ..., e_d and its curvature components
kappa_mu = gamma'' . e_mu.  The Bishop frame avoids the Frenet frame's
nonvanishing-curvature requirement and is the natural frame for tube
coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

from .errors import (
    ClosureError,
    DegenerateCurveError,
    DomainError,
    IntegrationFailureError,
    NumericError,
)

__all__ = [
    "CurveSpec",
    "ArcLengthTable",
    "FrameField",
    "circle",
    "ellipse",
    "trefoil",
    "preset",
    "curve_from_table",
    "load_curve_table",
    "arc_length",
    "point_at",
    "velocity_at",
    "acceleration_at",
    "tangent_and_curvature",
    "bishop_frame",
]

# Nodes/weights of the 10-point Gauss-Legendre rule on [0,1]; used for all
# per-segment speed integrals (degree-19 exactness, ample for smooth speeds).
_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


@dataclass(frozen=True)
class CurveSpec:
    """A closed parametric curve in R^d.

    p, dp, ddp map an array of parameters u (shape (n,)) to points /
    derivatives of shape (n, d).  For presets the derivatives are analytic;
    for tabulated curves they are derivatives of the periodic cubic spline.
    """

    d: int
    p: Callable[[np.ndarray], np.ndarray]
    dp: Callable[[np.ndarray], np.ndarray]
    ddp: Callable[[np.ndarray], np.ndarray]
    name: str = "custom"
    params: tuple = ()
    n_samples: int = 2048

    def __post_init__(self):
        if self.d < 2:
            raise DomainError(f"curve dimension must be >= 2, got {self.d}")


def _plane_embed(xy: np.ndarray, d: int) -> np.ndarray:
    """Embed an (n,2) planar array into the first two coordinates of R^d."""
    out = np.zeros(xy.shape[:-1] + (d,))
    out[..., :2] = xy
    return out


def circle(rho: float, d: int = 2) -> CurveSpec:
    """Circle of radius rho in the (x1,x2) coordinate plane of R^d."""
    if rho <= 0:
        raise DomainError(f"circle radius must be positive, got {rho}")
    tau = 2.0 * np.pi

    def p(u):
        th = tau * np.asarray(u, float)
        return _plane_embed(np.stack([rho * np.cos(th), rho * np.sin(th)], -1), d)

    def dp(u):
        th = tau * np.asarray(u, float)
        return _plane_embed(
            tau * np.stack([-rho * np.sin(th), rho * np.cos(th)], -1), d
        )

    def ddp(u):
        th = tau * np.asarray(u, float)
        return _plane_embed(
            -(tau**2) * np.stack([rho * np.cos(th), rho * np.sin(th)], -1), d
        )

    return CurveSpec(d=d, p=p, dp=dp, ddp=ddp, name="circle", params=(rho,))


def ellipse(a: float, b: float, d: int = 2) -> CurveSpec:
    """Ellipse with semi-axes (a, b) in the (x1,x2) plane of R^d."""
    if a <= 0 or b <= 0:
        raise DomainError(f"ellipse semi-axes must be positive, got ({a}, {b})")
    tau = 2.0 * np.pi

    def p(u):
        th = tau * np.asarray(u, float)
        return _plane_embed(np.stack([a * np.cos(th), b * np.sin(th)], -1), d)

    def dp(u):
        th = tau * np.asarray(u, float)
        return _plane_embed(tau * np.stack([-a * np.sin(th), b * np.cos(th)], -1), d)

    def ddp(u):
        th = tau * np.asarray(u, float)
        return _plane_embed(
            -(tau**2) * np.stack([a * np.cos(th), b * np.sin(th)], -1), d
        )

    return CurveSpec(d=d, p=p, dp=dp, ddp=ddp, name="ellipse", params=(a, b))


def trefoil() -> CurveSpec:
    """Trefoil knot (2,3 torus knot) in R^3.

    p(theta) = ((2+cos 3t) cos 2t, (2+cos 3t) sin 2t, sin 3t), t = 2 pi u.
    """
    tau = 2.0 * np.pi

    def p(u):
        t = tau * np.asarray(u, float)
        r = 2.0 + np.cos(3 * t)
        return np.stack([r * np.cos(2 * t), r * np.sin(2 * t), np.sin(3 * t)], -1)

    def dp(u):
        t = tau * np.asarray(u, float)
        r = 2.0 + np.cos(3 * t)
        dr = -3.0 * np.sin(3 * t)
        x = dr * np.cos(2 * t) - 2.0 * r * np.sin(2 * t)
        y = dr * np.sin(2 * t) + 2.0 * r * np.cos(2 * t)
        z = 3.0 * np.cos(3 * t)
        return tau * np.stack([x, y, z], -1)

    def ddp(u):
        t = tau * np.asarray(u, float)
        r = 2.0 + np.cos(3 * t)
        dr = -3.0 * np.sin(3 * t)
        ddr = -9.0 * np.cos(3 * t)
        x = ddr * np.cos(2 * t) - 4.0 * dr * np.sin(2 * t) - 4.0 * r * np.cos(2 * t)
        y = ddr * np.sin(2 * t) + 4.0 * dr * np.cos(2 * t) - 4.0 * r * np.sin(2 * t)
        z = -9.0 * np.sin(3 * t)
        return tau**2 * np.stack([x, y, z], -1)

    return CurveSpec(d=3, p=p, dp=dp, ddp=ddp, name="trefoil", params=())


_PRESETS = {"circle": circle, "ellipse": ellipse, "trefoil": trefoil}


def preset(name: str, params: tuple = (), d: Optional[int] = None) -> CurveSpec:
    """Build a preset curve by name; used by the CLI."""
    if name not in _PRESETS:
        raise DomainError(
            f"unknown curve preset {name!r}; choose from {sorted(_PRESETS)}"
        )
    kwargs = {} if d is None else {"d": d}
    if name == "trefoil":
        if d not in (None, 3):
            raise DomainError("trefoil preset is a curve in R^3")
        return trefoil()
    return _PRESETS[name](*params, **kwargs)


def curve_from_table(u: np.ndarray, points: np.ndarray, closure_tol: float = 1e-6) -> CurveSpec:
    """Curve from samples (u_i, p(u_i)) with periodic cubic interpolation.

    The table must cover [0,1); a closing row at u=1 is appended (periodic
    splines need the endpoint repeated).  If the table already contains u=1
    its point must agree with the u=0 point to closure_tol relative to the
    curve diameter, otherwise the curve does not close.
    """
    u = np.asarray(u, float)
    points = np.atleast_2d(np.asarray(points, float))
    if u.ndim != 1 or points.shape[0] != u.size:
        raise DomainError("table needs matching u and point rows")
    if points.shape[0] < 8:
        raise DomainError("tabulated curve needs at least 8 samples")
    if not np.all(np.isfinite(u)) or not np.all(np.isfinite(points)):
        raise NumericError("non-finite values in curve table")
    order = np.argsort(u)
    u, points = u[order], points[order]
    if u[0] != 0.0:
        raise DomainError("curve table must start at u = 0")
    diam = float(np.linalg.norm(points.max(0) - points.min(0)))
    if np.isclose(u[-1], 1.0):
        if np.linalg.norm(points[-1] - points[0]) > closure_tol * max(diam, 1.0):
            raise ClosureError("curve table does not close: p(0) != p(1)")
        u, points = u[:-1], points[:-1]
    if np.any(np.diff(u) <= 0):
        raise DomainError("curve table parameters must be strictly increasing")
    u_ext = np.r_[u, 1.0]
    p_ext = np.vstack([points, points[:1]])
    sp = CubicSpline(u_ext, p_ext, bc_type="periodic")
    d = points.shape[1]

    def wrap(f):
        return lambda uu: f(np.mod(np.asarray(uu, float), 1.0))

    return CurveSpec(
        d=d,
        p=wrap(sp),
        dp=wrap(sp.derivative(1)),
        ddp=wrap(sp.derivative(2)),
        name="table",
        params=(points.shape[0],),
        n_samples=max(2048, 2 * points.shape[0]),
    )


def load_curve_table(path) -> CurveSpec:
    """Read a plain-text curve table: one sample per line, 'u x_1 ... x_d',
    '#' starts a comment."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            rows.append([float(tok) for tok in line.split()])
    if not rows:
        raise DomainError(f"no samples found in curve table {path}")
    arr = np.asarray(rows, float)
    if arr.shape[1] < 3:
        raise DomainError("curve table rows need u plus at least 2 coordinates")
    return curve_from_table(arr[:, 0], arr[:, 1:])


# ---------------------------------------------------------------------------
# arc length


@dataclass(frozen=True)
class ArcLengthTable:
    """Arc-length reparametrization data for a curve.

    s_grid[i] = s(u_grid[i]) on a uniform u grid, with s strictly increasing,
    s(0) = 0 and s(1) = L.  u_of_s/s_of_u evaluate the map and its inverse to
    quadrature accuracy (piecewise Gauss-Legendre plus Newton refinement).
    """

    curve: CurveSpec
    L: float
    u_grid: np.ndarray
    s_grid: np.ndarray
    tol: float

    def speed(self, u: np.ndarray) -> np.ndarray:
        return np.linalg.norm(self.curve.dp(u), axis=-1)

    def s_of_u(self, u) -> np.ndarray:
        """Arc length from gamma(0) to p(u), u in [0,1]."""
        u = np.asarray(u, float)
        scalar = u.ndim == 0
        u = np.atleast_1d(u)
        idx = np.clip(np.searchsorted(self.u_grid, u, side="right") - 1, 0,
                      len(self.u_grid) - 2)
        u0 = self.u_grid[idx]
        h = u - u0
        # 10-point Gauss-Legendre on [u0, u]
        uu = u0[:, None] + h[:, None] * _GL_X[None, :]
        sp = self.speed(uu.ravel()).reshape(uu.shape)
        s = self.s_grid[idx] + h * (sp @ _GL_W)
        return s[0] if scalar else s

    def u_of_s(self, s) -> np.ndarray:
        """Inverse map; accepts any finite s and reduces it modulo L."""
        s = np.asarray(s, float)
        scalar = s.ndim == 0
        s = np.atleast_1d(s).copy()
        if not np.all(np.isfinite(s)):
            raise DomainError("arc length s must be finite")
        s = np.mod(s, self.L)
        idx = np.clip(np.searchsorted(self.s_grid, s, side="right") - 1, 0,
                      len(self.s_grid) - 2)
        # linear init inside the bracketing segment, then Newton on s(u) = s
        du = self.u_grid[idx + 1] - self.u_grid[idx]
        ds = self.s_grid[idx + 1] - self.s_grid[idx]
        u = self.u_grid[idx] + du * (s - self.s_grid[idx]) / ds
        for _ in range(3):
            u -= (self.s_of_u(u) - s) / self.speed(u)
            np.clip(u, 0.0, 1.0, out=u)
        return u[0] if scalar else u


def arc_length(curve: CurveSpec, tol: float = 1e-10) -> ArcLengthTable:
    """Arc-length table with L accurate to relative tolerance tol.

    The composite Gauss-Legendre grid is refined (doubled) until L changes by
    less than tol*L, then cross-checked against adaptive quadrature.  Raises
    DegenerateCurveError if the speed vanishes anywhere on the refined grid.
    """
    n = max(64, curve.n_samples // 4)
    prev = None
    for _ in range(8):
        u_grid = np.linspace(0.0, 1.0, n + 1)
        uu = u_grid[:-1, None] + (1.0 / n) * _GL_X[None, :]
        sp = np.linalg.norm(curve.dp(uu.reshape(-1)), axis=-1).reshape(n, -1)
        if not np.all(np.isfinite(sp)):
            raise NumericError("non-finite curve derivative samples")
        if np.any(sp <= 0.0) or sp.min() < 1e-12 * sp.max():
            raise DegenerateCurveError(
                "curve speed vanishes at a sample; curve is not immersed"
            )
        seg = (sp @ _GL_W) / n
        L = float(seg.sum())
        if prev is not None and abs(L - prev) <= tol * L:
            break
        prev = L
        n *= 2
    # independent cross-check with adaptive quadrature
    L_quad = quad(lambda x: float(np.linalg.norm(curve.dp(np.array([x]))[0])),
                  0.0, 1.0, epsabs=0.0, epsrel=max(tol, 1e-12), limit=200)[0]
    if abs(L - L_quad) > 10 * max(tol, 1e-12) * L:
        raise NumericError(
            f"arc-length quadratures disagree: {L} vs {L_quad}"
        )
    s_grid = np.r_[0.0, np.cumsum(seg)]
    s_grid[-1] = L
    closure = np.linalg.norm(curve.p(np.array([0.0]))[0] - curve.p(np.array([1.0]))[0])
    if closure > 1e-6 * max(L, 1.0):
        raise ClosureError("curve is not closed: p(0) != p(1-)")
    return ArcLengthTable(curve=curve, L=L, u_grid=u_grid, s_grid=s_grid, tol=tol)


def _gamma_eval(curve: CurveSpec, table: ArcLengthTable, s, order: int):
    """gamma and derivatives at arc length s via the chain rule.

    With sigma = |p'(u)|:  gamma' = p' / sigma,
    gamma'' = p'' / sigma^2 - p' (p'.p'') / sigma^4.
    """
    s = np.asarray(s, float)
    scalar = s.ndim == 0
    u = table.u_of_s(np.atleast_1d(s))
    out = []
    pnt = curve.p(u)
    out.append(pnt)
    if order >= 1:
        dp = curve.dp(u)
        sig2 = np.einsum("...i,...i->...", dp, dp)
        vel = dp / np.sqrt(sig2)[..., None]
        out.append(vel)
    if order >= 2:
        ddp = curve.ddp(u)
        dot = np.einsum("...i,...i->...", dp, ddp)
        acc = ddp / sig2[..., None] - dp * (dot / sig2**2)[..., None]
        out.append(acc)
    if scalar:
        out = [a[0] for a in out]
    return out


def point_at(curve: CurveSpec, table: ArcLengthTable, s) -> np.ndarray:
    """gamma(s), the unit-speed curve point."""
    return _gamma_eval(curve, table, s, 0)[0]


def velocity_at(curve: CurveSpec, table: ArcLengthTable, s) -> np.ndarray:
    """gamma'(s); unit vector by construction."""
    return _gamma_eval(curve, table, s, 1)[1]


def acceleration_at(curve: CurveSpec, table: ArcLengthTable, s) -> np.ndarray:
    """gamma''(s); normal to gamma'(s), |gamma''| is the curvature."""
    return _gamma_eval(curve, table, s, 2)[2]


def tangent_and_curvature(curve: CurveSpec, table: ArcLengthTable, s):
    """Unit tangent e_1(s) and curvature kappa(s) = |gamma''(s)|.

    Any finite s is accepted and reduced modulo L (the curve is closed);
    non-finite s raises DomainError.
    """
    _, vel, acc = _gamma_eval(curve, table, s, 2)
    return vel, np.linalg.norm(acc, axis=-1)


# ---------------------------------------------------------------------------
# Bishop frame


@dataclass(frozen=True)
class FrameField:
    """Parallel-transport frame sampled on s_nodes (0 = s_0 < ... < s_N = L).

    frames[i] is the d x d matrix whose rows are e_1, ..., e_d at s_nodes[i];
    kappa[i, mu] are the curvature components gamma'' . e_{mu+2}; kappa_norm
    is |gamma''|.  gram_max is the largest orthonormality defect over nodes;
    step_drift is the largest pre-reorthonormalization defect of a single
    integration step (the integration-quality diagnostic).
    """

    curve: CurveSpec
    table: ArcLengthTable
    s_nodes: np.ndarray
    frames: np.ndarray
    kappa: np.ndarray
    kappa_norm: np.ndarray
    gram_max: float
    step_drift: float

    @property
    def L(self) -> float:
        return self.table.L

    @property
    def d(self) -> int:
        return self.curve.d

    def kappa_sup(self) -> float:
        """Max curvature over the frame grid (a lower bound of sup kappa)."""
        return float(self.kappa_norm.max())

    def frame_at(self, s) -> np.ndarray:
        """Orthonormal frame at arbitrary s.

        Normals are cubic-Hermite interpolated between the two bracketing
        nodes using the transport derivative e_mu' = -kappa_mu e_1, then
        re-orthonormalized; e_1 is evaluated exactly from the curve.
        """
        s_arr = np.atleast_1d(np.asarray(s, float))
        if not np.all(np.isfinite(s_arr)):
            raise DomainError("arc length s must be finite")
        s_arr = np.mod(s_arr, self.L)
        idx = np.clip(np.searchsorted(self.s_nodes, s_arr, side="right") - 1,
                      0, len(self.s_nodes) - 2)
        h = self.s_nodes[idx + 1] - self.s_nodes[idx]
        t = (s_arr - self.s_nodes[idx]) / h
        e1a = self.frames[idx, 0]
        e1b = self.frames[idx + 1, 0]
        na = self.frames[idx, 1:]
        nb = self.frames[idx + 1, 1:]
        da = -self.kappa[idx][:, :, None] * e1a[:, None, :]
        db = -self.kappa[idx + 1][:, :, None] * e1b[:, None, :]
        t_ = t[:, None, None]
        h_ = h[:, None, None]
        h00 = 2 * t_**3 - 3 * t_**2 + 1
        h10 = t_**3 - 2 * t_**2 + t_
        h01 = -2 * t_**3 + 3 * t_**2
        h11 = t_**3 - t_**2
        normals = h00 * na + h10 * h_ * da + h01 * nb + h11 * h_ * db
        _, vel, _ = _gamma_eval(self.curve, self.table, s_arr, 2)
        frames = np.concatenate([vel[:, None, :], normals], axis=1)
        frames = _orthonormalize(frames)
        return frames[0] if np.ndim(s) == 0 else frames

    def kappa_at(self, s) -> np.ndarray:
        """Curvature components gamma''(s) . e_mu(s) at arbitrary s."""
        frames = self.frame_at(s)
        acc = acceleration_at(self.curve, self.table, s)
        return np.einsum("...i,...mi->...m", acc, frames[..., 1:, :])

    def to_csv(self, path):
        """Write nodes as CSV rows: s, e_1..e_d row-major, kappa_1..kappa_{d-1}."""
        d = self.d
        cols = ["s"]
        cols += [f"e{i}_{j}" for i in range(1, d + 1) for j in range(1, d + 1)]
        cols += [f"kappa_{m}" for m in range(1, d)]
        flat = self.frames.reshape(len(self.s_nodes), d * d)
        data = np.column_stack([self.s_nodes, flat, self.kappa])
        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for row in data:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _orthonormalize(frames: np.ndarray) -> np.ndarray:
    """Modified Gram-Schmidt on the rows of each frame (batched)."""
    out = frames.copy()
    d = frames.shape[-2]
    for i in range(d):
        v = out[..., i, :]
        for j in range(i):
            proj = np.einsum("...i,...i->...", v, out[..., j, :])
            v = v - proj[..., None] * out[..., j, :]
        out[..., i, :] = v / np.linalg.norm(v, axis=-1, keepdims=True)
    return out


def _initial_normals(e1: np.ndarray, d: int) -> np.ndarray:
    """First d-1 coordinate axes surviving Gram-Schmidt against e_1."""
    basis = [e1]
    for k in range(d):
        v = np.zeros(d)
        v[k] = 1.0
        for b in basis:
            v = v - np.dot(v, b) * b
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            basis.append(v / nv)
        if len(basis) == d:
            break
    return np.asarray(basis[1:])


def bishop_frame(
    curve: CurveSpec,
    table: ArcLengthTable,
    n_steps: int,
    initial_normals: Optional[np.ndarray] = None,
) -> FrameField:
    """Integrate the parallel-transport frame along the curve.

    The normals obey e_mu' = -(gamma'' . e_mu) gamma', integrated with
    classical RK4 over n_steps uniform arc-length steps and re-orthonormalized
    (modified Gram-Schmidt, tangent first) after every step.  e_1 is always
    the exact unit tangent.  The frame need not close up after one loop
    (holonomy); no periodicity of e_2..e_d is asserted.

    initial_normals optionally fixes the starting normal basis (rows, must be
    orthonormal and orthogonal to e_1(0)); the default is Gram-Schmidt on the
    coordinate axes.  Raises IntegrationFailureError when a single raw RK4
    step strays from orthonormality by more than 1e-6 (use more steps).
    """
    if n_steps < 64:
        raise DomainError(f"n_steps must be >= 64, got {n_steps}")
    d = curve.d
    L = table.L
    s_nodes = np.linspace(0.0, L, n_steps + 1)
    h = L / n_steps

    # gamma' and gamma'' at RK4 stage abscissae, precomputed in bulk
    stages = np.concatenate([s_nodes, s_nodes[:-1] + 0.5 * h])
    _, vel_all, acc_all = _gamma_eval(curve, table, stages, 2)
    vel_n, vel_m = vel_all[: n_steps + 1], vel_all[n_steps + 1 :]
    acc_n, acc_m = acc_all[: n_steps + 1], acc_all[n_steps + 1 :]
    if not (np.all(np.isfinite(vel_all)) and np.all(np.isfinite(acc_all))):
        raise NumericError("non-finite derivative samples along the curve")

    e1_0 = vel_n[0]
    if initial_normals is None:
        normals = _initial_normals(e1_0, d)
    else:
        normals = np.asarray(initial_normals, float)
        if normals.shape != (d - 1, d):
            raise DomainError("initial_normals must have shape (d-1, d)")
        frame0 = _orthonormalize(np.vstack([e1_0, normals])[None])[0]
        normals = frame0[1:]

    frames = np.empty((n_steps + 1, d, d))
    frames[0] = np.vstack([e1_0, normals])
    kappa = np.empty((n_steps + 1, d - 1))
    kappa[0] = acc_n[0] @ normals.T
    step_drift = 0.0

    def rhs(nrm, vel, acc):
        # parallel transport: remove the tangential component growth
        return -np.outer(nrm @ acc, vel)

    for i in range(n_steps):
        nrm = frames[i, 1:]
        k1 = rhs(nrm, vel_n[i], acc_n[i])
        k2 = rhs(nrm + 0.5 * h * k1, vel_m[i], acc_m[i])
        k3 = rhs(nrm + 0.5 * h * k2, vel_m[i], acc_m[i])
        k4 = rhs(nrm + h * k3, vel_n[i + 1], acc_n[i + 1])
        raw = nrm + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        cand = np.vstack([vel_n[i + 1], raw])
        gram = cand @ cand.T
        drift = float(np.abs(gram - np.eye(d)).max())
        step_drift = max(step_drift, drift)
        if drift > 1e-6:
            raise IntegrationFailureError(
                f"frame drift {drift:.2e} exceeds 1e-6 at step {i}; "
                f"increase n_steps (currently {n_steps})"
            )
        frames[i + 1] = _orthonormalize(cand[None])[0]
        kappa[i + 1] = acc_n[i + 1] @ frames[i + 1, 1:].T

    gram = np.einsum("nij,nkj->nik", frames, frames)
    gram_max = float(np.abs(gram - np.eye(d)).max())
    kappa_norm = np.linalg.norm(acc_n, axis=1)
    return FrameField(
        curve=curve,
        table=table,
        s_nodes=s_nodes,
        frames=frames,
        kappa=kappa,
        kappa_norm=kappa_norm,
        gram_max=gram_max,
        step_drift=step_drift,
    )
