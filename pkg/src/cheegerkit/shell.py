"""Spherical shells A_{r,R} = {x : r < |x| < R} and their Cheeger data.

The shell's Cheeger constant is exactly h = d (R^(d-1) + r^(d-1)) / (R^d - r^d)
= d C, attained by the shell itself (it is a minimal Cheeger set).  The
certificate field realizing the lower bound is V(x) = f(|x|) x with
f(t) = C - (C r^d + r^(d-1)) t^(-d), which has div V = d C identically,
|V| < 1 strictly inside, and agrees with the outward unit normal on |x| = R
and with the inward one on |x| = r.

All profile evaluations use the ratio form in q = r/t <= 1, so dimensions up
to d = 64 stay in floating-point range regardless of the absolute radii.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericError
from .tube import unit_ball_volume

__all__ = [
    "ShellSpec",
    "ShellFieldProfile",
    "shell_profile",
    "shell_cheeger",
    "shell_perimeter_volume",
    "shell_field",
    "shell_field_closed",
    "shell_divergence",
    "divergence_expanded",
    "membership",
    "membership_many",
    "bounding_box",
]

_MAX_D = 64


@dataclass(frozen=True)
class ShellSpec:
    """Spherical shell with inner radius r, outer radius R, dimension d."""

    r: float
    R: float
    d: int

    def __post_init__(self):
        if not (0.0 < self.r < self.R):
            raise DomainError(
                f"shell radii must satisfy 0 < r < R, got r={self.r}, R={self.R}"
            )
        if not (2 <= self.d <= _MAX_D):
            raise DomainError(
                f"shell dimension must be in [2, {_MAX_D}], got {self.d}"
            )


@dataclass(frozen=True)
class ShellFieldProfile:
    """Radial profile f(t) = C - (C r^d + r^(d-1)) t^(-d) on [r, R].

    C = (R^(d-1) + r^(d-1)) / (R^d - r^d).  Satisfies R f(R) = 1,
    r f(r) = -1, t f(t) strictly increasing, and t |f(t)| < 1 on (r, R).
    """

    r: float
    R: float
    d: int
    C: float

    def f(self, t):
        t = np.asarray(t, float)
        q = self.r / t
        return self.C * (1.0 - q**self.d) - q ** (self.d - 1) / t

    def fprime(self, t):
        """Hand-expanded derivative d (C r^d + r^(d-1)) t^(-d-1)."""
        t = np.asarray(t, float)
        q = self.r / t
        return self.d * (self.C * q**self.d + q ** (self.d - 1) / t) / t

    def tf(self, t):
        """t f(t); the radial component of |V| along a ray."""
        return np.asarray(t, float) * self.f(t)

    def tf_prime(self, t):
        """(t f(t))' = C + (d-1)(C r^d + r^(d-1)) t^(-d) > 0."""
        t = np.asarray(t, float)
        q = self.r / t
        return self.C + (self.d - 1) * (self.C * q**self.d + q ** (self.d - 1) / t)

    def boundary_values(self):
        """(r f(r), R f(R)); should be (-1, 1) to near machine accuracy."""
        return float(self.tf(self.r)), float(self.tf(self.R))

    def margin(self, n_grid: int = 10_000):
        """(max of t |f(t)|, 1 - max) over a dense interior grid.

        The positive gap delta = 1 - max underpins the uniqueness argument:
        |V| stays strictly below 1 away from the boundary spheres.
        """
        t = np.linspace(self.r, self.R, n_grid + 2)[1:-1]
        m = float(np.abs(self.tf(t)).max())
        return m, 1.0 - m


def shell_profile(spec: ShellSpec) -> ShellFieldProfile:
    """Profile with C computed in the overflow-safe ratio form."""
    q = spec.r / spec.R
    C = (1.0 + q ** (spec.d - 1)) / (spec.R * (1.0 - q**spec.d))
    return ShellFieldProfile(r=spec.r, R=spec.R, d=spec.d, C=C)


def shell_cheeger(spec: ShellSpec) -> float:
    """Closed-form Cheeger constant h(A_{r,R}) = d C (exact)."""
    return spec.d * shell_profile(spec).C


def shell_perimeter_volume(spec: ShellSpec):
    """(|boundary A|, |A|) = (d omega_d (R^(d-1) + r^(d-1)), omega_d (R^d - r^d)).

    Their ratio equals shell_cheeger by construction.
    """
    wd = unit_ball_volume(spec.d)
    per = spec.d * wd * (spec.R ** (spec.d - 1) + spec.r ** (spec.d - 1))
    vol = wd * (spec.R**spec.d - spec.r**spec.d)
    return per, vol


def _radii(spec: ShellSpec, x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, float))
    if x.shape[-1] != spec.d:
        raise DomainError(f"points must have dimension {spec.d}")
    return np.linalg.norm(x, axis=-1)


def shell_field(spec: ShellSpec, x) -> np.ndarray:
    """Certificate field V(x) = f(|x|) x for interior points r < |x| < R."""
    x = np.asarray(x, float)
    scalar = x.ndim == 1
    x2 = np.atleast_2d(x)
    t = _radii(spec, x2)
    if np.any(t <= spec.r) or np.any(t >= spec.R):
        raise DomainError("shell field requires r < |x| < R")
    V = shell_profile(spec).f(t)[:, None] * x2
    return V[0] if scalar else V


def shell_field_closed(spec: ShellSpec, x) -> np.ndarray:
    """Boundary-inclusive variant (|x| in [r, R]) for normal-agreement tests."""
    x = np.asarray(x, float)
    scalar = x.ndim == 1
    x2 = np.atleast_2d(x)
    t = _radii(spec, x2)
    if np.any(t < spec.r) or np.any(t > spec.R):
        raise DomainError("shell field (closed) requires r <= |x| <= R")
    V = shell_profile(spec).f(t)[:, None] * x2
    return V[0] if scalar else V


def divergence_expanded(spec: ShellSpec, x) -> np.ndarray:
    """div V from the expanded formula f'(t) t + d f(t) at t = |x|."""
    t = _radii(spec, x)
    if np.any(t <= spec.r) or np.any(t >= spec.R):
        raise DomainError("divergence requires r < |x| < R")
    prof = shell_profile(spec)
    out = prof.fprime(t) * t + spec.d * prof.f(t)
    return out if out.size > 1 else float(out[0])


def shell_divergence(spec: ShellSpec, x) -> float:
    """div V(x) = d C, constant throughout the shell.

    The expanded form f'(t) t + d f(t) is evaluated at |x| as a consistency
    check; disagreement beyond 1e-12 relative raises NumericError (it would
    mean the closed-form algebra and the profile implementation diverged).
    """
    val = spec.d * shell_profile(spec).C
    expanded = np.asarray(divergence_expanded(spec, x), float)
    if np.any(np.abs(expanded - val) > 1e-12 * abs(val)):
        raise NumericError(
            "expanded divergence disagrees with the closed form: "
            f"{expanded} vs {val}"
        )
    return val


def membership(spec: ShellSpec, x) -> bool:
    """True iff r < |x| < R (open shell)."""
    t = _radii(spec, np.asarray(x, float)[None])
    return bool(spec.r < t[0] < spec.R)


def membership_many(spec: ShellSpec, x: np.ndarray) -> np.ndarray:
    t = _radii(spec, x)
    return (t > spec.r) & (t < spec.R)


def bounding_box(spec: ShellSpec, margin: float = 0.1):
    """Axis-aligned box [-(1+margin) R, (1+margin) R]^d."""
    half = (1.0 + margin) * spec.R
    lo = -half * np.ones(spec.d)
    hi = half * np.ones(spec.d)
    return lo, hi
