import numpy as np
import pytest

from cheegerkit.errors import DomainError
from cheegerkit.shell import (
    ShellSpec,
    shell_cheeger,
    shell_divergence,
    shell_field,
    shell_perimeter_volume,
    shell_profile,
)


@pytest.mark.parametrize("d,r,R", [(2, 1.0, 2.0), (3, 1.0, 2.0), (4, 1.0, 3.0)])
def test_cheeger_closed_form(d, r, R):
    spec = ShellSpec(r=r, R=R, d=d)
    want = d * (R ** (d - 1) + r ** (d - 1)) / (R**d - r**d)
    assert shell_cheeger(spec) == pytest.approx(want, rel=1e-12)


def test_cheeger_is_perimeter_over_volume():
    spec = ShellSpec(r=1.0, R=2.0, d=3)
    per, vol = shell_perimeter_volume(spec)
    assert shell_cheeger(spec) == pytest.approx(per / vol, rel=1e-12)
    # sphere areas 4 pi (R^2 + r^2), volume 4/3 pi (R^3 - r^3)
    assert per == pytest.approx(4 * np.pi * 5, rel=1e-12)
    assert vol == pytest.approx(4 * np.pi / 3 * 7, rel=1e-12)


def test_invalid_geometry():
    with pytest.raises(DomainError):
        ShellSpec(r=2.0, R=1.0, d=3)
    with pytest.raises(DomainError):
        ShellSpec(r=-1.0, R=2.0, d=3)
    with pytest.raises(DomainError):
        ShellSpec(r=1.0, R=2.0, d=1)


@pytest.mark.parametrize("d,r,R", [(2, 1.0, 2.0), (3, 1.0, 2.0), (4, 1.0, 3.0)])
def test_profile_boundary_values(d, r, R):
    prof = shell_profile(ShellSpec(r=r, R=R, d=d))
    inner, outer = prof.boundary_values()
    assert inner == pytest.approx(-1.0, abs=1e-12)
    assert outer == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("d,r,R", [(2, 1.0, 2.0), (3, 1.0, 2.0), (4, 1.0, 3.0)])
def test_profile_norm_below_one(d, r, R):
    prof = shell_profile(ShellSpec(r=r, R=R, d=d))
    max_tf, margin = prof.margin(n_grid=10_000)
    assert max_tf < 1.0
    assert margin > 0


def test_divergence_constant():
    spec = ShellSpec(r=1.0, R=2.0, d=3)
    c = shell_cheeger(spec)
    rng = np.random.default_rng(2)
    w = rng.normal(size=(50, 3))
    w /= np.linalg.norm(w, axis=1, keepdims=True)
    t = rng.uniform(1.05, 1.95, 50)
    for x in t[:, None] * w:
        assert shell_divergence(spec, x) == pytest.approx(c, rel=1e-12)


def test_field_norm_strictly_interior():
    spec = ShellSpec(r=1.0, R=2.0, d=3)
    rng = np.random.default_rng(4)
    w = rng.normal(size=(200, 3))
    w /= np.linalg.norm(w, axis=1, keepdims=True)
    t = rng.uniform(1.001, 1.999, 200)
    V = shell_field(spec, t[:, None] * w)
    assert np.all(np.linalg.norm(V, axis=1) < 1.0)


def test_field_rejects_boundary_and_exterior():
    spec = ShellSpec(r=1.0, R=2.0, d=3)
    for bad in ([1.0, 0, 0], [2.0, 0, 0], [2.5, 0, 0], [0.2, 0, 0]):
        with pytest.raises(DomainError):
            shell_field(spec, np.array([bad], float))


def test_field_is_radial():
    spec = ShellSpec(r=1.0, R=2.0, d=2)
    x = np.array([[1.2, 0.5], [-0.3, 1.4], [0.0, -1.7]])
    V = shell_field(spec, x)
    cross = x[:, 0] * V[:, 1] - x[:, 1] * V[:, 0]
    assert np.max(np.abs(cross)) < 1e-14
