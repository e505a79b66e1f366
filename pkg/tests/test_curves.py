import numpy as np
import pytest

from cheegerkit.curves import (
    ArcLengthTable,
    arc_length,
    bishop_frame,
    circle,
    curve_from_table,
    ellipse,
    load_curve_table,
    point_at,
    preset,
    tangent_and_curvature,
    trefoil,
)
from cheegerkit.errors import ClosureError, DomainError

# complete elliptic integral of the second kind gives the (2,1) ellipse
# circumference 8 E(m = 3/4); scipy.special.ellipe(0.75) evaluated once
ELLIPSE_21_LENGTH = 9.688448220547675


def test_circle_length_exact():
    table = arc_length(circle(2.0))
    assert table.L == pytest.approx(4 * np.pi, rel=1e-12)


def test_circle_embedded_dimension():
    cv = circle(1.5, d=4)
    pts = cv.p(np.linspace(0, 1, 7))
    assert pts.shape == (7, 4)
    assert np.all(pts[:, 2:] == 0.0)


def test_ellipse_length_quadrature():
    table = arc_length(ellipse(2.0, 1.0))
    assert table.L == pytest.approx(ELLIPSE_21_LENGTH, rel=1e-10)


def test_arc_length_round_trip():
    cv = ellipse(2.0, 1.0, d=3)
    table = arc_length(cv)
    u = np.linspace(0.0, 0.999, 57)
    s = table.s_of_u(u)
    assert np.all(np.diff(s) > 0)
    back = table.u_of_s(s)
    assert np.max(np.abs(back - u)) < 1e-10


def test_point_at_wraps_modulo_length():
    cv = circle(2.0)
    table = arc_length(cv)
    p0 = point_at(cv, table, 0.3)
    p1 = point_at(cv, table, 0.3 + table.L)
    assert np.allclose(p0, p1, atol=1e-12)


def test_tangent_and_curvature_circle():
    cv = circle(2.0)
    table = arc_length(cv)
    s = np.linspace(0, table.L, 17, endpoint=False)
    tang, kappa = tangent_and_curvature(cv, table, s)
    assert np.allclose(np.linalg.norm(tang, axis=-1), 1.0, atol=1e-12)
    assert np.allclose(kappa, 0.5, atol=1e-10)


def test_preset_dispatch():
    cv = preset("circle", (2.0,), d=3)
    assert cv.d == 3
    with pytest.raises(DomainError):
        preset("helix")
    with pytest.raises(DomainError):
        preset("trefoil", d=2)


def test_curve_from_table_matches_source():
    cv = trefoil()
    u = np.linspace(0, 1, 400, endpoint=False)
    tab = curve_from_table(u, cv.p(u))
    probe = np.linspace(0, 1, 123)
    assert np.max(np.abs(tab.p(probe) - cv.p(probe))) < 1e-6


def test_curve_from_table_rejects_open_curve():
    u = np.linspace(0, 1, 50)
    pts = np.c_[u, u**2, np.zeros(50)]  # endpoints differ
    with pytest.raises(ClosureError):
        curve_from_table(u, pts)


def test_load_curve_table(tmp_path):
    cv = circle(1.0, d=3)
    u = np.linspace(0, 1, 64, endpoint=False)
    pts = cv.p(u)
    path = tmp_path / "curve.txt"
    with open(path, "w") as fh:
        fh.write("# u x y z\n")
        for ui, row in zip(u, pts):
            fh.write(f"{float(ui)!r} " + " ".join(repr(float(v)) for v in row) + "\n")
    tab = load_curve_table(path)
    assert tab.d == 3
    assert np.max(np.abs(tab.p(u) - pts)) < 1e-9


def test_frame_orthonormal_and_periodic():
    cv = trefoil()
    table = arc_length(cv)
    fr = bishop_frame(cv, table, 2048)
    assert fr.gram_max <= 1e-8
    # the frame returns to itself up to a rotation in the normal plane;
    # the tangent itself must close exactly
    first, last = fr.frames[0, 0], fr.frames[-1, 0]
    assert np.linalg.norm(first - last) < 1e-6


def test_frame_curvature_consistency():
    cv = trefoil()
    table = arc_length(cv)
    fr = bishop_frame(cv, table, 2048)
    total = (fr.kappa**2).sum(axis=1)
    rel = np.abs(total - fr.kappa_norm**2) / fr.kappa_norm**2
    assert rel.max() <= 1e-6


def test_frame_at_interpolates():
    cv = circle(2.0, d=3)
    table = arc_length(cv)
    fr = bishop_frame(cv, table, 512)
    s = np.array([0.1234, 3.456, 11.2])
    frames = fr.frame_at(s)
    gram = np.einsum("nij,nkj->nik", frames, frames)
    eye = np.eye(3)
    assert np.max(np.abs(gram - eye)) < 1e-9
