import numpy as np
import pytest

from cheegerkit.curves import circle
from cheegerkit.errors import (
    ConfigurationError,
    DomainError,
    EmptyDomainError,
)
from cheegerkit.oracle import (
    CutGraph,
    VoxelDomain,
    build_cut_graph,
    default_stencil,
    dinkelbach_cheeger,
    load_mask,
    min_cut,
    rasterize,
    rasterize_ball,
    rasterize_box,
    rasterize_shell,
    rasterize_tube,
    save_cut_svg,
    save_mask,
    stencil_offsets,
    subset_perimeter_volume,
)
from cheegerkit.shell import ShellSpec
from cheegerkit.tube import build_tube


def _cut_of(graph, members):
    return float(graph.pair_w[members[graph.pair_i] != members[graph.pair_j]].sum())


def _enumerate_best_ratio(graph):
    """Exact Cheeger minimum by brute force over all nonempty subsets."""
    n = graph.n_cells
    assert n <= 22, "enumeration is exponential; keep the domain tiny"
    count = 1 << n
    ids = np.arange(count, dtype=np.uint64)
    members = (ids[:, None] >> np.arange(n, dtype=np.uint64)[None, :]) & 1
    members = members.astype(bool)
    per = np.zeros(count)
    for i, j, w in zip(graph.pair_i, graph.pair_j, graph.pair_w):
        per += w * (members[:, i] != members[:, j])
    for i in range(n):
        per += graph.exposure[i] * members[:, i]
    vol = members.sum(axis=1) * graph.cell_volume
    with np.errstate(invalid="ignore"):
        ratio = np.where(vol > 0, per / np.maximum(vol, 1e-300), np.inf)
    k = int(np.argmin(ratio))
    return float(ratio[k]), members[k], per, vol


def _enumerate_min_energy(per, vol, lam):
    energy = per - lam * vol
    return float(energy.min()), energy


# ---------------------------------------------------------------------------
# stencils


def test_default_stencils():
    assert default_stencil(2) == 16
    assert default_stencil(3) == 18
    with pytest.raises(ConfigurationError):
        default_stencil(4)


@pytest.mark.parametrize(
    "d,stencil,n_half",
    [(2, 4, 2), (2, 8, 4), (2, 16, 8), (3, 6, 3), (3, 18, 9), (3, 26, 13)],
)
def test_stencil_offset_counts(d, stencil, n_half):
    offsets, weights = stencil_offsets(d, stencil)
    assert offsets.shape == (n_half, d)
    assert weights.shape == (n_half,)
    assert np.all(weights > 0)
    # half stencil: no offset may appear together with its negation
    seen = {tuple(o) for o in offsets}
    assert all(tuple(-o) not in seen for o in offsets)


def test_unsupported_stencils_rejected():
    with pytest.raises(ConfigurationError):
        stencil_offsets(2, 6)
    with pytest.raises(ConfigurationError):
        stencil_offsets(3, 16)
    with pytest.raises(ConfigurationError):
        stencil_offsets(4, 4)


# ---------------------------------------------------------------------------
# rasterizers


def test_rasterize_box_full():
    dom = rasterize_box((1.0, 1.0), 64)
    assert dom.shape == (64, 64)
    assert dom.mask.all()
    assert dom.volume == pytest.approx(1.0, rel=1e-12)


def test_rasterize_ball_area():
    dom = rasterize_ball(1.0, 2, 256)
    assert abs(dom.volume - np.pi) / np.pi < 0.01
    cen = dom.cell_centers()
    assert np.all(np.linalg.norm(cen, axis=1) < 1.0)


def test_rasterize_shell_volume():
    dom = rasterize_shell(ShellSpec(r=1.0, R=2.0, d=2), 256)
    want = np.pi * 3.0
    assert abs(dom.volume - want) / want < 0.01


def test_rasterize_tube_volume():
    spec = build_tube(circle(2.0, d=3), a=0.4)
    dom = rasterize_tube(spec, 64)
    want = 2 * np.pi**2 * 2.0 * 0.16
    assert abs(dom.volume - want) / want < 0.05


def test_rasterize_empty_domain():
    with pytest.raises(EmptyDomainError):
        rasterize(lambda x: np.zeros(len(x), bool), ((0, 0), (1, 1)), 16)


def test_rasterize_keeps_largest_component():
    # two disks, the left one bigger; the right one must be dropped
    def two_blobs(x):
        a = np.linalg.norm(x - np.array([0.3, 0.5]), axis=1) < 0.2
        b = np.linalg.norm(x - np.array([0.8, 0.5]), axis=1) < 0.1
        return a | b

    with pytest.warns(UserWarning):
        dom = rasterize(two_blobs, ((0, 0), (1, 1)), 64)
    cen = dom.cell_centers()
    assert np.all(cen[:, 0] < 0.65)


def test_resolution_cap_3d():
    spec = build_tube(circle(2.0, d=3), a=0.4)
    with pytest.raises(DomainError):
        rasterize_tube(spec, 200)


# ---------------------------------------------------------------------------
# perimeter calibration (weights fixed by the Crofton fit)


def test_perimeter_calibration_2d():
    # index-based masks keep cut lines exactly straight (float cell centers
    # go ragged whenever 1/n is not binary-exact)
    n = 256
    dom = rasterize_box((1.0, 1.0), n)
    i, j = np.indices(dom.shape)
    half = (i < n // 2).ravel()
    diag = (i + j < n - 1).ravel()
    cen = dom.cell_centers()
    disk = np.linalg.norm(cen - 0.5, axis=1) < 0.3

    g16 = build_cut_graph(dom, 16)
    assert _cut_of(g16, half) == pytest.approx(1.0, rel=0.02)
    assert _cut_of(g16, diag) == pytest.approx(np.sqrt(2), rel=0.02)
    assert _cut_of(g16, disk) == pytest.approx(2 * np.pi * 0.3, rel=0.02)
    assert g16.exposure.sum() == pytest.approx(4.0, rel=0.02)

    g8 = build_cut_graph(dom, 8)
    assert _cut_of(g8, disk) == pytest.approx(2 * np.pi * 0.3, rel=0.06)

    # 4-stencil is the taxicab functional: exact on axis cuts, ~41% high
    # on diagonals
    g4 = build_cut_graph(dom, 4)
    assert _cut_of(g4, half) == pytest.approx(1.0, rel=1e-9)
    assert _cut_of(g4, diag) == pytest.approx(2.0, rel=0.02)


def test_perimeter_calibration_3d():
    n = 48
    dom = rasterize_box((1.0, 1.0, 1.0), n)
    i, j, k = np.indices(dom.shape)
    half = (i < n // 2).ravel()
    diag = (i + j < n - 1).ravel()
    cen = dom.cell_centers()
    ball = np.linalg.norm(cen - 0.5, axis=1) < 0.35

    g18 = build_cut_graph(dom, 18)
    assert _cut_of(g18, half) == pytest.approx(1.0, rel=0.10)
    assert _cut_of(g18, diag) == pytest.approx(np.sqrt(2), rel=0.02)
    assert _cut_of(g18, ball) == pytest.approx(4 * np.pi * 0.35**2, rel=0.05)

    g26 = build_cut_graph(dom, 26)
    assert _cut_of(g26, ball) == pytest.approx(4 * np.pi * 0.35**2, rel=0.03)

    g6 = build_cut_graph(dom, 6)
    assert _cut_of(g6, half) == pytest.approx(1.0, rel=1e-9)


def test_subset_perimeter_volume_whole_domain():
    dom = rasterize_box((1.0, 1.0), 32)
    g = build_cut_graph(dom, 16)
    per, vol = subset_perimeter_volume(g, np.ones(dom.n_cells, bool))
    assert per == pytest.approx(float(g.exposure.sum()))
    assert vol == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(DomainError):
        subset_perimeter_volume(g, np.ones(3, bool))


# ---------------------------------------------------------------------------
# min-cut vs enumeration


def _tiny_box(nx, ny, delta=0.25):
    return VoxelDomain(mask=np.ones((nx, ny), bool), delta=delta, origin=np.zeros(2))


@pytest.mark.parametrize("lam", [2.0, 4.0, 6.5, 9.0])
def test_min_cut_matches_enumeration(lam):
    dom = _tiny_box(4, 4)
    g = build_cut_graph(dom, 8)
    _, _, per, vol = _enumerate_best_ratio(g)
    want, energy = _enumerate_min_energy(per, vol, lam)
    cut = min_cut(g, lam)
    assert cut.energy == pytest.approx(want, abs=1e-6)
    got_per, got_vol = subset_perimeter_volume(g, cut.members)
    assert got_per - lam * got_vol == pytest.approx(want, abs=1e-6)
    # minimal source side: no strictly smaller subset attains the minimum
    smaller = np.flatnonzero(np.abs(energy - want) < 1e-9)
    sizes = [(int(k).bit_count()) for k in smaller]
    assert int(cut.members.sum()) == min(sizes)


def test_min_cut_rejects_bad_lambda():
    g = build_cut_graph(_tiny_box(4, 4), 8)
    with pytest.raises(DomainError):
        min_cut(g, np.inf)


# ---------------------------------------------------------------------------
# ratio iteration vs enumeration


@pytest.mark.parametrize("nx,ny,stencil", [(4, 4, 8), (4, 4, 16), (3, 5, 8)])
def test_dinkelbach_matches_enumeration_box(nx, ny, stencil):
    dom = _tiny_box(nx, ny)
    g = build_cut_graph(dom, stencil)
    want, best, _, _ = _enumerate_best_ratio(g)
    res = dinkelbach_cheeger(dom, stencil=stencil, tol=0.0)
    assert res.h == pytest.approx(want, rel=1e-7)
    assert res.per / res.vol == pytest.approx(res.h, rel=1e-12)


def test_dinkelbach_matches_enumeration_dumbbell():
    # two 3x3 blocks joined by a 1-cell-wide bridge: non-convex, with a
    # near-tie between one block and the whole domain, so the solver has to
    # resolve a genuinely close ratio race
    mask = np.zeros((9, 3), bool)
    mask[0:3, :] = True
    mask[3:6, 1] = True
    mask[6:9, :] = True
    dom = VoxelDomain(mask=mask, delta=0.1, origin=np.zeros(2))
    g = build_cut_graph(dom, 8)
    want, best, _, _ = _enumerate_best_ratio(g)
    res = dinkelbach_cheeger(dom, stencil=8, tol=0.0)
    assert res.h == pytest.approx(want, rel=1e-7)
    # the reported subset must itself attain the reported ratio
    members = res.subset[dom.mask]
    per = _cut_of(g, members) + g.exposure[members].sum()
    assert per == pytest.approx(res.per, rel=1e-12)
    assert res.per / res.vol == pytest.approx(res.h, rel=1e-12)


def test_dinkelbach_trace_invariants():
    dom = rasterize_ball(1.0, 2, 64)
    res = dinkelbach_cheeger(dom, tol=0.0)
    lams = [t[0] for t in res.trace]
    assert all(b < a for a, b in zip(lams, lams[1:]))
    assert res.n_iter == len(res.trace)
    assert res.h <= lams[0]
    assert 0 < res.coverage <= 1.0
    g = build_cut_graph(dom, res.stencil)
    per, vol = subset_perimeter_volume(g, res.subset[dom.mask])
    assert per == pytest.approx(res.per, rel=1e-12)
    assert vol == pytest.approx(res.vol, rel=1e-12)


def test_dinkelbach_lam0_validation():
    dom = rasterize_ball(1.0, 2, 32)
    with pytest.raises(DomainError):
        dinkelbach_cheeger(dom, lam0=0.1)
    with pytest.raises(DomainError):
        dinkelbach_cheeger(dom, tol=-1.0)
    res = dinkelbach_cheeger(dom, lam0=50.0, tol=0.0)
    base = dinkelbach_cheeger(dom, tol=0.0)
    assert res.h == pytest.approx(base.h, rel=1e-9)


def test_scaling_covariance():
    # h scales like 1/length; rebuild the same mask at twice the cell size
    mask = rasterize_ball(1.0, 2, 48).mask
    small = VoxelDomain(mask=mask, delta=0.05, origin=np.zeros(2))
    big = VoxelDomain(mask=mask, delta=0.10, origin=np.zeros(2))
    h_small = dinkelbach_cheeger(small, tol=0.0).h
    h_big = dinkelbach_cheeger(big, tol=0.0).h
    assert h_small == pytest.approx(2 * h_big, rel=1e-9)


def test_disk_oracle_accuracy():
    dom = rasterize_ball(1.0, 2, 128)
    res = dinkelbach_cheeger(dom, stencil=16)
    assert abs(res.h - 2.0) / 2.0 < 0.03
    assert res.coverage > 0.95


# ---------------------------------------------------------------------------
# mask and figure round trips


def test_mask_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    mask = rng.random((13, 7)) < 0.4
    path = tmp_path / "m.txt"
    save_mask(path, mask, 0.25, [1.0, -2.0])
    loaded, delta, origin = load_mask(path)
    assert np.array_equal(loaded, mask)
    assert delta == 0.25
    assert np.allclose(origin, [1.0, -2.0])


def test_mask_round_trip_all_true(tmp_path):
    mask = np.ones((4, 4, 4), bool)
    path = tmp_path / "m.txt"
    save_mask(path, mask, 1.0, np.zeros(3))
    loaded, _, _ = load_mask(path)
    assert np.array_equal(loaded, mask)


def test_svg_export(tmp_path):
    dom = rasterize_ball(1.0, 2, 32)
    res = dinkelbach_cheeger(dom)
    path = tmp_path / "cut.svg"
    save_cut_svg(path, dom, res.subset)
    text = path.read_text()
    assert text.startswith("<svg")
    assert "#1f5f8b" in text


def test_svg_rejects_3d(tmp_path):
    dom = rasterize_box((1.0, 1.0, 1.0), 16)
    with pytest.raises(DomainError):
        save_cut_svg(tmp_path / "x.svg", dom)
