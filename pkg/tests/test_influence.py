from __future__ import annotations

import numpy as np
import pytest

from nonsaddle.cubhom import euler_of_cells
from nonsaddle.flowfield import PhaseSpace, descriptor, make_spec, velocity_batch
from nonsaddle.grid import CellSet, CubicalGrid, region_cells, window_for_region
from nonsaddle.influence import (
    ClassifierSettings,
    DissonanceReport,
    classify_point,
    fixed_points,
    influence_labels,
    near_mask,
    planar_global_influence_check,
    prolongational_limit,
    three_types_check,
)
from support import analysis


def test_near_mask_distance_and_wrap():
    g = CubicalGrid(PhaseSpace((0.0, 0.0), (1.0, 1.0), (True, True)), (20, 20))
    K = CellSet.from_flat(g, [0])
    m = near_mask(K, 2.0 * g.cell_size[0])
    assert m[0, 0] and m[2, 0] and m[18, 0] and m[0, 18]  # wraps across both seams
    assert not m[3, 0] and not m[2, 2]
    gp = CubicalGrid(PhaseSpace((0.0, 0.0), (1.0, 1.0)), (20, 20))
    assert not near_mask(CellSet.from_flat(gp, [0]), 2.0 * gp.cell_size[0])[18, 0]
    assert not near_mask(CellSet.empty(gp), 1.0).any()


def test_classifier_stages():
    s = ClassifierSettings(T_max=10.0, hop=1.0, extend=2)
    assert s.n_hops == 10 and s.stages() == [10, 20, 40]


def test_classify_point_on_torus_homoclinic():
    a = analysis("torus_homoclinic")
    K = a.ip.Inv
    assert classify_point(a.spec, K, (0.3, 0.2)) == "homoclinic"
    assert classify_point(a.spec, K, (-0.5, 0.5)) == "R_star"
    assert classify_point(a.spec, K, (0.25, 0.5)) == "A_star"
    assert classify_point(a.spec, K, a.grid.center_of(*divmod(int(K.flat[0]), a.grid.shape[1]))) == "K"
    with pytest.raises(ValueError):
        classify_point(a.spec, K, (0.3, 0.2), T_max=0.0)


def test_classify_point_on_planar_cycle():
    a = analysis("planar_cycle", sigma=1.0)
    K = a.ip.Inv
    assert classify_point(a.spec, K, (2.0, 0.0)) == "A_star"
    assert classify_point(a.spec, K, (0.3, 0.1)) == "A_star"
    assert classify_point(a.spec, K, (0.0, 0.0)) == "outside"


def test_prolongational_limit_of_attracting_cycle():
    a = analysis("planar_cycle", sigma=1.0)
    J = prolongational_limit(a.spec, (0.5, 0.0), 1, T_max=60.0)
    assert len(J) > 5
    assert np.abs(np.hypot(J[:, 0], J[:, 1]) - 1.0).max() < 1e-6
    # backward orbits of nearby points leave the window or fall to the origin
    Jm = prolongational_limit(a.spec, (0.5, 0.0), -1, T_max=60.0)
    assert len(Jm) == 0 or np.hypot(Jm[:, 0], Jm[:, 1]).max() < 0.05


def test_partition_is_total_everywhere():
    for fid, kw in (("torus_homoclinic", {}), ("planar_cycle", {"sigma": 1.0}), ("annulus_nonsaddle", {}),
                    ("product_circle", {})):
        P = analysis(fid, **kw).partition
        assert all(P.check().values()), fid


def test_torus_homoclinic_dissonance():
    a = analysis("torus_homoclinic")
    D = a.dissonance
    assert D.externally_dissonant.n_components(4) == 1
    assert D.positively_dissonant and D.negatively_dissonant
    assert three_types_check(D, True)
    assert (D.euler_K, D.euler_I) == (0, -1) and D.agreement
    conf = D.confirmation
    assert all(v["confirmed"] == v["checked"] > 0 for v in conf.values())


def test_dissonant_cells_lie_in_the_closure_of_homoclinic_cells():
    for fid in ("torus_homoclinic", "saddle_node_torus"):
        a = analysis(fid)
        D, H = a.dissonance, a.partition.H_minus_K
        diss = D.positively_dissonant | D.negatively_dissonant | D.externally_dissonant
        assert diss and diss.issubset((~H).neighbours_of(H, 8))


def test_planar_cycle_has_no_dissonance():
    for sigma in (1.0, -1.0):
        a = analysis("planar_cycle", sigma=sigma)
        assert not a.dissonance.any_dissonant
        assert len(a.partition.outside) <= 4
        assert a.partition.outside.contains_points(np.zeros((1, 2)))[0]


def _report(p, n, e, g):
    def s(flag):
        return CellSet.full(g) if flag else CellSet.empty(g)
    return DissonanceReport(s(p), s(n), s(e), 0, 0, False, True)


@pytest.mark.parametrize("p,n,e,compact,expected", [
    (0, 0, 0, True, True),
    (1, 1, 1, True, True),
    (1, 1, 0, True, False),
    (0, 0, 1, False, False),
    (1, 0, 1, True, False),
    (1, 1, 0, False, True),
])
def test_three_types_logic(p, n, e, compact, expected):
    g = CubicalGrid(PhaseSpace((0.0, 0.0), (1.0, 1.0)), (2, 2))
    assert three_types_check(_report(p, n, e, g), compact) is expected


def test_fixed_points():
    spec = make_spec("planar_saddle", window_for_region(descriptor("planar_saddle").block))
    g = CubicalGrid(spec.space, (64, 64))
    roots = fixed_points(spec, CellSet.full(g))
    assert roots.shape == (1, 2) and np.abs(roots).max() < 1e-10
    a = analysis("planar_cycle", sigma=1.0)
    origin = CellSet(a.grid, a.grid.cell_of(np.zeros((1, 2))) == np.arange(a.grid.ncells).reshape(a.grid.shape))
    assert len(fixed_points(a.spec, ~(a.ip.Inv | origin.dilate(1)))) == 0


def test_annulus_fixed_point_in_bounded_component():
    a = analysis("annulus_nonsaddle")
    comps = (~a.ip.Inv).components(4)
    assert len(comps) == 2
    bounded = [c for c in comps if not c.touches_window_edge()]
    assert len(bounded) == 1
    roots = fixed_points(a.spec, ~a.ip.Inv)
    assert len(roots) == 1
    assert bounded[0].contains_points(roots)[0]
    assert np.hypot(*velocity_batch(a.spec, roots)[0]) <= 1e-10


def test_complement_structure():
    th = analysis("torus_homoclinic").complement
    assert th.L and th.saddle_components and not th.nonsaddle_components and th.cross_check
    an = analysis("annulus_nonsaddle")
    cs = an.complement
    assert cs.L and not cs.saddle_components and cs.cross_check
    assert cs.L_n == cs.L and not cs.L_s


def test_global_influence_check_on_cycle():
    a = analysis("planar_cycle", sigma=1.0)
    res = planar_global_influence_check(a.spec, a.ip.Inv, a.grid.space, a.partition, a.verdict)
    assert not res["hypothesis_met"] and res["outside_cells"] == len(a.partition.outside)
    assert res["consistent"]


def test_parallel_certificate_passes_on_nonsaddle_examples():
    for fid, kw in (("planar_cycle", {"sigma": 1.0}), ("product_circle", {})):
        par = analysis(fid, **kw).report["influence"]["parallel_certificate"]
        live = [r for r in par if not r["exempt"]]
        assert live and all(r["passed"] and set(r["visits"]) == {1} for r in live), fid


def test_influence_labels_count_classes():
    a = analysis("torus_homoclinic")
    lab = influence_labels(a.partition, a.dissonance)
    assert (lab == "K").sum() == len(a.ip.Inv)
    assert (lab == "DISS_E").sum() == len(a.dissonance.externally_dissonant)
    assert lab.size == a.grid.ncells


def test_region_of_influence_refines_consistently():
    # cells classified A_star at 128 stay A_star when refined to 256, up to a thin seam near K
    coarse = analysis("planar_cycle", n=128, sigma=1.0)
    fine = analysis("planar_cycle", n=256, sigma=1.0)
    up = np.kron(coarse.partition.A_star.mask, np.ones((2, 2), bool))
    agree = (up & fine.partition.A_star.mask).sum() / up.sum()
    assert agree > 0.98
    assert euler_of_cells(coarse.partition.region) == euler_of_cells(fine.partition.region)


def test_saddle_node_outside_is_the_closed_disk_of_the_fixed_circle():
    # inside the circle of rest points every orbit runs between two rest points that are not in K
    a = analysis("saddle_node_torus")
    out = a.partition.outside
    g = a.grid
    h = float(max(g.cell_size))
    disk = region_cells(g, {"kind": "disk", "cx": 0.0, "cy": 0.0, "radius": 0.5})
    core = region_cells(g, {"kind": "disk", "cx": 0.0, "cy": 0.0, "radius": 0.5 - 2 * h})
    assert out and out.issubset(disk.dilate(2)) and core.issubset(out)
    c = g.centers()[out.mask]
    assert np.abs(np.hypot(c[:, 0], c[:, 1]) - 0.5).min() <= h
