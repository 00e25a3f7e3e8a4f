"""Acceptance suite: one group of tests per criterion, summarised at the end of the run."""
from __future__ import annotations

import numpy as np
import pytest

from nonsaddle.config import AnalysisConfig
from nonsaddle.cubhom import betti, euler, euler_of_cells, euler_pair
from nonsaddle.flowfield import PhaseSpace, catalogue, velocity_batch
from nonsaddle.grid import CellSet, CubicalGrid, region_cells
from nonsaddle.influence import fixed_points, planar_global_influence_check, three_types_check
from nonsaddle.pipeline import analyze, run
from support import FULL, SETTINGS, analysis

pytestmark = pytest.mark.slow

TORUS = PhaseSpace((0.0, 0.0), (1.0, 1.0), (True, True))
PLANE = PhaseSpace((-2.0, -2.0), (2.0, 2.0))

BLOCK_CASES = [
    ("planar_cycle", {"sigma": 1.0}, "attractor"),
    ("planar_cycle", {"sigma": -1.0}, "repeller"),
    ("annulus_nonsaddle", {}, "non-saddle"),
    ("product_circle", {}, "non-saddle"),
    ("saddle_node_torus", {}, "non-saddle"),
    ("torus_homoclinic", {}, "non-saddle"),
]
CASE_IDS = ["planar_cycle+1", "planar_cycle-1", "annulus_nonsaddle", "product_circle", "saddle_node_torus",
            "torus_homoclinic"]


def _near(comp: CellSet, point, cells: float = 2.0) -> bool:
    g = comp.grid
    d = g.space.distance(g.centers()[comp.mask], np.asarray(point, float))
    return float(d.min()) <= cells * float(max(g.cell_size))


# 1 -------------------------------------------------------------------------

C1 = pytest.mark.criterion(1, "homology oracles and Euler additivity")


@C1
def test_c1_oracles():
    gt = CubicalGrid(TORUS, (32, 32))
    assert betti(CellSet.full(gt), "Z2").betti == (1, 2, 1)
    gp = CubicalGrid(PLANE, (64, 64))
    ann = region_cells(gp, {"kind": "annulus", "cx": 0.0, "cy": 0.0, "r_in": 0.6, "r_out": 1.4})
    disk = region_cells(gp, {"kind": "disk", "cx": 0.0, "cy": 0.0, "radius": 1.0})
    assert betti(ann, "Z2").betti == (1, 1, 0)
    assert betti(disk, "Z2").betti == (1, 0, 0)


@C1
def test_c1_euler_additivity_on_random_pairs():
    rng = np.random.default_rng(20261015)
    for k in range(10):
        space = (PLANE, TORUS)[k % 2]
        g = CubicalGrid(space, (24, 24))
        X = CellSet(g, rng.random(g.shape) < 0.65)
        A = X & CellSet(g, rng.random(g.shape) < 0.5)
        chi_x = euler(betti(X))
        assert chi_x == euler_pair((X, A)) + euler(betti(A))
        assert chi_x == euler_of_cells(X)


# 2 -------------------------------------------------------------------------


@pytest.mark.criterion(2, "index-pair invariants and block verdicts at 256x256")
@pytest.mark.parametrize("fid,params,verdict", BLOCK_CASES, ids=CASE_IDS)
def test_c2_block_structure(fid, params, verdict):
    a = analysis(fid, **params)
    ip = a.ip
    assert (ip.Nplus & ip.Nminus) == ip.Inv
    assert not (ip.exit & ip.Nplus)
    assert not (ip.entrance & ip.Nminus)
    assert a.verdict == verdict


# 3 -------------------------------------------------------------------------

C3 = pytest.mark.criterion(3, "Conley certificate")


@C3
def test_c3_product_circle_certified():
    a = analysis("product_circle")
    assert a.certificate.verdict == "non-saddle-certified"
    assert a.conley.ch_plus.rank(1) == 0 and a.conley.ch_minus.rank(1) == 0


@C3
def test_c3_planar_saddle_inconclusive():
    a = analysis("planar_saddle", stages=("classify", "conley"))
    assert a.certificate.verdict == "inconclusive"
    assert a.conley.ch_plus.rank(1) == 1


# 4 -------------------------------------------------------------------------

C4 = pytest.mark.criterion(4, "dissonance ground truth")


@C4
def test_c4_torus_homoclinic():
    a = analysis("torus_homoclinic")
    D = a.dissonance
    comps = D.externally_dissonant.components(4)
    assert len(comps) == 1
    assert _near(comps[0], (0.0, 0.5))
    assert D.positively_dissonant and D.negatively_dissonant
    assert three_types_check(D, a.grid.space.is_torus)


@C4
def test_c4_saddle_node_torus():
    D = analysis("saddle_node_torus").dissonance
    comps = D.externally_dissonant.components(4)
    assert len(comps) == 2
    assert any(_near(c, (0.0, 0.5)) for c in comps)
    assert any(_near(c, (0.0, -0.5)) for c in comps)


@C4
@pytest.mark.parametrize("sigma", [1.0, -1.0])
def test_c4_planar_cycle_clean(sigma):
    D = analysis("planar_cycle", sigma=sigma).dissonance
    assert not D.positively_dissonant and not D.negatively_dissonant and not D.externally_dissonant


# 5 -------------------------------------------------------------------------

C5 = pytest.mark.criterion(5, "Euler characteristic detects dissonance")


@C5
@pytest.mark.parametrize("fid,params,verdict", BLOCK_CASES, ids=CASE_IDS)
def test_c5_euler_matches_dissonance(fid, params, verdict):
    D = analysis(fid, **params).dissonance
    assert D.euler_verdict == D.any_dissonant


@C5
@pytest.mark.parametrize("n", [128, 256, 512])
def test_c5_torus_homoclinic_resolution_stable(n):
    D = analysis("torus_homoclinic", n=n).dissonance
    assert (D.euler_K, D.euler_I) == (0, -1)
    assert D.euler_verdict and D.any_dissonant


# 6 -------------------------------------------------------------------------


@pytest.mark.criterion(6, "fixed point count in the bounded complement")
def test_c6_annulus_fixed_point():
    a = analysis("annulus_nonsaddle")
    K = a.ip.Inv
    comps = (~K).components(4)
    assert len(comps) == 2
    roots = fixed_points(a.spec, ~K)
    assert len(roots) == 1
    bounded = [c for c in comps if not c.touches_window_edge()]
    assert len(bounded) == 1 and bounded[0].contains_points(roots)[0]
    assert np.hypot(*velocity_batch(a.spec, roots)[0]) <= 1e-10
    assert len(roots) >= len(comps) - 1


# 7 -------------------------------------------------------------------------

C7 = pytest.mark.criterion(7, "planar global influence")


@C7
def test_c7_linear_sink():
    a = analysis("linear_sink", stages=("classify", "influence"))
    res = planar_global_influence_check(a.spec, a.ip.Inv, a.grid.space, a.partition, a.verdict)
    assert not a.partition.outside
    assert res["hypothesis_met"] and res["verdict"] == "attractor" and res["consistent"]


@C7
def test_c7_planar_saddle():
    a = analysis("planar_saddle", stages=("classify", "influence"))
    res = planar_global_influence_check(a.spec, a.ip.Inv, a.grid.space, a.partition, a.verdict)
    assert not res["hypothesis_met"]
    assert res["verdict"] == "saddle" and res["consistent"]


# 8 -------------------------------------------------------------------------


@pytest.mark.criterion(8, "duality under field reversal")
@pytest.mark.parametrize("fid", [d.field_id for d in catalogue()])
def test_c8_reversal_duality(fid):
    a = analysis(fid, n=128)
    r = analysis(fid, n=128, reversed=True)
    assert r.ip.Inv == a.ip.Inv
    assert r.ip.Nplus == a.ip.Nminus and r.ip.Nminus == a.ip.Nplus
    assert r.ip.exit == a.ip.entrance and r.ip.entrance == a.ip.exit
    P, Q = a.partition, r.partition
    assert Q.A_star == P.R_star and Q.R_star == P.A_star
    assert Q.H_minus_K == P.H_minus_K and Q.outside == P.outside
    D, E = a.dissonance, r.dissonance
    assert E.positively_dissonant == D.negatively_dissonant
    assert E.negatively_dissonant == D.positively_dissonant
    assert E.externally_dissonant == D.externally_dissonant
    assert r.conley.ch_plus.betti == a.conley.ch_minus.betti
    assert r.conley.ch_minus.betti == a.conley.ch_plus.betti


# 9 -------------------------------------------------------------------------


@pytest.mark.criterion(9, "robustness of the non-saddle family")
def test_c9_robust_family():
    lams = (-0.05, 0.0, 0.01, 0.04, 0.09, 0.16)
    cfg = AnalysisConfig("robust_family", resolution=256, tau=1.0, step=0.01, stages=("robustness",), lambdas=lams)
    a = analyze(cfg)
    rob = a.report["robustness"]
    recs = {r["lambda"]: r for r in rob["records"]}
    assert recs[-0.05]["empty"] and recs[-0.05]["isolating"]
    assert rob["window"] == [0.0, 0.16]
    assert rob["dynamically_robust"] and rob["topologically_robust"] and rob["equivalence_holds"]
    assert all(recs[lam]["betti"] == [1, 1, 0] for lam in lams[1:])
    assert [-0.05, 0.0] in rob["breakdown_brackets"]


# 10 ------------------------------------------------------------------------


@pytest.mark.criterion(10, "byte-identical reports")
def test_c10_reproducible_reports(tmp_path):
    tau, step = SETTINGS["torus_homoclinic"]
    cfg = AnalysisConfig("torus_homoclinic", resolution=128, tau=tau, step=step, stages=FULL,
                         output_dir=str(tmp_path), n_perturb=16, max_confirm=2, seed=7)
    names = ("report.json", "cells_block.csv", "cells_influence.csv")
    run(cfg)
    first = {n: (tmp_path / n).read_bytes() for n in names}
    run(cfg)
    second = {n: (tmp_path / n).read_bytes() for n in names}
    assert first == second
    assert first["report.json"].count(b"\n") > 10
