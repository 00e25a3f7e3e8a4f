"""Run configured analysis stages and assemble the JSON report."""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import AnalysisConfig
from .conley import conley_indices, nonsaddle_by_conley, small_neighborhood_test, torus_shape_check
from .flowfield import FlowSpec, catalogue, make_spec, velocity_batch
from .grid import (
    NON_SADDLE,
    CubicalGrid,
    IndexPair,
    NotIsolatingError,
    OuterMap,
    build_outer_maps,
    cell_labels,
    default_tau,
    index_pair,
    nonsaddle_test,
    region_cells,
    write_cell_dump,
)
from .influence import (
    ClassifierSettings,
    complement_structure,
    dissonance_report,
    fixed_points,
    influence_labels,
    influence_partition,
    parallel_certificate,
    planar_global_influence_check,
    three_types_check,
)
from .robustness import continue_family, robustness_verdict

__all__ = ["StageError", "Analysis", "analyze", "run", "list_flows", "report_json", "write_report"]

SCHEMA_VERSION = 1


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.message = message


@dataclass(eq=False)
class Analysis:
    """Everything computed by one run; ``report`` is the JSON-ready summary."""

    config: AnalysisConfig
    spec: FlowSpec
    grid: CubicalGrid
    tau: float
    F: OuterMap | None = None
    B: OuterMap | None = None
    ip: IndexPair | None = None
    verdict: str | None = None
    conley: object = None
    certificate: object = None
    partition: object = None
    dissonance: object = None
    complement: object = None
    continuation: object = None
    report: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)


def list_flows() -> list[dict]:
    rows = []
    for d in catalogue():
        rows.append({
            "id": d.field_id,
            "formula": d.formula,
            "space": "torus" if d.space is not None else "plane",
            "params": dict(d.params),
            "param_doc": dict(d.param_doc),
            "fixed_points": d.fixed_points,
            "block": dict(d.block),
        })
    return rows


def _check(name: str, statement: str, status, detail=None) -> dict:
    if status is None:
        st = "n/a"
    else:
        st = "pass" if status else "fail"
    return {"name": name, "statement": statement, "status": st, "detail": detail}


def _prep(cfg: AnalysisConfig) -> Analysis:
    space = cfg.space()
    spec = make_spec(cfg.flow_id, space, cfg.params, cfg.reversed)
    grid = CubicalGrid(space, (cfg.resolution, cfg.resolution))
    tau = cfg.tau if cfg.tau is not None else default_tau(grid, spec)
    return Analysis(cfg, spec, grid, float(tau))


def _stage_classify(a: Analysis, timing: dict) -> None:
    cfg = a.config
    t = time.perf_counter()
    a.F, a.B = build_outer_maps(a.grid, a.spec, a.tau, cfg.samples_per_axis, cfg.inflate, cfg.step)
    N = region_cells(a.grid, cfg.resolved_block())
    if not N:
        raise StageError("classify", "block contains no cells at this resolution")
    try:
        a.ip = index_pair(a.F, a.B, N)
    except NotIsolatingError as exc:
        raise StageError("classify", str(exc)) from None
    a.verdict = nonsaddle_test(a.ip) if a.ip.Inv else "empty"
    timing["classify"] = time.perf_counter() - t
    a.report["verdict"] = a.verdict
    a.report["index_pair"] = {"counts": a.ip.summary(), "checks": a.ip.check()}


def _stage_conley(a: Analysis, timing: dict) -> list:
    t = time.perf_counter()
    cfg = a.config
    a.conley = conley_indices(a.ip, cfg.coefficients)
    a.certificate = nonsaddle_by_conley(a.ip, report=a.conley, coefficients=cfg.coefficients)
    small = small_neighborhood_test(a.F, a.B, a.ip)
    sec = {"indices": a.conley.as_dict(), "certificate": a.certificate.as_dict(), "small_neighborhood": small}
    checks = [
        _check("conley_certificate", "a certified block is non-saddle under the cell test",
               a.certificate.consistent, a.certificate.verdict),
        _check("small_neighborhood", "one-sided small blocks agree with the block verdict",
               None if small == "inconclusive" else small == a.verdict, small),
    ]
    if a.grid.space.is_torus:
        shape = torus_shape_check(a.ip, a.grid.space, cfg.coefficients)
        sec["torus_shape"] = shape
        checks.append(_check("torus_shape", "a non-separating non-saddle set has the profile of a circle",
                             shape["consistent"] if shape["hypotheses_hold"] else None, shape["betti"]))
    a.report["conley"] = sec
    timing["conley"] = time.perf_counter() - t
    return checks


def _stage_influence(a: Analysis, timing: dict) -> list:
    t = time.perf_counter()
    cfg = a.config
    K = a.ip.Inv
    settings = ClassifierSettings(cfg.T_max, cfg.tol_cells, cfg.step, cfg.hop, cfg.extend)
    P = influence_partition(a.spec, K, a.grid, settings=settings)
    D = dissonance_report(a.spec, K, P, a.grid, n_perturb=cfg.n_perturb, seed=cfg.seed,
                          max_confirm=cfg.max_confirm)
    a.partition, a.dissonance = P, D
    compact = a.grid.space.is_torus
    nonsaddle = a.verdict in NON_SADDLE
    cs = complement_structure(a.F, a.B, P, D)
    a.complement = cs
    par = parallel_certificate(a.spec, P, D, a.ip.N, step=cfg.step)
    H = P.H_minus_K
    diss = D.positively_dissonant | D.negatively_dissonant | D.externally_dissonant
    closure_ok = diss.issubset((~H).neighbours_of(H, 8))
    sec = {
        "partition": P.summary(),
        "partition_checks": P.check(),
        "dissonance": D.summary(),
        "three_types": three_types_check(D, compact),
        "complement": cs.summary(),
        "parallel_certificate": par,
    }
    checks = [
        _check("partition_total", "the five influence classes partition the grid", all(P.check().values())),
        _check("closure", "every dissonant cell touches the homoclinic region", closure_ok),
        _check("three_types", "external dissonance comes with positive and negative dissonance",
               three_types_check(D, compact)),
        _check("euler_agreement", "chi(K) differs from chi(I(K)) exactly when dissonant cells exist",
               D.agreement, [D.euler_K, D.euler_I]),
        _check("complement_structure", "every externally dissonant region hosts part of L", cs.cross_check),
        _check("parallel_certificate", "for non-saddle K, witness orbits of dissonance-free components "
               "cross one block boundary component once",
               all(r["passed"] for r in par) if par and nonsaddle else None),
    ]
    if a.grid.space.is_planar:
        glob = planar_global_influence_check(a.spec, K, a.grid.space, P, a.verdict)
        sec["global_influence"] = glob
        checks.append(_check("global_influence", "I(K) covering the window forces a global attractor or repeller",
                             glob["consistent"] if glob["hypothesis_met"] else None, glob["verdict"]))
        comps = (~K).components(4)
        roots = fixed_points(a.spec, ~K)
        speed = np.hypot(*velocity_batch(a.spec, roots).T) if len(roots) else np.zeros(0)
        bounded = [c for c in comps if not c.touches_window_edge()]
        sec["fixed_points"] = {
            "complement_components": len(comps),
            "bounded_components": len(bounded),
            "points": [[float(x), float(y)] for x, y in roots],
            "max_speed": float(speed.max()) if len(speed) else 0.0,
        }
        if nonsaddle and K:
            checks.append(_check("fixed_point_count", "a non-saddle set cutting the plane into i pieces "
                                 "leaves at least i-1 equilibria", len(roots) >= len(comps) - 1,
                                 [len(roots), len(comps)]))
    a.report["influence"] = sec
    timing["influence"] = time.perf_counter() - t
    return checks


def _stage_robustness(a: Analysis, timing: dict) -> list:
    t = time.perf_counter()
    cfg = a.config
    N = region_cells(a.grid, cfg.resolved_block())
    try:
        run_ = continue_family(a.spec, N, cfg.lambdas, a.grid, a.tau, cfg.robust_param,
                               cfg.samples_per_axis, cfg.inflate, cfg.step)
    except ValueError as exc:
        raise StageError("robustness", str(exc)) from None
    a.continuation = run_
    verdict = robustness_verdict(run_)
    a.report["robustness"] = {
        "param": cfg.robust_param,
        "records": [r.as_dict() for r in run_.records],
        **verdict,
    }
    timing["robustness"] = time.perf_counter() - t
    return [_check("robust_equivalence", "dynamical and topological robustness agree on planar spaces",
                   verdict["equivalence_holds"])]


def analyze(cfg: AnalysisConfig) -> Analysis:
    """Execute the configured stages in dependency order without writing files."""
    try:
        a = _prep(cfg)
    except ValueError as exc:
        raise StageError("setup", str(exc)) from None
    timing: dict = {}
    a.report = {
        "schema_version": SCHEMA_VERSION,
        "tool": {"name": "nonsaddle", "version": __version__},
        "config": cfg.as_dict(),
        "tau": a.tau,
        "verdict": None,
        "index_pair": None,
        "conley": None,
        "influence": None,
        "robustness": None,
        "cross_checks": [],
    }
    checks = []
    stages = set(cfg.stages)
    if stages & {"classify", "conley", "influence"}:
        _stage_classify(a, timing)
        checks.append(_check("index_pair_invariants", "exit and entrance structure of the block",
                             all(a.report["index_pair"]["checks"].values())))
    if "conley" in stages:
        checks += _stage_conley(a, timing)
    if "influence" in stages:
        checks += _stage_influence(a, timing)
    if "robustness" in stages:
        checks += _stage_robustness(a, timing)
    a.report["cross_checks"] = checks
    if cfg.timing:
        a.report["timing"] = {k: round(v, 3) for k, v in timing.items()}
    return a


def report_json(report: dict) -> str:
    return json.dumps(_plain(report), indent=2, sort_keys=True) + "\n"


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def write_report(a: Analysis, cells: bool | None = None) -> list[str]:
    cfg = a.config
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if cfg.write_cells if cells is None else cells:
        if a.ip is not None:
            p = out / "cells_block.csv"
            write_cell_dump(p, cell_labels(a.ip), "label")
            written.append(p.name)
        if a.partition is not None:
            p = out / "cells_influence.csv"
            write_cell_dump(p, influence_labels(a.partition, a.dissonance), "class")
            written.append(p.name)
    a.report["artifacts"] = sorted(written + [cfg.report_name])
    path = out / cfg.report_name
    path.write_text(report_json(a.report))
    return written + [path.name]


def run(cfg: AnalysisConfig) -> Analysis:
    """Analyze and write the report plus cell dumps into ``cfg.output_dir``."""
    a = analyze(cfg)
    a.artifacts = write_report(a)
    return a
