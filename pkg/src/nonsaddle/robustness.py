"""Continuation of an isolated invariant set through a one-parameter family in a fixed block."""
from __future__ import annotations

from dataclasses import dataclass, field

from .cubhom import betti
from .flowfield import FlowSpec
from .grid import NON_SADDLE, CellSet, CubicalGrid, NotIsolatingError, build_outer_maps, index_pair, nonsaddle_test

__all__ = ["ContinuationRecord", "ContinuationRun", "continue_family", "robustness_verdict"]


@dataclass
class ContinuationRecord:
    lam: float
    isolating: bool
    Inv: CellSet | None = field(repr=False)
    verdict: str  # nonsaddle_test verdict, "empty" or "not-isolating"
    betti: tuple | None  # Z2 profile of Nplus | Nminus

    @property
    def empty(self) -> bool:
        return self.Inv is not None and not self.Inv

    @property
    def breakdown(self) -> bool:
        return not self.isolating or self.empty

    def as_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "isolating": self.isolating,
            "empty": self.empty,
            "inv_cells": None if self.Inv is None else len(self.Inv),
            "verdict": self.verdict,
            "betti": None if self.betti is None else list(self.betti),
        }


@dataclass
class ContinuationRun:
    family_id: str
    param: str
    lambda_grid: tuple
    N: CellSet = field(repr=False)
    records: list
    planar: bool
    tau: float

    def window(self) -> list[ContinuationRecord]:
        """Longest contiguous run of records without breakdown (first one on ties)."""
        best, cur = [], []
        for rec in self.records:
            if rec.breakdown:
                cur = []
                continue
            cur.append(rec)
            if len(cur) > len(best):
                best = list(cur)
        return best


def continue_family(family: FlowSpec, N: CellSet, lambda_grid, grid: CubicalGrid | None = None,
                    tau: float = 1.0, param: str = "lam", samples_per_axis: int = 3, inflate: int = 1,
                    step: float = 1e-2) -> ContinuationRun:
    """Rebuild the outer maps at every parameter value with the same N, grid and tau."""
    grid = grid or N.grid
    lams = tuple(float(v) for v in lambda_grid)
    if not lams:
        raise ValueError("empty parameter grid")
    records = []
    for k, lam in enumerate(lams):
        spec = family.with_params(**{param: lam})
        F, B = build_outer_maps(grid, spec, tau, samples_per_axis, inflate, step)
        try:
            ip = index_pair(F, B, N)
        except NotIsolatingError:
            if k == 0:
                raise ValueError(f"N is not isolating at {param}={lam}") from None
            records.append(ContinuationRecord(lam, False, None, "not-isolating", None))
            continue
        if not ip.Inv:
            records.append(ContinuationRecord(lam, True, ip.Inv, "empty", None))
            continue
        prof = betti(ip.Nplus | ip.Nminus, "Z2")
        records.append(ContinuationRecord(lam, True, ip.Inv, nonsaddle_test(ip), tuple(prof.betti)))
    return ContinuationRun(family.field_id, param, lams, N, records, grid.space.is_planar, tau)


def _brackets(run: ContinuationRun, window: list) -> list:
    if not window:
        return []
    out = []
    pos = {id(rec): k for k, rec in enumerate(run.records)}
    idx = [pos[id(window[0])], pos[id(window[-1])]]
    if idx[0] > 0:
        out.append([run.records[idx[0] - 1].lam, window[0].lam])
    if idx[1] < len(run.records) - 1:
        out.append([window[-1].lam, run.records[idx[1] + 1].lam])
    return out


def robustness_verdict(run: ContinuationRun) -> dict:
    """Dynamical and topological robustness on the unbroken parameter window.

    The two notions are expected to agree only on planar phase spaces; elsewhere
    the comparison is reported but not asserted.
    """
    win = run.window()
    dyn = bool(win) and all(r.verdict in NON_SADDLE for r in win)
    top = bool(win) and all(r.betti == win[0].betti for r in win)
    equiv = dyn == top
    return {
        "window": [win[0].lam, win[-1].lam] if win else None,
        "dynamically_robust": dyn,
        "topologically_robust": top,
        "equivalence_holds": equiv if run.planar else None,
        "equivalence_observed": equiv,
        "equivalence_asserted": run.planar,
        "breakdown_brackets": _brackets(run, win),
    }
