"""Cohomological Conley indices of index pairs and the classification tests built on them."""
from __future__ import annotations

from dataclasses import dataclass, field

from .cubhom import BettiProfile, betti, relative_betti
from .flowfield import PhaseSpace
from .grid import CellSet, IndexPair, NotIsolatingError, OuterMap, index_pair, nonsaddle_test

__all__ = [
    "ConleyIndexReport",
    "CertificateResult",
    "conley_indices",
    "nonsaddle_by_conley",
    "small_neighborhood_test",
    "torus_shape_check",
]


@dataclass
class ConleyIndexReport:
    ch_plus: BettiProfile  # H*(N, exit)
    ch_minus: BettiProfile  # H*(N, entrance)
    block: IndexPair = field(repr=False)

    def as_dict(self) -> dict:
        return {"ch_plus": self.ch_plus.as_dict(), "ch_minus": self.ch_minus.as_dict()}


def conley_indices(ip: IndexPair, coefficients: str = "Z2") -> ConleyIndexReport:
    # over a field the cohomology ranks equal these homology ranks
    return ConleyIndexReport(
        relative_betti((ip.N, ip.exit), coefficients),
        relative_betti((ip.N, ip.entrance), coefficients),
        ip,
    )


@dataclass
class CertificateResult:
    verdict: str  # "non-saddle-certified" | "inconclusive"
    conditions: dict
    block_verdict: str
    consistent: bool

    def as_dict(self) -> dict:
        return {"verdict": self.verdict, "conditions": dict(self.conditions),
                "block_verdict": self.block_verdict, "consistent": self.consistent}


def nonsaddle_by_conley(ip: IndexPair, W: CellSet | None = None,
                        report: ConleyIndexReport | None = None,
                        coefficients: str = "Z2") -> CertificateResult:
    """Certificate: W connected, W - Inv has two components, both first
    Conley ranks vanish, and the block has nonempty exit and entrance."""
    W = ip.N if W is None else W
    if not (ip.Inv.issubset(W) and W.issubset(ip.N)):
        raise ValueError("need Inv <= W <= N")
    report = report or conley_indices(ip, coefficients)
    cond = {
        "w_connected": W.n_components(4) == 1,
        "two_sides": (W - ip.Inv).n_components(4) == 2,
        "ch_plus_rank1_zero": report.ch_plus.rank(1) == 0,
        "ch_minus_rank1_zero": report.ch_minus.rank(1) == 0,
        "exit_nonempty": bool(ip.exit),
        "entrance_nonempty": bool(ip.entrance),
    }
    ok = all(cond.values())
    block = nonsaddle_test(ip)
    return CertificateResult(
        "non-saddle-certified" if ok else "inconclusive",
        cond,
        block,
        (not ok) or block == "non-saddle",
    )


def small_neighborhood_test(F: OuterMap, Fback: OuterMap, ip: IndexPair, depth: int = 3) -> str:
    """Shrink blocks around Inv and look for one-sided behaviour at every scale."""
    votes = []
    for d in range(depth):
        radius = 2 ** (depth - 1 - d)
        W = ip.Inv.dilate(radius) & ip.N
        try:
            sub = index_pair(F, Fback, W)
        except NotIsolatingError:
            votes.append("inconclusive")
            continue
        if not (sub.Nminus - sub.Inv):
            votes.append("attractor")
        elif not (sub.Nplus - sub.Inv):
            votes.append("repeller")
        else:
            # both sides populated; connected complement would contradict the dichotomy
            votes.append("inconclusive")
    if votes and all(v == "attractor" for v in votes):
        return "attractor"
    if votes and all(v == "repeller" for v in votes):
        return "repeller"
    return "inconclusive"


def torus_shape_check(ip: IndexPair, space: PhaseSpace, coefficients: str = "Z2") -> dict:
    """On the torus: a non-separating non-saddle set that is neither attractor
    nor repeller should have the Betti profile of a circle."""
    if not space.is_torus:
        raise ValueError("shape check needs a toroidal phase space")
    verdict = nonsaddle_test(ip)
    comp_connected = (~ip.Inv).n_components(4) == 1
    hyp = comp_connected and verdict == "non-saddle"
    prof = betti(ip.Nplus | ip.Nminus, coefficients)
    circle = tuple(prof.betti) == (1, 1, 0)
    return {
        "complement_connected": comp_connected,
        "verdict": verdict,
        "hypotheses_hold": hyp,
        "betti": list(prof.betti),
        "circle_profile": circle,
        "consistent": (not hyp) or circle,
        "note": "first cohomology of the torus is nonzero; recorded, not computed",
    }
