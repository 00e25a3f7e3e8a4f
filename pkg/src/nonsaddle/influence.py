"""Region of influence, its partition, dissonant cells and the consistency checks built on them.

Cell verdicts come from forward and backward orbits of five samples per cell: the
centre and the four corners. An orbit counts as attracted (or repelled) when every
late sample, taken from the second half of ``[0, T_max]``, lies within ``tol`` of
the K cells.

Sweeping all cells of a 512x512 grid with direct RK4 is too slow. The sweep
therefore iterates a hop map instead: the time-``hop`` flow map is evaluated once
on the vertex lattice and interpolated bilinearly in between. Samples that leave
the window or meet an escaped vertex are integrated directly. :func:`classify_point`
always integrates directly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import ndimage

from .cubhom import euler_of_cells
from .flowfield import FlowSpec, _rk4_steps, flow_map_batch, velocity_batch
from .grid import NON_SADDLE, CellSet, CubicalGrid, OuterMap, invariant_part

__all__ = [
    "ClassifierSettings",
    "InfluencePartition",
    "DissonanceReport",
    "ComplementStructure",
    "near_mask",
    "classify_point",
    "influence_partition",
    "prolongational_limit",
    "prolongational_pairs",
    "dissonance_report",
    "three_types_check",
    "fixed_points",
    "planar_global_influence_check",
    "complement_structure",
    "parallel_certificate",
    "influence_labels",
]

VERDICTS = ("A_star", "R_star", "homoclinic", "K", "outside")


@dataclass(frozen=True)
class ClassifierSettings:
    T_max: float = 200.0
    tol_cells: float = 2.0  # tolerance in cell diameters
    step: float = 1e-2
    hop: float = 1.0
    extend: int = 3  # horizon doublings granted to orbits still undecided at T_max

    def tol(self, grid: CubicalGrid) -> float:
        return self.tol_cells * grid.cell_diameter

    @property
    def n_hops(self) -> int:
        return max(2, int(round(self.T_max / self.hop)))

    def stages(self) -> list[int]:
        """Hop counts closing each horizon stage; stage k+1 has its tail after stage k."""
        return [self.n_hops * 2 ** k for k in range(self.extend + 1)]


def near_mask(K: CellSet, tol: float) -> np.ndarray:
    """Cells whose centre lies within ``tol`` of some K cell centre."""
    grid = K.grid
    if not K:
        return np.zeros(grid.shape, bool)
    d = grid.cell_size
    pad = [int(math.ceil(tol / d[k])) + 1 for k in range(2)]
    m = K.mask
    for axis in range(2):
        width = [(0, 0), (0, 0)]
        width[axis] = (pad[axis], pad[axis])
        mode = "wrap" if grid.space.periodic[axis] else "constant"
        m = np.pad(m, width, mode=mode)
    dist = ndimage.distance_transform_edt(~m, sampling=d)
    dist = dist[pad[0]:pad[0] + grid.shape[0], pad[1]:pad[1] + grid.shape[1]]
    return dist <= tol + 1e-12


def _lookup(grid, mask, pts):
    flat = grid.cell_of(pts)
    m = mask.ravel()
    return np.where(flat >= 0, m[np.maximum(flat, 0)], False)


# ---------------------------------------------------------------------------
# direct classification


def _tails_direct(spec, pts, cfg: ClassifierSettings, direction: int):
    """Positions at the late hop times, shape (n, ntail, 2), plus escape flags."""
    n_hops = cfg.n_hops
    hop = cfg.hop * direction
    h_steps = max(1, int(math.ceil(cfg.hop / cfg.step - 1e-9)))
    h = hop / h_steps
    x = np.asarray(pts, float).reshape(-1, 2)
    esc = np.zeros(len(x), bool)
    tails = []
    check = not spec.space.is_torus
    for k in range(1, n_hops + 1):
        x, e, _ = _rk4_steps(spec, x, h, h_steps, check)
        esc |= e
        if k >= n_hops // 2:
            tails.append(spec.space.wrap(x))
    return np.stack(tails, 1), esc


def _attracted_direct(spec, pts, near, grid, cfg: ClassifierSettings, direction: int) -> np.ndarray:
    h_steps = max(1, int(math.ceil(cfg.hop / cfg.step - 1e-9)))
    h = direction * cfg.hop / h_steps
    x = np.asarray(pts, float).reshape(-1, 2)
    n = len(x)
    res = np.zeros(n, bool)
    live = np.arange(n)
    tail_ok = np.ones(n, bool)
    stages = cfg.stages()
    stage, tail_start = 0, cfg.n_hops // 2
    check = not spec.space.is_torus
    for k in range(1, stages[-1] + 1):
        x, esc, _ = _rk4_steps(spec, x, h, h_steps, check)
        if k >= tail_start:
            tail_ok &= _lookup(grid, near, spec.space.wrap(x))
        keep = ~esc
        if k == stages[stage]:
            res[live[tail_ok & keep]] = True
            keep &= ~tail_ok
            tail_ok[:] = True
            stage, tail_start = stage + 1, k + 1
        live, x, tail_ok = live[keep], x[keep], tail_ok[keep]
        if not len(live):
            break
    return res


def classify_point(spec: FlowSpec, K: CellSet, x, T_max: float = 200.0, tol: float | None = None,
                   step: float = 1e-2, hop: float = 1.0) -> str:
    """Verdict for one point: A_star, R_star, homoclinic, K or outside."""
    if T_max <= 0:
        raise ValueError("T_max must be positive")
    grid = K.grid
    x = np.asarray(x, float).reshape(1, 2)
    if K.contains_points(x)[0]:
        return "K"
    cfg = ClassifierSettings(T_max, 2.0 if tol is None else tol / grid.cell_diameter, step, hop)
    near = near_mask(K, cfg.tol(grid))
    hit = [bool(_attracted_direct(spec, x, near, grid, cfg, d)[0]) for d in (1, -1)]
    a, r = hit
    return "homoclinic" if a and r else "A_star" if a else "R_star" if r else "outside"


# ---------------------------------------------------------------------------
# hop-map sweep


class _Lattice:
    """Time-``hop`` displacements sampled on a vertex lattice."""

    def __init__(self, spec, lo, cs, axes, periodic, hop, step):
        self.lo = np.array(lo, float)
        self.cs = np.array(cs, float)
        self.periodic = np.array(periodic, np.bool_)
        self.shape = (len(axes[0]), len(axes[1]))
        X, Y = np.meshgrid(axes[0], axes[1], indexing="ij")
        V = np.stack([X.ravel(), Y.ravel()], 1)
        nsteps = max(1, int(math.ceil(abs(hop) / step - 1e-9)))
        out, esc, _ = _rk4_steps(spec, V, hop / nsteps, nsteps, not spec.space.is_torus)
        disp = out - V
        bad = esc | ~np.isfinite(disp).all(1)
        disp[bad] = 0.0
        self.disp = disp.reshape(self.shape + (2,))
        self.bad = bad.reshape(self.shape)

    def apply(self, pts, near, per):
        new = np.empty_like(pts)
        direct = np.empty(len(pts), np.bool_)
        isnear = np.empty(len(pts), np.bool_)
        _hop_kernel(pts, self.disp, self.bad, near, self.lo, self.cs, per, self.periodic, new, direct, isnear)
        return new, direct, isnear


class _HopMap:
    """Interpolated hop map: the grid's own vertex lattice plus, on planar
    windows, a coarser lattice over the whole escape box for orbits that
    leave the window and may come back."""

    def __init__(self, grid: CubicalGrid, spec: FlowSpec, hop: float, step: float, outer_vertices: int = 257):
        self.grid = grid
        self.spec = spec
        self.hop = hop
        self.step = step
        sp = grid.space
        self.per = np.array([sp.period[k] if sp.periodic[k] else 0.0 for k in range(2)])
        axes = [grid.lattice_axis(k, 1) for k in range(2)]
        self.inner = _Lattice(spec, sp.lo, grid.cell_size, axes, sp.periodic, hop, step)
        self.outer = None
        if sp.is_planar:
            reach = sp.escape_factor * sp.diameter
            c = sp.center
            lo = c - reach
            cs = np.full(2, 2 * reach / (outer_vertices - 1))
            ax = [lo[k] + cs[k] * np.arange(outer_vertices) for k in range(2)]
            self.outer = _Lattice(spec, lo, cs, ax, (False, False), hop, step)
            self._outer_near = np.zeros((outer_vertices - 1, outer_vertices - 1), np.bool_)

    def advance(self, pts, near):
        """One hop for every point; returns positions, escape flags and near-K flags."""
        g = self.grid
        sp = g.space
        esc = np.zeros(len(pts), bool)
        new, direct, isnear = self.inner.apply(pts, near, self.per)
        if self.outer is not None and direct.any():
            gone = direct & sp.escaped(pts)
            esc |= gone
            new[gone] = pts[gone]
            direct &= ~gone
            sel = np.flatnonzero(direct)
            if len(sel):
                q, d2, _ = self.outer.apply(pts[sel], self._outer_near, self.per)
                ok = ~d2
                new[sel[ok]] = q[ok]
                direct[sel[ok]] = False
                isnear[sel[ok]] = _lookup(g, near, q[ok])
        if direct.any():
            sel = np.flatnonzero(direct)
            out, e, _ = flow_map_batch(self.spec, pts[sel], self.hop, self.step)
            new[sel] = out
            esc[sel] = e
            isnear[sel] = _lookup(g, near, out)
        return new, esc, isnear


@njit(cache=True)
def _hop_kernel(p, disp, bad, near, lo, cs, per, periodic, new, direct, isnear):
    nv0, nv1 = bad.shape
    nc0, nc1 = near.shape
    for m in range(p.shape[0]):
        x, y = p[m, 0], p[m, 1]
        f0 = (x - lo[0]) / cs[0]
        f1 = (y - lo[1]) / cs[1]
        direct[m] = False
        isnear[m] = False
        if not (np.isfinite(f0) and np.isfinite(f1)):
            direct[m] = True
            continue
        i0 = np.floor(f0)
        a = f0 - i0
        j0 = np.floor(f1)
        b = f1 - j0
        if periodic[0]:
            i0 = i0 % nv0
            i1 = (i0 + 1) % nv0
        else:
            if f0 == nv0 - 1:
                i0 -= 1
                a = 1.0
            if i0 < 0 or i0 > nv0 - 2:
                direct[m] = True
                continue
            i1 = i0 + 1
        if periodic[1]:
            j0 = j0 % nv1
            j1 = (j0 + 1) % nv1
        else:
            if f1 == nv1 - 1:
                j0 -= 1
                b = 1.0
            if j0 < 0 or j0 > nv1 - 2:
                direct[m] = True
                continue
            j1 = j0 + 1
        ia, ib, ja, jb = int(i0), int(i1), int(j0), int(j1)
        if bad[ia, ja] or bad[ib, ja] or bad[ia, jb] or bad[ib, jb]:
            direct[m] = True
            continue
        w00 = (1 - a) * (1 - b)
        w10 = a * (1 - b)
        w01 = (1 - a) * b
        w11 = a * b
        q = np.empty(2)
        for k in range(2):
            q[k] = p[m, k] + w00 * disp[ia, ja, k] + w10 * disp[ib, ja, k] + w01 * disp[ia, jb, k] + w11 * disp[ib, jb, k]
            if periodic[k]:
                v = (q[k] - lo[k]) % per[k]
                if v >= per[k]:
                    v = 0.0
                q[k] = lo[k] + v
        new[m, 0] = q[0]
        new[m, 1] = q[1]
        c0 = np.floor((q[0] - lo[0]) / cs[0])
        c1 = np.floor((q[1] - lo[1]) / cs[1])
        if periodic[0]:
            c0 = c0 % nc0
        if periodic[1]:
            c1 = c1 % nc1
        if 0 <= c0 < nc0 and 0 <= c1 < nc1:
            isnear[m] = near[int(c0), int(c1)]


def _sweep(grid, spec, near, pts, cfg: ClassifierSettings, direction: int) -> np.ndarray:
    """Attracted flag for each point in the given time direction."""
    hm = _HopMap(grid, spec, direction * cfg.hop, cfg.step)
    n = len(pts)
    res = np.zeros(n, bool)
    live = np.arange(n)
    tail_ok = np.ones(n, bool)
    p = np.array(pts, float)
    stages = cfg.stages()
    stage, tail_start = 0, cfg.n_hops // 2
    for k in range(1, stages[-1] + 1):
        p, esc, isnear = hm.advance(p, near)
        if k >= tail_start:
            tail_ok &= isnear
        keep = ~esc
        if k == stages[stage]:
            res[live[tail_ok & keep]] = True
            keep &= ~tail_ok
            tail_ok[:] = True
            stage, tail_start = stage + 1, k + 1
        if not keep.all():
            live, p, tail_ok = live[keep], p[keep], tail_ok[keep]
        if not len(live):
            break
    return res


@dataclass(eq=False)
class InfluencePartition:
    A_star: CellSet
    R_star: CellSet
    H_minus_K: CellSet
    K_cells: CellSet
    outside: CellSet
    witness: dict = field(default_factory=dict, repr=False)
    settings: ClassifierSettings = field(default_factory=ClassifierSettings)

    @property
    def grid(self) -> CubicalGrid:
        return self.K_cells.grid

    @property
    def region(self) -> CellSet:
        """Cells of I(K)."""
        return self.A_star | self.R_star | self.H_minus_K | self.K_cells

    def summary(self) -> dict:
        return {k: len(getattr(self, k)) for k in ("A_star", "R_star", "H_minus_K", "K_cells", "outside")}

    def check(self) -> dict:
        parts = [self.A_star, self.R_star, self.H_minus_K, self.K_cells, self.outside]
        total = sum(len(p) for p in parts)
        union = parts[0]
        for p in parts[1:]:
            union = union | p
        return {"disjoint": total == len(union), "covering": len(union) == self.grid.ncells}


def influence_partition(spec: FlowSpec, K: CellSet, grid: CubicalGrid | None = None,
                        T_max: float = 200.0, tol: float | None = None,
                        settings: ClassifierSettings | None = None) -> InfluencePartition:
    """Classify every cell from its centre and corner samples.

    Cell rule: a sample that is neither attracted nor repelled makes the cell
    ``outside``; otherwise all-homoclinic samples give H, all-attracted give
    A*, all-repelled give R*, and a mix of attracted-only and repelled-only
    samples is ``outside``.
    """
    grid = grid or K.grid
    if settings is None:
        settings = ClassifierSettings(T_max, 2.0 if tol is None else tol / grid.cell_diameter)
    cfg = settings
    near = near_mask(K, cfg.tol(grid))
    n0, n1 = grid.shape
    ax = [grid.lattice_axis(k, 1) for k in range(2)]
    X, Y = np.meshgrid(ax[0], ax[1], indexing="ij")
    verts = np.stack([X.ravel(), Y.ravel()], 1)
    cent = grid.centers().reshape(-1, 2)
    pts = np.concatenate([verts, cent])
    att = _sweep(grid, spec, near, pts, cfg, +1)
    rep = _sweep(grid, spec, near, pts, cfg, -1)
    nv = len(verts)
    va, vr = att[:nv].reshape(len(ax[0]), len(ax[1])), rep[:nv].reshape(len(ax[0]), len(ax[1]))
    ca, cr = att[nv:].reshape(n0, n1), rep[nv:].reshape(n0, n1)
    I, J = np.meshgrid(np.arange(n0), np.arange(n1), indexing="ij")
    sa, sr = [ca], [cr]
    for di in (0, 1):
        for dj in (0, 1):
            vi = np.mod(I + di, len(ax[0]))
            vj = np.mod(J + dj, len(ax[1]))
            sa.append(va[vi, vj])
            sr.append(vr[vi, vj])
    sa = np.stack(sa)
    sr = np.stack(sr)
    lost = (~sa & ~sr).any(0)
    all_h = (sa & sr).all(0)
    all_a = sa.all(0)
    all_r = sr.all(0)
    kmask = K.mask
    out = ~kmask & (lost | ~(all_a | all_r))
    hm = ~kmask & ~out & all_h
    am = ~kmask & ~out & ~hm & all_a
    rm = ~kmask & ~out & ~hm & ~am & all_r
    witness = {
        "center_attracted": ca,
        "center_repelled": cr,
        "samples_attracted": sa.sum(0).astype(np.int8),
        "samples_repelled": sr.sum(0).astype(np.int8),
    }
    return InfluencePartition(CellSet(grid, am), CellSet(grid, rm), CellSet(grid, hm), K,
                              CellSet(grid, out), witness, cfg)


# ---------------------------------------------------------------------------
# prolongational limits


def _perturbed_starts(space, x, delta, n_perturb, rng):
    x = np.asarray(x, float).reshape(2)
    r = delta * np.sqrt(rng.random(n_perturb - 1))
    th = 2 * np.pi * rng.random(n_perturb - 1)
    pts = np.concatenate([x[None], x + np.stack([r * np.cos(th), r * np.sin(th)], 1)])
    return space.wrap(pts)


def prolongational_pairs(spec: FlowSpec, x, delta: float, n_perturb: int = 64, T_max: float = 200.0,
                         seed: int = 0, step: float = 1e-2, hop: float = 1.0):
    """Late forward and backward samples of each perturbed start.

    Returns ``(fwd, bwd, fwd_escaped, bwd_escaped)`` with tails of shape (n, ntail, 2).
    """
    rng = np.random.default_rng(seed)
    pts = _perturbed_starts(spec.space, x, delta, n_perturb, rng)
    cfg = ClassifierSettings(T_max, 2.0, step, hop)
    fwd, fe = _tails_direct(spec, pts, cfg, 1)
    bwd, be = _tails_direct(spec, pts, cfg, -1)
    return fwd, bwd, fe, be


def prolongational_limit(spec: FlowSpec, x, direction: int = 1, delta: float = 0.01, n_perturb: int = 64,
                         T_max: float = 200.0, seed: int = 0, cluster_radius: float | None = None,
                         step: float = 1e-2, hop: float = 1.0) -> np.ndarray:
    """Sampled under-approximation of J+ (direction 1) or J- (direction -1)."""
    from .flowfield import thin_points

    rng = np.random.default_rng(seed)
    pts = _perturbed_starts(spec.space, x, delta, n_perturb, rng)
    cfg = ClassifierSettings(T_max, 2.0, step, hop)
    tails, esc = _tails_direct(spec, pts, cfg, 1 if direction >= 0 else -1)
    late = tails[~esc].reshape(-1, 2)
    if not len(late):
        return np.empty((0, 2))
    radius = cluster_radius if cluster_radius is not None else 2 * delta
    return thin_points(spec.space, late, radius)


# ---------------------------------------------------------------------------
# dissonance


@dataclass(eq=False)
class DissonanceReport:
    positively_dissonant: CellSet
    negatively_dissonant: CellSet
    externally_dissonant: CellSet
    euler_K: int
    euler_I: int
    euler_verdict: bool
    agreement: bool
    confirmation: dict = field(default_factory=dict)

    @property
    def any_dissonant(self) -> bool:
        return bool(self.positively_dissonant or self.negatively_dissonant or self.externally_dissonant)

    def summary(self) -> dict:
        return {
            "positively_dissonant": len(self.positively_dissonant),
            "negatively_dissonant": len(self.negatively_dissonant),
            "externally_dissonant": len(self.externally_dissonant),
            "externally_dissonant_components": self.externally_dissonant.n_components(4),
            "euler_K": self.euler_K,
            "euler_I": self.euler_I,
            "euler_verdict": self.euler_verdict,
            "agreement": self.agreement,
            "confirmation": self.confirmation,
        }


def _pick(cells: CellSet, max_confirm: int) -> np.ndarray:
    flat = cells.flat
    if len(flat) > max_confirm:
        flat = flat[np.linspace(0, len(flat) - 1, max_confirm).round().astype(int)]
    return flat


def _confirm(spec, K, groups: dict, cfg: ClassifierSettings, n_perturb: int, seed: int,
             max_confirm: int) -> dict:
    """Monte-Carlo prolongational check on a few witness cells of each dissonance type.

    All perturbed starts are integrated as one batch.
    """
    grid = K.grid
    rng = np.random.default_rng(seed)
    starts, owner = [], []
    picks = {kind: _pick(cells, max_confirm) for kind, cells in groups.items()}
    for kind, flat in picks.items():
        for c in flat.tolist():
            x = grid.center_of(*divmod(c, grid.shape[1]))
            starts.append(_perturbed_starts(grid.space, x, grid.cell_diameter, n_perturb, rng))
            owner.append(kind)
    if not starts:
        return {kind: {"checked": 0, "confirmed": 0} for kind in groups}
    pts = np.concatenate(starts)
    near = near_mask(K, cfg.tol(grid))
    hits = {}
    for direction in (1, -1):
        tails, esc = _tails_direct(spec, pts, cfg, direction)
        flat_hit = _lookup(grid, near, tails.reshape(-1, 2)).reshape(tails.shape[:2]).any(1)
        hits[direction] = (~esc & flat_hit).reshape(len(owner), n_perturb)
    out = {kind: {"checked": len(picks[kind]), "confirmed": 0} for kind in groups}
    for k, kind in enumerate(owner):
        f, b = hits[1][k], hits[-1][k]
        ok = f.any() if kind == "positive" else b.any() if kind == "negative" else (f & b).any()
        out[kind]["confirmed"] += int(ok)
    return out


def dissonance_report(spec: FlowSpec, K: CellSet, partition: InfluencePartition, grid: CubicalGrid | None = None,
                      n_perturb: int = 64, seed: int = 0, max_confirm: int = 4) -> DissonanceReport:
    """Dissonant cells are the non-K cells outside H that touch an H cell."""
    H = partition.H_minus_K
    other = ~(H | partition.K_cells)
    touching = other.neighbours_of(H, 8)
    pos = touching & partition.R_star
    neg = touching & partition.A_star
    ext = touching & partition.outside
    eK = euler_of_cells(partition.K_cells)
    eI = euler_of_cells(partition.region)
    verdict = eK != eI
    nonempty = bool(pos or neg or ext)
    conf = {}
    if max_confirm > 0:
        conf = _confirm(spec, partition.K_cells, {"positive": pos, "negative": neg, "external": ext},
                        partition.settings, n_perturb, seed, max_confirm)
    return DissonanceReport(pos, neg, ext, eK, eI, verdict, verdict == nonempty, conf)


def three_types_check(report: DissonanceReport, compact_space: bool) -> bool:
    p = bool(report.positively_dissonant)
    n = bool(report.negatively_dissonant)
    e = bool(report.externally_dissonant)
    ok = (not e) or (p and n)
    if compact_space:
        ok = ok and ((not (p or n)) or e)
    return ok


# ---------------------------------------------------------------------------
# fixed points


def _jacobian(spec, x, h):
    e = np.eye(2) * h
    pts = np.stack([x + e[0], x - e[0], x + e[1], x - e[1]])
    v = velocity_batch(spec, pts)
    return np.stack([(v[0] - v[1]) / (2 * h), (v[2] - v[3]) / (2 * h)], 1)


def fixed_points(spec: FlowSpec, region: CellSet, newton_iters: int = 60, tol: float = 1e-10) -> np.ndarray:
    """Zeros of the field in ``region``, seeded at local minima of the sampled speed."""
    grid = region.grid
    c = grid.centers()
    v = velocity_batch(spec, c.reshape(-1, 2))
    speed = np.hypot(v[:, 0], v[:, 1]).reshape(grid.shape)
    is_min = region.mask.copy()
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                nb = _shift_values(grid, speed, di, dj)
                is_min &= speed <= nb
    seeds = c[is_min]
    h = 1e-7 * max(1.0, float(np.max(np.abs(grid.space.period))))
    max_step = 2 * grid.cell_diameter
    roots: list[np.ndarray] = []
    for x in seeds:
        x = x.astype(float)
        for _ in range(newton_iters):
            vx = velocity_batch(spec, x[None])[0]
            if np.hypot(*vx) <= tol * 1e-2:
                break
            J = _jacobian(spec, x, h)
            dx = np.linalg.lstsq(J, -vx, rcond=None)[0]
            n = np.hypot(*dx)
            if not np.isfinite(n):
                break
            if n > max_step:
                dx *= max_step / n
            x = grid.space.wrap(x + dx)
        if np.hypot(*velocity_batch(spec, x[None])[0]) > tol:
            continue
        if not region.contains_points(x[None])[0]:
            continue
        if any(grid.space.distance(r, x) <= grid.cell_diameter for r in roots):
            continue
        roots.append(x)
    return np.array(roots).reshape(-1, 2)


def _shift_values(grid, arr, di, dj):
    out = arr
    for axis, d in ((0, di), (1, dj)):
        if d == 0:
            continue
        out = np.roll(out, d, axis=axis)
        if not grid.space.periodic[axis]:
            sl = [slice(None), slice(None)]
            sl[axis] = slice(0, d) if d > 0 else slice(d, None)
            out = out.copy()
            out[tuple(sl)] = np.inf
    return out


# ---------------------------------------------------------------------------
# global statements


def planar_global_influence_check(spec: FlowSpec, K: CellSet, window, partition: InfluencePartition,
                                  block_verdict: str | None = None) -> dict:
    """When K is non-saddle and nothing in the window lies outside I(K), K must
    be a global attractor or repeller.

    ``block_verdict`` (from the cell test) supplies the non-saddle hypothesis;
    without it only the covering hypothesis is checked.
    """
    covered = not partition.outside
    nonsaddle = block_verdict is None or block_verdict in NON_SADDLE
    met = covered and nonsaddle
    if covered:
        if not (partition.R_star | partition.H_minus_K):
            pverdict = "attractor"
        elif not (partition.A_star | partition.H_minus_K):
            pverdict = "repeller"
        else:
            pverdict = "violated"
    else:
        pverdict = "hypothesis-not-met"
    verdict = block_verdict or pverdict
    consistent = (not met) or (pverdict in ("attractor", "repeller") and verdict in ("attractor", "repeller"))
    return {"hypothesis_met": met, "window_covered": covered, "partition_verdict": pverdict,
            "verdict": verdict, "consistent": consistent, "outside_cells": len(partition.outside)}


@dataclass(eq=False)
class ComplementStructure:
    L: CellSet
    saddle_components: list
    nonsaddle_components: list
    cross_check: bool

    @property
    def L_s(self) -> CellSet:
        out = CellSet.empty(self.L.grid)
        for c in self.saddle_components:
            out = out | c
        return out

    @property
    def L_n(self) -> CellSet:
        out = CellSet.empty(self.L.grid)
        for c in self.nonsaddle_components:
            out = out | c
        return out

    def summary(self) -> dict:
        return {"L": len(self.L), "L_s_components": len(self.saddle_components),
                "L_n_components": len(self.nonsaddle_components), "cross_check": self.cross_check}


def complement_structure(F: OuterMap, Fback: OuterMap, partition: InfluencePartition,
                         dissonance: DissonanceReport) -> ComplementStructure:
    """Split the invariant hull of the outside cells into saddle and non-saddle parts.

    A component of L is a saddle component when the component of outside cells
    containing it carries externally dissonant cells.
    """
    outside = partition.outside
    L = invariant_part(F, Fback, outside)
    lab, _ = outside.labels(4)
    ext = dissonance.externally_dissonant
    sad, non = [], []
    for comp in L.components(4):
        ids = np.unique(lab[comp.mask])
        host = CellSet(L.grid, np.isin(lab, ids[ids > 0]))
        (sad if (host & ext) else non).append(comp)
    # every outside component with externally dissonant cells should host part of L
    ok = True
    for host in ext.components(4):
        ids = np.unique(lab[host.mask])
        region = CellSet(L.grid, np.isin(lab, ids[ids > 0]))
        if not (region & L):
            ok = False
    return ComplementStructure(L, sad, non, ok)


def _visit_counts(inside: np.ndarray, near: np.ndarray) -> np.ndarray:
    """Per row: maximal runs inside ``near`` that touch ``inside`` at least once."""
    n, m = near.shape
    padded = np.zeros((n, m + 1), bool)
    padded[:, 1:] = near
    starts = near & ~padded[:, :-1]
    run_id = np.cumsum(starts, axis=1) * near
    counts = np.zeros(n, int)
    for r in range(n):
        counts[r] = len(np.unique(run_id[r][inside[r] & near[r]]))
    return counts


def _rasterize(grid: CubicalGrid, path: np.ndarray, max_sub: int = 32) -> np.ndarray:
    """Cells along piecewise linear paths (n, m, 2), sub-sampled so no cell row is skipped."""
    seg = np.abs(np.diff(path, axis=1)) / grid.cell_size
    seg = seg[np.isfinite(seg).all(-1)]
    worst = float(seg.max()) if len(seg) else 0.0
    sub = int(min(max_sub, max(1, math.ceil(2 * worst))))
    a, b = path[:, :-1], path[:, 1:]
    pts = [a + (k / sub) * (b - a) for k in range(sub)]
    pts = np.stack(pts, 2).reshape(len(path), -1, 2)
    pts = np.concatenate([pts, path[:, -1:]], 1)
    flat = grid.cell_of(pts.reshape(-1, 2)).reshape(pts.shape[:2])
    return np.where(np.isfinite(pts).all(-1), flat, -1)


def parallel_certificate(spec: FlowSpec, partition: InfluencePartition, dissonance: DissonanceReport,
                         N: CellSet, max_witnesses: int = 3, step: float = 1e-2) -> list[dict]:
    """For components of I(K) - K free of dissonant cells, look for a component S
    of the block boundary that every witness orbit visits exactly once.

    A visit is a maximal stay in the one-cell thickening of S that meets S; the
    thickening absorbs the flicker of orbits crossing a staircase layer at a
    shallow angle.
    """
    grid = N.grid
    region = partition.region - partition.K_cells
    diss = dissonance.positively_dissonant | dissonance.negatively_dissonant | dissonance.externally_dissonant
    sections = N.boundary().components(8)
    T = partition.settings.T_max
    comps = region.components(4)
    out, starts, owner = [], [], []
    for n, comp in enumerate(comps):
        rec = {"cells": len(comp), "exempt": bool(comp & diss), "visits": [], "section": None, "passed": True}
        out.append(rec)
        if rec["exempt"]:
            continue
        flat = comp.flat
        pick = flat[np.linspace(0, len(flat) - 1, min(max_witnesses, len(flat))).round().astype(int)]
        for c in pick.tolist():
            starts.append(grid.center_of(*divmod(c, grid.shape[1])))
            owner.append(n)
    if not starts:
        return out
    x0 = np.array(starts, float)
    nsteps = max(1, int(math.ceil(T / step - 1e-9)))
    check = not spec.space.is_torus
    paths = []
    for direction in (-1, 1):
        x = x0.copy()
        seq = [x]
        alive = np.ones(len(x), bool)
        for _ in range(nsteps):
            x, esc, _ = _rk4_steps(spec, x, direction * step, 1, check)
            alive &= ~esc
            seq.append(np.where(alive[:, None], x, np.nan))
        seq = np.stack(seq, 1)
        paths.append(seq[:, ::-1] if direction < 0 else seq[:, 1:])
    cells = _rasterize(grid, np.concatenate(paths, 1))
    owner = np.array(owner)
    for n, rec in enumerate(out):
        if rec["exempt"]:
            continue
        rows = np.flatnonzero(owner == n)
        touch = comps[n].dilate(1)
        best = None
        for s_idx, S in enumerate(sections):
            if not (S & touch):
                continue
            thick = S.dilate(1).mask.ravel()
            sm = S.mask.ravel()
            c = cells[rows]
            valid = c >= 0
            inside = valid & sm[np.maximum(c, 0)]
            near = valid & thick[np.maximum(c, 0)]
            counts = _visit_counts(inside, near).tolist()
            if best is None or all(v == 1 for v in counts):
                best = (s_idx, counts)
                if all(v == 1 for v in counts):
                    break
        if best is None:
            rec["passed"] = False
            continue
        rec["section"], rec["visits"] = best
        rec["passed"] = all(v == 1 for v in best[1])
    return out


_CLASS_ORDER = ("DISS_E", "DISS_P", "DISS_N", "K", "HOM", "ASTAR", "RSTAR", "OUT")


def influence_labels(partition: InfluencePartition, dissonance: DissonanceReport | None = None) -> np.ndarray:
    lab = np.full(partition.grid.shape, "OUT", dtype=object)
    lab[partition.A_star.mask] = "ASTAR"
    lab[partition.R_star.mask] = "RSTAR"
    lab[partition.H_minus_K.mask] = "HOM"
    lab[partition.K_cells.mask] = "K"
    if dissonance is not None:
        lab[dissonance.positively_dissonant.mask] = "DISS_P"
        lab[dissonance.negatively_dissonant.mask] = "DISS_N"
        lab[dissonance.externally_dissonant.mask] = "DISS_E"
    return lab
