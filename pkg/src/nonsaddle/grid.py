"""Cubical grids, cell sets, combinatorial outer maps and index pairs."""
from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import ndimage, sparse
from scipy.sparse import csgraph

from .flowfield import (
    DEFAULT_STEP,
    ConfigError,
    FlowSpec,
    PhaseSpace,
    flow_map_batch,
    velocity_batch,
)

__all__ = [
    "NON_SADDLE",
    "CubicalGrid",
    "CellSet",
    "OuterMap",
    "IndexPair",
    "NotIsolatingError",
    "THREADS_ENV",
    "default_tau",
    "build_outer_map",
    "build_outer_maps",
    "invariant_part",
    "forward_viable",
    "is_isolating",
    "index_pair",
    "nonsaddle_test",
    "strong_influence_probe",
    "region_cells",
    "region_bbox",
    "window_for_region",
    "write_cell_dump",
    "cell_labels",
]

THREADS_ENV = "NONSADDLE_THREADS"


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class CubicalGrid:
    space: PhaseSpace
    shape: tuple[int, int]

    def __post_init__(self):
        for k in range(2):
            n = self.shape[k]
            if n < 2:
                raise ConfigError("grid needs at least 2 cells per axis")

    @property
    def ncells(self) -> int:
        return self.shape[0] * self.shape[1]

    @property
    def cell_size(self) -> np.ndarray:
        return self.space.period / np.array(self.shape, float)

    @property
    def cell_diameter(self) -> float:
        return float(np.hypot(*self.cell_size))

    def centers(self) -> np.ndarray:
        """Cell centres as an ``(n0, n1, 2)`` array."""
        lo = np.array(self.space.lo, float)
        d = self.cell_size
        i = lo[0] + (np.arange(self.shape[0]) + 0.5) * d[0]
        j = lo[1] + (np.arange(self.shape[1]) + 0.5) * d[1]
        X, Y = np.meshgrid(i, j, indexing="ij")
        return np.stack([X, Y], axis=-1)

    def lattice_axis(self, k: int, sub: int) -> np.ndarray:
        """Coordinates of the sub-lattice with ``sub`` intervals per cell on axis ``k``."""
        n = self.shape[k] * sub + (0 if self.space.periodic[k] else 1)
        return self.space.lo[k] + np.arange(n) * (self.cell_size[k] / sub)

    def cell_of(self, pts) -> np.ndarray:
        """Flat cell index of each point, or -1 outside the window."""
        pts = np.asarray(pts, float)
        pts = self.space.wrap(pts)
        idx = []
        ok = np.isfinite(pts).all(axis=-1)
        for k in range(2):
            f = (pts[..., k] - self.space.lo[k]) / self.cell_size[k]
            with np.errstate(invalid="ignore"):
                f = np.floor(np.where(ok, f, -1.0))
            if self.space.periodic[k]:
                f = np.mod(f, self.shape[k])
            else:
                ok &= (f >= 0) & (f < self.shape[k])
            idx.append(f)
        i0, i1 = (np.where(ok, f, 0.0) for f in idx)
        flat = np.where(ok, i0 * self.shape[1] + i1, -1)
        return flat.astype(np.int64)

    def unravel(self, flat) -> tuple[np.ndarray, np.ndarray]:
        return np.unravel_index(np.asarray(flat), self.shape)

    def center_of(self, i: int, j: int) -> np.ndarray:
        return np.array(self.space.lo, float) + (np.array([i, j]) + 0.5) * self.cell_size

    def shift(self, mask: np.ndarray, di: int, dj: int) -> np.ndarray:
        """``out[i, j] = mask[i - di, j - dj]``, zero filled across non-periodic edges."""
        out = mask
        for axis, d in ((0, di), (1, dj)):
            if d == 0:
                continue
            out = np.roll(out, d, axis=axis)
            if not self.space.periodic[axis]:
                sl = [slice(None), slice(None)]
                sl[axis] = slice(0, d) if d > 0 else slice(d, None)
                out = out.copy()
                out[tuple(sl)] = False
        return out


class CellSet:
    """Set of grid cells backed by a dense boolean array."""

    __slots__ = ("grid", "mask")

    def __init__(self, grid: CubicalGrid, mask=None):
        self.grid = grid
        if mask is None:
            mask = np.zeros(grid.shape, bool)
        mask = np.asarray(mask, bool)
        if mask.shape != tuple(grid.shape):
            mask = mask.reshape(grid.shape)
        self.mask = mask

    # construction
    @classmethod
    def empty(cls, grid):
        return cls(grid)

    @classmethod
    def full(cls, grid):
        return cls(grid, np.ones(grid.shape, bool))

    @classmethod
    def from_flat(cls, grid, flat):
        m = np.zeros(grid.ncells, bool)
        flat = np.asarray(flat, np.int64)
        m[flat[flat >= 0]] = True
        return cls(grid, m.reshape(grid.shape))

    @classmethod
    def from_points(cls, grid, pts):
        return cls.from_flat(grid, grid.cell_of(np.asarray(pts, float).reshape(-1, 2)))

    # set algebra
    def _check(self, other):
        if other.grid != self.grid:
            raise ValueError("cell sets live on different grids")

    def __or__(self, other):
        self._check(other)
        return CellSet(self.grid, self.mask | other.mask)

    def __and__(self, other):
        self._check(other)
        return CellSet(self.grid, self.mask & other.mask)

    def __sub__(self, other):
        self._check(other)
        return CellSet(self.grid, self.mask & ~other.mask)

    def __xor__(self, other):
        self._check(other)
        return CellSet(self.grid, self.mask ^ other.mask)

    def __invert__(self):
        return CellSet(self.grid, ~self.mask)

    def __eq__(self, other):
        return isinstance(other, CellSet) and other.grid == self.grid and np.array_equal(self.mask, other.mask)

    def __hash__(self):
        return hash((self.grid, self.mask.tobytes()))

    def __len__(self):
        return int(self.mask.sum())

    def __bool__(self):
        return bool(self.mask.any())

    def __contains__(self, ij):
        i, j = ij
        return bool(self.mask[i, j])

    def __repr__(self):
        return f"CellSet({len(self)} of {self.grid.ncells} cells)"

    def issubset(self, other) -> bool:
        self._check(other)
        return not (self.mask & ~other.mask).any()

    @property
    def flat(self) -> np.ndarray:
        return np.flatnonzero(self.mask.ravel())

    def cells(self) -> list[tuple[int, int]]:
        return [tuple(map(int, c)) for c in np.argwhere(self.mask)]

    def contains_points(self, pts) -> np.ndarray:
        flat = self.grid.cell_of(np.asarray(pts, float).reshape(-1, 2))
        m = self.mask.ravel()
        return np.where(flat >= 0, m[np.maximum(flat, 0)], False)

    # morphology
    def dilate(self, k: int = 1) -> "CellSet":
        m = self.mask
        for _ in range(k):
            acc = m.copy()
            for di in (-1, 0, 1):
                for dj in (-1, 0, 1):
                    if di or dj:
                        acc |= self.grid.shift(m, di, dj)
            m = acc
        return CellSet(self.grid, m)

    def boundary(self) -> "CellSet":
        """Cells of the set touching (8-neighbourhood) a cell outside it or the window edge."""
        outside = ~self.mask
        touch = np.zeros_like(self.mask)
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                if di or dj:
                    touch |= self.grid.shift(outside, di, dj)
        # window edges count as outside
        for axis in range(2):
            if not self.grid.space.periodic[axis]:
                sl0 = [slice(None), slice(None)]
                sl1 = [slice(None), slice(None)]
                sl0[axis] = 0
                sl1[axis] = -1
                touch[tuple(sl0)] = True
                touch[tuple(sl1)] = True
        return CellSet(self.grid, self.mask & touch)

    def interior(self) -> "CellSet":
        return self - self.boundary()

    def neighbours_of(self, other: "CellSet", connectivity: int = 8) -> "CellSet":
        """Cells of ``self`` adjacent to some cell of ``other``."""
        touch = np.zeros_like(self.mask)
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                if (di or dj) and (connectivity == 8 or di == 0 or dj == 0):
                    touch |= self.grid.shift(other.mask, di, dj)
        return CellSet(self.grid, self.mask & touch)

    def labels(self, connectivity: int = 4) -> tuple[np.ndarray, int]:
        """Component labels (0 = not in set, 1..k ordered by first flat index)."""
        struct = ndimage.generate_binary_structure(2, 1 if connectivity == 4 else 2)
        lab, k = ndimage.label(self.mask, structure=struct)
        if k == 0:
            return lab, 0
        pairs = []
        n0, n1 = self.grid.shape
        offsets = (0,) if connectivity == 4 else (-1, 0, 1)
        if self.grid.space.periodic[0]:
            a, b = lab[-1, :], lab[0, :]
            for o in offsets:
                bb = np.roll(b, -o)
                sel = (a > 0) & (bb > 0)
                if o and not self.grid.space.periodic[1]:
                    sel &= _valid_roll(n1, -o)
                pairs.append(np.stack([a[sel], bb[sel]], 1))
        if self.grid.space.periodic[1]:
            a, b = lab[:, -1], lab[:, 0]
            for o in offsets:
                bb = np.roll(b, -o)
                sel = (a > 0) & (bb > 0)
                if o and not self.grid.space.periodic[0]:
                    sel &= _valid_roll(n0, -o)
                pairs.append(np.stack([a[sel], bb[sel]], 1))
        if pairs:
            pr = np.concatenate(pairs) if pairs else np.empty((0, 2), int)
            g = sparse.coo_matrix((np.ones(len(pr)), (pr[:, 0], pr[:, 1])), shape=(k + 1, k + 1))
            _, comp = csgraph.connected_components(g, directed=False)
            lab = np.where(lab > 0, comp[lab] + 1, 0)
        # canonical relabelling by first occurrence in flat order
        flat = lab.ravel()
        uniq, first = np.unique(flat, return_index=True)
        order = [u for _, u in sorted(zip(first, uniq)) if u > 0]
        remap = np.zeros(flat.max() + 1, np.int64)
        for new, old in enumerate(order, start=1):
            remap[old] = new
        return remap[lab], len(order)

    def components(self, connectivity: int = 4) -> list["CellSet"]:
        lab, k = self.labels(connectivity)
        return [CellSet(self.grid, lab == c) for c in range(1, k + 1)]

    def n_components(self, connectivity: int = 4) -> int:
        return self.labels(connectivity)[1]

    def touches_window_edge(self) -> bool:
        m = self.mask
        for axis in range(2):
            if not self.grid.space.periodic[axis]:
                if m.take(0, axis=axis).any() or m.take(-1, axis=axis).any():
                    return True
        return False


def _valid_roll(n, shift):
    v = np.ones(n, bool)
    if shift > 0:
        v[-shift:] = False
    elif shift < 0:
        v[:-shift] = False
    return v


# ---------------------------------------------------------------------------
# regions


def _center_coords(grid):
    c = grid.centers()
    return c[..., 0], c[..., 1]


def region_cells(grid: CubicalGrid, region: dict) -> CellSet:
    """Cells whose centre lies in a described region.

    Kinds: ``all``, ``box`` (x0, x1, y0, y1), ``disk`` (cx, cy, radius),
    ``annulus`` (cx, cy, r_in, r_out), ``band`` (axis, center, halfwidth;
    periodic distance along the axis).
    """
    kind = region.get("kind", "all")
    X, Y = _center_coords(grid)
    g = lambda k, d=None: float(region[k]) if k in region else d  # noqa: E731
    if kind == "all":
        m = np.ones(grid.shape, bool)
    elif kind == "box":
        m = (X >= g("x0")) & (X <= g("x1")) & (Y >= g("y0")) & (Y <= g("y1"))
    elif kind == "disk":
        m = np.hypot(X - g("cx", 0.0), Y - g("cy", 0.0)) <= g("radius")
    elif kind == "annulus":
        r = np.hypot(X - g("cx", 0.0), Y - g("cy", 0.0))
        m = (r >= g("r_in")) & (r <= g("r_out"))
    elif kind == "band":
        axis = int(region.get("axis", 0))
        coord = X if axis == 0 else Y
        d = coord - g("center")
        if grid.space.periodic[axis]:
            per = grid.space.period[axis]
            d = d - per * np.round(d / per)
        m = np.abs(d) <= g("halfwidth")
    else:
        raise ConfigError(f"unknown region kind {kind!r}")
    return CellSet(grid, m)


def region_bbox(region: dict) -> tuple[tuple[float, float], tuple[float, float]]:
    kind = region.get("kind")
    f = lambda k, d=0.0: float(region.get(k, d))  # noqa: E731
    if kind == "box":
        return (f("x0"), f("y0")), (f("x1"), f("y1"))
    if kind in ("disk", "annulus"):
        r = f("radius") if kind == "disk" else f("r_out")
        return (f("cx") - r, f("cy") - r), (f("cx") + r, f("cy") + r)
    raise ConfigError(f"region kind {kind!r} has no bounded box")


def window_for_region(region: dict, margin: float = 0.25) -> PhaseSpace:
    """Planar window containing the region's box enlarged by ``margin`` on each half-width."""
    lo, hi = region_bbox(region)
    c = [(lo[k] + hi[k]) / 2 for k in range(2)]
    h = [(hi[k] - lo[k]) / 2 * (1 + margin) for k in range(2)]
    return PhaseSpace((c[0] - h[0], c[1] - h[1]), (c[0] + h[0], c[1] + h[1]), (False, False))


# ---------------------------------------------------------------------------
# outer maps


def default_tau(grid: CubicalGrid, spec: FlowSpec, factor: float = 5.0) -> float:
    """``factor`` cell diameters divided by the median speed, clamped to [1e-2, 1]."""
    v = velocity_batch(spec, grid.centers().reshape(-1, 2))
    med = float(np.median(np.hypot(v[:, 0], v[:, 1])))
    if med <= 0 or not math.isfinite(med):
        return 1.0
    return float(min(1.0, max(1e-2, factor * grid.cell_diameter / med)))


def _parallel_flow(spec, pts, tau, step):
    threads = thread_count()
    if threads == 1 or len(pts) < 4096:
        return flow_map_batch(spec, pts, tau, step)
    chunks = np.array_split(np.arange(len(pts)), threads)
    with ThreadPoolExecutor(max_workers=threads) as ex:
        parts = list(ex.map(lambda ix: flow_map_batch(spec, pts[ix], tau, step), chunks))
    return tuple(np.concatenate([p[k] for p in parts]) for k in range(3))


def _dilation_matrix(grid: CubicalGrid, k: int):
    n = grid.ncells
    if k == 0:
        return sparse.identity(n, dtype=np.int32, format="csr")
    I, J = np.meshgrid(np.arange(grid.shape[0]), np.arange(grid.shape[1]), indexing="ij")
    rows, cols = [], []
    for di in range(-k, k + 1):
        for dj in range(-k, k + 1):
            ii, jj = I + di, J + dj
            ok = np.ones(grid.shape, bool)
            if grid.space.periodic[0]:
                ii = np.mod(ii, grid.shape[0])
            else:
                ok &= (ii >= 0) & (ii < grid.shape[0])
            if grid.space.periodic[1]:
                jj = np.mod(jj, grid.shape[1])
            else:
                ok &= (jj >= 0) & (jj < grid.shape[1])
            rows.append((I * grid.shape[1] + J)[ok])
            cols.append((ii * grid.shape[1] + jj)[ok])
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    return sparse.csr_matrix((np.ones(len(r), np.int32), (r, c)), shape=(n, n))


def _sample_targets(grid, spec, tau, sub, step):
    """Target cells (or -1) of the shared sample lattice, and each cell's sample indices."""
    ax0 = grid.lattice_axis(0, sub)
    ax1 = grid.lattice_axis(1, sub)
    X, Y = np.meshgrid(ax0, ax1, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], 1)
    out, esc, _ = _parallel_flow(spec, pts, tau, step)
    tgt = grid.cell_of(out)
    tgt[esc] = -1
    tgt = tgt.reshape(len(ax0), len(ax1))
    # sample (a, b) of cell (i, j) sits at lattice index (i*sub + a, j*sub + b)
    n0, n1 = grid.shape
    I, J = np.meshgrid(np.arange(n0), np.arange(n1), indexing="ij")
    cols = []
    for a in range(sub + 1):
        for b in range(sub + 1):
            li = I * sub + a
            lj = J * sub + b
            if grid.space.periodic[0]:
                li = np.mod(li, len(ax0))
            if grid.space.periodic[1]:
                lj = np.mod(lj, len(ax1))
            cols.append(tgt[li, lj].ravel())
    return np.stack(cols, 1)  # (ncells, (sub+1)^2)


def _sampled_matrix(grid, targets):
    n = grid.ncells
    rows = np.repeat(np.arange(n), targets.shape[1])
    cols = targets.ravel()
    ok = cols >= 0
    m = sparse.csr_matrix((np.ones(ok.sum(), np.int32), (rows[ok], cols[ok])), shape=(n, n))
    m.sum_duplicates()
    m.data[:] = 1
    sink = (targets < 0).any(axis=1)
    return m, sink


def _as_bool_csr(m):
    m = m.tocsr()
    m.sum_duplicates()
    m.eliminate_zeros()
    m.sort_indices()
    return sparse.csr_matrix((np.ones(m.nnz, bool), m.indices.astype(np.int32), m.indptr.astype(np.int64)),
                             shape=m.shape)


@dataclass(eq=False)
class OuterMap:
    """Multivalued cell map; ``adj[c]`` lists image cells, ``to_sink[c]`` marks escapes."""

    grid: CubicalGrid
    tau: float
    direction: int
    adj: sparse.csr_matrix
    to_sink: np.ndarray
    partner: "OuterMap | None" = field(default=None, repr=False)

    def image(self, c) -> CellSet:
        if isinstance(c, tuple):
            c = c[0] * self.grid.shape[1] + c[1]
        row = self.adj.indices[self.adj.indptr[c]:self.adj.indptr[c + 1]]
        return CellSet.from_flat(self.grid, row)

    def image_of(self, cells: CellSet) -> CellSet:
        v = cells.mask.ravel().astype(np.int32)
        hit = (self.adj.T.astype(np.int32) @ v) > 0
        return CellSet(self.grid, hit.reshape(self.grid.shape))

    @property
    def transpose(self) -> sparse.csr_matrix:
        t = getattr(self, "_t", None)
        if t is None:
            t = _as_bool_csr(self.adj.T)
            self._t = t
        return t


def build_outer_maps(grid: CubicalGrid, spec: FlowSpec, tau: float, samples_per_axis: int = 3,
                     inflate: int = 1, step: float = DEFAULT_STEP) -> tuple[OuterMap, OuterMap]:
    """Forward and backward outer maps at time ``|tau|``.

    Each direction is first sampled on the shared ``samples_per_axis`` lattice
    and dilated; the two are then merged so that the backward map is exactly
    the transpose of the forward one.
    """
    if tau == 0 or not math.isfinite(tau):
        raise ValueError("tau must be finite and non-zero")
    if samples_per_axis < 2:
        raise ValueError("samples_per_axis must be at least 2")
    if inflate < 0:
        raise ValueError("inflate must be non-negative")
    tau = abs(tau)
    sub = samples_per_axis - 1
    fwd_t = _sample_targets(grid, spec, tau, sub, step)
    bwd_t = _sample_targets(grid, spec, -tau, sub, step)
    D = _dilation_matrix(grid, inflate)
    Fs, fsink = _sampled_matrix(grid, fwd_t)
    Bs, bsink = _sampled_matrix(grid, bwd_t)
    E = _as_bool_csr((Fs @ D + (Bs @ D).T).tocsr())
    ET = _as_bool_csr(E.T)
    F = OuterMap(grid, tau, 1, E, fsink)
    B = OuterMap(grid, -tau, -1, ET, bsink)
    F._t, B._t = ET, E
    F.partner, B.partner = B, F
    return F, B


def build_outer_map(grid: CubicalGrid, spec: FlowSpec, tau: float, samples_per_axis: int = 3,
                    inflate: int = 1, step: float = DEFAULT_STEP) -> OuterMap:
    """Outer map in the direction of ``sign(tau)``; the opposite map is ``.partner``."""
    F, B = build_outer_maps(grid, spec, tau, samples_per_axis, inflate, step)
    return F if tau > 0 else B


# ---------------------------------------------------------------------------
# pruning


@njit(cache=True)
def _prune(alive, f_ptr, f_idx, ft_ptr, ft_idx, b_ptr, b_idx, bt_ptr, bt_idx, use_b):
    n = alive.size
    cf = np.zeros(n, np.int32)
    cb = np.zeros(n, np.int32)
    stack = np.empty(3 * n + 1, np.int64)
    top = 0
    for c in range(n):
        if not alive[c]:
            continue
        k = 0
        for p in range(f_ptr[c], f_ptr[c + 1]):
            if alive[f_idx[p]]:
                k += 1
        cf[c] = k
        kb = 1
        if use_b:
            kb = 0
            for p in range(b_ptr[c], b_ptr[c + 1]):
                if alive[b_idx[p]]:
                    kb += 1
            cb[c] = kb
        if k == 0 or kb == 0:
            stack[top] = c
            top += 1
    while top > 0:
        top -= 1
        c = stack[top]
        if not alive[c]:
            continue
        alive[c] = False
        for p in range(ft_ptr[c], ft_ptr[c + 1]):
            d = ft_idx[p]
            if alive[d]:
                cf[d] -= 1
                if cf[d] == 0:
                    stack[top] = d
                    top += 1
        if use_b:
            for p in range(bt_ptr[c], bt_ptr[c + 1]):
                d = bt_idx[p]
                if alive[d]:
                    cb[d] -= 1
                    if cb[d] == 0:
                        stack[top] = d
                        top += 1
    return alive


def _run_prune(F: OuterMap, B: OuterMap | None, N: CellSet) -> CellSet:
    alive = N.mask.ravel().copy()
    ft = F.transpose
    if B is None:
        b, bt, use_b = F.adj, ft, False
    else:
        b, bt, use_b = B.adj, B.transpose, True
    out = _prune(alive, F.adj.indptr, F.adj.indices, ft.indptr, ft.indices,
                 b.indptr, b.indices, bt.indptr, bt.indices, use_b)
    return CellSet(N.grid, out.reshape(N.grid.shape))


def invariant_part(F: OuterMap, Fback: OuterMap, N: CellSet) -> CellSet:
    """Largest subset of ``N`` in which every cell has a forward and a backward image cell."""
    if F.grid != N.grid or Fback.grid != N.grid:
        raise ValueError("maps and set use different grids")
    return _run_prune(F, Fback, N)


def forward_viable(F: OuterMap, N: CellSet) -> CellSet:
    """Cells of ``N`` admitting an infinite ``F``-path inside ``N``."""
    return _run_prune(F, None, N)


def is_isolating(F: OuterMap, Fback: OuterMap, N: CellSet) -> bool:
    return invariant_part(F, Fback, N).issubset(N.interior())


class NotIsolatingError(ValueError):
    def __init__(self, offending: CellSet):
        super().__init__(f"set is not isolating: {len(offending)} invariant cells on its boundary")
        self.offending = offending


@dataclass(eq=False)
class IndexPair:
    N: CellSet
    exit: CellSet
    entrance: CellSet
    Nplus: CellSet
    Nminus: CellSet
    Inv: CellSet

    def summary(self) -> dict:
        return {k: len(getattr(self, k)) for k in ("N", "exit", "entrance", "Nplus", "Nminus", "Inv")}

    def check(self) -> dict:
        """Structural invariants as named booleans."""
        bd = self.N.boundary()
        return {
            "boundary_covered": bd.issubset(self.exit | self.entrance),
            "plus_minus_meet_in_inv": (self.Nplus & self.Nminus) == self.Inv,
            "inv_in_interior": self.Inv.issubset(self.N.interior()),
            "exit_avoids_nplus": not (self.exit & self.Nplus),
            "entrance_avoids_nminus": not (self.entrance & self.Nminus),
        }


def index_pair(F: OuterMap, Fback: OuterMap, N: CellSet) -> IndexPair:
    inv = invariant_part(F, Fback, N)
    bad = inv - N.interior()
    if bad:
        raise NotIsolatingError(bad)
    nplus = forward_viable(F, N)
    nminus = forward_viable(Fback, N)
    bd = N.boundary()
    return IndexPair(N, bd - nplus, bd - nminus, nplus, nminus, inv)


NON_SADDLE = ("attractor", "repeller", "non-saddle")  # verdicts counted as non-saddle


def nonsaddle_test(ip: IndexPair) -> str:
    if not ip.exit:
        return "attractor"
    if not ip.entrance:
        return "repeller"
    nbhd = ip.Inv.dilate(1) & ip.N
    if nbhd.issubset(ip.Nplus | ip.Nminus):
        return "non-saddle"
    return "saddle"


def strong_influence_probe(spec: FlowSpec, K: CellSet, probe, V_shrink=None, T_max: float = 200.0,
                           step: float = 1e-2, sample_every: int = 10) -> bool:
    """True when, for every ``V`` in the shrinking family, the late forward or
    backward samples of the probe orbit (the second half of ``[0, T_max]``)
    stay inside ``V``."""
    from .flowfield import trajectory

    if V_shrink is None:
        V_shrink = [K.dilate(m) for m in (4, 2, 1)] + [K]
    tails = []
    for direction in (1, -1):
        tr = trajectory(spec, probe, T_max, step, sample_every, direction)
        if tr.escaped:
            tails.append(None)
        else:
            tails.append(tr.points[np.abs(tr.times) >= T_max / 2])
    for V in V_shrink:
        ok = False
        for tail in tails:
            if tail is not None and len(tail) and V.contains_points(tail).all():
                ok = True
        if not ok:
            return False
    return True


# ---------------------------------------------------------------------------
# cell dumps

_LABEL_ORDER = ("INV", "EXIT", "ENTRANCE", "NPLUS", "NMINUS", "N")


def cell_labels(ip: IndexPair) -> np.ndarray:
    lab = np.full(ip.N.grid.shape, "OUT", dtype=object)
    sets = {"INV": ip.Inv, "EXIT": ip.exit, "ENTRANCE": ip.entrance,
            "NPLUS": ip.Nplus, "NMINUS": ip.Nminus, "N": ip.N}
    for name in reversed(_LABEL_ORDER):
        lab[sets[name].mask] = name
    return lab


def write_cell_dump(path, labels: np.ndarray, header: str = "label") -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", header])
        n0, n1 = labels.shape
        for i in range(n0):
            for j in range(n1):
                w.writerow([i, j, labels[i, j]])
