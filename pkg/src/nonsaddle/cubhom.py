"""Cubical chain complexes of cell sets, with homology over Z/2 and over Z.

A cell set always stands for the union of its closed squares. Generators
are indexed on the whole grid: vertices, horizontal edges, vertical edges
and squares, with identifications along periodic axes.

Betti numbers are computed in two stages. First, fill-in-free reductions
(free-face collapses and coreductions) delete generator pairs. Then exact
elimination runs on what is left: a GF(2) rank and an integer Smith normal
form.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from math import gcd

import numpy as np
from scipy import sparse

from .grid import CellSet, CubicalGrid

__all__ = [
    "CubicalComplex",
    "BettiProfile",
    "complex_of",
    "relative_complex",
    "betti",
    "relative_betti",
    "euler",
    "euler_pair",
    "euler_of_cells",
    "boundary_matrices",
    "smith_diagonal",
    "gf2_rank",
]


@dataclass(frozen=True)
class BettiProfile:
    betti: tuple[int, ...]
    torsion_present: bool = False
    coefficients: str = "Z2"

    @property
    def euler(self) -> int:
        return sum((-1) ** k * b for k, b in enumerate(self.betti))

    def rank(self, k: int) -> int:
        return self.betti[k] if k < len(self.betti) else 0

    def as_dict(self) -> dict:
        return {"betti": list(self.betti), "torsion_present": self.torsion_present,
                "coefficients": self.coefficients}


class _Layout:
    """Global generator numbering for a grid."""

    def __init__(self, grid: CubicalGrid):
        self.grid = grid
        n0, n1 = grid.shape
        p0, p1 = grid.space.periodic
        self.nv0 = n0 if p0 else n0 + 1
        self.nv1 = n1 if p1 else n1 + 1
        self.nv = self.nv0 * self.nv1
        self.nh = n0 * self.nv1  # edges along axis 0
        self.nvert_e = self.nv0 * n1  # edges along axis 1
        self.ne = self.nh + self.nvert_e
        self.nsq = n0 * n1

    def vid(self, i, j):
        i = np.mod(i, self.nv0) if self.grid.space.periodic[0] else i
        j = np.mod(j, self.nv1) if self.grid.space.periodic[1] else j
        return i * self.nv1 + j

    def hid(self, i, j):  # edge from vertex (i, j) to (i+1, j)
        j = np.mod(j, self.nv1) if self.grid.space.periodic[1] else j
        return i * self.nv1 + j

    def vedge(self, i, j):  # edge from vertex (i, j) to (i, j+1)
        i = np.mod(i, self.nv0) if self.grid.space.periodic[0] else i
        return self.nh + i * self.grid.shape[1] + j

    def square_faces(self, I, J):
        """Edge ids and signs of the boundary of squares (I, J)."""
        e = np.stack([self.hid(I, J), self.vedge(I + 1, J), self.hid(I, J + 1), self.vedge(I, J)], -1)
        s = np.array([1, 1, -1, -1], np.int8)
        return e, s

    def edge_faces(self, E):
        """Vertex ids (start, end) of edges."""
        E = np.asarray(E)
        n1 = self.grid.shape[1]
        out = np.empty(E.shape + (2,), np.int64)
        h = E < self.nh
        i, j = np.divmod(E[h], self.nv1)
        out[h, 0] = self.vid(i, j)
        out[h, 1] = self.vid(i + 1, j)
        i, j = np.divmod(E[~h] - self.nh, n1)
        out[~h, 0] = self.vid(i, j)
        out[~h, 1] = self.vid(i, j + 1)
        return out


@dataclass
class CubicalComplex:
    """Generators per dimension (global ids) and boundary matrices between them.

    ``bd[k]`` maps chains of dimension ``k`` to dimension ``k-1`` with rows
    indexed by ``gens[k-1]`` and columns by ``gens[k]``.
    """

    grid: CubicalGrid
    gens: tuple[np.ndarray, np.ndarray, np.ndarray]
    bd: tuple[sparse.csc_matrix | None, sparse.csc_matrix, sparse.csc_matrix]
    anchors: int = 0  # extra H_0 classes contributed by anchoring

    @property
    def counts(self) -> tuple[int, int, int]:
        return tuple(len(g) for g in self.gens)

    @property
    def euler(self) -> int:
        v, e, f = self.counts
        return v - e + f + self.anchors


def _closure(grid: CubicalGrid, cells: CellSet):
    lay = _Layout(grid)
    I, J = np.nonzero(cells.mask)
    sq = I * grid.shape[1] + J
    ef, _ = lay.square_faces(I, J)
    edges = np.unique(ef.ravel())
    verts = np.unique(lay.edge_faces(edges).ravel()) if len(edges) else np.empty(0, np.int64)
    return lay, (verts, edges, sq)


def _restricted_matrices(lay: _Layout, gens):
    verts, edges, sq = gens
    vpos = {int(v): k for k, v in enumerate(verts)}
    epos = np.full(lay.ne, -1, np.int64)
    epos[edges] = np.arange(len(edges))
    vmap = np.full(lay.nv, -1, np.int64)
    vmap[verts] = np.arange(len(verts))
    del vpos
    # edges -> vertices
    ends = lay.edge_faces(edges) if len(edges) else np.empty((0, 2), np.int64)
    rows, cols, vals = [], [], []
    for k, sign in ((0, -1), (1, 1)):
        r = vmap[ends[:, k]] if len(edges) else np.empty(0, np.int64)
        ok = r >= 0
        rows.append(r[ok])
        cols.append(np.arange(len(edges))[ok])
        vals.append(np.full(ok.sum(), sign, np.int8))
    d1 = sparse.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                           shape=(len(verts), len(edges)), dtype=np.int8)
    # squares -> edges
    n1 = lay.grid.shape[1]
    I, J = np.divmod(sq, n1)
    ef, s = lay.square_faces(I, J)
    r = epos[ef] if len(sq) else np.empty((0, 4), np.int64)
    c = np.repeat(np.arange(len(sq)), 4).reshape(-1, 4)
    v = np.broadcast_to(s, r.shape)
    ok = r >= 0
    d2 = sparse.csc_matrix((v[ok], (r[ok], c[ok])), shape=(len(edges), len(sq)), dtype=np.int8)
    d1.sum_duplicates()
    d2.sum_duplicates()
    return d1, d2


def complex_of(cells: CellSet) -> CubicalComplex:
    """Full cubical complex (all faces) of the closed squares in ``cells``."""
    lay, gens = _closure(cells.grid, cells)
    d1, d2 = _restricted_matrices(lay, gens)
    return CubicalComplex(cells.grid, gens, (None, d1, d2))


def relative_complex(X: CellSet, A: CellSet, anchor: bool = False) -> CubicalComplex:
    """Quotient complex C(X) / C(A): generators of X not in the closure of A.

    With ``anchor`` set, one vertex in every component of X that misses A is
    also collapsed; this leaves H_k unchanged for k >= 1 and the removed
    H_0 classes are counted in ``anchors``.
    """
    if not A.issubset(X):
        raise ValueError("relative pair needs A to be a subset of X")
    lay, gx = _closure(X.grid, X)
    _, ga = _closure(X.grid, A)
    killed_v = ga[0]
    n_anchor = 0
    if anchor:
        lab, k = X.labels(connectivity=8)
        hit = set(np.unique(lab[A.mask]).tolist()) if A else set()
        extra = []
        for c in range(1, k + 1):
            if c in hit:
                continue
            I, J = np.nonzero(lab == c)
            extra.append(int(lay.vid(I[0], J[0])))
            n_anchor += 1
        if extra:
            killed_v = np.union1d(killed_v, np.array(extra, np.int64))
    gens = (np.setdiff1d(gx[0], killed_v), np.setdiff1d(gx[1], ga[1]), np.setdiff1d(gx[2], ga[2]))
    # boundary of the quotient: restrict the full-closure boundary to surviving generators
    d1f, d2f = _restricted_matrices(lay, gx)
    keep = [np.isin(gx[k], gens[k]) for k in range(3)]
    d1 = d1f[keep[0]][:, keep[1]].tocsc()
    d2 = d2f[keep[1]][:, keep[2]].tocsc()
    return CubicalComplex(X.grid, gens, (None, d1, d2), n_anchor)


def boundary_matrices(cx: CubicalComplex):
    return cx.bd[1], cx.bd[2]


# ---------------------------------------------------------------------------
# exact linear algebra on small matrices


def gf2_rank(mat) -> int:
    """Rank over GF(2) of an integer matrix (dense or sparse)."""
    m = sparse.csr_matrix(mat)
    rows = []
    for r in range(m.shape[0]):
        idx = m.indices[m.indptr[r]:m.indptr[r + 1]]
        val = m.data[m.indptr[r]:m.indptr[r + 1]]
        bits = 0
        for c, v in zip(idx.tolist(), val.tolist()):
            if v % 2:
                bits ^= 1 << c
        if bits:
            rows.append(bits)
    rank = 0
    pivots: dict[int, int] = {}
    for bits in rows:
        while bits:
            top = bits.bit_length() - 1
            if top in pivots:
                bits ^= pivots[top]
            else:
                pivots[top] = bits
                rank += 1
                break
    return rank


def smith_diagonal(mat) -> list[int]:
    """Nonzero invariant factors of an integer matrix (each divides the next)."""
    m = sparse.coo_matrix(mat)
    A: dict[int, dict[int, int]] = {}
    for r, c, v in zip(m.row.tolist(), m.col.tolist(), m.data.tolist()):
        if v:
            A.setdefault(r, {})[c] = A.get(r, {}).get(c, 0) + int(v)
    cols: dict[int, set[int]] = {}
    for r, row in A.items():
        for c in row:
            cols.setdefault(c, set()).add(r)
    diag = []
    while A:
        # pivot of smallest magnitude
        best = None
        for r, row in A.items():
            for c, v in row.items():
                if best is None or abs(v) < best[0]:
                    best = (abs(v), r, c)
                    if best[0] == 1:
                        break
            if best is not None and best[0] == 1:
                break
        _, pr, pc = best
        while True:
            p = A[pr][pc]
            done = True
            # clear the pivot column
            for r in list(cols.get(pc, ())):
                if r == pr:
                    continue
                q = A[r][pc] // p
                if q:
                    _row_axpy(A, cols, r, pr, -q)
                if A.get(r, {}).get(pc):
                    done = False
            # clear the pivot row
            for c in list(A[pr].keys()):
                if c == pc:
                    continue
                q = A[pr][c] // p
                if q:
                    _col_axpy(A, cols, c, pc, -q)
                if A[pr].get(c):
                    done = False
            if done:
                break
            # a smaller remainder appeared: move the pivot there
            cand = [(abs(A[r][pc]), r, pc) for r in cols.get(pc, ()) if r != pr]
            cand += [(abs(v), pr, c) for c, v in A[pr].items() if c != pc]
            _, pr, pc = min(cand)
        diag.append(abs(A[pr][pc]))
        del A[pr]
        cols[pc].discard(pr)
        if not cols[pc]:
            del cols[pc]
    # normalise to the divisibility chain
    diag.sort()
    changed = True
    while changed:
        changed = False
        for i in range(len(diag)):
            for j in range(i + 1, len(diag)):
                a, b = diag[i], diag[j]
                if b % a:
                    g = gcd(a, b)
                    diag[i], diag[j] = g, a * b // g
                    changed = True
        diag.sort()
    return diag


def _row_axpy(A, cols, r, src, q):
    row = A[r]
    for c, v in A[src].items():
        nv = row.get(c, 0) + q * v
        if nv:
            row[c] = nv
            cols.setdefault(c, set()).add(r)
        elif c in row:
            del row[c]
            cols[c].discard(r)
    if not row:
        del A[r]


def _col_axpy(A, cols, c, src, q):
    for r in list(cols.get(src, ())):
        v = A[r][src]
        row = A[r]
        nv = row.get(c, 0) + q * v
        if nv:
            row[c] = nv
            cols.setdefault(c, set()).add(r)
        elif c in row:
            del row[c]
            cols[c].discard(r)


# ---------------------------------------------------------------------------
# reductions


def _reduce(d1: sparse.csc_matrix, d2: sparse.csc_matrix):
    """Delete collapse / coreduction pairs; returns the surviving masks per dimension."""
    sizes = (d1.shape[0], d1.shape[1], d2.shape[1])
    # face lists (boundary) and coface lists, per dimension
    faces = [None, _lists(d1), _lists(d2)]
    cofaces = [_lists(d1.T.tocsc()), _lists(d2.T.tocsc()), None]
    alive = [np.ones(s, bool) for s in sizes]
    nface = [None, np.array([len(f) for f in faces[1]], np.int64), np.array([len(f) for f in faces[2]], np.int64)]
    ncof = [np.array([len(f) for f in cofaces[0]], np.int64), np.array([len(f) for f in cofaces[1]], np.int64), None]
    q: deque = deque()
    for k in (1, 2):
        for g in np.flatnonzero(nface[k] == 1).tolist():
            q.append((k, g))
    for k in (0, 1):
        for g in np.flatnonzero(ncof[k] == 1).tolist():
            q.append((k, g))

    def remove(k, g):
        alive[k][g] = False
        if k > 0:
            for f in faces[k][g]:
                if alive[k - 1][f]:
                    ncof[k - 1][f] -= 1
                    if ncof[k - 1][f] == 1:
                        q.append((k - 1, f))
        if k < 2:
            for c in cofaces[k][g]:
                if alive[k + 1][c]:
                    nface[k + 1][c] -= 1
                    if nface[k + 1][c] == 1:
                        q.append((k + 1, c))

    while q:
        k, g = q.popleft()
        if not alive[k][g]:
            continue
        partner = None
        if k > 0 and nface[k][g] == 1:
            # coreduction: the single surviving face
            for f in faces[k][g]:
                if alive[k - 1][f]:
                    partner = (k - 1, f)
                    break
            if partner is not None:
                remove(k, g)
                remove(*partner)
                continue
        if k < 2 and ncof[k][g] == 1:
            for c in cofaces[k][g]:
                if alive[k + 1][c]:
                    partner = (k + 1, c)
                    break
            if partner is not None:
                remove(k, g)
                remove(*partner)
    return alive


def _lists(m: sparse.csc_matrix) -> list[list[int]]:
    m = m.tocsc()
    m.sum_duplicates()
    m.eliminate_zeros()
    ind = m.indices.tolist()
    ptr = m.indptr.tolist()
    return [ind[ptr[c]:ptr[c + 1]] for c in range(m.shape[1])]


def _homology(cx: CubicalComplex, coefficients: str, reduce: bool = True) -> BettiProfile:
    d1, d2 = cx.bd[1], cx.bd[2]
    n = list(cx.counts)
    if reduce and sum(n):
        alive = _reduce(d1, d2)
        d1 = d1[alive[0]][:, alive[1]]
        d2 = d2[alive[1]][:, alive[2]]
        n = [int(a.sum()) for a in alive]
    if coefficients.upper() in ("Z2", "GF2"):
        r1, r2 = gf2_rank(d1), gf2_rank(d2)
        torsion = False
        tag = "Z2"
    elif coefficients.upper() == "Z":
        s1, s2 = smith_diagonal(d1), smith_diagonal(d2)
        r1, r2 = len(s1), len(s2)
        torsion = any(v > 1 for v in s1 + s2)
        tag = "Z"
    else:
        raise ValueError(f"unknown coefficients {coefficients!r}")
    b0 = n[0] - r1 + cx.anchors
    b1 = n[1] - r1 - r2
    b2 = n[2] - r2
    return BettiProfile((b0, b1, b2), torsion, tag)


def betti(cx: CubicalComplex | CellSet, coefficients: str = "Z2", reduce: bool = True) -> BettiProfile:
    """Betti numbers of a complex (or of the closed union of a cell set)."""
    if isinstance(cx, CellSet):
        cx = relative_complex(cx, CellSet.empty(cx.grid), anchor=True)
    return _homology(cx, coefficients, reduce)


def relative_betti(pair: tuple[CellSet, CellSet], coefficients: str = "Z2", reduce: bool = True) -> BettiProfile:
    """Betti numbers of H_*(X, A) computed on the quotient complex."""
    X, A = pair
    return _homology(relative_complex(X, A, anchor=True), coefficients, reduce)


def euler(profile: BettiProfile) -> int:
    return profile.euler


def euler_pair(pair: tuple[CellSet, CellSet], coefficients: str = "Z2") -> int:
    return relative_betti(pair, coefficients).euler


def euler_of_cells(cells: CellSet) -> int:
    """Alternating generator count of the closed union (no linear algebra)."""
    v, e, f = complex_of(cells).counts
    return v - e + f
