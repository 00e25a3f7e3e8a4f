"""Phase spaces, the vector-field catalogue and fixed-step RK4 flow evaluation.

All integrators work on batches of points stored as ``(n, 2)`` float arrays.
Reversing a field negates its velocity exactly, and the RK4 update is written
so that integrating the reversed field with step ``h`` reproduces, bit for
bit, integrating the original field with step ``-h``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

__all__ = [
    "ConfigError",
    "PhaseSpace",
    "FieldDescriptor",
    "FlowSpec",
    "FlowResult",
    "Trajectory",
    "catalogue",
    "descriptor",
    "make_spec",
    "velocity",
    "velocity_batch",
    "flow_map",
    "flow_map_batch",
    "trajectory",
    "omega_limit",
    "thin_points",
    "DEFAULT_STEP",
]

DEFAULT_STEP = 1e-3


class ConfigError(ValueError):
    """Raised for unknown flow identifiers, missing parameters or bad geometry."""


@dataclass(frozen=True)
class PhaseSpace:
    """Rectangle ``[lo, hi)`` with optional periodic identification per axis.

    On non-periodic axes the rectangle is only an analysis window; the flow
    lives on the whole line and a trajectory is declared escaped once it is
    farther than ``escape_factor`` window diameters from the window centre.
    """

    lo: tuple[float, float]
    hi: tuple[float, float]
    periodic: tuple[bool, bool] = (False, False)
    escape_factor: float = 4.0

    def __post_init__(self):
        for k in range(2):
            if not (math.isfinite(self.lo[k]) and math.isfinite(self.hi[k])):
                raise ConfigError("phase space bounds must be finite")
            if not self.lo[k] < self.hi[k]:
                raise ConfigError(f"lo[{k}] must be smaller than hi[{k}]")

    @property
    def period(self) -> np.ndarray:
        return np.array(self.hi, float) - np.array(self.lo, float)

    @property
    def diameter(self) -> float:
        return float(np.hypot(*self.period))

    @property
    def is_torus(self) -> bool:
        return all(self.periodic)

    @property
    def is_planar(self) -> bool:
        return not any(self.periodic)

    @property
    def center(self) -> np.ndarray:
        return (np.array(self.lo, float) + np.array(self.hi, float)) / 2

    def wrap(self, pts) -> np.ndarray:
        """Map points into ``[lo, hi)`` along periodic axes."""
        pts = np.array(pts, dtype=float, copy=True)
        for k in range(2):
            if self.periodic[k]:
                lo, per = self.lo[k], self.hi[k] - self.lo[k]
                v = np.mod(pts[..., k] - lo, per)
                # mod can round up to exactly one period
                v = np.where(v >= per, 0.0, v)
                pts[..., k] = lo + v
        return pts

    def displacement(self, p, q) -> np.ndarray:
        """Shortest difference ``q - p`` respecting periodicity."""
        d = np.asarray(q, float) - np.asarray(p, float)
        for k in range(2):
            if self.periodic[k]:
                per = self.hi[k] - self.lo[k]
                d[..., k] = d[..., k] - per * np.round(d[..., k] / per)
        return d

    def distance(self, p, q):
        d = self.displacement(p, q)
        return np.hypot(d[..., 0], d[..., 1])

    def escaped(self, pts) -> np.ndarray:
        pts = np.asarray(pts, float)
        out = ~np.isfinite(pts).all(axis=-1)
        reach = self.escape_factor * self.diameter
        c = self.center
        for k in range(2):
            if not self.periodic[k]:
                out |= np.abs(pts[..., k] - c[k]) > reach
        return out


# ---------------------------------------------------------------------------
# catalogue fields; every function takes coordinate arrays and a parameter
# mapping and returns the two velocity components


def _smoothstep(u):
    u = np.clip(u, 0.0, 1.0)
    return u * u * (3.0 - 2.0 * u)


def _torus_homoclinic(x, y, prm):
    xp, yp = prm["xp"], prm["yp"]
    s = np.sin(np.pi * (x + 1.0) / 2.0) ** 2
    g = np.sin(np.pi * (x - xp) / 2.0) ** 2 + np.sin(np.pi * (y - yp) / 2.0) ** 2
    return s * g, np.zeros_like(y)


def _saddle_node_torus(x, y, prm):
    psi = _smoothstep((1.0 - np.abs(x)) / 0.5)
    return psi * (x * x + y * y - 0.25), np.zeros_like(y)


def _radial(x, y, growth, turn):
    # dr/dt = r * growth(r),  dtheta/dt = turn
    return growth * x - turn * y, growth * y + turn * x


def _mendelson(x, y, prm):
    r = np.hypot(x, y)
    cos_t = np.where(r > 0, x / np.where(r > 0, r, 1.0), 1.0)
    turn = 0.5 * (1.0 - cos_t)  # sin^2(theta / 2)
    return _radial(x, y, 1.0 - r, turn)


def _planar_cycle(x, y, prm):
    r2 = x * x + y * y
    return _radial(x, y, prm["sigma"] * (1.0 - r2), 1.0)


def _annulus_nonsaddle(x, y, prm):
    r = np.hypot(x, y)
    return _radial(x, y, -(1.0 - r) * (r - 2.0), 1.0)


def _product_circle(x, y, prm):
    return np.ones_like(x), np.sin(np.pi * y) ** 2


def _planar_saddle(x, y, prm):
    return x.copy(), -y


def _linear_sink(x, y, prm):
    return -x, -y


def _robust_family(x, y, prm):
    r2 = x * x + y * y
    return _radial(x, y, -((r2 - 1.0) ** 2 - prm["lam"]), 1.0)


@dataclass(frozen=True)
class FieldDescriptor:
    """Catalogue entry: formula, default geometry and documented equilibria."""

    field_id: str
    formula: str
    space: PhaseSpace | None  # None: planar, window derived from the block
    params: dict = field(default_factory=dict)
    param_doc: dict = field(default_factory=dict)
    fixed_points: str = ""
    fixed_point_samples: tuple = ()
    block: dict = field(default_factory=dict)
    func: Callable | None = None


_TORUS = PhaseSpace((-1.0, -1.0), (1.0, 1.0), (True, True))
_UNIT_TORUS = PhaseSpace((0.0, 0.0), (1.0, 1.0), (True, True))

_CATALOGUE = (
    FieldDescriptor(
        "torus_homoclinic",
        "dx = sin^2(pi(x+1)/2) (sin^2(pi(x-xp)/2) + sin^2(pi(y-yp)/2)), dy = 0",
        _TORUS,
        {"xp": 0.0, "yp": 0.5},
        {"xp": "x coordinate of the extra rest point", "yp": "y coordinate of the extra rest point"},
        "the circle x = +-1 and the point (xp, yp)",
        ((-1.0, 0.3), (-1.0, -0.7), (0.0, 0.5)),
        {"kind": "band", "axis": 0, "center": 1.0, "halfwidth": 0.3},
        _torus_homoclinic,
    ),
    FieldDescriptor(
        "saddle_node_torus",
        "dx = psi(x) (x^2 + y^2 - 1/4), dy = 0; psi = 1 on |x| <= 1/2, smoothstep to 0 at x = +-1",
        _TORUS,
        {},
        {},
        "the circle x = +-1 and the circle x^2 + y^2 = 1/4",
        ((1.0, 0.2), (-1.0, -0.9), (0.0, 0.5), (0.0, -0.5), (0.3, 0.4), (-0.5, 0.0)),
        {"kind": "band", "axis": 0, "center": 1.0, "halfwidth": 0.3},
        _saddle_node_torus,
    ),
    FieldDescriptor(
        "mendelson",
        "polar: dr = r(1 - r), dtheta = sin^2(theta/2)",
        None,
        {},
        {},
        "the origin and (1, 0)",
        ((0.0, 0.0), (1.0, 0.0)),
        {"kind": "disk", "cx": 1.0, "cy": 0.0, "radius": 0.5},
        _mendelson,
    ),
    FieldDescriptor(
        "planar_cycle",
        "polar: dr = sigma r (1 - r^2), dtheta = 1",
        None,
        {"sigma": 1.0},
        {"sigma": "+1 attracting unit circle, -1 repelling"},
        "the origin",
        ((0.0, 0.0),),
        {"kind": "annulus", "cx": 0.0, "cy": 0.0, "r_in": 0.5, "r_out": 1.5},
        _planar_cycle,
    ),
    FieldDescriptor(
        "annulus_nonsaddle",
        "polar: dr = -r(1 - r)(r - 2), dtheta = 1",
        None,
        {},
        {},
        "the origin",
        ((0.0, 0.0),),
        {"kind": "annulus", "cx": 0.0, "cy": 0.0, "r_in": 0.5, "r_out": 2.5},
        _annulus_nonsaddle,
    ),
    FieldDescriptor(
        "product_circle",
        "torus (theta, s) in [0,1)^2: dtheta = 1, ds = sin^2(pi s)",
        _UNIT_TORUS,
        {},
        {},
        "none (s = 0 is a periodic orbit)",
        (),
        {"kind": "band", "axis": 1, "center": 0.0, "halfwidth": 0.25},
        _product_circle,
    ),
    FieldDescriptor(
        "planar_saddle",
        "dx = x, dy = -y",
        None,
        {},
        {},
        "the origin",
        ((0.0, 0.0),),
        {"kind": "box", "x0": -1.0, "x1": 1.0, "y0": -1.0, "y1": 1.0},
        _planar_saddle,
    ),
    FieldDescriptor(
        "robust_family",
        "polar: dr = -r((r^2 - 1)^2 - lam), dtheta = 1, lam in [-0.25, 0.25]",
        None,
        {"lam": 0.0},
        {"lam": "continuation parameter"},
        "the origin",
        ((0.0, 0.0),),
        {"kind": "annulus", "cx": 0.0, "cy": 0.0, "r_in": 0.5, "r_out": 1.5},
        _robust_family,
    ),
    FieldDescriptor(
        "linear_sink",
        "dx = -x, dy = -y",
        None,
        {},
        {},
        "the origin",
        ((0.0, 0.0),),
        {"kind": "box", "x0": -1.0, "x1": 1.0, "y0": -1.0, "y1": 1.0},
        _linear_sink,
    ),
)

_BY_ID = {d.field_id: d for d in _CATALOGUE}


def catalogue() -> list[FieldDescriptor]:
    """All catalogue entries in a fixed order."""
    return list(_CATALOGUE)


def descriptor(field_id: str) -> FieldDescriptor:
    try:
        return _BY_ID[field_id]
    except KeyError:
        raise ConfigError(f"unknown flow id {field_id!r}") from None


@dataclass(frozen=True)
class FlowSpec:
    space: PhaseSpace
    field_id: str
    params: tuple = ()  # sorted (name, value) pairs, hashable
    reversed: bool = False

    @property
    def param_dict(self) -> dict:
        return dict(self.params)

    def reverse(self) -> "FlowSpec":
        return replace(self, reversed=not self.reversed)

    def with_params(self, **kw) -> "FlowSpec":
        prm = self.param_dict
        prm.update(kw)
        return replace(self, params=tuple(sorted(prm.items())))


def make_spec(field_id: str, space: PhaseSpace | None = None, params: dict | None = None,
              reversed: bool = False) -> FlowSpec:
    """Build a validated :class:`FlowSpec`; planar entries need an explicit window."""
    desc = descriptor(field_id)
    prm = dict(desc.params)
    for k, v in (params or {}).items():
        if k not in desc.params:
            raise ConfigError(f"flow {field_id!r} has no parameter {k!r}")
        prm[k] = float(v)
    if space is None:
        if desc.space is None:
            raise ConfigError(f"planar flow {field_id!r} needs an explicit window")
        space = desc.space
    elif desc.space is not None and tuple(space.periodic) != tuple(desc.space.periodic):
        raise ConfigError(f"flow {field_id!r} requires periodicity {desc.space.periodic}")
    return FlowSpec(space, field_id, tuple(sorted(prm.items())), reversed)


def velocity_batch(spec: FlowSpec, pts) -> np.ndarray:
    """Velocity at an ``(n, 2)`` array of points (periodic axes are wrapped first)."""
    desc = descriptor(spec.field_id)
    prm = spec.param_dict
    missing = set(desc.params) - set(prm)
    if missing:
        raise ConfigError(f"missing parameters {sorted(missing)} for {spec.field_id!r}")
    pts = np.asarray(pts, float)
    if any(spec.space.periodic):
        pts = spec.space.wrap(pts)
    vx, vy = desc.func(pts[..., 0], pts[..., 1], prm)
    out = np.stack([vx, vy], axis=-1)
    return -out if spec.reversed else out


def velocity(spec: FlowSpec, p) -> np.ndarray:
    return velocity_batch(spec, np.asarray(p, float).reshape(1, 2))[0]


@dataclass
class FlowResult:
    point: np.ndarray
    escaped: bool
    exit_time: float | None = None


def _rk4_steps(spec, pts, h, nsteps, check_escape, t0=0.0):
    """Advance ``pts`` by ``nsteps`` RK4 steps of size ``h``.

    Returns (points, escaped mask, exit times). Escaped points are frozen.
    """
    x = np.array(pts, float, copy=True)
    n = len(x)
    esc = np.zeros(n, bool)
    t_exit = np.full(n, np.nan)
    half = h / 2.0
    sixth = h / 6.0
    with np.errstate(over="ignore", invalid="ignore"):
        for s in range(nsteps):
            if check_escape:
                live = ~esc
                if not live.any():
                    break
                xs = x[live]
            else:
                xs = x
            k1 = velocity_batch(spec, xs)
            k2 = velocity_batch(spec, xs + half * k1)
            k3 = velocity_batch(spec, xs + half * k2)
            k4 = velocity_batch(spec, xs + h * k3)
            xn = xs + sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if check_escape:
                gone = spec.space.escaped(xn)
                idx = np.flatnonzero(live)
                x[idx] = xn
                if gone.any():
                    esc[idx[gone]] = True
                    t_exit[idx[gone]] = t0 + (s + 1) * h
            else:
                x = xn
    return x, esc, t_exit


def _step_plan(tau: float, step: float) -> tuple[float, int]:
    if step <= 0:
        raise ConfigError("integration step must be positive")
    nsteps = max(1, int(math.ceil(abs(tau) / step - 1e-9)))
    return tau / nsteps, nsteps


def flow_map_batch(spec: FlowSpec, pts, tau: float, step: float = DEFAULT_STEP):
    """Time-``tau`` map of many points.

    Returns ``(points, escaped, exit_time)``; points are wrapped on periodic axes
    and escaped points keep their last in-range position.
    """
    pts = np.asarray(pts, float).reshape(-1, 2)
    if not math.isfinite(tau):
        raise ValueError("tau must be finite")
    if tau == 0.0:
        return spec.space.wrap(pts), np.zeros(len(pts), bool), np.full(len(pts), np.nan)
    h, n = _step_plan(tau, step)
    out, esc, tex = _rk4_steps(spec, pts, h, n, not spec.space.is_torus)
    return spec.space.wrap(out), esc, tex


def flow_map(spec: FlowSpec, p, tau: float, step: float = DEFAULT_STEP) -> FlowResult:
    out, esc, tex = flow_map_batch(spec, np.asarray(p, float).reshape(1, 2), tau, step)
    return FlowResult(out[0], bool(esc[0]), None if not esc[0] else float(tex[0]))


@dataclass
class Trajectory:
    times: np.ndarray
    points: np.ndarray
    step: float
    escaped: bool = False

    @property
    def samples(self) -> list[tuple[float, np.ndarray]]:
        return list(zip(self.times.tolist(), self.points))


def trajectory(spec: FlowSpec, p, horizon: float, step: float = DEFAULT_STEP,
               sample_every: int = 10, direction: int = 1) -> Trajectory:
    """Sampled orbit of ``p`` over ``[0, horizon]`` (or ``[-horizon, 0]``)."""
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    h, nsteps = _step_plan(horizon, step)
    h *= 1 if direction >= 0 else -1
    x = np.asarray(p, float).reshape(1, 2)
    times, pts = [0.0], [spec.space.wrap(x)[0]]
    done = 0
    escaped = False
    check = not spec.space.is_torus
    while done < nsteps:
        k = min(sample_every, nsteps - done)
        x, esc, _ = _rk4_steps(spec, x, h, k, check)
        done += k
        if esc[0]:
            escaped = True
            break
        times.append(done * h)
        pts.append(spec.space.wrap(x)[0])
    return Trajectory(np.array(times), np.array(pts), abs(h), escaped)


def thin_points(space: PhaseSpace, pts, radius: float) -> np.ndarray:
    """Greedy thinning: keep a point only if it is farther than ``radius`` from all kept ones."""
    pts = np.asarray(pts, float).reshape(-1, 2)
    kept: list[np.ndarray] = []
    for q in pts:
        if kept and np.min(space.distance(np.array(kept), q)) <= radius:
            continue
        kept.append(q)
    return np.array(kept).reshape(-1, 2)


def omega_limit(spec: FlowSpec, p, horizon: float, burn_in: float, direction: int = 1,
                cluster_radius: float = 0.05, step: float = 1e-2,
                sample_every: int = 5) -> np.ndarray:
    """Cluster set of late samples of the forward (or backward) orbit of ``p``.

    Empty when the orbit escapes a non-periodic window.
    """
    if not horizon > burn_in > 0:
        raise ValueError("need horizon > burn_in > 0")
    tr = trajectory(spec, p, horizon, step, sample_every, direction)
    if tr.escaped:
        return np.empty((0, 2))
    late = tr.points[np.abs(tr.times) >= burn_in]
    return thin_points(spec.space, late, cluster_radius)
