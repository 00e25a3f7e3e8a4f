"""INI configuration for the analysis pipeline.

Sections: ``[flow]``, ``[params]``, ``[space]``, ``[block]``, ``[grid]``,
``[outer]``, ``[influence]``, ``[homology]``, ``[robustness]`` and ``[run]``.
Only ``[flow] id`` is mandatory.
"""
from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .flowfield import ConfigError, PhaseSpace, catalogue, descriptor
from .grid import region_bbox, window_for_region

__all__ = ["STAGES", "AnalysisConfig", "load_config", "parse_config", "config_from_dict"]

STAGES = ("classify", "conley", "influence", "robustness")
REGION_KINDS = ("all", "box", "disk", "annulus", "band")


@dataclass
class AnalysisConfig:
    flow_id: str
    params: dict = field(default_factory=dict)
    reversed: bool = False
    lo: tuple | None = None
    hi: tuple | None = None
    periodic: tuple | None = None
    block: dict | None = None
    resolution: int = 256
    tau: float | None = None  # None means the default policy
    step: float = 1e-2
    samples_per_axis: int = 3
    inflate: int = 1
    T_max: float = 200.0
    tol_cells: float = 2.0
    hop: float = 1.0
    extend: int = 3
    n_perturb: int = 64
    max_confirm: int = 4
    coefficients: str = "Z2"
    robust_param: str = "lam"
    lambdas: tuple = ()
    stages: tuple = ("classify", "conley", "influence")
    seed: int = 0
    output_dir: str = "."
    report_name: str = "report.json"
    write_cells: bool = True
    timing: bool = False

    def __post_init__(self):
        self.validate()

    # -- derived -------------------------------------------------------
    def resolved_block(self) -> dict:
        return dict(self.block) if self.block is not None else dict(descriptor(self.flow_id).block)

    def space(self) -> PhaseSpace:
        d = descriptor(self.flow_id)
        if self.lo is not None:
            return PhaseSpace(self.lo, self.hi, self.periodic)
        if d.space is not None:
            return d.space
        return window_for_region(self.resolved_block())

    def validate(self) -> None:
        ids = [d.field_id for d in catalogue()]
        if self.flow_id not in ids:
            raise ConfigError(f"unknown flow id {self.flow_id!r}")
        d = descriptor(self.flow_id)
        unknown = set(self.params) - set(d.params)
        if unknown:
            raise ConfigError(f"unknown parameters for {self.flow_id}: {sorted(unknown)}")
        if (self.lo is None) != (self.hi is None):
            raise ConfigError("space needs both lo and hi")
        if self.lo is not None:
            if len(self.lo) != 2 or len(self.hi) != 2:
                raise ConfigError("space bounds must be 2-vectors")
            if any(a >= b for a, b in zip(self.lo, self.hi)):
                raise ConfigError("space needs lo < hi on both axes")
            if self.periodic is None:
                self.periodic = (False, False)
        if d.space is None and self.lo is not None and any(self.periodic):
            raise ConfigError(f"{self.flow_id} is a planar flow; periodic axes are not allowed")
        for name in ("resolution", "samples_per_axis", "n_perturb"):
            if getattr(self, name) < (2 if name == "resolution" else 1):
                raise ConfigError(f"{name} is too small")
        for name in ("step", "T_max", "tol_cells", "hop"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.tau is not None and not self.tau > 0:
            raise ConfigError("tau must be positive")
        if self.inflate < 0 or self.extend < 0 or self.max_confirm < 0:
            raise ConfigError("inflate, extend and max_confirm must be non-negative")
        if self.coefficients not in ("Z2", "Z"):
            raise ConfigError("coefficients must be Z2 or Z")
        bad = [s for s in self.stages if s not in STAGES]
        if bad:
            raise ConfigError(f"unknown stages {bad}")
        if "robustness" in self.stages and not self.lambdas:
            raise ConfigError("robustness stage needs [robustness] lambdas")
        if "robustness" in self.stages and self.robust_param not in d.params:
            raise ConfigError(f"{self.flow_id} has no parameter {self.robust_param!r}")
        block = self.resolved_block()
        if block.get("kind") not in REGION_KINDS:
            raise ConfigError(f"unknown block kind {block.get('kind')!r}")
        space = self.space()
        if block["kind"] not in ("all", "band"):
            try:
                blo, bhi = region_bbox(block)
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"bad block description: {exc}") from None
            for k in range(2):
                if not space.periodic[k] and (blo[k] < space.lo[k] or bhi[k] > space.hi[k]):
                    raise ConfigError("block does not fit inside the analysis window")

    def as_dict(self) -> dict:
        out = asdict(self)
        for k, v in out.items():
            if isinstance(v, tuple):
                out[k] = list(v)
        out["params"] = {k: float(v) for k, v in sorted(self.params.items())}
        return out


def config_from_dict(data: dict) -> AnalysisConfig:
    known = {f.name for f in fields(AnalysisConfig)}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown config keys {sorted(extra)}")
    kw = {}
    for k, v in data.items():
        kw[k] = tuple(v) if isinstance(v, list) else v
    if "flow_id" not in kw:
        raise ConfigError("missing flow id")
    return AnalysisConfig(**kw)


# -- INI parsing -----------------------------------------------------------


def _floats(text: str, n: int | None = None) -> tuple:
    try:
        vals = tuple(float(t) for t in text.replace(";", ",").split(",") if t.strip())
    except ValueError:
        raise ConfigError(f"expected numbers, got {text!r}") from None
    if n is not None and len(vals) != n:
        raise ConfigError(f"expected {n} numbers, got {text!r}")
    return vals


def _bools(text: str) -> tuple:
    out = []
    for t in text.split(","):
        t = t.strip().lower()
        if t in ("1", "true", "yes", "on"):
            out.append(True)
        elif t in ("0", "false", "no", "off"):
            out.append(False)
        else:
            raise ConfigError(f"expected booleans, got {text!r}")
    return tuple(out)


def _get(cp, section, key, conv, default):
    if not cp.has_option(section, key):
        return default
    raw = cp.get(section, key).strip()
    try:
        return conv(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r}") from None


def parse_config(text: str, base_dir: str | Path | None = None) -> AnalysisConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    if not cp.has_option("flow", "id"):
        raise ConfigError("[flow] id is required")
    kw: dict = {"flow_id": cp.get("flow", "id").strip()}
    kw["reversed"] = _get(cp, "flow", "reversed", lambda s: _bools(s)[0], False)
    if cp.has_section("params"):
        kw["params"] = {k: _get(cp, "params", k, float, None) for k in cp.options("params")}
    if cp.has_section("space"):
        kw["lo"] = _get(cp, "space", "lo", lambda s: _floats(s, 2), None)
        kw["hi"] = _get(cp, "space", "hi", lambda s: _floats(s, 2), None)
        kw["periodic"] = _get(cp, "space", "periodic", _bools, None)
    if cp.has_section("block"):
        block = {}
        for k in cp.options("block"):
            v = cp.get("block", k).strip()
            if k == "kind":
                block[k] = v
            elif k == "axis":
                block[k] = _get(cp, "block", k, int, None)
            else:
                block[k] = _get(cp, "block", k, float, None)
        kw["block"] = block
    kw["resolution"] = _get(cp, "grid", "resolution", int, 256)
    kw["tau"] = _get(cp, "outer", "tau", lambda s: None if s.lower() == "auto" else float(s), None)
    kw["step"] = _get(cp, "outer", "step", float, 1e-2)
    kw["samples_per_axis"] = _get(cp, "outer", "samples_per_axis", int, 3)
    kw["inflate"] = _get(cp, "outer", "inflate", int, 1)
    kw["T_max"] = _get(cp, "influence", "T_max", float, 200.0)
    kw["tol_cells"] = _get(cp, "influence", "tol_cells", float, 2.0)
    kw["hop"] = _get(cp, "influence", "hop", float, 1.0)
    kw["extend"] = _get(cp, "influence", "extend", int, 3)
    kw["n_perturb"] = _get(cp, "influence", "n_perturb", int, 64)
    kw["max_confirm"] = _get(cp, "influence", "max_confirm", int, 4)
    kw["coefficients"] = _get(cp, "homology", "coefficients", str, "Z2")
    kw["robust_param"] = _get(cp, "robustness", "param", str, "lam")
    kw["lambdas"] = _get(cp, "robustness", "lambdas", _floats, ())
    stages = _get(cp, "run", "stages", lambda s: tuple(t.strip() for t in s.split(",") if t.strip()), None)
    if stages is not None:
        kw["stages"] = stages
    kw["seed"] = _get(cp, "run", "seed", int, 0)
    out_dir = _get(cp, "run", "output_dir", str, ".")
    if base_dir is not None and not Path(out_dir).is_absolute():
        out_dir = str(Path(base_dir) / out_dir)
    kw["output_dir"] = out_dir
    kw["report_name"] = _get(cp, "run", "report", str, "report.json")
    kw["write_cells"] = _get(cp, "run", "write_cells", lambda s: _bools(s)[0], True)
    kw["timing"] = _get(cp, "run", "timing", lambda s: _bools(s)[0], False)
    return AnalysisConfig(**kw)


def load_config(path: str | Path) -> AnalysisConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, base_dir=path.parent)
