"""
Scenario configuration: an INI file with one section per module.

    [field_model]        raster source, ground grid, angle bins, altitude
    [priority_pipeline]  morphology / averaging radii, importance scale
    [cbf_controller]     controller gains
    [sim_engine]         time step, horizon, drones, check points

Point lists are written ``x y; x y; ...`` (check points take ``x y z``).
Unknown keys are rejected with the offending line number.
"""

import configparser
from dataclasses import dataclass, field, fields, asdict
import io
import os

from .cbf_controller import ControllerParams
from .rasters import InputDataError


class ConfigError(InputDataError):
    pass


@dataclass(frozen=True)
class FieldSection:
    # "synthetic" builds an orchard raster from width_m/height_m/raster_pitch/seed
    raster: str = "synthetic"
    prebuilt: bool = False
    width_m: float = 24.0
    height_m: float = 39.0
    raster_pitch: float = 0.05
    seed: int = 7
    downsample: int = 6
    grid_rows: int = 52
    grid_cols: int = 32
    angle_bins_h: int = 8
    angle_bins_v: int = 5
    z_c: float = 10.0


@dataclass(frozen=True)
class PrioritySection:
    close_r: int = 5
    open_r: int = 10
    avg_r: int = 10
    phi_max: float = 1.0


@dataclass(frozen=True)
class SimSection:
    dt: float = 0.05
    t_end: float = 600.0
    stop_ratio: float = 0.01
    positions: tuple = field(default=((5.0, 0.5), (7.5, 0.5), (10.0, 0.5)), metadata={"dim": 2})
    checkpoints: tuple = field(default=(), metadata={"dim": 3})
    snapshot_every: float = 30.0


@dataclass(frozen=True)
class ScenarioConfig:
    field_model: FieldSection = FieldSection()
    priority_pipeline: PrioritySection = PrioritySection()
    cbf_controller: ControllerParams = ControllerParams()
    sim_engine: SimSection = SimSection()

    def __post_init__(self):
        s = self.sim_engine
        if s.dt <= 0:
            raise ConfigError("[sim_engine] dt must be positive")
        if s.t_end < 0:
            raise ConfigError("[sim_engine] t_end must be nonnegative")
        if len(s.positions) < 1:
            raise ConfigError("[sim_engine] positions: at least one drone required")
        if len(set(s.positions)) != len(s.positions):
            raise ConfigError("[sim_engine] positions: initial drone positions must be distinct")


SECTIONS = {f.name: f.type for f in fields(ScenarioConfig)}


def _fmt_points(pts):
    return "; ".join(" ".join(repr(float(v)) for v in p) for p in pts)


def _parse_points(text, dim):
    pts = []
    for chunk in text.split(";"):
        if not chunk.strip():
            continue
        vals = tuple(float(v) for v in chunk.split())
        if len(vals) != dim:
            raise ValueError(f"expected {dim} numbers per point, got {chunk.strip()!r}")
        pts.append(vals)
    return tuple(pts)


def _convert(f, raw):
    if "dim" in f.metadata:
        return _parse_points(raw, f.metadata["dim"])
    if f.type is bool:
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if f.type is int:
        return int(raw)
    if f.type is float:
        return float(raw)
    return raw.strip()


def _line_of(text, section, key):
    current = None
    for n, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip()
        elif current == section and s.split("=", 1)[0].strip().lower() == key:
            return n
    return None


def parse_config(text, source="<config>") -> ScenarioConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    sections = {}
    for name in cp.sections():
        if name not in SECTIONS:
            raise ConfigError(f"{source}: line {_line_of_section(text, name)}: unknown section [{name}]")
        cls = SECTIONS[name]
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in cp.items(name):
            where = f"{source}: line {_line_of(text, name, key)}: [{name}] {key}"
            if key not in known:
                raise ConfigError(f"{where}: unknown key")
            try:
                kwargs[key] = _convert(known[key], raw)
            except ValueError as exc:
                raise ConfigError(f"{where}: {exc}") from exc
        try:
            sections[name] = cls(**kwargs)
        except ValueError as exc:
            raise ConfigError(f"{source}: [{name}] {exc}") from exc
    return ScenarioConfig(**sections)


def _line_of_section(text, name):
    for n, line in enumerate(text.splitlines(), 1):
        if line.strip() == f"[{name}]":
            return n
    return None


def load_config(path) -> ScenarioConfig:
    """Read a config file; a relative raster path resolves against the file's folder."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    cfg = parse_config(text, source=str(path))
    raster = cfg.field_model.raster
    if raster != "synthetic" and not os.path.isabs(raster):
        raster = os.path.normpath(os.path.join(os.path.dirname(os.path.abspath(path)), raster))
        cfg = ScenarioConfig(
            field_model=_replace(cfg.field_model, raster=raster),
            priority_pipeline=cfg.priority_pipeline,
            cbf_controller=cfg.cbf_controller,
            sim_engine=cfg.sim_engine,
        )
    return cfg


def _replace(obj, **kw):
    d = asdict(obj)
    d.update(kw)
    return type(obj)(**d)


def dump_config(cfg: ScenarioConfig) -> str:
    """Resolved config as INI text; parse_config(dump_config(c)) == c."""
    cp = configparser.ConfigParser(interpolation=None)
    for name in SECTIONS:
        sec = getattr(cfg, name)
        cp.add_section(name)
        for f in fields(sec):
            v = getattr(sec, f.name)
            if "dim" in f.metadata:
                cp.set(name, f.name, _fmt_points(v))
            elif isinstance(v, bool):
                cp.set(name, f.name, "true" if v else "false")
            elif isinstance(v, float):
                cp.set(name, f.name, repr(v))
            else:
                cp.set(name, f.name, str(v))
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()
