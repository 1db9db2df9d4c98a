"""Experiment configuration files.

INI-style text read with :mod:`configparser`. Every section is optional and
falls back to the reference setup. Vectors are comma-separated numbers.
Environment variables are never consulted. Grammar::

    [general]
    seed = 0                      # integer
    alpha = 1.0                   # prior scale used by `fuse`
    pivot = base                  # base | sensor

    [sensor.<name>]               # one section per LiDAR, in file order
    rpy_deg = 0, 0, 0             # roll, pitch, yaw (deg), R = Rz Ry Rx
    translation = 0, 0, 0         # base <- sensor translation (m)
    sigma_translation = 0.05, 0.05, 0.05   # per-axis std (m)
    sigma_rotation = 0.1, 0.1, 0.1         # per-axis std (rad)
    sigma_measurement = 0.02, 0.02, 0.02   # per-axis std (m)
    perturb = yes                 # inject extrinsic noise in sweeps

    [propagate]
    rpy_deg = 10, 10, 10
    translation = 1, 1, 1
    point = 10, 10, 10
    alphas = 0, 0.02, 0.04, 0.06, 0.08, 0.1, 1

    [plane]
    n_points = 10000
    noise_std = 0.02
    trials = 100
    alphas = 0, 0.02, 0.04, 0.06, 0.08, 0.1
    normal = 1, 1, 1
    center = 10, 10, 10
    extent = 10

    [scene]                       # fields of SceneSpec
    n_boxes = 20
    region = -34, 34, -34, 34
    ...

    [sweep]
    n_seeds = 10
    alphas = 0, 0.02, 0.04, 0.06, 0.08, 0.1
    nms_iou = 0.05
    uncertain_trace = 0.05
"""

from __future__ import annotations

import configparser
import dataclasses
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .perturbation import DEFAULT_ALPHAS, MEASUREMENT_STD, ROTATION_STD, TRANSLATION_STD, ThetaPrior
from .plane import PlanePose, REFERENCE_RPY_DEG, REFERENCE_TRANSLATION
from .propagation import PIVOTS, PerturbationPrior
from .scene import SceneSpec
from .se3 import RigidTransform


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, path=None):
        where = f"{path or '<config>'}" + (f":{line}" if line is not None else "")
        super().__init__(f"{where}: {message}")
        self.line = line
        self.path = path


@dataclass(frozen=True)
class SensorConfig:
    name: str
    rpy_deg: tuple = (0.0, 0.0, 0.0)
    translation: tuple = (0.0, 0.0, 0.0)
    sigma_translation: tuple = (TRANSLATION_STD,) * 3
    sigma_rotation: tuple = (ROTATION_STD,) * 3
    sigma_measurement: tuple = (MEASUREMENT_STD,) * 3
    perturb: bool = True

    def extrinsics(self) -> RigidTransform:
        return RigidTransform.from_rpy(self.rpy_deg, self.translation, degrees=True)

    def prior(self, alpha: float = 1.0) -> ThetaPrior:
        base = PerturbationPrior.from_std(self.sigma_translation, self.sigma_rotation, self.sigma_measurement)
        return ThetaPrior(base, alpha)


def default_sensors() -> tuple:
    """Roof LiDAR (unperturbed, defines the base frame) and two corner LiDARs."""
    return (
        SensorConfig("top", (0.0, 0.0, 0.0), (0.0, 0.0, 1.3), perturb=False),
        SensorConfig("left", (0.0, 0.0, 45.0), (1.2, 1.0, 1.0)),
        SensorConfig("right", (0.0, 0.0, -45.0), (1.2, -1.0, 1.0)),
    )


@dataclass(frozen=True)
class PropagateConfig:
    rpy_deg: tuple = REFERENCE_RPY_DEG
    translation: tuple = REFERENCE_TRANSLATION
    point: tuple = (10.0, 10.0, 10.0)
    alphas: tuple = (*DEFAULT_ALPHAS, 1.0)
    sigma_translation: tuple = (TRANSLATION_STD,) * 3
    sigma_rotation: tuple = (ROTATION_STD,) * 3
    sigma_measurement: tuple = (MEASUREMENT_STD,) * 3

    def prior(self) -> PerturbationPrior:
        return PerturbationPrior.from_std(self.sigma_translation, self.sigma_rotation, self.sigma_measurement)


@dataclass(frozen=True)
class PlaneConfig:
    n_points: int = 10000
    noise_std: float = 0.02
    trials: int = 100
    alphas: tuple = DEFAULT_ALPHAS
    normal: tuple = PlanePose().normal
    center: tuple = PlanePose().center
    extent: float = PlanePose().extent
    rpy_deg: tuple = REFERENCE_RPY_DEG
    translation: tuple = REFERENCE_TRANSLATION

    def pose(self) -> PlanePose:
        return PlanePose(self.normal, self.center, self.extent)


@dataclass(frozen=True)
class SweepConfig:
    n_seeds: int = 10
    alphas: tuple = DEFAULT_ALPHAS
    nms_iou: float = 0.05
    uncertain_trace: float = 0.05


@dataclass(frozen=True)
class RigConfig:
    sensors: tuple = field(default_factory=default_sensors)
    alpha: float = 1.0
    seed: int = 0
    pivot: str = "base"
    propagate: PropagateConfig = PropagateConfig()
    plane: PlaneConfig = PlaneConfig()
    scene: SceneSpec = SceneSpec()
    sweep: SweepConfig = SweepConfig()

    def extrinsics(self) -> list[RigidTransform]:
        return [s.extrinsics() for s in self.sensors]

    def priors(self, alpha: float | None = None) -> list[ThetaPrior]:
        a = self.alpha if alpha is None else alpha
        return [s.prior(a) for s in self.sensors]


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^\s*([^=:#;\s][^=:]*?)\s*[=:]")


def _line_index(text: str) -> dict:
    """``(section, key) -> line number`` (1-based) for diagnostics."""
    out = {}
    section = None
    for n, line in enumerate(text.splitlines(), start=1):
        m = _SECTION_RE.match(line)
        if m:
            section = m.group(1).strip()
            out[(section, None)] = n
            continue
        m = _KEY_RE.match(line)
        if m and section is not None:
            out[(section, m.group(1).strip().lower())] = n
    return out


def _coerce(kind, raw: str):
    raw = raw.strip()
    if kind is bool:
        low = raw.lower()
        if low in ("1", "yes", "true", "on"):
            return True
        if low in ("0", "no", "false", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if kind is int:
        return int(raw)
    if kind is float:
        v = float(raw)
        if not np.isfinite(v):
            raise ValueError(f"not finite: {raw!r}")
        return v
    if kind is str:
        return raw
    if kind is tuple:
        vals = tuple(float(v) for v in raw.split(",") if v.strip())
        if not all(np.isfinite(vals)):
            raise ValueError(f"non-finite entry in {raw!r}")
        return vals
    raise TypeError(kind)


def _field_kinds(cls) -> dict:
    kinds = {}
    for f in dataclasses.fields(cls):
        default = f.default if f.default is not dataclasses.MISSING else None
        if f.name == "name":
            continue
        kinds[f.name] = type(default) if default is not None else str
    return kinds


def _read_section(cp, section: str, cls, lines, path, skip=()):
    kinds = _field_kinds(cls)
    values = {}
    for key, raw in cp.items(section):
        if key in skip:
            continue
        if key not in kinds:
            raise ConfigError(f"unknown key {key!r} in [{section}]", lines.get((section, key)), path)
        try:
            values[key] = _coerce(kinds[key], raw)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: {exc}", lines.get((section, key)), path) from None
    return values


def _vec3(values: dict, section: str, lines, path):
    for k, v in values.items():
        if isinstance(v, tuple) and k in ("rpy_deg", "translation", "point", "normal", "center",
                                          "sigma_translation", "sigma_rotation", "sigma_measurement"):
            if len(v) != 3:
                raise ConfigError(f"[{section}] {k} needs 3 values, got {len(v)}", lines.get((section, k)), path)


def loads(text: str, path=None) -> RigConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        cp.read_string(text, source=str(path or "<config>"))
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("missing section header", exc.lineno, path) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.option!r}", exc.lineno, path) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section {exc.section!r}", exc.lineno, path) from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigError("malformed line", line, path) from None
    lines = _line_index(text)
    known = {"general", "propagate", "plane", "scene", "sweep"}
    kwargs = {}
    sensors = []
    for section in cp.sections():
        if section.startswith("sensor."):
            name = section[len("sensor."):].strip()
            vals = _read_section(cp, section, SensorConfig, lines, path)
            _vec3(vals, section, lines, path)
            sensors.append(SensorConfig(name, **vals))
        elif section not in known:
            raise ConfigError(f"unknown section [{section}]", lines.get((section, None)), path)
    if cp.has_section("general"):
        kinds = {"seed": int, "alpha": float, "pivot": str}
        for key, raw in cp.items("general"):
            if key not in kinds:
                raise ConfigError(f"unknown key {key!r} in [general]", lines.get(("general", key)), path)
            try:
                kwargs[key] = _coerce(kinds[key], raw)
            except ValueError as exc:
                raise ConfigError(f"[general] {key}: {exc}", lines.get(("general", key)), path) from None
        if kwargs.get("pivot", "base") not in PIVOTS:
            raise ConfigError(f"pivot must be one of {PIVOTS}", lines.get(("general", "pivot")), path)
        if kwargs.get("alpha", 1.0) < 0:
            raise ConfigError("alpha must be non-negative", lines.get(("general", "alpha")), path)
    for name, cls in (("propagate", PropagateConfig), ("plane", PlaneConfig), ("scene", SceneSpec), ("sweep", SweepConfig)):
        if cp.has_section(name):
            vals = _read_section(cp, name, cls, lines, path)
            _vec3(vals, name, lines, path)
            try:
                kwargs[name] = cls(**vals)
            except ValueError as exc:
                raise ConfigError(f"[{name}] {exc}", lines.get((name, None)), path) from None
    if sensors:
        kwargs["sensors"] = tuple(sensors)
    return RigConfig(**kwargs)


def load(path) -> RigConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, path) from None
    return loads(text, path)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(repr(float(x)) for x in v)
    return str(v)


def _section_lines(name: str, obj, skip=("name",)) -> list[str]:
    out = [f"[{name}]"]
    for f in dataclasses.fields(obj):
        if f.name in skip:
            continue
        out.append(f"{f.name} = {_fmt(getattr(obj, f.name))}")
    out.append("")
    return out


def dumps(cfg: RigConfig) -> str:
    out = ["[general]", f"seed = {cfg.seed}", f"alpha = {cfg.alpha!r}", f"pivot = {cfg.pivot}", ""]
    for s in cfg.sensors:
        out += _section_lines(f"sensor.{s.name}", s)
    out += _section_lines("propagate", cfg.propagate)
    out += _section_lines("plane", cfg.plane)
    out += _section_lines("scene", cfg.scene)
    out += _section_lines("sweep", cfg.sweep)
    return "\n".join(out)


def dump(cfg: RigConfig, path) -> None:
    Path(path).write_text(dumps(cfg), encoding="utf-8")
