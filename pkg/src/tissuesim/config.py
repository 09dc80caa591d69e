"""Simulation configuration, scenario presets and the sectioned config file format.

Config files are INI-style, one section per subsystem::

    [scene]
    dims = 256, 256
    particles = 100

    [motion]
    kind = springs
    a_max = 4

Unknown sections or keys are rejected.
"""
from __future__ import annotations

import configparser
import hashlib
import io
import math
from dataclasses import asdict, dataclass, fields, replace

from ._validation import check_dims, check_fraction, check_positive

__all__ = ["SimulationConfig", "PRESETS", "preset", "load_config", "parse_config", "apply_overrides"]


def _tuple_of(conv):
    def parse(text):
        if isinstance(text, (tuple, list)):
            return tuple(conv(v) for v in text)
        parts = [p for p in str(text).replace("x", ",").replace(" ", ",").split(",") if p]
        return tuple(conv(p) for p in parts)

    return parse


def _optional(conv):
    def parse(text):
        if text is None or str(text).strip().lower() in ("", "none", "auto"):
            return None
        return conv(text)

    return parse


def _bool(text):
    if isinstance(text, bool):
        return text
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class SimulationConfig:
    """Every knob of a simulation run. ``None`` means "derive a default"."""

    dims: tuple = (1024, 1024)
    frames: int = 200
    particles: int = 800
    min_dist: float | None = None
    particle_size: tuple = (1.0, 3.0)
    background_size: tuple = (20.0, 60.0)
    background_count: int | None = None
    max_attempts: int = 1000

    mask: str = "ellipse"
    coverage: float = 0.3
    mask_path: str | None = None
    mask_threshold: float | None = None

    tau: float = 10.0
    size_std: float = 0.05
    angle_std: float = math.pi / 30

    motion: str = "springs"
    a_max: float = 4.0
    spacing: float | None = None
    p_event: float = 0.25
    event_duration: int = 3
    max_event_points: int = 10
    flow_path: str | None = None

    alpha: float = 0.2
    delta: float = 50.0
    truncation: float = 4.0

    seed: int = 0
    out: str = "out"
    write_pgm: bool = True

    def __post_init__(self):
        object.__setattr__(self, "dims", check_dims(self.dims))
        if self.frames < 1:
            raise ValueError(f"frames must be >= 1, got {self.frames}")
        if self.particles < 1:
            raise ValueError(f"particles must be >= 1, got {self.particles}")
        check_fraction(self.alpha, "alpha")
        check_positive(self.delta, "delta")
        check_positive(self.tau, "tau")
        if self.mask not in ("ellipse", "file"):
            raise ValueError(f"mask must be 'ellipse' or 'file', got {self.mask!r}")
        if self.motion not in ("springs", "flow"):
            raise ValueError(f"motion must be 'springs' or 'flow', got {self.motion!r}")
        if self.mask == "file" and (self.mask_path is None or self.mask_threshold is None):
            raise ValueError("a file mask needs mask path and threshold")
        if not 0 <= self.p_event <= 1:
            raise ValueError(f"p_event must be in [0, 1], got {self.p_event}")
        if not 0 <= int(self.seed) <= 2**64 - 1:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")

    @property
    def ndim(self) -> int:
        return len(self.dims)

    def resolved(self) -> "SimulationConfig":
        """Copy with every derived default made explicit."""
        min_dist = self.min_dist if self.min_dist is not None else (6.0 if self.ndim == 2 else 4.0)
        spacing = self.spacing if self.spacing is not None else max(2.0, max(self.dims) / 16)
        return replace(self, min_dist=float(min_dist), spacing=float(spacing))

    def to_ini(self, skip=()) -> str:
        """Sectioned text form, parseable by `parse_config`; fields in `skip` are left out."""
        parser = configparser.ConfigParser(interpolation=None)
        values = asdict(self)
        for section, keys in _SECTIONS.items():
            parser[section] = {}
            for key, (name, _) in keys.items():
                if name in skip:
                    continue
                value = values[name]
                if isinstance(value, tuple):
                    value = ", ".join(repr(v) if isinstance(v, float) else str(v) for v in value)
                elif isinstance(value, float):
                    value = repr(value)
                parser[section][key] = "none" if value is None else str(value)
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()

    def digest(self) -> str:
        """Hash of every setting that influences the generated data."""
        return hashlib.sha256(self.to_ini(skip=OUTPUT_FIELDS).encode("utf-8")).hexdigest()


_SECTIONS = {
    "scene": {
        "dims": ("dims", _tuple_of(int)),
        "frames": ("frames", int),
        "particles": ("particles", int),
        "min_dist": ("min_dist", _optional(float)),
        "particle_size": ("particle_size", _tuple_of(float)),
        "background_size": ("background_size", _tuple_of(float)),
        "background_count": ("background_count", _optional(int)),
        "max_attempts": ("max_attempts", int),
    },
    "mask": {
        "kind": ("mask", str),
        "coverage": ("coverage", float),
        "path": ("mask_path", _optional(str)),
        "threshold": ("mask_threshold", _optional(float)),
    },
    "dynamics": {
        "tau": ("tau", float),
        "size_std": ("size_std", float),
        "angle_std": ("angle_std", float),
    },
    "motion": {
        "kind": ("motion", str),
        "a_max": ("a_max", float),
        "spacing": ("spacing", _optional(float)),
        "p_event": ("p_event", float),
        "duration": ("event_duration", int),
        "m": ("max_event_points", int),
        "flow_path": ("flow_path", _optional(str)),
    },
    "render": {
        "alpha": ("alpha", float),
        "delta": ("delta", float),
        "truncation": ("truncation", float),
    },
    "run": {
        "seed": ("seed", int),
        "out": ("out", str),
        "write_pgm": ("write_pgm", _bool),
    },
}

# Settings that only choose where results go.
OUTPUT_FIELDS = ("out",)

# Written by `generate` into run manifests; skipped when a manifest is loaded as config.
METADATA_SECTION = "manifest"

assert {n for keys in _SECTIONS.values() for n, _ in keys.values()} == {f.name for f in fields(SimulationConfig)}

PRESETS = {
    "hydra-flow": SimulationConfig(dims=(1024, 1024), motion="flow"),
    "springs-2d": SimulationConfig(dims=(1024, 1024), motion="springs", a_max=4.0),
    "springs-3d": SimulationConfig(dims=(200, 200, 200), motion="springs", a_max=3.0),
}


def preset(name: str) -> SimulationConfig:
    """Scenario preset: ``hydra-flow``, ``springs-2d`` or ``springs-3d``."""
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}") from None


def _updates_from_parser(parser: configparser.ConfigParser, source: str) -> dict:
    updates = {}
    for section in parser.sections():
        if section == METADATA_SECTION:
            continue
        if section not in _SECTIONS:
            raise ValueError(f"{source}: unknown section [{section}]")
        for key, text in parser[section].items():
            if key not in _SECTIONS[section]:
                raise ValueError(f"{source}: unknown key {key!r} in [{section}]")
            name, conv = _SECTIONS[section][key]
            try:
                updates[name] = conv(text)
            except ValueError as exc:
                raise ValueError(f"{source}: bad value for {section}.{key}: {exc}") from None
    return updates


def parse_config(text: str, base: SimulationConfig | None = None, source: str = "<config>") -> SimulationConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ValueError(str(exc)) from None
    return replace(base or SimulationConfig(), **_updates_from_parser(parser, source))


def load_config(path, base: SimulationConfig | None = None) -> SimulationConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), base, source=str(path))


def apply_overrides(config: SimulationConfig, assignments) -> SimulationConfig:
    """Apply ``section.key=value`` strings."""
    updates = {}
    for item in assignments:
        lhs, sep, value = item.partition("=")
        section, dot, key = lhs.strip().partition(".")
        if not sep or not dot:
            raise ValueError(f"override must look like section.key=value, got {item!r}")
        if section not in _SECTIONS or key not in _SECTIONS[section]:
            raise ValueError(f"unknown setting {lhs.strip()!r}")
        name, conv = _SECTIONS[section][key]
        updates[name] = conv(value.strip())
    return replace(config, **updates)
