"""Run configuration: flat ``key = value`` files plus command-line overrides.

Band keys carry the :class:`~rissim.scene.BandConfig` field names and
override the band stored in the scene file. Everything else controls the run.
A minimal file::

    # C-band case study
    scene = demo_cband.scene.json
    spacing_m = 6
    width = 3.8
    thresholds_db = 0, 10

Relative scene paths resolve against the config file's directory first and
then against the demo files shipped with the package.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

from .scene import BandConfig, SceneMap, generate_manhattan, load_scene

BAND_KEYS = tuple(BandConfig.__dataclass_fields__)


class ConfigError(ValueError):
    pass


def data_path(name: str) -> Path:
    """Path of a file bundled under ``rissim/data``."""
    return Path(str(resources.files("rissim") / "data" / name))


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(",", " ").split())


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


@dataclass
class RunConfig:
    scene: Optional[str] = None
    manhattan: Optional[tuple[float, ...]] = None
    band: dict = field(default_factory=dict)
    spacing_m: float = 10.0
    wall_heights_m: tuple[float, ...] = (3.0, 6.0)
    height_fraction: float = 0.8
    width: Optional[float] = None
    sweep: bool = False
    max_ris: Optional[int] = None
    threshold_db: Optional[float] = None
    thresholds_db: tuple[float, ...] = (0.0, 10.0)
    out: str = "out"
    seed: int = 0
    workers: int = 1
    base_dir: Path = field(default_factory=Path.cwd)

    def validate(self) -> "RunConfig":
        if (self.scene is None) == (self.manhattan is None):
            raise ConfigError("exactly one scene source is required: 'scene' or 'manhattan'")
        if self.manhattan is not None and len(self.manhattan) != 4:
            raise ConfigError("manhattan = extent_m, block_m, street_m, building_height_m")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.max_ris is not None and self.max_ris < 0:
            raise ConfigError("max_ris must be >= 0")
        for t in self.thresholds_db + ((self.threshold_db,) if self.threshold_db is not None else ()):
            if t != t or t in (float("inf"), float("-inf")):
                raise ConfigError("thresholds must be finite")
        return self

    def scene_path(self) -> Path:
        p = Path(self.scene)
        if p.is_absolute() or p.exists():
            return p
        for cand in (self.base_dir / p, data_path(p.name)):
            if cand.exists():
                return cand
        raise ConfigError(f"scene file not found: {self.scene}")

    def load_scene(self) -> SceneMap:
        if self.scene is not None:
            sc = load_scene(self.scene_path())
        else:
            extent, block, street, height = self.manhattan
            sc = generate_manhattan(extent, block, street, height, seed=self.seed)
        if self.band:
            fields = sc.band.to_dict()
            fields.update(self.band)
            sc = sc.with_band(BandConfig(**fields))
        return sc

    def all_thresholds(self, scene: SceneMap) -> tuple[float, ...]:
        main = self.target_threshold(scene)
        return tuple(sorted(set(self.thresholds_db) | {main}))

    def target_threshold(self, scene: SceneMap) -> float:
        return scene.band.snr_threshold_db if self.threshold_db is None else self.threshold_db


_PARSERS = {
    "scene": str,
    "manhattan": _floats,
    "spacing_m": float,
    "wall_heights_m": _floats,
    "height_fraction": float,
    "width": float,
    "sweep": _bool,
    "max_ris": int,
    "threshold_db": float,
    "thresholds_db": _floats,
    "out": str,
    "seed": int,
    "workers": int,
}
_BAND_PARSERS = {
    "ue_placement": str,
    "ris_widths_m": _floats,
    "ris_wall_penetration": _bool,
}


def parse_config_text(text: str, base_dir: Path | None = None) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    cfg = RunConfig(base_dir=base_dir or Path.cwd())
    for key, raw in cp["run"].items():
        try:
            if key in _PARSERS:
                setattr(cfg, key, _PARSERS[key](raw))
            elif key in BAND_KEYS:
                cfg.band[key] = _BAND_PARSERS.get(key, float)(raw)
            else:
                raise ConfigError(f"unknown config key: {key}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{key}: {exc}") from None
    return cfg


def load_config(path) -> RunConfig:
    """Read a config file; bare names fall back to the bundled demo configs."""
    p = Path(path)
    if not p.exists():
        alt = data_path(p.name if p.suffix else p.name + ".cfg")
        if not alt.exists():
            raise ConfigError(f"config file not found: {path}")
        p = alt
    return parse_config_text(p.read_text(encoding="utf-8"), base_dir=p.parent)


def override(cfg: RunConfig, **kwargs) -> RunConfig:
    """Copy of ``cfg`` with every non-None keyword applied."""
    changes = {k: v for k, v in kwargs.items() if v is not None}
    if "scene" in changes:
        changes["manhattan"] = None
    return dataclasses.replace(cfg, **changes)
