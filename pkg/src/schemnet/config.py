"""Layered pipeline configuration: built-in defaults, overridden by a flat
key=value config file, overridden by CLI flags."""

from __future__ import annotations

from dataclasses import dataclass, fields


class ConfigError(ValueError):
    pass


@dataclass
class Config:
    connectivity: int = 8          # CCL connectivity (4 or 8)
    gap_radius: int = 1            # close_gaps radius before labeling
    dilation: int = 2              # bbox mask dilation, px
    min_area: int = 15             # artifact-region area floor, px
    band: int = 3                  # terminal contact band, px
    max_bind_distance: float = 0.0  # 0 = per-component 1.5*max(w,h) rule
    iou_threshold: float = 0.5     # detection match threshold for eval
    assist_url: str = ""           # empty = assist disabled
    assist_timeout: float = 30.0   # seconds

    def __post_init__(self):
        if self.connectivity not in (4, 8):
            raise ConfigError(f"connectivity must be 4 or 8, got {self.connectivity}")
        if self.gap_radius < 0:
            raise ConfigError("gap_radius must be >= 0")
        if self.dilation < 0:
            raise ConfigError("dilation must be >= 0")
        if self.min_area < 0:
            raise ConfigError("min_area must be >= 0")
        if self.band < 0:
            raise ConfigError("band must be >= 0")
        if self.max_bind_distance < 0:
            raise ConfigError("max_bind_distance must be >= 0")
        if not 0 < self.iou_threshold <= 1:
            raise ConfigError("iou_threshold must be in (0, 1]")
        if self.assist_timeout <= 0:
            raise ConfigError("assist_timeout must be > 0")

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(Config)}

    def replace(self, **updates) -> "Config":
        merged = self.as_dict()
        for key, value in updates.items():
            if key not in merged:
                raise ConfigError(f"unknown config key: {key}")
            merged[key] = _coerce(key, value)
        return Config(**merged)


_TYPES = {f.name: f.type for f in fields(Config)}


def _coerce(key: str, value):
    kind = _TYPES[key]
    if isinstance(value, str) and kind in ("int", "float"):
        try:
            return int(value) if kind == "int" else float(value)
        except ValueError as exc:
            raise ConfigError(f"config key {key}: {exc}") from None
    return value


def parse_config_text(text: str, base: Config | None = None) -> Config:
    """Parse flat `key=value` lines; '#' starts a comment; blank lines ok."""
    cfg = base or Config()
    updates = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        updates[key] = value
    return cfg.replace(**updates)


def load_config(path: str, base: Config | None = None) -> Config:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read(), base)
