"""Run configuration: every tunable in one JSON document."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

from .anomaly import AnomalyConfig
from .chunk import EmConfig
from .compression import CompressionSchedule
from .exceptions import ConfigError
from .harness import StreamSpec
from .merge import MergeThresholds

_SECTIONS = {
    "em": EmConfig,
    "merge": MergeThresholds,
    "compression": CompressionSchedule,
    "anomaly": AnomalyConfig,
    "stream": StreamSpec,
}


@dataclass
class RunConfig:
    """All parameters for a stream run.

    ``auto_compress_trigger``, when set, compresses the sketch back down to
    that many clusters whenever a chunk leaves it with more.
    """

    em: EmConfig = field(default_factory=EmConfig)
    merge: MergeThresholds = field(default_factory=MergeThresholds)
    compression: CompressionSchedule = field(default_factory=CompressionSchedule)
    anomaly: AnomalyConfig = field(default_factory=AnomalyConfig)
    stream: StreamSpec = field(default_factory=StreamSpec)
    k_per_chunk: int = 30
    auto_compress_trigger: int | None = None

    def __post_init__(self):
        if int(self.k_per_chunk) < 1:
            raise ConfigError(f"k_per_chunk must be >= 1, got {self.k_per_chunk}")
        self.k_per_chunk = int(self.k_per_chunk)
        if self.auto_compress_trigger is not None:
            self.auto_compress_trigger = int(self.auto_compress_trigger)
            if self.auto_compress_trigger < 1:
                raise ConfigError("auto_compress_trigger must be >= 1")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for name, value in data.items():
            if name in _SECTIONS:
                section = _SECTIONS[name]
                if not isinstance(value, dict):
                    raise ConfigError(f"section {name!r} must be an object")
                allowed = {f.name for f in fields(section)}
                bad = set(value) - allowed
                if bad:
                    raise ConfigError(f"unknown keys in {name!r}: {sorted(bad)}")
                try:
                    kwargs[name] = section(**value)
                except (TypeError, ValueError) as exc:
                    if isinstance(exc, ConfigError):
                        raise
                    raise ConfigError(f"section {name!r}: {exc}") from None
            else:
                kwargs[name] = value
        try:
            return cls(**kwargs)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path):
        if path is None:
            return cls()
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
        return cls.from_dict(data)

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2) + "\n"
