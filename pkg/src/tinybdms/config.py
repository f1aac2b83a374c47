"""Instance settings with ``TINYBDMS_*`` environment overrides."""

from __future__ import annotations

import os
from dataclasses import dataclass, fields

ENV_PREFIX = "TINYBDMS_"


@dataclass
class Config:
    data_dir: str = "./tinybdms-data"
    partitions: int = 4
    memory_budget: int = 1 << 20  # bytes per in-memory component before a flush
    merge_k: int = 4  # disk components per index that trigger a merge
    sort_budget: int = 4 << 20
    join_budget: int = 4 << 20
    frame_size: int = 256
    queue_depth: int = 16
    fsync: bool = True
    listen: str = "127.0.0.1:19002"
    log_level: str = "WARNING"
    handle_ttl: float = 600.0

    @classmethod
    def from_env(cls, env=None, **overrides) -> "Config":
        """Defaults, then environment variables, then explicit ``overrides``
        (``None`` values are ignored so CLI options can pass through)."""
        env = os.environ if env is None else env
        values = {}
        for f in fields(cls):
            raw = env.get(ENV_PREFIX + f.name.upper())
            if raw is not None:
                values[f.name] = _convert(f.name, raw, type(getattr(cls, f.name)))
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


def _convert(name: str, raw: str, kind: type):
    if kind is bool:
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{ENV_PREFIX}{name.upper()}: expected a boolean, got {raw!r}")
    try:
        return kind(raw)
    except ValueError:
        raise ValueError(f"{ENV_PREFIX}{name.upper()}: expected {kind.__name__}, got {raw!r}") from None
