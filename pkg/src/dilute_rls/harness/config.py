"""Flat dotted key-value experiment configs.

One file fully determines an experiment:

    scenario = arx_geometric
    mode = fixed_t
    n = 4
    beta = 100.0
    horizons = 100, 1000
    seeds = 0, 1, 2
    out = runs/demo
    graph.kind = gossip_ring
    schedule.kind = polylog
    schedule.alpha = 2.0
    noise.kind = gaussian
    noise.sigma = 0.1

Values stay strings until a typed accessor asks for them; the config hash is
a sha256 over the sorted key=value pairs, excluding output-only keys, so the
same experiment written to a different directory keeps its identity.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from ..errors import ConfigError

MODES = ("fixed_t", "synchronized", "sweep")
HASH_EXCLUDED = ("out", "threads")


def parse_config_text(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; '#' starts a comment, blanks are skipped."""
    out: dict[str, str] = {}
    bad: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            bad.append(f"line {lineno}")
            continue
        key, value = line.split("=", 1)
        key = key.strip()
        if not key or key in out:
            bad.append(f"line {lineno} ({key or 'empty key'})")
            continue
        out[key] = value.strip()
    if bad:
        raise ConfigError("unparseable or duplicate config lines", keys=bad)
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    raw: dict[str, str] = field(default_factory=dict)
    path: str | None = None

    # -- typed accessors ----------------------------------------------------

    def has(self, key: str) -> bool:
        return key in self.raw

    def get_str(self, key: str, default: str | None = None) -> str:
        if key not in self.raw:
            if default is not None:
                return default
            raise ConfigError(f"missing key {key!r}", keys=[key])
        return self.raw[key]

    def _convert(self, key: str, conv, default):
        if key not in self.raw:
            if default is not None:
                return default
            raise ConfigError(f"missing key {key!r}", keys=[key])
        try:
            return conv(self.raw[key])
        except ValueError:
            raise ConfigError(
                f"key {key!r} has malformed value {self.raw[key]!r}", keys=[key]
            ) from None

    def get_int(self, key: str, default: int | None = None) -> int:
        return self._convert(key, int, default)

    def get_float(self, key: str, default: float | None = None) -> float:
        return self._convert(key, float, default)

    def get_int_list(self, key: str, default=None) -> list[int]:
        conv = lambda s: [int(x) for x in s.split(",") if x.strip()]
        return self._convert(key, conv, default)

    def get_float_list(self, key: str, default=None) -> list[float]:
        conv = lambda s: [float(x) for x in s.split(",") if x.strip()]
        return self._convert(key, conv, default)

    def section(self, prefix: str) -> dict[str, str]:
        """All keys under ``prefix.`` with the prefix stripped."""
        dot = prefix + "."
        return {k[len(dot):]: v for k, v in self.raw.items() if k.startswith(dot)}

    # -- identity -----------------------------------------------------------

    def hash(self) -> str:
        digest = hashlib.sha256()
        for key in sorted(self.raw):
            if key in HASH_EXCLUDED:
                continue
            digest.update(f"{key}={self.raw[key]}\n".encode())
        return digest.hexdigest()[:12]

    def with_overrides(self, **pairs: str) -> "ExperimentConfig":
        merged = dict(self.raw)
        for key, value in pairs.items():
            if value is not None:
                merged[key] = str(value)
        return ExperimentConfig(raw=merged, path=self.path)


def load_config(path: str) -> ExperimentConfig:
    with open(path, "r") as fh:
        return ExperimentConfig(raw=parse_config_text(fh.read()), path=path)


def validate(cfg: ExperimentConfig) -> None:
    """Structural validation; raises ConfigError listing every offending key."""
    from ..graph import GENERATORS
    from ..model import NOISES, SCHEDULES
    from .scenarios import SCENARIOS

    problems: list[str] = []

    def need(key):
        if not cfg.has(key):
            problems.append(key)
            return False
        return True

    if need("scenario") and cfg.get_str("scenario") not in SCENARIOS:
        problems.append("scenario")
    if need("mode") and cfg.get_str("mode") not in MODES:
        problems.append("mode")
    if need("n"):
        try:
            if cfg.get_int("n") < 1:
                problems.append("n")
        except ConfigError:
            problems.append("n")
    if need("beta"):
        try:
            if cfg.get_float("beta") <= 0:
                problems.append("beta")
        except ConfigError:
            problems.append("beta")
    if need("horizons"):
        try:
            hs = cfg.get_int_list("horizons")
            if not hs or any(b <= a for a, b in zip(hs, hs[1:])) or hs[0] < 1:
                problems.append("horizons")
        except ConfigError:
            problems.append("horizons")
    if need("seeds"):
        try:
            if not cfg.get_int_list("seeds"):
                problems.append("seeds")
        except ConfigError:
            problems.append("seeds")
    need("out")

    if need("graph.kind") and cfg.get_str("graph.kind") not in GENERATORS:
        problems.append("graph.kind")
    if need("schedule.kind"):
        kind = cfg.get_str("schedule.kind")
        if kind not in SCHEDULES:
            problems.append("schedule.kind")
        elif kind == "constant":
            if not cfg.has("schedule.p"):
                problems.append("schedule.p")
        elif not cfg.has("schedule.alpha"):
            problems.append("schedule.alpha")
    if need("noise.kind"):
        kind = cfg.get_str("noise.kind")
        if kind not in NOISES:
            problems.append("noise.kind")
        elif kind == "gaussian" and not cfg.has("noise.sigma"):
            problems.append("noise.sigma")
        elif kind == "uniform_bounded" and not cfg.has("noise.bound"):
            problems.append("noise.bound")

    if problems:
        raise ConfigError("invalid config", keys=sorted(set(problems)))
