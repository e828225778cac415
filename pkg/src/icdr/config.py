"""Run configuration: pipeline settings plus batch-runner options.

Config files are flat ``key = value`` lines. Blank lines and lines starting
with ``#`` are ignored; unknown keys are an error so typos never silently
fall back to defaults.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path

from .disarm import PipelineConfig

ENV_VAR = "ICDR_CONFIG"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    jobs: int = 1
    seed: int = 0
    report_path: str | None = None
    timeout_ms: int = 10_000

    def __post_init__(self):
        if self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.timeout_ms < 1:
            raise ConfigError("timeout_ms must be positive")
        if self.pipeline.timeout != self.timeout_ms / 1000.0:
            object.__setattr__(self, "pipeline",
                               dataclasses.replace(self.pipeline, timeout=self.timeout_ms / 1000.0))


# The pipeline timeout is set through timeout_ms.
_PIPELINE_KEYS = {f.name for f in dataclasses.fields(PipelineConfig) if f.name != "timeout"}
_RUN_KEYS = {"jobs": int, "seed": int, "report_path": str, "timeout_ms": int}
_CASTS = {"resize_scale": float, "blur_sigma": float, "blur_radius": int, "jpeg_quality": int,
          "detox_gamma": float, "detox_w": float, "max_pixels": int, "subsampling": str}


def parse_steps(text: str) -> tuple[str, ...]:
    return tuple(s.strip() for s in text.split(",") if s.strip())


def parse_config(text: str) -> dict[str, object]:
    """Parse key = value lines into typed values, rejecting unknown keys."""
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        try:
            if key == "steps":
                values[key] = parse_steps(value)
            elif key in _CASTS:
                values[key] = _CASTS[key](value)
            elif key in _RUN_KEYS:
                values[key] = _RUN_KEYS[key](value)
            else:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"line {lineno}: bad value for {key}: {value!r}") from exc
    return values


def build_config(values: dict[str, object]) -> RunConfig:
    pipeline_args = {k: v for k, v in values.items() if k in _PIPELINE_KEYS}
    run_args = {k: v for k, v in values.items() if k in _RUN_KEYS}
    try:
        timeout_ms = int(run_args.get("timeout_ms", 10_000))
        pipeline = PipelineConfig(timeout=timeout_ms / 1000.0, **pipeline_args)
        return RunConfig(pipeline=pipeline, **run_args)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | os.PathLike | None = None) -> RunConfig:
    """Load ``path``, else the file named by ICDR_CONFIG, else defaults."""
    if path is None:
        path = os.environ.get(ENV_VAR) or None
    if path is None:
        return RunConfig()
    return build_config(parse_config(Path(path).read_text(encoding="utf-8")))
