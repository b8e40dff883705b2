"""Run configuration: flat key = value files with per-module sections.

The file format is INI-flavoured ("TOML without quotes"): ``[section]``
headers named after the modules they configure, one ``key = value`` pair
per line, ``#`` comments.  Unknown sections or keys are hard errors, as
are out-of-range values; both name the offending dotted key.  Command-line
flags override file values, which override the documented defaults.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any

from .degrade import DegradeParams
from .intra import IntraConfig
from .inter import FlowConfig, InterConfig
from .pipeline import PipelineConfig
from .solver import StageConfig

__all__ = ["ConfigError", "RunConfig", "parse_config", "apply_overrides", "render_config"]


class ConfigError(Exception):
    """Bad configuration: parse failure, unknown key or out-of-range value."""


def _bool(text: str) -> bool:
    norm = text.strip().lower()
    if norm in ("1", "true", "yes", "on"):
        return True
    if norm in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass
class RunConfig:
    """Flattened knobs of every subcommand, with the documented defaults."""

    seed: int = 0
    threads: int = 1
    mu: float = 1.0
    rho: float = 0.5
    lambda_s: float = 1.0
    lambda_t: float = 1.0
    inner_iters: int = 3
    stages: int = 2
    strength: float = 1.0
    candidates: int = 8
    range_lo: float = 1.0
    range_hi: float = 1.1
    denoise_h: float = 0.04
    omega: float = 0.01
    tau: float = 0.01
    refine_steps: int = 10
    lambda_hs: float = 0.02
    flow_iters: int = 50
    pyr_min: int = 16
    warps: int = 2
    gain: float = 0.5
    shot: float = 0.0
    read: float = 0.0
    quantize: bool = False

    def pipeline(self) -> PipelineConfig:
        return PipelineConfig(
            solver=StageConfig(
                mu=self.mu,
                rho_step=self.rho,
                lambda_s=self.lambda_s,
                lambda_t=self.lambda_t,
                inner_iters=self.inner_iters,
                num_stages=self.stages,
            ),
            intra=IntraConfig(
                strength=self.strength,
                n_candidates=self.candidates,
                range_lo=self.range_lo,
                range_hi=self.range_hi,
                denoise_h=self.denoise_h,
                relax_rho=self.rho,
            ),
            inter=InterConfig(
                omega=self.omega,
                tau=self.tau,
                refine_steps=self.refine_steps,
                flow=FlowConfig(
                    lambda_hs=self.lambda_hs,
                    iters=self.flow_iters,
                    pyr_min=self.pyr_min,
                    warps=self.warps,
                ),
            ),
            seed=self.seed,
            threads=self.threads,
        )

    def degrade_params(self) -> DegradeParams:
        return DegradeParams(
            gain=self.gain,
            shot=self.shot,
            read=self.read,
            quantize=self.quantize,
            seed=self.seed,
        )


# section.key -> (attribute, converter, range predicate, range description)
_SCHEMA: dict[str, tuple[str, Any, Any, str]] = {
    "run.seed": ("seed", int, lambda v: v >= 0, ">= 0"),
    "run.threads": ("threads", int, lambda v: v >= 1, ">= 1"),
    "solver.mu": ("mu", float, lambda v: v > 0.0, "> 0"),
    "solver.rho": ("rho", float, lambda v: 0.0 < v <= 1.0, "in (0, 1]"),
    "solver.lambda_s": ("lambda_s", float, lambda v: v >= 0.0, ">= 0"),
    "solver.lambda_t": ("lambda_t", float, lambda v: v >= 0.0, ">= 0"),
    "solver.inner_iters": ("inner_iters", int, lambda v: v >= 1, ">= 1"),
    "solver.stages": ("stages", int, lambda v: v >= 1, ">= 1"),
    "intra.strength": ("strength", float, lambda v: 0.0 <= v <= 1.0, "in [0, 1]"),
    "intra.candidates": ("candidates", int, lambda v: v >= 1, ">= 1"),
    "intra.range_lo": ("range_lo", float, lambda v: v >= 1.0, ">= 1"),
    "intra.range_hi": ("range_hi", float, lambda v: v >= 1.0, ">= 1"),
    "intra.denoise_h": ("denoise_h", float, lambda v: v >= 0.0, ">= 0"),
    "inter.omega": ("omega", float, lambda v: v > 0.0, "> 0"),
    "inter.tau": ("tau", float, lambda v: v >= 0.0, ">= 0"),
    "inter.refine_steps": ("refine_steps", int, lambda v: v >= 0, ">= 0"),
    "flow.lambda_hs": ("lambda_hs", float, lambda v: v > 0.0, "> 0"),
    "flow.iters": ("flow_iters", int, lambda v: v >= 1, ">= 1"),
    "flow.pyr_min": ("pyr_min", int, lambda v: v >= 4, ">= 4"),
    "flow.warps": ("warps", int, lambda v: v >= 1, ">= 1"),
    "degrade.gain": ("gain", float, lambda v: 0.0 < v <= 1.0, "in (0, 1]"),
    "degrade.shot": ("shot", float, lambda v: v >= 0.0, ">= 0"),
    "degrade.read": ("read", float, lambda v: v >= 0.0, ">= 0"),
    "degrade.quantize": ("quantize", _bool, lambda v: True, "boolean"),
}

#: flag name -> dotted schema key, for command-line overrides
FLAG_KEYS = {name.split(".", 1)[1]: name for name in _SCHEMA}


def _set(cfg: RunConfig, dotted: str, raw: Any) -> None:
    attr, convert, check, describe = _SCHEMA[dotted]
    try:
        value = raw if not isinstance(raw, str) else convert(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {dotted}: {exc}") from exc
    if not check(value):
        raise ConfigError(f"{dotted} out of range: {value!r} (expected {describe})")
    setattr(cfg, attr, value)


def parse_config(path: str | Path) -> RunConfig:
    """Parse a config file; empty files yield all defaults."""
    parser = configparser.ConfigParser(
        inline_comment_prefixes=("#",), interpolation=None, strict=True
    )
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from exc
    cfg = RunConfig()
    for section in parser.sections():
        for key, raw in parser.items(section):
            dotted = f"{section}.{key}"
            if dotted not in _SCHEMA:
                raise ConfigError(f"unknown config key {dotted}")
            _set(cfg, dotted, raw)
    if cfg.range_hi < cfg.range_lo:
        raise ConfigError("intra.range_hi out of range: must be >= intra.range_lo")
    return cfg


def apply_overrides(cfg: RunConfig, overrides: dict[str, Any]) -> RunConfig:
    """Apply flag-style overrides (plain key names, already typed or raw str)."""
    for key, value in overrides.items():
        if value is None:
            continue
        dotted = FLAG_KEYS.get(key)
        if dotted is None:
            raise ConfigError(f"unknown config key {key}")
        _set(cfg, dotted, value if isinstance(value, str) else value)
    if cfg.range_hi < cfg.range_lo:
        raise ConfigError("intra.range_hi out of range: must be >= intra.range_lo")
    return cfg


def render_config(cfg: RunConfig) -> str:
    """Render a RunConfig back into the file format (used by manifests)."""
    by_section: dict[str, list[str]] = {}
    attr_to_dotted = {attr: dotted for dotted, (attr, *_rest) in _SCHEMA.items()}
    for f in fields(cfg):
        dotted = attr_to_dotted[f.name]
        section, key = dotted.split(".", 1)
        value = getattr(cfg, f.name)
        rendered = str(value).lower() if isinstance(value, bool) else repr(value) if isinstance(value, float) else str(value)
        by_section.setdefault(section, []).append(f"{key} = {rendered}")
    lines = []
    for section in ("run", "solver", "intra", "inter", "flow", "degrade"):
        lines.append(f"[{section}]")
        lines.extend(by_section.get(section, []))
        lines.append("")
    return "\n".join(lines)
