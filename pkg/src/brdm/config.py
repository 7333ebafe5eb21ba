"""Experiment configuration: flat key = value files with typed parsing.

Format: one ``key = value`` per line, ``#`` starts a comment, list values
are comma separated, omitted keys take the defaults below, unknown keys are
errors. ``serialize_config`` writes a file that parses back to an equal
config (floats via repr, so they round-trip exactly).
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .agents import BudgetSplit, SystemConfig
from .core import GaussianTaskSpec
from .mcmc import ChainConfig, SelectionConfig
from .vae import VaeArch

AGENT_KINDS = ("single", "multi")


def _default_betas() -> tuple[float, ...]:
    return tuple(float(b) for b in np.logspace(-1.0, 4.0, 20))


class ConfigError(Exception):
    """Bad configuration file or flag combination (usage error, exit code 1)."""


@dataclass
class ExperimentConfig:
    """All experiment knobs; field names double as the config-file keys."""

    # task
    num_worlds: int = 6
    width: float = 0.1
    means: tuple[float, ...] = ()
    # system
    num_priors: int = 3
    agent_kinds: tuple[str, ...] = AGENT_KINDS
    total_steps: tuple[int, ...] = (100,)
    selection_steps: tuple[int, ...] = ()
    selection_fraction: float = 0.25
    episodes: int = 5000
    replicates: int = 1
    # exact solver / frontier
    grid_size: int = 100
    betas: tuple[float, ...] = field(default_factory=_default_betas)
    tol: float = 1e-10
    max_iter: int = 10_000
    # chains
    gamma0: float = 1.0
    alpha: float = 5.0
    proposal_sigma: float = 0.1
    gamma_sel0: float = 1.0
    alpha_sel: float = 5.0
    utility_samples: int = 3
    # vae
    hidden_dim: int = 16
    latent_dim: int = 2
    decoder_variance: float = 0.01
    hidden_activation: str = "relu"
    step_size: float = 0.01
    buffer_size: int = 256
    batch_size: int = 32
    # measurement and io
    summary_window: float = 0.1
    mi_bins: int = 100
    seed: int = 0
    out: str = "results"
    workers: int = 0


_INT_KEYS = {
    "num_worlds",
    "num_priors",
    "episodes",
    "replicates",
    "grid_size",
    "max_iter",
    "utility_samples",
    "hidden_dim",
    "latent_dim",
    "buffer_size",
    "batch_size",
    "mi_bins",
    "seed",
    "workers",
}
_FLOAT_KEYS = {
    "width",
    "selection_fraction",
    "tol",
    "gamma0",
    "alpha",
    "proposal_sigma",
    "gamma_sel0",
    "alpha_sel",
    "decoder_variance",
    "step_size",
    "summary_window",
}
_INT_LIST_KEYS = {"total_steps", "selection_steps"}
_FLOAT_LIST_KEYS = {"means", "betas"}
_STR_LIST_KEYS = {"agent_kinds"}
_STR_KEYS = {"hidden_activation", "out"}


def _parse_value(key: str, raw: str, line_no: int):
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _INT_LIST_KEYS:
            return tuple(int(v.strip()) for v in raw.split(",") if v.strip())
        if key in _FLOAT_LIST_KEYS:
            return tuple(float(v.strip()) for v in raw.split(",") if v.strip())
        if key in _STR_LIST_KEYS:
            return tuple(v.strip() for v in raw.split(",") if v.strip())
        if key in _STR_KEYS:
            return raw.strip()
    except ValueError as exc:
        raise ConfigError(f"line {line_no}: bad value for {key}: {exc}") from None
    raise ConfigError(f"line {line_no}: unknown key '{key}'")


def validate_config(cfg: ExperimentConfig) -> None:
    """Cross-field constraint checks; raises ConfigError naming the keys."""
    if cfg.num_worlds < 1:
        raise ConfigError("num_worlds must be >= 1")
    if not cfg.width > 0.0:
        raise ConfigError("width must be positive")
    if cfg.means and len(cfg.means) != cfg.num_worlds:
        raise ConfigError("means must have num_worlds entries")
    if cfg.num_priors < 1:
        raise ConfigError("num_priors must be >= 1")
    if not cfg.agent_kinds:
        raise ConfigError("agent_kinds must not be empty")
    for kind in cfg.agent_kinds:
        if kind not in AGENT_KINDS:
            raise ConfigError(f"agent_kinds entries must be one of {AGENT_KINDS}, got '{kind}'")
    if not cfg.total_steps or min(cfg.total_steps) < 1:
        raise ConfigError("total_steps must list positive budgets")
    if cfg.selection_steps:
        if min(cfg.selection_steps) < 0:
            raise ConfigError("selection_steps entries must be >= 0")
        if min(cfg.selection_steps) > max(cfg.total_steps):
            raise ConfigError(
                f"selection_steps = {min(cfg.selection_steps)} exceeds every "
                f"total_steps budget (max {max(cfg.total_steps)})"
            )
    if not 0.0 <= cfg.selection_fraction < 1.0:
        raise ConfigError("selection_fraction must lie in [0, 1)")
    if cfg.episodes < 1 or cfg.replicates < 1:
        raise ConfigError("episodes and replicates must be >= 1")
    if cfg.grid_size < 2:
        raise ConfigError("grid_size must be >= 2")
    if not cfg.betas:
        raise ConfigError("betas must not be empty")
    if min(cfg.betas) < 0.0:
        raise ConfigError("betas must be >= 0")
    if cfg.hidden_activation not in ("relu", "sigmoid"):
        raise ConfigError("hidden_activation must be 'relu' or 'sigmoid'")
    if not 0.0 < cfg.summary_window <= 1.0:
        raise ConfigError("summary_window must lie in (0, 1]")
    if cfg.mi_bins < 1:
        raise ConfigError("mi_bins must be >= 1")
    if cfg.workers < 0:
        raise ConfigError("workers must be >= 0")


def load_config(path: str | Path | None) -> ExperimentConfig:
    """Parse a config file (or return pure defaults for ``None``)."""
    cfg = ExperimentConfig()
    if path is None:
        validate_config(cfg)
        return cfg
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    known = {f.name for f in fields(ExperimentConfig)}
    for line_no, line in enumerate(path.read_text().splitlines(), start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"line {line_no}: expected 'key = value', got: {line.strip()}")
        key, raw = (part.strip() for part in text.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {line_no}: unknown key '{key}'")
        if raw == "" and key not in (_INT_LIST_KEYS | _FLOAT_LIST_KEYS | _STR_LIST_KEYS):
            raise ConfigError(f"line {line_no}: empty value for {key}")
        setattr(cfg, key, _parse_value(key, raw, line_no))
    cfg.betas = tuple(sorted(cfg.betas))
    validate_config(cfg)
    return cfg


def _format_value(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical text form; parses back to an equal config."""
    lines = [f"{f.name} = {_format_value(getattr(cfg, f.name))}" for f in fields(cfg)]
    return "\n".join(lines) + "\n"


def task_spec(cfg: ExperimentConfig) -> GaussianTaskSpec:
    return GaussianTaskSpec(num_worlds=cfg.num_worlds, width=cfg.width, means=cfg.means)


def system_config(cfg: ExperimentConfig, kind: str, budget: BudgetSplit) -> SystemConfig:
    """Build the per-agent config; single-prior agents always get one prior."""
    return SystemConfig(
        num_priors=1 if kind == "single" else cfg.num_priors,
        budget=budget,
        chain=ChainConfig(
            gamma0=cfg.gamma0,
            alpha=cfg.alpha,
            n_max=max(budget.action_steps, 1),
            proposal_sigma=cfg.proposal_sigma,
        ),
        selection=SelectionConfig(
            gamma_sel0=cfg.gamma_sel0,
            alpha_sel=cfg.alpha_sel,
            n_max_sel=budget.selection_steps,
            utility_samples=cfg.utility_samples,
        ),
        vae=VaeArch(
            input_dim=1,
            hidden_dim=cfg.hidden_dim,
            latent_dim=cfg.latent_dim,
            decoder_variance=cfg.decoder_variance,
            hidden_activation=cfg.hidden_activation,
        ),
        step_size=cfg.step_size,
        buffer_size=cfg.buffer_size,
        batch_size=cfg.batch_size,
        seed=cfg.seed,
    )
