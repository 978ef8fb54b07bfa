"""Pipeline configuration: INI file values under command-line overrides.

A config file has an optional ``[DEFAULT]`` section and one section per
subcommand; keys are the long flag names (``k1``, ``depth``,
``api-key-env``...). Flags given on the command line always win.
"""

from __future__ import annotations

import argparse
import configparser
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from listrank.model import ListrankError


class ConfigError(ListrankError):
    """Invalid or inconsistent configuration (bad path, out-of-range parameter)."""


def apply_config_file(path: str | Path, section: str, parser: argparse.ArgumentParser) -> None:
    """Install values from ``path`` as defaults of ``parser`` (so flags override them)."""
    cp = configparser.ConfigParser()
    if not cp.read(path, encoding="utf-8"):
        raise ConfigError(f"config file not found: {path}")
    values = dict(cp.defaults())
    if cp.has_section(section):
        values.update(cp.items(section))
    actions = {a.dest: a for a in parser._actions}
    defaults = {}
    for key, raw in values.items():
        dest = key.replace("-", "_")
        action = actions.get(dest)
        if action is None:
            continue  # keys for other subcommands
        if isinstance(action, argparse._StoreTrueAction):
            if raw.lower() not in cp.BOOLEAN_STATES:
                raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
            defaults[dest] = cp.BOOLEAN_STATES[raw.lower()]
        elif action.nargs in ("+", "*"):
            defaults[dest] = raw.replace(",", " ").split()
        else:
            # argparse applies the action's type to string defaults
            defaults[dest] = raw
    parser.set_defaults(**defaults)


@dataclass
class PipelineConfig:
    command: str
    # paths
    corpus: str | None = None
    queries: str | None = None
    qrels: str | None = None
    run: str | None = None
    runs: list[str] = field(default_factory=list)
    index: str | None = None
    baseline_run: str | None = None
    collections: str | None = None
    traces: str | None = None
    template: str | None = None
    script: str | None = None
    out: str | None = None
    exchanges: str | None = None
    # retrieval
    k: int | None = None
    k1: float = 0.9
    b: float = 0.4
    # rerank
    depth: int = 20
    window: int = 20
    stride: int = 10
    backend: str = "identity"
    base_url: str | None = None
    model: str | None = None
    api_key_env: str = "OPENAI_API_KEY"
    temperature: float = 0.0
    max_tokens: int = 8192
    truncate: int = 450
    system_prompt: bool = False
    extra_top_pass: bool = False
    concurrency: int = 1
    fuse_initial: bool = False
    # fusion / sampling / analysis
    k_rrf: float = 60.0
    seed: int = 0
    subset_mode: str = "prefix"
    n: int | None = None
    min_indices: int = 2
    tag: str | None = None

    @classmethod
    def from_namespace(cls, ns: argparse.Namespace) -> PipelineConfig:
        names = {f.name for f in fields(cls)}
        values = {k: v for k, v in vars(ns).items() if k in names and v is not None}
        return cls(**values)

    def snapshot(self) -> dict:
        return asdict(self)

    def require(self, *names: str) -> None:
        for name in names:
            if not getattr(self, name):
                raise ConfigError(f"{self.command}: --{name.replace('_', '-')} is required")

    def require_existing(self, *names: str) -> None:
        for name in names:
            value = getattr(self, name)
            paths = value if isinstance(value, list) else [value]
            if not value:
                raise ConfigError(f"{self.command}: --{name.replace('_', '-')} is required")
            for p in paths:
                if not Path(p).exists():
                    raise ConfigError(f"{self.command}: {name} path does not exist: {p}")

    def validate(self) -> None:
        def positive(name: str) -> None:
            value = getattr(self, name)
            if value is not None and value < 1:
                raise ConfigError(f"--{name.replace('_', '-')} must be >= 1, got {value}")

        for name in ("k", "depth", "window", "stride", "max_tokens", "truncate",
                     "concurrency", "n", "min_indices"):
            positive(name)
        if self.k1 <= 0:
            raise ConfigError(f"--k1 must be > 0, got {self.k1}")
        if not 0 <= self.b <= 1:
            raise ConfigError(f"--b must be in [0, 1], got {self.b}")
        if self.temperature < 0:
            raise ConfigError("--temperature must be >= 0")
        if self.k_rrf <= 0:
            raise ConfigError("--k-rrf must be > 0")
        if self.stride > self.window:
            raise ConfigError(f"--stride ({self.stride}) must not exceed --window ({self.window})")
        if self.subset_mode not in ("prefix", "random"):
            raise ConfigError(f"unknown --subset-mode {self.subset_mode!r}")
