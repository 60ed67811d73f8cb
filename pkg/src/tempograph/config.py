"""Run configuration: a TOML file (flat keys or tables) with command-line overrides."""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass

import tomli

from .model import VARIANTS, TgaeConfig, TrainConfig

__all__ = ["ConfigError", "RunConfig", "load_config", "dump_config"]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    dataset: str = ""
    binning: int | None = None
    # model
    k: int = 2
    th: int = 10
    t_N: int = 1
    d_in: int = 64
    d_enc: int = 32
    d_lat: int = 16
    d_att: int | None = None
    h_tga: int = 2
    mlp_hidden: int = 32
    activation: str = "elu"
    one_hot: bool = False
    variant: str = "full"
    # training
    epochs: int = 50
    n_s: int = 64
    lr: float = 1e-3
    kl_weight: float = 1.0
    # generation
    passes: int = 1
    num_graphs: int = 1
    widen: bool = False
    # evaluation
    delta: int | None = None
    sigma: float = 1.0
    seed: int = 0
    out_dir: str = "run"
    threads: int = 1

    def validate(self, check_paths: bool = True) -> "RunConfig":
        if check_paths:
            if not self.dataset:
                raise ConfigError("config needs a dataset path")
            if not os.path.isfile(self.dataset):
                raise ConfigError(f"dataset not found: {self.dataset}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; choose from {sorted(VARIANTS)}")
        positive = ("k", "th", "d_in", "d_enc", "d_lat", "h_tga", "mlp_hidden", "epochs", "n_s", "passes", "num_graphs", "threads")
        for name in positive:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.t_N < 0:
            raise ConfigError("t_N must be >= 0")
        if self.binning is not None and self.binning < 1:
            raise ConfigError("binning must be >= 1")
        if self.delta is not None and self.delta < 0:
            raise ConfigError("delta must be >= 0")
        if not self.lr > 0 or not self.sigma > 0 or self.kl_weight < 0:
            raise ConfigError("lr and sigma must be positive and kl_weight nonnegative")
        if self.d_att is not None and self.d_att != self.d_lat:
            raise ConfigError(f"d_att must equal d_lat ({self.d_lat}) so encodings and latents can be added")
        return self

    def model_config(self, n: int, T: int) -> TgaeConfig:
        try:
            return TgaeConfig.for_variant(
                self.variant,
                n=n,
                T=T,
                k=self.k,
                th=self.th,
                t_N=self.t_N,
                d_in=self.d_in,
                d_enc=self.d_enc,
                d_lat=self.d_lat,
                h_tga=self.h_tga,
                mlp_hidden=self.mlp_hidden,
                activation=self.activation,
                one_hot=self.one_hot,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs, n_s=self.n_s, lr=self.lr, kl_weight=self.kl_weight, seed=self.seed, threads=self.threads
        )


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _flatten(doc: dict) -> dict:
    flat: dict = {}
    for key, value in doc.items():
        items = value.items() if isinstance(value, dict) else [(key, value)]
        for k, v in items:
            if isinstance(v, dict):
                raise ConfigError(f"nested table {k!r} is not supported")
            if k in flat:
                raise ConfigError(f"key {k!r} is set twice")
            flat[k] = v
    return flat


def _coerce(name: str, value):
    ftype = str(_FIELDS[name].type)
    if value is None:
        if "None" in ftype:
            return None
        raise ConfigError(f"{name} cannot be empty")
    if "bool" in ftype:
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "false", "1", "0", "yes", "no"):
            return value.lower() in ("true", "1", "yes")
        raise ConfigError(f"{name} must be a boolean, got {value!r}")
    if "int" in ftype:
        if isinstance(value, bool):
            raise ConfigError(f"{name} must be an integer, got {value!r}")
        try:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{name} must be an integer, got {value!r}") from None
    if "float" in ftype:
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{name} must be a number, got {value!r}") from None
    return str(value)


def load_config(path: str | None = None, overrides: dict | None = None, check_paths: bool = True) -> RunConfig:
    """Read ``path`` (may be None), apply ``overrides`` (flags win), validate.

    Relative dataset and output paths in the file resolve against the file's
    directory.
    """
    values: dict = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                doc = tomli.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from None
        values = _flatten(doc)
        base = os.path.dirname(os.path.abspath(path))
        for key in ("dataset", "out_dir"):
            if key in values and isinstance(values[key], str) and not os.path.isabs(values[key]):
                values[key] = os.path.join(base, values[key])
    for k, v in (overrides or {}).items():
        if v is not None:
            values[k] = v
    unknown = sorted(set(values) - set(_FIELDS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    cfg = RunConfig(**{k: _coerce(k, v) for k, v in values.items()})
    return cfg.validate(check_paths)


def dump_config(cfg: RunConfig) -> str:
    """Flat TOML text that :func:`load_config` reads back to ``cfg``."""
    lines = []
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if v is None:
            continue
        if isinstance(v, bool):
            text = "true" if v else "false"
        elif isinstance(v, (int, float)):
            text = repr(v)
        else:
            text = json.dumps(v)
        lines.append(f"{f.name} = {text}\n")
    return "".join(lines)
