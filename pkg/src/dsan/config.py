"""Experiment configuration: declarative key=value files with validated defaults.

The config file is flat `key = value` text grouped under section headers
([hyper], [experiment], [sharing], [network], [data]). Every key is optional;
unspecified keys fall back to the defaults below. Unknown sections or keys are
hard errors so typos never pass silently.
"""

from __future__ import annotations

import hashlib
import io
from configparser import ConfigParser, Error as ConfigParserError, MissingSectionHeaderError
from dataclasses import dataclass, field, fields

DATA_SOURCES = ("synthetic", "volume-directory")
ABLATION_MODES = ("none", "no_adapt", "unidirectional", "bidirectional", "bidir_plus_src_seg", "full")

_BOOL_VALUES = {
    "true": True, "1": True, "yes": True, "on": True,
    "false": False, "0": False, "no": False, "off": False,
}


class ConfigError(Exception):
    """Raised for unparseable files, unknown keys, or bad value types."""


@dataclass
class HyperParams:
    """Loss weights, learning rates, and schedule counts."""

    lambda_rec: float = 1.0
    lambda_adv: float = 0.01
    lambda_gen: float = 1.0
    lambda_seg: float = 1.0
    lambda_adv_sec: float = 0.1
    lr_seg: float = 2e-4
    lr_dec: float = 1e-3
    lr_disc_img: float = 1e-4
    lr_disc_sem: float = 5e-5
    batch_size: int = 8
    total_iterations: int = 2000


@dataclass
class SharingTopology:
    """Which parameter sets are shared across sub-networks.

    The default (shared encoder, private decoders, shared semantic
    discriminators) is the reference topology; the other combinations exist
    for the sharing ablations.
    """

    share_encoder: bool = True
    share_decoders: bool = False
    share_semantic_discriminators: bool = True


@dataclass
class NetworkDims:
    """Channel widths of the desk-scale networks.

    feature_channels is the encoder output width; stem_channels sets the
    width ladder of the residual stages (stem, 2x, 4x, feature_channels).
    """

    stem_channels: int = 8
    feature_channels: int = 128
    decoder_channels: int = 48
    disc_channels: int = 16


@dataclass
class ExperimentConfig:
    hyper: HyperParams = field(default_factory=HyperParams)
    sharing: SharingTopology = field(default_factory=SharingTopology)
    network: NetworkDims = field(default_factory=NetworkDims)
    num_classes: int = 4
    image_size: int = 64
    data_source: str = "synthetic"
    ablation_mode: str = "full"
    seed: int = 0
    checkpoint_every: int = 500
    eval_every: int = 500
    data_dir: str = ""
    num_phantoms: int = 10
    train_fraction: float = 0.8


# section -> ordered keys; [experiment] and [data] live directly on the config.
_SCHEMA: dict[str, tuple[str, ...]] = {
    "hyper": tuple(f.name for f in fields(HyperParams)),
    "experiment": ("num_classes", "image_size", "data_source", "ablation_mode",
                   "seed", "checkpoint_every", "eval_every"),
    "sharing": tuple(f.name for f in fields(SharingTopology)),
    "network": tuple(f.name for f in fields(NetworkDims)),
    "data": ("data_dir", "num_phantoms", "train_fraction"),
}


def _section_obj(cfg: ExperimentConfig, section: str):
    return {"hyper": cfg.hyper, "sharing": cfg.sharing, "network": cfg.network}.get(section, cfg)


def _field_type(obj, key: str) -> type:
    for f in fields(obj):
        if f.name == key:
            return {"int": int, "float": float, "bool": bool, "str": str}[f.type.replace("builtins.", "")]
    raise KeyError(key)


def _convert(section: str, key: str, raw: str):
    kind = _field_type(_section_obj(ExperimentConfig(), section), key)
    raw = raw.strip()
    try:
        if kind is bool:
            if raw.lower() not in _BOOL_VALUES:
                raise ValueError(f"not a boolean: {raw!r}")
            return _BOOL_VALUES[raw.lower()]
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {section}.{key}: {exc}") from exc


def _set_key(cfg: ExperimentConfig, section: str, key: str, raw: str) -> None:
    if section not in _SCHEMA:
        raise ConfigError(f"unknown section [{section}]")
    if key not in _SCHEMA[section]:
        raise ConfigError(f"unknown key {key!r} in section [{section}]")
    setattr(_section_obj(cfg, section), key, _convert(section, key, raw))


def _find_section(key: str) -> str:
    for section, keys in _SCHEMA.items():
        if key in keys:
            return section
    raise ConfigError(f"unknown key {key!r}")


def load_config_text(text: str) -> ExperimentConfig:
    """Parse config text into a fully populated ExperimentConfig."""
    parser = ConfigParser(delimiters=("=",), comment_prefixes=("#", ";"),
                          inline_comment_prefixes=("#",), strict=True, interpolation=None)
    try:
        parser.read_string(text)
    except MissingSectionHeaderError as exc:
        raise ConfigError(f"line {exc.lineno}: key outside any [section]: {exc.line.strip()!r}") from exc
    except ConfigParserError as exc:
        raise ConfigError(f"parse failure: {exc}") from exc

    cfg = ExperimentConfig()
    for section in parser.sections():
        for key, raw in parser.items(section):
            _set_key(cfg, section, key, raw)
    return cfg


def load_config(path: str) -> ExperimentConfig:
    """Load a config file, filling unspecified keys from defaults."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return load_config_text(text)


def apply_overrides(cfg: ExperimentConfig, overrides: list[str]) -> ExperimentConfig:
    """Apply `key=value` (or `section.key=value`) overrides in place."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        key, raw = item.split("=", 1)
        key = key.strip()
        if "." in key:
            section, key = key.split(".", 1)
            if section not in _SCHEMA:
                raise ConfigError(f"unknown section [{section}]")
        else:
            section = _find_section(key)
        _set_key(cfg, section, key, raw)
    return cfg


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


def serialize_config(cfg: ExperimentConfig) -> str:
    """Render the config as canonical text; reparsing yields an equal config."""
    out = io.StringIO()
    for section, keys in _SCHEMA.items():
        out.write(f"[{section}]\n")
        obj = _section_obj(cfg, section)
        for key in keys:
            out.write(f"{key} = {_format_value(getattr(obj, key))}\n")
        out.write("\n")
    return out.getvalue()


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(serialize_config(cfg).encode("utf-8")).hexdigest()


def validate_config(cfg: ExperimentConfig) -> list[str]:
    """Check every invariant; returns one message per violation (empty = valid)."""
    from .networks import STRIDE_PRODUCT

    bad = []
    hp = cfg.hyper
    for name in ("lambda_rec", "lambda_adv", "lambda_gen", "lambda_seg", "lambda_adv_sec",
                 "lr_seg", "lr_dec", "lr_disc_img", "lr_disc_sem"):
        if getattr(hp, name) <= 0:
            bad.append(f"{name} must be > 0")
    if hp.batch_size < 1:
        bad.append("batch_size must be >= 1")
    if hp.total_iterations < 0:
        bad.append("total_iterations must be >= 0")
    if cfg.num_classes < 2:
        bad.append("num_classes must be >= 2")
    if cfg.image_size % STRIDE_PRODUCT != 0:
        bad.append(f"image_size not divisible by {STRIDE_PRODUCT}")
    if cfg.image_size < 16:
        bad.append("image_size must be >= 16 (four stride-2 discriminator layers)")
    if cfg.data_source not in DATA_SOURCES:
        bad.append(f"data_source must be one of {DATA_SOURCES}")
    if cfg.ablation_mode not in ABLATION_MODES:
        bad.append(f"ablation_mode must be one of {ABLATION_MODES}")
    if cfg.data_source == "volume-directory" and not cfg.data_dir:
        bad.append("data_dir required when data_source=volume-directory")
    if cfg.data_source == "synthetic" and cfg.num_phantoms < 2:
        bad.append("num_phantoms must be >= 2")
    if not 0.0 < cfg.train_fraction < 1.0:
        bad.append("train_fraction must be in (0, 1)")
    if cfg.checkpoint_every < 1:
        bad.append("checkpoint_every must be >= 1")
    if cfg.eval_every < 1:
        bad.append("eval_every must be >= 1")
    for name in ("stem_channels", "feature_channels", "decoder_channels", "disc_channels"):
        if getattr(cfg.network, name) < 1:
            bad.append(f"{name} must be >= 1")
    return bad
