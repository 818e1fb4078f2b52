"""Run configuration: flat key=value files with section headers.

Every key has a default, so an empty file is a valid config; unknown sections
or keys are rejected (typos should not silently fall back to defaults). All
randomness in a run flows from the seeds named here. The resolved
configuration (defaults filled in) is hashed so output files can be traced
back to the exact settings that produced them.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass

from .appearance import TA_TARGETS, AttentionParams
from .core import HPP_MODES
from .encoders import SKELETON_INPUT_DIM, SMPL_DIM, EncoderParams
from .exceptions import ConfigError
from .gallery import AppearanceModel
from .prng import derive_seed
from .shape import ShapeModel
from .synth import DatasetSpec


def _positive(v):
    if v < 1:
        raise ValueError("must be >= 1")


def _nonneg(v):
    if v < 0:
        raise ValueError("must be >= 0")


def _unit(v):
    if not 0.0 <= v <= 1.0:
        raise ValueError("must be in [0, 1]")


def _open_unit(v):
    if not 0.0 < v < 1.0:
        raise ValueError("must be in (0, 1)")


def _choice(options):
    def check(v):
        if v not in options:
            raise ValueError(f"must be one of {', '.join(options)}")

    return check


# section -> key -> (python type, default, validator or None)
_SCHEMA = {
    "dataset": {
        "num_ids": (int, 8, _positive),
        "tracklets_per_id": (int, 2, _positive),
        "frames_per_tracklet": (int, 12, _positive),
        "clothing_variants": (int, 1, _positive),
        "sil_flip_rate": (float, 0.0, _unit),
        "keypoint_jitter": (float, 0.0, _nonneg),
        "appearance_shift": (float, 0.0, _nonneg),
        "seed": (int, 1, None),
        "height": (int, 16, _positive),
        "width": (int, 16, _positive),
    },
    "model": {
        "bins": (int, 4, _positive),
        "channels": (int, 16, _positive),
        "motion_channels": (int, 12, _positive),
        "gamma": (float, 0.0, _unit),
        "alpha": (float, 0.1, _unit),
        "pyramid_levels": (int, 3, _positive),
        "group_size": (int, 8, _positive),
        "hpp_mode": (str, "max+mean", _choice(HPP_MODES)),
        "ta_target": (str, "later", _choice(TA_TARGETS)),
        "encoder_seed": (int, 5, None),
        "attention_seed": (int, 11, None),
        "projection_seed": (int, 7, None),
        "normalize_parts": (bool, True, None),
        "rescale_appearance": (bool, True, None),
    },
    "protocol": {
        "gallery_ratio": (float, 0.5, _open_unit),
        "split_seed": (int, 2, None),
    },
    "ablation": {
        "drop_silhouette": (bool, False, None),
        "drop_smpl": (bool, False, None),
        "drop_skeleton": (bool, False, None),
        "use_attn": (bool, True, None),
        "use_avg": (bool, True, None),
        "centroid": (bool, True, None),
    },
    "paths": {
        "data_dir": (str, "out", None),
    },
    "train": {
        "objective": (str, "shape", _choice(("shape", "appearance"))),
        "num_ids": (int, 8, _positive),
        "samples_per_id": (int, 4, _positive),
        "input_dim": (int, 16, _positive),
        "noise": (float, 0.1, _nonneg),
        "steps": (int, 200, _positive),
        "lr": (float, 0.05, _nonneg),
        "seed": (int, 3, None),
        "data_seed": (int, 9, None),
        "hidden_dim": (int, 24, _positive),
        "embed_dim": (int, 16, _positive),
    },
}

_BOOL_WORDS = {"true": True, "yes": True, "on": True, "1": True,
               "false": False, "no": False, "off": False, "0": False}


@dataclass(frozen=True)
class ModelConfig:
    bins: int
    channels: int
    motion_channels: int
    gamma: float
    alpha: float
    pyramid_levels: int
    group_size: int
    hpp_mode: str
    ta_target: str
    encoder_seed: int
    attention_seed: int
    projection_seed: int
    normalize_parts: bool
    rescale_appearance: bool


@dataclass(frozen=True)
class ProtocolConfig:
    gallery_ratio: float
    split_seed: int


@dataclass(frozen=True)
class AblationConfig:
    drop_silhouette: bool
    drop_smpl: bool
    drop_skeleton: bool
    use_attn: bool
    use_avg: bool
    centroid: bool


@dataclass(frozen=True)
class TrainConfig:
    objective: str
    num_ids: int
    samples_per_id: int
    input_dim: int
    noise: float
    steps: int
    lr: float
    seed: int
    data_seed: int
    hidden_dim: int
    embed_dim: int


@dataclass(frozen=True)
class RunConfig:
    dataset: DatasetSpec
    model: ModelConfig
    protocol: ProtocolConfig
    ablation: AblationConfig
    data_dir: str
    train: TrainConfig

    def resolved_items(self) -> list[tuple[str, str]]:
        """(section.key, value-as-text) pairs, sorted, defaults included."""
        sections = {
            "dataset": self.dataset,
            "model": self.model,
            "protocol": self.protocol,
            "ablation": self.ablation,
            "train": self.train,
        }
        items = [("paths.data_dir", self.data_dir)]
        for name, obj in sections.items():
            for key in _SCHEMA[name]:
                items.append((f"{name}.{key}", repr(getattr(obj, key))))
        return sorted(items)

    def hash(self) -> str:
        text = "\n".join(f"{k}={v}" for k, v in self.resolved_items())
        return hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]


def _coerce(section: str, key: str, text: str, typ):
    field = f"{section}.{key}"
    if typ is bool:
        word = text.strip().lower()
        if word not in _BOOL_WORDS:
            raise ConfigError(field, f"expected a boolean, got {text!r}")
        return _BOOL_WORDS[word]
    if typ is str:
        return text.strip()
    try:
        return typ(text.strip())
    except ValueError:
        raise ConfigError(field, f"expected {typ.__name__}, got {text!r}") from None


def parse_config(path) -> RunConfig:
    """Read and validate a config file; every field falls back to a default."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    with open(path, "r") as f:
        try:
            parser.read_file(f, source=str(path))
        except configparser.Error as exc:
            raise ConfigError("(file)", f"unparseable config: {exc}") from None

    resolved: dict[str, dict] = {}
    for section, keys in _SCHEMA.items():
        resolved[section] = {key: default for key, (_, default, _) in keys.items()}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(section, "unknown section")
        for key, text in parser[section].items():
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{section}.{key}", "unknown key")
            typ, _, validator = _SCHEMA[section][key]
            value = _coerce(section, key, text, typ)
            if validator is not None:
                try:
                    validator(value)
                except ValueError as exc:
                    raise ConfigError(f"{section}.{key}", str(exc)) from None
            resolved[section][key] = value

    model = ModelConfig(**resolved["model"])
    if model.group_size != 2**model.pyramid_levels:
        raise ConfigError(
            "model.group_size",
            f"must equal 2^pyramid_levels = {2**model.pyramid_levels}, got {model.group_size}",
        )
    try:
        dataset = DatasetSpec(**resolved["dataset"])
    except Exception as exc:
        raise ConfigError("dataset", str(exc)) from None
    return RunConfig(
        dataset=dataset,
        model=model,
        protocol=ProtocolConfig(**resolved["protocol"]),
        ablation=AblationConfig(**resolved["ablation"]),
        data_dir=resolved["paths"]["data_dir"],
        train=TrainConfig(**resolved["train"]),
    )


# ---------------------------------------------------------------------------
# model builders
# ---------------------------------------------------------------------------

_SIL_HIDDEN = 8
_VEC_HIDDEN = 32
_APP_HIDDEN = 8


def build_shape_model(cfg: RunConfig) -> ShapeModel:
    m = cfg.model
    sil = EncoderParams.initialize((4, _SIL_HIDDEN, m.channels), derive_seed(m.encoder_seed, 101))
    smpl = EncoderParams.initialize((SMPL_DIM, _VEC_HIDDEN, m.channels), derive_seed(m.encoder_seed, 102))
    skel = EncoderParams.initialize(
        (SKELETON_INPUT_DIM, _VEC_HIDDEN, m.motion_channels), derive_seed(m.encoder_seed, 103)
    )
    return ShapeModel.build(
        sil_encoder=sil,
        smpl_encoder=smpl,
        skeleton_encoder=skel,
        bins=m.bins,
        projection_seed=m.projection_seed,
        hpp_mode=m.hpp_mode,
    )


def build_appearance_model(cfg: RunConfig, gamma: float | None = None) -> AppearanceModel:
    m = cfg.model
    enc = EncoderParams.initialize((3, _APP_HIDDEN, m.channels), derive_seed(m.encoder_seed, 104))
    attn = AttentionParams.initialize(m.channels, levels=m.pyramid_levels, seed=m.attention_seed)
    return AppearanceModel(
        encoder=enc,
        attention=attn,
        gamma=m.gamma if gamma is None else gamma,
        ta_target=m.ta_target,
        normalize_parts=m.normalize_parts,
        use_attn=cfg.ablation.use_attn,
        use_avg=cfg.ablation.use_avg,
    )
