"""Run configuration: one YAML document with per-stage sections.

Every section is optional and falls back to desk-benchmark defaults. Field
paths appear in every validation error (e.g. ``train.batch_size``). Each
section may carry its own ``seed``; missing ones inherit the top-level seed
(which the CLI ``--seed`` flag overrides).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .attacks import AttackConfig
from .data import SynthSpec
from .errors import ConfigurationError
from .models import FAMILIES
from .training import TrainConfig

DEFAULT_EPSILONS = (2 / 255, 4 / 255, 8 / 255)


@dataclass(frozen=True)
class AnalysisParams:
    perplexity: float = 15.0
    tsne_iterations: int = 500
    top_k: int = None  # resolved to min(5, K-1) at analyze time
    seed: int = 0

    def validate(self):
        if self.perplexity < 3:
            raise ConfigurationError(
                f"analysis.perplexity: must be >= 3, got {self.perplexity}"
            )
        if self.tsne_iterations < 1:
            raise ConfigurationError(
                f"analysis.tsne_iterations: must be >= 1, got {self.tsne_iterations}"
            )
        if self.top_k is not None and self.top_k < 1:
            raise ConfigurationError(f"analysis.top_k: must be >= 1, got {self.top_k}")


@dataclass(frozen=True)
class ModelSection:
    family: str = "plain"
    stage_widths: tuple = None  # family default when absent
    num_modules: int = None
    aux_positions: tuple = None
    aux_loss_weight: float = 0.3


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    synth: SynthSpec = None
    model: ModelSection = ModelSection()
    train: TrainConfig = TrainConfig()
    train_fraction: float = 0.8
    attacks: tuple = ()
    dump_images: tuple = ()  # per-attack PPM dump counts
    analysis: AnalysisParams = AnalysisParams()


def _check_keys(section, allowed, path):
    unknown = set(section) - set(allowed)
    if unknown:
        raise ConfigurationError(
            f"{path}.{sorted(unknown)[0]}: unknown configuration field"
        )


def _want(section, key, types, default, path):
    value = section.get(key, default)
    if value is None:
        return None
    if types is bool:
        if not isinstance(value, bool):
            raise ConfigurationError(f"{path}.{key}: expected a boolean, got {value!r}")
        return value
    if types is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigurationError(f"{path}.{key}: expected an integer, got {value!r}")
        return value
    if types is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(f"{path}.{key}: expected a number, got {value!r}")
        return float(value)
    if types is str:
        if not isinstance(value, str):
            raise ConfigurationError(f"{path}.{key}: expected a string, got {value!r}")
        return value
    if types is list:
        if not isinstance(value, (list, tuple)):
            raise ConfigurationError(f"{path}.{key}: expected a list, got {value!r}")
        return list(value)
    raise AssertionError(types)


def _int_list(section, key, default, path):
    values = _want(section, key, list, default, path)
    if values is None:
        return None
    out = []
    for v in values:
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigurationError(f"{path}.{key}: expected integers, got {v!r}")
        out.append(v)
    return tuple(out)


def _parse_synth(section, top_seed):
    _check_keys(
        section,
        {"classes", "images_per_class", "image_size", "noise", "contrast", "color_spread", "seed"},
        "synth",
    )
    spec = SynthSpec(
        num_classes=_want(section, "classes", int, 10, "synth"),
        images_per_class=_want(section, "images_per_class", int, 100, "synth"),
        image_size=_want(section, "image_size", int, 32, "synth"),
        noise_amplitude=_want(section, "noise", float, 0.12, "synth"),
        seed=_want(section, "seed", int, top_seed, "synth"),
        contrast=_want(section, "contrast", float, 0.05, "synth"),
        color_spread=_want(section, "color_spread", float, 0.02, "synth"),
    )
    spec.validate()
    return spec


def _parse_model(section):
    _check_keys(
        section,
        {"family", "stage_widths", "num_modules", "aux_positions", "aux_loss_weight"},
        "model",
    )
    family = _want(section, "family", str, "plain", "model")
    if family not in FAMILIES:
        raise ConfigurationError(
            f"model.family: {family!r} is not one of {', '.join(FAMILIES)}"
        )
    return ModelSection(
        family=family,
        stage_widths=_int_list(section, "stage_widths", None, "model"),
        num_modules=_want(section, "num_modules", int, None, "model"),
        aux_positions=_int_list(section, "aux_positions", None, "model"),
        aux_loss_weight=_want(section, "aux_loss_weight", float, 0.3, "model"),
    )


def _parse_train(section, top_seed):
    _check_keys(
        section,
        {"epochs", "batch_size", "learning_rate", "momentum", "seed", "shuffle", "train_fraction"},
        "train",
    )
    cfg = TrainConfig(
        epochs=_want(section, "epochs", int, 30, "train"),
        batch_size=_want(section, "batch_size", int, 32, "train"),
        learning_rate=_want(section, "learning_rate", float, 0.01, "train"),
        momentum=_want(section, "momentum", float, 0.9, "train"),
        seed=_want(section, "seed", int, top_seed, "train"),
        shuffle=_want(section, "shuffle", bool, True, "train"),
    )
    cfg.validate()
    fraction = _want(section, "train_fraction", float, 0.8, "train")
    if not 0 < fraction < 1:
        raise ConfigurationError(
            f"train.train_fraction: must lie in (0, 1), got {fraction}"
        )
    return cfg, fraction


def _parse_attacks(entries):
    if not isinstance(entries, list):
        raise ConfigurationError("attacks: expected a list of attack sections")
    configs, dumps = [], []
    if not entries:
        for eps in DEFAULT_EPSILONS:
            configs.append(AttackConfig("fgsm", eps))
            configs.append(AttackConfig("bim", eps, eps / 4, 10))
            dumps.extend([0, 0])
        return tuple(configs), tuple(dumps)
    for i, section in enumerate(entries):
        path = f"attacks[{i}]"
        if not isinstance(section, dict):
            raise ConfigurationError(f"{path}: expected a mapping")
        _check_keys(
            section,
            {"algorithm", "epsilon", "step_size", "iterations", "confidence_threshold", "dump_images"},
            path,
        )
        cfg = AttackConfig(
            algorithm=_want(section, "algorithm", str, "fgsm", path),
            epsilon=_want(section, "epsilon", float, 8 / 255, path),
            step_size=_want(section, "step_size", float, None, path),
            iterations=_want(section, "iterations", int, 10, path),
            confidence_threshold=_want(section, "confidence_threshold", float, 0.7, path),
        )
        try:
            cfg.validate()
        except ConfigurationError as exc:
            raise ConfigurationError(f"{path}: {exc}") from None
        configs.append(cfg)
        dumps.append(_want(section, "dump_images", int, 0, path))
    return tuple(configs), tuple(dumps)


def _parse_analysis(section, top_seed):
    _check_keys(section, {"perplexity", "tsne_iterations", "top_k", "seed"}, "analysis")
    params = AnalysisParams(
        perplexity=_want(section, "perplexity", float, 15.0, "analysis"),
        tsne_iterations=_want(section, "tsne_iterations", int, 500, "analysis"),
        top_k=_want(section, "top_k", int, None, "analysis"),
        seed=_want(section, "seed", int, top_seed, "analysis"),
    )
    params.validate()
    return params


def parse_config(document, seed_override=None):
    """Validate a parsed YAML mapping into a RunConfig."""
    if document is None:
        document = {}
    if not isinstance(document, dict):
        raise ConfigurationError("config: top level must be a mapping")
    _check_keys(document, {"seed", "synth", "model", "train", "attacks", "analysis"}, "config")
    top_seed = _want(document, "seed", int, 0, "config")
    if seed_override is not None:
        top_seed = int(seed_override)

    def section(name):
        value = document.get(name, {}) or {}
        if not isinstance(value, dict) and name != "attacks":
            raise ConfigurationError(f"{name}: expected a mapping")
        return value

    attacks_cfg, dumps = _parse_attacks(document.get("attacks", []) or [])
    train_cfg, fraction = _parse_train(section("train"), top_seed)
    return RunConfig(
        seed=top_seed,
        synth=_parse_synth(section("synth"), top_seed),
        model=_parse_model(section("model")),
        train=train_cfg,
        train_fraction=fraction,
        attacks=attacks_cfg,
        dump_images=dumps,
        analysis=_parse_analysis(section("analysis"), top_seed),
    )


def load_config(path, seed_override=None):
    """Read and validate a YAML run configuration file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"config: cannot read {path}: {exc}") from exc
    try:
        document = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"config: {path} is not valid YAML: {exc}") from exc
    return parse_config(document, seed_override)
