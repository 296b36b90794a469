"""Experiment configuration: JSON round-trip, validation, overrides.

A run is described by one JSON document. Data comes either from a
`synth` block (generated, written to the run directory, then read back
through the parsers) or from explicit file paths. Every field can be
overridden on the command line with `--set dotted.key=value`; the fully
resolved document is echoed into the run directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .model import MODEL_KINDS, HyperParams
from .classifier import TrainSettings
from .synth import SynthConfig

SWEEP_AXES = ("train_size", "noise_rate", "source_language", "gnn_kind")


class ConfigError(ValueError):
    """Invalid configuration document or override."""


def _default_model() -> dict:
    return {
        "kind": "dhgnet",
        "embed_dim": 16,
        "heads": 2,
        "head_dim": 8,
        "num_layers": 2,
        "leaky_slope": 0.2,
        "layer_norm_eps": 1e-5,
        "self_pair_participates": True,
    }


def _default_training() -> dict:
    return {
        "epochs": 30,
        "batch_size": 32,
        "learning_rate": 1e-3,
        "classifier_hidden": 32,
        "dropout": 0.0,
        "bypass_gnn": False,
        "contrastive_steps": 0,
        "contrastive_margin": 0.5,
        "contrastive_negatives": 5,
        "contrastive_lr": 1e-3,
    }


@dataclass
class ExperimentConfig:
    target_language: str = "xt"
    source_languages: tuple[str, ...] = ("xa", "xb")
    synth: SynthConfig | None = field(default_factory=SynthConfig)
    data_seed: int = 0
    embeddings: dict[str, str] = field(default_factory=dict)
    dictionaries: tuple[tuple[str, str, str], ...] = ()
    corpora: dict[str, str] = field(default_factory=dict)
    model: dict = field(default_factory=_default_model)
    training: dict = field(default_factory=_default_training)
    noise_rate: float = 0.0
    train_fraction: float = 1.0
    common_word_limit: int = 0
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    output_dir: str = "runs/exp"

    def validate(self) -> None:
        if not isinstance(self.target_language, str) or not self.target_language:
            raise ConfigError("target_language must be a non-empty string")
        if not self.source_languages:
            raise ConfigError("need at least one source language")
        if self.target_language in self.source_languages:
            raise ConfigError("target language cannot also be a source language")
        if not self.seeds:
            raise ConfigError("seeds list must be non-empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")
        if not 0.0 <= self.noise_rate <= 1.0:
            raise ConfigError("noise_rate must be in [0, 1]")
        if not 0.0 < self.train_fraction <= 1.0:
            raise ConfigError("train_fraction must be in (0, 1]")
        if self.common_word_limit < 0:
            raise ConfigError("common_word_limit must be non-negative")
        kind = self.model.get("kind")
        if kind not in MODEL_KINDS:
            raise ConfigError(f"model.kind must be one of {MODEL_KINDS}, got {kind!r}")
        try:
            self.hyper_params()
            self.train_settings()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        if self.synth is None:
            if not self.corpora or "train" not in self.corpora or "valid" not in self.corpora:
                raise ConfigError("file-based runs need train and valid corpora")
            if self.model["kind"] != "no-dhgnet" and not self.embeddings:
                raise ConfigError("file-based runs need source embedding tables")
        else:
            try:
                self.synth.validate()
            except ValueError as exc:
                raise ConfigError(f"synth: {exc}") from exc
            if self.synth.target_language != self.target_language or tuple(
                self.synth.source_languages
            ) != tuple(self.source_languages):
                raise ConfigError("synth languages must match the experiment languages")

    def hyper_params(self) -> HyperParams:
        spec = {k: v for k, v in self.model.items() if k != "kind"}
        return HyperParams(**spec)

    def train_settings(self) -> TrainSettings:
        return TrainSettings(kind=self.model["kind"], hyper=self.hyper_params(), **self.training)


def synth_to_dict(cfg: SynthConfig) -> dict:
    return {
        "target_language": cfg.target_language,
        "source_languages": list(cfg.source_languages),
        "num_concepts": cfg.num_concepts,
        "num_classes": cfg.num_classes,
        "concept_dim": cfg.concept_dim,
        "words_per_language": dict(cfg.words_per_language),
        "rotation_seeds": None if cfg.rotation_seeds is None else dict(cfg.rotation_seeds),
        "noise_sigma": cfg.noise_sigma,
        "docs_per_split": dict(cfg.docs_per_split),
        "doc_length": list(cfg.doc_length),
        "affinity": cfg.affinity,
        "p_dict": cfg.p_dict,
        "p_err": cfg.p_err,
    }


def synth_from_dict(raw: dict) -> SynthConfig:
    if not isinstance(raw, dict):
        raise ConfigError("synth section must be an object")
    known = {f.name for f in fields(SynthConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown synth fields: {sorted(unknown)}")
    data = dict(raw)
    if "source_languages" in data:
        data["source_languages"] = tuple(data["source_languages"])
    if "doc_length" in data:
        data["doc_length"] = tuple(data["doc_length"])
    try:
        return SynthConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def to_dict(config: ExperimentConfig) -> dict:
    return {
        "target_language": config.target_language,
        "source_languages": list(config.source_languages),
        "synth": None if config.synth is None else synth_to_dict(config.synth),
        "data_seed": config.data_seed,
        "embeddings": dict(config.embeddings),
        "dictionaries": [list(d) for d in config.dictionaries],
        "corpora": dict(config.corpora),
        "model": dict(config.model),
        "training": dict(config.training),
        "noise_rate": config.noise_rate,
        "train_fraction": config.train_fraction,
        "common_word_limit": config.common_word_limit,
        "seeds": list(config.seeds),
        "output_dir": config.output_dir,
    }


def from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config document must be a JSON object")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    data = dict(raw)
    if "source_languages" in data:
        data["source_languages"] = tuple(data["source_languages"])
    if "seeds" in data:
        try:
            data["seeds"] = tuple(int(s) for s in data["seeds"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"seeds must be integers: {exc}") from exc
    if "dictionaries" in data:
        dicts = []
        for entry in data["dictionaries"]:
            if len(entry) != 3:
                raise ConfigError("each dictionary entry must be [src, dst, path]")
            dicts.append(tuple(str(x) for x in entry))
        data["dictionaries"] = tuple(dicts)
    if data.get("synth") is not None:
        data["synth"] = synth_from_dict(data["synth"])
    model = _default_model()
    model.update(data.get("model") or {})
    data["model"] = model
    training = _default_training()
    training.update(data.get("training") or {})
    data["training"] = training
    unknown_model = set(model) - set(_default_model())
    if unknown_model:
        raise ConfigError(f"unknown model fields: {sorted(unknown_model)}")
    unknown_training = set(training) - set(_default_training())
    if unknown_training:
        raise ConfigError(f"unknown training fields: {sorted(unknown_training)}")
    try:
        config = ExperimentConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    config.validate()
    return config


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return from_dict(raw)


def save_config(config: ExperimentConfig, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_dict(config), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(raw: dict, overrides: list[str]) -> dict:
    """Apply `dotted.key=value` assignments to a nested config dict.

    Values parse as JSON when possible, otherwise stay strings. The path
    must address an existing field so typos fail loudly.
    """
    result = json.loads(json.dumps(raw))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        dotted, text = item.split("=", 1)
        keys = dotted.split(".")
        node = result
        for k in keys[:-1]:
            if not isinstance(node, dict) or k not in node:
                raise ConfigError(f"override path {dotted!r} does not exist")
            node = node[k]
        last = keys[-1]
        if not isinstance(node, dict):
            raise ConfigError(f"override path {dotted!r} does not exist")
        if last not in node:
            defaults = {
                "model": _default_model,
                "training": _default_training,
                "synth": lambda: synth_to_dict(SynthConfig()),
            }
            parent = keys[-2] if len(keys) > 1 else None
            allowed = defaults.get(parent, dict)()
            top = {f.name for f in fields(ExperimentConfig)}
            if (parent is None and last not in top) or (parent is not None and last not in allowed):
                raise ConfigError(f"override path {dotted!r} does not exist")
        node[last] = _parse_value(text)
    return result
