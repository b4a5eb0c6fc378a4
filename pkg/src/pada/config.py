"""Flat ``key=value`` experiment configuration.

One key per line; ``#`` starts a comment.  Every key must be known, so a
typo fails loudly instead of silently keeping a default.  List values are
comma separated (``feature_dims=16,8``).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from .datagen import CsvSchema, Dataset, SynthConfig, load_csv, make_synthetic, subset_target_classes
from .errors import ConfigError, PadaError
from .model import ModelConfig
from .train import Mode, TrainConfig


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _data_kind(text: str) -> str:
    if text not in ("synthetic", "csv"):
        raise ValueError("expected 'synthetic' or 'csv'")
    return text


_SYNTH = {f.name for f in dataclasses.fields(SynthConfig)} - {"seed"}
_TRAIN = {f.name for f in dataclasses.fields(TrainConfig)}

PARSERS: dict[str, Callable[[str], object]] = {
    "data": _data_kind,
    "source_csv": str,
    "target_csv": str,
    "target_classes": _int_list,
    "target_subset": int,
    "data_seed": int,
    "num_source_classes": int,
    "num_target_classes": int,
    "samples_per_class_source": int,
    "samples_per_class_target": int,
    "feature_dim": int,
    "class_separation": float,
    "shift_angle": float,
    "shift_translation": _float_list,
    "noise_std": float,
    "feature_dims": _int_list,
    "discriminator_dims": _int_list,
    "init_scale": float,
    "mode": lambda v: Mode(v),
    "epochs": int,
    "batch_size": int,
    "eta0": float,
    "alpha": float,
    "decay": float,
    "momentum": float,
    "lambda_max": float,
    "ramp_steepness": float,
    "head_lr_multiplier": float,
    "freeze_class_weights": _bool,
    "seed": int,
    "out_dir": str,
}


@dataclass
class ExperimentConfig:
    values: dict[str, object] = field(default_factory=dict)

    def get(self, key, default=None):
        return self.values.get(key, default)

    def set(self, key: str, raw: str) -> None:
        key = key.strip()
        if key not in PARSERS:
            raise ConfigError(key, "unknown key")
        try:
            self.values[key] = PARSERS[key](raw.strip())
        except ValueError as exc:
            raise ConfigError(key, f"invalid value {raw.strip()!r} ({exc})") from None

    @property
    def out_dir(self) -> Path:
        return Path(self.get("out_dir", "out"))

    def synth_config(self) -> SynthConfig:
        kwargs = {k: self.values[k] for k in _SYNTH if k in self.values}
        if "feature_dim" in kwargs and "shift_translation" not in kwargs:
            kwargs["shift_translation"] = ()
        return self._build("data", SynthConfig, seed=self.get("data_seed", 0), **kwargs)

    def dataset(self) -> Dataset:
        if self.get("data", "synthetic") == "csv":
            for key in ("source_csv", "target_csv"):
                if key not in self.values:
                    raise ConfigError(key, "required when data=csv")
            data = load_csv(
                self.values["source_csv"],
                self.values["target_csv"],
                CsvSchema(target_classes=self.get("target_classes", ())),
            )
        else:
            data = make_synthetic(self.synth_config())
        k = self.get("target_subset", 0)
        if k:
            data = self._wrap("target_subset", subset_target_classes, data, k)
        return data

    def model_config(self, dataset: Dataset) -> ModelConfig:
        kwargs = {k: self.values[k] for k in ("feature_dims", "discriminator_dims", "init_scale") if k in self.values}
        return self._build(
            "model",
            ModelConfig,
            input_dim=dataset.dim,
            num_source_classes=dataset.num_source_classes,
            seed=self.get("seed", 0),
            **kwargs,
        )

    def train_config(self) -> TrainConfig:
        kwargs = {k: self.values[k] for k in _TRAIN if k in self.values}
        return self._build("train", TrainConfig, **kwargs)

    @staticmethod
    def _build(section, cls, **kwargs):
        return ExperimentConfig._wrap(section, cls, **kwargs)

    @staticmethod
    def _wrap(key, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except PadaError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(key, str(exc)) from None


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    config = ExperimentConfig()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(line, f"{source}:{lineno}: expected key=value")
        key, raw = line.split("=", 1)
        config.set(key, raw)
    return config


def load_config(path: Optional[str], overrides: list[str] = ()) -> ExperimentConfig:
    config = parse_config(Path(path).read_text(), str(path)) if path else ExperimentConfig()
    for item in overrides:
        if "=" not in item:
            raise ConfigError(item, "override must look like key=value")
        key, raw = item.split("=", 1)
        config.set(key, raw)
    return config


def dump_config(config: ExperimentConfig) -> str:
    lines = []
    for key in PARSERS:
        if key not in config.values:
            continue
        v = config.values[key]
        if isinstance(v, Mode):
            v = v.value
        elif isinstance(v, tuple):
            v = ",".join(str(x) for x in v)
        elif isinstance(v, bool):
            v = "true" if v else "false"
        lines.append(f"{key}={v}")
    return "\n".join(lines) + "\n"
