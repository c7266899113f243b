"""Run configuration and the two built-in presets.

``paper`` reproduces the full-scale setting: EMA span 120, window 370,
two LSTM layers of 128 units, Adam at 1e-3, batch 128, up to 1000 epochs,
dropout 0.266, patience 50 with min_delta -1e-4 and a 7:2:1 split.
``desk`` keeps the rest but shrinks the window, width, epoch budget and
patience so a run fits on a laptop or in CI.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace

from .errors import ValidationError
from .lstm import TrainHyper

PRESETS: dict[str, dict] = {
    "paper": {},
    "desk": {"window": 30, "hidden": 16, "max_epochs": 50, "patience": 10},
}


@dataclass(frozen=True)
class RunConfig:
    inputs: tuple[str, ...] = ()
    preset: str = "paper"
    tau: float = 120.0
    window: int = 370
    hidden: int = 128
    layers: int = 2
    split: tuple[int, int, int] = (7, 2, 1)
    learning_rate: float = 1e-3
    batch_size: int = 128
    max_epochs: int = 1000
    dropout_rate: float = 0.266
    patience: int = 50
    min_delta: float = -1e-4
    clip_norm: float | None = 5.0
    seed: int = 0
    oversample: bool = True

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ValidationError(f"unknown preset {self.preset!r}; choose from {sorted(PRESETS)}")
        if not self.tau >= 1:
            raise ValidationError(f"tau must be >= 1, got {self.tau}")
        if self.window < 1 or self.hidden < 1 or self.layers < 1:
            raise ValidationError("window, hidden and layers must be positive")
        split = tuple(int(s) for s in self.split)
        if len(split) != 3 or min(split) < 0 or split[0] == 0 or split[1] == 0:
            raise ValidationError(f"split needs three non-negative parts with train and validation > 0, got {self.split}")
        object.__setattr__(self, "split", split)
        object.__setattr__(self, "inputs", tuple(str(p) for p in self.inputs))
        self.hyper()  # validates the optimizer fields

    @classmethod
    def from_preset(cls, name: str = "paper", **overrides) -> "RunConfig":
        if name not in PRESETS:
            raise ValidationError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
        values = {**PRESETS[name], **{k: v for k, v in overrides.items() if v is not None}}
        return cls(preset=name, **values)

    def hyper(self) -> TrainHyper:
        return TrainHyper(
            learning_rate=self.learning_rate, batch_size=self.batch_size,
            max_epochs=self.max_epochs, dropout_rate=self.dropout_rate,
            clip_norm=self.clip_norm, patience=self.patience,
            min_delta=self.min_delta, seed=self.seed,
        )

    def replace(self, **kw) -> "RunConfig":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["inputs"] = list(self.inputs)
        d["split"] = list(self.split)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        for key in ("inputs", "split"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls.from_dict(json.loads(text))


def parse_split(text: str) -> tuple[int, int, int]:
    """Parse ``"7:2:1"`` into ``(7, 2, 1)``."""
    try:
        parts = tuple(int(p) for p in text.split(":"))
    except ValueError:
        raise ValidationError(f"split must look like 7:2:1, got {text!r}") from None
    if len(parts) != 3:
        raise ValidationError(f"split must have three parts, got {text!r}")
    return parts
