"""Run configuration: one JSON document, CLI-overridable, content-fingerprinted.

The fingerprint (sha256 of the canonical JSON) is embedded in every CSV,
markdown, JSON, and figure artifact a command writes, so identical
fingerprints imply identical outputs.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

from .derive import DeriveConfig
from .errors import InputError
from .ontology import Relation
from .sampling import CORRUPTION_MODES, UNIFORM_MODE, SplitSpec


def fingerprint_payload(payload: dict) -> str:
    """Content digest of any JSON-serializable config payload."""
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class ModelConfig:
    d: int = 32
    depth: int = 2
    fanout: int = 10
    unit_norm: bool = False

    def __post_init__(self) -> None:
        if self.d < 1 or self.depth < 1 or self.fanout < 1:
            raise InputError("d, depth, and fanout must be >= 1")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.02
    epochs: int = 30
    batch_size: int = 64
    negatives_per_positive: int = 2
    corruption_mode: str = UNIFORM_MODE
    target_relation: str = Relation.BUYS_FROM.value

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise InputError("learning_rate must be positive")
        if self.epochs < 0:
            raise InputError("epochs must be >= 0")
        if self.batch_size < 1 or self.negatives_per_positive < 1:
            raise InputError("batch_size and negatives_per_positive must be >= 1")
        if self.corruption_mode != UNIFORM_MODE and self.corruption_mode not in CORRUPTION_MODES:
            raise InputError(f"unknown corruption mode {self.corruption_mode!r}")
        try:
            Relation(self.target_relation)
        except ValueError:
            raise InputError(f"unknown target relation {self.target_relation!r}") from None


@dataclass
class RunConfig:
    derive: DeriveConfig = field(default_factory=DeriveConfig)
    split: SplitSpec = field(default_factory=SplitSpec)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 42

    def to_dict(self) -> dict:
        return {
            "derive": asdict(self.derive),
            "split": asdict(self.split),
            "model": asdict(self.model),
            "train": asdict(self.train),
            "seed": self.seed,
        }

    def fingerprint(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {"derive", "split", "model", "train", "seed"}
        unknown = set(d) - known
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(
                derive=DeriveConfig(**d.get("derive", {})),
                split=SplitSpec(**d.get("split", {})),
                model=ModelConfig(**d.get("model", {})),
                train=TrainConfig(**d.get("train", {})),
                seed=int(d.get("seed", 42)),
            )
        except TypeError as exc:
            raise InputError(f"bad config: {exc}") from None

    @classmethod
    def load(cls, path, overrides: dict | None = None) -> "RunConfig":
        """Read a config JSON and apply dotted-path overrides like
        {"train.epochs": 5, "seed": 7}."""
        with open(path, "r", encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}: invalid JSON: {exc}") from None
        return cls.from_dict(apply_overrides(data, overrides or {}))


def apply_overrides(data: dict, overrides: dict) -> dict:
    out = json.loads(json.dumps(data))  # deep copy
    for dotted, value in overrides.items():
        parts = dotted.split(".")
        node = out
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise InputError(f"cannot override {dotted}: {p} is not a section")
        node[parts[-1]] = value
    return out
