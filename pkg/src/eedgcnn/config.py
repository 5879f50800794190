"""Model/training configuration, flat key-value config files, seed fan-out."""

from __future__ import annotations

import dataclasses
import hashlib
import zlib
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .corpus import ACE_ROLES


class ConfigError(ValueError):
    """Invalid configuration value."""


def _opt(default, help: str, choices=None, **kw):
    meta = {"help": help}
    if choices is not None:
        meta["choices"] = tuple(choices)
    if isinstance(default, (list, tuple)):
        return field(default_factory=lambda: tuple(default), metadata=meta, **kw)
    return field(default=default, metadata=meta, **kw)


@dataclass
class ModelConfig:
    task: str = _opt("argument", "tagging task", ("argument", "trigger"))
    provider: str = _opt("trainable_hash", "contextual embedding provider",
                         ("trainable_hash", "file_backed", "http_service"))
    d_ctx: int = _opt(64, "contextual embedding width")
    hash_buckets: int = _opt(50021, "bucket count for the trainable_hash provider")
    embeddings_path: str = _opt("", "fixture stem for the file_backed provider")
    embedding_url: str = _opt("", "endpoint for the http_service provider")
    features: str = _opt("full", "token features: full, or contextual only (simple)", ("full", "simple"))
    d_pos: int = _opt(50, "POS embedding width")
    map_unknown_pos: bool = _opt(True, "map unseen POS tags to a reserved id instead of failing")
    event_type_mode: str = _opt("learnable", "event type encoding", ("none", "one_hot", "learnable"))
    d_event: int = _opt(400, "learnable event type embedding width")
    input_form: str = _opt("pair", "argument input: trigger prefix (single) or prefix+separator (pair)",
                           ("single", "pair"))
    segment_encoding: str = _opt("scalar", "segment id as one scalar or a learned 2-row table", ("scalar", "table"))
    d_segment: int = _opt(8, "segment table width when segment_encoding=table")
    d_hidden: int = _opt(256, "hidden width of the gated conv stack")
    window: int = _opt(3, "convolution window (odd)")
    dilations: tuple = _opt((1, 2, 4, 1, 2, 4, 1), "dilation per gated block; its length is the layer count")
    gate_combine: str = _opt("multiply", "how value and gate convolutions combine", ("multiply", "add"))
    residual: bool = _opt(False, "add the block input to each block output")
    dropout: float = _opt(0.2, "dropout on token features and between blocks")
    context_window: int = _opt(3, "candidate context window size (odd)")
    trigger_slots: int = _opt(3, "fixed trigger slots in the classifier input")
    label_scheme: str = _opt("raw36", "per-token labels: raw role names or BIO", ("raw36", "bio"))
    roles: tuple = _opt(ACE_ROLES, "argument role vocabulary (None is added)")
    seed: int = _opt(0, "parameter initialisation seed")

    def validate(self) -> "ModelConfig":
        for f in fields(self):
            ch = f.metadata.get("choices")
            if ch and getattr(self, f.name) not in ch:
                raise ConfigError(f"{f.name} must be one of {', '.join(ch)}; got {getattr(self, f.name)!r}")
        for name in ("d_ctx", "d_pos", "d_event", "d_hidden", "hash_buckets", "trigger_slots", "d_segment"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.window < 1 or self.window % 2 == 0:
            raise ConfigError(f"window must be odd and positive, got {self.window}")
        if self.context_window < 1 or self.context_window % 2 == 0:
            raise ConfigError(f"context_window must be odd and positive, got {self.context_window}")
        if not self.dilations or any(int(d) < 1 for d in self.dilations):
            raise ConfigError(f"dilations must be positive integers, got {self.dilations}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must lie in [0, 1), got {self.dropout}")
        if not self.roles or "None" in self.roles or len(set(self.roles)) != len(self.roles):
            raise ConfigError("roles must be distinct and must not include 'None'")
        return self


@dataclass
class TrainConfig:
    batch_size: int = _opt(32, "queries per optimiser step")
    learning_rate: float = _opt(6e-5, "optimiser step size")
    epochs: int = _opt(40, "passes over the training queries")
    optimizer: str = _opt("adam", "optimiser", ("adam", "sgd"))
    beta1: float = _opt(0.9, "Adam first-moment decay")
    beta2: float = _opt(0.999, "Adam second-moment decay")
    eps: float = _opt(1e-8, "Adam denominator floor")
    loss_reduction: str = _opt("sum", "batch loss: sum over positions or mean", ("sum", "mean"))
    patience: int = _opt(0, "epochs without validation gain before stopping (0 disables)")
    seed: int = _opt(0, "shuffling and dropout seed")

    def validate(self) -> "TrainConfig":
        for f in fields(self):
            ch = f.metadata.get("choices")
            if ch and getattr(self, f.name) not in ch:
                raise ConfigError(f"{f.name} must be one of {', '.join(ch)}; got {getattr(self, f.name)!r}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be positive, got {self.batch_size}")
        if self.learning_rate < 0 or not np.isfinite(self.learning_rate):
            raise ConfigError(f"learning_rate must be non-negative, got {self.learning_rate}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be non-negative, got {self.epochs}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1) or self.eps <= 0:
            raise ConfigError("Adam needs 0 <= beta < 1 and eps > 0")
        if self.patience < 0:
            raise ConfigError(f"patience must be non-negative, got {self.patience}")
        return self


def parse_value(raw: str, current):
    """Coerce ``raw`` text to the type of ``current``."""
    raw = raw.strip()
    if isinstance(current, bool):
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"expected a boolean, got {raw!r}")
    if isinstance(current, int):
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"expected an integer, got {raw!r}") from None
    if isinstance(current, float):
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"expected a number, got {raw!r}") from None
    if isinstance(current, tuple):
        items = [x.strip() for x in raw.split(",") if x.strip()]
        if current and isinstance(current[0], int):
            try:
                return tuple(int(x) for x in items)
            except ValueError:
                raise ConfigError(f"expected comma-separated integers, got {raw!r}") from None
        if not current:
            try:
                return tuple(float(x) for x in items)
            except ValueError:
                pass
        return tuple(items)
    return raw


def read_kv_file(path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, val = line.split("=", 1)
        out[key.strip().replace("-", "_")] = val.strip()
    return out


def apply_overrides(cfg, values: dict, strict: bool = True):
    """Return a copy of dataclass ``cfg`` with string or typed ``values`` applied."""
    names = {f.name for f in fields(cfg)}
    changes = {}
    for key, val in values.items():
        if key not in names:
            if strict:
                raise ConfigError(f"unknown config key {key!r}")
            continue
        cur = getattr(cfg, key)
        try:
            changes[key] = parse_value(val, cur) if isinstance(val, str) and not isinstance(cur, str) else val
        except ConfigError as exc:
            raise ConfigError(f"{key}: {exc}") from None
    if "dilations" in changes:
        changes["dilations"] = tuple(int(d) for d in changes["dilations"])
    if "roles" in changes:
        changes["roles"] = tuple(changes["roles"])
    return dataclasses.replace(cfg, **changes)


def config_dict(cfg) -> dict:
    out = dataclasses.asdict(cfg)
    for k, v in out.items():
        if isinstance(v, tuple):
            out[k] = list(v)
    return out


def derive_rng(seed: int, *path) -> np.random.Generator:
    """Independent Philox stream for ``(seed, *path)``; names are hashed into the spawn key."""
    key = tuple(p if isinstance(p, int) else zlib.crc32(str(p).encode("utf-8")) for p in path)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


def git_blob_hash(path) -> str:
    data = Path(path).read_bytes()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()
