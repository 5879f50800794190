"""Network building blocks: dilated Conv1D, gated conv block, embeddings,
dense heads, softmax cross-entropy, and the parameter file format."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .tensor import ShapeError, Tape, Tensor

MAGIC = b"EEDGCNN\x01"


def glorot(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Module:
    """Anything holding named parameter tensors."""

    def named_params(self, prefix: str = "") -> list[tuple[str, Tensor]]:
        out = []
        for key, val in vars(self).items():
            if isinstance(val, Tensor) and val.requires_grad:
                out.append((prefix + key, val))
            elif isinstance(val, Module):
                out.extend(val.named_params(prefix + key + "."))
            elif isinstance(val, list):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        out.extend(item.named_params(f"{prefix}{key}.{i}."))
        return out

    def params(self) -> list[Tensor]:
        return [p for _, p in self.named_params()]

    def layer_meta(self) -> dict:
        return {}


class Conv1D(Module):
    """Same-length dilated convolution; weights are ``[window, in_dim, out_dim]``."""

    kind = "conv1d"

    def __init__(self, in_dim: int, out_dim: int, window: int = 3, dilation: int = 1, rng=None):
        if window < 1 or window % 2 == 0:
            raise ValueError(f"window must be an odd positive integer, got {window}")
        if dilation < 1:
            raise ValueError(f"dilation must be positive, got {dilation}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.window = window
        self.dilation = dilation
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.W = Tensor(glorot(rng, (window, in_dim, out_dim), window * in_dim, out_dim), requires_grad=True)
        self.b = Tensor(np.zeros(out_dim), requires_grad=True)

    @property
    def receptive_field(self) -> int:
        return 1 + (self.window - 1) * self.dilation

    def __call__(self, tape: Tape, x: Tensor) -> Tensor:
        if x.shape[-1] != self.in_dim:
            raise ShapeError(f"conv1d: expected {self.in_dim} input channels, got {x.shape[-1]}")
        return tape.conv1d(x, self.W, self.b, dilation=self.dilation)

    def layer_meta(self) -> dict:
        return {"kind": self.kind, "window": self.window, "dilation": self.dilation}


def conv1d_forward(x, layer: Conv1D, tape: Tape | None = None) -> np.ndarray:
    """Evaluate ``layer`` on a ``[T, in_dim]`` array and return ``[T, out_dim]``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ShapeError(f"conv1d_forward: need [T>=1, in_dim], got {x.shape}")
    tape = tape or Tape(training=False)
    return layer(tape, Tensor(x)).data


def stack_receptive_field(window: int, dilations) -> int:
    return 1 + sum((window - 1) * d for d in dilations)


class GatedConvBlock(Module):
    """``conv_value(x) * sigmoid(conv_gate(x))``.

    The two convolutions share window and dilation but not weights.
    ``combine="add"`` swaps the product for a sum; ``residual`` adds the input.
    """

    kind = "gated_block"

    def __init__(self, dim: int, window: int = 3, dilation: int = 1, combine: str = "multiply",
                 residual: bool = False, rng=None):
        if combine not in ("multiply", "add"):
            raise ValueError(f"gate_combine must be 'multiply' or 'add', got {combine!r}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.dim = dim
        self.combine = combine
        self.residual = residual
        self.conv_value = Conv1D(dim, dim, window, dilation, rng)
        self.conv_gate = Conv1D(dim, dim, window, dilation, rng)

    @property
    def dilation(self) -> int:
        return self.conv_value.dilation

    def __call__(self, tape: Tape, x: Tensor) -> Tensor:
        if x.shape[-1] != self.dim:
            raise ShapeError(f"gated block: expected dim {self.dim}, got {x.shape[-1]}")
        value = self.conv_value(tape, x)
        gate = tape.sigmoid(self.conv_gate(tape, x))
        y = tape.mul(value, gate) if self.combine == "multiply" else tape.add(value, gate)
        if self.residual:
            y = tape.add(y, x)
        return y

    def layer_meta(self) -> dict:
        return {"kind": self.kind, "window": self.conv_value.window, "dilation": self.dilation,
                "combine": self.combine, "residual": self.residual}


def gated_block_forward(x, block: GatedConvBlock, tape: Tape | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    tape = tape or Tape(training=False)
    return block(tape, Tensor(x)).data


class Embedding(Module):
    kind = "embedding"

    def __init__(self, vocab_size: int, dim: int, learnable: bool = True, rng=None, scale: float = 0.1,
                 weights=None):
        if weights is None:
            rng = rng if rng is not None else np.random.default_rng(0)
            weights = rng.normal(0.0, scale, size=(vocab_size, dim))
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (vocab_size, dim):
            raise ShapeError(f"embedding weights {weights.shape} != ({vocab_size}, {dim})")
        self.vocab_size = vocab_size
        self.dim = dim
        self.learnable = learnable
        self.weights = Tensor(weights, requires_grad=learnable)

    def __call__(self, tape: Tape, ids) -> Tensor:
        return tape.embedding(self.weights, ids)

    def layer_meta(self) -> dict:
        return {"kind": self.kind, "learnable": self.learnable}


class Dense(Module):
    kind = "dense"

    def __init__(self, in_dim: int, out_dim: int, rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.W = Tensor(glorot(rng, (in_dim, out_dim), in_dim, out_dim), requires_grad=True)
        self.b = Tensor(np.zeros(out_dim), requires_grad=True)

    def __call__(self, tape: Tape, x: Tensor) -> Tensor:
        return tape.affine(x, self.W, self.b)

    def layer_meta(self) -> dict:
        return {"kind": self.kind}


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_xent(tape: Tape, logits: Tensor, targets, reduction: str = "sum") -> Tensor:
    return tape.softmax_xent(logits, targets, reduction=reduction)


def one_hot(labels, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.size, n_classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


# -- parameter files ----------------------------------------------------------
#
# layout: MAGIC | u64 LE header length | UTF-8 JSON header | f64 LE buffers
# The header lists every parameter in file order with its shape and layer meta.

@dataclass
class ParamFile:
    header: dict
    arrays: dict[str, np.ndarray] = field(default_factory=dict)


def _layer_meta_map(root: Module) -> dict[str, dict]:
    metas: dict[str, dict] = {}

    def walk(mod: Module, prefix: str) -> None:
        meta = mod.layer_meta()
        if meta:
            metas[prefix.rstrip(".")] = meta
        for key, val in vars(mod).items():
            if isinstance(val, Module):
                walk(val, prefix + key + ".")
            elif isinstance(val, list):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        walk(item, f"{prefix}{key}.{i}.")

    walk(root, "")
    return metas


def save_params(path, root: Module, extra_header: dict, extra_arrays: dict[str, np.ndarray] | None = None) -> None:
    """Write all parameters of ``root`` (plus frozen ``extra_arrays``)."""
    metas = _layer_meta_map(root)
    entries = []
    blobs = []
    arrays = [(name, t.data) for name, t in root.named_params()]
    arrays += sorted((extra_arrays or {}).items())
    for name, arr in arrays:
        owner = name.rsplit(".", 1)[0] if "." in name else ""
        entries.append({"name": name, "shape": list(arr.shape), "layer": metas.get(owner, {})})
        blobs.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    header = dict(extra_header)
    header["params"] = entries
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(head)))
        fh.write(head)
        for blob in blobs:
            fh.write(blob)


def load_params(path) -> ParamFile:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:len(MAGIC)] != MAGIC:
        raise ValueError(f"{path}: not a model file (bad magic)")
    pos = len(MAGIC)
    (n,) = struct.unpack("<Q", raw[pos:pos + 8])
    pos += 8
    header = json.loads(raw[pos:pos + n].decode("utf-8"))
    pos += n
    arrays = {}
    for entry in header["params"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = 8 * count
        if pos + nbytes > len(raw):
            raise ValueError(f"{path}: truncated parameter buffer for {entry['name']}")
        arrays[entry["name"]] = np.frombuffer(raw, dtype="<f8", count=count, offset=pos).reshape(shape).astype(np.float64)
        pos += nbytes
    if pos != len(raw):
        raise ValueError(f"{path}: {len(raw) - pos} trailing bytes after parameters")
    return ParamFile(header, arrays)


def assign_params(root: Module, arrays: dict[str, np.ndarray]) -> None:
    for name, t in root.named_params():
        if name not in arrays:
            raise KeyError(f"parameter {name} missing from model file")
        if arrays[name].shape != t.shape:
            raise ShapeError(f"parameter {name}: file shape {arrays[name].shape} != model shape {t.shape}")
        t.data = arrays[name].copy()
