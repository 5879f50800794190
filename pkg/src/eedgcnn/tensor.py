"""Dense float64 tensors with a define-by-run reverse-mode tape.

A :class:`Tape` records every primitive applied to tensors that need
gradients; :meth:`Tape.backward` replays the records in reverse order and
accumulates gradients.  Tensors are rank 1 to 3; a scalar is shape ``(1,)``.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "ShapeError",
    "forward_op",
]


class ShapeError(ValueError):
    """Raised when an op receives inputs of incompatible shapes."""


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "name", "_tracked")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        if not 1 <= arr.ndim <= 3:
            raise ShapeError(f"tensor rank must be 1..3, got shape {arr.shape}")
        self.data = arr
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.name = name
        # True for leaves that want gradients and for outputs depending on them
        self._tracked = requires_grad

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f" {self.name}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # tanh form never overflows
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _shift_stack(x: np.ndarray, window: int, dilation: int) -> np.ndarray:
    """Stack zero-padded shifted copies: ``[..., T, in] -> [..., T, window*in]``."""
    half = (window - 1) // 2 * dilation
    T = x.shape[-2]
    pad = [(0, 0)] * x.ndim
    pad[-2] = (half, half)
    xp = np.pad(x, pad)
    cols = [xp[..., j * dilation: j * dilation + T, :] for j in range(window)]
    return np.concatenate(cols, axis=-1)


class Tape:
    """Records primitive ops for one forward pass.

    ``training`` switches dropout on; ``seed`` feeds the tape-local RNG used
    only for dropout masks.
    """

    def __init__(self, seed=None, training: bool = True):
        self.records: list[tuple[str, tuple[Tensor, ...], Tensor, object]] = []
        self.rng = np.random.default_rng(seed)
        self.training = training

    def __len__(self) -> int:
        return len(self.records)

    def _emit(self, kind: str, inputs: tuple[Tensor, ...], out_data: np.ndarray, backward_fn) -> Tensor:
        out = Tensor(out_data)
        if any(t._tracked for t in inputs):
            out._tracked = True
            self.records.append((kind, inputs, out, backward_fn))
        return out

    # -- elementwise -------------------------------------------------------

    def add(self, a: Tensor, b: Tensor) -> Tensor:
        a, b = _as_tensor(a), _as_tensor(b)
        if a.shape != b.shape:
            raise ShapeError(f"add: shapes {a.shape} and {b.shape} differ")
        return self._emit("add", (a, b), a.data + b.data, lambda g: (g, g))

    def mul(self, a: Tensor, b: Tensor) -> Tensor:
        a, b = _as_tensor(a), _as_tensor(b)
        if a.shape != b.shape:
            raise ShapeError(f"mul: shapes {a.shape} and {b.shape} differ")
        ad, bd = a.data, b.data
        return self._emit("mul", (a, b), ad * bd, lambda g: (g * bd, g * ad))

    def scale(self, a: Tensor, c: float) -> Tensor:
        a = _as_tensor(a)
        return self._emit("scale", (a,), a.data * c, lambda g: (g * c,))

    def sigmoid(self, a: Tensor) -> Tensor:
        a = _as_tensor(a)
        s = _sigmoid(a.data)
        return self._emit("sigmoid", (a,), s, lambda g: (g * s * (1.0 - s),))

    def relu(self, a: Tensor) -> Tensor:
        a = _as_tensor(a)
        on = a.data > 0
        return self._emit("relu", (a,), np.where(on, a.data, 0.0), lambda g: (g * on,))

    def sum(self, a: Tensor) -> Tensor:
        a = _as_tensor(a)
        shape = a.shape
        return self._emit("sum", (a,), np.array([a.data.sum()]),
                          lambda g: (np.full(shape, g[0]),))

    def mask(self, a: Tensor, keep: np.ndarray) -> Tensor:
        """Zero whole feature rows: ``keep`` has the shape of ``a`` minus the last axis."""
        a = _as_tensor(a)
        keep = np.asarray(keep, dtype=np.float64)
        if keep.shape != a.shape[:-1]:
            raise ShapeError(f"mask: mask shape {keep.shape} does not match {a.shape[:-1]}")
        m = keep[..., None]
        return self._emit("mask", (a,), a.data * m, lambda g: (g * m,))

    def dropout(self, a: Tensor, p: float) -> Tensor:
        """Inverted dropout; identity when not training or ``p == 0``."""
        a = _as_tensor(a)
        if not 0.0 <= p < 1.0:
            raise ValueError(f"dropout: p must lie in [0, 1), got {p}")
        if not self.training or p == 0.0:
            return a
        m = (self.rng.random(a.shape) >= p) / (1.0 - p)
        return self._emit("dropout", (a,), a.data * m, lambda g: (g * m,))

    # -- structural ----------------------------------------------------------

    def concat(self, parts: list[Tensor], axis: int = -1) -> Tensor:
        parts = [_as_tensor(p) for p in parts]
        ndim = parts[0].data.ndim
        ax = axis % ndim
        for p in parts[1:]:
            if p.data.ndim != ndim or p.shape[:ax] + p.shape[ax + 1:] != parts[0].shape[:ax] + parts[0].shape[ax + 1:]:
                raise ShapeError(f"concat: shapes {[q.shape for q in parts]} disagree off axis {ax}")
        bounds = np.cumsum([0] + [p.shape[ax] for p in parts])

        def back(g):
            idx = [slice(None)] * ndim
            out = []
            for lo, hi in zip(bounds[:-1], bounds[1:]):
                idx[ax] = slice(lo, hi)
                out.append(g[tuple(idx)])
            return tuple(out)

        return self._emit("concat", tuple(parts), np.concatenate([p.data for p in parts], axis=ax), back)

    def reshape(self, a: Tensor, shape) -> Tensor:
        a = _as_tensor(a)
        old = a.shape
        try:
            out = a.data.reshape(shape)
        except ValueError as exc:
            raise ShapeError(f"reshape: cannot view {old} as {tuple(shape)}") from exc
        if not 1 <= out.ndim <= 3:
            raise ShapeError(f"reshape: rank of {out.shape} outside 1..3")
        return self._emit("reshape", (a,), out, lambda g: (g.reshape(old),))

    def embedding(self, table: Tensor, ids, allow_pad: bool = False) -> Tensor:
        """Gather rows of a 2-D ``table``.

        With ``allow_pad`` an id of -1 yields a zero row; any other
        out-of-range id is an error.
        """
        if table.data.ndim != 2:
            raise ShapeError(f"embedding: table must be rank 2, got {table.shape}")
        ids = np.asarray(ids)
        if ids.dtype.kind not in "iu":
            raise ShapeError(f"embedding: ids must be integers, got dtype {ids.dtype}")
        n, dim = table.shape
        lo = -1 if allow_pad else 0
        if ids.size and (ids.min() < lo or ids.max() >= n):
            bad = ids[(ids < lo) | (ids >= n)]
            raise IndexError(f"embedding: id {int(bad[0])} out of range for table of {n} rows")
        if ids.ndim + 1 > 3:
            raise ShapeError(f"embedding: ids of shape {ids.shape} give rank > 3")
        if allow_pad:
            pad = ids < 0
            safe = np.where(pad, 0, ids)
            out = table.data[safe]
            out[pad] = 0.0
        else:
            pad = None
            safe = ids
            out = table.data[ids]

        def back(g):
            gt = np.zeros_like(table.data)
            flat_ids = safe.reshape(-1)
            flat_g = g.reshape(-1, dim)
            if pad is not None:
                keep = ~pad.reshape(-1)
                flat_ids, flat_g = flat_ids[keep], flat_g[keep]
            np.add.at(gt, flat_ids, flat_g)
            return (gt,)

        return self._emit("embedding", (table,), out, back)

    # -- linear maps ---------------------------------------------------------

    def affine(self, x: Tensor, W: Tensor, b: Tensor | None = None) -> Tensor:
        """``x @ W + b`` over the last axis; the bias broadcasts over positions."""
        x = _as_tensor(x)
        if W.data.ndim != 2 or x.shape[-1] != W.shape[0]:
            raise ShapeError(f"affine: input {x.shape} incompatible with weight {W.shape}")
        if b is not None and b.shape != (W.shape[1],):
            raise ShapeError(f"affine: bias {b.shape} does not match weight {W.shape}")
        xd, Wd = x.data, W.data
        out = xd @ Wd
        if b is not None:
            out = out + b.data
        in_dim = W.shape[0]

        def back(g):
            g2 = g.reshape(-1, g.shape[-1])
            gx = g @ Wd.T if x._tracked else None
            gW = xd.reshape(-1, in_dim).T @ g2 if W._tracked else None
            if b is None:
                return gx, gW
            return gx, gW, (g2.sum(axis=0) if b._tracked else None)

        inputs = (x, W) if b is None else (x, W, b)
        return self._emit("affine", inputs, out, back)

    def conv1d(self, x: Tensor, W: Tensor, b: Tensor | None = None, dilation: int = 1) -> Tensor:
        """Same-length dilated 1-D convolution with zero padding.

        ``x`` is ``[T, in]`` or ``[B, T, in]``; ``W`` is ``[k, in, out]`` with
        odd ``k``.  ``out[t] = b + sum_j x[t + (j - (k-1)/2) * d] @ W[j]``.
        """
        x = _as_tensor(x)
        if W.data.ndim != 3:
            raise ShapeError(f"conv1d: weight must be [k, in, out], got {W.shape}")
        k, in_dim, out_dim = W.shape
        if k % 2 == 0:
            raise ShapeError(f"conv1d: window {k} must be odd")
        if dilation < 1:
            raise ShapeError(f"conv1d: dilation {dilation} must be positive")
        if x.data.ndim not in (2, 3) or x.shape[-1] != in_dim:
            raise ShapeError(f"conv1d: input {x.shape} incompatible with weight {W.shape}")
        if b is not None and b.shape != (out_dim,):
            raise ShapeError(f"conv1d: bias {b.shape} does not match out channels {out_dim}")
        cols = _shift_stack(x.data, k, dilation)
        W2 = W.data.reshape(k * in_dim, out_dim)
        out = cols @ W2
        if b is not None:
            out = out + b.data
        T = x.shape[-2]
        half = (k - 1) // 2 * dilation

        def back(g):
            g2 = g.reshape(-1, out_dim)
            gW = (cols.reshape(-1, k * in_dim).T @ g2).reshape(W.shape) if W._tracked else None
            gx = None
            if x._tracked:
                gcols = g @ W2.T
                pad_shape = list(x.shape)
                pad_shape[-2] = T + 2 * half
                gxp = np.zeros(pad_shape)
                for j in range(k):
                    gxp[..., j * dilation: j * dilation + T, :] += gcols[..., j * in_dim:(j + 1) * in_dim]
                gx = gxp[..., half: half + T, :]
            if b is None:
                return gx, gW
            return gx, gW, (g2.sum(axis=0) if b._tracked else None)

        inputs = (x, W) if b is None else (x, W, b)
        return self._emit("conv1d", inputs, out, back)

    # -- loss ----------------------------------------------------------------

    def softmax_xent(self, logits: Tensor, targets, reduction: str = "sum") -> Tensor:
        """Cross-entropy of row-wise softmax against one-hot ``targets``.

        Summed over rows by default; ``reduction="mean"`` divides by the row count.
        """
        logits = _as_tensor(logits)
        t = np.asarray(targets, dtype=np.float64)
        if logits.data.ndim != 2 or t.shape != logits.shape:
            raise ShapeError(f"softmax_xent: logits {logits.shape} vs targets {t.shape}")
        if t.size and not (np.all((t == 0) | (t == 1)) and np.all(t.sum(axis=1) == 1)):
            bad = int(np.flatnonzero(~np.all((t == 0) | (t == 1), axis=1) | (t.sum(axis=1) != 1))[0])
            raise ValueError(f"softmax_xent: target row {bad} is not one-hot")
        if reduction not in ("sum", "mean"):
            raise ValueError(f"softmax_xent: unknown reduction {reduction!r}")
        z = logits.data - logits.data.max(axis=1, keepdims=True)
        logz = np.log(np.exp(z).sum(axis=1, keepdims=True))
        logp = z - logz
        loss = -(t * logp).sum()
        n = logits.shape[0]
        c = 1.0 / n if reduction == "mean" and n else 1.0

        def back(g):
            return ((np.exp(logp) - t) * (g[0] * c),)

        return self._emit("softmax_xent", (logits,), np.array([loss * c]), back)

    # -- reverse pass --------------------------------------------------------

    def backward(self, loss: Tensor) -> None:
        """Populate ``.grad`` of every tracked tensor reachable from ``loss``.

        Leaf gradients accumulate into any existing ``.grad``.
        """
        if loss.data.size != 1:
            raise ShapeError(f"backward: loss must be scalar, got shape {loss.shape}")
        if not loss._tracked:
            raise ValueError("backward: loss does not depend on any tensor requiring grad")
        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        for _kind, inputs, out, fn in reversed(self.records):
            g = grads.get(id(out))
            if g is None:
                continue
            out.grad = g
            for inp, gi in zip(inputs, fn(g)):
                if gi is None or not inp._tracked:
                    continue
                key = id(inp)
                if key in grads:
                    grads[key] = grads[key] + gi
                else:
                    grads[key] = gi
        for _kind, inputs, _out, _fn in self.records:
            for inp in inputs:
                if inp.requires_grad and id(inp) in grads:
                    g = grads.pop(id(inp))
                    inp.grad = g.copy() if inp.grad is None else inp.grad + g


_OPS = {
    "add", "mul", "scale", "sigmoid", "relu", "sum", "mask", "dropout", "concat",
    "reshape", "embedding", "affine", "conv1d", "softmax_xent",
}


def forward_op(tape: Tape, kind: str, *inputs, **params) -> Tensor:
    """Dispatch a primitive by name, e.g. ``forward_op(tape, "conv1d", x, W, b, dilation=2)``."""
    if kind not in _OPS:
        raise ValueError(f"unknown op kind {kind!r}")
    return getattr(tape, kind)(*inputs, **params)
