"""Dense float64 tensors with tape-based reverse-mode differentiation.

The primitive set is deliberately small: matmul, add, mul, concat, slice
(last axis), tanh, sigmoid, softmax over the last axis, log, embedding
lookup, and dropout-mask application.  Recurrent cells, attention, and
losses are all composed from these.

A `Tape` records primitives in execution order, which is a topological
order by construction; the backward pass walks the record once in
reverse.  With no tape active the same primitives run as plain float64
numpy, so decoding and scoring share the exact arithmetic of training.
Tapes are single-owner and single-threaded; parallelism happens across
model instances, never inside one tape.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericError, ShapeError, ValidationError


class Tensor:
    """A float64 array plus a flag saying whether gradients flow into it.

    Tensors recorded on a tape are treated as frozen values; parameter
    updates mutate `.data` in place only between training steps.
    """

    __slots__ = ("data", "track")

    def __init__(self, data, track: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.track = track

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, track={self.track})"


_active_tape = None


class Tape:
    """Ordered record of primitive applications, replayable as adjoints.

    Entries are appended as primitives execute, so every operation's
    inputs appear before it; `gradients` visits each entry exactly once.
    """

    __slots__ = ("_records",)

    def __init__(self):
        self._records: list[tuple[Tensor, tuple[Tensor, ...], object]] = []

    def __enter__(self) -> "Tape":
        global _active_tape
        if _active_tape is not None:
            raise ValidationError("tapes cannot be nested")
        _active_tape = self
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        global _active_tape
        _active_tape = None

    def __len__(self) -> int:
        return len(self._records)

    def gradients(self, loss: Tensor, params: list[Tensor]) -> list[np.ndarray]:
        """Return d(loss)/d(p) for each p in `params`.

        Parameters the loss never touched get zero gradients.  Gradient
        arrays may alias each other; treat them as read-only.
        """
        if loss.data.size != 1:
            raise ValidationError(
                f"loss must be scalar, got shape {loss.data.shape}"
            )
        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        for out, inputs, backward in reversed(self._records):
            g = grads.pop(id(out), None)
            if g is None:
                continue
            for t, gin in zip(inputs, backward(g)):
                if gin is None or not t.track:
                    continue
                acc = grads.get(id(t))
                grads[id(t)] = gin if acc is None else acc + gin
        return [
            grads.get(id(p), np.zeros_like(p.data)).reshape(p.data.shape)
            for p in params
        ]


def _record(out: Tensor, inputs: tuple[Tensor, ...], backward) -> None:
    if _active_tape is not None and out.track:
        _active_tape._records.append((out, inputs, backward))


def _finite(arr: np.ndarray, op: str) -> None:
    if not np.isfinite(arr).all():
        raise NumericError(f"non-finite value produced by {op}")


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a gradient down to `shape`, inverting numpy broadcasting."""
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(
            f"matmul needs 2-D operands, got {a.data.shape} @ {b.data.shape}"
        )
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul mismatch: {a.data.shape} @ {b.data.shape}")
    out = Tensor(a.data @ b.data, track=a.track or b.track)
    _finite(out.data, "matmul")

    def backward(g):
        return (
            g @ b.data.T if a.track else None,
            a.data.T @ g if b.track else None,
        )

    _record(out, (a, b), backward)
    return out


def add(a: Tensor, b: Tensor) -> Tensor:
    try:
        data = a.data + b.data
    except ValueError:
        raise ShapeError(f"add mismatch: {a.data.shape} + {b.data.shape}")
    out = Tensor(data, track=a.track or b.track)
    _finite(out.data, "add")

    def backward(g):
        return (
            _unbroadcast(g, a.data.shape) if a.track else None,
            _unbroadcast(g, b.data.shape) if b.track else None,
        )

    _record(out, (a, b), backward)
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    try:
        data = a.data * b.data
    except ValueError:
        raise ShapeError(f"mul mismatch: {a.data.shape} * {b.data.shape}")
    out = Tensor(data, track=a.track or b.track)
    _finite(out.data, "mul")

    def backward(g):
        return (
            _unbroadcast(g * b.data, a.data.shape) if a.track else None,
            _unbroadcast(g * a.data, b.data.shape) if b.track else None,
        )

    _record(out, (a, b), backward)
    return out


def concat(parts: list[Tensor]) -> Tensor:
    """Concatenate along the last axis."""
    if not parts:
        raise ShapeError("concat of zero tensors")
    datas = [p.data for p in parts]
    lead = datas[0].shape[:-1]
    if any(d.shape[:-1] != lead for d in datas):
        raise ShapeError(
            "concat leading dims differ: " + str([d.shape for d in datas])
        )
    out = Tensor(np.concatenate(datas, axis=-1),
                 track=any(p.track for p in parts))
    _finite(out.data, "concat")
    sizes = [d.shape[-1] for d in datas]
    splits = np.cumsum(sizes[:-1])

    def backward(g):
        pieces = np.split(g, splits, axis=-1)
        return [p if t.track else None for t, p in zip(parts, pieces)]

    _record(out, tuple(parts), backward)
    return out


def slice_last(x: Tensor, start: int, stop: int) -> Tensor:
    """Take columns [start:stop) of the last axis."""
    width = x.data.shape[-1]
    if not (0 <= start <= stop <= width):
        raise ShapeError(f"slice [{start}:{stop}) out of range for width {width}")
    out = Tensor(x.data[..., start:stop], track=x.track)

    def backward(g):
        full = np.zeros_like(x.data)
        full[..., start:stop] = g
        return (full,)

    _record(out, (x,), backward)
    return out


def tanh(x: Tensor) -> Tensor:
    out = Tensor(np.tanh(x.data), track=x.track)
    _finite(out.data, "tanh")

    def backward(g):
        return (g * (1.0 - out.data * out.data),)

    _record(out, (x,), backward)
    return out


def sigmoid(x: Tensor) -> Tensor:
    d = x.data
    # Stable in both tails.
    with np.errstate(over="ignore"):
        data = np.where(d >= 0, 1.0 / (1.0 + np.exp(-d)),
                        np.exp(np.minimum(d, 0)) / (1.0 + np.exp(np.minimum(d, 0))))
    out = Tensor(data, track=x.track)
    _finite(out.data, "sigmoid")

    def backward(g):
        return (g * out.data * (1.0 - out.data),)

    _record(out, (x,), backward)
    return out


def log(x: Tensor) -> Tensor:
    with np.errstate(divide="ignore", invalid="ignore"):
        data = np.log(x.data)
    out = Tensor(data, track=x.track)
    _finite(out.data, "log")

    def backward(g):
        return (g / x.data,)

    _record(out, (x,), backward)
    return out


def softmax(x: Tensor) -> Tensor:
    """Softmax over the last axis; rows sum to one."""
    m = x.data.max(axis=-1, keepdims=True)
    e = np.exp(x.data - m)
    data = e / e.sum(axis=-1, keepdims=True)
    out = Tensor(data, track=x.track)
    _finite(out.data, "softmax")

    def backward(g):
        dot = (g * out.data).sum(axis=-1, keepdims=True)
        return ((g - dot) * out.data,)

    _record(out, (x,), backward)
    return out


def embedding_lookup(table: Tensor, ids: np.ndarray) -> Tensor:
    """Gather rows of `table` by integer id; gradients scatter back."""
    ids = np.asarray(ids)
    if ids.dtype.kind not in "iu":
        raise ShapeError("embedding ids must be integers")
    if ids.size and (ids.min() < 0 or ids.max() >= table.data.shape[0]):
        raise ShapeError("embedding id out of range")
    out = Tensor(table.data[ids], track=table.track)
    _finite(out.data, "embedding-lookup")

    def backward(g):
        full = np.zeros_like(table.data)
        np.add.at(full, ids, g)
        return (full,)

    _record(out, (table,), backward)
    return out


def dropout_apply(x: Tensor, mask: np.ndarray) -> Tensor:
    """Apply a precomputed inverted-dropout mask (values 0 or 1/keep)."""
    if mask.shape != x.data.shape:
        raise ShapeError(
            f"dropout mask shape {mask.shape} != input {x.data.shape}"
        )
    out = Tensor(x.data * mask, track=x.track)
    _finite(out.data, "dropout-mask-apply")

    def backward(g):
        return (g * mask,)

    _record(out, (x,), backward)
    return out


def dropout_mask(shape: tuple[int, ...], p: float,
                 rng: np.random.Generator) -> np.ndarray:
    """Inverted-dropout mask: keep with prob 1-p, scale kept units by
    1/(1-p) so inference needs no rescaling."""
    if not 0.0 <= p < 1.0:
        raise ValidationError(f"dropout probability must be in [0,1): {p}")
    if p == 0.0:
        return np.ones(shape)
    keep = rng.random(shape) >= p
    return keep / (1.0 - p)
