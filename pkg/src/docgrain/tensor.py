"""Dense float64 tensors with reverse-mode differentiation.

Every operation records a backward closure on a dynamically built graph;
calling ``backward()`` on a scalar walks the graph in reverse topological
order. The numerical heavy lifting is delegated to numpy, the tape and all
gradients are implemented here. A single graph is confined to one thread.
"""

from __future__ import annotations

import contextlib
import math
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import erf

_grad_enabled = True

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the context (evaluation fast path)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """N-dimensional float64 array with an optional gradient buffer."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def backward(self) -> None:
        """Reverse-mode sweep from a scalar output."""
        if self.data.size != 1:
            raise ValueError(f"backward() requires a scalar, got shape {self.shape}")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self._accumulate(np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # Operator sugar; all routing goes through the module-level ops.
    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return add(self, scale(_as_tensor(other), -1.0))

    def __rsub__(self, other):
        return add(_as_tensor(other), scale(self, -1.0))

    def __neg__(self):
        return scale(self, -1.0)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, 1.0 / float(other))
        raise TypeError("tensor division only supports scalars")

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self):
        return sum_all(self)

    def mean(self):
        return scale(sum_all(self), 1.0 / self.data.size)

    def transpose(self):
        return transpose(self)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: tuple[Tensor, ...], backward: Callable[[np.ndarray], None]) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a gradient down to the shape it was broadcast from."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a: Tensor, b: Tensor) -> Tensor:
    try:
        data = a.data + b.data
    except ValueError:
        raise ValueError(f"shape mismatch in add: {a.shape} vs {b.shape}") from None

    def backward(g: np.ndarray) -> None:
        a._accumulate(_unbroadcast(g, a.shape))
        b._accumulate(_unbroadcast(g, b.shape))

    return _make(data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    try:
        data = a.data * b.data
    except ValueError:
        raise ValueError(f"shape mismatch in mul: {a.shape} vs {b.shape}") from None

    def backward(g: np.ndarray) -> None:
        a._accumulate(_unbroadcast(g * b.data, a.shape))
        b._accumulate(_unbroadcast(g * a.data, b.shape))

    return _make(data, (a, b), backward)


def scale(a: Tensor, s: float) -> Tensor:
    data = a.data * s

    def backward(g: np.ndarray) -> None:
        a._accumulate(g * s)

    return _make(data, (a,), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"shape mismatch in matmul: {a.shape} vs {b.shape}")
    data = a.data @ b.data

    def backward(g: np.ndarray) -> None:
        a._accumulate(g @ b.data.T)
        b._accumulate(a.data.T @ g)

    return _make(data, (a, b), backward)


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ValueError(f"transpose expects a matrix, got shape {a.shape}")

    def backward(g: np.ndarray) -> None:
        a._accumulate(g.T)

    return _make(a.data.T.copy(), (a,), backward)


def sum_all(a: Tensor) -> Tensor:
    def backward(g: np.ndarray) -> None:
        a._accumulate(np.full_like(a.data, float(g)))

    return _make(np.asarray(a.data.sum()), (a,), backward)


def gather(table: Tensor, idx) -> Tensor:
    """Rows (or scalars) of ``table`` selected along axis 0 by ``idx``.

    ``idx`` may be any integer array shape; the backward pass scatter-adds
    into the table, so repeated indices accumulate.
    """
    idx = np.asarray(idx, dtype=np.int64)
    n = table.shape[0]
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise ValueError(f"gather index out of range for table with {n} rows")
    data = table.data[idx]

    def backward(g: np.ndarray) -> None:
        if table.grad is None:
            table.grad = np.zeros_like(table.data)
        np.add.at(table.grad, idx, g)

    return _make(data, (table,), backward)


def gather_col(table: Tensor, idx, col: int) -> Tensor:
    """Entries ``table[idx, col]`` for an integer index array ``idx``.

    Used for per-head bias lookups: the table holds one column per head.
    """
    idx = np.asarray(idx, dtype=np.int64)
    rows, cols = table.shape
    if not 0 <= col < cols:
        raise ValueError(f"column {col} out of range for table with {cols} columns")
    if idx.size and (idx.min() < 0 or idx.max() >= rows):
        raise ValueError(f"gather_col index out of range for table with {rows} rows")
    data = table.data[idx, col]

    def backward(g: np.ndarray) -> None:
        if table.grad is None:
            table.grad = np.zeros_like(table.data)
        # bincount is much faster than np.add.at for large index matrices
        table.grad[:, col] += np.bincount(idx.ravel(), weights=g.ravel(), minlength=rows)

    return _make(data, (table,), backward)


def concat_rows(tensors: Sequence[Tensor]) -> Tensor:
    if not tensors:
        raise ValueError("concat_rows of empty sequence")
    data = np.concatenate([t.data for t in tensors], axis=0)
    sizes = [t.shape[0] for t in tensors]

    def backward(g: np.ndarray) -> None:
        off = 0
        for t, size in zip(tensors, sizes):
            t._accumulate(g[off : off + size])
            off += size

    return _make(data, tuple(tensors), backward)


def concat_cols(tensors: Sequence[Tensor]) -> Tensor:
    if not tensors:
        raise ValueError("concat_cols of empty sequence")
    data = np.concatenate([t.data for t in tensors], axis=1)
    sizes = [t.shape[1] for t in tensors]

    def backward(g: np.ndarray) -> None:
        off = 0
        for t, size in zip(tensors, sizes):
            t._accumulate(g[:, off : off + size])
            off += size

    return _make(data, tuple(tensors), backward)


def slice_rows(a: Tensor, start: int, stop: int) -> Tensor:
    def backward(g: np.ndarray) -> None:
        full = np.zeros_like(a.data)
        full[start:stop] = g
        a._accumulate(full)

    return _make(a.data[start:stop].copy(), (a,), backward)


def slice_cols(a: Tensor, start: int, stop: int) -> Tensor:
    def backward(g: np.ndarray) -> None:
        full = np.zeros_like(a.data)
        full[:, start:stop] = g
        a._accumulate(full)

    return _make(a.data[:, start:stop].copy(), (a,), backward)


def softmax(a: Tensor) -> Tensor:
    """Row-wise softmax along the last axis, max-shifted for stability."""
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)

    def backward(g: np.ndarray) -> None:
        dot = (g * y).sum(axis=-1, keepdims=True)
        a._accumulate(y * (g - dot))

    return _make(y, (a,), backward)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-6) -> Tensor:
    """Per-row standardization along the last axis, then affine."""
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered**2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    norm = centered * inv
    data = norm * gain.data + bias.data
    d = x.shape[-1]

    def backward(g: np.ndarray) -> None:
        gnorm = g * gain.data
        gvar = (gnorm * centered).sum(axis=-1, keepdims=True) * (-0.5) * inv**3
        gmu = -(gnorm * inv).sum(axis=-1, keepdims=True) + gvar * (-2.0 / d) * centered.sum(axis=-1, keepdims=True)
        gx = gnorm * inv + gvar * 2.0 * centered / d + gmu / d
        x._accumulate(gx)
        gain._accumulate(_unbroadcast(g * norm, gain.shape))
        bias._accumulate(_unbroadcast(g, bias.shape))

    return _make(data, (x, gain, bias), backward)


def gelu(a: Tensor) -> Tensor:
    """Exact (erf-based) GELU."""
    cdf = 0.5 * (1.0 + erf(a.data * _INV_SQRT2))
    data = a.data * cdf

    def backward(g: np.ndarray) -> None:
        pdf = np.exp(-0.5 * a.data**2) * _INV_SQRT2PI
        a._accumulate(g * (cdf + a.data * pdf))

    return _make(data, (a,), backward)


def relu(a: Tensor) -> Tensor:
    data = np.maximum(a.data, 0.0)

    def backward(g: np.ndarray) -> None:
        a._accumulate(g * (a.data > 0.0))

    return _make(data, (a,), backward)


def dropout(a: Tensor, p: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout; identity when p == 0 so defaults stay deterministic."""
    if p <= 0.0:
        return a
    if p >= 1.0:
        raise ValueError("dropout rate must be < 1")
    mask = (rng.random(a.shape) >= p) / (1.0 - p)

    def backward(g: np.ndarray) -> None:
        a._accumulate(g * mask)

    return _make(a.data * mask, (a,), backward)


IGNORE_INDEX = -100


def cross_entropy(logits: Tensor, targets, ignore_index: int = IGNORE_INDEX) -> Tensor:
    """Mean negative log-softmax over the non-ignored positions."""
    targets = np.asarray(targets, dtype=np.int64)
    if logits.data.ndim != 2 or targets.shape != (logits.shape[0],):
        raise ValueError(f"cross_entropy shapes: logits {logits.shape}, targets {targets.shape}")
    keep = targets != ignore_index
    count = int(keep.sum())
    if count == 0:
        raise ValueError("cross_entropy: all positions ignored")
    n_classes = logits.shape[1]
    if targets[keep].min() < 0 or targets[keep].max() >= n_classes:
        raise ValueError(f"target out of range for {n_classes} classes")
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(logits.shape[0])
    losses = lse - shifted[rows, targets.clip(0)]
    data = np.asarray(losses[keep].mean())

    def backward(g: np.ndarray) -> None:
        p = np.exp(shifted)
        p /= p.sum(axis=1, keepdims=True)
        p[rows[keep], targets[keep]] -= 1.0
        p[~keep] = 0.0
        logits._accumulate(p * (float(g) / count))

    return _make(data, (logits,), backward)


def grad_check(
    f: Callable[[Tensor], Tensor],
    theta: Tensor,
    h: float = 1e-5,
    coords: Iterable[tuple[int, ...]] | None = None,
) -> float:
    """Max relative error between reverse-mode and central differences.

    ``f`` must be a deterministic scalar-valued function of ``theta``.
    ``coords`` restricts which entries are perturbed (all by default);
    the relative error denominator is max(|analytic|, |numeric|, 1e-8).
    """
    theta.zero_grad()
    out = f(theta)
    if not np.isfinite(out.data).all():
        raise ValueError("grad_check: function value is not finite")
    out.backward()
    analytic = np.zeros_like(theta.data) if theta.grad is None else theta.grad.copy()

    if coords is None:
        coords = list(np.ndindex(*theta.shape)) if theta.shape else [()]
    worst = 0.0
    flat = theta.data
    with no_grad():
        for c in coords:
            saved = flat[c]
            flat[c] = saved + h
            up = float(f(theta).data)
            flat[c] = saved - h
            down = float(f(theta).data)
            flat[c] = saved
            numeric = (up - down) / (2.0 * h)
            a = float(analytic[c])
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, err)
    theta.zero_grad()
    return worst
