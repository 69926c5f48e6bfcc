"""Minimal reverse-mode autodiff over numpy arrays.

Provides the dense ops the helper model needs (each with forward value and
backward gradient), central finite-difference gradient checking, a decoupled
weight-decay Adam optimizer, and a versioned JSON checkpoint format.

Tensors are single-owner during backward passes; training code uses float32,
gradient checks run in float64.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

CHECKPOINT_FORMAT = "r2h-checkpoint"
CHECKPOINT_VERSION = 1


class NanGradientError(RuntimeError):
    """A parameter gradient contained NaN/Inf; the optimizer step was aborted."""

    def __init__(self, param_name: str):
        super().__init__(f"non-finite gradient for parameter {param_name!r}")
        self.param_name = param_name


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_backward", "_parents")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data)
        if self.data.dtype.kind != "f":
            self.data = self.data.astype(np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._backward = None
        self._parents: tuple[Tensor, ...] = ()

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar output")
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
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward()

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x))


def _wants_graph(*tensors: Tensor) -> bool:
    return any(t.requires_grad or t._parents for t in tensors)


def _accumulate(t: Tensor, grad: np.ndarray) -> None:
    if not (t.requires_grad or t._parents):
        return
    if t.grad is None:
        t.grad = grad.astype(t.data.dtype, copy=True)
    else:
        t.grad += grad


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _make(out_data: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    out = Tensor(out_data)
    if _wants_graph(*parents):
        out._parents = parents
        out._backward = backward
    return out


def add(a, b) -> Tensor:
    if isinstance(b, (int, float)):  # scalar path keeps the array dtype
        a = as_tensor(a)
        b = float(b)
        out_data = a.data + b

        def backward_scalar():
            _accumulate(a, out.grad)

        out = _make(out_data, (a,), backward_scalar)
        return out
    if isinstance(a, (int, float)):
        return add(b, a)
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data + b.data

    def backward():
        g = out.grad
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(g, b.data.shape))

    out = _make(out_data, (a, b), backward)
    return out


def mul(a, b) -> Tensor:
    if isinstance(b, (int, float)):  # scalar path keeps the array dtype
        a = as_tensor(a)
        b = float(b)
        out_data = a.data * b

        def backward_scalar():
            _accumulate(a, out.grad * b)

        out = _make(out_data, (a,), backward_scalar)
        return out
    if isinstance(a, (int, float)):
        return mul(b, a)
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data * b.data

    def backward():
        g = out.grad
        _accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    out = _make(out_data, (a, b), backward)
    return out


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data @ b.data

    def backward():
        g = out.grad
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        _accumulate(a, _unbroadcast(ga, a.data.shape))
        _accumulate(b, _unbroadcast(gb, b.data.shape))

    out = _make(out_data, (a, b), backward)
    return out


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    a = as_tensor(a)
    out_data = a.data.reshape(shape)

    def backward():
        _accumulate(a, out.grad.reshape(a.data.shape))

    out = _make(out_data, (a,), backward)
    return out


def transpose(a: Tensor, axes: tuple[int, ...]) -> Tensor:
    a = as_tensor(a)
    out_data = np.transpose(a.data, axes)
    inverse = np.argsort(axes)

    def backward():
        _accumulate(a, np.transpose(out.grad, inverse))

    out = _make(out_data, (a,), backward)
    return out


def concat(tensors: list[Tensor], axis: int) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward():
        g = out.grad
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            index = [slice(None)] * g.ndim
            index[axis] = slice(lo, hi)
            _accumulate(t, g[tuple(index)])

    out = _make(out_data, tuple(tensors), backward)
    return out


def sum_(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    out_data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward():
        g = out.grad
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(a, np.broadcast_to(g, a.data.shape).copy())

    out = _make(out_data, (a,), backward)
    return out


def mean_(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    count = a.data.size if axis is None else a.data.shape[axis]
    return mul(sum_(a, axis=axis, keepdims=keepdims), 1.0 / count)


def sigmoid(a: Tensor) -> Tensor:
    a = as_tensor(a)
    x = a.data
    out_data = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                        np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))

    def backward():
        _accumulate(a, out.grad * out_data * (1.0 - out_data))

    out = _make(out_data, (a,), backward)
    return out


def log_sigmoid(a: Tensor) -> Tensor:
    a = as_tensor(a)
    x = a.data
    out_data = np.where(x >= 0, -np.log1p(np.exp(-np.abs(x))),
                        x - np.log1p(np.exp(-np.abs(x))))

    def backward():
        sig = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                       np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
        _accumulate(a, out.grad * (1.0 - sig))

    out = _make(out_data, (a,), backward)
    return out


def abs_(a: Tensor) -> Tensor:
    a = as_tensor(a)
    out_data = np.abs(a.data)

    def backward():
        _accumulate(a, out.grad * np.sign(a.data))

    out = _make(out_data, (a,), backward)
    return out


_GELU_K = math.sqrt(2.0 / math.pi)


def gelu(a: Tensor) -> Tensor:
    """Tanh-approximation GELU."""
    a = as_tensor(a)
    x = a.data
    inner = _GELU_K * (x + 0.044715 * (x * x * x))
    t = np.tanh(inner)
    out_data = 0.5 * x * (1.0 + t)

    def backward():
        d_inner = _GELU_K * (1.0 + (3 * 0.044715) * (x * x))
        grad = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * d_inner
        _accumulate(a, out.grad * grad)

    out = _make(out_data, (a,), backward)
    return out


def layer_norm(a: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale and shift."""
    a, gain, bias = as_tensor(a), as_tensor(gain), as_tensor(bias)
    x = a.data
    mu = x.mean(axis=-1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv
    out_data = xhat * gain.data + bias.data

    def backward():
        g = out.grad
        _accumulate(gain, _unbroadcast(g * xhat, gain.data.shape))
        _accumulate(bias, _unbroadcast(g, bias.data.shape))
        dxhat = g * gain.data
        dx = (dxhat - dxhat.mean(axis=-1, keepdims=True)
              - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)) * inv
        _accumulate(a, dx)

    out = _make(out_data, (a, gain, bias), backward)
    return out


def _masked_softmax_lastaxis(x: np.ndarray) -> np.ndarray:
    rowmax = np.max(x, axis=-1, keepdims=True)
    shift = np.where(np.isfinite(rowmax), rowmax, 0.0)
    e = np.exp(x - shift)
    e = np.where(np.isfinite(x), e, 0.0)
    total = e.sum(axis=-1, keepdims=True)
    return e / np.where(total == 0.0, 1.0, total)


def softmax_with_additive_mask(scores: Tensor, mask) -> Tensor:
    """Softmax over the last axis of scores + mask; -inf mask entries get probability 0.

    Rows whose entries are all -inf produce an all-zero row instead of NaN.
    """
    summed = add(scores, mask)
    a = summed
    probs = _masked_softmax_lastaxis(a.data)

    def backward():
        g = out.grad
        dot = (g * probs).sum(axis=-1, keepdims=True)
        _accumulate(a, probs * (g - dot))

    out = _make(probs, (a,), backward)
    return out


def embedding_lookup(table: Tensor, ids: np.ndarray) -> Tensor:
    """Gather rows of table by integer ids of any shape."""
    table = as_tensor(table)
    ids = np.asarray(ids, dtype=np.int64)
    out_data = table.data[ids]

    def backward():
        g = out.grad.reshape(-1, table.data.shape[-1])
        acc = np.zeros_like(table.data)
        np.add.at(acc, ids.ravel(), g)
        _accumulate(table, acc)

    out = _make(out_data, (table,), backward)
    return out


def take_rows(a: Tensor, idx: np.ndarray) -> Tensor:
    """Select rows of a 2D tensor."""
    a = as_tensor(a)
    idx = np.asarray(idx, dtype=np.int64)
    out_data = a.data[idx]

    def backward():
        acc = np.zeros_like(a.data)
        np.add.at(acc, idx, out.grad)
        _accumulate(a, acc)

    out = _make(out_data, (a,), backward)
    return out


def cross_entropy(logits: Tensor, target_index, reduction: str = "mean") -> Tensor:
    """Cross-entropy of (N, V) logits against N integer targets.

    Log-sum-exp stabilized; a single (V,) row with an int target also works.
    Reduction is "mean" or "sum" over the rows.
    """
    if reduction not in ("mean", "sum"):
        raise ValueError(f"unknown reduction {reduction!r}")
    logits = as_tensor(logits)
    squeeze = logits.data.ndim == 1
    x = logits.data.reshape(1, -1) if squeeze else logits.data
    targets = np.atleast_1d(np.asarray(target_index, dtype=np.int64))
    if x.shape[0] != targets.shape[0]:
        raise ValueError("logit rows and target count differ")
    rowmax = x.max(axis=-1, keepdims=True)
    shifted = x - rowmax
    lse = np.log(np.exp(shifted).sum(axis=-1)) + rowmax[:, 0]
    picked = x[np.arange(x.shape[0]), targets]
    losses = lse - picked
    scale = 1.0 / x.shape[0] if reduction == "mean" else 1.0
    out_data = np.asarray(losses.sum() * scale, dtype=x.dtype)

    def backward():
        g = out.grad
        probs = np.exp(shifted) / np.exp(shifted).sum(axis=-1, keepdims=True)
        probs[np.arange(x.shape[0]), targets] -= 1.0
        grad = probs * (g * scale)
        _accumulate(logits, grad.reshape(logits.data.shape))

    out = _make(out_data, (logits,), backward)
    return out


def pad_block(a: Tensor, size: int, offset: int) -> Tensor:
    """Embed the trailing (T, T) block of a into a (size, size) zero matrix at (offset, offset).

    Works on (T, T) and batched (B, T, T) inputs.
    """
    a = as_tensor(a)
    t = a.data.shape[-1]
    out_shape = a.data.shape[:-2] + (size, size)
    out_data = np.zeros(out_shape, dtype=a.data.dtype)
    out_data[..., offset:offset + t, offset:offset + t] = a.data

    def backward():
        _accumulate(a, out.grad[..., offset:offset + t, offset:offset + t])

    out = _make(out_data, (a,), backward)
    return out


def grad_check(fn, wrt: list[Tensor], eps: float = 1e-5, rel_floor: float = 1e-5,
               max_entries: int | None = None, rng: np.random.Generator | None = None) -> float:
    """Max relative error between fn's analytic gradients and central differences.

    fn must rebuild and return a scalar Tensor from the wrt tensors each call.
    max_entries subsamples indices per tensor for large parameters.
    """
    for t in wrt:
        t.zero_grad()
        t.requires_grad = True
    out = fn()
    out.backward()
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in wrt]
    worst = 0.0
    for t, a in zip(wrt, analytic):
        indices = list(np.ndindex(t.data.shape))
        if max_entries is not None and len(indices) > max_entries:
            gen = rng if rng is not None else np.random.default_rng(0)
            chosen = gen.choice(len(indices), size=max_entries, replace=False)
            indices = [indices[int(i)] for i in chosen]
        for idx in indices:
            orig = t.data[idx]
            t.data[idx] = orig + eps
            f_pos = float(fn().data)
            t.data[idx] = orig - eps
            f_neg = float(fn().data)
            t.data[idx] = orig
            numeric = (f_pos - f_neg) / (2.0 * eps)
            err = abs(a[idx] - numeric) / max(abs(a[idx]) + abs(numeric), rel_floor)
            worst = max(worst, err)
    return worst


def adam_decoupled_step(p: np.ndarray, g: np.ndarray, m: np.ndarray, v: np.ndarray,
                        t: int, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                        eps: float = 1e-8, weight_decay: float = 0.0):
    """One bias-corrected adaptive-moment update with decoupled weight decay.

    Returns (p, m, v) as new arrays; t is the 1-based step count.
    """
    m = beta1 * m + (1.0 - beta1) * g
    v = beta2 * v + (1.0 - beta2) * g * g
    mhat = m / (1.0 - beta1 ** t)
    vhat = v / (1.0 - beta2 ** t)
    p = p - lr * (mhat / (np.sqrt(vhat) + eps)) - lr * weight_decay * p
    return p, m, v


class AdamW:
    """Decoupled weight-decay Adam over a named parameter dict."""

    def __init__(self, params: dict[str, Tensor], lr: float = 1e-4,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8,
                 weight_decay: float = 0.0):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def step(self) -> None:
        grads = {}
        for name, p in self.params.items():
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            if not np.all(np.isfinite(g)):
                raise NanGradientError(name)
            grads[name] = g
        self.t += 1
        for name, p in self.params.items():
            p.data, self.m[name], self.v[name] = adam_decoupled_step(
                p.data, grads[name], self.m[name], self.v[name], self.t,
                self.lr, self.beta1, self.beta2, self.eps, self.weight_decay)


def save_checkpoint(path: str | Path, arrays: dict[str, np.ndarray], meta: dict) -> None:
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "meta": meta,
        "arrays": {
            name: {
                "dtype": str(arr.dtype),
                "shape": list(arr.shape),
                "data": [float(x) for x in np.asarray(arr).ravel()],
            }
            for name, arr in arrays.items()
        },
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True))


def load_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"not a checkpoint file: {path}")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version: {doc.get('version')}")
    arrays = {
        name: np.array(spec["data"], dtype=spec["dtype"]).reshape(spec["shape"])
        for name, spec in doc["arrays"].items()
    }
    return arrays, doc["meta"]
