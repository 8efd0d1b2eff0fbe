"""Reverse-mode automatic differentiation over dense 2-D arrays.

Operations executed inside ``with Tape():`` are recorded in execution order;
``backward(loss)`` walks that record in reverse and accumulates gradients
into every tensor created with ``requires_grad=True``. A tape supports a
single backward pass. Tensors created outside any tape (parameters, inputs)
act as leaves; ``detach`` makes a constant copy that gradients never reach.
"""

from __future__ import annotations

import contextvars
from typing import Callable, Sequence

import numpy as np
import scipy.special

__all__ = [
    "Adam",
    "NumericFault",
    "Tape",
    "Tensor",
    "adam_step",
    "add",
    "add_row_broadcast",
    "backward",
    "bce_with_logits",
    "bilinear",
    "concat_cols",
    "elementwise_mul",
    "log",
    "log_sigmoid",
    "matmul",
    "mean_rows",
    "relu",
    "scalar_mul",
    "sigmoid",
    "sum_all",
    "transpose",
]

LOG_CLAMP = 1e-12
_current: contextvars.ContextVar["Tape | None"] = contextvars.ContextVar("graphclust_tape", default=None)


class NumericFault(FloatingPointError):
    """A non-finite value appeared in a forward or backward computation."""


class ShapeError(ValueError):
    pass


class Tensor:
    __slots__ = ("value", "grad", "requires_grad", "_parents", "_backward", "_adam", "name")

    def __init__(self, value, requires_grad: bool = False, name: str = ""):
        v = np.array(value, dtype=np.float64)
        if v.ndim == 0:
            v = v.reshape(1, 1)
        elif v.ndim == 1:
            v = v.reshape(1, -1)
        elif v.ndim != 2:
            raise ShapeError(f"tensors are 2-D, got shape {v.shape}")
        self.value = v
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], tuple[np.ndarray | None, ...]] | None = None
        self._adam: tuple[np.ndarray, np.ndarray] | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape  # type: ignore[return-value]

    def item(self) -> float:
        if self.value.size != 1:
            raise ShapeError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.value[0, 0])

    def detach(self) -> "Tensor":
        return Tensor(self.value.copy())

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __mul__(self, other) -> "Tensor":
        if isinstance(other, Tensor):
            return elementwise_mul(self, other)
        return scalar_mul(self, float(other))

    __rmul__ = __mul__


class Tape:
    """Ordered record of the operations of one forward pass."""

    def __init__(self) -> None:
        self.nodes: list[Tensor] = []
        self.faults = 0
        self.consumed = False
        self._token: contextvars.Token | None = None

    def __enter__(self) -> "Tape":
        self._token = _current.set(self)
        return self

    def __exit__(self, *exc) -> None:
        assert self._token is not None
        _current.reset(self._token)
        self._token = None

    def __len__(self) -> int:
        return len(self.nodes)

    def backward(self, loss: Tensor) -> None:
        backward(loss, self)


def _tape() -> Tape | None:
    return _current.get()


def _check(op: str, value: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(value)):
        raise NumericFault(f"{op} produced a non-finite value")
    return value


def _record(op: str, value: np.ndarray, parents: Sequence[Tensor], fn) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.value = _check(op, value)
    out.grad = None
    tape = _tape()
    # outside a tape nothing is recorded: results are plain constants
    out.requires_grad = tape is not None and any(p.requires_grad for p in parents)
    out._parents = tuple(parents) if out.requires_grad else ()
    out._backward = fn if out.requires_grad else None
    out._adam = None
    out.name = op
    if out.requires_grad:
        if tape.consumed:
            raise RuntimeError("this tape has already been used for a backward pass")
        tape.nodes.append(out)
    return out


def _shape_error(op: str, *ts: Tensor) -> ShapeError:
    return ShapeError(f"{op}: incompatible shapes " + " and ".join(str(t.shape) for t in ts))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[1] != b.shape[0]:
        raise _shape_error("matmul", a, b)
    av, bv = a.value, b.value
    # constant operands (propagation matrices, features) get no gradient
    return _record(
        "matmul",
        av @ bv,
        (a, b),
        lambda g: (g @ bv.T if a.requires_grad else None, av.T @ g if b.requires_grad else None),
    )


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise _shape_error("add", a, b)
    return _record("add", a.value + b.value, (a, b), lambda g: (g, g))


def add_row_broadcast(a: Tensor, b: Tensor) -> Tensor:
    """``a + b`` with the single row ``b`` added to every row of ``a``."""
    if b.shape[0] != 1 or a.shape[1] != b.shape[1]:
        raise _shape_error("add_row_broadcast", a, b)
    return _record("add_row_broadcast", a.value + b.value, (a, b), lambda g: (g, g.sum(axis=0, keepdims=True)))


def transpose(a: Tensor) -> Tensor:
    return _record("transpose", a.value.T.copy(), (a,), lambda g: (g.T,))


def sigmoid(a: Tensor) -> Tensor:
    s = _sigmoid(a.value)
    return _record("sigmoid", s, (a,), lambda g: (g * s * (1.0 - s),))


def relu(a: Tensor) -> Tensor:
    mask = a.value > 0
    return _record("relu", np.where(mask, a.value, 0.0), (a,), lambda g: (g * mask,))


def log(a: Tensor) -> Tensor:
    """Natural log; entries at or below ``1e-12`` are clamped there and counted as faults."""
    x = a.value
    low = x < LOG_CLAMP
    if low.any():
        tape = _tape()
        if tape is not None:
            tape.faults += int(low.sum())
        x = np.maximum(x, LOG_CLAMP)
    return _record("log", np.log(x), (a,), lambda g: (g / x,))


def log_sigmoid(a: Tensor) -> Tensor:
    """``log(sigmoid(a))`` evaluated as ``-softplus(-a)`` (no saturation)."""
    x = a.value
    s = _sigmoid(x)
    return _record("log_sigmoid", -np.logaddexp(0.0, -x), (a,), lambda g: (g * (1.0 - s),))


def mean_rows(a: Tensor) -> Tensor:
    """Column means: ``n x d -> 1 x d``."""
    n = a.shape[0]
    return _record("mean_rows", a.value.mean(axis=0, keepdims=True), (a,), lambda g: (np.repeat(g / n, n, axis=0),))


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[0] != b.shape[0]:
        raise _shape_error("concat_cols", a, b)
    d = a.shape[1]
    return _record("concat_cols", np.hstack([a.value, b.value]), (a, b), lambda g: (g[:, :d], g[:, d:]))


def scalar_mul(a: Tensor, c: float) -> Tensor:
    c = float(c)
    return _record("scalar_mul", a.value * c, (a,), lambda g: (g * c,))


def sum_all(a: Tensor) -> Tensor:
    shape = a.shape
    return _record("sum_all", np.array([[a.value.sum()]]), (a,), lambda g: (np.full(shape, g[0, 0]),))


def elementwise_mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise _shape_error("elementwise_mul", a, b)
    av, bv = a.value, b.value
    return _record("elementwise_mul", av * bv, (a, b), lambda g: (g * bv, g * av))


def bilinear(x: Tensor, w: Tensor, y: Tensor) -> Tensor:
    """Row scores ``x_i W y_i^T`` (``n x 1``); a single-row ``y`` is shared by all rows."""
    if w.shape != (x.shape[1], y.shape[1]) or y.shape[0] not in (1, x.shape[0]):
        raise _shape_error("bilinear", x, w, y)
    xv, wv, yv = x.value, w.value, y.value
    if yv.shape[0] == 1:
        wy = wv @ yv.T  # d_x x 1
        out = xv @ wy

        def grads(g):
            return g @ wy.T, xv.T @ g @ yv, (g.T @ xv) @ wv

    else:
        xw = xv @ wv
        out = (xw * yv).sum(axis=1, keepdims=True)

        def grads(g):
            return (g * yv) @ wv.T, xv.T @ (g * yv), g * xw

    return _record("bilinear", out, (x, w, y), grads)


def bce_with_logits(logits: Tensor, targets, pos_weight: float = 1.0) -> Tensor:
    """Mean binary cross-entropy of ``sigmoid(logits)`` against constant
    targets, computed through log-sigmoid; ``pos_weight`` scales the
    positive-class term."""
    t = targets.value if isinstance(targets, Tensor) else np.asarray(targets, dtype=np.float64)
    x = logits.value
    if t.shape != x.shape:
        t = np.broadcast_to(t, x.shape)
    size = x.size
    pos_weight = float(pos_weight)
    # targets are mostly zero (adjacency): touch the nonzero ones only.
    # softplus(-x) = softplus(x) - x
    flat_t = np.ravel(t)
    nz = np.flatnonzero(flat_t)
    tv = flat_t[nz]
    sp = _softplus(x)
    xv = x.ravel()[nz]
    spv = sp.ravel()[nz]
    total = sp.sum() + float((tv * ((pos_weight - 1.0) * spv - pos_weight * xv)).sum())
    del sp
    loss = total / size

    def grads(g):
        s = scipy.special.expit(x)
        flat = s.reshape(-1)
        flat[nz] = flat[nz] * (1.0 + (pos_weight - 1.0) * tv) - pos_weight * tv
        s *= g[0, 0] / size
        return (s,)

    return _record("bce_with_logits", np.array([[loss]]), (logits,), grads)


def _softplus(x: np.ndarray) -> np.ndarray:
    """``log(1 + exp(x))`` without overflow."""
    out = np.abs(x)
    np.negative(out, out=out)
    np.exp(out, out=out)
    np.log1p(out, out=out)
    out += np.maximum(x, 0.0)
    return out


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return scipy.special.expit(x)


def backward(loss: Tensor, tape: Tape | None = None) -> None:
    """Accumulate ``d loss / d t`` into ``t.grad`` for every reachable tensor
    with ``requires_grad``. Only one backward pass per tape."""
    if loss.shape != (1, 1):
        raise ShapeError(f"backward needs a scalar (1x1) loss, got {loss.shape}")
    tape = tape or _tape()
    if tape is None:
        raise RuntimeError("backward needs the tape the loss was recorded on")
    if tape.consumed:
        raise RuntimeError("this tape has already been used for a backward pass")
    tape.consumed = True
    if not loss.requires_grad:
        return
    pending: dict[int, np.ndarray] = {id(loss): np.ones((1, 1))}
    for node in reversed(tape.nodes):
        g = pending.pop(id(node), None)
        if g is None:
            continue
        assert node._backward is not None
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            _check(f"gradient of {node.name}", pg)
            if parent._backward is None:
                parent.grad = pg.copy() if parent.grad is None else parent.grad + pg
            else:
                key = id(parent)
                pending[key] = pg if key not in pending else pending[key] + pg


def adam_step(params: Sequence[Tensor], lr: float, t: int, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> None:
    """One Adam update with bias correction; ``t`` counts steps from 1.
    Parameters without a gradient are left alone."""
    for p in params:
        if p.grad is None:
            continue
        m, v = p._adam if p._adam is not None else (np.zeros_like(p.value), np.zeros_like(p.value))
        m = beta1 * m + (1.0 - beta1) * p.grad
        v = beta2 * v + (1.0 - beta2) * p.grad * p.grad
        p._adam = (m, v)
        mhat = m / (1.0 - beta1 ** t)
        vhat = v / (1.0 - beta2 ** t)
        p.value = p.value - lr * mhat / (np.sqrt(vhat) + eps)


class Adam:
    def __init__(self, params: Sequence[Tensor], lr: float = 1e-3, betas: tuple[float, float] = (0.9, 0.999),
                 eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.t = 0

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        self.t += 1
        adam_step(self.params, self.lr, self.t, self.betas[0], self.betas[1], self.eps)
