"""Minimal reverse-mode automatic differentiation over dense float64 arrays.

Define-by-run: every operation appends a node holding its inputs and a
closure that pushes the output adjoint back to them, so the tape is rebuilt
on every forward pass.  `Tensor.backward()` topologically sorts the
recorded graph and runs the closures in reverse.  Gradient accumulation
order is fixed by the recording order, so repeated backward calls on the
same graph produce bitwise-identical gradients.

Every primitive checks its output for NaN/Inf and raises NumericError
naming the operation, which keeps numerical failures traceable to a spot
in the formula rather than surfacing later as a corrupt update.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericError, UsageError

_EPS_NORM = 1e-12


def _wrap(value) -> "Tensor":
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=np.float64))


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum an adjoint back down to the shape it was broadcast from."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, dim in enumerate(shape) if dim == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    """A float64 array plus its place in the recorded graph."""

    __slots__ = ("data", "grad", "_parents", "_backward", "op")

    def __init__(self, data, _parents=(), _backward=None, op="leaf"):
        arr = np.asarray(data, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise NumericError(f"non-finite values produced by op '{op}'")
        self.data = arr
        self.grad = None
        self._parents = _parents
        self._backward = _backward
        self.op = op

    # -- introspection -------------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(op={self.op}, shape={self.shape})"

    # -- graph plumbing ------------------------------------------------------

    def backward(self):
        """Accumulate d(self)/d(node) into node.grad for every node reachable
        from this scalar, resetting previous accumulations first."""
        if self.data.size != 1:
            raise UsageError("backward() requires a scalar output")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        for node in topo:
            node.grad = np.zeros_like(node.data)
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward()
        for node in topo:
            if not np.all(np.isfinite(node.grad)):
                raise NumericError(f"non-finite gradient at op '{node.op}'")

    # -- arithmetic ----------------------------------------------------------

    def __add__(self, other):
        other = _wrap(other)
        out = Tensor(self.data + other.data, (self, other), op="add")

        def back():
            self.grad += _unbroadcast(out.grad, self.data.shape)
            other.grad += _unbroadcast(out.grad, other.data.shape)

        out._backward = back
        return out

    __radd__ = __add__

    def __sub__(self, other):
        other = _wrap(other)
        out = Tensor(self.data - other.data, (self, other), op="sub")

        def back():
            self.grad += _unbroadcast(out.grad, self.data.shape)
            other.grad -= _unbroadcast(out.grad, other.data.shape)

        out._backward = back
        return out

    def __rsub__(self, other):
        return _wrap(other).__sub__(self)

    def __mul__(self, other):
        other = _wrap(other)
        out = Tensor(self.data * other.data, (self, other), op="mul")

        def back():
            self.grad += _unbroadcast(out.grad * other.data, self.data.shape)
            other.grad += _unbroadcast(out.grad * self.data, other.data.shape)

        out._backward = back
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _wrap(other)
        out = Tensor(self.data / other.data, (self, other), op="div")

        def back():
            self.grad += _unbroadcast(out.grad / other.data, self.data.shape)
            other.grad -= _unbroadcast(
                out.grad * self.data / (other.data * other.data), other.data.shape
            )

        out._backward = back
        return out

    def __rtruediv__(self, other):
        return _wrap(other).__truediv__(self)

    def __neg__(self):
        out = Tensor(-self.data, (self,), op="neg")

        def back():
            self.grad -= out.grad

        out._backward = back
        return out

    def __matmul__(self, other):
        other = _wrap(other)
        if self.data.ndim != 2 or other.data.ndim != 2:
            raise UsageError("matmul expects 2-d operands")
        out = Tensor(self.data @ other.data, (self, other), op="matmul")

        def back():
            self.grad += out.grad @ other.data.T
            other.grad += self.data.T @ out.grad

        out._backward = back
        return out

    @property
    def T(self):
        if self.data.ndim != 2:
            raise UsageError("transpose expects a 2-d tensor")
        out = Tensor(self.data.T.copy(), (self,), op="transpose")

        def back():
            self.grad += out.grad.T

        out._backward = back
        return out

    # -- reductions and shaping ----------------------------------------------

    def sum(self, axis=None, keepdims=False):
        out = Tensor(self.data.sum(axis=axis, keepdims=keepdims), (self,), op="sum")

        def back():
            g = out.grad
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            self.grad += np.broadcast_to(g, self.data.shape)

        out._backward = back
        return out

    def mean(self, axis=None, keepdims=False):
        count = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) / float(count)

    def broadcast_to(self, shape):
        out = Tensor(np.broadcast_to(self.data, shape).copy(), (self,), op="broadcast")

        def back():
            self.grad += _unbroadcast(out.grad, self.data.shape)

        out._backward = back
        return out

    def reshape(self, shape):
        out = Tensor(self.data.reshape(shape), (self,), op="reshape")

        def back():
            self.grad += out.grad.reshape(self.data.shape)

        out._backward = back
        return out

    def __getitem__(self, key):
        out = Tensor(self.data[key].copy(), (self,), op="slice")

        def back():
            fancy = isinstance(key, np.ndarray) or (
                isinstance(key, tuple) and any(isinstance(k, np.ndarray) for k in key)
            )
            if fancy:
                np.add.at(self.grad, key, out.grad)
            else:
                self.grad[key] += out.grad

        out._backward = back
        return out

    # -- elementwise transcendental ------------------------------------------

    def _unary(self, fn, dfn, name):
        out = Tensor(fn(self.data), (self,), op=name)

        def back():
            self.grad += out.grad * dfn(self.data, out.data)

        out._backward = back
        return out

    def exp(self):
        return self._unary(np.exp, lambda x, y: y, "exp")

    def log(self):
        return self._unary(np.log, lambda x, y: 1.0 / x, "log")

    def sqrt(self):
        return self._unary(np.sqrt, lambda x, y: 0.5 / y, "sqrt")

    def sinh(self):
        return self._unary(np.sinh, lambda x, y: np.cosh(x), "sinh")

    def cosh(self):
        return self._unary(np.cosh, lambda x, y: np.sinh(x), "cosh")

    def tanh(self):
        return self._unary(np.tanh, lambda x, y: 1.0 - y * y, "tanh")

    def asinh(self):
        return self._unary(np.arcsinh, lambda x, y: 1.0 / np.sqrt(x * x + 1.0), "asinh")

    def atanh(self):
        return self._unary(np.arctanh, lambda x, y: 1.0 / (1.0 - x * x), "atanh")

    def softplus(self):
        out = Tensor(np.logaddexp(0.0, self.data), (self,), op="softplus")

        def back():
            # Sigmoid written through tanh stays finite for large |x|.
            self.grad += out.grad * 0.5 * (1.0 + np.tanh(self.data / 2.0))

        out._backward = back
        return out

    def clamp(self, lo=None, hi=None):
        """Clip values; the adjoint is identity inside [lo, hi], zero outside."""
        if lo is None and hi is None:
            raise UsageError("clamp needs at least one bound")
        out = Tensor(np.clip(self.data, lo, hi), (self,), op="clamp")

        def back():
            mask = np.ones_like(self.data)
            if lo is not None:
                mask = mask * (self.data >= lo)
            if hi is not None:
                mask = mask * (self.data <= hi)
            self.grad += out.grad * mask

        out._backward = back
        return out

    def relu(self):
        return self.clamp(lo=0.0)

    # -- fused/structured ops ------------------------------------------------

    def norm_sq(self, axis=None, keepdims=False):
        """Sum of squares along an axis."""
        out = Tensor(
            np.sum(self.data * self.data, axis=axis, keepdims=keepdims),
            (self,),
            op="norm_sq",
        )

        def back():
            g = out.grad
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            self.grad += 2.0 * self.data * g

        out._backward = back
        return out

    def row_normalize(self):
        """Scale the last axis to unit Euclidean norm, with the row norm
        clamped below at 1e-12 so zero rows stay finite."""
        norms = np.linalg.norm(self.data, axis=-1, keepdims=True)
        safe = np.maximum(norms, _EPS_NORM)
        out = Tensor(self.data / safe, (self,), op="row_normalize")

        def back():
            g = out.grad
            clamped = norms < _EPS_NORM
            inner = np.sum(g * out.data, axis=-1, keepdims=True)
            full = (g - out.data * inner) / safe
            # In the clamped regime the map is plain scaling by 1/eps.
            self.grad += np.where(clamped, g / _EPS_NORM, full)

        out._backward = back
        return out


def softmax_cross_entropy(logits: Tensor, targets) -> Tensor:
    """Mean negative log likelihood of integer targets under row softmax.

    Fused so the adjoint is the numerically clean (softmax - onehot) / B.
    """
    t = np.asarray(targets)
    if logits.data.ndim != 2:
        raise UsageError("expected logits of shape (batch, classes)")
    if t.ndim != 1 or t.shape[0] != logits.data.shape[0]:
        raise UsageError("targets must be one integer per batch row")
    if t.min() < 0 or t.max() >= logits.data.shape[1]:
        raise UsageError("target class index out of range")
    b = logits.data.shape[0]
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.sum(np.exp(shifted), axis=1))
    picked = shifted[np.arange(b), t]
    out = Tensor(np.mean(lse - picked), (logits,), op="softmax_cross_entropy")

    def back():
        soft = np.exp(shifted - lse[:, None])
        soft[np.arange(b), t] -= 1.0
        logits.grad += out.grad * soft / b

    out._backward = back
    return out


def concat(tensors: list[Tensor], axis: int = 0) -> Tensor:
    parts = [t if isinstance(t, Tensor) else _wrap(t) for t in tensors]
    out = Tensor(np.concatenate([p.data for p in parts], axis=axis), tuple(parts), op="concat")

    def back():
        offset = 0
        for p in parts:
            width = p.data.shape[axis]
            index = [slice(None)] * out.data.ndim
            index[axis] = slice(offset, offset + width)
            p.grad += out.grad[tuple(index)]
            offset += width

    out._backward = back
    return out


def finite_diff_check(f, params, h: float = 1e-6) -> float:
    """Max relative disagreement between backprop and central differences.

    `f` is a closure returning a scalar Tensor computed from the current
    data of the parameter leaves.  Each coordinate is perturbed in place by
    +-h with the relative error measured as
    |g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|).
    """
    if isinstance(params, dict):
        leaves = list(params.values())
    else:
        leaves = list(params)
    out = f()
    out.backward()
    grads = [leaf.grad.copy() for leaf in leaves]
    worst = 0.0
    for leaf, grad in zip(leaves, grads):
        flat = leaf.data.reshape(-1)
        gflat = grad.reshape(-1)
        for i in range(flat.shape[0]):
            saved = flat[i]
            flat[i] = saved + h
            plus = float(f().data)
            flat[i] = saved - h
            minus = float(f().data)
            flat[i] = saved
            fd = (plus - minus) / (2.0 * h)
            err = abs(gflat[i] - fd) / max(1e-8, abs(gflat[i]) + abs(fd))
            worst = max(worst, err)
    return worst
