"""Dense float64 tensors with reverse-mode automatic differentiation.

The op set is exactly what the classifier needs: matmul, the elementwise
family, softmax/log-softmax, reductions, shape moves, same-padded 1-D
convolution and a guarded inverse square root for degree vectors.  Results
record their parents and a vector-Jacobian closure; `backward()` replays
the tape in reverse topological order.  Gradients accumulate additively
until explicitly cleared, so repeated backward calls sum.
"""

import numpy as np

from .errors import ContractError, DimensionError
from . import kernels


def _unbroadcast(grad, shape):
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """A dense n-d array with optional gradient tracking.

    `data` is always float64 and row-major.  `grad`, once populated by
    `backward()`, has the same shape as `data`.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_vjp", "name")

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.ascontiguousarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._vjp = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    # -- autodiff ----------------------------------------------------------

    def backward(self):
        """Accumulate gradients of this scalar into every reachable
        requires_grad tensor.  Repeated calls add."""
        if self.data.size != 1:
            raise ContractError(
                f"backward() requires a scalar loss, got shape {self.shape}")

        topo = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))

        flow = {id(self): np.ones_like(self.data)}
        for node in reversed(topo):
            g = flow.pop(id(node), None)
            if g is None:
                continue
            if node.requires_grad:
                if node.grad is None:
                    node.grad = g.copy()
                else:
                    node.grad = node.grad + g
            if node._vjp is None:
                continue
            for parent, contrib in zip(node._parents, node._vjp(g)):
                if contrib is None:
                    continue
                key = id(parent)
                if key in flow:
                    flow[key] = flow[key] + contrib
                else:
                    flow[key] = contrib

    # -- operator sugar ----------------------------------------------------

    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, other)
        return mul(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return take(self, index)

    @property
    def T(self):
        return transpose(self)

    def sum(self, axis=None, keepdims=False):
        return tensor_sum(self, axis=axis, keepdims=keepdims)

    def mean(self):
        return mean(self)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def _as_tensor(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=np.float64))


def _make(data, parents, vjp) -> Tensor:
    """Build an op result; the tape is recorded only if a parent needs it."""
    out = Tensor(data)
    if any(p.requires_grad or p._vjp is not None for p in parents):
        out.requires_grad = any(p.requires_grad or p._vjp is not None for p in parents)
        out._parents = tuple(parents)
        out._vjp = vjp
    return out


# -- elementwise ------------------------------------------------------------

def _binary_check(a, b, op_name):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(
            f"{op_name}: shapes {a.shape} and {b.shape} are incompatible") from None


def add(a: Tensor, b: Tensor) -> Tensor:
    _binary_check(a, b, "add")
    return _make(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a: Tensor, b: Tensor) -> Tensor:
    _binary_check(a, b, "sub")
    return _make(a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a: Tensor, b: Tensor) -> Tensor:
    _binary_check(a, b, "mul")
    return _make(a.data * b.data, (a, b),
                 lambda g: (_unbroadcast(g * b.data, a.shape),
                            _unbroadcast(g * a.data, b.shape)))


def scale(x: Tensor, c: float) -> Tensor:
    c = float(c)
    return _make(x.data * c, (x,), lambda g: (g * c,))


def sigmoid(x: Tensor) -> Tensor:
    # Split by sign to avoid overflow in exp.
    d = x.data
    out = np.where(d >= 0, 1.0 / (1.0 + np.exp(-np.clip(d, 0, None))),
                   np.exp(np.clip(d, None, 0)) / (1.0 + np.exp(np.clip(d, None, 0))))
    return _make(out, (x,), lambda g: (g * out * (1.0 - out),))


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)
    return _make(out, (x,), lambda g: (g * (1.0 - out * out),))


def leaky_relu(x: Tensor, slope: float = 0.01) -> Tensor:
    mask = np.where(x.data > 0, 1.0, float(slope))
    return _make(x.data * mask, (x,), lambda g: (g * mask,))


def glu(x: Tensor) -> Tensor:
    """Gated linear unit where the pre-activation gates itself: x * sigmoid(x)."""
    return mul(x, sigmoid(x))


def inv_sqrt_or_zero(x: Tensor) -> Tensor:
    """d ** -0.5 where d > 0, exactly 0 elsewhere (isolated-node degrees)."""
    positive = x.data > 0
    out = np.zeros_like(x.data)
    out[positive] = x.data[positive] ** -0.5
    dgrad = np.zeros_like(x.data)
    dgrad[positive] = -0.5 * x.data[positive] ** -1.5
    return _make(out, (x,), lambda g: (g * dgrad,))


# -- matmul and softmax ------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError(
            f"matmul: operands must be at least 2-d, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(
            f"matmul: inner extents disagree for shapes {a.shape} and {b.shape}")
    try:
        out = np.matmul(a.data, b.data)
    except ValueError:
        raise DimensionError(
            f"matmul: leading extents do not broadcast for shapes "
            f"{a.shape} and {b.shape}") from None

    def vjp(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _make(out, (a, b), vjp)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    if axis >= x.ndim or axis < -x.ndim:
        raise DimensionError(f"softmax: axis {axis} out of range for shape {x.shape}")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        inner = (g * out).sum(axis=axis, keepdims=True)
        return ((g - inner) * out,)

    return _make(out, (x,), vjp)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    if axis >= x.ndim or axis < -x.ndim:
        raise DimensionError(f"log_softmax: axis {axis} out of range for shape {x.shape}")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - log_z
    soft = np.exp(out)

    def vjp(g):
        return (g - soft * g.sum(axis=axis, keepdims=True),)

    return _make(out, (x,), vjp)


# -- reductions and shape moves ----------------------------------------------

def tensor_sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, x.shape).copy(),)
        g_arr = np.asarray(g)
        if not keepdims:
            g_arr = np.expand_dims(g_arr, axis)
        return (np.broadcast_to(g_arr, x.shape).copy(),)

    return _make(out, (x,), vjp)


def mean(x: Tensor) -> Tensor:
    n = x.data.size
    return _make(np.asarray(x.data.mean()), (x,),
                 lambda g: (np.broadcast_to(g / n, x.shape).copy(),))


def reshape(x: Tensor, shape) -> Tensor:
    return _make(x.data.reshape(shape), (x,),
                 lambda g: (g.reshape(x.shape),))


def transpose(x: Tensor, axes=None) -> Tensor:
    if axes is None:
        inverse = None
    else:
        inverse = np.argsort(axes)
    out = np.transpose(x.data, axes)

    def vjp(g):
        return (np.transpose(g, inverse),)

    return _make(out, (x,), vjp)


def swapaxes(x: Tensor, a: int, b: int) -> Tensor:
    return _make(np.swapaxes(x.data, a, b), (x,),
                 lambda g: (np.swapaxes(g, a, b),))


def take(x: Tensor, index) -> Tensor:
    out = x.data[index]

    def vjp(g):
        full = np.zeros_like(x.data)
        np.add.at(full, index, g)
        return (full,)

    return _make(out, (x,), vjp)


def stack(tensors, axis: int = 0) -> Tensor:
    tensors = list(tensors)
    if not tensors:
        raise ContractError("stack: need at least one tensor")
    out = np.stack([t.data for t in tensors], axis=axis)

    def vjp(g):
        slices = np.moveaxis(g, axis, 0)
        return tuple(slices[i] for i in range(len(tensors)))

    return _make(out, tuple(tensors), vjp)


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = list(tensors)
    if not tensors:
        raise ContractError("concat: need at least one tensor")
    out = np.concatenate([t.data for t in tensors], axis=axis)
    splits = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def vjp(g):
        return tuple(np.split(g, splits, axis=axis))

    return _make(out, tuple(tensors), vjp)


# -- convolution --------------------------------------------------------------

def conv1d(signal: Tensor, kernel: Tensor) -> Tensor:
    """Same-length zero-padded cross-correlation along the last axis.

    `kernel` is 1-d with odd length (the model uses 3); output length equals
    input length.  Gradients flow to both operands.
    """
    if signal.shape[-1] < 1:
        raise DimensionError(f"conv1d: empty signal, shape {signal.shape}")
    if kernel.ndim != 1 or kernel.shape[0] % 2 == 0:
        raise DimensionError(
            f"conv1d: kernel must be 1-d with odd length, got shape {kernel.shape}")

    rows = signal.data.reshape(-1, signal.shape[-1])
    out = kernels.conv1d_rows(rows, kernel.data).reshape(signal.shape)

    def vjp(g):
        g_rows = np.ascontiguousarray(g.reshape(-1, signal.shape[-1]))
        grad_signal = kernels.conv1d_rows(g_rows, kernel.data[::-1].copy())
        grad_kernel = kernels.conv1d_kernel_grad(rows, g_rows, kernel.shape[0])
        return grad_signal.reshape(signal.shape), grad_kernel

    return _make(out, (signal, kernel), vjp)
