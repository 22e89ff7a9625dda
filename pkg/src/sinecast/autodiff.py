"""Dense float64 tensors with reverse-mode automatic differentiation.

The graph is taped implicitly: every operation returns a new Tensor holding
references to its parents and a closure that, given the node's adjoint,
pushes gradient contributions back to them. Closures never reference the
node that owns them, so graphs stay acyclic and are freed by reference
counting the moment the caller drops the loss (no reliance on the cycle
collector, which matters when each step allocates hundreds of megabytes).
Gradients are plain numpy arrays, filled by :func:`backward`.

Broadcasting is deliberately restricted: elementwise ops require equal
shapes, and addition additionally accepts a right operand whose shape
matches the trailing axes of the left one (row-wise bias, additive masks).
Anything else raises ShapeError so that model wiring bugs stay loud.
"""

from __future__ import annotations

import numpy as np

from .errors import GraphError, NumericError, ShapeError

__all__ = [
    "Tensor",
    "Parameter",
    "matmul",
    "softmax_rows",
    "layer_norm_rows",
    "slice_last",
    "concat_last",
    "backward",
    "grad_check",
]


class Tensor:
    """A node in the autodiff graph: a float64 array plus its provenance.

    Tensors built from raw data must be finite; operation outputs skip the
    check for speed (non-finite training losses are caught downstream).
    Data is treated as immutable once wrapped, except for Parameters whose
    buffers the optimizer updates in place between graph builds.
    """

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if not np.isfinite(arr).all():
            raise NumericError("tensor constructed from non-finite data")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None
        self.op = "leaf"

    @classmethod
    def _from_op(cls, data, parents, backward_fn, op: str) -> "Tensor":
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.requires_grad = any(p.requires_grad for p in parents)
        out._parents = tuple(parents)
        out._backward = backward_fn if out.requires_grad else None
        out.op = op
        return out

    # -- metadata ---------------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        flag = ", requires_grad" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, op={self.op!r}{flag})"

    # -- arithmetic -------------------------------------------------------

    def __add__(self, other) -> "Tensor":
        if not isinstance(other, Tensor):
            c = float(other)
            out = Tensor._from_op(self.data + c, (self,), None, "add_const")

            def bw_const(g):
                _acc(self, g)

            out._backward = bw_const if out.requires_grad else None
            return out

        if self.shape == other.shape:
            reduce_axes = None
        elif other.ndim < self.ndim and self.shape[self.ndim - other.ndim:] == other.shape:
            # trailing broadcast: bias vectors, additive masks
            reduce_axes = tuple(range(self.ndim - other.ndim))
        else:
            raise ShapeError(f"add: shapes {self.shape} and {other.shape} do not align")
        out = Tensor._from_op(self.data + other.data, (self, other), None, "add")

        def bw(g):
            _acc(self, g)
            if reduce_axes is None:
                _acc(other, g)
            else:
                _acc(other, g.sum(axis=reduce_axes))

        out._backward = bw if out.requires_grad else None
        return out

    def __radd__(self, other) -> "Tensor":
        return self.__add__(other)

    def __neg__(self) -> "Tensor":
        out = Tensor._from_op(-self.data, (self,), None, "neg")

        def bw(g):
            _acc(self, -g)

        out._backward = bw if out.requires_grad else None
        return out

    def __sub__(self, other) -> "Tensor":
        if not isinstance(other, Tensor):
            return self + (-float(other))
        if self.shape != other.shape:
            raise ShapeError(f"sub: shapes {self.shape} and {other.shape} differ")
        out = Tensor._from_op(self.data - other.data, (self, other), None, "sub")

        def bw(g):
            _acc(self, g)
            _acc(other, -g)

        out._backward = bw if out.requires_grad else None
        return out

    def __mul__(self, other) -> "Tensor":
        if not isinstance(other, Tensor):
            c = float(other)
            out = Tensor._from_op(self.data * c, (self,), None, "scale")

            def bw_const(g):
                _acc(self, g * c)

            out._backward = bw_const if out.requires_grad else None
            return out
        if self.shape != other.shape:
            raise ShapeError(f"mul: shapes {self.shape} and {other.shape} differ")
        out = Tensor._from_op(self.data * other.data, (self, other), None, "mul")

        def bw(g):
            _acc(self, g * other.data)
            _acc(other, g * self.data)

        out._backward = bw if out.requires_grad else None
        return out

    def __rmul__(self, other) -> "Tensor":
        return self.__mul__(other)

    # -- pointwise --------------------------------------------------------

    def sin(self) -> "Tensor":
        out = Tensor._from_op(np.sin(self.data), (self,), None, "sin")

        def bw(g):
            _acc(self, g * np.cos(self.data))

        out._backward = bw if out.requires_grad else None
        return out

    def relu(self) -> "Tensor":
        out = Tensor._from_op(np.maximum(self.data, 0.0), (self,), None, "relu")

        def bw(g):
            _acc(self, g * (self.data > 0.0))

        out._backward = bw if out.requires_grad else None
        return out

    def abs(self) -> "Tensor":
        # subgradient at 0 is 0 (np.sign(0) == 0), keeping L1 terms deterministic
        out = Tensor._from_op(np.abs(self.data), (self,), None, "abs")

        def bw(g):
            _acc(self, g * np.sign(self.data))

        out._backward = bw if out.requires_grad else None
        return out

    # -- reductions -------------------------------------------------------

    def sum(self) -> "Tensor":
        out = Tensor._from_op(np.asarray(self.data.sum()), (self,), None, "sum")

        def bw(g):
            _acc(self, np.broadcast_to(g, self.shape))

        out._backward = bw if out.requires_grad else None
        return out

    def mean(self) -> "Tensor":
        n = self.data.size
        out = Tensor._from_op(np.asarray(self.data.mean()), (self,), None, "mean")

        def bw(g):
            _acc(self, np.broadcast_to(g / n, self.shape))

        out._backward = bw if out.requires_grad else None
        return out

    # -- structure --------------------------------------------------------

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        old = self.shape
        out = Tensor._from_op(self.data.reshape(shape), (self,), None, "reshape")

        def bw(g):
            _acc(self, g.reshape(old))

        out._backward = bw if out.requires_grad else None
        return out

    def transpose(self, axes=None) -> "Tensor":
        if axes is None:
            axes = tuple(reversed(range(self.ndim)))
        axes = tuple(axes)
        inv = tuple(np.argsort(axes))
        out = Tensor._from_op(np.transpose(self.data, axes), (self,), None, "transpose")

        def bw(g):
            _acc(self, np.transpose(g, inv))

        out._backward = bw if out.requires_grad else None
        return out

    def swap_last2(self) -> "Tensor":
        """Transpose the last two axes (matrix transpose, batch-aware)."""
        if self.ndim < 2:
            raise ShapeError(f"swap_last2 needs ndim >= 2, got shape {self.shape}")
        axes = tuple(range(self.ndim - 2)) + (self.ndim - 1, self.ndim - 2)
        return self.transpose(axes)

    def backward(self) -> None:
        backward(self)


class Parameter(Tensor):
    """Trainable leaf tensor with a stable name inside one model."""

    def __init__(self, data, name: str, is_bias: bool = False):
        super().__init__(data, requires_grad=True)
        self.name = name
        self.is_bias = is_bias

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape})"


def _acc(t: Tensor, g: np.ndarray) -> None:
    if t.requires_grad:
        t.grad = g if t.grad is None else t.grad + g


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product: 2D x 2D, batched 3D x 3D, or batched 3D x shared 2D."""
    ashape, bshape = a.shape, b.shape
    if a.ndim == 2 and b.ndim == 2:
        if ashape[1] != bshape[0]:
            raise ShapeError(f"matmul: inner dims of {ashape} and {bshape} disagree")
        out = Tensor._from_op(a.data @ b.data, (a, b), None, "matmul")

        def bw(g):
            _acc(a, g @ b.data.T)
            _acc(b, a.data.T @ g)

    elif a.ndim == 3 and b.ndim == 3:
        if ashape[0] != bshape[0] or ashape[2] != bshape[1]:
            raise ShapeError(f"matmul: batched shapes {ashape} and {bshape} disagree")
        out = Tensor._from_op(a.data @ b.data, (a, b), None, "matmul")

        def bw(g):
            _acc(a, g @ b.data.transpose(0, 2, 1))
            _acc(b, a.data.transpose(0, 2, 1) @ g)

    elif a.ndim == 3 and b.ndim == 2:
        if ashape[2] != bshape[0]:
            raise ShapeError(f"matmul: inner dims of {ashape} and {bshape} disagree")
        out = Tensor._from_op(a.data @ b.data, (a, b), None, "matmul")

        def bw(g):
            _acc(a, g @ b.data.T)
            _acc(b, np.einsum("nab,nac->bc", a.data, g))

    else:
        raise ShapeError(f"matmul: unsupported ranks {ashape} x {bshape}")
    out._backward = bw if out.requires_grad else None
    return out


def softmax_rows(x: Tensor) -> Tensor:
    """Softmax over the last axis with max subtraction for stability."""
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)
    out = Tensor._from_op(y, (x,), None, "softmax_rows")

    def bw(g):
        dot = (g * y).sum(axis=-1, keepdims=True)
        _acc(x, y * (g - dot))

    out._backward = bw if out.requires_grad else None
    return out


def layer_norm_rows(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize each row (last axis) to zero mean and unit variance.

    Uses the population (biased) variance; gamma and beta are length-n
    vectors applied per feature.
    """
    n = x.shape[-1]
    if gamma.shape != (n,) or beta.shape != (n,):
        raise ShapeError(
            f"layer_norm: gamma {gamma.shape} / beta {beta.shape} must be ({n},)"
        )
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = Tensor._from_op(xhat * gamma.data + beta.data, (x, gamma, beta), None, "layer_norm")

    def bw(g):
        lead = tuple(range(g.ndim - 1))
        _acc(beta, g.sum(axis=lead))
        _acc(gamma, (g * xhat).sum(axis=lead))
        dxhat = g * gamma.data
        m1 = dxhat.mean(axis=-1, keepdims=True)
        m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
        _acc(x, inv * (dxhat - m1 - xhat * m2))

    out._backward = bw if out.requires_grad else None
    return out


def slice_last(x: Tensor, start: int, stop: int) -> Tensor:
    """Contiguous slice [start:stop) along the last axis."""
    n = x.shape[-1]
    if not (0 <= start < stop <= n):
        raise ShapeError(f"slice_last: [{start}:{stop}) out of range for axis size {n}")
    out = Tensor._from_op(x.data[..., start:stop], (x,), None, "slice_last")

    def bw(g):
        full = np.zeros(x.shape)
        full[..., start:stop] = g
        _acc(x, full)

    out._backward = bw if out.requires_grad else None
    return out


def concat_last(parts: list[Tensor]) -> Tensor:
    """Concatenate along the last axis; all other axes must match."""
    if not parts:
        raise ShapeError("concat_last: empty input")
    lead = parts[0].shape[:-1]
    for p in parts:
        if p.shape[:-1] != lead:
            raise ShapeError(f"concat_last: leading shapes differ ({[p.shape for p in parts]})")
    widths = [p.shape[-1] for p in parts]
    out = Tensor._from_op(
        np.concatenate([p.data for p in parts], axis=-1), tuple(parts), None, "concat_last"
    )

    def bw(g):
        ofs = 0
        for p, w in zip(parts, widths):
            _acc(p, g[..., ofs:ofs + w])
            ofs += w

    out._backward = bw if out.requires_grad else None
    return out


def _topo_order(loss: Tensor) -> list[Tensor]:
    """Ancestors of `loss` that require grad, children before parents reversed."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen or not node.requires_grad:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            stack.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Fill `grad` on every reachable parameter of a scalar loss.

    Grads of all reachable nodes are zeroed first, so repeated calls on the
    same graph always produce identical results (no silent accumulation).
    """
    if loss.data.size != 1:
        raise GraphError(f"backward expects a scalar loss, got shape {loss.shape}")
    order = _topo_order(loss)
    for node in order:
        node.grad = None
    if not loss.requires_grad:
        return
    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def grad_check(
    loss_fn,
    params,
    h: float = 1e-5,
    max_coords_per_param: int = 20,
    seed: int = 0,
) -> float:
    """Compare analytic grads of `loss_fn()` against central finite differences.

    `loss_fn` must rebuild the graph from the current parameter buffers on
    every call. Returns the max over sampled coordinates of
    |g_analytic - g_numeric| / max(1, |g_analytic|, |g_numeric|).
    """
    if not (0.0 < h <= 1e-3):
        raise ValueError(f"grad_check: h={h} outside (0, 1e-3]")
    params = list(params)
    loss = loss_fn()
    backward(loss)
    analytic = {id(p): (np.zeros_like(p.data) if p.grad is None else p.grad.copy()) for p in params}

    rng = np.random.default_rng(seed)
    worst = 0.0
    for p in params:
        flat = p.data.reshape(-1)
        n = flat.size
        if n <= max_coords_per_param:
            coords = np.arange(n)
        else:
            coords = rng.choice(n, size=max_coords_per_param, replace=False)
        ga_flat = analytic[id(p)].reshape(-1)
        for idx in coords:
            orig = flat[idx]
            flat[idx] = orig + h
            lp = loss_fn().item()
            flat[idx] = orig - h
            lm = loss_fn().item()
            flat[idx] = orig
            if not (np.isfinite(lp) and np.isfinite(lm)):
                raise NumericError("grad_check: non-finite loss at perturbed point")
            gn = (lp - lm) / (2.0 * h)
            ga = ga_flat[idx]
            rel = abs(ga - gn) / max(1.0, abs(ga), abs(gn))
            worst = max(worst, rel)
    return worst
