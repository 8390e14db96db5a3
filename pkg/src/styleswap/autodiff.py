"""Dense float tensors with reverse-mode automatic differentiation.

The computation record is an explicit append-only tape: every operation
executed while a :class:`Tape` is active appends one node holding the
operation tag, the node ids of its inputs, and a closure that maps the
upstream gradient to per-input gradients.  Nodes are topologically ordered
by construction, so one reverse sweep over the tape visits each node
exactly once.

Compute dtype is float32 for training; gradient-check tooling builds the
same graphs in float64 (pass ``dtype=np.float64`` at tensor creation).
Broadcasting is restricted to trailing-dimension alignment of the second
operand.  All kernels use fixed numpy reduction order, so identical inputs
produce bit-identical outputs.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import as_strided


class ShapeError(ValueError):
    """Operand shapes violate an operation's contract."""


class NonFiniteError(ArithmeticError):
    """An operation produced NaN or Inf values."""


_FLOAT_DTYPES = (np.float32, np.float64)

# Toggle for per-operation finiteness validation.  On by default; gradient
# sweeps over large graphs may disable it for speed via set_check_finite.
_check_finite = True


def set_check_finite(enabled: bool) -> bool:
    """Enable/disable per-op finiteness checks; returns the previous setting."""
    global _check_finite
    previous = _check_finite
    _check_finite = bool(enabled)
    return previous


def _ensure_finite(arr: np.ndarray, tag: str) -> None:
    if _check_finite and not np.isfinite(arr).all():
        raise NonFiniteError(f"{tag}: result contains non-finite values")


class Tensor:
    """N-dimensional float array, optionally tracked on the active tape.

    ``data`` is a C-contiguous float32 or float64 array.  ``grad`` is
    allocated lazily the first time a backward pass deposits into this
    tensor; repeated backward calls accumulate.  ``requires_grad`` marks a
    leaf as a gradient sink (parameters and gradient-check inputs).
    """

    __slots__ = ("data", "grad", "requires_grad", "_tape", "_node_id")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif arr.dtype not in _FLOAT_DTYPES:
            arr = arr.astype(np.float32)
        # ascontiguousarray would promote 0-d arrays to 1-d; keep true scalars
        self.data = np.ascontiguousarray(arr) if arr.ndim else arr

        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._tape: Optional[Tape] = None
        self._node_id: Optional[int] = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def node_id(self) -> Optional[int]:
        return self._node_id

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() requires a scalar, got shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy(), dtype=self.data.dtype)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype.name})"

    # Arithmetic sugar; scalars go through the dedicated scalar kernels so
    # no broadcast bookkeeping is involved.
    def __add__(self, other):
        if isinstance(other, Tensor):
            return elementwise("add", self, other)
        return add_scalar(self, float(other))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Tensor):
            return elementwise("sub", self, other)
        return add_scalar(self, -float(other))

    def __rsub__(self, other):
        return sub_from_scalar(float(other), self)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return elementwise("mul", self, other)
        return mul_scalar(self, float(other))

    __rmul__ = __mul__

    def __neg__(self):
        return mul_scalar(self, -1.0)


class _TapeNode:
    __slots__ = ("tag", "input_ids", "grad_fn", "leaf")

    def __init__(self, tag, input_ids, grad_fn, leaf=None):
        self.tag = tag
        self.input_ids = input_ids
        self.grad_fn = grad_fn
        self.leaf = leaf


class Tape:
    """Append-only computation record; single-writer, replayed by backward."""

    def __init__(self):
        self.nodes: list[_TapeNode] = []
        self._leaf_ids: dict[int, int] = {}

    def __enter__(self) -> "Tape":
        global _active_tape
        if _active_tape is not None:
            raise RuntimeError("a computation record is already active")
        _active_tape = self
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        global _active_tape
        _active_tape = None

    def __len__(self) -> int:
        return len(self.nodes)

    def _id_for(self, t: Tensor) -> Optional[int]:
        if t._tape is self:
            return t._node_id
        nid = self._leaf_ids.get(id(t))
        if nid is not None:
            return nid
        if t.requires_grad:
            nid = len(self.nodes)
            self.nodes.append(_TapeNode("leaf", (), None, leaf=t))
            self._leaf_ids[id(t)] = nid
            return nid
        return None


_active_tape: Optional[Tape] = None


def active_tape() -> Optional[Tape]:
    return _active_tape


def _record(tag: str, out_data: np.ndarray, inputs: Sequence[Tensor],
            grad_fn: Callable[[np.ndarray], tuple]) -> Tensor:
    _ensure_finite(out_data, tag)
    out = Tensor(out_data, dtype=out_data.dtype)
    tape = _active_tape
    if tape is None:
        return out
    input_ids = tuple(tape._id_for(t) for t in inputs)
    if all(i is None for i in input_ids):
        return out
    out._tape = tape
    out._node_id = len(tape.nodes)
    tape.nodes.append(_TapeNode(tag, input_ids, grad_fn))
    return out


def backward(root: Tensor) -> dict[Tensor, np.ndarray]:
    """Reverse sweep from a scalar root; returns {leaf tensor: accumulated grad}.

    Deposits into each reachable leaf's ``.grad`` buffer (allocating on
    first use); calling again without ``zero_grad`` keeps accumulating.
    """
    if root.data.size != 1:
        raise ShapeError(f"backward root must be scalar, got shape {root.shape}")
    tape = root._tape
    if tape is None:
        raise ValueError("backward root is not connected to a computation record")
    grads: dict[int, np.ndarray] = {root._node_id: np.ones_like(root.data)}
    touched: list[Tensor] = []
    for nid in range(root._node_id, -1, -1):
        g = grads.pop(nid, None)
        if g is None:
            continue
        node = tape.nodes[nid]
        if node.tag == "leaf":
            leaf = node.leaf
            if leaf.grad is None:
                leaf.grad = np.zeros_like(leaf.data)
            leaf.grad += g
            touched.append(leaf)
            continue
        for iid, ig in zip(node.input_ids, node.grad_fn(g)):
            if iid is None or ig is None:
                continue
            held = grads.get(iid)
            grads[iid] = ig if held is None else held + ig
    return {leaf: leaf.grad for leaf in touched}


# ---------------------------------------------------------------------------
# broadcasting helpers (trailing-dimension alignment of the second operand)

def _check_trailing_broadcast(a_shape: tuple, b_shape: tuple, tag: str) -> None:
    if len(b_shape) > len(a_shape):
        raise ShapeError(
            f"{tag}: second operand {b_shape} has more dimensions than first {a_shape}")
    for ad, bd in zip(reversed(a_shape), reversed(b_shape)):
        if bd != ad and bd != 1:
            raise ShapeError(f"{tag}: shapes {a_shape} and {b_shape} are not "
                             "broadcast-compatible by trailing-dimension rules")


def _reduce_to_shape(g: np.ndarray, shape: tuple) -> np.ndarray:
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    squash = tuple(i for i, d in enumerate(shape) if d == 1 and g.shape[i] != 1)
    if squash:
        g = g.sum(axis=squash, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise kernels

def elementwise(op_tag: str, a: Tensor, b: Optional[Tensor] = None,
                slope: Optional[float] = None) -> Tensor:
    """Pointwise ops: binary {add, sub, mul} (b broadcasts by trailing rules)
    and unary {relu, leaky_relu (needs slope), tanh}."""
    if op_tag in ("add", "sub", "mul"):
        if b is None:
            raise ShapeError(f"{op_tag} requires two operands")
        if a.data.dtype != b.data.dtype:
            raise ShapeError(f"{op_tag}: mixed dtypes {a.dtype} and {b.dtype}")
        _check_trailing_broadcast(a.shape, b.shape, op_tag)
        bsh = b.shape
        if op_tag == "add":
            out = a.data + b.data

            def grad_fn(g, bsh=bsh):
                return g, _reduce_to_shape(g, bsh)
        elif op_tag == "sub":
            out = a.data - b.data

            def grad_fn(g, bsh=bsh):
                return g, -_reduce_to_shape(g, bsh)
        else:
            out = a.data * b.data
            ad, bd = a.data, b.data

            def grad_fn(g, ad=ad, bd=bd, bsh=bsh):
                return g * bd, _reduce_to_shape(g * ad, bsh)

        return _record(op_tag, out, (a, b), grad_fn)

    if b is not None:
        raise ShapeError(f"{op_tag} takes a single operand")
    if op_tag == "relu":
        out = np.maximum(a.data, 0)
        mask = a.data > 0

        def grad_fn(g, mask=mask):
            return (g * mask,)
    elif op_tag == "leaky_relu":
        if slope is None:
            raise ShapeError("leaky_relu requires a slope")
        out = np.where(a.data > 0, a.data, a.data * a.data.dtype.type(slope))
        mask = a.data > 0

        def grad_fn(g, mask=mask, slope=slope):
            return (np.where(mask, g, g * g.dtype.type(slope)),)
    elif op_tag == "tanh":
        out = np.tanh(a.data)
        saved = out

        def grad_fn(g, saved=saved):
            return (g * (1.0 - saved * saved),)
    else:
        raise ShapeError(f"unknown elementwise op tag {op_tag!r}")
    return _record(op_tag, out, (a,), grad_fn)


def relu(a: Tensor) -> Tensor:
    return elementwise("relu", a)


def leaky_relu(a: Tensor, slope: float) -> Tensor:
    return elementwise("leaky_relu", a, slope=slope)


def tanh(a: Tensor) -> Tensor:
    return elementwise("tanh", a)


def add_scalar(a: Tensor, c: float) -> Tensor:
    out = a.data + a.data.dtype.type(c)
    return _record("adds", out, (a,), lambda g: (g,))


def sub_from_scalar(c: float, a: Tensor) -> Tensor:
    out = a.data.dtype.type(c) - a.data
    return _record("rsubs", out, (a,), lambda g: (-g,))


def mul_scalar(a: Tensor, c: float) -> Tensor:
    cc = a.data.dtype.type(c)
    out = a.data * cc
    return _record("muls", out, (a,), lambda g, cc=cc: (g * cc,))


def absolute(a: Tensor) -> Tensor:
    out = np.abs(a.data)
    sign = np.sign(a.data)

    def grad_fn(g, sign=sign):
        return (g * sign,)

    return _record("abs", out, (a,), grad_fn)


def log(a: Tensor) -> Tensor:
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(a.data)
    ad = a.data

    def grad_fn(g, ad=ad):
        return (g / ad,)

    return _record("log", out, (a,), grad_fn)


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    saved = out

    def grad_fn(g, saved=saved):
        return (g * saved,)

    return _record("exp", out, (a,), grad_fn)


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    # overflow-free split formulation
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    saved = out

    def grad_fn(g, saved=saved):
        return (g * saved * (1.0 - saved),)

    return _record("sigmoid", out, (a,), grad_fn)


def clamp(a: Tensor, lo: float, hi: float) -> Tensor:
    out = np.clip(a.data, lo, hi)
    mask = (a.data > lo) & (a.data < hi)

    def grad_fn(g, mask=mask):
        return (g * mask,)

    return _record("clamp", out, (a,), grad_fn)


# ---------------------------------------------------------------------------
# matrix products

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Rank-2 matrix product (m,k) x (k,n) -> (m,n)."""
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul requires rank-2 operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dimensions disagree: {a.shape} x {b.shape}")
    ad, bd = a.data, b.data
    out = ad @ bd

    def grad_fn(g, ad=ad, bd=bd):
        return g @ bd.T, ad.T @ g

    return _record("matmul", out, (a, b), grad_fn)


def bmm(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product (B,m,k) x (B,k,n) -> (B,m,n)."""
    if a.data.ndim != 3 or b.data.ndim != 3:
        raise ShapeError(f"bmm requires rank-3 operands, got {a.shape} and {b.shape}")
    if a.shape[0] != b.shape[0] or a.shape[2] != b.shape[1]:
        raise ShapeError(f"bmm shapes disagree: {a.shape} x {b.shape}")
    ad, bd = a.data, b.data
    out = np.matmul(ad, bd)

    def grad_fn(g, ad=ad, bd=bd):
        return np.matmul(g, bd.swapaxes(1, 2)), np.matmul(ad.swapaxes(1, 2), g)

    return _record("bmm", out, (a, b), grad_fn)


# ---------------------------------------------------------------------------
# convolution (direct im2col; no external kernels)

def _im2col(x: np.ndarray, k: int, stride: int, pad: int):
    """Patch matrix of shape (c*k*k, n*oh*ow): one GEMM covers the batch."""
    n, c, h, w = x.shape
    oh = (h + 2 * pad - k) // stride + 1
    ow = (w + 2 * pad - k) // stride + 1
    if pad:
        xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    else:
        xp = x
    s0, s1, s2, s3 = xp.strides
    view = as_strided(xp, (c, k, k, n, oh, ow),
                      (s1, s2, s3, s0, s2 * stride, s3 * stride))
    cols = view.reshape(c * k * k, n * oh * ow)
    return cols, oh, ow


def _col2im(dcols: np.ndarray, x_shape: tuple, k: int, stride: int, pad: int) -> np.ndarray:
    n, c, h, w = x_shape
    oh = (h + 2 * pad - k) // stride + 1
    ow = (w + 2 * pad - k) // stride + 1
    dview = dcols.reshape(c, k, k, n, oh, ow)
    dxp = np.zeros((c, n, h + 2 * pad, w + 2 * pad), dtype=dcols.dtype)
    for ki in range(k):
        for kj in range(k):
            dxp[:, :, ki:ki + stride * oh:stride, kj:kj + stride * ow:stride] += \
                dview[:, ki, kj]
    dx = dxp.transpose(1, 0, 2, 3)
    if pad:
        return dx[:, :, pad:-pad, pad:-pad]
    return dx


def conv2d(x: Tensor, kernel: Tensor, stride: int = 1, pad: int = 0) -> Tensor:
    """2-D cross-correlation, NCHW input against OIKK kernel."""
    if x.data.ndim != 4 or kernel.data.ndim != 4:
        raise ShapeError(f"conv2d expects NCHW and OIKK, got {x.shape} and {kernel.shape}")
    n, c, h, w = x.shape
    o, i, kh, kw = kernel.shape
    if kh != kw:
        raise ShapeError(f"conv2d kernels must be square, got {kernel.shape}")
    if i != c:
        raise ShapeError(f"conv2d channel mismatch: input has {c}, kernel expects {i}")
    if kh > h + 2 * pad or kh > w + 2 * pad:
        raise ShapeError(f"conv2d kernel {kh} exceeds padded input {h + 2 * pad}")
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (w + 2 * pad - kw) // stride + 1
    if oh <= 0 or ow <= 0:
        raise ShapeError(f"conv2d output size is non-positive for input {x.shape}")
    cols, oh, ow = _im2col(x.data, kh, stride, pad)
    w2 = kernel.data.reshape(o, c * kh * kw)
    out = np.matmul(w2, cols).reshape(o, n, oh, ow).transpose(1, 0, 2, 3)

    x_shape = x.shape

    def grad_fn(g, cols=cols, w2=w2, x_shape=x_shape, k=kh, stride=stride,
                pad=pad, o=o):
        g2 = g.transpose(1, 0, 2, 3).reshape(o, -1)
        dw = np.matmul(g2, cols.T)
        dcols = np.matmul(w2.T, g2)
        dx = _col2im(dcols, x_shape, k, stride, pad)
        return dx, dw.reshape(o, x_shape[1], k, k)

    return _record("conv2d", out, (x, kernel), grad_fn)


def upsample_nearest(x: Tensor, factor: int) -> Tensor:
    """Nearest-neighbour upsampling of NCHW spatial dims by an integer factor."""
    if factor < 1:
        raise ShapeError(f"upsample factor must be >= 1, got {factor}")
    if x.data.ndim != 4:
        raise ShapeError(f"upsample_nearest expects NCHW, got {x.shape}")
    if factor == 1:
        return _record("upsample", x.data.copy(), (x,), lambda g: (g,))
    out = x.data.repeat(factor, axis=2).repeat(factor, axis=3)
    n, c, h, w = x.shape

    def grad_fn(g, n=n, c=c, h=h, w=w, f=factor):
        return (g.reshape(n, c, h, f, w, f).sum(axis=(3, 5)),)

    return _record("upsample", out, (x,), grad_fn)


# ---------------------------------------------------------------------------
# sorting

def sort_lastdim(x: Tensor) -> tuple[Tensor, np.ndarray]:
    """Ascending stable sort along the last axis.

    Returns the sorted tensor and the permutation (``perm[..., i]`` is the
    pre-sort index of the i-th smallest element).  Backward routes each
    upstream gradient component to its pre-sort position, the exact
    gradient of this piecewise-linear map away from ties.
    """
    if x.shape[-1] < 1:
        raise ShapeError("sort_lastdim requires a non-empty last dimension")
    if np.isnan(x.data).any():
        raise NonFiniteError("sort_lastdim: NaN input rejected")
    perm = np.argsort(x.data, axis=-1, kind="stable")
    out = np.take_along_axis(x.data, perm, axis=-1)

    def grad_fn(g, perm=perm):
        dx = np.empty_like(g)
        np.put_along_axis(dx, perm, g, axis=-1)
        return (dx,)

    return _record("sort", out, (x,), grad_fn), perm


# ---------------------------------------------------------------------------
# reductions and shape ops

def reduce(op_tag: str, x: Tensor, axes: Optional[Sequence[int]] = None) -> Tensor:
    """sum/mean over ``axes`` (None = all axes; empty list = identity)."""
    if op_tag not in ("sum", "mean"):
        raise ShapeError(f"unknown reduce op tag {op_tag!r}")
    if axes is not None:
        axes = tuple(axes)
        if len(set(axes)) != len(axes):
            raise ShapeError(f"reduce axes must be distinct, got {axes}")
        for ax in axes:
            if not -x.data.ndim <= ax < x.data.ndim:
                raise ShapeError(f"reduce axis {ax} invalid for shape {x.shape}")
        axes = tuple(ax % x.data.ndim for ax in axes)
        if not axes:
            return _record(op_tag, x.data.copy(), (x,), lambda g: (g,))
    in_shape = x.shape
    if op_tag == "sum":
        out = x.data.sum(axis=axes)
        scale = 1.0
    else:
        out = x.data.mean(axis=axes)
        count = x.data.size if axes is None else int(np.prod([in_shape[a] for a in axes]))
        scale = 1.0 / count
    keep_shape = tuple(1 if (axes is None or a in axes) else d
                       for a, d in enumerate(in_shape))

    def grad_fn(g, keep_shape=keep_shape, in_shape=in_shape, scale=scale):
        gg = g.reshape(keep_shape)
        expanded = np.broadcast_to(gg, in_shape)
        if scale != 1.0:
            return (expanded * np.asarray(scale, dtype=g.dtype),)
        return (np.ascontiguousarray(expanded),)

    return _record(op_tag, out, (x,), grad_fn)


def mean(x: Tensor, axes: Optional[Sequence[int]] = None) -> Tensor:
    return reduce("mean", x, axes)


def total(x: Tensor, axes: Optional[Sequence[int]] = None) -> Tensor:
    return reduce("sum", x, axes)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)
    out = x.data.reshape(shape)
    in_shape = x.shape

    def grad_fn(g, in_shape=in_shape):
        return (g.reshape(in_shape),)

    return _record("reshape", np.ascontiguousarray(out), (x,), grad_fn)


def transpose(x: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    if sorted(axes) != list(range(x.data.ndim)):
        raise ShapeError(f"transpose axes {axes} invalid for shape {x.shape}")
    out = np.ascontiguousarray(x.data.transpose(axes))
    inv = tuple(np.argsort(axes))

    def grad_fn(g, inv=inv):
        return (np.ascontiguousarray(g.transpose(inv)),)

    return _record("transpose", out, (x,), grad_fn)


def take_indices(x: Tensor, indices: np.ndarray, axis: int) -> Tensor:
    """Gather slices along ``axis`` by a 1-D index array (scatter-add backward)."""
    idx = np.asarray(indices)
    if idx.ndim != 1:
        raise ShapeError("take_indices expects a 1-D index array")
    out = np.take(x.data, idx, axis=axis)
    in_shape = x.shape

    def grad_fn(g, idx=idx, axis=axis, in_shape=in_shape):
        dx = np.zeros(in_shape, dtype=g.dtype)
        sl = [slice(None)] * len(in_shape)
        sl[axis] = idx
        np.add.at(dx, tuple(sl), g)
        return (dx,)

    return _record("take", out, (x,), grad_fn)


# ---------------------------------------------------------------------------
# finite differences (verification oracle)

def finite_diff_gradient(f: Callable[[Tensor], float], x: Tensor,
                         h: float = 1e-4) -> np.ndarray:
    """Central-difference gradient of scalar f at x, computed in float64.

    f must be deterministic under a fixed RNG state; it receives a float64
    tensor and must return a Python float (or a scalar tensor).
    """
    base = x.data.astype(np.float64)
    grad = np.zeros_like(base)
    flat = base.reshape(-1)
    gflat = grad.reshape(-1)

    def eval_at(values: np.ndarray) -> float:
        r = f(Tensor(values.reshape(base.shape), dtype=np.float64))
        if isinstance(r, Tensor):
            return r.item()
        return float(r)

    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = eval_at(flat)
        flat[i] = orig - h
        fm = eval_at(flat)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad
