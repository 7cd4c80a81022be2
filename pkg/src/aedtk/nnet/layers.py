"""Layers with explicit forward/backward passes.

Activations flow through the engine in channels-last layout (N, H, W, C)
with H = time frames and W = frequency bands; the Network class transposes
from the public (N, C, H, W) convention at the boundary. Convolutions are
valid (no padding), stride 1, and are evaluated as BLAS matrix products on
contiguous row-slab views, which is what makes CPU training viable.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import as_strided


class ShapeError(Exception):
    pass


class Param:
    """A learnable array with a gradient buffer of the same shape."""

    __slots__ = ("name", "value", "grad", "is_weight")

    def __init__(self, name: str, value: np.ndarray, is_weight: bool):
        self.name = name
        self.value = value
        self.grad = np.zeros_like(value)
        self.is_weight = is_weight

    def zero_grad(self):
        self.grad[...] = 0.0


def he_uniform(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


# ---------------------------------------------------------------------------
# convolution kernels (channels-last)

def _corr2d(x: np.ndarray, w: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    """Valid cross-correlation: x (N,H,W,C) with w (k,k,C,F) -> (N,Ho,Wo,F).

    For each kernel row di, the slab x[n, di:di+Ho] flattens to a contiguous
    (Ho*W, C) view, and one GEMM against the (C, k*F) kernel-row matrix
    covers all k column offsets at once; the per-offset slices are then
    accumulated through a strided view without further copies.
    """
    n_batch, h, width, c = x.shape
    k = w.shape[0]
    f = w.shape[3]
    ho, wo = h - k + 1, width - k + 1
    if ho < 1 or wo < 1:
        raise ShapeError(f"input {h}x{width} too small for a {k}x{k} kernel")
    if out is None:
        out = np.zeros((n_batch, ho, wo, f), dtype=x.dtype)
    else:
        out[...] = 0.0
    row_mats = [np.ascontiguousarray(w[di].transpose(1, 0, 2).reshape(c, k * f)) for di in range(k)]
    itemsize = out.itemsize
    for n in range(n_batch):
        for di in range(k):
            slab = x[n, di : di + ho].reshape(ho * width, c)
            g = slab @ row_mats[di]
            g4 = g.reshape(ho, width, k, f)
            for dj in range(k):
                out[n] += as_strided(
                    g4[:, dj:, dj, :],
                    shape=(ho, wo, f),
                    strides=(width * k * f * itemsize, k * f * itemsize, itemsize),
                )
    return out


def _corr2d_input_grad(dy: np.ndarray, w: np.ndarray, input_hw: tuple[int, int]) -> np.ndarray:
    """Gradient w.r.t. the convolution input: full correlation with the
    kernel rotated 180 degrees and its channel axes swapped."""
    k = w.shape[0]
    n_batch, ho, wo, f = dy.shape
    pad = k - 1
    dyp = np.zeros((n_batch, ho + 2 * pad, wo + 2 * pad, f), dtype=dy.dtype)
    dyp[:, pad : pad + ho, pad : pad + wo, :] = dy
    w_rot = np.ascontiguousarray(w[::-1, ::-1].transpose(0, 1, 3, 2))
    dx = _corr2d(dyp, w_rot)
    if dx.shape[1:3] != input_hw:
        raise ShapeError(f"input-gradient shape {dx.shape[1:3]} != {input_hw}")
    return dx


def _corr2d_weight_grad(x: np.ndarray, dy: np.ndarray, k: int) -> np.ndarray:
    """Gradient w.r.t. the kernel: one (C, L) x (L, F) GEMM per (n, di, dj)
    over aligned contiguous slab views."""
    n_batch, h, width, c = x.shape
    _, ho, wo, f = dy.shape
    dw = np.zeros((k, k, c, f), dtype=x.dtype)
    length = ho * width - (k - 1)
    dy_flat = np.zeros((ho * width, f), dtype=dy.dtype)
    dy_view = dy_flat.reshape(ho, width, f)
    for n in range(n_batch):
        dy_view[:, :wo, :] = dy[n]
        for di in range(k):
            slab = x[n, di : di + ho].reshape(ho * width, c)
            for dj in range(k):
                dw[di, dj] += slab[dj : dj + length].T @ dy_flat[:length]
    return dw


# ---------------------------------------------------------------------------
# layers

class Layer:
    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dy: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def params(self) -> list[Param]:
        return []


class Conv2d(Layer):
    def __init__(self, in_channels, out_channels, kernel, rng, dtype, name="conv"):
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        # the first layer of a network can skip its input gradient
        self.needs_input_grad = True
        fan_in = in_channels * kernel * kernel
        self.w = Param(
            f"{name}.w",
            he_uniform(rng, (kernel, kernel, in_channels, out_channels), fan_in, dtype),
            is_weight=True,
        )
        self.b = Param(f"{name}.b", np.zeros(out_channels, dtype=dtype), is_weight=False)
        self._x = None

    def forward(self, x, train):
        if x.shape[3] != self.in_channels:
            raise ShapeError(f"expected {self.in_channels} input channels, got {x.shape[3]}")
        self._x = x if train else None
        y = _corr2d(x, self.w.value)
        y += self.b.value
        return y

    def backward(self, dy):
        x = self._x
        self.w.grad += _corr2d_weight_grad(x, dy, self.kernel)
        self.b.grad += dy.sum(axis=(0, 1, 2))
        if not self.needs_input_grad:
            return None
        return _corr2d_input_grad(dy, self.w.value, x.shape[1:3])

    def params(self):
        return [self.w, self.b]


class MaxPool2d(Layer):
    """Non-overlapping max pool with floor semantics; stride == pool size.

    Pool edges of size 2 (the only sizes the published architectures use)
    run as pairwise maxima over strided slices; other sizes fall back to an
    argmax gather. Ties route the gradient to the first maximum.
    """

    def __init__(self, pool_t, pool_f):
        self.pool_t = pool_t
        self.pool_f = pool_f
        self._cache = None

    def _halve(self, x, axis, train):
        a = x[:, ::2, :, :] if axis == 1 else x[:, :, ::2, :]
        b = x[:, 1::2, :, :] if axis == 1 else x[:, :, 1::2, :]
        n = min(a.shape[axis], b.shape[axis])
        a = a[:, :n] if axis == 1 else a[:, :, :n]
        b = b[:, :n] if axis == 1 else b[:, :, :n]
        first = a >= b
        out = np.where(first, a, b)
        return out, first if train else None

    def forward(self, x, train):
        n, h, width, c = x.shape
        pt, pf = self.pool_t, self.pool_f
        if h < pt or width < pf:
            raise ShapeError(f"input {h}x{width} smaller than pool {pt}x{pf}")
        if pt in (1, 2) and pf in (1, 2):
            stages = []
            out = x
            if pf == 2:
                out, mask = self._halve(out, 2, train)
                stages.append((2, mask))
            if pt == 2:
                out, mask = self._halve(out, 1, train)
                stages.append((1, mask))
            if train:
                self._cache = ("pairwise", x.shape, stages)
            return out
        ho, wo = h // pt, width // pf
        windows = (
            x[:, : ho * pt, : wo * pf, :]
            .reshape(n, ho, pt, wo, pf, c)
            .transpose(0, 1, 3, 5, 2, 4)
            .reshape(n, ho, wo, c, pt * pf)
        )
        if not train:
            return windows.max(axis=4)
        idx = windows.argmax(axis=4)
        out = np.take_along_axis(windows, idx[..., None], axis=4)[..., 0]
        self._cache = ("argmax", x.shape, idx)
        return out

    def backward(self, dy):
        kind, shape, payload = self._cache
        n, h, width, c = shape
        pt, pf = self.pool_t, self.pool_f
        if kind == "pairwise":
            for axis, mask in reversed(payload):
                size = h if axis == 1 else width
                up = np.zeros(dy.shape[:axis] + (size,) + dy.shape[axis + 1 :], dtype=dy.dtype)
                kept = mask.shape[axis]
                if axis == 1:
                    up[:, 0 : 2 * kept : 2] = dy * mask
                    up[:, 1 : 2 * kept : 2] = dy * ~mask
                else:
                    up[:, :, 0 : 2 * kept : 2] = dy * mask
                    up[:, :, 1 : 2 * kept : 2] = dy * ~mask
                dy = up
            return dy
        idx = payload
        ho, wo = h // pt, width // pf
        scattered = np.zeros((n, ho, wo, c, pt * pf), dtype=dy.dtype)
        np.put_along_axis(scattered, idx[..., None], dy[..., None], axis=4)
        dx = np.zeros((n, h, width, c), dtype=dy.dtype)
        dx[:, : ho * pt, : wo * pf, :] = (
            scattered.reshape(n, ho, wo, c, pt, pf)
            .transpose(0, 1, 4, 2, 5, 3)
            .reshape(n, ho * pt, wo * pf, c)
        )
        return dx


class Relu(Layer):
    def __init__(self):
        self._mask = None

    def forward(self, x, train):
        y = np.maximum(x, 0)
        if train:
            self._mask = x > 0
        return y

    def backward(self, dy):
        return dy * self._mask


class Flatten(Layer):
    def __init__(self):
        self._shape = None

    def forward(self, x, train):
        self._shape = x.shape
        return np.ascontiguousarray(x).reshape(x.shape[0], -1)

    def backward(self, dy):
        return dy.reshape(self._shape)


class Dense(Layer):
    def __init__(self, in_features, out_features, rng, dtype, name="fc"):
        self.in_features = in_features
        self.out_features = out_features
        self.w = Param(
            f"{name}.w",
            he_uniform(rng, (in_features, out_features), in_features, dtype),
            is_weight=True,
        )
        self.b = Param(f"{name}.b", np.zeros(out_features, dtype=dtype), is_weight=False)
        self._x = None

    def forward(self, x, train):
        if x.shape[1] != self.in_features:
            raise ShapeError(f"expected {self.in_features} inputs, got {x.shape[1]}")
        self._x = x if train else None
        return x @ self.w.value + self.b.value

    def backward(self, dy):
        self.w.grad += self._x.T @ dy
        self.b.grad += dy.sum(axis=0)
        return dy @ self.w.value.T

    def params(self):
        return [self.w, self.b]


class Dropout(Layer):
    """Inverted dropout: kept units are scaled by 1/keep_p during training
    so evaluation is the identity."""

    def __init__(self, keep_p, rng_source):
        if not 0.0 < keep_p <= 1.0:
            raise ValueError(f"keep probability must be in (0, 1], got {keep_p}")
        self.keep_p = keep_p
        self._rng_source = rng_source
        self._mask = None

    def forward(self, x, train):
        if not train or self.keep_p == 1.0:
            self._mask = None
            return x
        rng = self._rng_source()
        scale = 1.0 / self.keep_p
        self._mask = (rng.random(x.shape) < self.keep_p).astype(x.dtype) * x.dtype.type(scale)
        return x * self._mask

    def backward(self, dy):
        if self._mask is None:
            return dy
        return dy * self._mask


class Softmax(Layer):
    def __init__(self):
        self._y = None

    def forward(self, x, train):
        y = softmax(x)
        if train:
            self._y = y
        return y

    def backward(self, dy):
        y = self._y
        return y * (dy - (dy * y).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


# ---------------------------------------------------------------------------
# functional forms in the public (C, H, W) convention

def conv2d_forward(x: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Valid stride-1 cross-correlation of (C,H,W) or (N,C,H,W) input with
    (F,C,k,k) weights plus per-channel bias."""
    x = np.asarray(x)
    weights = np.asarray(weights)
    single = x.ndim == 3
    if single:
        x = x[None]
    if x.ndim != 4 or weights.ndim != 4:
        raise ShapeError("expected (N,C,H,W) input and (F,C,k,k) weights")
    if weights.shape[2] != weights.shape[3]:
        raise ShapeError("kernel must be square")
    if x.shape[1] != weights.shape[1]:
        raise ShapeError(f"channel mismatch: input {x.shape[1]}, weights {weights.shape[1]}")
    if bias.shape != (weights.shape[0],):
        raise ShapeError("bias must have one value per output channel")
    xt = np.ascontiguousarray(x.transpose(0, 2, 3, 1))
    wt = np.ascontiguousarray(weights.transpose(2, 3, 1, 0)).astype(xt.dtype, copy=False)
    y = _corr2d(xt, wt) + bias.astype(xt.dtype, copy=False)
    y = y.transpose(0, 3, 1, 2)
    return y[0] if single else y


def maxpool2d_forward(x: np.ndarray, pool_t: int, pool_f: int) -> np.ndarray:
    """Max over non-overlapping pool_t x pool_f windows with floor semantics."""
    x = np.asarray(x)
    single = x.ndim == 3
    if single:
        x = x[None]
    layer = MaxPool2d(pool_t, pool_f)
    y = layer.forward(np.ascontiguousarray(x.transpose(0, 2, 3, 1)), train=False)
    y = y.transpose(0, 3, 1, 2)
    return y[0] if single else y


def fc_forward(x: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Affine map weights @ x + bias with (D_out, D) weights."""
    x = np.asarray(x)
    weights = np.asarray(weights)
    if weights.ndim != 2 or weights.shape[1] != x.shape[-1]:
        raise ShapeError(f"weight shape {weights.shape} does not match input {x.shape}")
    return x @ weights.T + bias


def dropout_forward(x: np.ndarray, keep_p: float, mode: str, seed: int) -> np.ndarray:
    """Inverted dropout; mode is "train" or "eval"."""
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    x = np.asarray(x)
    layer = Dropout(keep_p, lambda: np.random.default_rng(seed))
    return layer.forward(x, train=(mode == "train"))
