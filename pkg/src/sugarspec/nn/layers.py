"""Layers with explicit forward/backward passes (float64, channels-last).

Each layer exposes ``param_shapes`` and operates on parameter views handed
in by the network, so the whole model lives in one flat vector.
"""

from __future__ import annotations

import numpy as np

from .. import _kernels


class Layer:
    param_shapes: tuple[tuple[int, ...], ...] = ()

    def out_shape(self, in_shape: tuple[int, ...]) -> tuple[int, ...]:
        return in_shape

    def forward(self, x, params):
        """Returns (output, cache)."""
        raise NotImplementedError

    def backward(self, grad, cache, params):
        """Returns (grad wrt input, [grad wrt each param])."""
        raise NotImplementedError

    def fans(self) -> tuple[int, int]:
        return (1, 1)


class Dense(Layer):
    def __init__(self, n_in: int, n_out: int):
        self.n_in, self.n_out = n_in, n_out
        self.param_shapes = ((n_in, n_out), (n_out,))

    def out_shape(self, in_shape):
        if in_shape != (self.n_in,):
            raise ValueError(f"Dense expects ({self.n_in},), got {in_shape}")
        return (self.n_out,)

    def fans(self):
        return self.n_in, self.n_out

    def forward(self, x, params):
        W, b = params
        return x @ W + b, x

    def backward(self, grad, cache, params):
        W, _ = params
        return grad @ W.T, [cache.T @ grad, grad.sum(axis=0)]


class ReLU(Layer):
    def forward(self, x, params):
        mask = x > 0
        return x * mask, mask

    def backward(self, grad, cache, params):
        return grad * cache, []


class SelfCorrelation(Layer):
    """v (n, m) -> v v^T as a one-channel (n, m, m, 1) map."""

    def out_shape(self, in_shape):
        (m,) = in_shape
        return (m, m, 1)

    def forward(self, x, params):
        return (x[:, :, None] * x[:, None, :])[..., None], x

    def backward(self, grad, cache, params):
        g = grad[..., 0]
        v = cache
        # d(v_i v_j)/dv_k = delta_ik v_j + delta_jk v_i
        return np.einsum("nij,nj->ni", g + g.transpose(0, 2, 1), v), []


class Wrap(Layer):
    """Row-major reshape of a side*side feature vector into a (side, side, 1) map."""

    def __init__(self, side: int):
        self.side = side

    def out_shape(self, in_shape):
        if in_shape != (self.side * self.side,):
            raise ValueError(f"Wrap({self.side}) expects {self.side ** 2} features, got {in_shape}")
        return (self.side, self.side, 1)

    def forward(self, x, params):
        return x.reshape(x.shape[0], self.side, self.side, 1), None

    def backward(self, grad, cache, params):
        return grad.reshape(grad.shape[0], -1), []


class Flatten(Layer):
    def out_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def forward(self, x, params):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, grad, cache, params):
        return grad.reshape(cache), []


class ConvSame(Layer):
    """Zero-padded convolution that keeps the spatial size."""

    def __init__(self, c_in: int, c_out: int, kernel: tuple[int, int]):
        kh, kw = kernel
        if kh % 2 == 0 or kw % 2 == 0:
            raise ValueError("same-padded kernels must have odd sizes")
        self.c_in, self.c_out, self.kernel = c_in, c_out, (kh, kw)
        self.param_shapes = ((kh, kw, c_in, c_out), (c_out,))

    def out_shape(self, in_shape):
        h, w, c = in_shape
        if c != self.c_in:
            raise ValueError(f"conv expects {self.c_in} channels, got {c}")
        return (h, w, self.c_out)

    def fans(self):
        kh, kw = self.kernel
        return self.c_in * kh * kw, self.c_out * kh * kw

    def forward(self, x, params):
        K, b = params
        x = np.ascontiguousarray(x)
        return _kernels.conv_same_forward(x, K, b), x

    def backward(self, grad, cache, params):
        K, _ = params
        dx, dK, db = _kernels.conv_same_backward(cache, K, np.ascontiguousarray(grad))
        return dx, [dK, db]


class FullExtentConv(Layer):
    """Kernel as large as its (h, w, c) input: one scalar per sample, no padding."""

    def __init__(self, h: int, w: int, c: int):
        self.shape = (h, w, c)
        self.param_shapes = ((h, w, c), (1,))

    def out_shape(self, in_shape):
        if tuple(in_shape) != self.shape:
            raise ValueError(f"full-extent conv expects {self.shape}, got {in_shape}")
        return (1,)

    def fans(self):
        return int(np.prod(self.shape)), 1

    def forward(self, x, params):
        K, b = params
        n = x.shape[0]
        return x.reshape(n, -1) @ K.reshape(-1, 1) + b, x

    def backward(self, grad, cache, params):
        K, _ = params
        n = cache.shape[0]
        dK = (cache.reshape(n, -1).T @ grad).reshape(K.shape)
        dx = (grad @ K.reshape(1, -1)).reshape(cache.shape)
        return dx, [dK, grad.sum(axis=0)]
