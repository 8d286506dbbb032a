"""Network layers with explicit forward/backward passes.

Each layer caches what its backward pass needs during forward; backward
consumes the cache, stores parameter gradients on the layer and returns the
gradient with respect to its input. Convolutions use im2col + GEMM with the
column matrix rebuilt in backward (cheaper in memory than caching it).
Dropout follows the inverted convention (mask/(1-rate) at train time) so
evaluation is a pure pass-through.
"""

from __future__ import annotations

import numpy as np

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


class Layer:
    """Base layer: parameterless unless overridden."""

    def params(self) -> dict[str, np.ndarray]:
        return {}

    def buffers(self) -> dict[str, np.ndarray]:
        return {}

    def children(self) -> list["Layer"]:
        return []

    def forward(self, x: np.ndarray, train: bool, gen: np.random.Generator | None) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dy: np.ndarray) -> np.ndarray:
        raise NotImplementedError


def _run_chain(layers: list[Layer], x, train, gen):
    for layer in layers:
        x = layer.forward(x, train, gen)
    return x


def _back_chain(layers: list[Layer], dy):
    for layer in reversed(layers):
        dy = layer.backward(dy)
    return dy


class Dense(Layer):
    def __init__(self, n_in: int, n_out: int):
        self.n_in, self.n_out = n_in, n_out
        self.weight = np.zeros((n_in, n_out))
        self.bias = np.zeros(n_out)
        self.grads: dict[str, np.ndarray] = {}
        self._x: np.ndarray | None = None

    def params(self):
        return {"weight": self.weight, "bias": self.bias}

    def forward(self, x, train, gen):
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise ValueError(f"Dense({self.n_in},{self.n_out}) got input {x.shape}")
        self._x = x
        return x @ self.weight + self.bias

    def backward(self, dy):
        x = self._x
        self.grads = {"weight": x.T @ dy, "bias": dy.sum(axis=0)}
        return dy @ self.weight.T


class Conv2d(Layer):
    """im2col convolution with channel-major tap stacking.

    Columns are laid out (N, C*kh*kw, Ho*Wo) so both the copies that build
    them and the batched GEMMs against the (c_out, C*kh*kw) weight matrix
    run on contiguous blocks; the column tensor is rebuilt in backward
    instead of cached (it is by far the largest intermediate).
    """

    def __init__(self, c_in: int, c_out: int, kh: int = 3, kw: int = 3, stride: int = 1, padding: int = 1):
        self.c_in, self.c_out = c_in, c_out
        self.kh, self.kw, self.stride, self.padding = kh, kw, stride, padding
        self.weight = np.zeros((c_out, c_in, kh, kw))
        self.bias = np.zeros(c_out)
        self.grads: dict[str, np.ndarray] = {}
        self._xp: np.ndarray | None = None  # padded input
        self._hw: tuple[int, int, int, int, int] | None = None

    def params(self):
        return {"weight": self.weight, "bias": self.bias}

    def _out_hw(self, h: int, w: int) -> tuple[int, int]:
        ho = (h + 2 * self.padding - self.kh) // self.stride + 1
        wo = (w + 2 * self.padding - self.kw) // self.stride + 1
        if ho < 1 or wo < 1:
            raise ValueError(
                f"input {h}x{w} narrower than the {self.kh}x{self.kw} receptive field"
            )
        return ho, wo

    def _columns(self, xp: np.ndarray, ho: int, wo: int) -> np.ndarray:
        n, c = xp.shape[0], xp.shape[1]
        s = self.stride
        cols = np.empty((n, c, self.kh, self.kw, ho, wo), dtype=xp.dtype)
        for i in range(self.kh):
            for j in range(self.kw):
                cols[:, :, i, j] = xp[:, :, i : i + ho * s : s, j : j + wo * s : s]
        return cols.reshape(n, c * self.kh * self.kw, ho * wo)

    def forward(self, x, train, gen):
        if x.ndim != 4 or x.shape[1] != self.c_in:
            raise ValueError(f"Conv2d expected (N,{self.c_in},H,W), got {x.shape}")
        n, _, h, w = x.shape
        ho, wo = self._out_hw(h, w)
        p = self.padding
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x
        self._hw = (n, h, w, ho, wo)
        self._xp = xp
        cols = self._columns(xp, ho, wo)
        w_mat = self.weight.reshape(self.c_out, -1).astype(x.dtype, copy=False)
        y = np.matmul(w_mat, cols) + self.bias.astype(x.dtype, copy=False)[:, None]
        return y.reshape(n, self.c_out, ho, wo)

    def backward(self, dy):
        n, h, w, ho, wo = self._hw
        p, s = self.padding, self.stride
        # rebuild columns from the padded input; cheaper than holding them
        cols = self._columns(self._xp, ho, wo)
        dy_mat = dy.reshape(n, self.c_out, ho * wo)
        dw = np.matmul(dy_mat, cols.transpose(0, 2, 1)).sum(axis=0)
        self.grads = {
            "weight": dw.reshape(self.weight.shape),
            "bias": dy.sum(axis=(0, 2, 3)),
        }
        w_mat = self.weight.reshape(self.c_out, -1).astype(dy.dtype, copy=False)
        dcols = np.matmul(w_mat.T, dy_mat).reshape(n, self.c_in, self.kh, self.kw, ho, wo)
        dxp = np.zeros(
            (n, self.c_in, h + 2 * p, w + 2 * p), dtype=dy.dtype
        )
        for i in range(self.kh):
            for j in range(self.kw):
                dxp[:, :, i : i + ho * s : s, j : j + wo * s : s] += dcols[:, :, i, j]
        return dxp[:, :, p : p + h, p : p + w] if p else dxp


class BatchNorm(Layer):
    """Batch normalization over features (N,F) or channels (N,C,H,W)."""

    def __init__(self, n_features: int):
        self.n_features = n_features
        self.gamma = np.ones(n_features)
        self.beta = np.zeros(n_features)
        self.running_mean = np.zeros(n_features)
        self.running_var = np.ones(n_features)
        self.grads: dict[str, np.ndarray] = {}
        self._cache = None

    def params(self):
        return {"gamma": self.gamma, "beta": self.beta}

    def buffers(self):
        return {"running_mean": self.running_mean, "running_var": self.running_var}

    @staticmethod
    def _axes(x: np.ndarray) -> tuple[int, ...]:
        if x.ndim == 2:
            return (0,)
        if x.ndim == 4:
            return (0, 2, 3)
        raise ValueError(f"BatchNorm supports 2-D or 4-D inputs, got {x.ndim}-D")

    def _reshape_param(self, p: np.ndarray, ndim: int) -> np.ndarray:
        return p.reshape(1, -1) if ndim == 2 else p.reshape(1, -1, 1, 1)

    def forward(self, x, train, gen):
        axes = self._axes(x)
        dim = x.shape[1]
        if dim != self.n_features:
            raise ValueError(f"BatchNorm({self.n_features}) got {dim} features")
        if train:
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            self.running_mean = (1 - BN_MOMENTUM) * self.running_mean + BN_MOMENTUM * np.asarray(
                mean, dtype=np.float64
            )
            self.running_var = (1 - BN_MOMENTUM) * self.running_var + BN_MOMENTUM * np.asarray(
                var, dtype=np.float64
            )
        else:
            mean = self.running_mean.astype(x.dtype, copy=False)
            var = self.running_var.astype(x.dtype, copy=False)
        inv_std = 1.0 / np.sqrt(var + BN_EPS)
        xhat = (x - self._reshape_param(mean, x.ndim)) * self._reshape_param(inv_std, x.ndim)
        self._cache = (xhat, inv_std, train, axes)
        return self._reshape_param(self.gamma.astype(x.dtype, copy=False), x.ndim) * xhat + (
            self._reshape_param(self.beta.astype(x.dtype, copy=False), x.ndim)
        )

    def backward(self, dy):
        xhat, inv_std, train, axes = self._cache
        self.grads = {"gamma": (dy * xhat).sum(axis=axes), "beta": dy.sum(axis=axes)}
        g = self._reshape_param(self.gamma.astype(dy.dtype, copy=False), dy.ndim)
        istd = self._reshape_param(inv_std, dy.ndim)
        if not train:
            return dy * g * istd
        m = dy.size // dy.shape[1]
        dxhat = dy * g
        sum_dxhat = self._reshape_param(dxhat.sum(axis=axes), dy.ndim)
        sum_dxhat_xhat = self._reshape_param((dxhat * xhat).sum(axis=axes), dy.ndim)
        return (istd / m) * (m * dxhat - sum_dxhat - xhat * sum_dxhat_xhat)


class ReLU(Layer):
    """Rectifier; `passthrough_backward` lets visualization code temporarily
    route gradients through zero activations."""

    def __init__(self):
        self.passthrough_backward = False
        self._mask: np.ndarray | None = None

    def forward(self, x, train, gen):
        self._mask = x > 0
        return x * self._mask

    def backward(self, dy):
        if self.passthrough_backward:
            return dy
        return dy * self._mask


class Dropout(Layer):
    def __init__(self, rate: float):
        if not 0.0 <= rate < 1.0:
            raise ValueError("dropout rate must lie in [0, 1)")
        self.rate = rate
        self._mask: np.ndarray | float = 1.0

    def forward(self, x, train, gen):
        if not train or self.rate == 0.0:
            self._mask = 1.0
            return x
        if gen is None:
            raise ValueError("training-mode dropout needs a random generator")
        keep = (gen.random(x.shape) >= self.rate).astype(x.dtype)
        self._mask = keep / (1.0 - self.rate)
        return x * self._mask

    def backward(self, dy):
        return dy * self._mask


class Flatten(Layer):
    def __init__(self):
        self._shape: tuple[int, ...] | None = None

    def forward(self, x, train, gen):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dy):
        return dy.reshape(self._shape)


class GlobalAveragePool(Layer):
    def __init__(self):
        self._hw: tuple[int, int] | None = None

    def forward(self, x, train, gen):
        if x.ndim != 4:
            raise ValueError("GlobalAveragePool expects (N,C,H,W)")
        self._hw = x.shape[2:]
        return x.mean(axis=(2, 3))

    def backward(self, dy):
        h, w = self._hw
        return np.broadcast_to(dy[:, :, None, None], dy.shape + (h, w)).copy() / (h * w)


class Softmax(Layer):
    def __init__(self):
        self._p: np.ndarray | None = None

    def forward(self, x, train, gen):
        z = x - x.max(axis=1, keepdims=True)
        e = np.exp(z)
        self._p = e / e.sum(axis=1, keepdims=True)
        return self._p

    def backward(self, dy):
        p = self._p
        return p * (dy - (dy * p).sum(axis=1, keepdims=True))


class ResidualBlock(Layer):
    """inner(x) + skip(x) followed by a ReLU after the addition."""

    def __init__(self, inner: list[Layer], skip: list[Layer] | None = None):
        self.inner = inner
        self.skip = skip or []
        self.post = ReLU()

    def children(self):
        return self.inner + self.skip + [self.post]

    def forward(self, x, train, gen):
        main = _run_chain(self.inner, x, train, gen)
        shortcut = _run_chain(self.skip, x, train, gen) if self.skip else x
        if main.shape != shortcut.shape:
            raise ValueError(f"residual shapes differ: {main.shape} vs {shortcut.shape}")
        return self.post.forward(main + shortcut, train, gen)

    def backward(self, dy):
        dsum = self.post.backward(dy)
        dx = _back_chain(self.inner, dsum)
        if self.skip:
            dx = dx + _back_chain(self.skip, dsum)
        else:
            dx = dx + dsum
        return dx


class BranchConcat(Layer):
    """Run a branch on all but the last `passthrough` features, then
    re-append those features to the branch output (the Y-junction)."""

    def __init__(self, branch: list[Layer], passthrough: int = 1):
        if passthrough < 1:
            raise ValueError("passthrough must be at least 1")
        self.branch = branch
        self.passthrough = passthrough
        self._branch_width: int | None = None

    def children(self):
        return list(self.branch)

    def forward(self, x, train, gen):
        if x.ndim != 2 or x.shape[1] <= self.passthrough:
            raise ValueError(f"BranchConcat got input {x.shape}")
        main = _run_chain(self.branch, x[:, : -self.passthrough], train, gen)
        self._branch_width = main.shape[1]
        return np.concatenate([main, x[:, -self.passthrough :]], axis=1)

    def backward(self, dy):
        dmain = _back_chain(self.branch, dy[:, : self._branch_width])
        return np.concatenate([dmain, dy[:, self._branch_width :]], axis=1)
