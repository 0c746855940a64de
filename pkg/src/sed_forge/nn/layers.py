"""The layer zoo with exact forward and backward passes.

Everything is plain numpy. Each layer caches what its backward pass needs
during forward; backward returns the gradient w.r.t. the layer input and
fills `grads` for learnable parameters. Shapes:

    conv stage       (batch, maps, freq, time)
    sequence stage   (batch, units, time)
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, EngineStateError, ShapeError

BN_EPS = 1e-5
BN_MOMENTUM = 0.99


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function, dtype preserving."""
    out = np.empty_like(x)
    positive = x >= 0
    out[positive] = 1.0 / (1.0 + np.exp(-x[positive]))
    ex = np.exp(x[~positive])
    out[~positive] = ex / (1.0 + ex)
    return out


def dropout_mask(
    shape: tuple[int, ...],
    rate: float,
    rng: np.random.Generator,
    sequence_constant: bool = False,
    dtype=np.float64,
) -> np.ndarray:
    """Inverted-dropout keep mask, scaled by 1/(1-rate).

    With sequence_constant the trailing (time) axis collapses to length 1 so
    one draw broadcasts across every frame of the sequence.
    """
    if not 0 <= rate < 1:
        raise ConfigError(f"dropout rate must lie in [0, 1), got {rate}")
    if sequence_constant:
        shape = shape[:-1] + (1,)
    if rate == 0:
        return np.ones(shape, dtype=dtype)
    keep = 1.0 - rate
    return (rng.random(shape) < keep).astype(dtype) / keep


class Layer:
    """Shared bookkeeping; concrete layers implement forward/backward."""

    def __init__(self, name: str):
        self.name = name
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.buffers: dict[str, np.ndarray] = {}
        self._cache = None

    def init_params(self, rng: np.random.Generator, dtype) -> None:
        pass

    def zero_grads(self) -> None:
        for key, value in self.params.items():
            self.grads[key] = np.zeros_like(value)

    def forward(self, x, training=False, rng=None):
        raise NotImplementedError

    def backward(self, dout):
        raise NotImplementedError

    def _need_cache(self):
        if self._cache is None:
            raise EngineStateError(f"{self.name}: backward called without a cached forward")
        return self._cache


def _he_normal(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, dtype) -> np.ndarray:
    return (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(dtype)


class Conv2dSame(Layer):
    """2-D convolution with zero padding chosen so freq/time sizes never shrink."""

    def __init__(self, name: str, in_maps: int, out_maps: int, kernel: tuple[int, int]):
        super().__init__(name)
        self.in_maps = in_maps
        self.out_maps = out_maps
        self.kf, self.kt = kernel
        # asymmetric for even kernels: (k-1)//2 leading, k//2 trailing
        self.pad_f = ((self.kf - 1) // 2, self.kf // 2)
        self.pad_t = ((self.kt - 1) // 2, self.kt // 2)

    def init_params(self, rng, dtype):
        fan_in = self.in_maps * self.kf * self.kt
        self.params = {
            "W": _he_normal(rng, (self.out_maps, self.in_maps, self.kf, self.kt), fan_in, dtype),
            "b": np.zeros(self.out_maps, dtype=dtype),
        }
        self.zero_grads()

    def forward(self, x, training=False, rng=None):
        if x.ndim != 4 or x.shape[1] != self.in_maps:
            raise ShapeError(
                f"{self.name}: expected (batch, {self.in_maps}, freq, time), got {x.shape}"
            )
        num, _, freq, time = x.shape
        padded = np.pad(x, ((0, 0), (0, 0), self.pad_f, self.pad_t))
        weights = self.params["W"]
        out = np.zeros((num, freq, time, self.out_maps), dtype=x.dtype)
        for df in range(self.kf):
            for dt in range(self.kt):
                out += np.tensordot(
                    padded[:, :, df : df + freq, dt : dt + time],
                    weights[:, :, df, dt],
                    axes=([1], [1]),
                )
        out = out.transpose(0, 3, 1, 2) + self.params["b"][None, :, None, None]
        self._cache = (padded, (num, freq, time))
        return out

    def backward(self, dout):
        padded, (num, freq, time) = self._need_cache()
        weights = self.params["W"]
        self.grads["b"] = dout.sum(axis=(0, 2, 3))
        d_w = np.zeros_like(weights)
        d_padded = np.zeros_like(padded)
        for df in range(self.kf):
            for dt in range(self.kt):
                window = padded[:, :, df : df + freq, dt : dt + time]
                d_w[:, :, df, dt] = np.tensordot(dout, window, axes=([0, 2, 3], [0, 2, 3]))
                d_padded[:, :, df : df + freq, dt : dt + time] += np.tensordot(
                    dout, weights[:, :, df, dt], axes=([1], [0])
                ).transpose(0, 3, 1, 2)
        self.grads["W"] = d_w
        f0, t0 = self.pad_f[0], self.pad_t[0]
        return d_padded[:, :, f0 : f0 + freq, t0 : t0 + time]


class BatchNorm(Layer):
    """Normalize per channel (axis 1) over every other axis.

    Training uses mini-batch statistics and updates the running estimates
    with momentum 0.99; inference uses the running estimates.
    """

    def __init__(self, name: str, channels: int):
        super().__init__(name)
        self.channels = channels

    def init_params(self, rng, dtype):
        self.params = {
            "gamma": np.ones(self.channels, dtype=dtype),
            "beta": np.zeros(self.channels, dtype=dtype),
        }
        self.buffers = {
            "running_mean": np.zeros(self.channels, dtype=dtype),
            "running_var": np.ones(self.channels, dtype=dtype),
        }
        self.zero_grads()

    def _bc(self, v: np.ndarray, ndim: int) -> np.ndarray:
        shape = [1] * ndim
        shape[1] = self.channels
        return v.reshape(shape)

    def forward(self, x, training=False, rng=None):
        if x.ndim not in (3, 4) or x.shape[1] != self.channels:
            raise ShapeError(f"{self.name}: expected {self.channels} channels, got shape {x.shape}")
        axes = tuple(i for i in range(x.ndim) if i != 1)
        if training:
            count = x.size // self.channels
            if count < 2:
                raise ShapeError(
                    f"{self.name}: batch statistics need at least 2 samples per channel, got {count}"
                )
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            rm, rv = self.buffers["running_mean"], self.buffers["running_var"]
            rm *= BN_MOMENTUM
            rm += (1.0 - BN_MOMENTUM) * mean.astype(rm.dtype)
            rv *= BN_MOMENTUM
            rv += (1.0 - BN_MOMENTUM) * var.astype(rv.dtype)
        else:
            mean = self.buffers["running_mean"]
            var = self.buffers["running_var"]
        inv_std = 1.0 / np.sqrt(var + BN_EPS)
        xhat = (x - self._bc(mean, x.ndim)) * self._bc(inv_std, x.ndim)
        out = self._bc(self.params["gamma"], x.ndim) * xhat + self._bc(self.params["beta"], x.ndim)
        self._cache = (xhat, inv_std, axes, training)
        return out.astype(x.dtype)

    def backward(self, dout):
        xhat, inv_std, axes, training = self._need_cache()
        self.grads["gamma"] = (dout * xhat).sum(axis=axes)
        self.grads["beta"] = dout.sum(axis=axes)
        dxhat = dout * self._bc(self.params["gamma"], dout.ndim)
        inv_bc = self._bc(inv_std, dout.ndim)
        if not training:
            return dxhat * inv_bc
        # d/dx of ((x - mean) * inv_std) with mean/var functions of x
        return inv_bc * (
            dxhat
            - dxhat.mean(axis=axes, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=axes, keepdims=True)
        )


class Relu(Layer):
    def forward(self, x, training=False, rng=None):
        mask = x > 0
        self._cache = mask
        return x * mask

    def backward(self, dout):
        return dout * self._need_cache()


class FreqMaxPool(Layer):
    """Non-overlapping max pooling along frequency only; time is untouched."""

    def __init__(self, name: str, pool: int):
        super().__init__(name)
        if pool < 1:
            raise ConfigError(f"pool size must be at least 1, got {pool}")
        self.pool = pool

    def forward(self, x, training=False, rng=None):
        num, maps, freq, time = x.shape
        if freq % self.pool != 0:
            raise ShapeError(f"{self.name}: pool {self.pool} does not divide {freq} bins")
        grouped = x.reshape(num, maps, freq // self.pool, self.pool, time)
        argmax = grouped.argmax(axis=3)
        out = np.take_along_axis(grouped, argmax[:, :, :, None, :], axis=3)[:, :, :, 0, :]
        self._cache = (argmax, grouped.shape, x.shape)
        return out

    def backward(self, dout):
        argmax, grouped_shape, x_shape = self._need_cache()
        d_grouped = np.zeros(grouped_shape, dtype=dout.dtype)
        np.put_along_axis(d_grouped, argmax[:, :, :, None, :], dout[:, :, :, None, :], axis=3)
        return d_grouped.reshape(x_shape)


class StackMaps(Layer):
    """Flatten (maps, freq) into one feature axis, map-major; invertible."""

    def forward(self, x, training=False, rng=None):
        num, maps, freq, time = x.shape
        self._cache = (maps, freq)
        return x.reshape(num, maps * freq, time)

    def backward(self, dout):
        maps, freq = self._need_cache()
        num, _, time = dout.shape
        return dout.reshape(num, maps, freq, time)


def unstack_maps(stacked: np.ndarray, maps: int, freq: int) -> np.ndarray:
    """Inverse of StackMaps.forward for round-trip checks."""
    num, features, time = stacked.shape
    if features != maps * freq:
        raise ShapeError(f"cannot unstack {features} features into {maps}x{freq}")
    return stacked.reshape(num, maps, freq, time)


class GRULayer(Layer):
    """Gated recurrent unit over (batch, features, time).

    Gates: z = sigm(W_z x + U_z h' + b_z), r = sigm(W_r x + U_r h' + b_r),
    candidate g = tanh(W_h x + U_h (r * h') + b_h), and the state update
    h_t = z * h_{t-1} + (1 - z) * g. Here h' is the previous state times the
    recurrent dropout mask, which is drawn once per sequence; the direct
    z * h_{t-1} carry is never masked. The initial state is zero.
    """

    def __init__(self, name: str, in_features: int, units: int, recurrent_dropout: float = 0.0):
        super().__init__(name)
        if not 0 <= recurrent_dropout < 1:
            raise ConfigError(f"recurrent_dropout must lie in [0, 1), got {recurrent_dropout}")
        self.in_features = in_features
        self.units = units
        self.recurrent_dropout = recurrent_dropout

    def init_params(self, rng, dtype):
        d, h = self.in_features, self.units
        params = {}
        for gate in ("z", "r", "h"):
            params[f"W{gate}"] = _he_normal(rng, (h, d), d, dtype)
            params[f"U{gate}"] = _he_normal(rng, (h, h), h, dtype)
            params[f"b{gate}"] = np.zeros(h, dtype=dtype)
        self.params = params
        self.zero_grads()

    def forward(self, x, training=False, rng=None):
        if x.ndim != 3 or x.shape[1] != self.in_features:
            raise ShapeError(
                f"{self.name}: expected (batch, {self.in_features}, time), got {x.shape}"
            )
        num, _, time = x.shape
        p = self.params
        if training and self.recurrent_dropout > 0:
            if rng is None:
                raise EngineStateError(f"{self.name}: training forward needs an rng for dropout")
            mask = dropout_mask(
                (num, self.units, time), self.recurrent_dropout, rng,
                sequence_constant=True, dtype=x.dtype,
            )[:, :, 0]
        else:
            mask = np.ones((num, self.units), dtype=x.dtype)

        zs = np.empty((num, self.units, time), dtype=x.dtype)
        rs = np.empty_like(zs)
        gs = np.empty_like(zs)
        hs = np.empty_like(zs)
        h_prev = np.zeros((num, self.units), dtype=x.dtype)
        for t in range(time):
            xt = x[:, :, t]
            hp = h_prev * mask
            z = sigmoid(xt @ p["Wz"].T + hp @ p["Uz"].T + p["bz"])
            r = sigmoid(xt @ p["Wr"].T + hp @ p["Ur"].T + p["br"])
            g = np.tanh(xt @ p["Wh"].T + (r * hp) @ p["Uh"].T + p["bh"])
            h_prev = z * h_prev + (1.0 - z) * g
            zs[:, :, t] = z
            rs[:, :, t] = r
            gs[:, :, t] = g
            hs[:, :, t] = h_prev
        self._cache = (x, mask, zs, rs, gs, hs)
        return hs

    def backward(self, dout):
        x, mask, zs, rs, gs, hs = self._need_cache()
        num, _, time = x.shape
        p = self.params
        grads = {key: np.zeros_like(value) for key, value in p.items()}
        dx = np.zeros_like(x)
        d_carry = np.zeros((num, self.units), dtype=x.dtype)
        for t in range(time - 1, -1, -1):
            h_prev = hs[:, :, t - 1] if t > 0 else np.zeros((num, self.units), dtype=x.dtype)
            hp = h_prev * mask
            z, r, g = zs[:, :, t], rs[:, :, t], gs[:, :, t]
            xt = x[:, :, t]

            dh = dout[:, :, t] + d_carry
            dz = dh * (h_prev - g)
            da_z = dz * z * (1.0 - z)
            dg = dh * (1.0 - z)
            da_h = dg * (1.0 - g * g)
            dc = da_h @ p["Uh"]  # c = r * hp feeds the candidate through U_h
            dr = dc * hp
            da_r = dr * r * (1.0 - r)
            d_hp = dc * r + da_z @ p["Uz"] + da_r @ p["Ur"]
            d_carry = dh * z + mask * d_hp
            dx[:, :, t] = da_z @ p["Wz"] + da_r @ p["Wr"] + da_h @ p["Wh"]

            grads["Wz"] += da_z.T @ xt
            grads["Uz"] += da_z.T @ hp
            grads["bz"] += da_z.sum(axis=0)
            grads["Wr"] += da_r.T @ xt
            grads["Ur"] += da_r.T @ hp
            grads["br"] += da_r.sum(axis=0)
            grads["Wh"] += da_h.T @ xt
            grads["Uh"] += da_h.T @ (r * hp)
            grads["bh"] += da_h.sum(axis=0)
        self.grads = grads
        return dx


class Dense(Layer):
    """Per-frame affine map with an elementwise activation."""

    def __init__(self, name: str, in_features: int, units: int, activation: str = "sigmoid"):
        super().__init__(name)
        if activation not in ("sigmoid", "linear", "relu"):
            raise ConfigError(f"unknown activation {activation!r}")
        self.in_features = in_features
        self.units = units
        self.activation = activation

    def init_params(self, rng, dtype):
        self.params = {
            "W": _he_normal(rng, (self.units, self.in_features), self.in_features, dtype),
            "b": np.zeros(self.units, dtype=dtype),
        }
        self.zero_grads()

    def forward(self, x, training=False, rng=None):
        if x.ndim != 3 or x.shape[1] != self.in_features:
            raise ShapeError(
                f"{self.name}: expected (batch, {self.in_features}, time), got {x.shape}"
            )
        pre = np.einsum("ud,ndt->nut", self.params["W"], x) + self.params["b"][None, :, None]
        if self.activation == "sigmoid":
            out = sigmoid(pre)
        elif self.activation == "relu":
            out = pre * (pre > 0)
        else:
            out = pre
        self._cache = (x, pre, out)
        return out

    def backward(self, dout):
        x, pre, out = self._need_cache()
        if self.activation == "sigmoid":
            d_pre = dout * out * (1.0 - out)
        elif self.activation == "relu":
            d_pre = dout * (pre > 0)
        else:
            d_pre = dout
        self.grads["W"] = np.einsum("nut,ndt->ud", d_pre, x)
        self.grads["b"] = d_pre.sum(axis=(0, 2))
        return np.einsum("ud,nut->ndt", self.params["W"], d_pre)


class Dropout(Layer):
    """Standard (time-varying) inverted dropout; identity at inference."""

    def __init__(self, name: str, rate: float):
        super().__init__(name)
        if not 0 <= rate < 1:
            raise ConfigError(f"dropout rate must lie in [0, 1), got {rate}")
        self.rate = rate

    def forward(self, x, training=False, rng=None):
        if not training or self.rate == 0:
            self._cache = (None,)
            return x
        if rng is None:
            raise EngineStateError(f"{self.name}: training forward needs an rng")
        mask = dropout_mask(x.shape, self.rate, rng, dtype=x.dtype)
        self._cache = (mask,)
        return x * mask

    def backward(self, dout):
        (mask,) = self._need_cache()
        return dout if mask is None else dout * mask


class TemporalMaxPool(Layer):
    """Per-feature max over time; gradient flows to the argmax frames only."""

    def forward(self, x, training=False, rng=None):
        if x.ndim != 3:
            raise ShapeError(f"{self.name}: expected (batch, units, time), got {x.shape}")
        argmax = x.argmax(axis=2)
        out = np.take_along_axis(x, argmax[:, :, None], axis=2)
        self._cache = (argmax, x.shape)
        return out

    def backward(self, dout):
        argmax, x_shape = self._need_cache()
        dx = np.zeros(x_shape, dtype=dout.dtype)
        np.put_along_axis(dx, argmax[:, :, None], dout, axis=2)
        return dx
