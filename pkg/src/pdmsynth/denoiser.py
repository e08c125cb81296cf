"""Conditional noise-prediction network with hand-written reverse-mode gradients.

Each residual block mixes locally with a dilated width-3 convolution and a
gated-tanh unit, then globally with a diagonal linear recurrence scanned along
time::

    y   = h + proj(c) + proj(emb(t))
    a   = conv_dilated(y)
    z   = tanh(a[:H]) * sigmoid(a[H:])
    s_t = lam * s_{t-1} + (1 - lam) * (z_t W_u + b_u)
    r   = s W_r + b_r
    h  <- (h + r) / sqrt(2),   skip += r

The output is a linear map of the accumulated skips. All arrays are batch
first: ``(N, l, d)`` inputs, ``(N, l, H)`` hidden states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

SQRT_HALF = math.sqrt(0.5)
DEFAULT_DILATIONS = (1, 2, 4, 8, 16, 32)


class DivergenceError(FloatingPointError):
    """The network produced NaN or infinite values."""


@dataclass(frozen=True)
class ConSignal:
    bearing_onehot: np.ndarray
    is_faulty: int

    def __post_init__(self):
        oh = np.asarray(self.bearing_onehot)
        if oh.ndim != 1 or oh.sum() != 1 or not np.all((oh == 0) | (oh == 1)):
            raise ValueError("bearing_onehot must contain exactly one 1")
        if self.is_faulty not in (0, 1):
            raise ValueError("is_faulty must be 0 or 1")

    @property
    def packed(self) -> np.ndarray:
        return np.concatenate([np.asarray(self.bearing_onehot, float), [float(self.is_faulty)]])

    @property
    def bearing_index(self) -> int:
        return int(np.argmax(self.bearing_onehot))

    @classmethod
    def make(cls, bearing_index: int, n_bearings: int, is_faulty) -> "ConSignal":
        oh = np.zeros(n_bearings, dtype=np.int64)
        oh[bearing_index] = 1
        return cls(oh, int(bool(is_faulty)))


def pack_signals(signals) -> np.ndarray:
    if isinstance(signals, ConSignal):
        signals = [signals]
    if isinstance(signals, np.ndarray):
        return np.atleast_2d(signals).astype(np.float64)
    return np.stack([s.packed for s in signals])


def embed_step(t, e: int, T: int | None = None) -> np.ndarray:
    """Sinusoidal step embedding; accepts a scalar or an integer array."""
    t_arr = np.asarray(t)
    if T is not None and (np.any(t_arr < 0) or np.any(t_arr >= T)):
        raise ValueError(f"diffusion step out of range [0, {T})")
    half = np.arange(0, e, 2)
    freq = 1.0 / 10000.0 ** (half / e)
    ang = t_arr.astype(np.float64)[..., None] * freq
    out = np.empty(t_arr.shape + (e,))
    out[..., 0::2] = np.sin(ang)
    out[..., 1::2] = np.cos(ang[..., : e // 2])
    return out


@dataclass
class DenoiserParams:
    l: int
    d: int
    h: int
    R: int
    e: int
    B: int
    T: int
    dilations: tuple[int, ...] = DEFAULT_DILATIONS
    arrays: dict[str, np.ndarray] = field(default_factory=dict)
    block_enabled: list[bool] | None = None

    def __post_init__(self):
        if self.block_enabled is None:
            self.block_enabled = [True] * self.R

    def dilation(self, i: int) -> int:
        return self.dilations[i % len(self.dilations)]

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.l, self.d, self.h, self.R, self.e, self.B, self.T)

    def names(self) -> list[str]:
        return list(self.arrays)

    def copy(self) -> "DenoiserParams":
        return DenoiserParams(self.l, self.d, self.h, self.R, self.e, self.B, self.T, self.dilations,
                              {k: v.copy() for k, v in self.arrays.items()}, list(self.block_enabled))

    def decays(self, i: int) -> np.ndarray:
        return _sigmoid(self.arrays[f"block{i}.decay_raw"])

    def n_params(self) -> int:
        return sum(v.size for v in self.arrays.values())

    @property
    def dtype(self):
        return self.arrays["in_w"].dtype

    def astype(self, dtype) -> "DenoiserParams":
        out = self.copy()
        out.arrays = {k: v.astype(dtype) for k, v in out.arrays.items()}
        return out


def _block_shapes(i: int, h: int, e: int, B: int) -> list[tuple[str, tuple[int, ...]]]:
    p = f"block{i}."
    return [
        (p + "cond_w", (B + 1, h)),
        (p + "step_w", (e, h)),
        (p + "cond_b", (h,)),
        (p + "conv_w", (3, h, 2 * h)),
        (p + "conv_b", (2 * h,)),
        (p + "rec_in_w", (h, h)),
        (p + "rec_in_b", (h,)),
        (p + "decay_raw", (h,)),
        (p + "rec_out_w", (h, h)),
        (p + "rec_out_b", (h,)),
    ]


def param_shapes(d, h, R, e, B) -> list[tuple[str, tuple[int, ...]]]:
    shapes = [("in_w", (d, h)), ("in_b", (h,))]
    for i in range(R):
        shapes += _block_shapes(i, h, e, B)
    shapes += [("out_w", (h, d)), ("out_b", (d,))]
    return shapes


def init_params(seed: int, l: int, d: int, h: int = 32, R: int = 6, e: int = 64, B: int = 1,
                T: int = 200, dilations=DEFAULT_DILATIONS) -> DenoiserParams:
    if min(l, d, h, R, e, B, T) <= 0:
        raise ValueError("all dimensions must be positive")
    if e % 2:
        raise ValueError("step embedding dimension must be even")
    rng = np.random.default_rng(seed)
    arrays = {}
    for name, shape in param_shapes(d, h, R, e, B):
        leaf = name.split(".")[-1]
        if name in ("out_w", "out_b") or leaf.endswith("_b"):
            arrays[name] = np.zeros(shape)
        elif leaf == "decay_raw":
            arrays[name] = rng.uniform(_logit(0.85), _logit(0.95), size=shape)
        else:
            fan_in = int(np.prod(shape[:-1]))
            bound = 1.0 / math.sqrt(fan_in)
            arrays[name] = rng.uniform(-bound, bound, size=shape)
    return DenoiserParams(l, d, h, R, e, B, T, tuple(dilations), arrays)


# --------------------------------------------------------------------------
# primitives
# --------------------------------------------------------------------------

def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _logit(p):
    return math.log(p / (1.0 - p))


@numba.njit(cache=True)
def _scan(u, lam):
    n, L, H = u.shape
    s = np.empty_like(u)
    for b in range(n):
        for j in range(H):
            acc = 0.0
            a = lam[j]
            for t in range(L):
                acc = a * acc + (1.0 - a) * u[b, t, j]
                s[b, t, j] = acc
    return s


@numba.njit(cache=True)
def _reverse_scan(ds, lam):
    n, L, H = ds.shape
    g = np.empty_like(ds)
    for b in range(n):
        for j in range(H):
            acc = 0.0
            a = lam[j]
            for t in range(L - 1, -1, -1):
                acc = ds[b, t, j] + a * acc
                g[b, t, j] = acc
    return g


def _shift(y, s):
    """out[:, t] = y[:, t + s], zero outside the window."""
    if s == 0:
        return y
    out = np.zeros_like(y)
    L = y.shape[1]
    if abs(s) >= L:
        return out
    if s > 0:
        out[:, : L - s] = y[:, s:]
    else:
        out[:, -s:] = y[:, : L + s]
    return out


def _as_batch(params, x_t, t, c):
    x = np.asarray(x_t, dtype=params.dtype)
    single = x.ndim == 2
    if single:
        x = x[None]
    if x.ndim != 3 or x.shape[1:] != (params.l, params.d):
        raise ValueError(f"expected input of shape (N, {params.l}, {params.d}), got {np.shape(x_t)}")
    n = x.shape[0]
    tt = np.broadcast_to(np.asarray(t, dtype=np.int64), (n,))
    if np.any(tt < 0) or np.any(tt >= params.T):
        raise ValueError(f"diffusion step out of range [0, {params.T})")
    cc = pack_signals(c).astype(params.dtype)
    if cc.shape[0] == 1 and n > 1:
        cc = np.broadcast_to(cc, (n, cc.shape[1]))
    if cc.shape != (n, params.B + 1):
        raise ValueError(f"con-signal must have shape ({n}, {params.B + 1}), got {cc.shape}")
    return x, tt, cc, single


# --------------------------------------------------------------------------
# forward / backward
# --------------------------------------------------------------------------

def _forward(params: DenoiserParams, x, tt, cc, keep_cache: bool):
    P = params.arrays
    H = params.h
    emb = embed_step(tt, params.e).astype(params.dtype)
    h = x @ P["in_w"] + P["in_b"]
    skip = np.zeros_like(h)
    cache = {"x": x, "c": cc, "emb": emb, "blocks": []}
    enabled = [i for i in range(params.R) if params.block_enabled[i]]
    for i in enabled:
        p = f"block{i}."
        dil = params.dilation(i)
        cv = cc @ P[p + "cond_w"] + emb @ P[p + "step_w"] + P[p + "cond_b"]
        y = h + cv[:, None, :]
        wk = P[p + "conv_w"]
        a = P[p + "conv_b"] + _shift(y, -dil) @ wk[0] + y @ wk[1] + _shift(y, dil) @ wk[2]
        ga = np.tanh(a[..., :H])
        gb = _sigmoid(a[..., H:])
        z = ga * gb
        u = z @ P[p + "rec_in_w"] + P[p + "rec_in_b"]
        lam = _sigmoid(P[p + "decay_raw"])
        s = _scan(u, lam)
        r = s @ P[p + "rec_out_w"] + P[p + "rec_out_b"]
        skip += r
        h = (h + r) * SQRT_HALF
        if keep_cache:
            cache["blocks"].append((i, dil, y, ga, gb, z, u, lam, s))
    k = 1.0 / math.sqrt(max(len(enabled), 1))
    skip_s = skip * k
    out = skip_s @ P["out_w"] + P["out_b"]
    if not np.all(np.isfinite(out)):
        raise DivergenceError("non-finite denoiser output; parameters have diverged")
    cache["skip_s"] = skip_s
    cache["skip_k"] = k
    return out, cache


def forward(params: DenoiserParams, x_t, t, c) -> np.ndarray:
    """Predict the noise in ``x_t``; accepts one window ``(l, d)`` or a batch."""
    x, tt, cc, single = _as_batch(params, x_t, t, c)
    out, _ = _forward(params, x, tt, cc, keep_cache=False)
    return out[0] if single else out


def forward_with_cache(params, x_t, t, c):
    x, tt, cc, _ = _as_batch(params, x_t, t, c)
    return _forward(params, x, tt, cc, keep_cache=True)


def _backward(params: DenoiserParams, cache, G) -> dict[str, np.ndarray]:
    P = params.arrays
    H = params.h
    grads = {name: np.zeros_like(v) for name, v in P.items()}
    G = np.asarray(G, dtype=params.dtype)

    def flat(a):
        return a.reshape(-1, a.shape[-1])

    grads["out_w"] = flat(cache["skip_s"]).T @ flat(G)
    grads["out_b"] = G.sum(axis=(0, 1))
    dskip = (G @ P["out_w"].T) * cache["skip_k"]
    dh = np.zeros_like(dskip)
    cc, emb = cache["c"], cache["emb"]
    for i, dil, y, ga, gb, z, u, lam, s in reversed(cache["blocks"]):
        p = f"block{i}."
        dr = dskip + dh * SQRT_HALF
        dh = dh * SQRT_HALF
        grads[p + "rec_out_w"] = flat(s).T @ flat(dr)
        grads[p + "rec_out_b"] = dr.sum(axis=(0, 1))
        ds = dr @ P[p + "rec_out_w"].T
        g = _reverse_scan(ds, lam)
        s_prev = np.zeros_like(s)
        s_prev[:, 1:] = s[:, :-1]
        dlam = np.einsum("ntj,ntj->j", g, s_prev - u)
        grads[p + "decay_raw"] = dlam * lam * (1.0 - lam)
        du = g * (1.0 - lam)
        grads[p + "rec_in_w"] = flat(z).T @ flat(du)
        grads[p + "rec_in_b"] = du.sum(axis=(0, 1))
        dz = du @ P[p + "rec_in_w"].T
        da = np.concatenate([dz * gb * (1.0 - ga * ga), dz * ga * gb * (1.0 - gb)], axis=-1)
        wk = P[p + "conv_w"]
        grads[p + "conv_b"] = da.sum(axis=(0, 1))
        fda = flat(da)
        grads[p + "conv_w"] = np.stack([
            flat(_shift(y, -dil)).T @ fda,
            flat(y).T @ fda,
            flat(_shift(y, dil)).T @ fda,
        ])
        dy = _shift(da @ wk[0].T, dil) + da @ wk[1].T + _shift(da @ wk[2].T, -dil)
        dh = dh + dy
        dcv = dy.sum(axis=1)
        grads[p + "cond_w"] = cc.T @ dcv
        grads[p + "step_w"] = emb.T @ dcv
        grads[p + "cond_b"] = dcv.sum(axis=0)
    x = cache["x"]
    grads["in_w"] = flat(x).T @ flat(dh)
    grads["in_b"] = dh.sum(axis=(0, 1))
    return grads


def backward(params: DenoiserParams, x_t, t, c, upstream_gradient) -> dict[str, np.ndarray]:
    """Gradients of ``sum(forward(...) * upstream_gradient)`` w.r.t. every parameter."""
    x, tt, cc, single = _as_batch(params, x_t, t, c)
    G = np.asarray(upstream_gradient, dtype=params.dtype)
    if single:
        G = G[None]
    if G.shape != x.shape:
        raise ValueError(f"upstream gradient shape {G.shape} does not match input {x.shape}")
    _, cache = _forward(params, x, tt, cc, keep_cache=True)
    return _backward(params, cache, G)


def loss_and_grad(params: DenoiserParams, x_t, t, c, target) -> tuple[float, dict[str, np.ndarray]]:
    """Mean squared error against ``target`` and its parameter gradients."""
    x, tt, cc, _ = _as_batch(params, x_t, t, c)
    pred, cache = _forward(params, x, tt, cc, keep_cache=True)
    diff = pred - target
    loss = float(np.mean(diff * diff))
    G = 2.0 * diff / diff.size
    return loss, _backward(params, cache, G)
