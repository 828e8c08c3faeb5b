"""Wavelet neural operator used as the kernel's feature map.

Each block computes ``v <- act(W^-1(R . W(v)) + b v)``: a periodic DWT of
the hidden state, a learnable channel-mixing multiply on the coarsest
approximation and detail bands (all finer detail bands are dropped), the
inverse DWT, plus a pointwise affine bypass. Lifting and projection are
pointwise affine maps.

Inputs whose length is not a multiple of ``2**levels`` are zero-padded at
the high end of each axis after lifting and cropped before projection.
A model trained at resolution ``r`` runs at ``r * 2**k`` by using
``levels + k`` decomposition levels (and ``pad * 2**k`` padding), which
keeps the coarsest band shape, and therefore every weight, unchanged.
"""

import hashlib
from dataclasses import asdict, dataclass

import numpy as np

from . import tensor as T
from .data.grid import grid_coords
from .errors import ShapeError, ValidationError
from .wavelet import BASES, dwt_t, idwt_t

_SPATIAL = {1: "x", 2: "xy"}


@dataclass(frozen=True)
class WnoConfig:
    width: int = 32
    layers: int = 2
    basis: str = "db6"
    levels: int = 3
    d_lat: int = 16
    ndim: int = 1
    in_channels: int = 1
    resolution: int = 64  # training points per axis
    use_grid: bool = True
    activation: str = "gelu"

    def __post_init__(self):
        for name in ("width", "layers", "levels", "d_lat", "in_channels", "resolution"):
            if getattr(self, name) < 1:
                raise ValidationError(f"WnoConfig.{name} must be positive")
        if self.ndim not in (1, 2):
            raise ValidationError("WnoConfig.ndim must be 1 or 2")
        if self.basis not in BASES:
            raise ValidationError(f"unknown basis {self.basis!r}")
        if self.activation not in T.ACTIVATIONS:
            raise ValidationError(f"unknown activation {self.activation!r}")

    @property
    def lift_channels(self):
        return self.in_channels + (self.ndim if self.use_grid else 0)

    @property
    def padded(self):
        step = 2 ** self.levels
        return -(-self.resolution // step) * step

    @property
    def pad(self):
        return self.padded - self.resolution

    @property
    def coarse(self):
        return self.padded >> self.levels

    def to_dict(self):
        return asdict(self)


def levels_for(config, n):
    """Decomposition levels and padding to run the trained model at ``n`` points per axis."""
    ratio = n / config.resolution
    k = int(round(np.log2(ratio))) if ratio > 0 else 0
    if ratio <= 0 or 2.0 ** k != ratio or config.levels + k < 1:
        raise ShapeError("resolution_transfer", (n,), (config.resolution,),
                         detail="input resolution must be a power-of-two multiple of the training "
                                f"resolution {config.resolution}")
    return config.levels + k, config.pad * 2 ** k if k >= 0 else config.pad >> -k


class WnoParams(dict):
    """Named parameter arrays, ordered lifting -> blocks -> projection."""

    def copy(self):
        return WnoParams({k: np.array(v) for k, v in self.items()})

    def digest(self):
        h = hashlib.sha256()
        for k in sorted(self):
            h.update(k.encode())
            h.update(np.ascontiguousarray(self[k], dtype=np.float64).tobytes())
        return h.hexdigest()

    def nbytes(self):
        return sum(np.asarray(v).nbytes for v in self.values())

    def count(self):
        return sum(np.asarray(v).size for v in self.values())


def init_params(config, seed=0):
    rng = np.random.default_rng(seed)
    w, c, d = config.width, config.lift_channels, config.d_lat
    band = (2 * config.coarse,) * config.ndim
    p = WnoParams()
    lim = 1.0 / np.sqrt(c)
    p["lift.W"] = rng.uniform(-lim, lim, (c, w))
    p["lift.b"] = rng.uniform(-lim, lim, (w,))
    lim = 1.0 / np.sqrt(w)
    for j in range(config.layers):
        p[f"block{j}.R"] = rng.uniform(0.0, 1.0, (w, w) + band) / (w * w)
        p[f"block{j}.W"] = rng.uniform(-lim, lim, (w, w))
        p[f"block{j}.b"] = rng.uniform(-lim, lim, (w,))
    p["proj.W"] = rng.uniform(-lim, lim, (w, d))
    p["proj.b"] = np.zeros(d)
    return p


def _bias(b, ndim):
    return T.reshape(b, (-1,) + (1,) * ndim)


def spectral_conv(v, R, basis, levels, ndim=1):
    """W^-1(R . W(v)) with R mixing channels on the leading ``2m`` coefficient block.

    ``v`` is (S, C_in, *n) and ``R`` is (C_in, C_out, *2m). Coefficients
    outside the block (the finer detail bands) are zeroed.
    """
    v = v if isinstance(v, T.Tensor) else T.Tensor(v)
    R = R if isinstance(R, T.Tensor) else T.Tensor(R)
    n = v.shape[2:]
    band = R.shape[2:]
    if len(n) != ndim or len(band) != ndim or R.shape[0] != v.shape[1]:
        raise ShapeError("spectral_conv", v.shape, R.shape)
    for ni, bi in zip(n, band):
        if bi * 2 ** (levels - 1) != ni:
            raise ShapeError("spectral_conv", v.shape, R.shape,
                             detail=f"band shape must equal 2 * n / 2**{levels}")
    s = _SPATIAL[ndim]
    c = dwt_t(v, basis, levels, ndim)
    keep = c[(slice(None), slice(None)) + tuple(slice(0, b) for b in band)]
    mixed = T.einsum(f"si{s},io{s}->so{s}", keep, R)
    full = T.pad(mixed, [0, 0] + [ni - bi for ni, bi in zip(n, band)])
    return idwt_t(full, basis, levels, ndim)


def wno_forward(z, params, config, extents=None, boundary="periodic"):
    """Latent fields (S, d_lat, *n) for inputs z of shape (S, in_channels, *n).

    ``params`` may hold arrays or tape tensors; the result is a tensor that
    is tracked whenever any parameter is.
    """
    zv = z.value if isinstance(z, T.Tensor) else np.asarray(z, dtype=np.float64)
    nd = config.ndim
    if zv.ndim != nd + 2 or zv.shape[1] != config.in_channels:
        raise ShapeError("wno_forward", zv.shape,
                         detail=f"expected (S, {config.in_channels}, *{nd} spatial axes)")
    shape = zv.shape[2:]
    if len(set(shape)) != 1:
        raise ShapeError("wno_forward", zv.shape, detail="square grids only")
    levels, pad = levels_for(config, shape[0])
    act = T.ACTIVATIONS[config.activation]
    s = _SPATIAL[nd]

    if config.use_grid:
        extents = extents or (1.0,) * nd
        g = grid_coords(shape, extents, boundary)
        z = T.concat([z, np.broadcast_to(g, (zv.shape[0],) + g.shape)], axis=1)
    v = T.einsum(f"sc{s},cw->sw{s}", z, params["lift.W"]) + _bias(params["lift.b"], nd)
    v = T.pad(v, [0, 0] + [pad] * nd)
    for j in range(config.layers):
        k = spectral_conv(v, params[f"block{j}.R"], config.basis, levels, nd)
        by = T.einsum(f"si{s},io->so{s}", v, params[f"block{j}.W"]) + _bias(params[f"block{j}.b"], nd)
        v = act(k + by)
    v = T.crop(v, v.shape[:2] + shape)
    return T.einsum(f"sw{s},wd->sd{s}", v, params["proj.W"]) + _bias(params["proj.b"], nd)


def resolution_transfer(z, params, config, extents=None, boundary="periodic"):
    """Run a trained operator on inputs at another power-of-two multiple of its resolution."""
    return wno_forward(z, params, config, extents, boundary)


class FeatureMap:
    """A WNO with frozen parameters plus the input standardization it was trained with.

    ``embed`` maps raw inputs (S, C, *n) to latent fields (S, d_lat, *n) in
    chunks; ``embed_t`` is the differentiable version used during training.
    """

    def __init__(self, config, params, extents, boundary, in_mean=None, in_std=None, chunk=64):
        self.config = config
        self.params = WnoParams(params)
        self.extents = tuple(extents)
        self.boundary = boundary
        c = config.in_channels
        self.in_mean = np.zeros(c) if in_mean is None else np.asarray(in_mean, dtype=np.float64)
        self.in_std = np.ones(c) if in_std is None else np.asarray(in_std, dtype=np.float64)
        self.chunk = chunk

    @staticmethod
    def input_stats(inputs):
        x = np.asarray(inputs, dtype=np.float64)
        axes = (0,) + tuple(range(2, x.ndim))
        std = x.std(axis=axes)
        return x.mean(axis=axes), np.where(std > 0, std, 1.0)

    def standardize(self, inputs):
        x = np.asarray(inputs, dtype=np.float64)
        shape = (1, -1) + (1,) * (x.ndim - 2)
        return (x - self.in_mean.reshape(shape)) / self.in_std.reshape(shape)

    def with_params(self, params):
        return FeatureMap(self.config, params, self.extents, self.boundary,
                          self.in_mean, self.in_std, self.chunk)

    def embed_t(self, inputs, params):
        return wno_forward(self.standardize(inputs), params, self.config, self.extents, self.boundary)

    def embed(self, inputs):
        x = self.standardize(inputs)
        out = [wno_forward(x[i:i + self.chunk], self.params, self.config, self.extents,
                           self.boundary).value for i in range(0, x.shape[0], self.chunk)]
        return np.concatenate(out, axis=0)

    def digest(self):
        h = hashlib.sha256(self.params.digest().encode())
        h.update(repr(sorted(self.config.to_dict().items())).encode())
        h.update(self.in_mean.tobytes() + self.in_std.tobytes())
        return h.hexdigest()
