"""Covariance kernels evaluated on neural-operator latent fields.

Latent fields are compared with the discretized L2 function-space norm,
``sqrt(sum_c sum_p w_p (psi_i - psi_j)^2)`` with ``w_p`` the cell volume, so
distances do not grow with grid size. The :class:`LatentCache` stores every
training latent pre-multiplied by ``sqrt(w_p)`` and flattened, which turns
the weighted distance into a plain Euclidean one.
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np

from . import accel
from . import tensor as T
from .data.grid import GridFunction, cell_volume, resample
from .errors import ShapeError, StaleCacheError, ValidationError

SQRT5 = np.sqrt(5.0)
KINDS = ("matern52", "rbf")


@dataclass(frozen=True)
class KernelHyper:
    log_lengthscale: float = 0.0
    log_variance: float = 0.0
    log_noise: float = np.log(1e-2)
    kind: str = "matern52"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"kernel kind must be one of {KINDS}")
        for name in ("log_lengthscale", "log_variance", "log_noise"):
            v = getattr(self, name)
            with np.errstate(over="ignore"):
                bad = not np.isfinite(v) or not np.isfinite(np.exp(v)) or np.exp(v) <= 0
            if bad:
                raise ValidationError(f"KernelHyper.{name}={v} gives a non-positive or non-finite value")

    @classmethod
    def from_values(cls, lengthscale, variance, noise, kind="matern52"):
        return cls(float(np.log(lengthscale)), float(np.log(variance)), float(np.log(noise)), kind)

    @property
    def lengthscale(self):
        return float(np.exp(self.log_lengthscale))

    @property
    def variance(self):
        return float(np.exp(self.log_variance))

    @property
    def noise(self):
        return float(np.exp(self.log_noise))

    def as_array(self):
        return np.array([self.log_lengthscale, self.log_variance, self.log_noise])

    def replace(self, **kw):
        d = dict(log_lengthscale=self.log_lengthscale, log_variance=self.log_variance,
                 log_noise=self.log_noise, kind=self.kind)
        d.update(kw)
        return KernelHyper(**d)


# ---------------------------------------------------------------------------
# scalar / array kernels


def matern52(d, hyper):
    """sigma^2 (1 + sqrt5 d/l + 5 d^2 / (3 l^2)) exp(-sqrt5 d / l)."""
    s = SQRT5 * np.asarray(d, dtype=np.float64) / hyper.lengthscale
    return hyper.variance * (1.0 + s + s * s / 3.0) * np.exp(-s)


def rbf(d, hyper):
    d = np.asarray(d, dtype=np.float64)
    return hyper.variance * np.exp(-0.5 * (d / hyper.lengthscale) ** 2)


def kernel_from_distance(d, hyper):
    return matern52(d, hyper) if hyper.kind == "matern52" else rbf(d, hyper)


def latent_distance(psi_i, psi_j, weights=1.0):
    """Quadrature-weighted L2 distance between two latent fields.

    Accepts arrays (then ``weights`` is the cell volume, scalar or
    broadcastable) or :class:`GridFunction` objects, in which case fields
    on different grids are first resampled onto the coarser one.
    """
    if isinstance(psi_i, GridFunction) and isinstance(psi_j, GridFunction):
        if psi_i.channels != psi_j.channels:
            raise ShapeError("latent_distance", psi_i.values.shape, psi_j.values.shape,
                             detail="latent channel counts differ")
        if psi_i.shape != psi_j.shape:
            coarse = min(psi_i.shape, psi_j.shape)
            psi_i, psi_j = psi_i.resample(coarse), psi_j.resample(coarse)
        weights = psi_i.weights()
        psi_i, psi_j = psi_i.values, psi_j.values
    a = np.asarray(psi_i, dtype=np.float64)
    b = np.asarray(psi_j, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError("latent_distance", a.shape, b.shape)
    sw = np.sqrt(weights)
    return float(np.sqrt(accel.sqdist_pair((sw * a).ravel(), (sw * b).ravel())))


# ---------------------------------------------------------------------------
# differentiable pieces


def pairwise_sqdist_t(X, Y=None):
    """Squared Euclidean distances between rows, as a tape primitive.

    The forward pass sums squared differences directly (no cancellation);
    the VJP uses the expanded form.
    """
    X = X if isinstance(X, T.Tensor) else T.Tensor(X)
    if Y is None:
        xv = X.value
        out = accel.pairwise_sqdist(xv, xv)

        def vjp(g):
            gs = g + g.T
            return (2.0 * (gs.sum(axis=1)[:, None] * xv - gs @ xv),)

        return T.primitive("sqdist", (X,), out, vjp)
    Y = Y if isinstance(Y, T.Tensor) else T.Tensor(Y)
    xv, yv = X.value, Y.value
    if xv.ndim != 2 or yv.ndim != 2 or xv.shape[1] != yv.shape[1]:
        raise ShapeError("sqdist", xv.shape, yv.shape)
    out = accel.pairwise_sqdist(xv, yv)
    return T.primitive("sqdist", (X, Y), out, lambda g: (
        2.0 * (g.sum(axis=1)[:, None] * xv - g @ yv),
        2.0 * (g.sum(axis=0)[:, None] * yv - g.T @ xv),
    ))


def kernel_t(r2, log_l, log_s2, kind="matern52"):
    """Kernel matrix from squared distances with log-space hyperparameters as tensors."""
    if kind == "rbf":
        return T.exp(log_s2 - 0.5 * r2 * T.exp(-2.0 * log_l))
    s = T.sqrt(r2) * (SQRT5 * T.exp(-1.0 * log_l))
    return T.exp(log_s2) * (1.0 + s + s * s * (1.0 / 3.0)) * T.exp(-1.0 * s)


# ---------------------------------------------------------------------------
# latent cache and Gram assembly


def flatten_latents(latents, weight):
    lat = np.asarray(latents, dtype=np.float64)
    return np.sqrt(weight) * lat.reshape(lat.shape[0], -1)


@dataclass
class LatentCache:
    features: np.ndarray  # (N, d_lat * grid) scaled by sqrt(cell volume)
    field_shape: tuple    # (d_lat, *grid)
    weight: float
    params_digest: str
    dataset_digest: str = ""
    fingerprint: str = field(init=False)

    def __post_init__(self):
        h = hashlib.sha256(f"{self.dataset_digest}|{self.params_digest}".encode())
        self.fingerprint = h.hexdigest()

    def __len__(self):
        return self.features.shape[0]

    def validate(self, params_digest):
        if params_digest != self.params_digest:
            raise StaleCacheError("latent cache was built with different operator parameters; "
                                  "re-embed the dataset with build_latent_cache")


def build_latent_cache(inputs, feature_map, dataset_digest=""):
    """Embed every input once. ``feature_map`` supplies ``embed`` and ``digest``."""
    x = np.asarray(inputs, dtype=np.float64)
    if x.shape[0] == 0:
        return LatentCache(np.zeros((0, 0)), (), 1.0, feature_map.digest(), dataset_digest)
    lat = feature_map.embed(x)
    w = cell_volume(lat.shape[2:], feature_map.extents)
    return LatentCache(flatten_latents(lat, w), lat.shape[1:], w, feature_map.digest(), dataset_digest)


def cross_features(latents, feature_map, cache):
    """Flatten test latents onto the cache grid (resampling if the grid differs)."""
    lat = np.asarray(latents, dtype=np.float64)
    grid = tuple(cache.field_shape[1:])
    if lat.shape[2:] != grid:
        lat = resample(lat, grid, feature_map.boundary)
    return flatten_latents(lat, cache.weight)


def gram_from_features(FA, FB, hyper):
    return kernel_from_distance(np.sqrt(accel.pairwise_sqdist(FA, FB)), hyper)


def gram(I, J, cache, hyper, params_digest=None):
    """|I| x |J| kernel block between cached training latents."""
    if params_digest is not None:
        cache.validate(params_digest)
    F = cache.features
    return gram_from_features(F[np.asarray(I, dtype=int)], F[np.asarray(J, dtype=int)], hyper)


def full_gram(cache, hyper, params_digest=None):
    idx = np.arange(len(cache))
    return gram(idx, idx, cache, hyper, params_digest)
