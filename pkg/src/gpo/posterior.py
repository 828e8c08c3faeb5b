"""Predictive mean and pathwise posterior sampling for a trained GPO.

A pathwise sample is ``f(z*) + mu(z*) - k(z*, Z) B`` with ``f`` a joint
prior draw over training and test latents and ``B`` the representer
weights of the noisy prior draw at the training inputs. Predictions live
in the standardized target space and are mapped back, and resampled to the
requested output grid, at the end.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .data.grid import GridFunction, resample
from .errors import ShapeError, ValidationError
from .exact_gp import cholesky, refined_solve
from .kernel import cross_features, gram_from_features
from .sdd import SddConfig, sdd_solve

MAX_COLUMNS = 16384  # right-hand-side columns per pathwise chunk


@dataclass
class TargetTransform:
    """Pointwise mean field and one global scale; U = (Y - mean) / scale."""

    mean: np.ndarray
    scale: float

    @classmethod
    def fit(cls, Y):
        Y = np.asarray(Y, dtype=np.float64).reshape(len(Y), -1)
        mean = Y.mean(axis=0) if len(Y) else np.zeros(Y.shape[1])
        s = float(np.std(Y - mean)) if len(Y) else 1.0
        return cls(mean, s if s > 0 else 1.0)

    @classmethod
    def identity(cls, du):
        return cls(np.zeros(du), 1.0)

    def forward(self, Y):
        Y = np.asarray(Y, dtype=np.float64)
        return (Y.reshape(len(Y), -1) - self.mean) / self.scale

    def inverse(self, U):
        return self.mean + self.scale * np.asarray(U)


@dataclass
class GpoModel:
    feature_map: object
    hyper: object
    cache: object
    weights: np.ndarray           # A*, (N, d_u) in standardized target space
    U: np.ndarray                 # standardized training targets
    transform: TargetTransform
    target_shape: tuple           # (C_out, *grid) of the training targets
    sdd_config: SddConfig = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.weights.shape[0] != len(self.cache):
            raise ShapeError("GpoModel", self.weights.shape, (len(self.cache),),
                             detail="representer weight rows must match the latent cache")
        self.weights.flags.writeable = False
        self.U.flags.writeable = False

    @property
    def noise(self):
        return self.hyper.noise

    @property
    def boundary(self):
        return self.feature_map.boundary

    def test_features(self, inputs):
        lat = self.feature_map.embed(inputs)
        return cross_features(lat, self.feature_map, self.cache)

    def cross_gram(self, inputs):
        return gram_from_features(self.test_features(inputs), self.cache.features, self.hyper)

    def to_output(self, U, grid):
        """Standardized rows (..., d_u) to physical fields on ``grid``."""
        U = np.asarray(U)
        lead = U.shape[:-1]
        Y = self.transform.inverse(U).reshape(lead + tuple(self.target_shape))
        if tuple(grid) != tuple(self.target_shape[1:]):
            Y = resample(Y, tuple(grid), self.boundary)
        return Y


def _inputs_of(z):
    if isinstance(z, GridFunction):
        return z.values[None], True
    z = np.asarray(z, dtype=np.float64)
    return z, False


def _wrap(values, z, single):
    if single:
        return GridFunction(values[0], z.extents, z.boundary)
    return values


def predict_mean(model, z):
    """Posterior mean at test inputs (an array (M, C, *n) or a single GridFunction)."""
    x, single = _inputs_of(z)
    Ks = model.cross_gram(x)
    Y = model.to_output(Ks @ model.weights, x.shape[2:])
    return _wrap(Y, z, single)


@dataclass
class PosteriorSampleSet:
    mean: np.ndarray      # sample mean per point
    std: np.ndarray       # sample standard deviation per point
    n_samples: int
    samples: np.ndarray = None  # (S, M, C, *grid) when kept
    level: float = 0.95

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValidationError("a sample set needs at least one sample")


def _cholesky_solver(K, noise):
    M = K + noise * np.eye(K.shape[0])
    L = cholesky(M)
    return lambda R: refined_solve(M, L, R)


def _sdd_solver(K, noise, config):
    return lambda R: sdd_solve(K, R, noise, config)[0]


def pathwise_core(K, Ks, Kss, A, noise, S, seed=0, solver="sdd", sdd_config=None,
                  emit=None):
    """Pathwise posterior samples from explicit Gram blocks.

    K is (N, N) train, Ks is (M, N) test-train, Kss is (M, M), A the (N, d_u)
    mean weights. Calls ``emit(chunk)`` with arrays (s, M, d_u) of samples in
    standardized space; returns nothing. Prior draws for all samples share
    one joint Cholesky factor.
    """
    if S < 1:
        raise ValidationError("number of samples must be >= 1")
    N, du = A.shape
    M = Ks.shape[0]
    joint = np.block([[K, Ks.T], [Ks, Kss]])
    Lj = cholesky(0.5 * (joint + joint.T), "the joint train/test prior covariance")
    if solver == "cholesky":
        solve = _cholesky_solver(K, noise)
    elif solver == "sdd":
        solve = _sdd_solver(K, noise, sdd_config or SddConfig())
    else:
        raise ValidationError(f"unknown pathwise solver {solver!r}")
    mu = Ks @ A
    rng = np.random.default_rng(seed)
    per = max(1, MAX_COLUMNS // max(du, 1))
    done = 0
    while done < S:
        s = min(per, S - done)
        W = rng.standard_normal((N + M, s * du))
        f = Lj @ W
        eps = np.sqrt(noise) * rng.standard_normal((N, s * du))
        Bw = solve(f[:N] + eps)
        out = f[N:] - Ks @ Bw  # (M, s*du)
        out = out.reshape(M, s, du).transpose(1, 0, 2) + mu[None]
        emit(out)
        done += s


def pathwise_sample(model, z, S=200, seed=0, solver="sdd", sdd_config=None, keep_samples=False,
                    level=0.95):
    """Posterior sample fields at the test inputs (array (M, C, *n) or one GridFunction)."""
    x, single = _inputs_of(z)
    Fs = model.test_features(x)
    F = model.cache.features
    K = gram_from_features(F, F, model.hyper)
    Ks = gram_from_features(Fs, F, model.hyper)
    Kss = gram_from_features(Fs, Fs, model.hyper)
    grid = x.shape[2:]
    mean_std = model.to_output(Ks @ model.weights, grid)
    acc1 = np.zeros_like(mean_std)
    acc2 = np.zeros_like(mean_std)
    kept = []

    def emit(chunk):
        Y = model.to_output(chunk, grid)
        d = Y - mean_std[None]  # shifted sums avoid cancellation
        acc1[...] += d.sum(axis=0)
        acc2[...] += (d * d).sum(axis=0)
        if keep_samples:
            kept.append(Y)

    cfg = sdd_config or model.sdd_config or SddConfig()
    pathwise_core(K, Ks, Kss, np.asarray(model.weights), model.noise, S, seed, solver, cfg, emit)
    m1 = acc1 / S
    var = np.maximum(acc2 / S - m1 * m1, 0.0) * (S / (S - 1) if S > 1 else 1.0)
    mean = mean_std + m1
    samples = np.concatenate(kept, axis=0) if keep_samples else None
    if single:
        mean, var = mean[0], var[0]
        samples = samples[:, 0] if samples is not None else None
    return PosteriorSampleSet(mean, np.sqrt(var), S, samples, level)


def band_halfwidth(level):
    if not 0 < level < 1:
        raise ValidationError("confidence level must lie in (0, 1)")
    return float(stats.norm.ppf(0.5 + level / 2))


def confidence_band(samples, level=0.95, min_samples=30):
    """Gaussian band mean +/- z_level * std from sample moments."""
    if samples.n_samples < min_samples:
        raise ValidationError(f"confidence bands need at least {min_samples} samples, "
                              f"got {samples.n_samples}")
    z = band_halfwidth(level)
    return samples.mean - z * samples.std, samples.mean + z * samples.std


def coverage(truth, lower, upper):
    truth = np.asarray(truth)
    return float(np.mean((truth >= lower) & (truth <= upper)))
