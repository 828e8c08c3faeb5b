"""Stochastic dual descent for the representer weights (K + noise I)^-1 U.

Each step samples B row indices uniformly with replacement, forms the
unbiased dual-gradient estimate from those B kernel rows only, and takes a
Nesterov-style momentum step followed by geometric iterate averaging.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import accel
from .errors import NumericalError, ShapeError, ValidationError
from .kernel import LatentCache, full_gram, gram_from_features

DENSE_LIMIT = 4000
MONITOR_ROWS = 256
DIVERGED = 1e100


@dataclass(frozen=True)
class SddConfig:
    steps: int = 1000
    batch: int = 32
    beta: float = 0.1
    rho: float = 0.9
    r: float = 0.9
    seed: int = 0
    normalize_step: bool = True  # use beta / (N * k(z, z)), see step_size
    monitor_every: int = 0       # 0 -> once per epoch

    def __post_init__(self):
        if self.steps < 0:
            raise ValidationError("SddConfig.steps must be >= 0")
        if self.batch < 1:
            raise ValidationError("SddConfig.batch must be >= 1")
        if not self.beta > 0:
            raise ValidationError("SddConfig.beta must be > 0")
        if not 0 <= self.rho < 1:
            raise ValidationError("SddConfig.rho must lie in [0, 1)")
        if not 0 < self.r <= 1:
            raise ValidationError("SddConfig.r must lie in (0, 1]")

    def step_size(self, n, diag=1.0):
        """beta / (N * (sigma^2 + noise)) when normalized.

        N * (sigma^2 + noise) is the trace of K + noise I, an upper bound on
        its largest eigenvalue, so a given beta means the same thing for any
        process variance; with a unit-variance kernel this is beta / N.
        """
        return self.beta / (n * diag) if self.normalize_step else self.beta

    @staticmethod
    def epoch_length(n, batch):
        return -(-n // batch)

    @classmethod
    def from_epochs(cls, epochs, n, batch, **kw):
        return cls(steps=epochs * cls.epoch_length(n, batch), batch=batch, **kw)


@dataclass
class SddState:
    A: np.ndarray
    V: np.ndarray
    Abar: np.ndarray
    step: int = 0
    trace: list = field(default_factory=list)  # (step, primal_loss or nan, grad_norm, wall_ms)

    @classmethod
    def zeros(cls, n, du):
        return cls(np.zeros((n, du)), np.zeros((n, du)), np.zeros((n, du)))


# ---------------------------------------------------------------------------
# objectives


def _as2d(U):
    U = np.asarray(U, dtype=np.float64)
    return U[:, None] if U.ndim == 1 else U


def dual_objective(A, K, noise, U):
    """0.5 tr(A^T (K + noise I) A) - tr(A^T U)."""
    A, U = _as2d(A), _as2d(U)
    if A.shape != U.shape or K.shape != (A.shape[0], A.shape[0]):
        raise ShapeError("dual_objective", A.shape, K.shape, U.shape)
    return float(0.5 * np.sum(A * (K @ A + noise * A)) - np.sum(A * U))


def dual_gradient(A, K, noise, U):
    return K @ _as2d(A) + noise * _as2d(A) - _as2d(U)


def primal_loss(A, K, noise, U):
    """0.5 ||U - K A||^2 + (noise / 2) ||A||_K^2; monitoring only."""
    A, U = _as2d(A), _as2d(U)
    if A.shape != U.shape or K.shape != (A.shape[0], A.shape[0]):
        raise ShapeError("primal_loss", A.shape, K.shape, U.shape)
    KA = K @ A
    return float(0.5 * np.sum((U - KA) ** 2) + 0.5 * noise * np.sum(A * KA))


# ---------------------------------------------------------------------------
# kernel row providers


class DenseRows:
    """Rows of a precomputed Gram matrix."""

    def __init__(self, K):
        self.K = np.ascontiguousarray(K, dtype=np.float64)

    def __len__(self):
        return self.K.shape[0]

    def rows(self, idx):
        return self.K[idx]

    def block(self, I, J):
        return self.K[np.ix_(I, J)]


class CacheRows:
    """Kernel rows computed on demand from a latent cache."""

    def __init__(self, cache, hyper):
        self.F = cache.features
        self.hyper = hyper

    def __len__(self):
        return self.F.shape[0]

    def rows(self, idx):
        return gram_from_features(self.F[idx], self.F, self.hyper)

    def block(self, I, J):
        return gram_from_features(self.F[I], self.F[J], self.hyper)


def row_provider(source, hyper=None, dense_limit=DENSE_LIMIT):
    if isinstance(source, (DenseRows, CacheRows)):
        return source
    if isinstance(source, LatentCache):
        if hyper is None:
            raise ValidationError("a kernel hyperparameter set is required with a latent cache")
        if len(source) <= dense_limit:
            return DenseRows(full_gram(source, hyper))
        return CacheRows(source, hyper)
    return DenseRows(source)


# ---------------------------------------------------------------------------
# solver


def sdd_step(state, idx, rows, U, noise, config, diag=1.0, G=None):
    """One update of ``state`` in place. ``rows`` is the (B, N) block K[idx].

    ``diag`` is the Gram diagonal k(z, z) + noise used by the step normalization.
    """
    N = state.A.shape[0]
    B = len(idx)
    G = np.empty_like(state.A) if G is None else G
    beta = config.step_size(N, diag)
    gn = accel.sdd_step(rows, np.asarray(idx, dtype=np.int64), state.A, state.V, state.Abar, U,
                        noise, beta, config.rho, config.r, N / B, G)
    state.step += 1
    if not np.isfinite(gn) or not np.all(np.isfinite(state.A[idx])) or gn > DIVERGED:
        raise NumericalError(f"SDD produced a non-finite update at step {state.step}; "
                             f"reduce the step size beta (currently {config.beta})")
    return gn


def _monitor_set(N, seed):
    if N <= MONITOR_ROWS:
        return np.arange(N)
    return np.sort(np.random.default_rng([seed, 7]).choice(N, MONITOR_ROWS, replace=False))


def _monitored_primal(provider, Abar, U, noise, M):
    """Primal loss on the monitoring rows, rescaled to the full row count."""
    N = Abar.shape[0]
    KM = provider.rows(M)
    KA = KM @ Abar
    data = 0.5 * np.sum((U[M] - KA) ** 2)
    reg = 0.5 * noise * np.sum(Abar[M] * KA)
    return float((data + reg) * N / len(M))


def sdd_solve(source, U, noise, config, hyper=None, state=None, callback=None):
    """Run ``config.steps`` SDD updates and return ``(Abar, state)``.

    ``source`` is a Gram matrix, a row provider or a :class:`LatentCache`
    (``hyper`` then required). The trace holds one row per step with the
    primal loss filled in at epoch boundaries.
    """
    provider = row_provider(source, hyper)
    U = np.ascontiguousarray(_as2d(U))
    N, du = U.shape
    if len(provider) != N:
        raise ShapeError("sdd_solve", (len(provider),), U.shape, detail="Gram rows must match targets")
    if noise < 0:
        raise ValidationError("noise variance must be >= 0")
    state = state or SddState.zeros(N, du)
    if N == 0 or config.steps == 0:
        return state.Abar.copy(), state
    if config.batch > N:
        raise ValidationError(f"batch size {config.batch} exceeds N={N}")
    rng = np.random.default_rng(config.seed)
    G = np.empty_like(state.A)
    every = config.monitor_every or SddConfig.epoch_length(N, config.batch)
    M = _monitor_set(N, config.seed)
    diag = float(np.mean(provider.block(M[:16], M[:16]).diagonal())) + noise
    t0 = time.perf_counter()
    g0 = None
    for t in range(config.steps):
        idx = rng.integers(0, N, size=config.batch)
        gn = sdd_step(state, idx, provider.rows(idx), U, noise, config, diag, G)
        g0 = g0 or gn
        if g0 and gn > 1e8 * g0:
            raise NumericalError(f"SDD diverged at step {state.step} (gradient norm grew from "
                                 f"{g0:.3g} to {gn:.3g}); reduce the step size beta "
                                 f"(currently {config.beta})")
        loss = np.nan
        if (t + 1) % every == 0 or t + 1 == config.steps:
            loss = _monitored_primal(provider, state.Abar, U, noise, M)
        state.trace.append((state.step, loss, gn, (time.perf_counter() - t0) * 1e3))
        if callback is not None:
            callback(state)
    return state.Abar.copy(), state
