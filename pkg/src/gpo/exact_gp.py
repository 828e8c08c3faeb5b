"""Dense exact GP: marginal likelihood, initialization training and Cholesky inference.

Outputs are treated as ``d_u`` independent GPs sharing one kernel, so the
targets are an (N, d_u) matrix and every solve has a matrix right-hand side.
"""

import time
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from . import accel
from . import tensor as T
from .data.grid import cell_volume
from .errors import CholeskyError, NumericalError, ValidationError
from .kernel import KernelHyper, build_latent_cache, kernel_t, pairwise_sqdist_t

JITTER = 1e-8
HYPER_KEYS = ("log_lengthscale", "log_variance", "log_noise")


def jitter_of(K):
    n = K.shape[0]
    return JITTER * float(np.trace(K)) / n if n else 0.0


def cholesky(M, what="K + noise I"):
    """Lower Cholesky factor of ``M`` plus the standard diagonal jitter."""
    M = np.asarray(M, dtype=np.float64)
    jit = jitter_of(M)
    try:
        L = linalg.cholesky(M + jit * np.eye(M.shape[0]), lower=True, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        raise CholeskyError(f"Cholesky factorization of {what} failed ({exc}); increase the "
                            "noise variance or the diagonal jitter") from exc
    return L


def refined_solve(M, L, U, sweeps=3):
    """Solve M X = U with the (jittered) factor L, then refine against M itself.

    Each sweep solves for the residual with the same factor and is kept only
    if it lowers the residual, so the jitter does not bias the answer when M
    is well conditioned and can never make it worse when it is not.
    """
    U = np.asarray(U, dtype=np.float64)
    X = linalg.cho_solve((L, True), U)
    R = U - M @ X
    rn = np.linalg.norm(R)
    for _ in range(sweeps):
        X2 = X + linalg.cho_solve((L, True), R)
        R2 = U - M @ X2
        rn2 = np.linalg.norm(R2)
        if not rn2 < rn:
            break
        X, R, rn = X2, R2, rn2
    return X


def cholesky_solve_oracle(K, noise, U):
    """Exact representer weights (K + noise I)^-1 U by dense Cholesky."""
    K = np.asarray(K, dtype=np.float64)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValidationError("K must be square")
    if not np.allclose(K, K.T, rtol=1e-12, atol=0.0):
        raise ValidationError("K must be symmetric")
    if noise < 0:
        raise ValidationError("noise variance must be >= 0")
    M = K + noise * np.eye(K.shape[0])
    return refined_solve(M, cholesky(M), U)


@dataclass
class ExactPosterior:
    chol: np.ndarray
    alpha: np.ndarray
    noise: float

    @classmethod
    def fit(cls, K, noise, U):
        M = np.asarray(K) + noise * np.eye(K.shape[0])
        L = cholesky(M)
        return cls(L, refined_solve(M, L, U), float(noise))

    def mean(self, K_star):
        """K_star is (M, N) between test and training points."""
        return K_star @ self.alpha

    def variance(self, K_star, k_diag):
        """Latent-function posterior variance k(z*,z*) - k*^T (K + noise I)^-1 k*."""
        v = linalg.solve_triangular(self.chol, K_star.T, lower=True)
        return np.asarray(k_diag) - np.sum(v * v, axis=0)

    def covariance(self, K_star, K_ss):
        v = linalg.solve_triangular(self.chol, K_star.T, lower=True)
        return K_ss - v.T @ v


# ---------------------------------------------------------------------------
# negative log marginal likelihood


def gp_nll_t(Kn, U):
    """NLL of U under N(0, Kn) for each of its d_u columns, as a tape primitive.

    The VJP with respect to Kn is 0.5 (d_u Kn^-1 - alpha alpha^T).
    """
    Kv = Kn.value if isinstance(Kn, T.Tensor) else np.asarray(Kn)
    U = np.asarray(U, dtype=np.float64)
    if U.ndim == 1:
        U = U[:, None]
    n, du = U.shape
    L = cholesky(Kv)
    alpha = linalg.cho_solve((L, True), U)
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    val = 0.5 * np.sum(U * alpha) + 0.5 * du * logdet + 0.5 * n * du * np.log(2 * np.pi)

    def vjp(g):
        Kinv = linalg.cho_solve((L, True), np.eye(n))
        return (g * 0.5 * (du * Kinv - alpha @ alpha.T),)

    return T.primitive("gp_nll", (Kn,), np.array(val), vjp)


def nll_graph(feature_map, params, hyper_t, inputs, U, kind="matern52"):
    """Build the NLL on the tape. ``params``/``hyper_t`` may be tensors or arrays."""
    lat = feature_map.embed_t(inputs, params)
    S = lat.shape[0]
    w = cell_volume(lat.shape[2:], feature_map.extents)
    F = T.reshape(lat, (S, -1)) * float(np.sqrt(w))
    r2 = pairwise_sqdist_t(F)
    K = kernel_t(r2, hyper_t["log_lengthscale"], hyper_t["log_variance"], kind)
    Kn = K + T.exp(hyper_t["log_noise"]) * np.eye(S)
    return gp_nll_t(Kn, U)


def nll(feature_map, hyper, inputs, U, params=None):
    """NLL value and gradients (keys ``wno.<name>`` and the three log-hyperparameters)."""
    tape = T.Tape()
    p = tape.params(feature_map.params if params is None else params, "wno.")
    h = {k: tape.param(getattr(hyper, k), k) for k in HYPER_KEYS}
    out = nll_graph(feature_map, {k[4:] if k.startswith("wno.") else k: v for k, v in p.items()},
                    h, inputs, U, hyper.kind)
    return float(out.value), tape.backward(out)


# ---------------------------------------------------------------------------
# initialization training


class Adam:
    """Adaptive-moment optimizer on a dict of arrays, updating in place."""

    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m, self.v, self.t = {}, {}, 0

    def step(self, params, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1, c2 = 1 - b1 ** self.t, 1 - b2 ** self.t
        for k, g in grads.items():
            m = self.m.setdefault(k, np.zeros_like(g))
            v = self.v.setdefault(k, np.zeros_like(g))
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            params[k] = params[k] - self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class InitConfig:
    steps: int = 200
    lr: float = 1e-3
    hyper_lr: float = 2e-2
    seed: int = 0
    kind: str = "matern52"
    init_noise: float = 1e-2
    min_log_noise: float = np.log(1e-6)

    def __post_init__(self):
        if self.steps < 0 or self.lr <= 0 or self.hyper_lr <= 0:
            raise ValidationError("InitConfig: steps >= 0 and positive learning rates required")


@dataclass
class InitResult:
    params: dict
    hyper: KernelHyper
    subset: np.ndarray
    trace: list = field(default_factory=list)  # (step, nll, grad_norm, wall_ms)


def initial_hyper(feature_map, inputs, kind="matern52", noise=1e-2):
    """Lengthscale at the median pairwise latent distance, unit process variance."""
    cache = build_latent_cache(inputs, feature_map)
    d = np.sqrt(accel.pairwise_sqdist(cache.features, cache.features))
    iu = np.triu_indices(d.shape[0], 1)
    med = float(np.median(d[iu])) if iu[0].size else 1.0
    return KernelHyper.from_values(med if med > 0 else 1.0, 1.0, noise, kind)


def init_train(feature_map, inputs, U, s_init, config=None):
    """Minimize the NLL on a seeded subset of ``s_init`` rows with Adam.

    WNO parameters and kernel hyperparameters are trained jointly; the
    hyperparameters use their own (larger) step since they live on a log
    scale. Returns an :class:`InitResult`; on divergence a NumericalError
    carries the last finite state in ``exc.state``.
    """
    config = config or InitConfig()
    N = np.asarray(inputs).shape[0]
    if not 1 <= s_init <= N:
        raise ValidationError(f"S_init must be in [1, {N}], got {s_init}")
    rng = np.random.default_rng(config.seed)
    subset = np.sort(rng.choice(N, size=s_init, replace=False))
    Z = np.asarray(inputs)[subset]
    Us = np.asarray(U)[subset]
    if not np.all(np.isfinite(Us)):
        raise ValidationError("init_train targets must be finite")
    hyper = initial_hyper(feature_map, Z, config.kind, config.init_noise)

    state = {"wno." + k: np.array(v) for k, v in feature_map.params.items()}
    state.update({k: np.array(getattr(hyper, k)) for k in HYPER_KEYS})
    opt_w = Adam(config.lr)
    opt_h = Adam(config.hyper_lr)
    trace = []
    t0 = time.perf_counter()

    def unpack(st):
        params = {k[4:]: v for k, v in st.items() if k.startswith("wno.")}
        h = KernelHyper(float(st["log_lengthscale"]), float(st["log_variance"]),
                        float(st["log_noise"]), config.kind)
        return params, h

    last = {k: v.copy() for k, v in state.items()}
    for step in range(config.steps + 1):
        try:
            params, h = unpack(state)
            val, grads = nll(feature_map, h, Z, Us, params)
        except (NumericalError, ValidationError) as exc:
            err = NumericalError(f"init_train diverged at step {step}: {exc}")
            err.state = unpack(last)
            raise err from exc
        gn = float(np.sqrt(sum(np.sum(g * g) for g in grads.values())))
        if not np.isfinite(val) or not np.isfinite(gn):
            err = NumericalError(f"init_train produced a non-finite NLL at step {step}")
            err.state = unpack(last)
            raise err
        trace.append((step, val, gn, (time.perf_counter() - t0) * 1e3))
        last = {k: v.copy() for k, v in state.items()}
        if step == config.steps:
            break
        opt_w.step(state, {k: g for k, g in grads.items() if k.startswith("wno.")})
        opt_h.step(state, {k: grads[k] for k in HYPER_KEYS})
        state["log_noise"] = np.maximum(state["log_noise"], config.min_log_noise)
    params, h = unpack(last)
    return InitResult(params, h, subset, trace)
