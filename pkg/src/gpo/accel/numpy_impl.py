"""Pure-numpy versions of the hot kernels.

Every function here has a loop-level twin in ``numba_impl`` with an
identical signature; ``gpo.accel`` picks one at call time.
"""

import numpy as np


def sqdist_pair(x, y):
    d = x - y
    return float(np.sum(d * d))


def pairwise_sqdist(X, Y):
    out = np.empty((X.shape[0], Y.shape[0]))
    for i in range(X.shape[0]):
        d = X[i] - Y
        out[i] = np.sum(d * d, axis=1)
    return out


def _taps(n, F):
    return (2 * np.arange(n // 2)[:, None] + np.arange(F)[None, :]) % n


def dwt_step(x, h, g):
    """One periodic analysis level along the last axis of a 2-D array."""
    n = x.shape[1]
    xs = x[:, _taps(n, h.shape[0])]
    return xs @ h, xs @ g


def idwt_step(a, d, h, g):
    m, half = a.shape
    n = 2 * half
    x = np.zeros((m, n))
    base = 2 * np.arange(half)
    for k in range(h.shape[0]):
        x[:, (base + k) % n] += h[k] * a + g[k] * d
    return x


def sdd_step(K_rows, idx, A, V, Abar, U, noise, beta, rho, r, scale, G):
    P = A + rho * V
    rows = K_rows @ P + noise * P[idx] - U[idx]
    G[:] = 0.0
    np.add.at(G, idx, scale * rows)
    V *= rho
    V -= beta * G
    A += V
    Abar *= 1.0 - r
    Abar += r * A
    return float(np.sqrt(np.sum(G * G)))


def darcy_matvec(u, Tx, Ty):
    """Apply the 5-point finite-volume operator; Tx is (n, n+1), Ty is (n+1, n)."""
    out = (Tx[:, :-1] + Tx[:, 1:] + Ty[:-1, :] + Ty[1:, :]) * u
    out[:, 1:] -= Tx[:, 1:-1] * u[:, :-1]
    out[:, :-1] -= Tx[:, 1:-1] * u[:, 1:]
    out[1:, :] -= Ty[1:-1, :] * u[:-1, :]
    out[:-1, :] -= Ty[1:-1, :] * u[1:, :]
    return out
