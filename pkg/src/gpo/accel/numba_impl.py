"""Loop kernels compiled with numba.

fastmath stays off: the Gram entries must match the scalar distance path
bit for bit, which reassociation would break.
"""

import numpy as np
from numba import njit, prange

_OPTS = dict(cache=True, nogil=True, error_model="numpy")


@njit(**_OPTS)
def sqdist_pair(x, y):
    s = 0.0
    for k in range(x.shape[0]):
        d = x[k] - y[k]
        s += d * d
    return s


@njit(parallel=True, **_OPTS)
def pairwise_sqdist(X, Y):
    n, m = X.shape[0], Y.shape[0]
    out = np.empty((n, m))
    for i in prange(n):
        for j in range(m):
            out[i, j] = sqdist_pair(X[i], Y[j])
    return out


@njit(parallel=True, **_OPTS)
def dwt_step(x, h, g):
    m, n = x.shape
    half = n // 2
    F = h.shape[0]
    a = np.zeros((m, half))
    d = np.zeros((m, half))
    for r in prange(m):
        for i in range(half):
            sa = 0.0
            sd = 0.0
            for k in range(F):
                v = x[r, (2 * i + k) % n]
                sa += h[k] * v
                sd += g[k] * v
            a[r, i] = sa
            d[r, i] = sd
    return a, d


@njit(parallel=True, **_OPTS)
def idwt_step(a, d, h, g):
    m, half = a.shape
    n = 2 * half
    F = h.shape[0]
    x = np.zeros((m, n))
    for r in prange(m):
        for i in range(half):
            ai = a[r, i]
            di = d[r, i]
            for k in range(F):
                x[r, (2 * i + k) % n] += h[k] * ai + g[k] * di
    return x


@njit(**_OPTS)
def sdd_step(K_rows, idx, A, V, Abar, U, noise, beta, rho, r, scale, G):
    N, du = A.shape
    B = idx.shape[0]
    P = np.empty((N, du))
    for j in range(N):
        for c in range(du):
            P[j, c] = A[j, c] + rho * V[j, c]
    KP = np.dot(K_rows, P)
    G[:, :] = 0.0
    for b in range(B):
        i = idx[b]
        for c in range(du):
            G[i, c] += scale * (KP[b, c] + noise * P[i, c] - U[i, c])
    gn = 0.0
    for j in range(N):
        for c in range(du):
            gjc = G[j, c]
            gn += gjc * gjc
            v = rho * V[j, c] - beta * gjc
            V[j, c] = v
            A[j, c] += v
            Abar[j, c] = (1.0 - r) * Abar[j, c] + r * A[j, c]
    return np.sqrt(gn)


@njit(**_OPTS)
def darcy_matvec(u, Tx, Ty):
    n0, n1 = u.shape
    out = np.empty_like(u)
    for i in range(n0):
        for j in range(n1):
            c = u[i, j]
            s = (Tx[i, j] + Tx[i, j + 1] + Ty[i, j] + Ty[i + 1, j]) * c
            if j > 0:
                s -= Tx[i, j] * u[i, j - 1]
            if j < n1 - 1:
                s -= Tx[i, j + 1] * u[i, j + 1]
            if i > 0:
                s -= Ty[i, j] * u[i - 1, j]
            if i < n0 - 1:
                s -= Ty[i + 1, j] * u[i + 1, j]
            out[i, j] = s
    return out
