"""Steady Darcy flow -div(a grad u) = f on the unit square, u = 0 on the boundary.

Cell-centred finite volumes on an n x n grid. Interior faces use the
harmonic mean of the two adjacent permeabilities; boundary faces sit half a
cell from the centre, giving transmissibility 2a. The SPD system is solved
with Jacobi-preconditioned conjugate gradients.
"""

import numpy as np

from .. import accel
from ..errors import NumericalError, ValidationError
from .grf import DARCY_GRF, draw_coefficients, evaluate
from .grid import GridFunction

HIGH, LOW = 12.0, 3.0


def transmissibilities(a):
    n0, n1 = a.shape
    Tx = np.empty((n0, n1 + 1))
    Tx[:, 1:-1] = 2.0 * a[:, :-1] * a[:, 1:] / (a[:, :-1] + a[:, 1:])
    Tx[:, 0] = 2.0 * a[:, 0]
    Tx[:, -1] = 2.0 * a[:, -1]
    Ty = np.empty((n0 + 1, n1))
    Ty[1:-1, :] = 2.0 * a[:-1, :] * a[1:, :] / (a[:-1, :] + a[1:, :])
    Ty[0, :] = 2.0 * a[0, :]
    Ty[-1, :] = 2.0 * a[-1, :]
    return Tx, Ty


def conjugate_gradient(matvec, b, diag, tol=1e-10, max_iter=None):
    """Preconditioned CG; stops when ||r|| <= tol * ||b||."""
    max_iter = max_iter or 10 * b.size
    x = np.zeros_like(b)
    r = b.copy()
    z = r / diag
    p = z.copy()
    rz = np.sum(r * z)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return x, 0
    for it in range(1, max_iter + 1):
        Ap = matvec(p)
        alpha = rz / np.sum(p * Ap)
        x += alpha * p
        r -= alpha * Ap
        if np.linalg.norm(r) <= tol * bnorm:
            return x, it
        z = r / diag
        rz_new = np.sum(r * z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise NumericalError(f"CG stagnated after {max_iter} iterations "
                         f"(residual {np.linalg.norm(r) / bnorm:.2e})")


def darcy_solve(a_field, f=1.0, tol=1e-10):
    """Pressure field for permeability ``a_field`` (n x n array or GridFunction)."""
    a = a_field.values[0] if isinstance(a_field, GridFunction) else np.asarray(a_field, dtype=float)
    if a.ndim != 2:
        raise ValidationError("darcy_solve expects a 2-D permeability field")
    if np.any(a <= 0) or not np.all(np.isfinite(a)):
        raise ValidationError("permeability must be finite and strictly positive")
    n0, n1 = a.shape
    Tx, Ty = transmissibilities(a)
    diag = Tx[:, :-1] + Tx[:, 1:] + Ty[:-1, :] + Ty[1:, :]
    rhs = np.full(a.shape, float(f) / (n0 * n1))  # f * cell area on the unit square
    u, _ = conjugate_gradient(lambda v: accel.darcy_matvec(v, Tx, Ty), rhs, diag, tol=tol)
    return GridFunction(u[None], (1.0, 1.0), "dirichlet")


def threshold(g):
    return np.where(g >= 0.0, HIGH, LOW)


def darcy_permeability_sample(resolution, seed=0, spec=DARCY_GRF):
    """Two-phase medium: a smooth zero-mean GRF mapped to {12, 3} by sign."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    g = evaluate(spec, draw_coefficients(spec, rng), (resolution, resolution), "dirichlet")
    return GridFunction(threshold(g)[None], (1.0, 1.0), "dirichlet")
