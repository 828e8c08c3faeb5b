"""Spectral sampling of periodic Gaussian random fields.

The covariance operator ``scale * (-Laplacian + shift * I)^(-power)`` on the
unit torus is diagonal in the real Fourier basis {1, sqrt2 cos, sqrt2 sin}
with eigenvalues ``scale / ((2 pi |k|)^2 + shift)^power``. A sample is a
truncated Karhunen-Loeve sum with a fixed mode cutoff, evaluated pointwise
at the requested grid, so one seed describes the same continuous field at
every resolution.
"""

from dataclasses import dataclass

import numpy as np

from .grid import GridFunction, axis_coords


@dataclass(frozen=True)
class GrfSpec:
    scale: float = 625.0
    shift: float = 25.0
    power: float = 2.0
    n_modes: int = 64
    ndim: int = 1
    drop_mean: bool = False

    def eigenvalue(self, k_sq):
        """Eigenvalue for squared integer wavenumber magnitude ``k_sq``."""
        return self.scale / ((2.0 * np.pi) ** 2 * np.asarray(k_sq, dtype=float) + self.shift) ** self.power

    def pointwise_variance(self):
        k = np.arange(-self.n_modes, self.n_modes + 1)
        if self.ndim == 1:
            lam = self.eigenvalue(k ** 2)
        else:
            lam = self.eigenvalue(k[:, None] ** 2 + k[None, :] ** 2)
        total = float(np.sum(lam))
        if self.drop_mean:
            total -= float(self.eigenvalue(0))
        return total


BURGERS_GRF = GrfSpec()
DARCY_GRF = GrfSpec(scale=1.0, shift=9.0, power=2.0, n_modes=24, ndim=2, drop_mean=True)


def _basis_matrix(x, n_modes):
    """Real Fourier basis at points x: columns [1, sqrt2 cos(2pi k x), sqrt2 sin(2pi k x)]."""
    k = np.arange(1, n_modes + 1)
    ph = 2.0 * np.pi * np.outer(x, k)
    return np.hstack([np.ones((x.shape[0], 1)), np.sqrt(2.0) * np.cos(ph), np.sqrt(2.0) * np.sin(ph)])


def _wavenumbers(n_modes):
    k = np.arange(1, n_modes + 1)
    return np.concatenate([[0], k, k])


def draw_coefficients(spec, rng):
    """Karhunen-Loeve coefficients sqrt(lambda) * xi in the real basis ordering."""
    kk = _wavenumbers(spec.n_modes)
    if spec.ndim == 1:
        lam = spec.eigenvalue(kk ** 2)
        c = np.sqrt(lam) * rng.standard_normal(lam.shape)
        if spec.drop_mean:
            c[0] = 0.0
    else:
        lam = spec.eigenvalue(kk[:, None] ** 2 + kk[None, :] ** 2)
        c = np.sqrt(lam) * rng.standard_normal(lam.shape)
        if spec.drop_mean:
            c[0, 0] = 0.0
    return c


def evaluate(spec, coeffs, shape, boundary="periodic"):
    mats = [_basis_matrix(axis_coords(n, 1.0, boundary), spec.n_modes) for n in shape]
    if spec.ndim == 1:
        return mats[0] @ coeffs
    return mats[0] @ coeffs @ mats[1].T


def grf_sample(resolution, spec=BURGERS_GRF, seed=0, boundary="periodic"):
    """One GRF sample on a ``resolution``-per-axis grid of the unit domain."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    shape = (resolution,) * spec.ndim
    vals = evaluate(spec, draw_coefficients(spec, rng), shape, boundary)
    return GridFunction(vals[None], (1.0,) * spec.ndim, boundary)
