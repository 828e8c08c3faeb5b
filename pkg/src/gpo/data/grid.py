"""Grid functions, datasets and resolution changes between grids.

Two grid conventions are used:

* ``periodic``: nodes at ``x_j = j * L / n`` (Burgers, advection).
* ``dirichlet``: cell centres at ``x_j = (j + 1/2) * L / n`` with the field
  vanishing on the domain boundary (Darcy).

Either way a grid point represents one cell of volume ``prod(L_i / n_i)``,
which is the quadrature weight used by every L2 norm in the package.
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError, ValidationError

BOUNDARIES = ("periodic", "dirichlet")


@dataclass
class GridFunction:
    values: np.ndarray  # (channels, *spatial)
    extents: tuple = (1.0,)
    boundary: str = "periodic"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != len(self.extents) + 1:
            raise ShapeError("GridFunction", self.values.shape,
                             detail=f"expected channels + {len(self.extents)} spatial axes")
        if any(e <= 0 for e in self.extents):
            raise ValidationError("extents must be positive")
        if self.boundary not in BOUNDARIES:
            raise ValidationError(f"boundary must be one of {BOUNDARIES}")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("GridFunction values must be finite")

    @property
    def channels(self):
        return self.values.shape[0]

    @property
    def shape(self):
        return self.values.shape[1:]

    def weights(self):
        return cell_volume(self.shape, self.extents)

    def coords(self):
        return grid_coords(self.shape, self.extents, self.boundary)

    def norm(self):
        return float(np.sqrt(self.weights() * np.sum(self.values ** 2)))

    def resample(self, shape):
        return GridFunction(resample(self.values, shape, self.boundary), self.extents, self.boundary)


def cell_volume(shape, extents):
    return float(np.prod([e / n for e, n in zip(extents, shape)]))


def axis_coords(n, extent, boundary):
    j = np.arange(n, dtype=np.float64)
    return (j + 0.5) * extent / n if boundary == "dirichlet" else j * extent / n


def grid_coords(shape, extents, boundary):
    """Coordinate channels, shape (ndim, *shape)."""
    axes = [axis_coords(n, e, boundary) for n, e in zip(shape, extents)]
    return np.stack(np.meshgrid(*axes, indexing="ij"))


# ---------------------------------------------------------------------------
# band-limited resampling


def _fourier_matrix(n_src, n_dst):
    """Map samples on an n_src periodic grid to the trigonometric interpolant on n_dst."""
    X = np.fft.rfft(np.eye(n_src), axis=0)
    keep = min(n_src, n_dst) // 2 + 1
    Y = np.zeros((n_dst // 2 + 1, n_src), dtype=complex)
    Y[:keep] = X[:keep] * (n_dst / n_src)
    if n_dst > n_src and n_src % 2 == 0:
        # source Nyquist is a pure cosine; irfft counts non-Nyquist bins twice
        Y[n_src // 2] = 0.5 * X[n_src // 2] * (n_dst / n_src)
    elif n_dst < n_src and n_dst % 2 == 0:
        Y[n_dst // 2] = 2.0 * np.real(X[n_dst // 2]) * (n_dst / n_src)
    return np.fft.irfft(Y, n=n_dst, axis=0)


def _sine_matrix(n_src, n_dst):
    """Cell-centred sine-series interpolation for fields vanishing at the walls."""
    j_src = (np.arange(n_src) + 0.5) / n_src
    j_dst = (np.arange(n_dst) + 0.5) / n_dst
    K = min(n_src, n_dst)
    k = np.arange(1, K + 1)
    S_src = np.sin(np.pi * np.outer(j_src, np.arange(1, n_src + 1)))  # (n_src, n_src)
    coeffs = np.linalg.solve(S_src, np.eye(n_src))[:K]  # modes from samples
    return np.sin(np.pi * np.outer(j_dst, k)) @ coeffs


_MATS = {}


def resample_matrix(n_src, n_dst, boundary):
    key = (n_src, n_dst, boundary)
    if key not in _MATS:
        if n_src == n_dst:
            M = np.eye(n_src)
        elif boundary == "periodic":
            M = _fourier_matrix(n_src, n_dst)
        else:
            M = _sine_matrix(n_src, n_dst)
        M.flags.writeable = False
        _MATS[key] = M
    return _MATS[key]


def resample(values, shape, boundary):
    """Band-limited resampling of the trailing ``len(shape)`` axes."""
    out = np.asarray(values, dtype=np.float64)
    nd = len(shape)
    for i, n_dst in enumerate(shape):
        ax = out.ndim - nd + i
        M = resample_matrix(out.shape[ax], n_dst, boundary)
        out = np.moveaxis(np.tensordot(M, out, axes=([1], [ax])), 0, ax)
    return out


# ---------------------------------------------------------------------------


@dataclass
class OperatorDataset:
    """N paired input/target fields on one shared grid."""

    inputs: np.ndarray   # (N, C_in, *spatial)
    targets: np.ndarray  # (N, C_out, *spatial)
    pde: str = "external"
    extents: tuple = (1.0,)
    boundary: str = "periodic"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.float64)
        nd = len(self.extents)
        if self.inputs.ndim != nd + 2 or self.targets.ndim != nd + 2:
            raise ShapeError("OperatorDataset", self.inputs.shape, self.targets.shape,
                             detail=f"expected (N, C, *{nd} spatial axes)")
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ShapeError("OperatorDataset", self.inputs.shape, self.targets.shape,
                             detail="sample counts differ")
        if self.inputs.shape[2:] != self.targets.shape[2:]:
            raise ShapeError("OperatorDataset", self.inputs.shape, self.targets.shape,
                             detail="inputs and targets must share one grid")
        for name, arr in (("inputs", self.inputs), ("targets", self.targets)):
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"dataset {name} contain non-finite values")

    def __len__(self):
        return self.inputs.shape[0]

    @property
    def shape(self):
        return self.inputs.shape[2:]

    @property
    def resolution(self):
        return self.shape[0]

    @property
    def ndim(self):
        return len(self.extents)

    @property
    def weight(self):
        return cell_volume(self.shape, self.extents)

    def subset(self, idx):
        idx = np.asarray(idx, dtype=int)
        return OperatorDataset(self.inputs[idx], self.targets[idx], self.pde, self.extents,
                               self.boundary, dict(self.meta))

    def input_field(self, i):
        return GridFunction(self.inputs[i], self.extents, self.boundary)

    def target_field(self, i):
        return GridFunction(self.targets[i], self.extents, self.boundary)

    def digest(self):
        h = hashlib.sha256()
        for arr in (self.inputs, self.targets):
            h.update(str(arr.shape).encode())
            h.update(np.ascontiguousarray(arr).tobytes())
        h.update(f"{self.pde}|{self.extents}|{self.boundary}".encode())
        return h.hexdigest()
