"""Periodic multilevel discrete wavelet transforms (1-D and 2-D).

Filters are orthonormal Daubechies filters computed by spectral
factorization, so the analysis operator is an orthogonal matrix and its
transpose is the synthesis operator. That makes both transforms cheap
differentiable primitives: the VJP of ``dwt`` is ``idwt`` and vice versa.

Coefficients can be held either as :class:`WaveletCoeffs` (approximation
plus per-level detail bands) or packed in-place into an array of the input
shape using the Mallat layout: the coarsest approximation occupies the
leading block, followed by detail blocks from coarse to fine. In the packed
layout the approximation plus coarsest detail bands form the leading
``2*m`` block along every transformed axis, where ``m`` is the coarsest
length.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from math import comb

import numpy as np

from . import accel
from .errors import ShapeError, ValidationError
from .tensor import primitive

BASES = {"haar": 1, "db4": 4, "db6": 6}


@lru_cache(maxsize=None)
def daubechies_lowpass(p):
    """Minimum-phase Daubechies scaling filter with ``p`` vanishing moments."""
    if p < 1:
        raise ValidationError("vanishing moments must be >= 1")
    q = np.array([1.0])
    if p > 1:
        # P(y) = sum_k C(p-1+k, k) y^k, y = sin^2(w/2) = (2 - z - 1/z) / 4
        coeffs = [comb(p - 1 + k, k) for k in range(p)]
        yroots = np.roots(coeffs[::-1])
        zroots = []
        for y in yroots:
            # z^2 - (2 - 4y) z + 1 = 0 ; keep the root inside the unit circle
            zs = np.roots([1.0, -(2.0 - 4.0 * y), 1.0])
            zroots.append(zs[np.argmin(np.abs(zs))])
        q = np.real(np.poly(zroots))
    h = np.array([1.0])
    for _ in range(p):
        h = np.convolve(h, [1.0, 1.0])
    h = np.convolve(h, q)
    return h * (np.sqrt(2.0) / h.sum())


@dataclass(frozen=True)
class WaveletBasis:
    name: str
    dec_lo: np.ndarray = field(repr=False)
    dec_hi: np.ndarray = field(repr=False)

    @property
    def rec_lo(self):
        return self.dec_lo

    @property
    def rec_hi(self):
        return self.dec_hi

    @property
    def length(self):
        return self.dec_lo.shape[0]


@lru_cache(maxsize=None)
def get_basis(name):
    if name not in BASES:
        raise ValidationError(f"unknown wavelet basis {name!r}; choose from {sorted(BASES)}")
    h = daubechies_lowpass(BASES[name])
    F = h.shape[0]
    g = np.array([(-1) ** k * h[F - 1 - k] for k in range(F)])
    h.flags.writeable = False
    g.flags.writeable = False
    return WaveletBasis(name, h, g)


def _basis(b):
    return b if isinstance(b, WaveletBasis) else get_basis(b)


def check_levels(shape, levels):
    """Raise unless every axis in ``shape`` is divisible by 2**levels."""
    if levels < 1:
        raise ValidationError(f"levels must be >= 1, got {levels}")
    step = 2 ** levels
    for n in shape:
        if n % step:
            raise ShapeError("dwt", tuple(shape),
                             detail=f"each transformed axis must be divisible by 2**{levels} = {step}")


# ---------------------------------------------------------------------------
# single-axis level steps on arbitrary batch shapes


def _analyze(x, axis, basis):
    x = np.moveaxis(x, axis, -1)
    lead = x.shape[:-1]
    a, d = accel.dwt_step(x.reshape(-1, x.shape[-1]), basis.dec_lo, basis.dec_hi)
    half = x.shape[-1] // 2
    return (np.moveaxis(a.reshape(lead + (half,)), -1, axis),
            np.moveaxis(d.reshape(lead + (half,)), -1, axis))


def _synthesize(a, d, axis, basis):
    a = np.moveaxis(a, axis, -1)
    d = np.moveaxis(d, axis, -1)
    lead = a.shape[:-1]
    x = accel.idwt_step(a.reshape(-1, a.shape[-1]), d.reshape(-1, d.shape[-1]),
                        basis.rec_lo, basis.rec_hi)
    return np.moveaxis(x.reshape(lead + (x.shape[-1],)), -1, axis)


# ---------------------------------------------------------------------------
# structured coefficients


@dataclass
class WaveletCoeffs:
    """Multilevel coefficients.

    ``details[0]`` belongs to the finest level and ``details[-1]`` to the
    coarsest. In 1-D each entry is an array; in 2-D it is a tuple of the
    three orientation bands ``(ad, da, dd)``, where the first letter is the
    filter applied along axis -2 and the second along axis -1.
    """

    approx: np.ndarray
    details: list
    ndim: int

    @property
    def levels(self):
        return len(self.details)

    def count(self):
        n = self.approx.size
        for d in self.details:
            n += sum(b.size for b in d) if self.ndim == 2 else d.size
        return n

    def energy(self):
        e = np.sum(self.approx ** 2)
        for d in self.details:
            e += sum(np.sum(b ** 2) for b in d) if self.ndim == 2 else np.sum(d ** 2)
        return float(e)


def dwt(signal, basis="db6", levels=1, ndim=1):
    """Multilevel periodic DWT over the trailing ``ndim`` axes."""
    basis = _basis(basis)
    x = np.asarray(signal, dtype=np.float64)
    if ndim not in (1, 2) or x.ndim < ndim:
        raise ValidationError(f"dwt: ndim must be 1 or 2 and <= signal rank, got {ndim}")
    check_levels(x.shape[-ndim:], levels)
    details = []
    a = x
    for _ in range(levels):
        if ndim == 1:
            a, d = _analyze(a, -1, basis)
            details.append(d)
        else:
            lo, hi = _analyze(a, -1, basis)
            a, ad = _analyze(lo, -2, basis)
            da, dd = _analyze(hi, -2, basis)
            details.append((ad, da, dd))
    return WaveletCoeffs(a, details, ndim)


def idwt(coeffs, basis="db6"):
    basis = _basis(basis)
    a = np.asarray(coeffs.approx, dtype=np.float64)
    for d in reversed(coeffs.details):
        if coeffs.ndim == 1:
            if d.shape != a.shape:
                raise ShapeError("idwt", a.shape, d.shape, detail="level shape mismatch")
            a = _synthesize(a, d, -1, basis)
        else:
            ad, da, dd = d
            if not (ad.shape == da.shape == dd.shape == a.shape):
                raise ShapeError("idwt", a.shape, ad.shape, da.shape, dd.shape,
                                 detail="level shape mismatch")
            lo = _synthesize(a, ad, -2, basis)
            hi = _synthesize(da, dd, -2, basis)
            a = _synthesize(lo, hi, -1, basis)
    return a


# ---------------------------------------------------------------------------
# packed (Mallat) layout


def pack(coeffs):
    a = coeffs.approx
    if coeffs.ndim == 1:
        return np.concatenate([a] + [d for d in reversed(coeffs.details)], axis=-1)
    out = a
    for ad, da, dd in reversed(coeffs.details):
        top = np.concatenate([out, ad], axis=-1)
        bottom = np.concatenate([da, dd], axis=-1)
        out = np.concatenate([top, bottom], axis=-2)
    return out


def unpack(packed, levels, ndim):
    x = np.asarray(packed, dtype=np.float64)
    check_levels(x.shape[-ndim:], levels)
    details = []
    if ndim == 1:
        n = x.shape[-1]
        for lev in range(1, levels + 1):
            s = n >> lev
            details.append(x[..., s:2 * s])
        approx = x[..., : n >> levels]
    else:
        n0, n1 = x.shape[-2:]
        for lev in range(1, levels + 1):
            s0, s1 = n0 >> lev, n1 >> lev
            details.append((x[..., :s0, s1:2 * s1], x[..., s0:2 * s0, :s1],
                            x[..., s0:2 * s0, s1:2 * s1]))
        approx = x[..., : n0 >> levels, : n1 >> levels]
    return WaveletCoeffs(approx, details, ndim)


def dwt_packed_array(x, basis, levels, ndim):
    return pack(dwt(x, basis, levels, ndim))


def idwt_packed_array(c, basis, levels, ndim):
    return idwt(unpack(c, levels, ndim), basis)


# ---------------------------------------------------------------------------
# differentiable primitives


def dwt_t(x, basis="db6", levels=1, ndim=1):
    """Packed DWT as a tape primitive; the VJP is the inverse transform."""
    basis = _basis(basis)
    xv = x.value if hasattr(x, "value") else np.asarray(x, dtype=np.float64)
    out = dwt_packed_array(xv, basis, levels, ndim)
    return primitive(f"dwt[{basis.name},L{levels}]", (x,), out,
                     lambda g: (idwt_packed_array(g, basis, levels, ndim),))


def idwt_t(c, basis="db6", levels=1, ndim=1):
    basis = _basis(basis)
    cv = c.value if hasattr(c, "value") else np.asarray(c, dtype=np.float64)
    out = idwt_packed_array(cv, basis, levels, ndim)
    return primitive(f"idwt[{basis.name},L{levels}]", (c,), out,
                     lambda g: (dwt_packed_array(g, basis, levels, ndim),))
