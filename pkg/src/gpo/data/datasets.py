"""Benchmark dataset generation, persistence and ingestion.

Per-sample randomness comes from ``SeedSequence([seed, split]).spawn(N)``,
so sample ``i`` is the same continuous input function whatever ``N`` or the
resolution is. That is what lets the super-resolution pass regenerate the
test set on a finer grid.
"""

from pathlib import Path

import numpy as np

from ..errors import ContainerError, ValidationError
from ..io import container, kvtext
from . import advection, burgers, darcy
from .grf import BURGERS_GRF, DARCY_GRF, draw_coefficients, evaluate
from .grid import OperatorDataset

PDES = ("burgers", "advection", "darcy")
SPLITS = {"train": 0, "test": 1, "probe": 2}


def _rngs(n, seed, split):
    ss = np.random.SeedSequence([int(seed), SPLITS.get(split, 0)])
    return [np.random.default_rng(s) for s in ss.spawn(n)]


def _burgers(rngs, res, nu=0.1, t_final=1.0):
    u0 = np.array([evaluate(BURGERS_GRF, draw_coefficients(BURGERS_GRF, r), (res,)) for r in rngs])
    u0 = u0.reshape(len(rngs), res)
    uT = burgers.burgers_solve(u0, nu, t_final) if len(rngs) else u0
    return u0[:, None], uT[:, None], dict(nu=nu, t_final=t_final)


def _advection(rngs, res, nu=1.0, t_final=0.5):
    ins, outs = [], []
    for r in rngs:
        c, w, h = advection.draw_params(r)
        ins.append(advection.advection_ic(c, w, h, res).values)
        outs.append(advection.advection_solve(c, w, h, nu, t_final, res).values)
    shape = (0, 1, res)
    return (np.array(ins).reshape(shape if not ins else (len(ins), 1, res)),
            np.array(outs).reshape(shape if not outs else (len(outs), 1, res)),
            dict(nu=nu, t_final=t_final, cap_sharpness=advection.CAP_SHARPNESS))


def _darcy(rngs, res, f=1.0):
    ins, outs = [], []
    for r in rngs:
        a = darcy.darcy_permeability_sample(res, r)
        ins.append(a.values)
        outs.append(darcy.darcy_solve(a, f).values)
    shape = (len(rngs), 1, res, res)
    return np.array(ins).reshape(shape), np.array(outs).reshape(shape), dict(f=f)


def make_dataset(pde, n, resolution, seed=0, split="train"):
    """Generate ``n`` samples of a benchmark at ``resolution`` points per axis."""
    if pde not in PDES:
        raise ValidationError(f"unknown pde {pde!r}; generators exist for {PDES}")
    if n < 0:
        raise ValidationError("sample count must be >= 0")
    if resolution < 4:
        raise ValidationError("resolution must be >= 4")
    rngs = _rngs(n, seed, split)
    if pde == "burgers":
        x, y, params = _burgers(rngs, resolution)
        extents, boundary = (1.0,), "periodic"
    elif pde == "advection":
        x, y, params = _advection(rngs, resolution)
        extents, boundary = (1.0,), "periodic"
    else:
        x, y, params = _darcy(rngs, resolution)
        extents, boundary = (1.0, 1.0), "dirichlet"
    meta = dict(pde=pde, n=n, resolution=resolution, seed=int(seed), split=split, **params)
    return OperatorDataset(x, y, pde, extents, boundary, meta)


# ---------------------------------------------------------------------------
# persistence


def _paths(prefix):
    prefix = str(prefix)
    for suffix in ("_inputs.gpot", "_targets.gpot", ".meta.txt"):
        if prefix.endswith(suffix):
            prefix = prefix[: -len(suffix)]
    return (Path(prefix + "_inputs.gpot"), Path(prefix + "_targets.gpot"),
            Path(prefix + ".meta.txt"))


def write_dataset(ds, prefix, extra=None):
    """Write ``<prefix>_inputs.gpot``, ``<prefix>_targets.gpot`` and a sidecar."""
    pin, ptg, pmeta = _paths(prefix)
    pin.parent.mkdir(parents=True, exist_ok=True)
    container.write(pin, ds.inputs)
    container.write(ptg, ds.targets)
    meta = dict(ds.meta)
    meta.update(pde=ds.pde, boundary=ds.boundary, extents=list(ds.extents),
                inputs_crc=f"{container.crc_of(pin):08x}", targets_crc=f"{container.crc_of(ptg):08x}",
                digest=ds.digest())
    meta.update(extra or {})
    kvtext.write(pmeta, meta, header=["GPO dataset provenance"])
    return pin, ptg, pmeta


def _coerce(v):
    for cast in (int, float):
        try:
            return cast(v)
        except ValueError:
            pass
    return v


def ingest_dataset(path):
    """Load a dataset written by :func:`write_dataset` or supplied externally.

    Without a sidecar the grid is assumed to be the periodic unit interval
    or square, inferred from the container rank.
    """
    pin, ptg, pmeta = _paths(path)
    x = container.read(pin)
    y = container.read(ptg)
    if x.ndim not in (3, 4) or y.ndim != x.ndim:
        raise ContainerError(f"expected rank-3 or rank-4 containers, got {x.ndim} and {y.ndim}", pin)
    if pmeta.exists():
        meta = {k: _coerce(v) for k, v in kvtext.read(pmeta).items()}
        extents = tuple(float(e) for e in str(meta.pop("extents")).split(","))
        boundary = meta.pop("boundary")
        pde = meta.pop("pde")
    else:
        meta, pde, boundary = {}, "external", "periodic"
        extents = (1.0,) * (x.ndim - 2)
    for k in ("inputs_crc", "targets_crc", "digest"):
        meta.pop(k, None)
    try:
        return OperatorDataset(x, y, pde, extents, boundary, meta)
    except ValidationError as exc:
        raise ContainerError(str(exc), pin) from exc
