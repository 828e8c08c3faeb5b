"""Shared, memoized test fixtures."""

from functools import lru_cache

import numpy as np

from gpo.data import make_dataset
from gpo.exact_gp import cholesky_solve_oracle, initial_hyper
from gpo.kernel import build_latent_cache, full_gram
from gpo.posterior import TargetTransform
from gpo.wno import FeatureMap, WnoConfig, init_params

BURGERS_NOISE = 1e-2


@lru_cache(maxsize=None)
def burgers_gram(n=256, resolution=128, noise=BURGERS_NOISE):
    """Matérn Gram on Burgers latents from a seeded (untrained) WNO.

    Returns (K, U, noise, A_chol) with U the standardized targets and the
    lengthscale at the median latent distance.
    """
    ds = make_dataset("burgers", n, resolution, 0, "train")
    cfg = WnoConfig(width=16, layers=2, basis="db6", levels=4, d_lat=8, resolution=resolution)
    mu, sd = FeatureMap.input_stats(ds.inputs)
    fm = FeatureMap(cfg, init_params(cfg, 0), ds.extents, ds.boundary, mu, sd)
    hyper = initial_hyper(fm, ds.inputs, noise=noise)
    K = full_gram(build_latent_cache(ds.inputs, fm), hyper)
    U = TargetTransform.fit(ds.targets).forward(ds.targets)
    A = cholesky_solve_oracle(K, noise, U)
    K.flags.writeable = False
    U.flags.writeable = False
    A.flags.writeable = False
    return K, U, noise, A
