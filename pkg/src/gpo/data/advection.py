"""Linear advection of a square-wave-plus-cap profile on the periodic unit interval."""

import numpy as np

from ..errors import ValidationError
from .grid import GridFunction, axis_coords

PARAM_BOX = ((0.3, 0.7), (0.3, 0.6), (1.0, 2.0))  # c, omega, h
CAP_SHARPNESS = 5.0


def _check_box(c, omega, h):
    for name, v, (lo, hi) in zip(("c", "omega", "h"), (c, omega, h), PARAM_BOX):
        if not lo <= v <= hi:
            raise ValidationError(f"advection parameter {name}={v} outside [{lo}, {hi}]")


def profile(x, c, omega, h, a=CAP_SHARPNESS):
    """h * 1[|x - c| <= omega/2] + sqrt(max(h^2 - (a (x - c))^2, 0)).

    Distances to the centre are measured periodically so the profile is a
    genuine function on the circle.
    """
    r = (np.asarray(x) - c + 0.5) % 1.0 - 0.5
    box = (np.abs(r) <= omega / 2.0 + 1e-12).astype(float)
    return h * box + np.sqrt(np.maximum(h * h - (a * r) ** 2, 0.0))


def advection_ic(c, omega, h, resolution, a=CAP_SHARPNESS):
    _check_box(c, omega, h)
    x = axis_coords(resolution, 1.0, "periodic")
    return GridFunction(profile(x, c, omega, h, a)[None], (1.0,), "periodic")


def advection_solve(c, omega, h, nu=1.0, t_final=0.5, resolution=40, a=CAP_SHARPNESS):
    """Exact solution u(x, t) = u0((x - nu t) mod 1) sampled on the grid."""
    _check_box(c, omega, h)
    x = axis_coords(resolution, 1.0, "periodic")
    return GridFunction(profile((x - nu * t_final) % 1.0, c, omega, h, a)[None], (1.0,), "periodic")


def draw_params(rng):
    return tuple(rng.uniform(lo, hi) for lo, hi in PARAM_BOX)
