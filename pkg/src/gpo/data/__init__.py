"""PDE benchmark data: grids, GRF sampling, solvers and dataset I/O."""

from .advection import advection_ic, advection_solve
from .burgers import burgers_solve
from .darcy import darcy_permeability_sample, darcy_solve
from .datasets import ingest_dataset, make_dataset, write_dataset
from .grf import GrfSpec, grf_sample
from .grid import GridFunction, OperatorDataset, resample

__all__ = [
    "GridFunction", "OperatorDataset", "GrfSpec", "grf_sample", "burgers_solve",
    "advection_ic", "advection_solve", "darcy_solve", "darcy_permeability_sample",
    "make_dataset", "write_dataset", "ingest_dataset", "resample",
]
