"""Experiment configuration: a flat ``key = value`` file with a fixed schema.

Unknown keys are rejected. Every key, its type, unit and default is listed
in :data:`SCHEMA`; the per-benchmark defaults in :data:`PRESETS` override
the generic defaults before the file is applied.
"""

from dataclasses import asdict, dataclass, fields

from .data.datasets import PDES
from .errors import ValidationError
from .io import kvtext
from .kernel import KINDS
from .wavelet import BASES

# key: (description with unit)
SCHEMA = {
    "pde": "benchmark tag: burgers | advection | darcy",
    "n_train": "training samples [count]",
    "n_test": "test samples [count]",
    "resolution": "grid points per axis for training and test data [count]",
    "data_seed": "seed for dataset generation [int]",
    "seed": "seed for parameter init, subsets and SDD batches [int]",
    "s_init": "samples used by the exact-GP initialization [count]",
    "s_sdd": "training samples used by SDD, 0 means all [count]",
    "init_steps": "Adam steps of the initialization [count]",
    "init_lr": "Adam step for WNO parameters [1]",
    "hyper_lr": "Adam step for log kernel hyperparameters [1]",
    "init_noise": "initial noise variance of standardized targets [1]",
    "kernel": "base kernel: matern52 | rbf",
    "solver": "representer-weight solver: sdd | cholesky | auto (cholesky iff s_init = n_train)",
    "batch": "SDD batch size B [count]",
    "lr": "SDD step size beta, divided by N internally [1]",
    "momentum": "SDD momentum rho in [0, 1)",
    "averaging": "SDD geometric averaging r in (0, 1]",
    "epochs": "SDD epochs; one epoch is ceil(N / B) steps [count]",
    "width": "WNO hidden channels [count]",
    "layers": "WNO wavelet blocks [count]",
    "basis": "wavelet basis: haar | db4 | db6",
    "levels": "wavelet decomposition levels at the training resolution [count]",
    "d_lat": "latent channels fed to the kernel [count]",
    "samples": "pathwise posterior samples for bands [count]",
    "level": "confidence band level in (0, 1)",
    "superres": "super-resolution evaluation grid points per axis, 0 disables [count]",
}


@dataclass(frozen=True)
class ExperimentConfig:
    pde: str = "advection"
    n_train: int = 300
    n_test: int = 100
    resolution: int = 40
    data_seed: int = 0
    seed: int = 0
    s_init: int = 100
    s_sdd: int = 0
    init_steps: int = 150
    init_lr: float = 1e-3
    hyper_lr: float = 2e-2
    init_noise: float = 1e-2
    kernel: str = "matern52"
    solver: str = "sdd"
    batch: int = 20
    lr: float = 1.0
    momentum: float = 0.9
    averaging: float = 0.9
    epochs: int = 400
    width: int = 16
    layers: int = 2
    basis: str = "db4"
    levels: int = 3
    d_lat: int = 8
    samples: int = 200
    level: float = 0.95
    superres: int = 0

    def __post_init__(self):
        def need(cond, msg):
            if not cond:
                raise ValidationError(f"config: {msg}")

        need(self.pde in PDES, f"pde must be one of {PDES}")
        need(self.n_train >= 1 and self.n_test >= 0, "n_train >= 1 and n_test >= 0")
        need(self.resolution >= 4, "resolution >= 4")
        need(1 <= self.s_init <= self.n_train, "1 <= s_init <= n_train")
        need(0 <= self.s_sdd <= self.n_train, "0 <= s_sdd <= n_train")
        need(self.init_steps >= 0, "init_steps >= 0")
        need(self.init_lr > 0 and self.hyper_lr > 0 and self.init_noise > 0,
             "init_lr, hyper_lr and init_noise must be > 0")
        need(self.kernel in KINDS, f"kernel must be one of {KINDS}")
        need(self.solver in ("sdd", "cholesky", "auto"), "solver must be sdd, cholesky or auto")
        need(1 <= self.batch <= self.n_sdd, "1 <= batch <= number of SDD samples")
        need(self.lr > 0, "lr > 0")
        need(0 <= self.momentum < 1, "momentum in [0, 1)")
        need(0 < self.averaging <= 1, "averaging in (0, 1]")
        need(self.epochs >= 0, "epochs >= 0")
        need(min(self.width, self.layers, self.levels, self.d_lat) >= 1,
             "width, layers, levels, d_lat >= 1")
        need(self.basis in BASES, f"basis must be one of {tuple(BASES)}")
        need(self.samples >= 0, "samples >= 0")
        need(0 < self.level < 1, "level in (0, 1)")
        need(self.superres == 0 or self.superres >= self.resolution, "superres is 0 or >= resolution")

    @property
    def n_sdd(self):
        return self.s_sdd or self.n_train

    @property
    def ndim(self):
        return 2 if self.pde == "darcy" else 1

    @property
    def use_cholesky(self):
        return self.solver == "cholesky" or (self.solver == "auto" and self.s_init == self.n_train)

    def replace(self, **kw):
        d = asdict(self)
        d.update(kw)
        return ExperimentConfig(**d)

    def to_dict(self):
        return asdict(self)


# Table 2 batch sizes, averaging and epochs. Sample counts, resolutions and
# level counts are scaled to desk size; step sizes are 10x the tabulated ones
# under the trace normalization of the SDD step.
PRESETS = {
    "burgers": dict(pde="burgers", n_train=300, n_test=100, resolution=128, batch=32, levels=4,
                    lr=1.0, averaging=0.9, epochs=450, basis="db6", s_init=100),
    "advection": dict(pde="advection", n_train=300, n_test=100, resolution=40, batch=20, levels=3,
                      lr=1.0, averaging=0.9, epochs=400, basis="db4", s_init=100),
    "darcy": dict(pde="darcy", n_train=300, n_test=100, resolution=29, batch=16, levels=2,
                  lr=0.1, averaging=0.8, epochs=300, basis="haar", s_init=100, superres=58),
}

_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _cast(key, raw):
    t = _TYPES[key]
    t = {"int": int, "float": float, "str": str}.get(t, t) if isinstance(t, str) else t
    try:
        if t is int:
            return int(raw)
        if t is float:
            return float(raw)
        return str(raw)
    except ValueError:
        raise ValidationError(f"config: {key} expects {t.__name__}, got {raw!r}") from None


def from_mapping(mapping, base=None):
    unknown = sorted(set(mapping) - set(_TYPES))
    if unknown:
        raise ValidationError(f"config: unknown keys {unknown}; valid keys are {sorted(_TYPES)}")
    values = dict(base or {})
    pde = mapping.get("pde", values.get("pde"))
    if pde is not None and str(pde) in PRESETS:
        values = {**PRESETS[str(pde)], **values}
    values.update({k: _cast(k, v) for k, v in mapping.items()})
    return ExperimentConfig(**values)


def load(path, **overrides):
    return from_mapping({**kvtext.read(path), **{k: v for k, v in overrides.items() if v is not None}})


def preset(pde, **overrides):
    if pde not in PRESETS:
        raise ValidationError(f"no preset for {pde!r}")
    return from_mapping({k: str(v) for k, v in overrides.items()}, PRESETS[pde])


def dump(config):
    lines = ["# GPO experiment configuration (flat key = value; unknown keys are rejected)"]
    for k, v in config.to_dict().items():
        lines.append(f"{k} = {kvtext.format_value(v)}  # {SCHEMA[k]}")
    return "\n".join(lines) + "\n"
