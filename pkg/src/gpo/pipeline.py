"""End-to-end training, evaluation and sweeps built from the library pieces."""

import time
from dataclasses import dataclass, field

import numpy as np

from .data import make_dataset
from .data.grid import cell_volume
from .errors import GpoError, ValidationError
from .exact_gp import InitConfig, cholesky_solve_oracle, init_train
from .kernel import build_latent_cache, full_gram
from .posterior import (GpoModel, TargetTransform, band_halfwidth, confidence_band, coverage,
                        pathwise_sample, predict_mean)
from .sdd import SddConfig, sdd_solve
from .wno import FeatureMap, WnoConfig, init_params


def wno_config(cfg, in_channels=1):
    return WnoConfig(width=cfg.width, layers=cfg.layers, basis=cfg.basis, levels=cfg.levels,
                     d_lat=cfg.d_lat, ndim=cfg.ndim, in_channels=in_channels,
                     resolution=cfg.resolution)


def sdd_config(cfg, n):
    return SddConfig.from_epochs(cfg.epochs, n, cfg.batch, beta=cfg.lr, rho=cfg.momentum,
                                 r=cfg.averaging, seed=cfg.seed)


def relative_l2(pred, truth, weights=1.0):
    """Per-sample ||pred - truth|| / ||truth|| with quadrature weights."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ValidationError(f"prediction shape {pred.shape} != truth shape {truth.shape}")
    axes = tuple(range(1, truth.ndim))
    num = np.sqrt(np.sum(weights * (pred - truth) ** 2, axis=axes))
    den = np.sqrt(np.sum(weights * truth ** 2, axis=axes))
    return num / np.where(den > 0, den, np.finfo(float).tiny)


@dataclass
class TrainResult:
    model: GpoModel
    trace: list = field(default_factory=list)  # (step, primal_loss, grad_norm, wall_ms)
    init_rows: int = 0
    seconds: float = 0.0


def _phase(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except GpoError as exc:
        exc.args = (f"[{name}] {exc.args[0] if exc.args else ''}",) + exc.args[1:]
        raise


def train(dataset, cfg, log=None, init_result=None):
    """Two-phase training: exact-GP initialization on ``s_init`` rows, then SDD.

    ``init_result`` lets sweeps reuse one initialization across SDD sizes.
    """
    t0 = time.perf_counter()
    log = log or (lambda msg: None)
    X = dataset.inputs
    transform = TargetTransform.fit(dataset.targets[: cfg.n_sdd])
    U_all = transform.forward(dataset.targets)
    wcfg = wno_config(cfg, X.shape[1])
    mu, sd = FeatureMap.input_stats(X)
    fm = FeatureMap(wcfg, init_params(wcfg, cfg.seed), dataset.extents, dataset.boundary, mu, sd)
    if init_result is None:
        icfg = InitConfig(steps=cfg.init_steps, lr=cfg.init_lr, hyper_lr=cfg.hyper_lr,
                          seed=cfg.seed, kind=cfg.kernel, init_noise=cfg.init_noise)
        init_result = _phase("init", init_train, fm, X, U_all, cfg.s_init, icfg)
        log(f"init: NLL {init_result.trace[0][1]:.4g} -> {init_result.trace[-1][1]:.4g}, "
            f"hyper l={init_result.hyper.lengthscale:.4g} s2={init_result.hyper.variance:.4g} "
            f"noise={init_result.hyper.noise:.4g}")
    fm = fm.with_params(init_result.params)
    hyper = init_result.hyper
    n = cfg.n_sdd
    Xs, U = X[:n], U_all[:n]
    cache = build_latent_cache(Xs, fm, dataset.digest())
    trace = [(-len(init_result.trace) + i, v, g, w) for i, (_, v, g, w) in enumerate(init_result.trace)]
    scfg = sdd_config(cfg, n)
    if cfg.use_cholesky:
        A = cholesky_solve_oracle(full_gram(cache, hyper), hyper.noise, U)
    else:
        A, state = _phase("sdd", sdd_solve, cache, U, hyper.noise, scfg, hyper)
        trace += state.trace
    model = GpoModel(fm, hyper, cache, A, U.copy(), transform, dataset.targets.shape[1:], scfg,
                     dict(config=cfg.to_dict(), dataset=dataset.digest()))
    return TrainResult(model, trace, len(init_result.trace), time.perf_counter() - t0)


@dataclass
class EvalReport:
    rel_l2: np.ndarray
    coverage: float = float("nan")
    superres_rel_l2: np.ndarray = None
    mean: np.ndarray = None
    lower: np.ndarray = None
    upper: np.ndarray = None
    seconds: float = 0.0

    @property
    def summary(self):
        out = dict(rel_l2_mean=float(np.mean(self.rel_l2)), rel_l2_std=float(np.std(self.rel_l2)),
                   coverage=self.coverage)
        if self.superres_rel_l2 is not None:
            out.update(superres_rel_l2_mean=float(np.mean(self.superres_rel_l2)),
                       superres_rel_l2_std=float(np.std(self.superres_rel_l2)))
        return out


def evaluate(model, test, samples=0, level=0.95, superres_test=None, seed=0, solver="sdd"):
    """Relative L2 on ``test``, optional band coverage and super-resolution pass."""
    t0 = time.perf_counter()
    w = cell_volume(test.shape, test.extents)
    mean = predict_mean(model, test.inputs)
    rep = EvalReport(relative_l2(mean, test.targets, w), mean=mean)
    if samples:
        band_halfwidth(level)
        ss = pathwise_sample(model, test.inputs, samples, seed=seed, solver=solver, level=level)
        rep.lower, rep.upper = confidence_band(ss, level)
        rep.coverage = coverage(test.targets, rep.lower, rep.upper)
    if superres_test is not None:
        ws = cell_volume(superres_test.shape, superres_test.extents)
        sr = predict_mean(model, superres_test.inputs)
        rep.superres_rel_l2 = relative_l2(sr, superres_test.targets, ws)
    rep.seconds = time.perf_counter() - t0
    return rep


def datasets_for(cfg):
    train_ds = make_dataset(cfg.pde, cfg.n_train, cfg.resolution, cfg.data_seed, "train")
    test_ds = make_dataset(cfg.pde, cfg.n_test, cfg.resolution, cfg.data_seed, "test")
    return train_ds, test_ds


def sweep(cfg, axis, values, seeds=(0, 1, 2), train_ds=None, test_ds=None, log=None):
    """Rows (axis_value, seed, rel_l2) over every (value, seed) cell.

    For the ``s_sdd`` axis each seed's initialization is computed once and
    shared across values, so the axis isolates the SDD sample count.
    """
    if axis not in ("s_init", "s_sdd"):
        raise ValidationError("sweep axis must be s_init or s_sdd")
    if not values:
        raise ValidationError("sweep needs at least one value")
    if train_ds is None or test_ds is None:
        train_ds, test_ds = datasets_for(cfg)
    rows = []
    for seed in seeds:
        shared = None
        for v in values:
            c = cfg.replace(seed=seed, **{axis: int(v)})
            res = train(train_ds, c, log, init_result=shared if axis == "s_sdd" else None)
            if axis == "s_sdd" and shared is None:
                shared = _init_of(res)
            rep = evaluate(res.model, test_ds)
            rows.append((int(v), seed, float(np.mean(rep.rel_l2))))
            if log:
                log(f"sweep {axis}={v} seed={seed}: rel_l2={rows[-1][2]:.4%}")
    return rows


def _init_of(res):
    from .exact_gp import InitResult

    m = res.model
    init_trace = [row[:1] + row[1:] for row in res.trace[: res.init_rows]]
    return InitResult(dict(m.feature_map.params), m.hyper, np.array([]), init_trace)


def sweep_summary(rows):
    """Median and spread per axis value plus the least-squares slope against log2(value)."""
    values = sorted({r[0] for r in rows})
    med = np.array([np.median([r[2] for r in rows if r[0] == v]) for v in values])
    lo = np.array([np.min([r[2] for r in rows if r[0] == v]) for v in values])
    hi = np.array([np.max([r[2] for r in rows if r[0] == v]) for v in values])
    slope = float(np.polyfit(np.log2(values), med, 1)[0]) if len(values) > 1 else 0.0
    return dict(values=values, median=med, low=lo, high=hi, slope=slope)
