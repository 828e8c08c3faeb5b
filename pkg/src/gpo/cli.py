"""``gpo generate|train|evaluate|sample|sweep``.

Exit codes: 0 success, 2 validation, 3 numerical failure, 4 IO.
Every command writes the effective configuration to ``<out>/config.txt``.
"""

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import config as C
from .data import make_dataset
from .data.datasets import ingest_dataset, write_dataset
from .data.grid import axis_coords
from .errors import ContainerError, GpoError, ValidationError
from .io import archive, container
from .pipeline import evaluate, sweep, sweep_summary, train
from .posterior import confidence_band, pathwise_sample


def _config(args):
    over = {}
    if getattr(args, "seed", None) is not None:
        over["seed"] = str(args.seed)
    for key in ("samples", "level", "superres"):
        v = getattr(args, key, None)
        if v is not None:
            over[key] = str(v)
    if args.config:
        return C.load(args.config, **over)
    if getattr(args, "pde", None):
        return C.preset(args.pde, **over)
    raise ValidationError("either --config or --pde is required")


def _out(args):
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ContainerError(f"cannot create output directory: {exc.strerror}", out) from exc
    return out


def _echo(out, cfg):
    (out / "config.txt").write_text(C.dump(cfg))


def _log(msg):
    print(msg, file=sys.stderr)


def _write_csv(path, header, rows, comments=()):
    with open(path, "w", newline="") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


def cmd_generate(args):
    cfg = _config(args)
    out = _out(args)
    _echo(out, cfg)
    extra = {f"config.{k}": v for k, v in cfg.to_dict().items()}
    for split, n, res in (("train", cfg.n_train, cfg.resolution), ("test", cfg.n_test, cfg.resolution)):
        ds = make_dataset(cfg.pde, n, res, cfg.data_seed, split)
        paths = write_dataset(ds, out / split, extra)
        _log(f"wrote {paths[0]} dims {list(ds.inputs.shape)}")
    if cfg.superres:
        ds = make_dataset(cfg.pde, cfg.n_test, cfg.superres, cfg.data_seed, "test")
        paths = write_dataset(ds, out / f"test_{cfg.superres}", extra)
        _log(f"wrote {paths[0]} dims {list(ds.inputs.shape)}")
    return 0


def cmd_train(args):
    cfg = _config(args)
    out = _out(args)
    _echo(out, cfg)
    train_ds = ingest_dataset(Path(args.data) / "train") if args.data else \
        make_dataset(cfg.pde, cfg.n_train, cfg.resolution, cfg.data_seed, "train")
    if len(train_ds) < cfg.n_train:
        raise ValidationError(f"dataset has {len(train_ds)} samples, config asks for {cfg.n_train}")
    train_ds = train_ds.subset(np.arange(cfg.n_train))
    res = train(train_ds, cfg, _log)
    archive.save_model(res.model, out / "model", probe=train_ds.inputs[:1])
    _write_csv(out / "trace.csv", ["step", "primal_loss", "grad_norm", "wall_ms"],
               [(s, "" if not np.isfinite(v) else repr(float(v)), repr(float(g)), f"{w:.3f}")
                for s, v, g, w in res.trace],
               [f"init rows (step < 0) carry the exact-GP NLL in primal_loss; {res.init_rows} rows",
                "SDD rows carry the monitored primal loss at epoch boundaries"])
    from .plots import trace_plot

    trace_plot(out / "trace.svg", res.trace)
    _log(f"trained in {res.seconds:.1f} s; archive at {out / 'model'}")
    return 0


def _model_config(model):
    raw = model.provenance.get("config", {})
    return C.from_mapping({k: str(v) for k, v in raw.items()}) if raw else None


def cmd_evaluate(args):
    model = archive.load_model(Path(args.model))
    cfg = _config(args) if (args.config or getattr(args, "pde", None)) else _model_config(model)
    if cfg is None:
        raise ValidationError("model archive carries no config; pass --config")
    over = {k: getattr(args, k) for k in ("samples", "level", "superres") if getattr(args, k) is not None}
    cfg = cfg.replace(**over)
    out = _out(args)
    _echo(out, cfg)
    test = ingest_dataset(args.data) if args.data else \
        make_dataset(cfg.pde, cfg.n_test, cfg.resolution, cfg.data_seed, "test")
    sr = None
    if cfg.superres:
        sr = make_dataset(cfg.pde, len(test), cfg.superres, cfg.data_seed, "test")
    rep = evaluate(model, test, cfg.samples, cfg.level, sr, seed=cfg.seed)
    rows = [(i, repr(float(e)), "" if sr is None else repr(float(rep.superres_rel_l2[i])))
            for i, e in enumerate(rep.rel_l2)]
    s = rep.summary
    comments = ["rel_l2 = ||u_hat - u|| / ||u|| with grid quadrature weights",
                "aggregate +/- is the standard deviation of per-sample rel_l2 over the test set",
                f"rel_l2 = {100 * s['rel_l2_mean']:.3f} +/- {100 * s['rel_l2_std']:.3f} %",
                f"coverage@{cfg.level} = {s['coverage']:.4f}"]
    if sr is not None:
        comments.append(f"superres {cfg.superres}: rel_l2 = {100 * s['superres_rel_l2_mean']:.3f} "
                        f"+/- {100 * s['superres_rel_l2_std']:.3f} %")
    _write_csv(out / "report.csv", ["sample", "rel_l2", "superres_rel_l2"], rows, comments)
    (out / "summary.txt").write_text("\n".join(f"{k} = {v!r}" for k, v in s.items()) + "\n")
    _plots(out, test, rep)
    print("\n".join(comments[2:]))
    return 0


def _plots(out, test, rep, count=3):
    from .plots import overlay_1d, overlay_2d

    for i in range(min(count, len(test))):
        lo = None if rep.lower is None else rep.lower[i, 0]
        hi = None if rep.upper is None else rep.upper[i, 0]
        if test.ndim == 1:
            x = axis_coords(test.shape[0], test.extents[0], test.boundary)
            overlay_1d(out / f"overlay_{i}.svg", x, test.targets[i, 0], rep.mean[i, 0], lo, hi,
                       f"test sample {i}: rel L2 {100 * rep.rel_l2[i]:.2f}%")
        else:
            std = None if lo is None else (hi - lo) / 3.92
            overlay_2d(out / f"overlay_{i}.svg", test.targets[i, 0], rep.mean[i, 0], std,
                       f"test sample {i}: rel L2 {100 * rep.rel_l2[i]:.2f}%")


def cmd_sample(args):
    model = archive.load_model(Path(args.model))
    cfg = _model_config(model)
    out = _out(args)
    if cfg is not None:
        _echo(out, cfg)
    if args.data:
        test = ingest_dataset(args.data)
    elif cfg is not None:
        test = make_dataset(cfg.pde, cfg.n_test, cfg.resolution, cfg.data_seed, "test")
    else:
        raise ValidationError("--data is required for archives without a config")
    n = args.count or len(test)
    x = test.inputs[:n]
    ss = pathwise_sample(model, x, args.samples, seed=args.seed or 0, keep_samples=args.keep)
    container.write(out / "mean.gpot", ss.mean)
    container.write(out / "std.gpot", ss.std)
    if args.keep:
        container.write(out / "samples.gpot", ss.samples)
    if ss.n_samples >= 30:
        lo, hi = confidence_band(ss, args.level)
        container.write(out / "lower.gpot", lo)
        container.write(out / "upper.gpot", hi)
    _log(f"drew {args.samples} pathwise samples at {n} inputs")
    return 0


def cmd_sweep(args):
    cfg = _config(args)
    out = _out(args)
    _echo(out, cfg)
    values = [int(v) for v in args.values.split(",") if v.strip()]
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    if len(seeds) < 1:
        raise ValidationError("at least one seed is required")
    rows = sweep(cfg, args.axis, values, seeds, log=_log)
    _write_csv(out / "sweep.csv", ["axis_value", "seed", "rel_l2"],
               [(v, s, repr(e)) for v, s, e in rows], [f"axis = {args.axis}"])
    summ = sweep_summary(rows)
    from .plots import sweep_plot

    sweep_plot(out / "sweep.svg", args.axis, summ)
    for v, m in zip(summ["values"], summ["median"]):
        print(f"{args.axis}={v}: median rel_l2 {100 * m:.3f}%")
    print(f"slope per doubling: {summ['slope']:.5f}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="gpo", description="Gaussian process operator with a "
                                "wavelet-neural-operator kernel, trained by stochastic dual descent.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", help="flat key = value experiment config")
            sp.add_argument("--pde", choices=sorted(C.PRESETS), help="use a built-in preset")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--out", required=True, help="output directory")

    g = sub.add_parser("generate", help="generate train/test datasets")
    common(g)
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="exact-GP init, then SDD; writes a model archive")
    common(t)
    t.add_argument("--data", help="directory written by 'generate' (default: generate in memory)")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="relative L2, band coverage, super-resolution")
    common(e)
    e.add_argument("--model", required=True, help="model archive directory")
    e.add_argument("--data", help="test dataset prefix, e.g. DIR/test")
    e.add_argument("--samples", type=int, help="pathwise samples for bands (0 disables)")
    e.add_argument("--level", type=float, help="band level, default 0.95")
    e.add_argument("--superres", type=int, help="super-resolution grid points per axis")
    e.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("sample", help="pathwise posterior samples at test inputs")
    common(s, config=False)
    s.add_argument("--model", required=True)
    s.add_argument("--data", help="test dataset prefix")
    s.add_argument("--samples", type=int, default=200)
    s.add_argument("--count", type=int, default=0, help="number of test inputs (0 = all)")
    s.add_argument("--level", type=float, default=0.95)
    s.add_argument("--keep", action="store_true", help="also write every sample")
    s.set_defaults(func=cmd_sample)

    w = sub.add_parser("sweep", help="error vs s_init or s_sdd over seeds")
    common(w)
    w.add_argument("--axis", required=True, choices=("s_init", "s_sdd"))
    w.add_argument("--values", required=True, help="comma-separated axis values")
    w.add_argument("--seeds", default="0,1,2", help="comma-separated seeds")
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GpoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ContainerError.exit_code


if __name__ == "__main__":
    sys.exit(main())
