import csv

import numpy as np
import pytest

from gpo import config as C
from gpo.cli import main
from gpo.data import make_dataset
from gpo.data.datasets import ingest_dataset
from gpo.errors import ValidationError
from gpo.exact_gp import ExactPosterior
from gpo.io import archive, container
from gpo.kernel import full_gram
from gpo.pipeline import evaluate, relative_l2, sweep, sweep_summary, train
from gpo.posterior import predict_mean

SMALL = dict(n_train=24, n_test=6, s_init=8, batch=4, epochs=5, width=4, d_lat=2, init_steps=3,
             samples=0)


def _cfg_file(tmp_path, pde="advection", **kw):
    d = dict(SMALL, pde=pde)
    d.update(kw)
    p = tmp_path / "cfg.txt"
    p.write_text("".join(f"{k} = {v}\n" for k, v in d.items()))
    return p


def _rows(path):
    with open(path) as fh:
        return list(csv.reader(line for line in fh if not line.startswith("#")))


def test_relative_l2_examples():
    u = np.random.default_rng(0).standard_normal((3, 1, 8))
    assert np.array_equal(relative_l2(u, u), np.zeros(3))
    assert np.allclose(relative_l2(np.zeros_like(u), u), 1.0)
    with pytest.raises(ValidationError):
        relative_l2(u, u[:2])


def test_generate_shapes_and_determinism(tmp_path, capsys):
    cfg = _cfg_file(tmp_path, "burgers", n_train=4, n_test=2, s_init=2, batch=2, resolution=32)
    assert main(["generate", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["generate", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
    x = container.read(tmp_path / "a" / "train_inputs.gpot")
    assert list(x.shape) == [4, 1, 32]
    for name in ("train_inputs", "train_targets", "test_inputs"):
        assert container.crc_of(tmp_path / "a" / f"{name}.gpot") == \
            container.crc_of(tmp_path / "b" / f"{name}.gpot")
    assert (tmp_path / "a" / "config.txt").exists()
    assert (tmp_path / "a" / "train.meta.txt").exists()
    assert len(ingest_dataset(tmp_path / "a" / "train")) == 4


def test_corrupted_container_exit_code(tmp_path, capsys):
    cfg = _cfg_file(tmp_path)
    main(["generate", "--config", str(cfg), "--out", str(tmp_path / "d")])
    p = tmp_path / "d" / "train_targets.gpot"
    buf = bytearray(p.read_bytes())
    buf[40] ^= 0x55
    p.write_bytes(bytes(buf))
    code = main(["train", "--config", str(cfg), "--data", str(tmp_path / "d"), "--out", str(tmp_path / "m")])
    err = capsys.readouterr().err
    assert code == 4
    assert "CRC" in err and "train_targets.gpot" in err


def test_validation_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.txt"
    p.write_text("pde = advection\nlearning_rate = 0.1\n")
    assert main(["generate", "--config", str(p), "--out", str(tmp_path / "o")]) == 2
    assert "unknown keys" in capsys.readouterr().err
    assert main(["generate", "--out", str(tmp_path / "o")]) == 2


def test_numerical_failure_exit_code(tmp_path, capsys):
    cfg = _cfg_file(tmp_path, lr=1e6, momentum=0.0, epochs=50)
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "m")]) == 3
    assert "[sdd]" in capsys.readouterr().err


def test_train_evaluate_sample_round_trip(tmp_path, capsys):
    cfg = _cfg_file(tmp_path)
    out = tmp_path / "run"
    assert main(["train", "--config", str(cfg), "--out", str(out)]) == 0
    rows = _rows(out / "trace.csv")
    assert rows[0] == ["step", "primal_loss", "grad_norm", "wall_ms"]
    c = C.load(cfg)
    T = c.epochs * -(-c.n_train // c.batch)
    assert len(rows) - 1 == T + c.init_steps + 1
    assert (out / "trace.svg").exists() and (out / "config.txt").exists()
    model = archive.load_model(out / "model")
    assert model.provenance["config"]["pde"] == "advection"

    ev = tmp_path / "eval"
    assert main(["evaluate", "--model", str(out / "model"), "--samples", "40", "--out", str(ev)]) == 0
    rep = _rows(ev / "report.csv")
    assert rep[0] == ["sample", "rel_l2", "superres_rel_l2"] and len(rep) == 1 + c.n_test
    assert "coverage" in (ev / "summary.txt").read_text()
    assert (ev / "overlay_0.svg").exists()

    sm = tmp_path / "samples"
    assert main(["sample", "--model", str(out / "model"), "--samples", "30", "--count", "2", "--keep",
                 "--out", str(sm)]) == 0
    assert container.read(sm / "samples.gpot").shape == (30, 2, 1, 40)
    assert container.read(sm / "lower.gpot").shape == (2, 1, 40)


def test_cholesky_mode_matches_exact_oracle_bitwise(tmp_path):
    cfg = C.from_mapping({k: str(v) for k, v in dict(SMALL, pde="advection", s_init=24, solver="auto").items()})
    ds = make_dataset("advection", cfg.n_train, cfg.resolution, cfg.data_seed, "train")
    res = train(ds, cfg)
    m = res.model
    assert len(res.trace) == res.init_rows
    K = full_gram(m.cache, m.hyper)
    test = make_dataset("advection", 4, cfg.resolution, 0, "test")
    Ks = m.cross_gram(test.inputs)
    post = ExactPosterior.fit(K, m.hyper.noise, m.U)
    oracle = m.to_output(post.mean(Ks), test.shape)
    assert np.array_equal(predict_mean(m, test.inputs), oracle)
    archive.save_model(m, tmp_path / "m", probe=test.inputs[:2])
    again = archive.load_model(tmp_path / "m")
    assert np.array_equal(predict_mean(again, test.inputs), oracle)


def test_archive_detects_tampering(tmp_path):
    cfg = C.from_mapping({k: str(v) for k, v in dict(SMALL, pde="advection").items()})
    ds = make_dataset("advection", cfg.n_train, cfg.resolution, 0, "train")
    m = train(ds, cfg).model
    archive.save_model(m, tmp_path / "m", probe=ds.inputs[:1])
    w = container.read(tmp_path / "m" / "weights.gpot").copy()
    w[0, 0] += 1.0
    container.write(tmp_path / "m" / "weights.gpot", w)
    with pytest.raises(ValidationError, match="bit for bit"):
        archive.load_model(tmp_path / "m")
    p = container.read(tmp_path / "m" / "wno.proj.b.gpot") + 1.0
    container.write(tmp_path / "m" / "wno.proj.b.gpot", p)
    with pytest.raises(ValidationError, match="latent cache"):
        archive.load_model(tmp_path / "m")


def test_burgers_smoke_primal_loss_decreases():
    cfg = C.from_mapping({k: str(v) for k, v in dict(SMALL, pde="burgers", n_train=64, s_init=16, batch=8,
                                                        epochs=20, resolution=64, levels=3).items()})
    ds = make_dataset("burgers", 64, 64, 0, "train")
    res = train(ds, cfg)
    losses = [r[1] for r in res.trace if r[0] > 0 and np.isfinite(r[1])]
    assert losses[-1] < losses[0]


def test_superres_evaluation_and_report(tmp_path):
    cfg = C.from_mapping({k: str(v) for k, v in dict(SMALL, pde="burgers", resolution=32, levels=3).items()})
    ds = make_dataset("burgers", cfg.n_train, 32, 0, "train")
    m = train(ds, cfg).model
    test = make_dataset("burgers", 3, 32, 0, "test")
    fine = make_dataset("burgers", 3, 64, 0, "test")
    rep = evaluate(m, test, superres_test=fine)
    assert rep.superres_rel_l2.shape == (3,)
    assert set(rep.summary) >= {"rel_l2_mean", "rel_l2_std", "superres_rel_l2_mean"}
    with pytest.raises(Exception):
        evaluate(m, make_dataset("burgers", 2, 48, 0, "test"))


def test_sweep_single_value_and_schema(tmp_path, capsys):
    cfg = _cfg_file(tmp_path)
    out = tmp_path / "sw"
    assert main(["sweep", "--config", str(cfg), "--axis", "s_sdd", "--values", "16", "--seeds", "0",
                 "--out", str(out)]) == 0
    rows = _rows(out / "sweep.csv")
    assert rows[0] == ["axis_value", "seed", "rel_l2"] and len(rows) == 2
    assert (out / "sweep.svg").exists()
    c = C.load(cfg).replace(s_sdd=16)
    ds = make_dataset("advection", c.n_train, c.resolution, c.data_seed, "train")
    te = make_dataset("advection", c.n_test, c.resolution, c.data_seed, "test")
    one = float(np.mean(evaluate(train(ds, c).model, te).rel_l2))
    assert float(rows[1][2]) == one


def test_sweep_summary_slope():
    rows = [(v, s, 1.0 / v) for v in (1, 2, 4) for s in range(3)]
    summ = sweep_summary(rows)
    assert summ["values"] == [1, 2, 4] and np.allclose(summ["median"], [1, 0.5, 0.25])
    assert summ["slope"] < 0
    with pytest.raises(ValidationError):
        sweep(C.preset("advection"), "epochs", [1])
