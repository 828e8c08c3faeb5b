import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gpo import tensor as T
from gpo.data.grf import grf_sample
from gpo.errors import ShapeError, ValidationError
from gpo.wavelet import dwt, idwt
from gpo.wno import FeatureMap, WnoConfig, init_params, levels_for, spectral_conv, wno_forward

from conftest import rel_err


def _eye_R(c, band):
    return np.einsum("io,...->io...", np.eye(c), np.ones(band))


@pytest.mark.parametrize("basis", ["haar", "db4", "db6"])
def test_spectral_conv_keeping_all_bands_is_identity(basis):
    v = np.random.default_rng(0).standard_normal((2, 3, 16))
    # levels = 1 with band = n keeps every coefficient
    out = spectral_conv(v, _eye_R(3, (16,)), basis, 1).value
    assert np.max(np.abs(out - v)) < 1e-12


def test_spectral_conv_zero_R_is_zero():
    v = np.random.default_rng(1).standard_normal((2, 3, 32))
    assert np.array_equal(spectral_conv(v, np.zeros((3, 4, 8)), "db4", 3).value, np.zeros((2, 4, 32)))


@pytest.mark.parametrize("ndim", [1, 2])
def test_spectral_conv_identity_R_is_lowpass_projection(ndim):
    L = 3
    n = 32 if ndim == 1 else 16
    rng = np.random.default_rng(2)
    v = rng.standard_normal((1, 2) + (n,) * ndim)
    band = (2 * n >> L,) * ndim
    out = spectral_conv(v, _eye_R(2, band), "db4", L, ndim).value
    # oracle: approximation at level L - 1 with every detail band removed
    c = dwt(v, "db4", L - 1, ndim)
    c.details = [tuple(np.zeros_like(d) for d in lvl) if ndim == 2 else np.zeros_like(lvl)
                 for lvl in c.details]
    assert np.max(np.abs(out - idwt(c, "db4"))) < 1e-12


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_spectral_conv_linear(a, b):
    rng = np.random.default_rng(3)
    x, y = rng.standard_normal((2, 1, 2, 16))
    R = rng.standard_normal((2, 2, 4))
    lhs = spectral_conv(a * x + b * y, R, "db4", 3).value
    rhs = a * spectral_conv(x, R, "db4", 3).value + b * spectral_conv(y, R, "db4", 3).value
    assert np.allclose(lhs, rhs, atol=1e-10)


def test_spectral_conv_shape_errors():
    with pytest.raises(ShapeError):
        spectral_conv(np.zeros((1, 2, 16)), np.zeros((3, 2, 4)), "db4", 3)
    with pytest.raises(ShapeError):
        spectral_conv(np.zeros((1, 2, 16)), np.zeros((2, 2, 3)), "db4", 3)


def _cfg(**kw):
    base = dict(width=8, layers=2, basis="db4", levels=3, d_lat=4, ndim=1, in_channels=1, resolution=32)
    base.update(kw)
    return WnoConfig(**base)


def test_zero_input_zero_bias_gives_zero_latent():
    cfg = _cfg(use_grid=False)
    p = init_params(cfg, 0)
    for k in p:
        if k.endswith(".b"):
            p[k] = np.zeros_like(p[k])
    out = wno_forward(np.zeros((2, 1, 32)), p, cfg).value
    assert np.array_equal(out, np.zeros((2, 4, 32)))


def test_constant_input_gives_constant_latent():
    cfg = _cfg(use_grid=False)
    p = init_params(cfg, 1)
    for j in range(cfg.layers):
        p[f"block{j}.R"] = np.broadcast_to(p[f"block{j}.R"][..., :1], p[f"block{j}.R"].shape).copy()
    out = wno_forward(np.full((1, 1, 32), 0.7), p, cfg).value
    assert np.max(np.abs(out - out[..., :1])) < 1e-12


def test_output_shape_and_determinism():
    cfg = _cfg()
    a, b = init_params(cfg, 5), init_params(cfg, 5)
    assert a.digest() == b.digest()
    assert init_params(cfg, 6).digest() != a.digest()
    x = np.random.default_rng(4).standard_normal((3, 1, 32))
    o1, o2 = wno_forward(x, a, cfg).value, wno_forward(x, b, cfg).value
    assert o1.shape == (3, 4, 32)
    assert np.array_equal(o1, o2)


def test_padding_for_indivisible_resolution():
    cfg = _cfg(ndim=2, resolution=29, levels=2)
    assert cfg.padded == 32 and cfg.pad == 3
    out = wno_forward(np.random.default_rng(0).standard_normal((2, 1, 29, 29)), init_params(cfg), cfg,
                      boundary="dirichlet").value
    assert out.shape == (2, 4, 29, 29)


def test_parameter_bytes_independent_of_resolution():
    cfg = _cfg()
    p = init_params(cfg, 0)
    assert p.nbytes() == init_params(cfg, 0).nbytes()
    # the same parameters run at 2x and 4x without any change
    for n in (64, 128):
        assert levels_for(cfg, n)[0] == cfg.levels + int(np.log2(n // 32))
        assert wno_forward(np.zeros((1, 1, n)), p, cfg).value.shape == (1, 4, n)


def test_non_power_of_two_ratio_rejected():
    cfg = _cfg()
    with pytest.raises(ShapeError, match="power-of-two"):
        wno_forward(np.zeros((1, 1, 48)), init_params(cfg), cfg)


def test_bad_config_rejected():
    with pytest.raises(ValidationError):
        _cfg(basis="sym4")
    with pytest.raises(ValidationError):
        _cfg(width=0)


@pytest.mark.parametrize("basis", ["haar", "db4", "db6"])
def test_resolution_transfer_1d(basis):
    cfg = _cfg(basis=basis, resolution=128, levels=4)
    p = init_params(cfg, 2)
    for j in range(cfg.layers):
        p[f"block{j}.R"] = np.random.default_rng(j).normal(0, 0.25, p[f"block{j}.R"].shape)
    g1 = np.stack([grf_sample(128, seed=s).values for s in range(4)])
    g2 = np.stack([grf_sample(256, seed=s).values for s in range(4)])
    o1 = wno_forward(g1, p, cfg).value
    o2 = wno_forward(g2, p, cfg).value[..., ::2]
    assert rel_err(o2, o1) < 0.1


def test_gradients_match_finite_differences():
    cfg = _cfg(width=4, d_lat=2, resolution=16, levels=2)
    p = init_params(cfg, 3)
    x = np.random.default_rng(5).standard_normal((2, 1, 16))
    w = np.random.default_rng(6).standard_normal((2, 2, 16))

    def loss(params):
        return float(np.sum(wno_forward(x, params, cfg).value * w))

    tape = T.Tape()
    pt = {k: tape.param(v, k) for k, v in p.items()}
    grads = tape.backward(T.sum(wno_forward(x, pt, cfg) * w))
    rng = np.random.default_rng(7)
    for k, v in p.items():
        for _ in range(3):
            i = tuple(rng.integers(0, s) for s in v.shape)
            q = p.copy()
            q[k][i] += 1e-6
            up = loss(q)
            q[k][i] -= 2e-6
            fd = (up - loss(q)) / 2e-6
            assert abs(grads[k][i] - fd) <= 1e-5 * max(1.0, abs(fd)), k


def test_feature_map_standardizes_and_chunks():
    cfg = _cfg()
    x = 3.0 + 2.0 * np.random.default_rng(8).standard_normal((10, 1, 32))
    mu, sd = FeatureMap.input_stats(x)
    fm = FeatureMap(cfg, init_params(cfg), (1.0,), "periodic", mu, sd, chunk=3)
    z = fm.standardize(x)
    assert abs(z.mean()) < 1e-12 and abs(z.std() - 1) < 1e-12
    full = wno_forward(z, fm.params, cfg).value
    assert np.allclose(fm.embed(x), full, atol=1e-13)
    assert fm.digest() == fm.with_params(fm.params.copy()).digest()
    q = fm.params.copy()
    q["proj.b"] = q["proj.b"] + 1.0
    assert fm.with_params(q).digest() != fm.digest()
