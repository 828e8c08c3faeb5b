import numpy as np
import pytest
from scipy import stats

from gpo.data import make_dataset
from gpo.data.advection import PARAM_BOX, advection_ic, advection_solve, draw_params
from gpo.data.burgers import burgers_solve
from gpo.data.darcy import HIGH, LOW, darcy_permeability_sample, darcy_solve
from gpo.data.datasets import ingest_dataset, write_dataset
from gpo.data.grf import BURGERS_GRF, DARCY_GRF, draw_coefficients, evaluate, grf_sample
from gpo.data.grid import GridFunction, resample
from gpo.errors import CflError, ShapeError, ValidationError


# ---------------------------------------------------------------------------
# random fields


def test_grf_eigenvalue_at_zero():
    assert BURGERS_GRF.eigenvalue(0) == 1.0


def _point_draws(n=10000):
    rng = np.random.default_rng(0)
    x = np.array([0.37])
    from gpo.data.grf import _basis_matrix

    B = _basis_matrix(x, BURGERS_GRF.n_modes)
    return np.array([(B @ draw_coefficients(BURGERS_GRF, rng))[0] for _ in range(n)])


def test_grf_pointwise_mean_and_variance():
    v = _point_draws()
    se = v.std() / np.sqrt(len(v))
    assert abs(v.mean()) < 3 * se
    assert abs(v.var() / BURGERS_GRF.pointwise_variance() - 1) < 0.05


def test_grf_same_function_at_every_resolution():
    a, b = grf_sample(64, seed=3), grf_sample(128, seed=3)
    assert np.allclose(a.values, b.values[:, ::2], atol=1e-12)
    assert np.array_equal(grf_sample(64, seed=3).values, a.values)


# ---------------------------------------------------------------------------
# Burgers


def _u0(n, seed=0):
    c = draw_coefficients(BURGERS_GRF, np.random.default_rng(seed))
    return evaluate(BURGERS_GRF, c, (n,))


def test_burgers_conserves_mean():
    u0 = _u0(256)
    u1 = burgers_solve(u0)
    assert abs(u1.mean() - u0.mean()) < 1e-8


def test_burgers_large_viscosity_decays_monotonically():
    u0 = _u0(128, 1)
    m = u0.mean()
    sups = [np.max(np.abs(u0 - m))]
    u = u0
    for _ in range(5):
        u = burgers_solve(u, nu=10.0, t_final=0.002)
        sups.append(np.max(np.abs(u - m)))
    assert np.all(np.diff(sups) < 0)
    assert sups[-1] < 0.5 * sups[0]


def test_burgers_self_convergence_512_vs_1024():
    c = draw_coefficients(BURGERS_GRF, np.random.default_rng(2))
    u5 = burgers_solve(evaluate(BURGERS_GRF, c, (512,)))
    u10 = burgers_solve(evaluate(BURGERS_GRF, c, (1024,)))
    assert np.linalg.norm(u10[::2] - u5) / np.linalg.norm(u5) < 1e-4


def test_burgers_spectral_convergence_faster_than_second_order():
    c = draw_coefficients(BURGERS_GRF, np.random.default_rng(4))
    ref = burgers_solve(evaluate(BURGERS_GRF, c, (1024,)))
    errs = []
    for n in (128, 256):
        u = burgers_solve(evaluate(BURGERS_GRF, c, (n,)))
        errs.append(np.linalg.norm(ref[:: 1024 // n] - u) / np.linalg.norm(u))
    assert errs[0] / errs[1] > 4.0


def test_burgers_errors():
    with pytest.raises(ValidationError):
        burgers_solve(_u0(64), nu=0.0)
    with pytest.raises(CflError) as info:
        burgers_solve(_u0(256), dt=0.05)
    assert info.value.suggested_dt > 0


def test_burgers_batched_equals_single():
    u0 = np.stack([_u0(64, s) for s in range(3)])
    batch = burgers_solve(u0)
    assert np.allclose(batch[1], burgers_solve(u0[1]), atol=1e-13)


# ---------------------------------------------------------------------------
# advection


def test_advection_ic_examples():
    c, w, h = 0.5, 0.4, 1.5
    x_c = advection_ic(c, w, h, 40).values[0, 20]  # x = 0.5
    assert np.isclose(x_c, 2 * h)
    assert advection_ic(c, w, h, 40).values[0, 0] == 0.0


def test_advection_solution_is_half_shift():
    for c, w, h in [(0.4, 0.35, 1.2), (0.65, 0.5, 1.9)]:
        u0 = advection_ic(c, w, h, 40).values
        assert np.array_equal(advection_solve(c, w, h, t_final=0.0).values, u0)
        u = advection_solve(c, w, h, 1.0, 0.5, 40).values
        assert np.allclose(u, np.roll(u0, 20, axis=-1), atol=1e-12)
        assert np.isclose(np.linalg.norm(u), np.linalg.norm(u0))


def test_advection_box_enforced():
    with pytest.raises(ValidationError, match="outside"):
        advection_ic(0.9, 0.4, 1.5, 40)
    with pytest.raises(ValidationError):
        advection_solve(0.5, 0.4, 2.5)


def test_advection_parameters_uniform():
    rng = np.random.default_rng(0)
    draws = np.array([draw_params(rng) for _ in range(4000)])
    for j, (lo, hi) in enumerate(PARAM_BOX):
        assert stats.kstest(draws[:, j], stats.uniform(lo, hi - lo).cdf).pvalue > 1e-3


# ---------------------------------------------------------------------------
# Darcy


def test_darcy_constant_permeability_symmetry():
    u = darcy_solve(np.ones((29, 29))).values[0]
    assert np.allclose(u, u.T, atol=1e-12)
    assert np.allclose(u, u[::-1, ::-1], atol=1e-12)
    assert np.unravel_index(np.argmax(u), u.shape) == (14, 14)


def test_darcy_scales_as_inverse_permeability():
    u1 = darcy_solve(np.ones((16, 16))).values
    u4 = darcy_solve(4.0 * np.ones((16, 16))).values
    assert np.allclose(u4, u1 / 4.0, rtol=1e-8, atol=0)


def test_darcy_maximum_principle_and_convergence():
    for seed in range(2):
        a29 = darcy_permeability_sample(29, seed)
        u29 = darcy_solve(a29).values[0]
        assert np.all(u29 >= 0)
        u116 = darcy_solve(darcy_permeability_sample(116, seed)).values[0]
        restricted = u116.reshape(29, 4, 29, 4).mean(axis=(1, 3))
        assert np.linalg.norm(restricted - u29) / np.linalg.norm(u29) < 2e-2


def test_darcy_second_order_on_smooth_permeability():
    def a_of(n):
        x = (np.arange(n) + 0.5) / n
        return 2.0 + np.sin(2 * np.pi * x)[:, None] * np.cos(2 * np.pi * x)[None, :]

    # with odd refinement ratios the coarse cell centres are fine cell centres
    ref = darcy_solve(a_of(243)).values[0]
    errs = []
    for n in (9, 27):
        r = 243 // n
        sub = ref[r // 2::r, r // 2::r]
        errs.append(np.linalg.norm(sub - darcy_solve(a_of(n)).values[0]) / np.linalg.norm(sub))
    order = np.log(errs[0] / errs[1]) / np.log(3)
    assert 1.7 < order < 2.3


def test_darcy_rejects_bad_permeability():
    a = np.ones((8, 8))
    a[3, 3] = 0.0
    with pytest.raises(ValidationError):
        darcy_solve(a)
    with pytest.raises(ValidationError):
        darcy_solve(np.ones(8))


def test_permeability_two_phase():
    a = darcy_permeability_sample(32, 5).values
    assert set(np.unique(a)) <= {HIGH, LOW} and len(np.unique(a)) == 2
    assert np.array_equal(a, darcy_permeability_sample(32, 5).values)
    frac = np.mean([np.mean(darcy_permeability_sample(24, s).values == HIGH) for s in range(400)])
    assert abs(frac - 0.5) < 0.05
    assert DARCY_GRF.drop_mean


# ---------------------------------------------------------------------------
# grids and datasets


def test_resample_round_trip_band_limited():
    x = np.arange(16) / 16
    f = np.sin(2 * np.pi * x) + 0.3 * np.cos(6 * np.pi * x)
    up = resample(f, (64,), "periodic")
    assert np.allclose(up, np.sin(2 * np.pi * np.arange(64) / 64) + 0.3 * np.cos(6 * np.pi * np.arange(64) / 64))
    assert np.allclose(resample(up, (16,), "periodic"), f)
    xc = (np.arange(8) + 0.5) / 8
    g = np.sin(np.pi * xc) + 0.2 * np.sin(3 * np.pi * xc)
    xf = (np.arange(32) + 0.5) / 32
    assert np.allclose(resample(g, (32,), "dirichlet"), np.sin(np.pi * xf) + 0.2 * np.sin(3 * np.pi * xf))


def test_grid_function_validation():
    with pytest.raises(ShapeError):
        GridFunction(np.zeros(8))
    with pytest.raises(ValidationError):
        GridFunction(np.full((1, 4), np.nan))
    g = GridFunction(np.ones((1, 4)))
    assert np.isclose(g.norm(), 1.0)


@pytest.mark.parametrize("pde,res", [("burgers", 32), ("advection", 40), ("darcy", 16)])
def test_make_dataset_deterministic(pde, res):
    a = make_dataset(pde, 3, res, 7)
    b = make_dataset(pde, 3, res, 7)
    assert a.digest() == b.digest()
    assert make_dataset(pde, 3, res, 8).digest() != a.digest()
    assert make_dataset(pde, 3, res, 7, "test").digest() != a.digest()
    assert len(make_dataset(pde, 0, res)) == 0
    # sample i does not depend on N
    assert np.array_equal(make_dataset(pde, 5, res, 7).inputs[:3], a.inputs)


def test_make_dataset_errors():
    with pytest.raises(ValidationError):
        make_dataset("navier-stokes", 2, 32)
    with pytest.raises(ValidationError):
        make_dataset("burgers", -1, 32)


def test_dataset_round_trip(tmp_path):
    ds = make_dataset("darcy", 3, 12, 1)
    write_dataset(ds, tmp_path / "d")
    back = ingest_dataset(tmp_path / "d")
    assert np.array_equal(back.inputs, ds.inputs) and np.array_equal(back.targets, ds.targets)
    assert back.digest() == ds.digest()
    assert back.boundary == "dirichlet" and back.extents == (1.0, 1.0)
