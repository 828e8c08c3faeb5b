import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gpo import tensor as T
from gpo.errors import NumericalError, ShapeError, ValidationError

from conftest import fd_grad, rel_err


def grad_of(fn, *values):
    tape = T.Tape()
    xs = [tape.param(v, f"x{i}") for i, v in enumerate(values)]
    out = fn(*xs)
    return out.value, tape.backward(out)


UNARY = {
    "exp": (T.exp, lambda x: x),
    "log": (T.log, lambda x: np.abs(x) + 0.5),
    "sqrt": (T.sqrt, lambda x: np.abs(x) + 0.5),
    "tanh": (T.tanh, lambda x: x),
    "gelu": (T.gelu, lambda x: x),
}


@pytest.mark.parametrize("name", sorted(UNARY))
def test_unary_gradients_match_finite_differences(name, rng):
    op, dom = UNARY[name]
    x = dom(rng.standard_normal((3, 4)))
    _, g = grad_of(lambda a: T.sum(op(a) * op(a)), x)
    fd = fd_grad(lambda v: float(np.sum(op(T.Tensor(v)).value ** 2)), x)
    assert rel_err(g["x0"], fd) < 1e-6


def test_binary_ops_with_broadcasting(rng):
    a = rng.standard_normal((3, 4))
    b = rng.standard_normal((4,)) + 3.0

    def f(x, y):
        return T.sum(T.div(T.mul(T.add(x, y), T.sub(x, y)), y))

    _, g = grad_of(f, a, b)
    fa = fd_grad(lambda v: float(f(T.Tensor(v), T.Tensor(b)).value), a)
    fb = fd_grad(lambda v: float(f(T.Tensor(a), T.Tensor(v)).value), b)
    assert rel_err(g["x0"], fa) < 1e-6
    assert rel_err(g["x1"], fb) < 1e-6
    assert g["x1"].shape == (4,)


def test_matmul_einsum_reshape_transpose(rng):
    a = rng.standard_normal((3, 5))
    b = rng.standard_normal((5, 2))

    def f(x, y):
        m = T.matmul(x, y)
        e = T.einsum("ij,jk->ik", x, y)
        r = T.transpose(T.reshape(m, (2, 3)), (1, 0))
        return T.sum(m * e) + T.sum(r * r)

    _, g = grad_of(f, a, b)
    assert rel_err(g["x0"], fd_grad(lambda v: float(f(T.Tensor(v), T.Tensor(b)).value), a)) < 1e-6
    assert rel_err(g["x1"], fd_grad(lambda v: float(f(T.Tensor(a), T.Tensor(v)).value), b)) < 1e-6


def test_getitem_concat_pad_crop(rng):
    a = rng.standard_normal((2, 3, 4))

    def f(x):
        y = T.concat([x, x[:, :1]], axis=1)
        z = T.crop(T.pad(y, [0, 0, 3]), (2, 4, 5))
        return T.sum(z * z * 0.5) + T.sum(T.getitem(x, (0, slice(None), 2)))

    _, g = grad_of(f, a)
    assert rel_err(g["x0"], fd_grad(lambda v: float(f(T.Tensor(v)).value), a)) < 1e-6


def test_sqrt_guard_has_zero_subgradient_at_zero():
    _, g = grad_of(lambda x: T.sum(T.sqrt(x)), np.array([0.0, 4.0]))
    assert g["x0"][0] == 0.0
    assert g["x0"][1] == pytest.approx(0.25)


def test_mean_and_sum_axes(rng):
    a = rng.standard_normal((3, 4))
    _, g = grad_of(lambda x: T.sum(T.mean(x, axis=0) * T.mean(x, axis=0)), a)
    fd = fd_grad(lambda v: float(np.sum(v.mean(axis=0) ** 2)), a)
    assert rel_err(g["x0"], fd) < 1e-6


@given(arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(1, 4)),
              elements=st.floats(-3, 3)))
def test_linearity_of_backward(x):
    # d/dx sum(c * x) == c for any shape
    _, g = grad_of(lambda a: T.sum(2.5 * a), x)
    assert np.allclose(g["x0"], 2.5)


def test_unused_leaf_gets_zero_gradient():
    tape = T.Tape()
    a = tape.param(np.ones(3), "a")
    tape.param(np.ones(2), "b")
    g = tape.backward(T.sum(a))
    assert np.array_equal(g["b"], np.zeros(2))


def test_backward_requires_scalar():
    tape = T.Tape()
    a = tape.param(np.ones(3), "a")
    with pytest.raises(ShapeError):
        tape.backward(a * 2.0)


def test_duplicate_param_name_rejected():
    tape = T.Tape()
    tape.param(1.0, "a")
    with pytest.raises(ValidationError):
        tape.param(2.0, "a")


def test_non_finite_result_raises():
    with pytest.raises(NumericalError):
        T.log(T.Tensor(np.array([-1.0])))


def test_shape_mismatch_raises():
    with pytest.raises(ShapeError):
        T.add(T.Tensor(np.ones(3)), T.Tensor(np.ones(4)))


def test_mixing_tapes_rejected():
    a = T.Tape().param(1.0, "a")
    b = T.Tape().param(1.0, "b")
    with pytest.raises(ValidationError):
        T.add(a, b)


def test_caller_arrays_stay_writeable():
    x = np.ones(3)
    T.Tensor(x)
    x[0] = 2.0
    assert x[0] == 2.0


def test_untracked_ops_do_not_record():
    out = T.exp(T.Tensor(np.zeros(2)))
    assert out.tape is None
