import numpy as np
import pytest

from oracles import convgru_scalar, convlstm_scalar, dilate_kernel
from tecforecast.autodiff import (DimensionError, Tensor, concat_channels, conv2d, finite_diff_grad, mul,
                                  relative_error, sigmoid, slice_channels, sum_all, tanh)
from tecforecast.cells import (GATE_ORDER, CellState, ConvGRUCell, ConvLSTMCell, convgru_step, convlstm_step,
                               init_state)


def lstm(cin=1, hidden=1, kernel=3, dilation=1, seed=0):
    return ConvLSTMCell(cin, hidden, kernel, dilation, seed=seed, dtype=np.float64)


def gru(cin=1, hidden=1, kernel=3, dilation=1, seed=0):
    return ConvGRUCell(cin, hidden, kernel, dilation, seed=seed, dtype=np.float64)


def random_state(cell, rng, b, h, w):
    shape = (b, cell.hidden, h, w)
    y = Tensor(rng.standard_normal(shape) * 0.5, requires_grad=True)
    if isinstance(cell, ConvLSTMCell):
        return CellState(y, Tensor(rng.standard_normal(shape) * 0.5, requires_grad=True))
    return CellState(y)


def test_gate_order_is_documented():
    assert GATE_ORDER == ("forget", "input", "candidate", "output")


def test_scalar_hand_evaluation_all_weights_point_one():
    cell = lstm()
    cell.weight.data[...] = 0.1
    x = Tensor(np.ones((1, 1, 1, 1)))
    y, st = convlstm_step(cell, x, init_state(cell, 1, 1, 1))
    # with a 1x1 map only the kernel centre sees data: every pre-activation is 0.1
    s = 1 / (1 + np.exp(-0.1))
    c = s * np.tanh(0.1)
    assert abs(st.C.data.item() - c) < 1e-12
    assert abs(y.data.item() - s * np.tanh(c)) < 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_scalar_oracle_random_weights_and_state(seed):
    rng = np.random.default_rng(seed)
    cell = lstm(kernel=1)
    cell.weight.data[...] = rng.standard_normal(cell.weight.shape)
    cell.bias.data[...] = rng.standard_normal(4)
    x, y0, c0 = rng.standard_normal(3)
    state = CellState(Tensor(np.full((1, 1, 1, 1), y0)), Tensor(np.full((1, 1, 1, 1), c0)))
    y, st = cell.step(Tensor(np.full((1, 1, 1, 1), x)), state)
    ey, ec = convlstm_scalar(x, y0, c0, cell.weight.data[:, :, 0, 0].tolist(), cell.bias.data.tolist())
    assert abs(y.data.item() - ey) < 1e-12 and abs(st.C.data.item() - ec) < 1e-12


def composed_lstm(cell, x, state):
    """Independent route: concat, conv, split, activations from primitives."""
    h = cell.hidden
    g = conv2d(concat_channels(x, state.y), cell.weight, cell.bias, cell.spec)
    f = sigmoid(slice_channels(g, 0, h))
    i = sigmoid(slice_channels(g, h, 2 * h))
    cbar = tanh(slice_channels(g, 2 * h, 3 * h))
    o = sigmoid(slice_channels(g, 3 * h, 4 * h))
    c = mul(f, state.C) + mul(i, cbar)
    return mul(o, tanh(c)), c


@pytest.mark.parametrize("dilation", [1, 2])
def test_matches_primitive_composition(dilation):
    rng = np.random.default_rng(dilation)
    cell = lstm(cin=2, hidden=3, dilation=dilation, seed=4)
    cell.bias.data[...] = rng.standard_normal(12)
    x = Tensor(rng.standard_normal((2, 2, 7, 6)))
    state = random_state(cell, rng, 2, 7, 6)
    y, st = cell.step(x, state)
    ey, ec = composed_lstm(cell, x, state)
    np.testing.assert_allclose(y.data, ey.data, atol=1e-12)
    np.testing.assert_allclose(st.C.data, ec.data, atol=1e-12)


@pytest.mark.parametrize("cls", [ConvLSTMCell, ConvGRUCell])
def test_dilation_equals_zero_interleaved_dense_kernel(cls):
    rng = np.random.default_rng(0)
    sparse = cls(2, 3, 3, 2, seed=1, dtype=np.float64)
    dense = cls(2, 3, 5, 1, seed=1, dtype=np.float64)
    dense.weight.data[...] = dilate_kernel(sparse.weight.data, 2)
    sparse.bias.data[...] = dense.bias.data[...] = rng.standard_normal(sparse.bias.shape)
    x = Tensor(rng.standard_normal((1, 2, 8, 8)))
    state = random_state(sparse, rng, 1, 8, 8)
    y1, _ = sparse.step(x, state)
    y2, _ = dense.step(x, state)
    np.testing.assert_allclose(y1.data, y2.data, atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_gru_scalar_oracle(seed):
    rng = np.random.default_rng(seed)
    cell = gru(kernel=1)
    cell.weight.data[...] = rng.standard_normal(cell.weight.shape)
    cell.bias.data[...] = rng.standard_normal(3)
    x, y0 = rng.standard_normal(2)
    y, st = convgru_step(cell, Tensor(np.full((1, 1, 1, 1), x)), CellState(Tensor(np.full((1, 1, 1, 1), y0))))
    expect = convgru_scalar(x, y0, cell.weight.data[:, :, 0, 0].tolist(), cell.bias.data.tolist())
    assert abs(y.data.item() - expect) < 1e-12
    assert st.C is None and st.y is y


def test_zero_state_zero_input_zero_weights_gives_zero():
    cell = lstm(cin=1, hidden=2)
    cell.weight.data[...] = 0
    y, st = cell.step(Tensor(np.zeros((1, 1, 4, 4))), init_state(cell, 1, 4, 4))
    assert np.all(y.data == 0) and np.all(st.C.data == 0)


def test_init_state_shapes_and_fresh_buffers():
    cell = lstm(hidden=4)
    a, b = init_state(cell, 2, 5, 6), init_state(cell, 2, 5, 6)
    assert a.y.shape == a.C.shape == (2, 4, 5, 6)
    assert a.y.data is not b.y.data
    assert init_state(gru(hidden=4), 1, 3, 3).C is None
    with pytest.raises(ValueError):
        init_state(cell, 0, 5, 5)


def test_step_checks_channels_and_extent():
    cell = lstm(cin=2, hidden=3)
    with pytest.raises(DimensionError):
        cell.step(Tensor(np.zeros((1, 1, 4, 4))), init_state(cell, 1, 4, 4))
    with pytest.raises(DimensionError):
        cell.step(Tensor(np.zeros((1, 2, 4, 4))), init_state(cell, 1, 5, 4))


def test_even_kernel_rejected():
    with pytest.raises(ValueError):
        lstm(kernel=2)


def test_cell_is_stateless_between_calls():
    rng = np.random.default_rng(0)
    cell = lstm(cin=1, hidden=2)
    x = Tensor(rng.standard_normal((1, 1, 5, 5)))
    s = init_state(cell, 1, 5, 5)
    np.testing.assert_array_equal(cell.step(x, s)[0].data, cell.step(x, s)[0].data)


@pytest.mark.parametrize("seed", range(20))
@pytest.mark.parametrize("cls", [ConvLSTMCell, ConvGRUCell])
def test_step_gradients(cls, seed):
    rng = np.random.default_rng(seed)
    cell = cls(2, 2, 3, 1 + seed % 2, seed=seed, dtype=np.float64)
    cell.bias.data[...] = rng.standard_normal(cell.bias.shape) * 0.3
    x = Tensor(rng.standard_normal((1, 2, 5, 5)), requires_grad=True)
    state = random_state(cell, rng, 1, 5, 5)
    wy = Tensor(rng.standard_normal((1, 2, 5, 5)))
    wc = Tensor(rng.standard_normal((1, 2, 5, 5)))

    def loss(_=None):
        y, st = cell.step(x, state)
        out = sum_all(mul(y, wy))
        return out + sum_all(mul(st.C, wc)) if st.C is not None else out

    leaves = [cell.weight, cell.bias, x, *state.tensors()]
    for t in leaves:
        t.grad = None
    loss().backward()
    for t in leaves:
        num = finite_diff_grad(loss, t, eps=1e-6)
        assert relative_error(t.grad, num) < 1e-4
