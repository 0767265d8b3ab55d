import numpy as np
import pytest

from tecforecast.architectures import build_model
from tecforecast.autodiff import Tensor, gaussian_blur, no_grad
from tecforecast.forecaster import (ForecastScheme, blurred_references, forecast_array, periodic_baseline, predict,
                                    reference_frame, reference_index)

SIZE = 12


def inputs(seed=0, batch=2, size=SIZE):
    return np.random.default_rng(seed).random((batch, 36, 1, size, size)).astype(np.float32)


def count_steps(model):
    calls = []
    inner = model.step

    def step(frame, states):
        calls.append(frame)
        return inner(frame, states)

    model.step = step
    return calls


def test_reference_index_table():
    table = {k: reference_index(k) for k in range(1, 25)}
    assert table[1] == 24 and table[12] == 35 and table[13] == 24 and table[24] == 35
    assert all(table[k] == 23 + k for k in range(1, 13))
    assert all(table[k] == 11 + k for k in range(13, 25))
    # the reference is always the same time of day as the target: 12 or 24 frames back
    for k in range(1, 25):
        lag = (35 + k) - table[k]
        assert lag == (12 if k <= 12 else 24)
    for bad in (0, 25):
        with pytest.raises(ValueError):
            reference_index(bad)


def test_reference_frame_picks_input():
    x = inputs()
    assert np.array_equal(reference_frame(x, 5), x[:, 28])


def test_scheme_parse():
    assert ForecastScheme.parse("Residual") is ForecastScheme.RESIDUAL
    assert ForecastScheme.from_code(ForecastScheme.DIRECT.code) is ForecastScheme.DIRECT
    with pytest.raises(ValueError):
        ForecastScheme.parse("both")


def test_zero_model_residual_is_blurred_reference():
    m = build_model("dcnn121", size=SIZE)
    m.zero_parameters()
    x = inputs()
    with no_grad():
        out = predict(m, "residual", x, 24).data
    for k in range(1, 25):
        ref = gaussian_blur(Tensor(x[:, reference_index(k)]), 3.0).data
        assert np.array_equal(out[:, k - 1], ref)


def test_zero_model_direct_is_zero():
    m = build_model("encdec", size=SIZE)
    m.zero_parameters()
    with no_grad():
        assert np.all(predict(m, "direct", inputs(), 5).data == 0)


def test_one_step_forecast_uses_36_model_steps():
    m = build_model("dcnn121", size=SIZE)
    calls = count_steps(m)
    x = inputs()
    with no_grad():
        out = predict(m, ForecastScheme.DIRECT, x, 1)
    assert out.shape == (2, 1, 1, SIZE, SIZE)
    assert len(calls) == 36
    # every observed frame is fed exactly once, in order
    assert all(np.array_equal(c.data, x[:, i]) for i, c in enumerate(calls))


def test_feedback_of_predictions():
    m = build_model("dcnn121", size=SIZE)
    calls = count_steps(m)
    with no_grad():
        out = predict(m, "residual", inputs(), 4).data
    assert len(calls) == 39
    for k in range(1, 4):
        assert np.array_equal(calls[35 + k].data, out[:, k - 1])


@pytest.mark.parametrize("horizon", [1, 7, 24])
def test_direct_and_residual_take_equal_steps(horizon):
    counts = []
    for scheme in ForecastScheme:
        m = build_model("runet", size=SIZE)
        calls = count_steps(m)
        with no_grad():
            predict(m, scheme, inputs(), horizon)
        counts.append(len(calls))
    assert counts[0] == counts[1] == 35 + horizon


@pytest.mark.parametrize("kind", ["encdec", "runet", "dcnn121"])
def test_prefix_property(kind):
    m = build_model(kind, seed=1, size=SIZE)
    x = inputs(3)
    with no_grad():
        long = predict(m, "residual", x, 24).data
        short = predict(m, "residual", x, 12).data
    assert np.array_equal(long[:, :12], short)


def test_deterministic():
    m = build_model("dcnn121", seed=2, size=SIZE)
    x = inputs(4)
    assert np.array_equal(forecast_array(m, "direct", x, 3), forecast_array(m, "direct", x, 3))


def test_forecast_array_batches_match_single_pass():
    m = build_model("dcnn121", seed=2, size=SIZE)
    x = inputs(5, batch=5)
    whole = forecast_array(m, "residual", x, 2, batch_size=5)
    parts = forecast_array(m, "residual", x, 2, batch_size=2)
    np.testing.assert_allclose(whole, parts, atol=1e-6)


def test_horizon_and_shape_errors():
    m = build_model("dcnn121", size=SIZE)
    with pytest.raises(ValueError):
        predict(m, "direct", inputs(), 25)
    with pytest.raises(ValueError):
        predict(m, "direct", inputs()[:, :30], 2)
    with pytest.raises(ValueError):
        predict(m, "direct", inputs(size=16), 2)


def test_periodic_baseline_constant_and_periodic():
    const = np.full((1, 36, 1, 4, 4), 3.5, dtype=np.float32)
    assert np.all(periodic_baseline(const, 24) == 3.5)
    day = np.random.default_rng(0).random((12, 1, 4, 4)).astype(np.float32)
    seq = np.tile(day, (5, 1, 1, 1))[None]  # 60 frames, exactly 12-periodic
    base = periodic_baseline(seq[:, :36], 12)
    assert np.array_equal(base, seq[:, 36:48])


def test_blurred_references_shape():
    x = inputs()
    assert blurred_references(x, 7).shape == (2, 7, 1, SIZE, SIZE)


def test_residual_gradients_flow_to_parameters():
    m = build_model("dcnn121", size=SIZE)
    x = inputs()
    out = predict(m, "residual", x, 2, warmup_grad=False)
    out.sum().backward()
    assert all(p.grad is not None and np.any(p.grad != 0) for p in m.parameters().values())
