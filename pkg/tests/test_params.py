import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from fedmask.params import (
    ParamSet, ShapeMismatchError, add, elementwise_combine, from_bytes, load, numel, save,
    scale_add, sub, to_bytes,
)


def test_add_sub_scale_add():
    a = ParamSet([("w", [[1.0, 2.0]])])
    b = ParamSet([("w", [[3.0, 4.0]])])
    assert add(a, b)["w"].tolist() == [[4.0, 6.0]]
    assert not sub(a, a)["w"].any()
    assert scale_add(a, b, 0.0) == a
    assert scale_add(a, b, 2.0)["w"].tolist() == [[7.0, 10.0]]


def test_inputs_unmodified(tiny_params):
    before = tiny_params.copy_arrays()
    add(tiny_params, tiny_params)
    for k in before:
        np.testing.assert_array_equal(before[k], tiny_params[k])


def test_layers_are_read_only(tiny_params):
    with pytest.raises(ValueError):
        tiny_params["W"][0, 0] = 9.0


def test_mismatch_names_layer():
    a = ParamSet([("w", np.ones((2, 2))), ("b", np.ones((1, 2)))])
    b = ParamSet([("w", np.ones((2, 2))), ("b", np.ones((1, 3)))])
    with pytest.raises(ShapeMismatchError, match="'b'"):
        add(a, b)
    c = ParamSet([("w", np.ones((2, 2))), ("bias", np.ones((1, 2)))])
    with pytest.raises(ShapeMismatchError, match="bias"):
        elementwise_combine(a, c, "sub")


def test_unknown_op(tiny_params):
    with pytest.raises(ValueError):
        elementwise_combine(tiny_params, tiny_params, "mul")


def test_numel():
    assert numel(ParamSet([("a", np.zeros((2, 3)))])) == 6
    assert numel(ParamSet([("a", np.zeros((2, 2))), ("b", np.zeros((1, 4)))])) == 8
    assert numel(ParamSet()) == 0


def test_rejects_bad_layers():
    with pytest.raises(ValueError, match="duplicate"):
        ParamSet([("a", [[1.0]]), ("a", [[2.0]])])
    with pytest.raises(ValueError):
        ParamSet([("a", [1.0, 2.0])])
    with pytest.raises(FloatingPointError):
        ParamSet([("a", [[np.nan]])])


def test_overflow_is_caught():
    big = ParamSet([("a", [[1e308]])])
    with np.errstate(over="ignore"), pytest.raises(FloatingPointError):
        add(big, big)


def test_checkpoint_round_trip(tmp_path, tiny_params):
    path = tmp_path / "m.bin"
    save(tiny_params, path)
    assert load(path) == tiny_params
    # header (12) + per layer: 4 + name + 8 + 8*numel
    assert path.stat().st_size == 12 + (4 + 1 + 8 + 48) + (4 + 1 + 8 + 32)


def test_checkpoint_layout_is_little_endian():
    buf = to_bytes(ParamSet([("ab", [[1.0]])]))
    assert buf == b"FMPS" + (1).to_bytes(4, "little") + (1).to_bytes(4, "little") + \
        (2).to_bytes(4, "little") + b"ab" + (1).to_bytes(4, "little") * 2 + np.float64(1.0).astype("<f8").tobytes()


def test_checkpoint_rejects_garbage(tiny_params):
    buf = to_bytes(tiny_params)
    with pytest.raises(ValueError):
        from_bytes(b"XXXX" + buf[4:])
    with pytest.raises(ValueError):
        from_bytes(buf[:-3])
    with pytest.raises(ValueError):
        from_bytes(buf + b"\0")


mats = arrays(np.float64, (3, 4), elements=st.floats(-1e6, 1e6))


@given(mats, mats, mats)
def test_add_commutes_and_preserves_shape(x, y, z):
    a, b = ParamSet([("w", x)]), ParamSet([("w", y)])
    assert add(a, b) == add(b, a)
    assert add(a, b).shapes == a.shapes
    c = ParamSet([("w", z)])
    np.testing.assert_allclose(add(add(a, b), c)["w"], add(a, add(b, c))["w"], rtol=1e-12, atol=1e-6)
