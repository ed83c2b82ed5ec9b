import numpy as np
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from kpo3 import tables

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@given(arrays(float, st.tuples(st.integers(1, 6), st.integers(1, 4)), elements=finite))
def test_series_round_trip(data):
    cols = {f"c{i}": data[:, i] for i in range(data.shape[1])}
    meta, back = tables.parse_series(tables.format_series(cols, {"dim": 30, "eta": -0.04}))
    assert meta == {"dim": "30", "eta": "-0.04"}
    assert list(back) == list(cols)
    for k in cols:
        assert np.array_equal(back[k], cols[k])


@given(arrays(float, st.tuples(st.integers(1, 5), st.integers(1, 5)), elements=finite))
def test_grid_round_trip(values):
    rows = np.arange(values.shape[0]) * 0.5
    cols = np.linspace(-1, 1, values.shape[1])
    text = tables.format_grid(values, ("hz", rows), ("s", cols), {"k": "v"})
    meta, axes, back = tables.parse_grid(text)
    assert meta == {"k": "v"}
    assert np.array_equal(axes["hz"], rows) and np.array_equal(axes["s"], cols)
    assert np.array_equal(back, values)


@settings(max_examples=30)
@given(arrays(float, st.tuples(st.integers(2, 5), st.integers(2, 5), st.just(2)), elements=finite)
       .filter(lambda a: a.shape[0] == a.shape[1]))
def test_matrix_round_trip(parts):
    m = parts[..., 0] + 1j * parts[..., 1]
    text = tables.format_matrix(m, {"what": "rho"})
    assert "# dim: %d" % m.shape[0] in text
    assert np.array_equal(tables.parse_matrix(text), m)


def test_matrix_parse_rejects_missing_block():
    import pytest

    with pytest.raises(ValueError):
        tables.parse_matrix("# dim: 2\n# real\n1\t0\n0\t1\n")
