import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from safmap.numfmt import MODE_TWOS_COMPLEMENT as TWOS, MODE_UNSIGNED as UNSIGNED
from safmap.quant import NonFiniteError, dequantize, quantize


def test_signed_example():
    q = quantize(np.array([-1.0, 0.0, 1.0]), 8, TWOS)
    assert q.codes.tolist() == [-127, 0, 127]
    assert q.scale == pytest.approx(1 / 127)


def test_unsigned_example():
    q = quantize(np.array([0.0, 0.5, 1.0]), 2, UNSIGNED)
    assert q.codes.tolist() == [0, 2, 3]  # 0.5/(1/3) = 1.5 rounds away to 2
    assert q.scale == pytest.approx(1 / 3)


def test_round_half_away_from_zero():
    q = quantize(np.array([-2.5, -1.5, 1.5, 2.5, 5.0]), 8, TWOS)
    assert q.scale == pytest.approx(5 / 127)
    # +-1.5 scaled = +-38.1, +-2.5 scaled = +-63.5 -> rounds away from zero
    assert q.codes.tolist() == [-64, -38, 38, 64, 127]


def test_all_zero_tensor():
    q = quantize(np.zeros(5), 8, TWOS)
    assert q.scale == 1.0
    assert dequantize(q).tolist() == [0.0] * 5


def test_negative_only_unsigned_clamps_to_zero():
    q = quantize(np.array([-3.0, -1.0]), 4, UNSIGNED)
    assert q.codes.tolist() == [0, 0]


def test_non_finite_rejected():
    with pytest.raises(NonFiniteError):
        quantize(np.array([1.0, np.nan]), 8, TWOS)
    with pytest.raises(NonFiniteError):
        quantize(np.array([np.inf]), 8, UNSIGNED)


@settings(max_examples=100, deadline=None)
@given(
    x=hnp.arrays(
        np.float64,
        st.integers(1, 40),
        elements=st.floats(-1e6, 1e6, allow_nan=False),
    ),
    bits=st.integers(2, 8),
)
def test_error_bound_signed(x, bits):
    q = quantize(x, bits, TWOS)
    err = np.abs(dequantize(q) - x)
    assert (err <= q.scale / 2 + 1e-9).all()


@settings(max_examples=100, deadline=None)
@given(
    x=hnp.arrays(
        np.float64,
        st.integers(1, 40),
        elements=st.floats(0, 1e6, allow_nan=False),
    ),
    bits=st.integers(2, 8),
)
def test_error_bound_unsigned(x, bits):
    q = quantize(x, bits, UNSIGNED)
    err = np.abs(dequantize(q) - x)
    assert (err <= q.scale / 2 + 1e-9).all()


def test_requantization_is_idempotent():
    rng = np.random.default_rng(13)
    x = rng.normal(size=50)
    q = quantize(x, 6, TWOS)
    q2 = quantize(dequantize(q), 6, TWOS)
    assert q2.scale == pytest.approx(q.scale)
    assert np.array_equal(q2.codes, q.codes)


def test_codes_stay_in_range():
    rng = np.random.default_rng(14)
    for mode, lo, hi in ((TWOS, -128, 127), (UNSIGNED, 0, 255)):
        q = quantize(rng.normal(size=200) * 10, 8, mode)
        assert q.codes.min() >= lo and q.codes.max() <= hi
