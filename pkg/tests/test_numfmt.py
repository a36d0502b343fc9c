import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from safmap import numfmt
from safmap.numfmt import (
    MODE_TWOS_COMPLEMENT as TWOS,
    MODE_UNSIGNED as UNSIGNED,
    OutOfRangeError,
    bit_slice,
    clamp_to_range,
    decode,
    encode,
    xor_mask,
)


def test_decode_examples():
    assert decode(0b0111, 4, UNSIGNED) == 7
    assert decode(0b1000, 4, TWOS) == -8
    assert decode(0b1001, 4, TWOS) == -7  # 9 - 16


def test_encode_examples():
    assert encode(-7, 4, TWOS) == 0b1001
    assert encode(0, 4, TWOS) == 0
    assert encode(0, 4, UNSIGNED) == 0
    with pytest.raises(OutOfRangeError):
        encode(8, 4, TWOS)


def test_clamp_examples():
    assert clamp_to_range(8, 4, TWOS) == 7
    assert clamp_to_range(-9, 4, TWOS) == -8
    assert clamp_to_range(3, 4, UNSIGNED) == 3


def test_bit_slice_examples():
    assert bit_slice(0b0111, 2) == 1
    assert bit_slice(0b0111, 3) == 0
    assert bit_slice(0b1001, 0) == 1


def test_xor_mask_examples():
    assert xor_mask(0b0101, 0b0011, 4) == 0b0110
    assert xor_mask(0b1100, 0, 4) == 0b1100
    assert xor_mask(0b0000, 0b1000, 4) == 0b1000


@pytest.mark.parametrize("width", range(1, 9))
@pytest.mark.parametrize("mode", [UNSIGNED, TWOS])
def test_round_trip_exhaustive(width, mode):
    lo, hi = numfmt.value_range(width, mode)
    for value in range(lo, hi + 1):
        assert decode(encode(value, width, mode), width, mode) == value


@pytest.mark.parametrize("width", range(1, 9))
@pytest.mark.parametrize("mode", [UNSIGNED, TWOS])
def test_slicing_consistency_exhaustive(width, mode):
    for code in range(1 << width):
        acc = sum(
            (1 << k) * bit_slice(code, k) for k in range(width - 1)
        )
        msb_weight = 1 << (width - 1)
        if mode == UNSIGNED:
            acc += msb_weight * bit_slice(code, width - 1)
        else:
            acc -= msb_weight * bit_slice(code, width - 1)
        assert acc == decode(code, width, mode)


def test_xor_involution_exhaustive_small():
    for width in range(1, 5):
        for code in range(1 << width):
            for j in range(1 << width):
                assert xor_mask(xor_mask(code, j, width), j, width) == code


@given(
    width=st.integers(5, 8),
    data=st.data(),
)
def test_xor_involution_random_wide(width, data):
    code = data.draw(st.integers(0, (1 << width) - 1))
    j = data.draw(st.integers(0, (1 << width) - 1))
    assert xor_mask(xor_mask(code, j, width), j, width) == code


def test_width_limits():
    with pytest.raises(OutOfRangeError):
        numfmt.check_width(9)
    with pytest.raises(OutOfRangeError):
        numfmt.check_width(0)


def test_codeword_validation():
    numfmt.CodeWord(bits=15, width=4)
    with pytest.raises(OutOfRangeError):
        numfmt.CodeWord(bits=16, width=4)


def test_array_helpers_match_scalars():
    for mode in (UNSIGNED, TWOS):
        codes = np.arange(16)
        decoded = numfmt.decode_array(codes, 4, mode)
        assert [decode(int(c), 4, mode) for c in codes] == decoded.tolist()
        assert np.array_equal(numfmt.encode_array(decoded, 4, mode), codes)
    assert numfmt.clamp_array([-9, 8, 3], 4, TWOS).tolist() == [-8, 7, 3]
