"""Independent brute-force oracles used to pin expected values.

Everything here recomputes results from first principles (exhaustive
enumeration over codes, flip masks and bit positions) without touching
the vectorized implementation paths it checks.
"""

from __future__ import annotations

import numpy as np

SA0, FF, SA1 = -1, 0, 1


def decode_ref(bits: int, width: int, mode: str) -> int:
    if mode == "unsigned":
        return bits
    return bits - (1 << width) if bits >> (width - 1) else bits


def legal_ref(code: int, cell) -> bool:
    for k, state in enumerate(cell):
        bit = (code >> k) & 1
        if state == SA1 and bit != 1:
            return False
        if state == SA0 and bit != 0:
            return False
    return True


def brute_cvm(target_value: int, cell, width: int, mode: str) -> tuple[int, int]:
    """(code, error) of the closest legal code, smallest pattern on ties."""
    best_code, best_err = None, None
    for cand in range(1 << width):
        if not legal_ref(cand, cell):
            continue
        err = abs(decode_ref(cand, width, mode) - target_value)
        if best_err is None or err < best_err:
            best_code, best_err = cand, err
    assert best_code is not None, "legal set can never be empty"
    return best_code, best_err


def flip_cell(cell, j: int):
    """Swap SA0/SA1 at flipped bit positions."""
    return [-s if (j >> k) & 1 else s for k, s in enumerate(cell)]


def brute_bitflip_column(targets, cells, width: int, mode: str):
    """(j, per-row effective codes, error) minimizing column error over all
    flip masks, by exhaustive enumeration; smallest j on ties."""
    best = None
    for j in range(1 << width):
        total = 0
        effs = []
        for t, cell in zip(targets, cells):
            code, err = brute_cvm(t, flip_cell(cell, j), width, mode)
            total += err
            effs.append(code)
        if best is None or total < best[2]:
            best = (j, effs, total)
    return best


def all_fault_cells(width: int):
    """Every ternary per-bit fault vector, in base-3 LSB-first key order."""
    digit_state = {0: FF, 1: SA1, 2: SA0}
    for pattern in range(3**width):
        d = pattern
        cell = []
        for _ in range(width):
            cell.append(digit_state[d % 3])
            d //= 3
        yield pattern, cell


def cell_to_packed(cell) -> tuple[int, int]:
    sa0 = sum(1 << k for k, s in enumerate(cell) if s == SA0)
    sa1 = sum(1 << k for k, s in enumerate(cell) if s == SA1)
    return sa0, sa1
