"""Precomputed closest-value-mapping table and its binary file format.

One table covers every (target code, per-bit fault pattern) pair for a
given width and decoding mode: 2**n codes times 3**n ternary fault
patterns, i.e. 6**n entries of one byte each.  The table is built once
and reused across layers and models; mapping schemes treat it as a
drop-in replacement for the enumeration engine.

Key layout (fixed so files are bit-exact across runs):
    index = target_code * 3**n + fault_digits
with the base-3 fault digits LSB-bit first and digit values
0 = fault-free, 1 = stuck-at-1, 2 = stuck-at-0.

File format (little-endian): magic ``CVML``, version byte 0x01, mode byte
(0 = unsigned, 1 = two's complement), width byte n, then 6**n entry bytes
in key order.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .faults import FAULT_FREE, SA0, SA1
from .mapping import cvm_codes
from .numfmt import (
    MODE_TWOS_COMPLEMENT,
    MODE_UNSIGNED,
    check_mode,
    check_width,
    clamp_array,
    decode_table,
)

MAGIC = b"CVML"
VERSION = 1
_MODE_BYTES = {MODE_UNSIGNED: 0, MODE_TWOS_COMPLEMENT: 1}
_BYTE_MODES = {v: k for k, v in _MODE_BYTES.items()}

DIGIT_FAULT_FREE = 0
DIGIT_SA1 = 1
DIGIT_SA0 = 2


class UnsupportedWidthError(ValueError):
    """Table requested for a width the 6**n layout does not support."""


class LutFormatError(ValueError):
    """Malformed or truncated table file."""


def _check_width(bits: int) -> None:
    try:
        check_width(bits)
    except Exception as exc:
        raise UnsupportedWidthError(str(exc)) from exc


def fault_digits_from_packed(
    sa0: np.ndarray, sa1: np.ndarray, bits: int
) -> np.ndarray:
    """Base-3 key digits from packed (sa0, sa1) bit masks."""
    sa0 = np.asarray(sa0, dtype=np.uint32)
    sa1 = np.asarray(sa1, dtype=np.uint32)
    digits = np.zeros(sa0.shape, dtype=np.uint32)
    for k in range(bits):
        bit0 = (sa0 >> k) & 1
        bit1 = (sa1 >> k) & 1
        digits += (3**k) * (DIGIT_SA0 * bit0 + DIGIT_SA1 * bit1)
    return digits


def cells_from_fault_digits(digits: int, bits: int) -> np.ndarray:
    """Expand a base-3 key back into a per-bit ternary fault vector."""
    out = np.zeros(bits, dtype=np.int8)
    for k in range(bits):
        d = (digits // 3**k) % 3
        out[k] = {DIGIT_FAULT_FREE: FAULT_FREE, DIGIT_SA1: SA1, DIGIT_SA0: SA0}[d]
    return out


@dataclass
class CvmLut:
    """Closest-value mapping results for every key of one (width, mode)."""

    bits: int
    mode: str
    entries: np.ndarray  # uint8, length 6**bits

    def __post_init__(self) -> None:
        _check_width(self.bits)
        check_mode(self.mode)
        self.entries = np.asarray(self.entries, dtype=np.uint8)
        if self.entries.shape != (6**self.bits,):
            raise LutFormatError(
                f"expected {6 ** self.bits} entries, got {self.entries.shape}"
            )

    # Mapping schemes call this through the same interface as the direct
    # enumeration engine.
    def map_codes(
        self, targets: np.ndarray, sa0: np.ndarray, sa1: np.ndarray
    ) -> np.ndarray:
        """Table lookup equivalent of direct closest-value mapping."""
        shape = np.shape(targets)
        clamped = clamp_array(targets, self.bits, self.mode).ravel()
        codes = (clamped & ((1 << self.bits) - 1)).astype(np.uint32)
        digits = fault_digits_from_packed(
            np.ravel(sa0), np.ravel(sa1), self.bits
        )
        index = codes * np.uint32(3**self.bits) + digits
        return self.entries[index].astype(np.uint16).reshape(shape)


def build_cvm_lut(bits: int, mode: str, block: int = 1 << 16) -> CvmLut:
    """Run closest-value mapping over all 6**bits keys."""
    _check_width(bits)
    check_mode(mode)
    n3 = 3**bits
    dec = decode_table(bits, mode).astype(np.int64)

    # Per fault pattern: packed sa0/sa1 masks in key-digit order.
    digits = np.arange(n3, dtype=np.int64)
    sa0 = np.zeros(n3, dtype=np.uint16)
    sa1 = np.zeros(n3, dtype=np.uint16)
    for k in range(bits):
        d = (digits // 3**k) % 3
        sa0 |= ((d == DIGIT_SA0).astype(np.uint16)) << k
        sa1 |= ((d == DIGIT_SA1).astype(np.uint16)) << k

    entries = np.empty(6**bits, dtype=np.uint8)
    for code in range(1 << bits):
        target = np.full(n3, dec[code])
        mapped = cvm_codes(target, sa0, sa1, bits, mode, block=block)
        entries[code * n3 : (code + 1) * n3] = mapped.astype(np.uint8)
    return CvmLut(bits=bits, mode=mode, entries=entries)


def cvm_lookup(lut: CvmLut, target_value: int, cell: np.ndarray) -> int:
    """Single-weight lookup from a decoded target and per-bit fault vector."""
    cell = np.asarray(cell, dtype=np.int8)
    if cell.size != lut.bits:
        raise ValueError("fault vector length does not match table width")
    sa0 = sum(1 << k for k in range(lut.bits) if cell[k] == SA0)
    sa1 = sum(1 << k for k in range(lut.bits) if cell[k] == SA1)
    return int(lut.map_codes(np.array([target_value]), [sa0], [sa1])[0])


def write_lut(lut: CvmLut, path: str | Path) -> None:
    header = MAGIC + bytes([VERSION, _MODE_BYTES[lut.mode], lut.bits])
    Path(path).write_bytes(header + lut.entries.tobytes())


def read_lut(path: str | Path) -> CvmLut:
    raw = Path(path).read_bytes()
    if len(raw) < 7 or raw[:4] != MAGIC:
        raise LutFormatError(f"{path}: not a CVML table file")
    if raw[4] != VERSION:
        raise LutFormatError(f"{path}: unsupported version {raw[4]}")
    if raw[5] not in _BYTE_MODES:
        raise LutFormatError(f"{path}: unknown mode byte {raw[5]}")
    bits = raw[6]
    _check_width(bits)
    body = np.frombuffer(raw[7:], dtype=np.uint8)
    if body.size != 6**bits:
        raise LutFormatError(
            f"{path}: expected {6 ** bits} entries, found {body.size}"
        )
    return CvmLut(bits=bits, mode=_BYTE_MODES[raw[5]], entries=body.copy())


def load_or_build(
    bits: int, mode: str, cache_path: str | Path | None = None
) -> CvmLut:
    """Read a cached table if present and matching, else build (and cache)."""
    if cache_path is not None and Path(cache_path).exists():
        lut = read_lut(cache_path)
        if lut.bits == bits and lut.mode == mode:
            return lut
    lut = build_cvm_lut(bits, mode)
    if cache_path is not None:
        write_lut(lut, cache_path)
    return lut


def verify_lut(
    lut: CvmLut, samples: int, seed: int = 0
) -> list[tuple[int, int, int]]:
    """Compare random table entries against direct closest-value mapping.

    Returns a list of (key, table code, recomputed code) mismatches;
    empty means the sampled entries all agree.
    """
    rng = np.random.default_rng(seed)
    n3 = 3**lut.bits
    keys = rng.integers(0, 6**lut.bits, size=samples, dtype=np.int64)
    codes = keys // n3
    digits = keys % n3
    sa0 = np.zeros(samples, dtype=np.uint16)
    sa1 = np.zeros(samples, dtype=np.uint16)
    for k in range(lut.bits):
        d = (digits // 3**k) % 3
        sa0 |= ((d == DIGIT_SA0).astype(np.uint16)) << k
        sa1 |= ((d == DIGIT_SA1).astype(np.uint16)) << k
    dec = decode_table(lut.bits, lut.mode).astype(np.int64)
    direct = cvm_codes(dec[codes], sa0, sa1, lut.bits, lut.mode)
    table = lut.entries[keys].astype(np.uint16)
    bad = np.flatnonzero(direct != table)
    return [(int(keys[i]), int(table[i]), int(direct[i])) for i in bad]
