"""Fault-aware weight mapping: naive, closest-value, sign-flip and bit-flip.

All schemes operate on a layer's M x K matrix of n-bit weight codes and a
stuck-at mask of the same shape, chunked into ``row_len``-row blocks that
each correspond to one physical memory sub-array.

Error is always measured between DECODED values (signed integers for
two's-complement layers), which is the domain that matches dot-product
error.  Ties are broken deterministically: closest-value mapping prefers
the smallest candidate pattern, sign-flip keeps the original polarity
unless the flipped error is strictly smaller, and bit-flip prefers the
smallest flip mask (so it degenerates to plain closest-value mapping
whenever flipping cannot help).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import numfmt
from .faults import SafMask, force_write_array, transform_packed_for_flip
from .numfmt import (
    MODE_TWOS_COMPLEMENT,
    MODE_UNSIGNED,
    clamp_array,
    decode_array,
    decode_table,
    value_range,
)

SCHEME_NAIVE = "naive"
SCHEME_CVM = "cvm"
SCHEME_SIGNFLIP = "signflip"
SCHEME_BITFLIP = "bitflip"
SCHEMES = (SCHEME_NAIVE, SCHEME_CVM, SCHEME_SIGNFLIP, SCHEME_BITFLIP)

_ILLEGAL = np.uint8(0xFF)


class UnsignedLayerError(ValueError):
    """Sign-flip requested for a layer without a sign to flip."""


@dataclass(frozen=True)
class LayerWeights:
    """Ideal n-bit weight codes of one layer."""

    codes: np.ndarray  # uint16, shape (M, K)
    bits: int
    mode: str

    def __post_init__(self) -> None:
        numfmt.check_width(self.bits)
        numfmt.check_mode(self.mode)
        codes = np.asarray(self.codes, dtype=np.uint16)
        if codes.ndim != 2:
            raise ValueError("weight codes must be an M x K matrix")
        if codes.size and codes.max() >= (1 << self.bits):
            raise numfmt.OutOfRangeError("weight code exceeds bit width")
        object.__setattr__(self, "codes", codes)

    @classmethod
    def from_values(cls, values: np.ndarray, bits: int, mode: str) -> "LayerWeights":
        return cls(numfmt.encode_array(values, bits, mode), bits, mode)

    @property
    def rows(self) -> int:
        return self.codes.shape[0]

    @property
    def cols(self) -> int:
        return self.codes.shape[1]

    def values(self) -> np.ndarray:
        return decode_array(self.codes, self.bits, self.mode).astype(np.int64)


@dataclass(frozen=True)
class ChunkGeometry:
    """Row blocking of an M-row matrix into ``row_len``-row sub-arrays."""

    rows: int
    row_len: int

    def __post_init__(self) -> None:
        if self.row_len < 1:
            raise ValueError("row_len must be >= 1")

    @property
    def num_chunks(self) -> int:
        return -(-self.rows // self.row_len)

    @property
    def last_chunk_rows(self) -> int:
        return self.rows - self.row_len * (self.num_chunks - 1)

    def slices(self) -> list[slice]:
        return [
            slice(c * self.row_len, min((c + 1) * self.row_len, self.rows))
            for c in range(self.num_chunks)
        ]


# ---------------------------------------------------------------------------
# Direct closest-value mapping engine (full candidate enumeration).
# ---------------------------------------------------------------------------

_TABLE_CACHE: dict[tuple, tuple[np.ndarray, np.ndarray, int]] = {}


def _cvm_tables(bits: int, mode: str) -> tuple[np.ndarray, np.ndarray, int]:
    """(err, penalty, lo) lookup tables for the enumeration engine.

    err[t - lo, c]   : |decode(c) - t| for every in-range target t, uint8.
    penalty[key, c]  : 0x00 if candidate c is legal under the packed fault
                       key (sa1 << bits | sa0), else 0xFF.
    """
    cached = _TABLE_CACHE.get((bits, mode))
    if cached is not None:
        return cached
    dec = decode_table(bits, mode).astype(np.int32)
    lo, hi = value_range(bits, mode)
    targets = np.arange(lo, hi + 1, dtype=np.int32)
    err = np.abs(dec[None, :] - targets[:, None]).astype(np.uint8)
    cand = np.arange(1 << bits, dtype=np.uint32)
    keys = np.arange(1 << (2 * bits), dtype=np.uint32)
    sa1 = (keys >> bits)[:, None]
    sa0 = (keys & ((1 << bits) - 1))[:, None]
    legal = ((cand & sa1) == sa1) & ((cand & sa0) == 0)
    penalty = np.where(legal, np.uint8(0), _ILLEGAL)
    _TABLE_CACHE[(bits, mode)] = (err, penalty, lo)
    return err, penalty, lo


def cvm_codes(
    targets: np.ndarray,
    sa0: np.ndarray,
    sa1: np.ndarray,
    bits: int,
    mode: str,
    block: int = 1 << 16,
) -> np.ndarray:
    """Closest-value mapping by enumerating all ``2**bits`` candidates.

    ``targets`` holds decoded integers and may lie outside the representable
    range (sign-flip negation); clamping before the search preserves the
    arg-min because distance to an out-of-range value is monotone in the
    candidate.  Returns the winning code patterns, same shape as targets.
    """
    err_tab, pen_tab, lo = _cvm_tables(bits, mode)
    shape = np.shape(targets)
    tidx = (clamp_array(targets, bits, mode) - lo).ravel()
    key = (
        (np.asarray(sa1, dtype=np.uint32).ravel() << bits)
        | np.asarray(sa0, dtype=np.uint32).ravel()
    )
    out = np.empty(tidx.size, dtype=np.uint16)
    for start in range(0, tidx.size, block):
        sl = slice(start, start + block)
        masked = err_tab[tidx[sl]] | pen_tab[key[sl]]
        idx = masked.argmin(axis=1)
        # 0xFF is ambiguous: it marks illegal candidates but is also a real
        # distance at n=8.  Redo those (vanishingly rare) rows exactly.
        picked = np.take_along_axis(masked, idx[:, None], axis=1)[:, 0]
        bad = np.flatnonzero(picked == _ILLEGAL)
        if bad.size:
            exact = err_tab[tidx[sl][bad]].astype(np.int16) + np.where(
                pen_tab[key[sl][bad]] == _ILLEGAL, np.int16(1 << 10), np.int16(0)
            )
            idx[bad] = exact.argmin(axis=1)
        out[sl] = idx
    return out.reshape(shape)


class _DirectSolver:
    """Per-candidate enumeration backend shared by all mapping schemes."""

    def __init__(self, bits: int, mode: str):
        self.bits = bits
        self.mode = mode

    def map_codes(self, targets, sa0, sa1) -> np.ndarray:
        return cvm_codes(targets, sa0, sa1, self.bits, self.mode)


def _solver(layer: LayerWeights, lut) -> object:
    if lut is None:
        return _DirectSolver(layer.bits, layer.mode)
    if lut.bits != layer.bits or lut.mode != layer.mode:
        raise ValueError(
            f"LUT built for ({lut.bits}-bit, {lut.mode}) cannot map a "
            f"({layer.bits}-bit, {layer.mode}) layer"
        )
    return lut


# ---------------------------------------------------------------------------
# Mapping schemes.
# ---------------------------------------------------------------------------


def _check_shapes(layer: LayerWeights, mask: SafMask) -> None:
    if (mask.rows, mask.cols, mask.bits) != (layer.rows, layer.cols, layer.bits):
        raise ValueError(
            f"mask shape {(mask.rows, mask.cols, mask.bits)} does not match "
            f"layer shape {(layer.rows, layer.cols, layer.bits)}"
        )


def naive_map(layer: LayerWeights, mask: SafMask) -> np.ndarray:
    """Force-write every weight: stuck bits override the target bits."""
    _check_shapes(layer, mask)
    sa0, sa1 = mask.packed()
    return force_write_array(layer.codes, sa0, sa1)


def cvm_map(layer: LayerWeights, mask: SafMask, lut=None) -> np.ndarray:
    """Per-weight closest legal code, ties to the smallest pattern."""
    _check_shapes(layer, mask)
    sa0, sa1 = mask.packed()
    return _solver(layer, lut).map_codes(layer.values(), sa0, sa1)


def sign_flip_map(
    layer: LayerWeights, mask: SafMask, row_len: int, lut=None
) -> tuple[np.ndarray, np.ndarray]:
    """Per-chunk, per-column choice between a weight column and its negation.

    Returns (stored codes, col_flip) where ``col_flip[c, k] = 1`` means the
    chunk stores the closest-value mapping of the negated targets and the
    accumulated dot product must be negated digitally.
    """
    _check_shapes(layer, mask)
    if layer.mode != MODE_TWOS_COMPLEMENT:
        raise UnsignedLayerError("sign-flip requires two's-complement weights")
    solver = _solver(layer, lut)
    sa0, sa1 = mask.packed()
    targets = layer.values()
    w_pos = solver.map_codes(targets, sa0, sa1)
    w_neg = solver.map_codes(-targets, sa0, sa1)
    err_pos = np.abs(decode_array(w_pos, layer.bits, layer.mode) - targets)
    err_neg = np.abs(decode_array(w_neg, layer.bits, layer.mode) + targets)

    geom = ChunkGeometry(layer.rows, row_len)
    col_flip = np.zeros((geom.num_chunks, layer.cols), dtype=np.uint8)
    stored = w_pos.copy()
    for c, rows in enumerate(geom.slices()):
        flip = err_neg[rows].sum(axis=0) < err_pos[rows].sum(axis=0)
        col_flip[c] = flip
        stored[rows] = np.where(flip[None, :], w_neg[rows], w_pos[rows])
    return stored, col_flip


def bit_flip_map(
    layer: LayerWeights, mask: SafMask, row_len: int, lut=None
) -> tuple[np.ndarray, np.ndarray]:
    """Per-chunk, per-column choice of a flip mask over individual bit slices.

    For each candidate mask j the faults are transformed into the effective
    domain (a stuck bit in a flipped slice acts with inverted polarity),
    closest-value mapping runs against the transformed mask, and the chunk
    error of the effective codes against the targets is accumulated.  The
    smallest j wins ties, so j = 0 reproduces plain closest-value mapping.
    Stored codes are the winning effective codes XOR j.

    Returns (stored codes, b_flip) with ``b_flip[k, c, col]`` the k-th bit
    (LSB first) of the chosen mask for chunk c / weight column col.
    """
    _check_shapes(layer, mask)
    solver = _solver(layer, lut)
    sa0, sa1 = mask.packed()
    targets = layer.values()
    geom = ChunkGeometry(layer.rows, row_len)
    slices = geom.slices()

    best_err = np.full((geom.num_chunks, layer.cols), np.iinfo(np.int64).max)
    best_j = np.zeros((geom.num_chunks, layer.cols), dtype=np.uint16)
    stored = np.zeros_like(layer.codes)
    for j in range(1 << layer.bits):
        s0, s1 = transform_packed_for_flip(sa0, sa1, j)
        eff = solver.map_codes(targets, s0, s1)
        err = np.abs(decode_array(eff, layer.bits, layer.mode) - targets)
        for c, rows in enumerate(slices):
            chunk_err = err[rows].sum(axis=0)
            better = chunk_err < best_err[c]
            if better.any():
                best_err[c][better] = chunk_err[better]
                best_j[c][better] = j
                block = stored[rows]
                block[:, better] = eff[rows][:, better] ^ j
                stored[rows] = block

    k = np.arange(layer.bits, dtype=np.uint16)
    b_flip = ((best_j[None, :, :] >> k[:, None, None]) & 1).astype(np.uint8)
    return stored, b_flip


# ---------------------------------------------------------------------------
# Mapped layouts.
# ---------------------------------------------------------------------------


@dataclass
class MappedLayout:
    """Stored codes for one layer plus the per-chunk correction masks."""

    scheme: str
    bits: int
    mode: str
    row_len: int
    stored: np.ndarray  # uint16, (M, K)
    col_flip: np.ndarray  # uint8, (num_chunks, K)
    b_flip: np.ndarray  # uint8, (bits, num_chunks, K)

    def __post_init__(self) -> None:
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        self.stored = np.asarray(self.stored, dtype=np.uint16)
        self.col_flip = np.asarray(self.col_flip, dtype=np.uint8)
        self.b_flip = np.asarray(self.b_flip, dtype=np.uint8)

    @property
    def rows(self) -> int:
        return self.stored.shape[0]

    @property
    def cols(self) -> int:
        return self.stored.shape[1]

    @property
    def geometry(self) -> ChunkGeometry:
        return ChunkGeometry(self.rows, self.row_len)

    def flip_masks(self) -> np.ndarray:
        """Per-chunk, per-column flip mask j assembled from b_flip bits."""
        k = np.arange(self.bits, dtype=np.uint16)
        return (self.b_flip.astype(np.uint16) << k[:, None, None]).sum(axis=0)

    def effective_values(self) -> np.ndarray:
        """Decoded weight each position contributes after digital correction.

        Sign-flipped columns contribute the exact negation of the stored
        value, which may be ``2**(bits-1)`` and hence not itself a code.
        """
        values = decode_array(self.stored, self.bits, self.mode).astype(np.int64)
        if self.scheme == SCHEME_BITFLIP:
            jmat = self.flip_masks()
            for c, rows in enumerate(self.geometry.slices()):
                eff = self.stored[rows] ^ jmat[c][None, :]
                values[rows] = decode_array(eff, self.bits, self.mode)
        elif self.scheme == SCHEME_SIGNFLIP:
            for c, rows in enumerate(self.geometry.slices()):
                flip = self.col_flip[c].astype(bool)
                block = values[rows]
                block[:, flip] = -block[:, flip]
                values[rows] = block
        return values

    def effective_code(self, row: int, col: int) -> int:
        """Effective code at one position (sign-flip negation clamped)."""
        chunk = row // self.row_len
        if self.scheme == SCHEME_BITFLIP:
            j = int(self.flip_masks()[chunk, col])
            return int(self.stored[row, col]) ^ j
        if self.scheme == SCHEME_SIGNFLIP and self.col_flip[chunk, col]:
            value = -numfmt.decode(int(self.stored[row, col]), self.bits, self.mode)
            return numfmt.encode(
                numfmt.clamp_to_range(value, self.bits, self.mode),
                self.bits,
                self.mode,
            )
        return int(self.stored[row, col])

    def to_json_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "bits": self.bits,
            "mode": self.mode,
            "row_len": self.row_len,
            "rows": self.rows,
            "cols": self.cols,
            "stored": self.stored.ravel(order="C").tolist(),
            "col_flip": self.col_flip.ravel(order="C").tolist(),
            "b_flip": self.b_flip.ravel(order="C").tolist(),
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "MappedLayout":
        rows, cols, bits = obj["rows"], obj["cols"], obj["bits"]
        chunks = ChunkGeometry(rows, obj["row_len"]).num_chunks
        return cls(
            scheme=obj["scheme"],
            bits=bits,
            mode=obj["mode"],
            row_len=obj["row_len"],
            stored=np.asarray(obj["stored"], dtype=np.uint16).reshape(rows, cols),
            col_flip=np.asarray(obj["col_flip"], dtype=np.uint8).reshape(chunks, cols),
            b_flip=np.asarray(obj["b_flip"], dtype=np.uint8).reshape(
                bits, chunks, cols
            ),
        )

    def save(self, path: str | Path, extra: dict | None = None) -> None:
        obj = self.to_json_dict()
        if extra:
            obj.update(extra)
        Path(path).write_text(json.dumps(obj))

    @classmethod
    def load(cls, path: str | Path) -> "MappedLayout":
        return cls.from_json_dict(json.loads(Path(path).read_text()))


def build_layout(
    scheme: str,
    layer: LayerWeights,
    mask: SafMask,
    row_len: int,
    lut=None,
) -> MappedLayout:
    """Run one mapping scheme and package the result."""
    geom = ChunkGeometry(layer.rows, row_len)
    col_flip = np.zeros((geom.num_chunks, layer.cols), dtype=np.uint8)
    b_flip = np.zeros((layer.bits, geom.num_chunks, layer.cols), dtype=np.uint8)
    if scheme == SCHEME_NAIVE:
        stored = naive_map(layer, mask)
    elif scheme == SCHEME_CVM:
        stored = cvm_map(layer, mask, lut=lut)
    elif scheme == SCHEME_SIGNFLIP:
        stored, col_flip = sign_flip_map(layer, mask, row_len, lut=lut)
    elif scheme == SCHEME_BITFLIP:
        stored, b_flip = bit_flip_map(layer, mask, row_len, lut=lut)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return MappedLayout(
        scheme=scheme,
        bits=layer.bits,
        mode=layer.mode,
        row_len=row_len,
        stored=stored,
        col_flip=col_flip,
        b_flip=b_flip,
    )


def mapping_error(
    layout: MappedLayout, layer: LayerWeights
) -> tuple[np.ndarray, int]:
    """Sum of |effective - target| decoded errors, per (chunk, column) and
    in total."""
    targets = layer.values()
    err = np.abs(layout.effective_values() - targets)
    per_col = np.stack(
        [err[rows].sum(axis=0) for rows in layout.geometry.slices()]
    )
    return per_col, int(err.sum())
