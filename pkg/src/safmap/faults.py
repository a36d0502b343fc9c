"""Stuck-at-fault masks: representation, random injection, legality tests.

A fault mask is a ternary tensor over (row, col, bit): -1 = stuck-at-0,
0 = fault-free, +1 = stuck-at-1.  For vectorized work the per-cell states
are packed into two per-weight bit masks (``sa0``/``sa1``), one bit per
slice, which every hot path in this package operates on.

Mask generation uses numpy's PCG64 generator seeded with the integer
sequence ``[seed, trial_index]`` (or ``[seed, trial, layer]`` in the
evaluation harness), so masks are reproducible for a fixed numpy build.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .numfmt import check_width

SA0 = -1
FAULT_FREE = 0
SA1 = 1


class InvalidRateError(ValueError):
    """Fault probability outside [0, 1]."""


@dataclass(frozen=True)
class FaultInjectionSpec:
    """Parameters of one random stuck-at-fault injection."""

    rate: float
    seed: int
    trial_index: int = 0
    sa1_fraction: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 <= self.rate <= 1.0:
            raise InvalidRateError(f"fault rate must be in [0, 1], got {self.rate}")
        if not 0.0 <= self.sa1_fraction <= 1.0:
            raise InvalidRateError(
                f"sa1_fraction must be in [0, 1], got {self.sa1_fraction}"
            )


@dataclass
class SafMask:
    """Ternary stuck-at states for an M x K matrix of n-bit weights."""

    cells: np.ndarray  # int8, shape (M, K, n), entries in {-1, 0, +1}

    def __post_init__(self) -> None:
        self.cells = np.asarray(self.cells, dtype=np.int8)
        if self.cells.ndim != 3:
            raise ValueError("mask must have shape (rows, cols, bits)")
        check_width(self.cells.shape[2])
        if not np.isin(self.cells, (-1, 0, 1)).all():
            raise ValueError("mask entries must be -1, 0 or +1")

    @property
    def rows(self) -> int:
        return self.cells.shape[0]

    @property
    def cols(self) -> int:
        return self.cells.shape[1]

    @property
    def bits(self) -> int:
        return self.cells.shape[2]

    def packed(self) -> tuple[np.ndarray, np.ndarray]:
        """(sa0, sa1) bit masks of shape (M, K), one bit per slice (LSB first)."""
        weights = (1 << np.arange(self.bits, dtype=np.uint16))
        sa0 = ((self.cells == SA0) * weights).sum(axis=2).astype(np.uint16)
        sa1 = ((self.cells == SA1) * weights).sum(axis=2).astype(np.uint16)
        return sa0, sa1

    def num_faulty(self) -> int:
        return int((self.cells != FAULT_FREE).sum())

    def to_json_dict(self) -> dict:
        return {
            "rows": self.rows,
            "cols": self.cols,
            "bits": self.bits,
            "data": self.cells.ravel(order="C").tolist(),
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "SafMask":
        shape = (obj["rows"], obj["cols"], obj["bits"])
        data = np.asarray(obj["data"], dtype=np.int8)
        if data.size != shape[0] * shape[1] * shape[2]:
            raise ValueError("mask data length does not match rows*cols*bits")
        return cls(cells=data.reshape(shape))

    def save(self, path: str | Path, extra: dict | None = None) -> None:
        obj = self.to_json_dict()
        if extra:
            obj.update(extra)
        Path(path).write_text(json.dumps(obj))

    @classmethod
    def load(cls, path: str | Path) -> "SafMask":
        return cls.from_json_dict(json.loads(Path(path).read_text()))


def mask_rng(seed: int, *stream: int) -> np.random.Generator:
    """Deterministic generator for one injection stream (trial, layer, ...)."""
    return np.random.default_rng([int(seed) & (2**64 - 1), *map(int, stream)])


def sample_saf_mask(
    rng: np.random.Generator,
    shape: tuple[int, int, int],
    rate: float,
    sa1_fraction: float = 0.5,
) -> SafMask:
    """Draw one i.i.d. mask from an already-derived random stream."""
    if not 0.0 <= rate <= 1.0:
        raise InvalidRateError(f"fault rate must be in [0, 1], got {rate}")
    check_width(shape[2])
    faulty = rng.random(shape) < rate
    is_sa1 = rng.random(shape) < sa1_fraction
    cells = np.zeros(shape, dtype=np.int8)
    cells[faulty & is_sa1] = SA1
    cells[faulty & ~is_sa1] = SA0
    return SafMask(cells=cells)


def gen_saf_mask(spec: FaultInjectionSpec, shape: tuple[int, int, int]) -> SafMask:
    """Inject i.i.d. stuck-at faults: each cell faulty with probability
    ``rate``, faulty cells SA1 with probability ``sa1_fraction`` else SA0."""
    rng = mask_rng(spec.seed, spec.trial_index)
    return sample_saf_mask(rng, shape, spec.rate, spec.sa1_fraction)


def _pack_cell(cell: np.ndarray) -> tuple[int, int]:
    """Pack one per-bit fault vector into (sa0, sa1) integer bit masks."""
    cell = np.asarray(cell, dtype=np.int8)
    weights = 1 << np.arange(cell.size)
    return int(weights[cell == SA0].sum()), int(weights[cell == SA1].sum())


def is_legal(code: int, cell: np.ndarray) -> bool:
    """True iff the code agrees with every stuck bit of the fault vector."""
    sa0, sa1 = _pack_cell(cell)
    return (code & sa1) == sa1 and (code & sa0) == 0


def force_write(code: int, cell: np.ndarray) -> int:
    """Naive write: stuck bits override the target, fault-free bits copy it."""
    sa0, sa1 = _pack_cell(cell)
    return (code | sa1) & ~sa0


def force_write_array(codes: np.ndarray, sa0: np.ndarray, sa1: np.ndarray) -> np.ndarray:
    """Vectorized :func:`force_write` on packed (sa0, sa1) masks."""
    codes = np.asarray(codes, dtype=np.uint16)
    return (codes | sa1) & ~sa0


def transform_mask_for_flip(cell: np.ndarray, j: int) -> np.ndarray:
    """Swap SA0 <-> SA1 at every bit position set in the flip mask ``j``.

    A stored stuck-at-1 bit in a flipped slice contributes an effective 0
    after digital correction, so in the effective domain its fault acts as
    stuck-at-0 (and vice versa).  Involutive in j.
    """
    cell = np.asarray(cell, dtype=np.int8)
    flipped = np.array([(j >> k) & 1 for k in range(cell.size)], dtype=bool)
    out = cell.copy()
    out[flipped] = -out[flipped]
    return out


def transform_packed_for_flip(
    sa0: np.ndarray, sa1: np.ndarray, j: int
) -> tuple[np.ndarray, np.ndarray]:
    """Packed-mask version of :func:`transform_mask_for_flip`."""
    sa0 = np.asarray(sa0, dtype=np.uint16)
    sa1 = np.asarray(sa1, dtype=np.uint16)
    jm = np.uint16(j)
    new_sa0 = (sa0 & ~jm) | (sa1 & jm)
    new_sa1 = (sa1 & ~jm) | (sa0 & jm)
    return new_sa0, new_sa1


_POPCOUNT8 = np.array([bin(i).count("1") for i in range(256)], dtype=np.int64)


def _popcount16(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.uint16)
    return _POPCOUNT8[x & 0xFF] + _POPCOUNT8[x >> 8]


def count_unmasked(codes: np.ndarray, mask: SafMask) -> int:
    """Number of (row, col, bit) positions where a stuck value conflicts
    with the target bit.  Masked faults (stuck value == target bit) are
    benign and not counted."""
    codes = np.asarray(codes, dtype=np.uint16)
    if codes.shape != (mask.rows, mask.cols):
        raise ValueError("code matrix shape does not match mask")
    sa0, sa1 = mask.packed()
    conflict = (codes & sa0) | (~codes & sa1)
    return int(_popcount16(conflict).sum())
