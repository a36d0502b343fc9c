"""Bit-exact functional model of bit-sliced, bit-streamed in-memory MVM.

Weights live as one-bit planes across ``bits`` crossbar slices; an m-bit
activation is applied as m sequential binary cycles.  Each (slice k,
stream l, chunk, column) partial sum counts active (1, 1) pairs.  Digital
corrections are modeled functionally:

* bit-flip: a flipped slice contributes ``sum(a_bits) - partial`` (the
  activation-bit sum is computed once per chunk and stream and shared
  across columns), applied BEFORE shift-and-add;
* sign-flip: the accumulated column output of a flipped chunk/column is
  negated AFTER shift-and-add.

Shift-and-add weights each partial by ``2**(k+l)``; with two's-complement
operands the terms where exactly one of (k, l) is the sign bit enter
negatively and the sign-sign term positively.

All arithmetic is exact integer math: ADC quantization, parasitics and
partial-wordline-activation effects are out of the fidelity boundary.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import numfmt
from .mapping import MappedLayout, SCHEME_BITFLIP, SCHEME_SIGNFLIP
from .numfmt import MODE_TWOS_COMPLEMENT, MODE_UNSIGNED


class DimensionMismatchError(ValueError):
    """Layout, activation and configuration shapes disagree."""


@dataclass(frozen=True)
class CrossbarConfig:
    """Geometry and precision of the simulated arrays."""

    row_len: int = 64
    weight_bits: int = 8
    activation_bits: int = 8
    weight_mode: str = MODE_TWOS_COMPLEMENT
    activation_mode: str = MODE_UNSIGNED

    def __post_init__(self) -> None:
        numfmt.check_width(self.weight_bits)
        numfmt.check_width(self.activation_bits)
        numfmt.check_mode(self.weight_mode)
        numfmt.check_mode(self.activation_mode)
        if self.row_len < 1:
            raise ValueError("row_len must be >= 1")


@dataclass(frozen=True)
class ActivationVector:
    """Decoded activation values plus their streaming precision."""

    values: np.ndarray  # int64, shape (M,)
    bits: int
    mode: str

    def __post_init__(self) -> None:
        numfmt.check_width(self.bits)
        numfmt.check_mode(self.mode)
        values = np.asarray(self.values, dtype=np.int64)
        lo, hi = numfmt.value_range(self.bits, self.mode)
        if values.size and (values.min() < lo or values.max() > hi):
            raise numfmt.OutOfRangeError(
                f"activation outside [{lo}, {hi}] for {self.bits}-bit {self.mode}"
            )
        object.__setattr__(self, "values", values)

    def codes(self) -> np.ndarray:
        return numfmt.encode_array(self.values, self.bits, self.mode)

    def to_json_dict(self) -> dict:
        return {"m": self.bits, "mode": self.mode, "values": self.values.tolist()}

    @classmethod
    def from_json_dict(cls, obj: dict) -> "ActivationVector":
        return cls(
            values=np.asarray(obj["values"], dtype=np.int64),
            bits=obj["m"],
            mode=obj["mode"],
        )

    @classmethod
    def load(cls, path: str | Path) -> "ActivationVector":
        return cls.from_json_dict(json.loads(Path(path).read_text()))


def mvm_exact(weights: np.ndarray, activations: np.ndarray) -> np.ndarray:
    """Ground-truth integer product a @ W on decoded values."""
    weights = np.asarray(weights, dtype=np.int64)
    activations = np.asarray(activations, dtype=np.int64)
    if weights.ndim != 2 or activations.shape[-1] != weights.shape[0]:
        raise DimensionMismatchError(
            f"cannot multiply activations {activations.shape} with "
            f"weights {weights.shape}"
        )
    return activations @ weights


def _term_signs(bits: int, mode: str) -> np.ndarray:
    """Per-slice sign of the shift-and-add contribution (+1/-1)."""
    signs = np.ones(bits, dtype=np.int64)
    if mode == MODE_TWOS_COMPLEMENT:
        signs[bits - 1] = -1
    return signs


def reconstruct(
    partials: np.ndarray,
    cfg: CrossbarConfig,
    flipped_slices: np.ndarray | None = None,
    activation_bit_sums: np.ndarray | None = None,
) -> int:
    """Shift-and-add one (chunk, column) group of raw partial sums.

    ``partials[k, l]`` counts active pairs of weight slice k and activation
    stream l.  If ``flipped_slices[k]`` is set, the slice's partials are
    first corrected to ``activation_bit_sums[l] - partials[k, l]``.
    """
    partials = np.asarray(partials, dtype=np.int64)
    n, m = cfg.weight_bits, cfg.activation_bits
    if partials.shape != (n, m):
        raise DimensionMismatchError(
            f"expected partials of shape {(n, m)}, got {partials.shape}"
        )
    if flipped_slices is not None and np.any(flipped_slices):
        if activation_bit_sums is None:
            raise ValueError("bit-flip correction requires activation bit sums")
        corrected = np.where(
            np.asarray(flipped_slices, dtype=bool)[:, None],
            np.asarray(activation_bit_sums, dtype=np.int64)[None, :] - partials,
            partials,
        )
    else:
        corrected = partials
    wk = _term_signs(n, cfg.weight_mode) * (1 << np.arange(n, dtype=np.int64))
    al = _term_signs(m, cfg.activation_mode) * (1 << np.arange(m, dtype=np.int64))
    return int((corrected * wk[:, None] * al[None, :]).sum())


def _bit_planes(codes: np.ndarray, bits: int) -> np.ndarray:
    """(bits, ...) array of the 0/1 planes of an integer code array."""
    codes = np.asarray(codes, dtype=np.int64)
    k = np.arange(bits, dtype=np.int64).reshape((bits,) + (1,) * codes.ndim)
    return (codes[None, ...] >> k) & 1


def mvm_simulate_batch(
    layout: MappedLayout, act_codes: np.ndarray, cfg: CrossbarConfig
) -> np.ndarray:
    """Simulate a batch of activation vectors; ``act_codes`` is (B, M) raw
    m-bit patterns.  Returns (B, K) integer outputs."""
    act_codes = np.asarray(act_codes, dtype=np.int64)
    if act_codes.ndim != 2 or act_codes.shape[1] != layout.rows:
        raise DimensionMismatchError(
            f"activation batch {act_codes.shape} does not match "
            f"{layout.rows} layout rows"
        )
    if layout.bits != cfg.weight_bits or layout.mode != cfg.weight_mode:
        raise DimensionMismatchError("layout precision does not match config")
    if layout.row_len != cfg.row_len:
        raise DimensionMismatchError("layout row_len does not match config")

    n, m = cfg.weight_bits, cfg.activation_bits
    w_planes = _bit_planes(layout.stored, n)  # (n, M, K)
    a_planes = _bit_planes(act_codes, m)  # (m, B, M)
    wk = _term_signs(n, cfg.weight_mode) * (1 << np.arange(n, dtype=np.int64))
    al = _term_signs(m, cfg.activation_mode) * (1 << np.arange(m, dtype=np.int64))

    total = np.zeros((act_codes.shape[0], layout.cols), dtype=np.int64)
    for c, rows in enumerate(layout.geometry.slices()):
        flips = layout.b_flip[:, c, :].astype(bool)  # (n, K)
        chunk_out = np.zeros_like(total)
        for l in range(m):
            a_bits = a_planes[l][:, rows]  # (B, rows)
            sum_i = a_bits.sum(axis=1)  # shared adder tree, per stream
            for k in range(n):
                partial = a_bits @ w_planes[k][rows]  # (B, K)
                if flips[k].any():
                    partial = np.where(
                        flips[k][None, :], sum_i[:, None] - partial, partial
                    )
                chunk_out += (wk[k] * al[l]) * partial
        if layout.scheme == SCHEME_SIGNFLIP:
            negate = layout.col_flip[c].astype(bool)
            chunk_out[:, negate] = -chunk_out[:, negate]
        total += chunk_out
    return total


def mvm_simulate(
    layout: MappedLayout, activations: ActivationVector, cfg: CrossbarConfig
) -> np.ndarray:
    """Simulate one activation vector through the mapped layer."""
    if activations.bits != cfg.activation_bits or activations.mode != cfg.activation_mode:
        raise DimensionMismatchError("activation precision does not match config")
    codes = activations.codes().astype(np.int64)[None, :]
    return mvm_simulate_batch(layout, codes, cfg)[0]
