"""Monte Carlo fault-injection sweeps and the LUT runtime benchmark.

Each trial draws one stuck-at mask per layer from the stream derived
from ``(base_seed, trial, layer)``; every scheme is mapped against the
SAME masks (paired comparison), so the deterministic per-column error
dominance of the mapping schemes carries over to per-trial totals.
Accuracy ordering across schemes is a statistical statement about the
trial means only.
"""

from __future__ import annotations

import csv
import io
import json
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .crossbar import CrossbarConfig, mvm_simulate_batch
from .faults import SafMask, count_unmasked, mask_rng, sample_saf_mask
from .lut import CvmLut, build_cvm_lut
from .mapping import (
    LayerWeights,
    MappedLayout,
    SCHEMES,
    build_layout,
    sign_flip_map,
    bit_flip_map,
)
from .numfmt import MODE_TWOS_COMPLEMENT, encode_array
from .quant import quantize
from .toymodel import QuantizedModel, ToyModel, make_blob_dataset, quantize_model

REPORT_COLUMNS = (
    "rate",
    "scheme",
    "trials",
    "mean_acc",
    "std_acc",
    "mean_abs_weight_err",
    "mean_unmasked_faults",
    "map_seconds",
)


@dataclass(frozen=True)
class SweepSpec:
    """Monte Carlo sweep configuration."""

    rates: tuple[float, ...] = (0.0, 0.01, 0.02, 0.03, 0.04, 0.05)
    trials: int = 50
    schemes: tuple[str, ...] = SCHEMES
    base_seed: int = 0
    sa1_fraction: float = 0.5
    row_len: int = 64
    weight_bits: int = 8
    act_bits: int = 8
    jobs: int = 1

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if any(not 0.0 <= r <= 1.0 for r in self.rates):
            raise ValueError("rates must lie in [0, 1]")
        unknown = set(self.schemes) - set(SCHEMES)
        if unknown:
            raise ValueError(f"unknown schemes: {sorted(unknown)}")


@dataclass
class ResultRow:
    rate: float
    scheme: str
    trials: int
    mean_acc: float
    std_acc: float
    mean_abs_weight_err: float
    mean_unmasked_faults: float
    map_seconds: float


@dataclass
class EvalReport:
    config: dict
    results: list[ResultRow]

    def to_json_dict(self) -> dict:
        return {"config": self.config, "results": [asdict(r) for r in self.results]}

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for row in self.results:
            d = asdict(row)
            writer.writerow([d[c] for c in REPORT_COLUMNS])
        return buf.getvalue()

    def save(self, json_path: str | Path, csv_path: str | Path | None = None) -> None:
        Path(json_path).write_text(json.dumps(self.to_json_dict(), indent=2))
        if csv_path is not None:
            Path(csv_path).write_text(self.to_csv())


def layer_weight_matrices(qmodel: QuantizedModel) -> list[LayerWeights]:
    """Ideal weight code matrices of every layer."""
    return [
        LayerWeights(
            encode_array(ql.weights.codes, ql.weights.bits, ql.weights.mode),
            ql.weights.bits,
            ql.weights.mode,
        )
        for ql in qmodel.layers
    ]


def run_inference(
    qmodel: QuantizedModel,
    layouts: list[MappedLayout],
    x: np.ndarray,
    row_len: int = 64,
) -> np.ndarray:
    """Integer inference with every matrix product routed through the
    crossbar simulator; inter-layer rescaling uses the product of weight
    and activation scales."""
    if len(layouts) != len(qmodel.layers):
        raise ValueError("one layout per layer required")
    for ql, layout in zip(qmodel.layers, layouts):
        cfg = CrossbarConfig(
            row_len=row_len,
            weight_bits=ql.weights.bits,
            activation_bits=ql.act_bits,
            weight_mode=ql.weights.mode,
            activation_mode=ql.act_mode,
        )
        aq = quantize(x, ql.act_bits, ql.act_mode)
        act_codes = encode_array(aq.codes, ql.act_bits, ql.act_mode)
        y_int = mvm_simulate_batch(layout, act_codes, cfg)
        x = y_int.astype(np.float64) * (aq.scale * ql.weights.scale) + ql.bias
        if ql.relu:
            x = np.maximum(x, 0.0)
    return x.argmax(axis=1)


def trial_masks(
    spec: SweepSpec, trial: int, shapes: list[tuple[int, int, int]], rate: float
) -> list[SafMask]:
    """One mask per layer for a given trial, from independent substreams."""
    return [
        sample_saf_mask(
            mask_rng(spec.base_seed, trial, layer_idx),
            shape,
            rate,
            spec.sa1_fraction,
        )
        for layer_idx, shape in enumerate(shapes)
    ]


def run_sweep(model: ToyModel, spec: SweepSpec, dataset_seed: int = 0) -> EvalReport:
    """Paired Monte Carlo sweep over (fault rate, scheme)."""
    _, _, x_test, y_test = make_blob_dataset(dataset_seed)
    qmodel = quantize_model(model, spec.weight_bits, spec.act_bits)
    layers = layer_weight_matrices(qmodel)
    shapes = [(lw.rows, lw.cols, lw.bits) for lw in layers]
    targets = [lw.values() for lw in layers]
    total_weights = sum(t.size for t in targets)
    total_cells = sum(r * c * b for r, c, b in shapes)
    lut = build_cvm_lut(spec.weight_bits, MODE_TWOS_COMPLEMENT)

    def one_trial(rate: float, trial: int) -> dict:
        masks = trial_masks(spec, trial, shapes, rate)
        unmasked = sum(
            count_unmasked(lw.codes, mask) for lw, mask in zip(layers, masks)
        )
        out = {}
        for scheme in spec.schemes:
            start = time.perf_counter()
            layouts = [
                build_layout(scheme, lw, mask, spec.row_len, lut=lut)
                for lw, mask in zip(layers, masks)
            ]
            map_seconds = time.perf_counter() - start
            abs_err = sum(
                int(np.abs(layout.effective_values() - target).sum())
                for layout, target in zip(layouts, targets)
            )
            labels = run_inference(qmodel, layouts, x_test, spec.row_len)
            out[scheme] = {
                "acc": float((labels == y_test).mean()),
                "abs_err": abs_err / total_weights,
                "unmasked": unmasked,
                "map_seconds": map_seconds,
            }
        return out

    results: list[ResultRow] = []
    for rate in spec.rates:
        if spec.jobs > 1:
            with ThreadPoolExecutor(max_workers=spec.jobs) as pool:
                trials = list(
                    pool.map(lambda t: one_trial(rate, t), range(spec.trials))
                )
        else:
            trials = [one_trial(rate, t) for t in range(spec.trials)]
        for scheme in spec.schemes:
            accs = [t[scheme]["acc"] for t in trials]
            results.append(
                ResultRow(
                    rate=rate,
                    scheme=scheme,
                    trials=spec.trials,
                    mean_acc=float(np.mean(accs)),
                    std_acc=float(np.std(accs)),
                    mean_abs_weight_err=float(
                        np.mean([t[scheme]["abs_err"] for t in trials])
                    ),
                    mean_unmasked_faults=float(
                        np.mean([t[scheme]["unmasked"] for t in trials])
                    ),
                    map_seconds=float(
                        np.mean([t[scheme]["map_seconds"] for t in trials])
                    ),
                )
            )

    config = {
        "rates": list(spec.rates),
        "trials": spec.trials,
        "schemes": list(spec.schemes),
        "base_seed": spec.base_seed,
        "sa1_fraction": spec.sa1_fraction,
        "row_len": spec.row_len,
        "weight_bits": spec.weight_bits,
        "act_bits": spec.act_bits,
        "total_cells": total_cells,
        "test_points": int(x_test.shape[0]),
    }
    return EvalReport(config=config, results=results)


def quantized_baseline_accuracy(model: ToyModel, spec: SweepSpec, dataset_seed: int = 0) -> float:
    """Accuracy of fault-free integer inference (the rate-0 reference)."""
    from .toymodel import quantized_predict

    _, _, x_test, y_test = make_blob_dataset(dataset_seed)
    qmodel = quantize_model(model, spec.weight_bits, spec.act_bits)
    return float((quantized_predict(qmodel, x_test) == y_test).mean())


def bench_lut(
    rows: int = 512,
    cols: int = 512,
    bits: int = 8,
    rate: float = 0.05,
    repeats: int = 5,
    row_len: int = 64,
    seed: int = 0,
    lut: CvmLut | None = None,
) -> dict:
    """Median wall-clock of sign-flip and bit-flip with and without the
    precomputed table, on identical inputs."""
    rng = mask_rng(seed, 0xBE7C)
    codes = rng.integers(0, 1 << bits, size=(rows, cols)).astype(np.uint16)
    layer = LayerWeights(codes, bits, MODE_TWOS_COMPLEMENT)
    mask = sample_saf_mask(mask_rng(seed, 0xBE7C, 1), (rows, cols, bits), rate)
    if lut is None:
        lut = build_cvm_lut(bits, MODE_TWOS_COMPLEMENT)

    runners = {
        "signflip": lambda l: sign_flip_map(layer, mask, row_len, lut=l),
        "bitflip": lambda l: bit_flip_map(layer, mask, row_len, lut=l),
    }
    out = {}
    for scheme, run in runners.items():
        direct_times = []
        lut_times = []
        ref = fast = None
        for _ in range(repeats):
            start = time.perf_counter()
            ref = run(None)
            direct_times.append(time.perf_counter() - start)
            start = time.perf_counter()
            fast = run(lut)
            lut_times.append(time.perf_counter() - start)
        if not all(np.array_equal(a, b) for a, b in zip(ref, fast)):
            raise AssertionError(f"{scheme}: LUT and direct layouts differ")
        direct = statistics.median(direct_times)
        fast_t = statistics.median(lut_times)
        out[scheme] = {
            "direct_seconds": direct,
            "lut_seconds": fast_t,
            "speedup": direct / fast_t if fast_t > 0 else float("inf"),
        }
    return out
