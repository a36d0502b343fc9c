"""End-to-end acceptance gate.

Each test covers one release criterion at its stated tolerance and time
budget and prints a single pass/fail line (run with ``pytest -v -s`` to
see them inline).
"""

import time

import numpy as np
import pytest

from oracle import all_fault_cells, brute_cvm
from safmap.crossbar import ActivationVector, CrossbarConfig, mvm_simulate
from safmap.faults import FaultInjectionSpec, SA1, SafMask, gen_saf_mask, mask_rng, sample_saf_mask
from safmap.harness import (
    SweepSpec,
    bench_lut,
    layer_weight_matrices,
    quantized_baseline_accuracy,
    run_inference,
    run_sweep,
)
from safmap.lut import build_cvm_lut, verify_lut
from safmap.mapping import (
    LayerWeights,
    SCHEME_BITFLIP,
    SCHEME_CVM,
    SCHEME_NAIVE,
    SCHEME_SIGNFLIP,
    SCHEMES,
    build_layout,
    cvm_codes,
    mapping_error,
)
from safmap.numfmt import (
    MODE_TWOS_COMPLEMENT as TWOS,
    MODE_UNSIGNED as UNSIGNED,
    decode,
    decode_table,
    value_range,
)
from safmap.toymodel import make_blob_dataset, quantize_model, quantized_predict, train_toy


def _report(num: int, desc: str, ok: bool, elapsed: float, budget: float) -> None:
    status = "PASS" if ok and elapsed <= budget else "FAIL"
    print(f"[criterion {num}] {status}: {desc} ({elapsed:.1f}s)", flush=True)
    assert ok, f"criterion {num} failed: {desc}"
    assert elapsed <= budget, f"criterion {num} exceeded {budget}s ({elapsed:.1f}s)"


@pytest.fixture(scope="module")
def lut8():
    return build_cvm_lut(8, TWOS)


@pytest.fixture(scope="module")
def model():
    return train_toy(seed=0)


def test_criterion_1_single_weight_reproduction():
    start = time.time()
    layer = LayerWeights.from_values(np.array([[7]]), 4, UNSIGNED)
    cells = np.zeros((1, 1, 4), dtype=np.int8)
    cells[0, 0, 2] = -1  # stuck-at-0 on bit 2
    mask = SafMask(cells)
    naive = build_layout(SCHEME_NAIVE, layer, mask, row_len=1)
    cvm = build_layout(SCHEME_CVM, layer, mask, row_len=1)
    _, naive_err = mapping_error(naive, layer)
    _, cvm_err = mapping_error(cvm, layer)
    ok = (
        naive.stored[0, 0] == 3
        and cvm.stored[0, 0] == 8
        and naive_err == 4
        and cvm_err == 1
    )
    _report(1, "target 7, SA0@bit2: naive stores 3 (err 4), closest-value stores 8 (err 1)",
            ok, time.time() - start, budget=1.0)


def test_criterion_2_cvm_optimality_oracle():
    start = time.time()
    ok = True
    for mode in (UNSIGNED, TWOS):
        dec = decode_table(4, mode)
        for _, cell in all_fault_cells(4):
            sa0 = sum(1 << k for k, s in enumerate(cell) if s == -1)
            sa1 = sum(1 << k for k, s in enumerate(cell) if s == 1)
            targets = dec.astype(np.int64)
            got = cvm_codes(
                targets, np.full(16, sa0), np.full(16, sa1), 4, mode
            )
            for code in range(16):
                _, want_err = brute_cvm(int(targets[code]), cell, 4, mode)
                if abs(decode(int(got[code]), 4, mode) - targets[code]) != want_err:
                    ok = False
    _report(2, "closest-value mapping error equals brute-force minimum "
               "(16 targets x 81 patterns x 2 modes, n=4)",
            ok, time.time() - start, budget=1.0)


def test_criterion_3_lut_equivalence(lut8):
    start = time.time()
    ok = True
    # exhaustive for every width up to 4, both modes
    for bits in range(1, 5):
        for mode in (UNSIGNED, TWOS):
            lut = build_cvm_lut(bits, mode)
            if verify_lut(lut, samples=6**bits * 4, seed=0):
                ok = False
    # >= 1e5 random keys at n=8
    if verify_lut(lut8, samples=120_000, seed=1):
        ok = False
    if verify_lut(build_cvm_lut(8, UNSIGNED), samples=120_000, seed=2):
        ok = False
    _report(3, "table lookups agree with direct mapping (exhaustive n<=4, "
               ">=1e5 random keys at n=8)",
            ok, time.time() - start, budget=30.0)


def test_criterion_4_dominance_invariants(lut8):
    start = time.time()
    rng = np.random.default_rng(100)
    rows, cols = 64, 336  # 1008 (chunk, column) pairs over three rates
    ok = True
    total_cols = 0
    for idx, rate in enumerate((0.01, 0.05, 0.10)):
        layer = LayerWeights(
            rng.integers(0, 256, size=(rows, cols)).astype(np.uint16), 8, TWOS
        )
        mask = gen_saf_mask(FaultInjectionSpec(rate=rate, seed=idx), (rows, cols, 8))
        errs = {
            scheme: mapping_error(
                build_layout(scheme, layer, mask, row_len=64, lut=lut8), layer
            )[0]
            for scheme in SCHEMES
        }
        total_cols += errs[SCHEME_CVM].size
        # per-weight dominance implies per-column; check at column level
        if not (errs[SCHEME_CVM] <= errs[SCHEME_NAIVE]).all():
            ok = False
        if not (errs[SCHEME_SIGNFLIP] <= errs[SCHEME_CVM]).all():
            ok = False
        if not (errs[SCHEME_BITFLIP] <= errs[SCHEME_CVM]).all():
            ok = False
        # per-weight: cvm never worse than naive on any single weight
        cvm_w = np.abs(
            build_layout(SCHEME_CVM, layer, mask, 64, lut=lut8).effective_values()
            - layer.values()
        )
        naive_w = np.abs(
            build_layout(SCHEME_NAIVE, layer, mask, 64, lut=lut8).effective_values()
            - layer.values()
        )
        if not (cvm_w <= naive_w).all():
            ok = False
    ok = ok and total_cols >= 1000
    _report(4, f"error dominance bitflip<=cvm<=naive and signflip<=cvm on "
               f"{total_cols} random columns at rates 1/5/10%",
            ok, time.time() - start, budget=60.0)


def test_criterion_5_simulator_oracle_equivalence():
    start = time.time()
    rng = np.random.default_rng(200)
    instances = 10_000
    ok = True
    for i in range(instances):
        n = int(rng.integers(1, 5))
        mbits = int(rng.integers(1, 5))
        wmode, amode = rng.choice([UNSIGNED, TWOS], size=2)
        scheme = SCHEMES[i % len(SCHEMES)]
        if scheme == SCHEME_SIGNFLIP and wmode == UNSIGNED:
            wmode = TWOS
        rows = int(rng.integers(1, 9))
        cols = int(rng.integers(1, 5))
        row_len = int(rng.integers(1, rows + 1))
        wlo, whi = value_range(n, wmode)
        alo, ahi = value_range(mbits, amode)
        layer = LayerWeights.from_values(
            rng.integers(wlo, whi + 1, size=(rows, cols)), n, wmode
        )
        mask = sample_saf_mask(
            mask_rng(300, i), (rows, cols, n), float(rng.uniform(0, 0.2))
        )
        layout = build_layout(scheme, layer, mask, row_len=row_len)
        cfg = CrossbarConfig(
            row_len=row_len, weight_bits=n, activation_bits=mbits,
            weight_mode=wmode, activation_mode=amode,
        )
        acts = ActivationVector(rng.integers(alo, ahi + 1, size=rows), mbits, amode)
        eff = layout.effective_values()
        want = np.zeros(cols, dtype=np.int64)
        for chunk in layout.geometry.slices():
            want += acts.values[chunk] @ eff[chunk]
        if not np.array_equal(mvm_simulate(layout, acts, cfg), want):
            ok = False
            break
    _report(5, f"bit-level simulation equals exact integer multiply of effective "
               f"weights on {instances} random instances",
            ok, time.time() - start, budget=120.0)


def test_criterion_6_fault_free_identity(model):
    start = time.time()
    ok = True
    rng = np.random.default_rng(400)
    layer = LayerWeights(
        rng.integers(0, 256, size=(40, 10)).astype(np.uint16), 8, TWOS
    )
    clean = SafMask(np.zeros((40, 10, 8), dtype=np.int8))
    for scheme in SCHEMES:
        layout = build_layout(scheme, layer, clean, row_len=16)
        if not np.array_equal(layout.stored, layer.codes):
            ok = False
        if layout.col_flip.any() or layout.b_flip.any():
            ok = False
    # toy model: fault-free crossbar inference == quantized software baseline
    _, _, x_test, y_test = make_blob_dataset(seed=0)
    qmodel = quantize_model(model)
    layers = layer_weight_matrices(qmodel)
    layouts = [
        build_layout(
            SCHEME_CVM, lw, SafMask(np.zeros((lw.rows, lw.cols, 8), dtype=np.int8)), 64
        )
        for lw in layers
    ]
    sim_acc = float((run_inference(qmodel, layouts, x_test) == y_test).mean())
    base_acc = float((quantized_predict(qmodel, x_test) == y_test).mean())
    ok = ok and sim_acc == base_acc
    _report(6, "rate-0 layouts are identity and simulated toy accuracy equals "
               "the quantized software baseline exactly",
            ok, time.time() - start, budget=60.0)


def test_criterion_7_recovery_trend(model):
    start = time.time()
    spec = SweepSpec(
        rates=(0.01, 0.02, 0.03, 0.04, 0.05),
        trials=20,
        base_seed=0,
        row_len=64,
    )
    report = run_sweep(model, spec)
    baseline = quantized_baseline_accuracy(model, spec)
    acc = {(r.rate, r.scheme): r.mean_acc for r in report.results}
    ok = True
    for rate in spec.rates:
        best_corrected = max(acc[rate, SCHEME_SIGNFLIP], acc[rate, SCHEME_BITFLIP])
        if not acc[rate, SCHEME_NAIVE] <= acc[rate, SCHEME_CVM] <= best_corrected:
            ok = False
    cvm_drop = baseline - acc[0.05, SCHEME_CVM]
    bitflip_drop = baseline - acc[0.05, SCHEME_BITFLIP]
    recovery = 1.0 - bitflip_drop / cvm_drop if cvm_drop > 0 else 1.0
    ok = ok and recovery >= 0.5
    _report(7, f"mean accuracy ordering naive<=cvm<=max(signflip,bitflip) at "
               f"1-5% rates; bitflip recovers {recovery:.0%} of cvm's drop at 5%",
            ok, time.time() - start, budget=600.0)


def test_criterion_8_lut_speedup(lut8):
    start = time.time()
    stats = bench_lut(
        rows=512, cols=512, bits=8, rate=0.05, repeats=5, row_len=64, lut=lut8
    )
    bf, sf = stats["bitflip"], stats["signflip"]
    ok = bf["speedup"] >= 5.0 and sf["lut_seconds"] <= 1.1 * sf["direct_seconds"]
    _report(8, f"table-accelerated bit-flip {bf['speedup']:.1f}x faster than "
               f"direct (>=5x required); sign-flip not slower beyond 10%",
            ok, time.time() - start, budget=300.0)


def test_criterion_9_injection_statistics():
    start = time.time()
    rate = 0.05
    faulty = sa1 = total = 0
    for seed in range(120):
        mask = gen_saf_mask(
            FaultInjectionSpec(rate=rate, seed=seed), (64, 64, 8)
        )
        faulty += mask.num_faulty()
        sa1 += int((mask.cells == SA1).sum())
        total += mask.cells.size
    rate_err = abs(faulty / total - rate)
    share_err = abs(sa1 / faulty - 0.5)
    ok = rate_err < 0.002 and share_err < 0.02
    _report(9, f"pooled fault rate off by {rate_err:.4f} (<0.002) and SA1 "
               f"share off by {share_err:.4f} (<0.02) over 120 masks",
            ok, time.time() - start, budget=60.0)
