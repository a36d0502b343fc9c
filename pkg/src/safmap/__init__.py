"""Stuck-at-fault aware weight mapping for bit-sliced compute-in-memory
crossbars: closest-value mapping, sign-flip and bit-flip transformations,
a precomputed mapping table, a bit-exact functional crossbar simulator
and a Monte Carlo evaluation harness."""

__version__ = "0.1.0"

from .crossbar import (
    ActivationVector,
    CrossbarConfig,
    DimensionMismatchError,
    mvm_exact,
    mvm_simulate,
    mvm_simulate_batch,
    reconstruct,
)
from .faults import (
    FAULT_FREE,
    SA0,
    SA1,
    FaultInjectionSpec,
    InvalidRateError,
    SafMask,
    count_unmasked,
    force_write,
    gen_saf_mask,
    is_legal,
    transform_mask_for_flip,
)
from .harness import EvalReport, SweepSpec, bench_lut, run_inference, run_sweep
from .lut import CvmLut, build_cvm_lut, cvm_lookup, load_or_build, read_lut, write_lut
from .mapping import (
    ChunkGeometry,
    LayerWeights,
    MappedLayout,
    SCHEMES,
    UnsignedLayerError,
    bit_flip_map,
    build_layout,
    cvm_map,
    mapping_error,
    naive_map,
    sign_flip_map,
)
from .numfmt import (
    MODE_TWOS_COMPLEMENT,
    MODE_UNSIGNED,
    CodeWord,
    DecodedValue,
    OutOfRangeError,
    bit_slice,
    clamp_to_range,
    decode,
    encode,
    xor_mask,
)
from .quant import NonFiniteError, QuantizedTensor, dequantize, quantize
from .toymodel import ToyModel, TrainingDivergedError, make_blob_dataset, train_toy
