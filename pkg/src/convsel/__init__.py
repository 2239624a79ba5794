"""Learned runtime selection between convolution algorithms."""

from .backends import direct_conv, gemm, im2col, im2col_gemm_conv, winograd_conv
from .dataset import read_dataset, read_features, write_dataset
from .dispatch import (
    NetworkReport,
    NetworkSpec,
    OracleModel,
    dispatch_convolve,
    emit_report,
    evaluate_network,
    load_network,
    oracle_choice,
)
from .harness import (
    BenchmarkRecord,
    GridConfig,
    TimingResult,
    generate_shape_grid,
    label_record,
    measure_layer,
    run_sweep,
    synthetic_cost,
)
from .shapes import ConvMethod, LayerShape

__version__ = "0.1.0"
