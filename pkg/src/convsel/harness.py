"""Benchmark sweep: shape grid, per-method timing, fastest-method labels.

Two timing modes exist. *Measured* mode runs the real backends and takes
the median wall-clock time of several repetitions on a monotonic clock.
*Synthetic* mode evaluates a closed-form cost model (``synthetic_cost``)
that stands in for hardware, so the rest of the pipeline can be exercised
deterministically.
"""

from __future__ import annotations

import itertools
import json
import logging
import math
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .backends import BACKENDS, random_tensors
from .errors import AllMethodsFailed, EmptyGrid, ParseError, UnsupportedShape
from .shapes import ConvMethod, LayerShape

log = logging.getLogger(__name__)

DEFAULT_WH = (7, 128, 256)
DEFAULT_C_IN = (3, 32, 64, 128, 256, 384, 512, 768, 1024, 2048)
DEFAULT_K = tuple(range(1, 12))
DEFAULT_C_OUT = (8, 16, 32, 64, 128, 256, 384, 512, 768, 1024)


@dataclass(frozen=True)
class TimingResult:
    method: ConvMethod
    micros: float | None
    ok: bool = True

    def __post_init__(self):
        object.__setattr__(self, "method", ConvMethod(self.method))
        if self.ok:
            if self.micros is None or not math.isfinite(self.micros) or self.micros < 0:
                raise ValueError(f"ok timing needs a finite non-negative time, got {self.micros}")
        elif self.micros is not None:
            raise ValueError("failed timing must not carry a time")

    @classmethod
    def failed(cls, method: ConvMethod) -> "TimingResult":
        return cls(method, None, ok=False)

    @property
    def status(self) -> str:
        return "ok" if self.ok else "failed"


@dataclass(frozen=True)
class BenchmarkRecord:
    shape: LayerShape
    timings: tuple[TimingResult, ...]
    label: ConvMethod
    precision: str = "fp32"

    def timing(self, method: ConvMethod) -> TimingResult:
        return self.timings[int(method)]


@dataclass
class GridConfig:
    widths: Sequence[int] = DEFAULT_WH
    heights: Sequence[int] = DEFAULT_WH
    in_channels: Sequence[int] = DEFAULT_C_IN
    kernel_sizes: Sequence[int] = DEFAULT_K
    out_channels: Sequence[int] = DEFAULT_C_OUT
    repetitions: int = 5
    warmups: int = 1

    _FILE_KEYS = {
        "W": "widths",
        "H": "heights",
        "C_IN": "in_channels",
        "KERNEL_SIZE": "kernel_sizes",
        "C_OUT": "out_channels",
        "repetitions": "repetitions",
        "warmups": "warmups",
    }

    def value_lists(self):
        return (self.widths, self.heights, self.in_channels, self.kernel_sizes, self.out_channels)

    @property
    def size(self) -> int:
        """Number of parameter combinations, feasible or not."""
        return math.prod(len(v) for v in self.value_lists())

    @classmethod
    def from_file(cls, path) -> "GridConfig":
        """Load a JSON object with any of the keys W, H, C_IN, KERNEL_SIZE,
        C_OUT (integer lists), repetitions, warmups. Missing keys keep their
        defaults."""
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, path=path, line=exc.lineno) from None
        if not isinstance(raw, dict):
            raise ParseError("grid file must hold a JSON object", path=path)
        kwargs = {}
        for key, value in raw.items():
            if key not in cls._FILE_KEYS:
                raise ParseError(f"unknown grid key {key!r}", path=path)
            attr = cls._FILE_KEYS[key]
            if attr in ("repetitions", "warmups"):
                if not isinstance(value, int):
                    raise ParseError(f"{key} must be an integer", path=path)
            elif not isinstance(value, list) or not all(isinstance(v, int) for v in value):
                raise ParseError(f"{key} must be a list of integers", path=path)
            kwargs[attr] = tuple(value) if isinstance(value, list) else value
        return cls(**kwargs)


def generate_shape_grid(config: GridConfig) -> list[LayerShape]:
    """Cartesian product of the value lists, W outermost and C_OUT innermost.

    Combinations whose kernel is larger than the padded input (no output
    pixel) are not valid layer shapes and are left out; everything else is
    kept in product order, duplicates in the value lists collapsed.
    """
    lists = config.value_lists()
    if any(len(values) == 0 for values in lists):
        raise EmptyGrid("every grid value list needs at least one value")
    if config.repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    lists = [list(dict.fromkeys(values)) for values in lists]
    shapes = []
    skipped = 0
    for w, h, c_in, k, c_out in itertools.product(*lists):
        if not LayerShape.is_feasible(w, h, k):
            skipped += 1
            continue
        shapes.append(LayerShape(w, h, c_in, k, c_out))
    if skipped:
        log.info("skipped %d grid combinations with no output pixels", skipped)
    if not shapes:
        raise EmptyGrid("no feasible shape in the grid")
    return shapes


def shape_seed(shape: LayerShape, seed: int = 0) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, *shape.key])


def measure_layer(
    shape: LayerShape, method: ConvMethod, reps: int = 5, warmups: int = 1, seed: int = 0
) -> TimingResult:
    """Time one backend on one shape: median of ``reps`` runs, in microseconds."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    method = ConvMethod(method)
    backend = BACKENDS[method]
    image, kernels = random_tensors(shape, np.random.default_rng(shape_seed(shape, seed)))
    samples = []
    try:
        for _ in range(warmups):
            backend(image, kernels, shape)
        for _ in range(reps):
            start = time.perf_counter_ns()
            backend(image, kernels, shape)
            samples.append((time.perf_counter_ns() - start) / 1000.0)
    except UnsupportedShape:
        return TimingResult.failed(method)
    return TimingResult(method, float(statistics.median(samples)))


# Synthetic cost model constants. Times in microseconds.
GEMM_FLOPS_PER_US = 2.0e4  # sustained GEMM throughput (20 GFLOP/s)
DIRECT_FLOPS_PER_US = GEMM_FLOPS_PER_US / 3.0
TRANSFORM_FLOPS_PER_US = GEMM_FLOPS_PER_US / 4.0  # Winograd transforms are memory bound
IM2COL_US_PER_ELEMENT = 4.0e-3  # cost of writing one column-matrix element
LAUNCH_US = {ConvMethod.GEMM: 40.0, ConvMethod.DIRECT: 20.0, ConvMethod.WINOGRAD: 60.0}
WINOGRAD_INPUT_TRANSFORM_FLOPS = 32  # B^T d B per 4x4 tile and input channel
WINOGRAD_OUTPUT_TRANSFORM_FLOPS = 24  # A^T m A per tile and output channel
WINOGRAD_KERNEL_TRANSFORM_FLOPS = 28  # G g G^T per filter and input channel


def synthetic_cost(shape: LayerShape, method: ConvMethod) -> TimingResult:
    """Closed-form stand-in for a hardware measurement.

    With ``P = H_out * W_out`` output pixels and ``F = 2 * C_OUT * C_IN * K^2 * P``:

    * gemm:     ``40 + 4e-3 * C_IN * K^2 * P + F / 2e4``
      (launches for im2col and GEMM, column-matrix writes, GEMM flops)
    * direct:   ``20 + F / (2e4 / 3)``
      (one launch, same flops at a third of the GEMM rate)
    * winograd: ``60 + (32 * C_IN * T + 24 * C_OUT * T + 28 * C_OUT * C_IN) / (2e4 / 4)
      + 32 * C_OUT * C_IN * T / 2e4`` with ``T = ceil(H_out/2) * ceil(W_out/2)`` tiles;
      fails unless K = 3.
    """
    method = ConvMethod(method)
    k = shape.kernel_size
    pixels = shape.out_height * shape.out_width
    flops = shape.flops
    if method is ConvMethod.GEMM:
        micros = (
            LAUNCH_US[method]
            + IM2COL_US_PER_ELEMENT * shape.in_channels * k * k * pixels
            + flops / GEMM_FLOPS_PER_US
        )
    elif method is ConvMethod.DIRECT:
        micros = LAUNCH_US[method] + flops / DIRECT_FLOPS_PER_US
    else:
        if k != 3 or shape.stride != 1:
            return TimingResult.failed(method)
        tiles = -(-shape.out_height // 2) * -(-shape.out_width // 2)
        c_in, c_out = shape.in_channels, shape.out_channels
        transforms = (
            WINOGRAD_INPUT_TRANSFORM_FLOPS * c_in * tiles
            + WINOGRAD_OUTPUT_TRANSFORM_FLOPS * c_out * tiles
            + WINOGRAD_KERNEL_TRANSFORM_FLOPS * c_out * c_in
        )
        products = 2 * 16 * c_out * c_in * tiles
        micros = (
            LAUNCH_US[method]
            + transforms / TRANSFORM_FLOPS_PER_US
            + products / GEMM_FLOPS_PER_US
        )
    return TimingResult(method, float(micros))


def fastest_method(timings: Iterable[TimingResult]) -> ConvMethod:
    """Argmin over OK timings; ties go to the lowest method code."""
    best = None
    for t in timings:
        if not t.ok:
            continue
        if best is None or t.micros < best.micros or (
            t.micros == best.micros and t.method < best.method
        ):
            best = t
    if best is None:
        raise AllMethodsFailed("no convolution method completed")
    return best.method


def label_record(shape: LayerShape, timings: Sequence[TimingResult]) -> BenchmarkRecord:
    by_method = {t.method: t for t in timings}
    if len(timings) != len(ConvMethod) or set(by_method) != set(ConvMethod):
        raise ValueError("need exactly one timing per method")
    ordered = tuple(by_method[m] for m in ConvMethod)
    try:
        label = fastest_method(ordered)
    except AllMethodsFailed:
        raise AllMethodsFailed(f"every method failed on shape {shape}") from None
    return BenchmarkRecord(shape, ordered, label)


def run_sweep(
    shapes: Iterable[LayerShape],
    *,
    synthetic: bool = False,
    reps: int = 5,
    warmups: int = 1,
    max_flops: float | None = None,
    seed: int = 0,
) -> list[BenchmarkRecord]:
    """Benchmark every method on every shape, one measurement at a time.

    Shapes above ``max_flops`` are skipped.
    """
    records = []
    skipped = 0
    for shape in shapes:
        if max_flops is not None and shape.flops > max_flops:
            skipped += 1
            continue
        if synthetic:
            timings = [synthetic_cost(shape, m) for m in ConvMethod]
        else:
            timings = [measure_layer(shape, m, reps, warmups, seed) for m in ConvMethod]
            log.debug("measured %s: %s", shape, [t.micros for t in timings])
        records.append(label_record(shape, timings))
    if skipped:
        log.info("skipped %d shapes above the flop budget %g", skipped, max_flops)
    return records
