"""Model-driven convolution dispatch and whole-network evaluation.

A *selector* is anything with ``predict(features) -> ConvMethod``: a trained
tree or naive Bayes model, or :class:`OracleModel`. A *timing source* maps a
layer shape to one :class:`TimingResult` per method.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .backends import BACKENDS, random_tensors
from .dataset import parse_shape, read_dataset
from .errors import AllMethodsFailed, MissingShape, ParseError, UnsupportedShape
from .harness import TimingResult, fastest_method, measure_layer, shape_seed, synthetic_cost
from .shapes import FEATURE_NAMES, ConvMethod, LayerShape

log = logging.getLogger(__name__)

FALLBACK = ConvMethod.GEMM
BUNDLED_NETWORKS = ("mobilenets", "inceptionv3", "gridsample")


class Selector(Protocol):
    def predict(self, features) -> ConvMethod: ...


# ---------------------------------------------------------------- networks


@dataclass(frozen=True)
class NetworkSpec:
    name: str
    layers: tuple[LayerShape, ...]

    def __post_init__(self):
        if not self.layers:
            raise ValueError(f"network {self.name!r} has no layers")


def parse_network(text: str, name: str, path=None) -> NetworkSpec:
    """Parse the ``W,H,C_IN,KERNEL_SIZE,C_OUT`` layer list; ``#`` lines are comments."""
    header_seen = False
    layers = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        row = [v.strip() for v in next(csv.reader([line]))]
        if not header_seen:
            if row != list(FEATURE_NAMES):
                raise ParseError(f"expected header {','.join(FEATURE_NAMES)}", path=path, line=lineno)
            header_seen = True
            continue
        if len(row) != len(FEATURE_NAMES):
            raise ParseError(f"expected {len(FEATURE_NAMES)} fields", path=path, line=lineno)
        layers.append(parse_shape(row, path, lineno))
    if not layers:
        raise ParseError("network has no layers", path=path)
    return NetworkSpec(name, tuple(layers))


def load_network(path_or_name) -> NetworkSpec:
    """Load a network CSV, or one of the bundled networks by name."""
    if str(path_or_name) in BUNDLED_NETWORKS:
        name = str(path_or_name)
        text = resources.files("convsel").joinpath(f"data/networks/{name}.csv").read_text()
        return parse_network(text, name, path=f"<bundled {name}>")
    path = Path(path_or_name)
    return parse_network(path.read_text(), path.stem, path=path)


# ----------------------------------------------------------- timing sources


class SyntheticTiming:
    name = "synthetic"

    def __call__(self, shape: LayerShape) -> tuple[TimingResult, ...]:
        return tuple(synthetic_cost(shape, m) for m in ConvMethod)


class MeasuredTiming:
    name = "measured"

    def __init__(self, reps: int = 5, warmups: int = 1, seed: int = 0):
        self.reps, self.warmups, self.seed = reps, warmups, seed
        self._cache: dict[tuple, tuple[TimingResult, ...]] = {}

    def __call__(self, shape: LayerShape) -> tuple[TimingResult, ...]:
        # repeated layers (and the oracle selector) reuse one measurement
        if shape.key not in self._cache:
            self._cache[shape.key] = tuple(
                measure_layer(shape, m, self.reps, self.warmups, self.seed) for m in ConvMethod
            )
        return self._cache[shape.key]


class RankingTiming:
    """Replay times from a ranking file written by a previous sweep."""

    name = "ranking"

    def __init__(self, path):
        self.path = Path(path)
        self._table = {r.shape.key: r.timings for r in read_dataset(self.path)}

    def __call__(self, shape: LayerShape) -> tuple[TimingResult, ...]:
        try:
            return self._table[shape.key]
        except KeyError:
            raise MissingShape(f"ranking file {self.path} has no entry for shape {shape}") from None


def oracle_choice(timings: Sequence[TimingResult]) -> ConvMethod:
    """The truly fastest method; same rule as the dataset labels."""
    return fastest_method(timings)


class OracleModel:
    """Selector that always picks the fastest method according to ``source``."""

    kind = "oracle"

    def __init__(self, source):
        self.source = source

    def predict(self, features) -> ConvMethod:
        return oracle_choice(self.source(LayerShape.from_features(features)))


# --------------------------------------------------------------- evaluation


@dataclass(frozen=True)
class LayerOutcome:
    index: int
    shape: LayerShape
    predicted: ConvMethod
    executed: ConvMethod
    oracle: ConvMethod
    timings: tuple[TimingResult, ...]

    @property
    def predicted_failed(self) -> bool:
        return not self.timings[self.predicted].ok

    @property
    def predicted_time(self) -> float:
        return self.timings[self.executed].micros

    @property
    def oracle_time(self) -> float:
        return self.timings[self.oracle].micros

    @property
    def correct(self) -> bool:
        return self.executed == self.oracle


@dataclass
class NetworkReport:
    network: str
    timing: str
    outcomes: list[LayerOutcome]
    selector: str = "model"

    @property
    def n_layers(self) -> int:
        return len(self.outcomes)

    def method_total(self, method: ConvMethod) -> float:
        return sum(o.timings[method].micros for o in self.outcomes if o.timings[method].ok)

    def layers_completed(self, method: ConvMethod) -> int:
        return sum(o.timings[method].ok for o in self.outcomes)

    def completes_all(self, method: ConvMethod) -> bool:
        return self.layers_completed(method) == self.n_layers

    @property
    def total_predicted(self) -> float:
        return sum(o.predicted_time for o in self.outcomes)

    @property
    def total_oracle(self) -> float:
        return sum(o.oracle_time for o in self.outcomes)

    @property
    def accuracy(self) -> float:
        return sum(o.correct for o in self.outcomes) / self.n_layers

    @property
    def predicted_failures(self) -> int:
        return sum(o.predicted_failed for o in self.outcomes)

    @property
    def model_selection(self) -> tuple[int, int, int]:
        return _triple(o.predicted for o in self.outcomes)

    @property
    def oracle_selection(self) -> tuple[int, int, int]:
        return _triple(o.oracle for o in self.outcomes)

    def speedup(self, method: ConvMethod) -> float | None:
        """Static ``method`` total over the model total; None if ``method``
        did not complete every layer."""
        if not self.completes_all(method):
            return None
        return self.method_total(method) / self.total_predicted


def _triple(methods) -> tuple[int, int, int]:
    counts = [0, 0, 0]
    for m in methods:
        counts[m] += 1
    return tuple(counts)


def evaluate_network(model: Selector, network: NetworkSpec, source) -> NetworkReport:
    """Predict a method per layer and compare it with the per-layer oracle.

    A prediction the timing source marks as failed is charged the GEMM time,
    mirroring the fallback of :func:`dispatch_convolve`; it counts as correct
    only when GEMM is also the oracle.
    """
    outcomes = []
    for i, shape in enumerate(network.layers):
        predicted = ConvMethod(model.predict(shape.features()))
        timings = tuple(source(shape))
        try:
            oracle = oracle_choice(timings)
        except AllMethodsFailed:
            raise AllMethodsFailed(f"layer {i} {shape}: every method failed") from None
        executed = predicted
        if not timings[predicted].ok:
            if not timings[FALLBACK].ok:
                raise AllMethodsFailed(f"layer {i} {shape}: fallback {FALLBACK.token} failed")
            executed = FALLBACK
        outcomes.append(LayerOutcome(i, shape, predicted, executed, oracle, timings))
    return NetworkReport(network.name, getattr(source, "name", "custom"), outcomes,
                         getattr(model, "kind", "model"))


# ----------------------------------------------------------------- dispatch


@dataclass(frozen=True)
class DispatchEvent:
    shape: LayerShape
    predicted: ConvMethod
    executed: ConvMethod

    @property
    def fell_back(self) -> bool:
        return self.predicted != self.executed


def dispatch_convolve(model: Selector, image, kernels, shape: LayerShape,
                      dispatch_log: list | None = None):
    """Convolve with the backend the model predicts for ``shape``.

    If that backend rejects the shape, GEMM runs instead. Each call appends a
    :class:`DispatchEvent` to ``dispatch_log`` when one is given.
    """
    predicted = ConvMethod(model.predict(shape.features()))
    executed = predicted
    try:
        out = BACKENDS[predicted](image, kernels, shape)
    except UnsupportedShape as exc:
        log.warning("%s rejected %s (%s); falling back to %s",
                    predicted.token, shape, exc, FALLBACK.token)
        executed = FALLBACK
        out = BACKENDS[FALLBACK](image, kernels, shape)
    if dispatch_log is not None:
        dispatch_log.append(DispatchEvent(shape, predicted, executed))
    return out


def convolve_random(model: Selector, shape: LayerShape, seed: int = 0, dispatch_log=None):
    image, kernels = random_tensors(shape, np.random.default_rng(shape_seed(shape, seed)))
    return dispatch_convolve(model, image, kernels, shape, dispatch_log)


# ------------------------------------------------------------------ reports

PLOT_HEADER = ["column", "total_us", "layers_completed", "sel_gemm", "sel_direct", "sel_winograd"]
LAYER_HEADER = [
    "index", *FEATURE_NAMES, "gemm_us", "direct_us", "winograd_us",
    "predicted", "executed", "oracle", "predicted_us", "oracle_us",
]


def _us(value: float) -> str:
    return f"{value:.3f}"


def summary_lines(report: NetworkReport) -> list[str]:
    lines = [
        f"network: {report.network}",
        f"selector: {report.selector}",
        f"timing: {report.timing}",
        f"layers: {report.n_layers}",
        f"accuracy_pct: {100.0 * report.accuracy:.2f}",
    ]
    for m in ConvMethod:
        s = report.speedup(m)
        if s is None:
            lines.append(f"{m.token}: failed")
        else:
            lines.append(f"speedup_vs_{m.token}: {s:.2f}X")
    lines += [
        f"total_model_us: {_us(report.total_predicted)}",
        f"total_oracle_us: {_us(report.total_oracle)}",
        "model_selection: {},{},{}".format(*report.model_selection),
        "oracle_selection: {},{},{}".format(*report.oracle_selection),
        f"predicted_failed_layers: {report.predicted_failures}",
    ]
    return lines


def plot_rows(report: NetworkReport) -> list[list]:
    n = report.n_layers
    rows = []
    for m in ConvMethod:
        triple = [0, 0, 0]
        triple[m] = n
        rows.append([m.token, _us(report.method_total(m)), report.layers_completed(m), *triple])
    rows.append(["model", _us(report.total_predicted), n, *report.model_selection])
    rows.append(["oracle", _us(report.total_oracle), n, *report.oracle_selection])
    return rows


def layer_rows(report: NetworkReport) -> list[list]:
    rows = []
    for o in report.outcomes:
        times = [_us(t.micros) if t.ok else "failed" for t in o.timings]
        rows.append([
            o.index, *o.shape.key, *times, o.predicted.token, o.executed.token,
            o.oracle.token, _us(o.predicted_time), _us(o.oracle_time),
        ])
    return rows


def emit_report(report: NetworkReport, out_dir) -> dict[str, Path]:
    """Write ``summary.txt``, ``plot.csv`` (one row per bar: the three static
    methods, the model and the oracle) and ``layers.csv`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"summary": out / "summary.txt", "plot": out / "plot.csv", "layers": out / "layers.csv"}
    paths["summary"].write_text("\n".join(summary_lines(report)) + "\n")
    for key, header, rows in (
        ("plot", PLOT_HEADER, plot_rows(report)),
        ("layers", LAYER_HEADER, layer_rows(report)),
    ):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        paths[key].write_text(buf.getvalue())
    return paths
