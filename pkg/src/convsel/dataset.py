"""Dataset files written by a benchmark sweep.

A dataset directory holds three files describing the same records:

``features.csv``
    ``W,H,C_IN,KERNEL_SIZE,C_OUT,PRECISION,LABEL``, the trainer input.
``features.arff``
    The same rows as an ARFF relation, for Weka-style tools.
``ranking.csv``
    ``W,H,C_IN,KERNEL_SIZE,C_OUT,gemm_us,gemm_status,direct_us,...``; one
    time and status per method, empty time when the status is ``failed``.

Times are written with ``repr`` so that a write/read round trip is exact.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import AllMethodsFailed, InvalidShape, ParseError
from .harness import BenchmarkRecord, TimingResult, label_record
from .shapes import FEATURE_NAMES, METHOD_TOKENS, ConvMethod, LayerShape

FEATURES_CSV = "features.csv"
FEATURES_ARFF = "features.arff"
RANKING_CSV = "ranking.csv"

FEATURES_HEADER = [*FEATURE_NAMES, "PRECISION", "LABEL"]
RANKING_HEADER = [*FEATURE_NAMES] + [
    f"{m}_{suffix}" for m in METHOD_TOKENS for suffix in ("us", "status")
]
PRECISIONS = ("fp32",)
ARFF_RELATION = "convsel"


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def features_rows(records):
    for r in records:
        yield [*r.shape.key, r.precision, r.label.token]


def ranking_rows(records):
    for r in records:
        row = list(r.shape.key)
        for t in r.timings:
            row += [repr(t.micros) if t.ok else "", t.status]
        yield row


def arff_text(records) -> str:
    lines = [f"@relation {ARFF_RELATION}", ""]
    lines += [f"@attribute {name} numeric" for name in FEATURE_NAMES]
    lines.append("@attribute PRECISION {" + ",".join(PRECISIONS) + "}")
    lines.append("@attribute LABEL {" + ",".join(METHOD_TOKENS) + "}")
    lines += ["", "@data"]
    lines += [",".join(str(v) for v in row) for row in features_rows(records)]
    return "\n".join(lines) + "\n"


def write_dataset(records: Sequence[BenchmarkRecord], out_dir) -> dict[str, Path]:
    """Write the three dataset files into ``out_dir`` and return their paths."""
    if not records:
        raise ValueError("refusing to write an empty dataset")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "features": out / FEATURES_CSV,
        "arff": out / FEATURES_ARFF,
        "ranking": out / RANKING_CSV,
    }
    paths["features"].write_text(_csv_text(FEATURES_HEADER, features_rows(records)))
    paths["arff"].write_text(arff_text(records))
    paths["ranking"].write_text(_csv_text(RANKING_HEADER, ranking_rows(records)))
    return paths


def parse_shape(values, path, lineno) -> LayerShape:
    try:
        ints = [int(v) for v in values]
    except ValueError:
        raise ParseError(f"non-integer shape field in {values}", path=path, line=lineno) from None
    try:
        return LayerShape(*ints)
    except InvalidShape as exc:
        raise ParseError(str(exc), path=path, line=lineno) from None


def _parse_method(token, path, lineno) -> ConvMethod:
    try:
        return ConvMethod.from_token(token)
    except ValueError:
        raise ParseError(f"unknown class token {token!r}", path=path, line=lineno) from None


def _read_csv(path, header):
    """Yield (line number, row) for data rows after checking the header."""
    path = Path(path)
    text = path.read_text()
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ParseError("empty file", path=path, line=1)
    if [h.strip() for h in rows[0]] != header:
        raise ParseError(f"expected header {','.join(header)}", path=path, line=1)
    data = [(i + 2, row) for i, row in enumerate(rows[1:]) if row]
    if not data:
        raise ParseError("no data rows", path=path, line=2)
    for lineno, row in data:
        if len(row) != len(header):
            raise ParseError(
                f"expected {len(header)} fields, got {len(row)}", path=path, line=lineno
            )
        yield lineno, [v.strip() for v in row]


def read_ranking(path) -> list[BenchmarkRecord]:
    records = []
    for lineno, row in _read_csv(path, RANKING_HEADER):
        shape = parse_shape(row[:5], path, lineno)
        timings = []
        for m, (us, status) in zip(ConvMethod, zip(row[5::2], row[6::2])):
            if status == "ok":
                try:
                    timings.append(TimingResult(m, float(us)))
                except ValueError:
                    raise ParseError(f"bad {m.token} time {us!r}", path=path, line=lineno) from None
            elif status == "failed":
                if us:
                    raise ParseError(f"failed {m.token} run carries a time", path=path, line=lineno)
                timings.append(TimingResult.failed(m))
            else:
                raise ParseError(f"unknown status token {status!r}", path=path, line=lineno)
        try:
            records.append(label_record(shape, timings))
        except AllMethodsFailed as exc:
            raise ParseError(str(exc), path=path, line=lineno) from None
    return records


def read_dataset(path) -> list[BenchmarkRecord]:
    """Read records back from a dataset directory or its ranking CSV.

    Labels are re-derived from the timings. For a directory, the labels in
    ``features.csv`` must agree with them.
    """
    path = Path(path)
    if path.is_dir():
        records = read_ranking(path / RANKING_CSV)
        features = path / FEATURES_CSV
        if features.exists():
            X, y, precision = read_features_csv(features, with_precision=True)
            if len(y) != len(records):
                raise ParseError("features and ranking files differ in length", path=features)
            for i, (r, label) in enumerate(zip(records, y)):
                if tuple(int(v) for v in X[i]) != r.shape.key:
                    raise ParseError("shape differs from ranking file", path=features, line=i + 2)
                if label != r.label:
                    raise ParseError("label disagrees with ranking times", path=features, line=i + 2)
            records = [
                BenchmarkRecord(r.shape, r.timings, r.label, p) for r, p in zip(records, precision)
            ]
        return records
    return read_ranking(path)


def read_features_csv(path, with_precision=False):
    X, y, precision = [], [], []
    for lineno, row in _read_csv(path, FEATURES_HEADER):
        shape = parse_shape(row[:5], path, lineno)
        if row[5] not in PRECISIONS:
            raise ParseError(f"unsupported precision {row[5]!r}", path=path, line=lineno)
        X.append(shape.features())
        y.append(int(_parse_method(row[6], path, lineno)))
        precision.append(row[5])
    X, y = np.array(X), np.array(y, dtype=np.int64)
    return (X, y, precision) if with_precision else (X, y)


def read_features_arff(path):
    """Read the ARFF subset that ``write_dataset`` produces."""
    path = Path(path)
    lines = path.read_text().splitlines()
    if not any(line.strip() for line in lines):
        raise ParseError("empty file", path=path, line=1)
    attributes = []
    in_data = False
    X, y = [], []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        low = line.lower()
        if not in_data:
            if low.startswith("@relation"):
                continue
            if low.startswith("@attribute"):
                parts = line.split(None, 2)
                if len(parts) != 3:
                    raise ParseError("malformed @attribute", path=path, line=lineno)
                attributes.append(parts[1])
                continue
            if low == "@data":
                if attributes != FEATURES_HEADER:
                    raise ParseError(
                        f"expected attributes {','.join(FEATURES_HEADER)}", path=path, line=lineno
                    )
                in_data = True
                continue
            raise ParseError(f"unexpected line {line[:40]!r}", path=path, line=lineno)
        row = [v.strip() for v in line.split(",")]
        if len(row) != len(FEATURES_HEADER):
            raise ParseError(f"expected {len(FEATURES_HEADER)} fields", path=path, line=lineno)
        shape = parse_shape(row[:5], path, lineno)
        if row[5] not in PRECISIONS:
            raise ParseError(f"unsupported precision {row[5]!r}", path=path, line=lineno)
        X.append(shape.features())
        y.append(int(_parse_method(row[6], path, lineno)))
    if not in_data:
        raise ParseError("missing @data section", path=path)
    if not X:
        raise ParseError("no data rows", path=path)
    return np.array(X), np.array(y, dtype=np.int64)


def read_features(path):
    """Load ``(X, y)`` from a features CSV, an ARFF file, or a dataset directory."""
    path = Path(path)
    if path.is_dir():
        path = path / FEATURES_CSV
    if path.suffix.lower() == ".arff":
        return read_features_arff(path)
    return read_features_csv(path)
