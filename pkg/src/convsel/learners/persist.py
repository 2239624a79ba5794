"""Line-oriented text model files.

Grammar (floats are written with ``repr`` so they round-trip exactly)::

    CONVSEL-MODEL v1
    kind: dt
    max_depth: 12            # or "none"
    min_samples_split: 2
    n_features: 5
    nodes: <N>
    <i> split <feature> <threshold> <left> <right> <label> <c_gemm> <c_direct> <c_winograd>
    <i> leaf <label> <c_gemm> <c_direct> <c_winograd>
    ...

    CONVSEL-MODEL v1
    kind: nb
    n_features: 5
    variance_floor: <float>
    class <token> prior <p> mean <m_1 .. m_F> var <v_1 .. v_F>   (one line per method)

Node lines appear in index order, root first. Labels and class lines use
method tokens (gemm, direct, winograd).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import FormatVersionMismatch, ParseError
from ..shapes import ConvMethod
from .bayes import NaiveBayesModel
from .tree import LEAF, DecisionTreeModel, Node

MAGIC = "CONVSEL-MODEL v1"


def _dump_tree(model: DecisionTreeModel) -> list[str]:
    depth = "none" if model.max_depth is None else str(model.max_depth)
    lines = [
        "kind: dt",
        f"max_depth: {depth}",
        f"min_samples_split: {model.min_samples_split}",
        f"n_features: {model.n_features}",
        f"nodes: {len(model.nodes)}",
    ]
    for i, n in enumerate(model.nodes):
        counts = " ".join(str(c) for c in n.counts)
        label = ConvMethod(n.label).token
        if n.is_leaf:
            lines.append(f"{i} leaf {label} {counts}")
        else:
            lines.append(f"{i} split {n.feature} {n.threshold!r} {n.left} {n.right} {label} {counts}")
    return lines


def _dump_bayes(model: NaiveBayesModel) -> list[str]:
    lines = [
        "kind: nb",
        f"n_features: {model.means.shape[1]}",
        f"variance_floor: {model.variance_floor!r}",
    ]
    for m in ConvMethod:
        mean = " ".join(repr(float(v)) for v in model.means[m])
        var = " ".join(repr(float(v)) for v in model.variances[m])
        lines.append(f"class {m.token} prior {float(model.priors[m])!r} mean {mean} var {var}")
    return lines


def save_model(model, path) -> None:
    if isinstance(model, DecisionTreeModel):
        body = _dump_tree(model)
    elif isinstance(model, NaiveBayesModel):
        body = _dump_bayes(model)
    else:
        raise TypeError(f"cannot save {type(model).__name__}")
    Path(path).write_text("\n".join([MAGIC, *body]) + "\n")


class _Lines:
    def __init__(self, path, text):
        self.path = path
        self.lines = text.splitlines()
        self.pos = 0

    def next(self) -> tuple[int, str]:
        while self.pos < len(self.lines):
            self.pos += 1
            line = self.lines[self.pos - 1].strip()
            if line:
                return self.pos, line
        raise ParseError("unexpected end of file", path=self.path, line=self.pos)

    def field(self, name) -> str:
        lineno, line = self.next()
        key, sep, value = line.partition(":")
        if not sep or key.strip() != name:
            raise ParseError(f"expected '{name}: ...'", path=self.path, line=lineno)
        return value.strip()

    def fail(self, message):
        return ParseError(message, path=self.path, line=self.pos)


def _parse_tree(src: _Lines) -> DecisionTreeModel:
    depth = src.field("max_depth")
    max_depth = None if depth == "none" else int(depth)
    min_split = int(src.field("min_samples_split"))
    n_features = int(src.field("n_features"))
    count = int(src.field("nodes"))
    nodes = []
    for i in range(count):
        lineno, line = src.next()
        parts = line.split()
        if not parts or parts[0] != str(i):
            raise src.fail(f"expected node {i}")
        if parts[1:2] == ["leaf"] and len(parts) == 6:
            label = ConvMethod.from_token(parts[2])
            counts = tuple(int(c) for c in parts[3:])
            nodes.append(Node(LEAF, 0.0, LEAF, LEAF, int(label), counts))
        elif parts[1:2] == ["split"] and len(parts) == 10:
            feature, threshold = int(parts[2]), float(parts[3])
            left, right = int(parts[4]), int(parts[5])
            label = ConvMethod.from_token(parts[6])
            counts = tuple(int(c) for c in parts[7:])
            nodes.append(Node(feature, threshold, left, right, int(label), counts))
        else:
            raise src.fail("malformed node line")
    model = DecisionTreeModel(nodes, max_depth, min_split, n_features)
    try:
        model.validate()
    except ValueError as exc:
        raise ParseError(str(exc), path=src.path) from None
    return model


def _parse_bayes(src: _Lines) -> NaiveBayesModel:
    n_features = int(src.field("n_features"))
    floor = float(src.field("variance_floor"))
    priors = np.zeros(len(ConvMethod))
    means = np.zeros((len(ConvMethod), n_features))
    variances = np.zeros((len(ConvMethod), n_features))
    for m in ConvMethod:
        _, line = src.next()
        parts = line.split()
        expected = 4 + 2 * (n_features + 1)
        if (
            len(parts) != expected
            or parts[0] != "class"
            or parts[1] != m.token
            or parts[2] != "prior"
            or parts[4] != "mean"
            or parts[5 + n_features] != "var"
        ):
            raise src.fail(f"malformed class line for {m.token}")
        priors[m] = float(parts[3])
        means[m] = [float(v) for v in parts[5 : 5 + n_features]]
        variances[m] = [float(v) for v in parts[6 + n_features :]]
    if not np.all(variances > 0):
        raise src.fail("variances must be positive")
    return NaiveBayesModel(priors, means, variances, floor)


def load_model(path):
    path = Path(path)
    text = path.read_text()
    first = text.split("\n", 1)[0].strip()
    if first != MAGIC:
        raise FormatVersionMismatch(f"{path}: expected header {MAGIC!r}, found {first[:40]!r}")
    src = _Lines(path, text)
    src.next()
    try:
        kind = src.field("kind")
        if kind == "dt":
            return _parse_tree(src)
        if kind == "nb":
            return _parse_bayes(src)
    except ValueError as exc:
        if isinstance(exc, ParseError):
            raise
        raise src.fail(str(exc)) from None
    raise ParseError(f"unknown model kind {kind!r}", path=path, line=2)
