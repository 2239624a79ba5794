"""Multi-channel 2-D convolution backends.

All three backends compute the same cross-correlation

    out[o, y, x] = sum_{c, i, j} padded[c, y + i, x + j] * kernels[o, c, i, j]

over a zero-padded input, in float32. Images are ``(C_IN, H, W)`` arrays and
kernel banks ``(C_OUT, C_IN, K, K)``.

Every backend accepts a ``pad`` keyword that overrides ``shape.pad``; the
layer shapes themselves only admit pad=1, the override exists for
identity-style checks such as a 1x1 kernel without padding.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionMismatch, UnsupportedShape
from .shapes import ConvMethod, LayerShape, output_extent

DTYPE = np.float32

# Winograd F(2x2, 3x3) transforms: Y = A^T [(G g G^T) * (B^T d B)] A
WINOGRAD_BT = np.array(
    [[1, 0, -1, 0], [0, 1, 1, 0], [0, -1, 1, 0], [0, 1, 0, -1]], dtype=DTYPE
)
WINOGRAD_G = np.array(
    [[1, 0, 0], [0.5, 0.5, 0.5], [0.5, -0.5, 0.5], [0, 0, 1]], dtype=DTYPE
)
WINOGRAD_AT = np.array([[1, 1, 1, 0], [0, 1, -1, -1]], dtype=DTYPE)


def _check_tensors(image, kernels, shape: LayerShape):
    image = np.asarray(image)
    if image.shape != shape.input_dims:
        raise DimensionMismatch(
            f"input has dims {image.shape}, shape {shape} expects {shape.input_dims}"
        )
    if kernels is not None:
        kernels = np.asarray(kernels)
        if kernels.shape != shape.kernel_dims:
            raise DimensionMismatch(
                f"kernels have dims {kernels.shape}, shape {shape} expects {shape.kernel_dims}"
            )
        kernels = kernels.astype(DTYPE, copy=False)
    return image.astype(DTYPE, copy=False), kernels


def _out_extents(shape: LayerShape, pad: int) -> tuple[int, int]:
    h_out = output_extent(shape.height, shape.kernel_size, pad)
    w_out = output_extent(shape.width, shape.kernel_size, pad)
    if h_out < 1 or w_out < 1:
        raise DimensionMismatch(f"kernel does not fit input of {shape} with pad={pad}")
    return h_out, w_out


def _zero_pad(image, pad: int, extra_h: int = 0, extra_w: int = 0):
    c, h, w = image.shape
    out = np.zeros((c, h + 2 * pad + extra_h, w + 2 * pad + extra_w), dtype=DTYPE)
    out[:, pad : pad + h, pad : pad + w] = image
    return out


def direct_conv(image, kernels, shape: LayerShape, *, pad: int | None = None):
    """Evaluate the convolution sum directly.

    Loops over input channels and kernel taps in (c, i, j) order and
    accumulates one float32 multiply-add per tap for all output positions and
    output channels at once. The accumulation order matches a scalar loop
    nest exactly, so the result is bit-reproducible against one.
    """
    image, kernels = _check_tensors(image, kernels, shape)
    pad = shape.pad if pad is None else pad
    h_out, w_out = _out_extents(shape, pad)
    padded = _zero_pad(image, pad)
    k = shape.kernel_size
    out = np.zeros((shape.out_channels, h_out, w_out), dtype=DTYPE)
    for c in range(shape.in_channels):
        for i in range(k):
            for j in range(k):
                window = padded[c, i : i + h_out, j : j + w_out]
                out += kernels[:, c, i, j][:, None, None] * window[None, :, :]
    return out


def im2col(image, shape: LayerShape, *, pad: int | None = None):
    """Lower an image to its patch matrix of shape ``(C_IN*K*K, H_out*W_out)``.

    Column ``x * H_out + y`` holds the padded patch feeding output position
    ``(y, x)``, i.e. output positions are traversed column-wise. Rows are
    ordered ``(c, i, j)``, matching ``kernels.reshape(C_OUT, -1)``.
    """
    image, _ = _check_tensors(image, None, shape)
    pad = shape.pad if pad is None else pad
    h_out, w_out = _out_extents(shape, pad)
    k = shape.kernel_size
    padded = _zero_pad(image, pad)
    # (C, H_out, W_out, K, K) view, no copy yet
    windows = sliding_window_view(padded, (k, k), axis=(1, 2))
    cols = windows.transpose(0, 3, 4, 2, 1)
    return np.ascontiguousarray(cols).reshape(shape.in_channels * k * k, w_out * h_out)


def gemm(a, b):
    """C = A @ B in float32."""
    a = np.asarray(a, dtype=DTYPE)
    b = np.asarray(b, dtype=DTYPE)
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionMismatch(f"gemm expects matrices, got {a.ndim}-d and {b.ndim}-d")
    if a.shape[1] != b.shape[0]:
        raise DimensionMismatch(f"inner dimensions differ: {a.shape} x {b.shape}")
    return np.matmul(a, b)


def im2col_gemm_conv(image, kernels, shape: LayerShape, *, pad: int | None = None):
    image, kernels = _check_tensors(image, kernels, shape)
    pad = shape.pad if pad is None else pad
    h_out, w_out = _out_extents(shape, pad)
    cols = im2col(image, shape, pad=pad)
    weights = kernels.reshape(shape.out_channels, -1)
    out = gemm(weights, cols)
    # columns were laid out column-major over output positions
    return np.ascontiguousarray(out.reshape(shape.out_channels, w_out, h_out).transpose(0, 2, 1))


def winograd_conv(image, kernels, shape: LayerShape, *, pad: int | None = None):
    """Winograd F(2x2, 3x3) convolution.

    The output is computed in 2x2 tiles from overlapping 4x4 input tiles.
    When the output extent is odd the padded input is zero-extended to a
    whole number of tiles and the result cropped.
    """
    if shape.kernel_size != 3 or shape.stride != 1:
        raise UnsupportedShape(
            f"winograd F(2x2,3x3) needs K=3 and stride=1, got K={shape.kernel_size}"
        )
    image, kernels = _check_tensors(image, kernels, shape)
    pad = shape.pad if pad is None else pad
    h_out, w_out = _out_extents(shape, pad)
    tiles_h = -(-h_out // 2)
    tiles_w = -(-w_out // 2)
    c_in, c_out = shape.in_channels, shape.out_channels

    # zero-extend so that 2*tiles + 2 rows/cols exist
    extra_h = 2 * tiles_h + 2 - (shape.height + 2 * pad)
    extra_w = 2 * tiles_w + 2 - (shape.width + 2 * pad)
    padded = _zero_pad(image, pad, extra_h, extra_w)

    # input tiles d: (C_IN, tiles_h, tiles_w, 4, 4), stride 2
    d = sliding_window_view(padded, (4, 4), axis=(1, 2))[:, ::2, ::2]
    v = np.einsum("ab,cxybd,ed->aecxy", WINOGRAD_BT, d, WINOGRAD_BT, optimize=True)
    u = np.einsum("ab,ocbd,ed->aeoc", WINOGRAD_G, kernels, WINOGRAD_G, optimize=True)

    # 16 independent (C_OUT x C_IN) @ (C_IN x T) products
    t = tiles_h * tiles_w
    m = np.matmul(u.reshape(16, c_out, c_in), v.reshape(16, c_in, t))
    m = m.reshape(4, 4, c_out, tiles_h, tiles_w)

    y = np.einsum("ab,bdoxy,ed->oxaye", WINOGRAD_AT, m, WINOGRAD_AT, optimize=True)
    out = y.reshape(c_out, 2 * tiles_h, 2 * tiles_w)
    return np.ascontiguousarray(out[:, :h_out, :w_out], dtype=DTYPE)


BACKENDS = {
    ConvMethod.GEMM: im2col_gemm_conv,
    ConvMethod.DIRECT: direct_conv,
    ConvMethod.WINOGRAD: winograd_conv,
}


def convolve(method: ConvMethod, image, kernels, shape: LayerShape):
    return BACKENDS[ConvMethod(method)](image, kernels, shape)


def max_rel_error(actual, expected, floor: float = 1e-6) -> float:
    """Largest absolute deviation, relative to the largest reference magnitude.

    ``floor`` bounds the denominator from below so all-zero references
    compare absolutely.
    """
    actual = np.asarray(actual, dtype=np.float64)
    expected = np.asarray(expected, dtype=np.float64)
    if actual.shape != expected.shape:
        raise DimensionMismatch(f"cannot compare {actual.shape} with {expected.shape}")
    if expected.size == 0:
        return 0.0
    scale = max(float(np.max(np.abs(expected))), floor)
    return float(np.max(np.abs(actual - expected))) / scale


def random_tensors(shape: LayerShape, rng: np.random.Generator):
    image = rng.standard_normal(shape.input_dims, dtype=DTYPE)
    kernels = rng.standard_normal(shape.kernel_dims, dtype=DTYPE)
    return image, kernels
