"""Layer shape descriptor and the enumeration of convolution methods."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .errors import InvalidShape

FEATURE_NAMES = ("W", "H", "C_IN", "KERNEL_SIZE", "C_OUT")


class ConvMethod(enum.IntEnum):
    """The three convolution implementations.

    The integer codes are part of the file formats and of every tie-break
    rule (lowest code wins), so they must never be renumbered.
    """

    GEMM = 0
    DIRECT = 1
    WINOGRAD = 2

    @property
    def token(self) -> str:
        return self.name.lower()

    @classmethod
    def from_token(cls, token: str) -> "ConvMethod":
        try:
            return cls[token.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown convolution method {token!r}") from None


METHOD_TOKENS = tuple(m.token for m in ConvMethod)


def output_extent(size: int, kernel_size: int, pad: int, stride: int = 1) -> int:
    return (size + 2 * pad - kernel_size) // stride + 1


@dataclass(frozen=True, order=True)
class LayerShape:
    """A convolution layer: input W x H x C_IN, square K x K kernels, C_OUT filters.

    Stride and padding are fixed to 1; anything else is rejected.
    """

    width: int
    height: int
    in_channels: int
    kernel_size: int
    out_channels: int
    stride: int = 1
    pad: int = 1

    def __post_init__(self):
        for name in ("width", "height", "in_channels", "kernel_size", "out_channels"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool):
                raise InvalidShape(f"{name} must be an integer, got {value!r}")
            if value < 1:
                raise InvalidShape(f"{name} must be >= 1, got {value}")
        if self.stride != 1 or self.pad != 1:
            raise InvalidShape(
                f"only stride=1 and pad=1 are supported, got stride={self.stride} pad={self.pad}"
            )
        if self.out_height < 1 or self.out_width < 1:
            raise InvalidShape(
                f"kernel {self.kernel_size} does not fit a padded {self.height}x{self.width} input"
            )

    @classmethod
    def from_features(cls, values) -> "LayerShape":
        w, h, c_in, k, c_out = (int(v) for v in values)
        return cls(w, h, c_in, k, c_out)

    @staticmethod
    def is_feasible(width: int, height: int, kernel_size: int, pad: int = 1) -> bool:
        return (
            output_extent(width, kernel_size, pad) >= 1
            and output_extent(height, kernel_size, pad) >= 1
        )

    @property
    def out_height(self) -> int:
        return output_extent(self.height, self.kernel_size, self.pad, self.stride)

    @property
    def out_width(self) -> int:
        return output_extent(self.width, self.kernel_size, self.pad, self.stride)

    @property
    def key(self) -> tuple[int, int, int, int, int]:
        return (self.width, self.height, self.in_channels, self.kernel_size, self.out_channels)

    def features(self) -> tuple[float, ...]:
        """Feature vector in the fixed order W, H, C_IN, K, C_OUT."""
        return tuple(float(v) for v in self.key)

    @property
    def flops(self) -> int:
        """Multiply-add count of the direct algorithm, times two."""
        return (
            2
            * self.out_channels
            * self.in_channels
            * self.kernel_size**2
            * self.out_height
            * self.out_width
        )

    @property
    def input_dims(self) -> tuple[int, int, int]:
        return (self.in_channels, self.height, self.width)

    @property
    def kernel_dims(self) -> tuple[int, int, int, int]:
        return (self.out_channels, self.in_channels, self.kernel_size, self.kernel_size)

    def __str__(self):
        return "({},{},{},{},{})".format(*self.key)
