"""Split colour-polarization sensor mosaics into per-polarity images and back.

Sensor layout (one 4x4 superpixel, offsets are (row, col))::

    +----+----+----+----+
    | 90 | 45 | 90 | 45 |      R block at (0, 0), G1 at (0, 2),
    +----+----+----+----+      G2 at (2, 0), B at (2, 2).
    |135 |  0 |135 |  0 |
    +----+----+----+----+      Inside every colour block the polarizers
    | 90 | 45 | 90 | 45 |      run 90, 45 / 135, 0 in row-major order.
    +----+----+----+----+
    |135 |  0 |135 |  0 |
    +----+----+----+----+

The Bayer corner assignment is an assumption; the simulator uses the same
table, so round trips are self-consistent. No interpolation is done: each
polarity image is the quarter-resolution subsample of its pixels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import InvalidInputError, LdrImage, PolarityStack

SUPERPIXEL = 4

#: Top-left offset of each colour block inside the superpixel.
COLOR_BLOCKS = {"R": (0, 0), "G1": (0, 2), "G2": (2, 0), "B": (2, 2)}

#: Offset inside a colour block for stack index 0..3 (0, 45, 90, 135 degrees).
POLARIZER_OFFSETS = ((1, 1), (0, 1), (0, 0), (1, 0))

CHANNELS = ("R", "G1", "G2", "B", "luma", "all")


@dataclass(frozen=True)
class MosaicFrame:
    """Raw sensor frame; width and height must be multiples of 4."""

    image: LdrImage

    def __post_init__(self):
        h, w = self.image.shape
        if h % SUPERPIXEL or w % SUPERPIXEL:
            raise InvalidInputError(f"mosaic dimensions must be divisible by 4, got {w}x{h}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.image.shape

    @property
    def bit_depth(self) -> int:
        return self.image.bit_depth


def pixel_slices(color: str, index: int) -> tuple[slice, slice]:
    """Strided slices selecting the pixels of one colour block and polarizer."""
    by, bx = COLOR_BLOCKS[color]
    py, px = POLARIZER_OFFSETS[index]
    return slice(by + py, None, SUPERPIXEL), slice(bx + px, None, SUPERPIXEL)


def channel_colors(channel: str) -> tuple[str, ...]:
    if channel == "luma":
        return ("G1", "G2")
    if channel == "all":
        return tuple(COLOR_BLOCKS)
    if channel in COLOR_BLOCKS:
        return (channel,)
    raise InvalidInputError(f"unknown channel {channel!r}; choose from {CHANNELS}")


def demux(frame: MosaicFrame, channel: str = "luma") -> PolarityStack:
    """Extract the four polarity images of one colour channel.

    ``luma`` averages the two green blocks and ``all`` averages all four
    colour blocks.
    """
    if not isinstance(frame, MosaicFrame):
        frame = MosaicFrame(frame)
    data = frame.image.data
    colors = channel_colors(channel)
    images = []
    for i in range(4):
        acc = sum(data[pixel_slices(c, i)] for c in colors)
        images.append(LdrImage(acc / len(colors), frame.bit_depth))
    return PolarityStack(tuple(images))


def remux(stack: PolarityStack, channel: str = "all", base: MosaicFrame | None = None) -> MosaicFrame:
    """Write a polarity stack back into the mosaic layout.

    The stack is placed into every colour block that ``channel`` selects
    (both greens for ``luma``, every block for ``all``). Other pixels come
    from ``base`` if given, else zero.
    """
    if not isinstance(stack, PolarityStack):
        stack = PolarityStack(tuple(stack))
    h, w = stack.shape
    if base is not None:
        if base.shape != (h * SUPERPIXEL, w * SUPERPIXEL):
            raise InvalidInputError("base frame does not match stack size")
        if base.bit_depth != stack.bit_depth:
            raise InvalidInputError("base frame bit depth differs from stack")
        out = base.image.data.copy()
    else:
        out = np.zeros((h * SUPERPIXEL, w * SUPERPIXEL))
    for c in channel_colors(channel):
        for i in range(4):
            out[pixel_slices(c, i)] = stack[i].data
    return MosaicFrame(LdrImage(out, stack.bit_depth))

