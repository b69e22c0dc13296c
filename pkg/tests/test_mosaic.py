import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polhdr.core import InvalidInputError, LdrImage, PolarityStack
from polhdr.mosaic import (
    COLOR_BLOCKS,
    POLARIZER_OFFSETS,
    MosaicFrame,
    demux,
    remux,
)


def frame_of(data, bits=8):
    return MosaicFrame(LdrImage(np.asarray(data, dtype=float), bits))


def test_layout_constant_matches_block_order():
    # inside a 2x2 block, row-major order is 90, 45 / 135, 0 degrees
    order = {off: i for i, off in enumerate(POLARIZER_OFFSETS)}
    assert [order[(0, 0)], order[(0, 1)], order[(1, 0)], order[(1, 1)]] == [2, 1, 3, 0]
    assert COLOR_BLOCKS == {"R": (0, 0), "G1": (0, 2), "G2": (2, 0), "B": (2, 2)}


def test_demux_index_example():
    stack = demux(frame_of(np.arange(16).reshape(4, 4)), "R")
    assert [float(im.data[0, 0]) for im in stack.images] == [5.0, 1.0, 0.0, 4.0]
    greens = demux(frame_of(np.arange(16).reshape(4, 4)), "G1")
    assert [float(im.data[0, 0]) for im in greens.images] == [7.0, 3.0, 2.0, 6.0]
    luma = demux(frame_of(np.arange(16).reshape(4, 4)), "luma")
    assert float(luma[0].data[0, 0]) == (7 + 13) / 2


@pytest.mark.parametrize("channel", ["R", "G1", "G2", "B", "luma", "all"])
def test_constant_frame(channel):
    stack = demux(frame_of(np.full((8, 12), 77.0)), channel)
    assert stack.shape == (2, 3)
    for im in stack.images:
        np.testing.assert_array_equal(im.data, 77.0)


def test_rejects_indivisible_sizes():
    with pytest.raises(InvalidInputError):
        frame_of(np.zeros((6, 8)))
    with pytest.raises(InvalidInputError):
        demux(LdrImage(np.zeros((4, 5))))
    with pytest.raises(InvalidInputError):
        demux(frame_of(np.zeros((4, 4))), "X")


def test_remux_single_block_and_zero_stack():
    stack = PolarityStack.from_arrays([[[10]], [[20]], [[30]], [[40]]])
    out = remux(stack, "R").image.data
    np.testing.assert_array_equal(out[:2, :2], [[30, 20], [40, 10]])
    assert out[2:, :].sum() == 0 and out[:, 2:].sum() == 0
    zeros = PolarityStack.from_arrays([np.zeros((3, 2))] * 4)
    assert not remux(zeros).image.data.any()


def test_remux_rejects_mismatched_base():
    stack = PolarityStack.from_arrays([np.zeros((2, 2))] * 4)
    with pytest.raises(InvalidInputError):
        remux(stack, "R", base=frame_of(np.zeros((4, 4))))


sizes = st.tuples(st.integers(1, 6), st.integers(1, 6))


@settings(max_examples=40, deadline=None)
@given(sizes, st.integers(0, 2**32 - 1))
def test_remux_demux_identity_per_channel(size, seed):
    rng = np.random.default_rng(seed)
    frame = frame_of(rng.integers(0, 256, size=(4 * size[0], 4 * size[1])))
    for channel in ("R", "G1", "G2", "B"):
        back = remux(demux(frame, channel), channel, base=frame)
        np.testing.assert_array_equal(back.image.data, frame.image.data)
    # the four single-colour stacks together reassemble the frame with no base
    acc = frame_of(np.zeros(frame.shape))
    for channel in ("R", "G1", "G2", "B"):
        acc = remux(demux(frame, channel), channel, base=acc)
    np.testing.assert_array_equal(acc.image.data, frame.image.data)


@settings(max_examples=40, deadline=None)
@given(sizes, st.sampled_from(["R", "G1", "G2", "B", "luma", "all"]), st.integers(0, 2**32 - 1))
def test_demux_remux_identity(size, channel, seed):
    rng = np.random.default_rng(seed)
    stack = PolarityStack.from_arrays([rng.integers(0, 256, size=size) for _ in range(4)])
    back = demux(remux(stack, channel), channel)
    for a, b in zip(back.images, stack.images):
        np.testing.assert_array_equal(a.data, b.data)


@settings(max_examples=30, deadline=None)
@given(sizes, st.sampled_from(["R", "G1", "G2", "B"]), st.integers(0, 2**32 - 1))
def test_demux_is_a_permutation(size, channel, seed):
    rng = np.random.default_rng(seed)
    data = rng.integers(0, 256, size=(4 * size[0], 4 * size[1]))
    stack = demux(frame_of(data), channel)
    by, bx = COLOR_BLOCKS[channel]
    selected = np.concatenate([data[by + dy::4, bx + dx::4].ravel() for dy in (0, 1) for dx in (0, 1)])
    produced = np.concatenate([im.data.ravel() for im in stack.images])
    np.testing.assert_array_equal(np.sort(produced), np.sort(selected))
