"""Shared shape arithmetic for the convolution backends.

SAME padding convention: output spatial size is ceil(in / stride) and the
total zero padding is split evenly, with the odd pixel going to the
bottom/right edge.
"""


def same_out(in_size: int, stride: int) -> int:
    return -(-in_size // stride)


def same_pad(in_size: int, kernel: int, stride: int) -> tuple[int, int]:
    """Return (out_size, pad_before) for one spatial axis."""
    out = same_out(in_size, stride)
    total = max((out - 1) * stride + kernel - in_size, 0)
    return out, total // 2
