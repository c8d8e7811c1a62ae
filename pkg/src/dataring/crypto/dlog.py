"""Signed discrete-log recovery over a symmetric window [-W, W]."""

import math
from functools import lru_cache

from ..errors import DecodeOverflow


class DecodeWindow:
    """Baby-step/giant-step table for x in [-W, W].

    Shifting by W turns the search into y = x + W in [0, 2W].  With step
    m = ceil(sqrt(2W+1)) the baby table holds jB for j < m and at most m
    giant steps are taken.
    """

    def __init__(self, group, half_width):
        if half_width < 0:
            raise ValueError("window half-width must be non-negative")
        self.group = group
        self.half_width = int(half_width)
        span = 2 * self.half_width + 1
        self.step = math.isqrt(span - 1) + 1 if span > 1 else 1
        self._direct = hasattr(group, "dlog")
        if self._direct:
            return
        table = {}
        point = group.identity
        for j in range(self.step):
            table[group.key(point)] = j
            point = group.add(point, group.generator)
        self._baby = table
        self._giant = group.neg(group.base_mul(self.step))
        self._shift = group.base_mul(self.half_width)
        self._rounds = -(-span // self.step)

    def __contains__(self, x):
        return -self.half_width <= x <= self.half_width

    def decode(self, point):
        """Return x with x*B == point, or raise DecodeOverflow."""
        W = self.half_width
        group = self.group
        if self._direct:
            x = group.dlog(point)
            if x > group.order // 2:
                x -= group.order
            if -W <= x <= W:
                return x
            raise DecodeOverflow(f"plaintext outside [-{W}, {W}]")
        current = group.add(point, self._shift)
        for i in range(self._rounds):
            j = self._baby.get(group.key(current))
            if j is not None:
                y = i * self.step + j
                if y <= 2 * W:
                    return y - W
                break
            current = group.add(current, self._giant)
        raise DecodeOverflow(f"plaintext outside [-{W}, {W}]")

    def __repr__(self):
        return f"DecodeWindow({self.group.name}, W={self.half_width})"


@lru_cache(maxsize=16)
def decode_window(group, half_width):
    """Shared, read-only window per (group, W)."""
    return DecodeWindow(group, half_width)
