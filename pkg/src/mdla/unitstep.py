"""Nondecreasing integer step functions (aggregate histories, point processes).

A UnitStep is a sorted list of jump times; its value at s is the number of
jumps strictly before s (left-continuous), optionally +inf beyond a tail time.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


@dataclass(frozen=True)
class UnitStep:
    """Unit-step function: Y(s) = #{jumps < s}, left-continuous.

    Attributes:
        jumps: strictly increasing jump times.
        tail_infinite_after: if set, Y(s) = +inf for s > this time.
    """

    jumps: np.ndarray
    tail_infinite_after: Optional[float] = None

    def __post_init__(self):
        j = np.asarray(self.jumps, dtype=np.float64)
        if j.ndim != 1:
            raise ValueError("jumps must be one-dimensional")
        if j.size > 1 and not np.all(np.diff(j) > 0):
            raise ValueError("jump times must be strictly increasing")
        if self.tail_infinite_after is not None and j.size:
            if j[-1] > self.tail_infinite_after:
                raise ValueError("jumps beyond the infinite tail are redundant")
        object.__setattr__(self, "jumps", j)

    @classmethod
    def from_times(cls, times: Sequence[float],
                   tail_infinite_after: Optional[float] = None) -> "UnitStep":
        t = np.sort(np.asarray(times, dtype=np.float64))
        return cls(t, tail_infinite_after)

    @classmethod
    def infinite(cls, after: float = 0.0) -> "UnitStep":
        """The function that is +inf beyond `after` (and 0 up to it)."""
        return cls(np.empty(0), tail_infinite_after=after)

    def __call__(self, s):
        s = np.asarray(s, dtype=np.float64)
        val = np.searchsorted(self.jumps, s, side="left").astype(np.float64)
        if self.tail_infinite_after is not None:
            val = np.where(s > self.tail_infinite_after, np.inf, val)
        return val if val.ndim else float(val)

    @property
    def n_jumps(self) -> int:
        return int(self.jumps.size)

    def count_in(self, a: float, b: float) -> int:
        """Number of jumps in the closed interval [a, b]."""
        lo = np.searchsorted(self.jumps, a, side="left")
        hi = np.searchsorted(self.jumps, b, side="right")
        return int(hi - lo)

    def shifted(self, dt: float) -> "UnitStep":
        tail = None if self.tail_infinite_after is None \
            else self.tail_infinite_after + dt
        return UnitStep(self.jumps + dt, tail)

    def dominates(self, other: "UnitStep", grid: np.ndarray) -> bool:
        """Pointwise self >= other on the given evaluation grid."""
        return bool(np.all(self(grid) >= other(grid)))
