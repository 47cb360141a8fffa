"""Truncated mode lattices for spectral coefficients.

A lattice is either the full integer box {a : |a_i| <= K} or the half box
{a : 0 <= a_i <= K}. Every mode carries the weight sqrt(max(1, sum a_i^2)),
which is what norms and multi-index moduli are built from. The raw sum of
squares (without the floor at 1) is kept separate because dispersion
relations use it directly.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np

FULL = "full"
HALF = "half"


def as_components(a, dim: int) -> tuple:
    """Normalize a mode to a tuple of ``dim`` integers."""
    if isinstance(a, (int, np.integer)):
        if dim != 1:
            raise ValueError(f"scalar mode {a} given for a {dim}-dimensional lattice")
        return (int(a),)
    comps = tuple(int(c) for c in a)
    if len(comps) != dim:
        raise ValueError(f"mode {a} has {len(comps)} components, expected {dim}")
    return comps


def mode_weight(a) -> float:
    """Weight sqrt(max(1, a_1^2 + ... + a_d^2)) of a single mode."""
    if isinstance(a, (int, np.integer)):
        ss = int(a) * int(a)
    else:
        ss = sum(int(c) * int(c) for c in a)
    return float(np.sqrt(max(1, ss)))


@dataclass(frozen=True)
class ModeLattice:
    """Truncation box of spectral modes.

    Parameters
    ----------
    dim : spatial dimension d >= 1
    cutoff : largest retained component K >= 0
    kind : "full" for {-K..K}^d, "half" for {0..K}^d
    """

    dim: int
    cutoff: int
    kind: str = FULL

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("lattice dimension must be at least 1")
        if self.cutoff < 0:
            raise ValueError("lattice cutoff must be nonnegative")
        if self.kind not in (FULL, HALF):
            raise ValueError(f"unknown lattice kind {self.kind!r}")

    @property
    def axis_size(self) -> int:
        return 2 * self.cutoff + 1 if self.kind == FULL else self.cutoff + 1

    @property
    def shape(self) -> tuple:
        return (self.axis_size,) * self.dim

    @property
    def size(self) -> int:
        return self.axis_size**self.dim

    def axis_values(self) -> np.ndarray:
        if self.kind == FULL:
            return np.arange(-self.cutoff, self.cutoff + 1)
        return np.arange(0, self.cutoff + 1)

    def modes(self):
        """Iterate modes in lexicographic order.

        Yields plain integers for dim 1 and tuples otherwise, matching the
        storage order of coefficient arrays (C order over the axes).
        """
        rng = range(-self.cutoff, self.cutoff + 1) if self.kind == FULL else range(self.cutoff + 1)
        if self.dim == 1:
            yield from rng
        else:
            yield from itertools.product(rng, repeat=self.dim)

    def contains(self, a) -> bool:
        try:
            comps = as_components(a, self.dim)
        except ValueError:
            return False
        lo = -self.cutoff if self.kind == FULL else 0
        return all(lo <= c <= self.cutoff for c in comps)

    def index(self, a) -> tuple:
        """Array index of mode ``a`` in a lattice-shaped coefficient array."""
        comps = as_components(a, self.dim)
        if not self.contains(comps):
            raise ValueError(f"mode {a} is outside the lattice")
        off = self.cutoff if self.kind == FULL else 0
        return tuple(c + off for c in comps)

    @cached_property
    def sum_of_squares(self) -> np.ndarray:
        """Raw sum of squared components per mode, lattice shaped."""
        vals = self.axis_values().astype(float)
        total = np.zeros(self.shape)
        for axis in range(self.dim):
            shape = [1] * self.dim
            shape[axis] = self.axis_size
            total = total + (vals**2).reshape(shape)
        return total

    @cached_property
    def weights(self) -> np.ndarray:
        """Mode weights sqrt(max(1, sum a_i^2)), lattice shaped."""
        return np.sqrt(np.maximum(1.0, self.sum_of_squares))
