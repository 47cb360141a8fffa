"""Spectral states, weighted norms, actions, and the rounding projection.

A state stores the complex coefficients xi_a on a truncated lattice. The
conjugate half of phase space is implicit: real states pair xi with its
complex conjugate, which is why the squared Sobolev norm carries a factor 2,

    ||z||_s^2 = 2 * sum_a |a|_w^(2s) |xi_a|^2,

while single-sided quantities (actions, their weighted distances, the
quadratic energy) sum over the mode set once.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field

import numpy as np

from .fileio import atomic_write, fmt
from .lattice import FULL, HALF, ModeLattice

_KIND_BYTE = {FULL: 0, HALF: 1}
_BYTE_KIND = {v: k for k, v in _KIND_BYTE.items()}


@dataclass(eq=False)
class SpectralState:
    """Complex spectral coefficients on a truncated lattice.

    The coefficient array must stay finite; loaders enforce this and the
    evolution loop aborts if diagnostics turn non-finite.
    """

    lattice: ModeLattice
    coeffs: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.coeffs, dtype=complex)
        if arr.shape != self.lattice.shape:
            raise ValueError(
                f"coefficient shape {arr.shape} does not match lattice shape {self.lattice.shape}"
            )
        self.coeffs = arr

    @classmethod
    def zeros(cls, lattice: ModeLattice) -> "SpectralState":
        return cls(lattice, np.zeros(lattice.shape, dtype=complex))

    @classmethod
    def from_modes(cls, lattice: ModeLattice, values: dict) -> "SpectralState":
        """Build a state from a sparse {mode: coefficient} mapping."""
        coeffs = np.zeros(lattice.shape, dtype=complex)
        for a, v in values.items():
            coeffs[lattice.index(a)] = v
        return cls(lattice, coeffs)

    def copy(self) -> "SpectralState":
        return SpectralState(self.lattice, self.coeffs.copy())

    def amplitude(self, a) -> complex:
        return complex(self.coeffs[self.lattice.index(a)])


@dataclass
class DiagnosticsSample:
    """Observables recorded along a trajectory at one step."""

    step: int
    t: float
    norm_s: float
    h0_energy: float
    head: float
    tail: float
    zeroed: int
    actions: dict = field(default_factory=dict)
    action_dev: float | None = None


def sobolev_norm(state: SpectralState, s: float) -> float:
    """Weighted norm sqrt(2 * sum |a|_w^(2s) |xi_a|^2)."""
    w2s = state.lattice.weights ** (2.0 * s)
    c = state.coeffs
    return float(np.sqrt(2.0 * np.sum(w2s * (c.real**2 + c.imag**2))))


def actions(state: SpectralState) -> np.ndarray:
    """Mode actions I_a = |xi_a|^2, lattice shaped."""
    c = state.coeffs
    return c.real**2 + c.imag**2


def head_tail(state: SpectralState, split_n: float, s: float) -> tuple:
    """Split the squared norm at mode weight ``split_n``.

    Returns (head, tail): head collects modes with weight <= split_n, tail
    the rest, each as 2 * sum |a|_w^(2s) |xi_a|^2 so head + tail equals the
    squared Sobolev norm.
    """
    if split_n < 1.0:
        raise ValueError("split weight must be at least 1")
    w = state.lattice.weights
    w2s = w ** (2.0 * s)
    c = state.coeffs
    contrib = 2.0 * w2s * (c.real**2 + c.imag**2)
    mask = w <= split_n
    return float(np.sum(contrib[mask])), float(np.sum(contrib[~mask]))


def project(state: SpectralState, eta: float, s: float) -> tuple:
    """Zero every mode with |a|_w^s |xi_a| <= eta.

    Returns (new_state, zeroed) where zeroed counts coefficients that went
    from nonzero to zero. The comparison is inclusive, so eta = 0 keeps all
    nonzero coefficients and the projection is idempotent.
    """
    if eta < 0:
        raise ValueError("projection threshold must be nonnegative")
    ws = state.lattice.weights**s
    small = ws * np.abs(state.coeffs) <= eta
    zeroed = int(np.count_nonzero(small & (state.coeffs != 0)))
    coeffs = np.where(small, 0.0 + 0.0j, state.coeffs)
    return SpectralState(state.lattice, coeffs), zeroed


def weighted_action_distance(state: SpectralState, ref: SpectralState, s: float) -> float:
    """Distance sum_a |a|_w^(2s) |I_a(state) - I_a(ref)|."""
    if state.lattice != ref.lattice:
        raise ValueError("states live on different lattices")
    w2s = state.lattice.weights ** (2.0 * s)
    return float(np.sum(w2s * np.abs(actions(state) - actions(ref))))


def save_state_csv(state: SpectralState, path) -> None:
    """Write one row per mode: a_1..a_d, re, im, in lexicographic order."""
    dim = state.lattice.dim
    with atomic_write(path) as handle:
        writer = csv.writer(handle)
        writer.writerow([f"a{i + 1}" for i in range(dim)] + ["re", "im"])
        flat = state.coeffs.ravel()
        for mode, c in zip(state.lattice.modes(), flat):
            comps = (mode,) if dim == 1 else mode
            writer.writerow([*comps, fmt(c.real), fmt(c.imag)])


def load_state_csv(path, lattice: ModeLattice | None = None) -> SpectralState:
    """Read a state written by :func:`save_state_csv`.

    When ``lattice`` is omitted it is inferred: the dimension from the
    header, the cutoff from the largest component, and the kind from the
    presence of negative components (disambiguated by the row count).
    """
    with open(path, newline="") as handle:
        rows = list(csv.reader(handle))
    if not rows:
        raise ValueError(f"empty state file {path}")
    header = rows[0]
    dim = len(header) - 2
    if dim < 1 or header[-2:] != ["re", "im"]:
        raise ValueError(f"unrecognized state header {header}")
    records = []
    for row in rows[1:]:
        comps = tuple(int(x) for x in row[:dim])
        records.append((comps, float(row[dim]), float(row[dim + 1])))
    if lattice is None:
        hi = max(max(abs(c) for c in comps) for comps, _, _ in records)
        any_negative = any(c < 0 for comps, _, _ in records for c in comps)
        if any_negative:
            kind = FULL
        else:
            kind = FULL if len(records) == (2 * hi + 1) ** dim else HALF
        lattice = ModeLattice(dim, hi, kind)
    if len(records) != lattice.size:
        raise ValueError(f"expected {lattice.size} modes, file has {len(records)}")
    coeffs = np.zeros(lattice.shape, dtype=complex)
    for comps, re, im in records:
        coeffs[lattice.index(comps)] = complex(re, im)
    if not np.all(np.isfinite(coeffs.view(float))):
        raise ValueError("state file contains non-finite coefficients")
    return SpectralState(lattice, coeffs)


def save_state_binary(state: SpectralState, path) -> None:
    """Little-endian layout: u32 d, u32 K, u8 kind, u64 count, count (re, im) f64 pairs."""
    lat = state.lattice
    header = struct.pack("<IIBQ", lat.dim, lat.cutoff, _KIND_BYTE[lat.kind], lat.size)
    flat = state.coeffs.ravel()
    payload = np.empty((lat.size, 2), dtype="<f8")
    payload[:, 0] = flat.real
    payload[:, 1] = flat.imag
    with atomic_write(path, "wb") as handle:
        handle.write(header)
        handle.write(payload.tobytes())


def load_state_binary(path) -> SpectralState:
    with open(path, "rb") as handle:
        blob = handle.read()
    head_len = struct.calcsize("<IIBQ")
    if len(blob) < head_len:
        raise ValueError(f"truncated state file {path}")
    dim, cutoff, kind_byte, count = struct.unpack_from("<IIBQ", blob)
    if kind_byte not in _BYTE_KIND:
        raise ValueError(f"unknown lattice kind byte {kind_byte}")
    lattice = ModeLattice(dim, cutoff, _BYTE_KIND[kind_byte])
    if count != lattice.size:
        raise ValueError(f"count {count} does not match lattice size {lattice.size}")
    expected = head_len + 16 * count
    if len(blob) != expected:
        raise ValueError(f"state file has {len(blob)} bytes, expected {expected}")
    payload = np.frombuffer(blob, dtype="<f8", offset=head_len).reshape(count, 2)
    coeffs = (payload[:, 0] + 1j * payload[:, 1]).reshape(lattice.shape)
    if not np.all(np.isfinite(payload)):
        raise ValueError("state file contains non-finite coefficients")
    return SpectralState(lattice, coeffs)
