"""Zero-moment multi-indices and small-divisor diagnostics for step sizes.

A multi-index is a tuple of (mode, sign) entries. Its moment is the signed
componentwise sum of the modes; combinations with zero moment are the ones a
polynomial nonlinearity can couple. For a step size h the relevant divisor of
an index j is |1 - exp(i h Omega(j))| with Omega(j) the signed frequency sum.

Two kinds of failure are kept apart. Indices whose Omega vanishes identically
are structural resonances of the frequency table itself: they fail at every h
and are reported as hard findings. The per-h pass or fail used by scans and
by the measure estimate tests only the h-dependent divisors, since a
threshold test against h*gamma/N^alpha carries no information on indices
whose divisor is zero for every h.
"""

from __future__ import annotations

import csv
import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .fileio import atomic_write, fmt
from .lattice import ModeLattice, mode_weight
from .models import PdeModel

_TWO_PI = 2.0 * math.pi

#: divisors with |h Omega mod 2 pi| below this snap to exactly 0
EXACT_ZERO_TOL = 1e-14

#: |Omega| below this counts as a structural (h-independent) resonance
STRUCTURAL_OMEGA_TOL = 1e-12

_ENUM_MAX_DEGREE = 6
_ENUM_MAX_DIM = 2


def _as_entry(entry) -> tuple:
    a, delta = entry
    mode = (int(a),) if isinstance(a, (int, np.integer)) else tuple(int(c) for c in a)
    delta = int(delta)
    if delta not in (1, -1):
        raise ValueError(f"entry sign must be +1 or -1, got {delta}")
    return mode, delta


def _entry_key(entry) -> tuple:
    """Total order on entries: weight, then |components|, then sign pattern
    (nonnegative first), then +1 before -1. Sorting by weight keeps low modes
    in front; the remaining keys make mirror images compare deterministically
    with the nonnegative representative first."""
    mode, delta = entry
    return (
        mode_weight(mode),
        tuple(abs(c) for c in mode),
        tuple(1 if c < 0 else 0 for c in mode),
        -delta,
    )


@dataclass(frozen=True)
class MultiIndex:
    """Canonically ordered tuple of (mode, sign) entries.

    Entries are sorted by weight, then mode (absolute components first, so a
    mirror pair lists its nonnegative member earlier), then sign with +1
    before -1. Permutations of the same multiset therefore compare equal.
    Modes are stored as component tuples regardless of dimension.
    """

    entries: tuple

    @classmethod
    def canonical(cls, entries) -> "MultiIndex":
        normalized = tuple(_as_entry(e) for e in entries)
        dims = {len(mode) for mode, _ in normalized}
        if len(dims) > 1:
            raise ValueError("entries mix mode dimensions")
        return cls(tuple(sorted(normalized, key=_entry_key)))

    @property
    def degree(self) -> int:
        return len(self.entries)

    @property
    def dim(self) -> int:
        if not self.entries:
            raise ValueError("empty multi-index has no dimension")
        return len(self.entries[0][0])

    def sort_key(self) -> tuple:
        return tuple(_entry_key(e) for e in self.entries)

    def is_canonical(self) -> bool:
        return list(self.entries) == sorted(self.entries, key=_entry_key)

    def moment(self) -> tuple:
        """Signed componentwise sum of the modes."""
        if not self.entries:
            return ()
        total = [0] * self.dim
        for mode, delta in self.entries:
            for i, c in enumerate(mode):
                total[i] += delta * c
        return tuple(total)

    def has_zero_moment(self) -> bool:
        return all(c == 0 for c in self.moment())

    def conjugate(self) -> "MultiIndex":
        return MultiIndex.canonical(tuple((mode, -delta) for mode, delta in self.entries))

    @cached_property
    def weights(self) -> tuple:
        return tuple(mode_weight(mode) for mode, _ in self.entries)

    @property
    def max_weight(self) -> float:
        return max(self.weights)

    def label(self) -> str:
        """Compact text form: mode components comma-joined, entries ';'-joined."""
        parts = []
        for mode, delta in self.entries:
            comps = ",".join(str(c) for c in mode)
            parts.append(f"{comps}:{delta:+d}")
        return ";".join(parts)

    def __str__(self) -> str:
        def one(mode, delta):
            a = mode[0] if len(mode) == 1 else mode
            return f"({a},{'+' if delta > 0 else '-'})"

        return "(" + ",".join(one(m, d) for m, d in self.entries) + ")"


def moment(j: MultiIndex) -> tuple:
    return j.moment()


def is_action_type(j: MultiIndex) -> bool:
    """True when the entries pair off as (a, +1)(a, -1), all signs cancelling."""
    plus = Counter(mode for mode, delta in j.entries if delta > 0)
    minus = Counter(mode for mode, delta in j.entries if delta < 0)
    return plus == minus


def omega_sum(model: PdeModel, j: MultiIndex) -> float:
    """Signed frequency combination Omega(j) = sum_i delta_i omega_{a_i}."""
    total = 0.0
    for mode, delta in j.entries:
        total += delta * model.frequency(mode if len(mode) > 1 else mode[0])
    return total


def enumerate_zero_moment(r: int, ncap: float, lattice: ModeLattice) -> list:
    """All canonical zero-moment multi-indices of degree r with weights <= ncap.

    Each index appears exactly once. Enumeration chooses r-1 signed modes
    freely and solves the moment constraint for the last entry; the result is
    sorted in canonical order. Degree is capped at 6 and dimension at 2,
    which keeps the combinatorics tractable.
    """
    if r < 2:
        raise ValueError("multi-index degree must be at least 2")
    if r > _ENUM_MAX_DEGREE:
        raise ValueError(f"enumeration supports degree <= {_ENUM_MAX_DEGREE}, got {r}")
    if lattice.dim > _ENUM_MAX_DIM:
        raise ValueError(f"enumeration supports dimension <= {_ENUM_MAX_DIM}, got {lattice.dim}")
    if ncap < 1:
        raise ValueError("weight cap must be at least 1")
    dim = lattice.dim
    ball = []
    for a in lattice.modes():
        mode = (a,) if dim == 1 else a
        if mode_weight(mode) <= ncap:
            ball.append(mode)
    ball_set = set(ball)
    signed = [(mode, delta) for mode in ball for delta in (1, -1)]
    seen = set()
    for combo in itertools.product(signed, repeat=r - 1):
        partial = [0] * dim
        for mode, delta in combo:
            for i, c in enumerate(mode):
                partial[i] += delta * c
        for delta_r in (1, -1):
            last = tuple(-delta_r * c for c in partial)
            if last in ball_set:
                entries = tuple(sorted(combo + ((last, delta_r),), key=_entry_key))
                seen.add(entries)
    indices = [MultiIndex(entries) for entries in seen]
    indices.sort(key=MultiIndex.sort_key)
    return indices


def divisor_value(h: float, omega: float) -> float:
    """|1 - exp(i h omega)|, snapped to exactly 0 near multiples of 2 pi."""
    red = h * omega - _TWO_PI * round(h * omega / _TWO_PI)
    if abs(red) < EXACT_ZERO_TOL:
        return 0.0
    return 2.0 * abs(math.sin(0.5 * h * omega))


def _binding_ball(j: MultiIndex) -> int:
    """Smallest integer weight cap whose ball contains every entry of j."""
    return max(1, int(math.ceil(j.max_weight - 1e-9)))


@dataclass
class _IndexTable:
    """Precomputed per-index data for one (r, ncap) enumeration."""

    indices: list
    omegas: np.ndarray
    binding_n: np.ndarray  # binding integer ball per index
    structural: list

    @classmethod
    def build(cls, model: PdeModel, r: int, ncap: float) -> "_IndexTable":
        all_indices = enumerate_zero_moment(r, ncap, model.lattice)
        indices, omegas, balls, structural = [], [], [], []
        for j in all_indices:
            if is_action_type(j):
                continue
            om = omega_sum(model, j)
            if abs(om) < STRUCTURAL_OMEGA_TOL:
                structural.append(j)
            indices.append(j)
            omegas.append(om)
            balls.append(_binding_ball(j))
        return cls(indices, np.asarray(omegas), np.asarray(balls, dtype=int), structural)


def _pick_witness(table: _IndexTable, positions: np.ndarray, divisors: np.ndarray) -> int:
    """Choose the reported index among candidates on a fixed preference chain.

    Smallest divisor first. Among exact ties, prefer h-dependent witnesses
    over structural ones; then the smallest |Omega|, the weakest frequency
    combination the step size turns resonant; then the largest weight, the
    mechanism reaching highest into the spectrum; finally canonical order.
    Returns a position into table.indices.
    """
    vals = divisors[positions]
    cand = positions[vals == vals.min()]
    abs_om = np.abs(table.omegas[cand])
    step = cand[abs_om >= STRUCTURAL_OMEGA_TOL]
    if len(step):
        cand = step
        abs_om = np.abs(table.omegas[cand])
    cand = cand[abs_om == abs_om.min()]
    weights = np.array([table.indices[p].max_weight for p in cand])
    cand = cand[weights == weights.max()]
    return int(cand[0])


@dataclass
class DivisorReport:
    """Result of one small-divisor minimization."""

    h: float
    r: int
    ncap: float
    value: float
    witness: MultiIndex | None
    omega: float
    threshold: float | None
    passed: bool | None
    enumerated: int
    structural: tuple = ()


def min_divisor(
    model: PdeModel,
    h: float,
    r: int,
    ncap: float,
    gamma_star: float | None = None,
    alpha_star: float | None = None,
) -> DivisorReport:
    """Minimize |1 - exp(i h Omega(j))| over zero-moment indices of degree r.

    Action-type indices are excluded but structural resonances are not: the
    reported value is the literal minimum, which is 0 whenever the frequency
    table has an identically resonant combination. The witness follows the
    preference chain of _pick_witness, so among exact ties an h-dependent
    mechanism is named if one exists. Structural resonances are also listed
    separately in full.
    """
    if h <= 0:
        raise ValueError("step size must be positive")
    table = _IndexTable.build(model, r, ncap)
    if not table.indices:
        raise ValueError(f"no non-action zero-moment indices of degree {r} within weight {ncap}")
    divisors = np.array([divisor_value(h, om) for om in table.omegas])
    pick = _pick_witness(table, np.arange(len(divisors)), divisors)
    value = float(divisors.min())
    witness = table.indices[pick]
    omega = float(table.omegas[pick])
    threshold = None
    passed = None
    if gamma_star is not None and alpha_star is not None:
        threshold = h * gamma_star / ncap**alpha_star
        passed = value >= threshold and value > 0.0
    return DivisorReport(
        h=h,
        r=r,
        ncap=ncap,
        value=value,
        witness=witness,
        omega=omega,
        threshold=threshold,
        passed=passed,
        enumerated=len(table.indices),
        structural=tuple(table.structural),
    )


@dataclass
class H1Violation:
    r: int
    n: int
    witness: MultiIndex
    value: float
    threshold: float
    structural: bool


@dataclass
class H1Report:
    h: float
    r_max: int
    ncap: int
    gamma_star: float
    alpha_star: float
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def check_h1(
    model: PdeModel,
    h: float,
    r_max: int,
    ncap: int,
    gamma_star: float,
    alpha_star: float,
) -> H1Report:
    """Test the lower bound divisor >= h*gamma/N^alpha for every degree and ball.

    Degrees run from 2 to r_max and integer weight caps N from 1 to ncap.
    Every violation is collected with its witness; structural resonances
    (Omega = 0 outside the action set) violate at every h and are flagged
    as such.
    """
    if h <= 0:
        raise ValueError("step size must be positive")
    if gamma_star <= 0:
        raise ValueError("gamma threshold must be positive")
    if alpha_star < 0:
        raise ValueError("alpha exponent must be nonnegative")
    report = H1Report(h, r_max, int(ncap), gamma_star, alpha_star)
    for r in range(2, r_max + 1):
        table = _IndexTable.build(model, r, ncap)
        if not table.indices:
            continue
        divisors = np.array([divisor_value(h, om) for om in table.omegas])
        for n in range(1, int(ncap) + 1):
            mask = table.binding_n <= n
            if not np.any(mask):
                continue
            threshold = h * gamma_star / float(n) ** alpha_star
            bad = mask & ((divisors < threshold) | (divisors == 0.0))
            if not np.any(bad):
                continue
            pick = _pick_witness(table, np.flatnonzero(bad), divisors)
            report.violations.append(
                H1Violation(
                    r=r,
                    n=n,
                    witness=table.indices[pick],
                    value=float(divisors[pick]),
                    threshold=threshold,
                    structural=abs(float(table.omegas[pick])) < STRUCTURAL_OMEGA_TOL,
                )
            )
    return report


@dataclass
class ScanRow:
    h: float
    min_divisor: float
    threshold: float
    passed: bool
    witness: MultiIndex | None


@dataclass
class ScanResult:
    rows: list
    structural: tuple
    r: int
    ncap: float
    gamma_star: float
    alpha_star: float

    @property
    def flagged_fraction(self) -> float:
        if not self.rows:
            return 0.0
        return sum(1 for row in self.rows if not row.passed) / len(self.rows)

    @property
    def worst(self) -> ScanRow | None:
        flagged = [row for row in self.rows if not row.passed] or self.rows
        return min(flagged, key=lambda row: row.min_divisor, default=None)


def resonance_scan(
    model: PdeModel,
    h_values,
    r: int,
    ncap: float,
    gamma_star: float,
    alpha_star: float,
) -> ScanResult:
    """Apply the h-dependent divisor test to each step size in a grid.

    A row fails when some index j satisfies divisor < h*gamma/N_j^alpha (or
    hits an exact zero) at its binding ball N_j. Failing rows report the
    worst violator; passing rows report the smallest divisor. Structural
    resonances are h-independent and returned once, next to the rows.
    """
    if gamma_star < 0:
        raise ValueError("gamma threshold must be nonnegative")
    if alpha_star < 0:
        raise ValueError("alpha exponent must be nonnegative")
    table = _IndexTable.build(model, r, ncap)
    step_mask = np.abs(table.omegas) >= STRUCTURAL_OMEGA_TOL
    omegas = table.omegas[step_mask]
    balls = table.binding_n[step_mask]
    indices = [j for j, keep in zip(table.indices, step_mask) if keep]
    rows = []
    for h in h_values:
        h = float(h)
        if h <= 0:
            raise ValueError("step sizes must be positive")
        if len(omegas) == 0:
            rows.append(ScanRow(h, math.inf, 0.0, True, None))
            continue
        divisors = np.array([divisor_value(h, om) for om in omegas])
        thresholds = h * gamma_star / balls.astype(float) ** alpha_star
        violating = (divisors < thresholds) | (divisors == 0.0)

        def refine(cand: np.ndarray) -> int:
            if len(cand) > 1:
                abs_om = np.abs(omegas[cand])
                cand = cand[abs_om == abs_om.min()]
                w = np.array([indices[p].max_weight for p in cand])
                cand = cand[w == w.max()]
            return int(cand[0])

        if np.any(violating):
            cand = np.flatnonzero(violating)
            ratios = np.where(
                thresholds[cand] > 0, divisors[cand] / np.maximum(thresholds[cand], 1e-300), 0.0
            )
            pick = refine(cand[ratios == ratios.min()])
            rows.append(
                ScanRow(h, float(divisors[pick]), float(thresholds[pick]), False, indices[pick])
            )
        else:
            pick = refine(np.flatnonzero(divisors == divisors.min()))
            rows.append(
                ScanRow(h, float(divisors[pick]), float(thresholds[pick]), True, indices[pick])
            )
    return ScanResult(rows, tuple(table.structural), r, ncap, gamma_star, alpha_star)


@dataclass
class MeasureReport:
    fraction: float
    flagged: int
    grid_count: int
    h0: float
    r: int
    ncap: float
    gamma_star: float
    alpha_star: float
    structural_count: int


def resonant_measure(
    model: PdeModel,
    h0: float,
    grid_count: int,
    r: int,
    ncap: float,
    gamma_star: float,
    alpha_star: float,
) -> MeasureReport:
    """Fraction of an h-grid in (0, h0] failing the h-dependent divisor test.

    The grid is h_i = h0 * i / grid_count. With gamma_star = 0 the threshold
    degenerates and only exact zeros of the divisor count as failures.
    """
    if h0 <= 0:
        raise ValueError("grid endpoint must be positive")
    if grid_count < 1:
        raise ValueError("grid must contain at least one point")
    if gamma_star < 0:
        raise ValueError("gamma threshold must be nonnegative")
    if alpha_star < 0:
        raise ValueError("alpha exponent must be nonnegative")
    table = _IndexTable.build(model, r, ncap)
    step_mask = np.abs(table.omegas) >= STRUCTURAL_OMEGA_TOL
    # alpha >= 0 makes the threshold largest at the smallest binding ball, so
    # per |Omega| only the minimal ball can flag a grid point
    tightest: dict = {}
    for om, ball in zip(np.abs(table.omegas[step_mask]), table.binding_n[step_mask]):
        key = float(om)
        tightest[key] = min(int(ball), tightest.get(key, int(ball)))
    hs = h0 * np.arange(1, grid_count + 1) / grid_count
    flagged = np.zeros(grid_count, dtype=bool)
    for om, ball in tightest.items():
        x = hs * om
        red = x - _TWO_PI * np.round(x / _TWO_PI)
        div = 2.0 * np.abs(np.sin(0.5 * x))
        div[np.abs(red) < EXACT_ZERO_TOL] = 0.0
        thresholds = hs * gamma_star / ball**alpha_star
        flagged |= (div < thresholds) | (div == 0.0)
    count = int(np.count_nonzero(flagged))
    return MeasureReport(
        fraction=count / grid_count,
        flagged=count,
        grid_count=grid_count,
        h0=h0,
        r=r,
        ncap=ncap,
        gamma_star=gamma_star,
        alpha_star=alpha_star,
        structural_count=len(table.structural),
    )


def write_scan_csv(result: ScanResult, path) -> None:
    """Scan table: h, min_divisor, threshold, pass, witness per row."""
    with atomic_write(path) as handle:
        writer = csv.writer(handle)
        writer.writerow(["h", "min_divisor", "threshold", "pass", "witness"])
        for row in result.rows:
            writer.writerow(
                [
                    fmt(row.h),
                    fmt(row.min_divisor),
                    fmt(row.threshold),
                    "true" if row.passed else "false",
                    row.witness.label() if row.witness is not None else "",
                ]
            )
