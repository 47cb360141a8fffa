"""Sparse polynomial machinery for normal-form computations.

Polynomials in the spectral coordinates are stored as sparse maps from
multi-indices to complex coefficients, with each monomial z_j the product of
xi_a over (a, +1) entries and conj(xi_a) over (a, -1) entries. The module
provides the canonical Poisson bracket on such monomials, the classification
of indices into action-type, near-resonant, and remainder sets, and the
homological equation solver that splits a perturbation into a resonant part
and a generating function for the coordinate change.
"""

from __future__ import annotations

import cmath
import json
import math
from collections import Counter
from dataclasses import dataclass
from enum import Enum

from .errors import ConfigError, ResonanceError
from .fileio import atomic_write
from .models import PdeModel
from .resonance import MultiIndex, is_action_type, omega_sum
from .state import SpectralState, head_tail

#: |exp(i h Omega) - 1| below this aborts the homological solve
DEFAULT_DIVISOR_FLOOR = 1e-12


class SparsePolynomial:
    """Polynomial with sparse monomial support in a fixed mode dimension.

    Terms map canonical MultiIndex keys to complex coefficients. The empty
    index (a constant term) is allowed; it shows up naturally in brackets of
    degree-one and degree-two polynomials.
    """

    __slots__ = ("dim", "terms")

    def __init__(self, dim: int, terms: dict | None = None):
        self.dim = int(dim)
        if self.dim < 1:
            raise ValueError("dimension must be positive")
        clean = {}
        for key, coeff in (terms or {}).items():
            if not isinstance(key, MultiIndex):
                raise TypeError("polynomial keys must be MultiIndex instances")
            if not key.is_canonical():
                raise ValueError(f"non-canonical multi-index {key}")
            if key.entries and key.dim != self.dim:
                raise ValueError(f"index {key} has dimension {key.dim}, expected {self.dim}")
            coeff = complex(coeff)
            if not (math.isfinite(coeff.real) and math.isfinite(coeff.imag)):
                raise ValueError(f"non-finite coefficient at {key}")
            if coeff != 0:
                clean[key] = coeff
        self.terms = clean

    @classmethod
    def from_entries(cls, dim: int, entries) -> "SparsePolynomial":
        """Build from (raw_entries, coefficient) pairs, merging duplicates."""
        acc: dict = {}
        for raw, coeff in entries:
            key = MultiIndex.canonical(raw)
            acc[key] = acc.get(key, 0.0) + complex(coeff)
        return cls(dim, acc)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SparsePolynomial)
            and self.dim == other.dim
            and self.terms == other.terms
        )

    def __len__(self) -> int:
        return len(self.terms)

    def __repr__(self) -> str:
        return f"SparsePolynomial(dim={self.dim}, terms={len(self.terms)})"

    @property
    def degrees(self) -> tuple:
        return tuple(sorted({key.degree for key in self.terms}))

    @property
    def is_homogeneous(self) -> bool:
        return len(self.degrees) <= 1

    @property
    def degree(self) -> int:
        degs = self.degrees
        if len(degs) != 1:
            raise ValueError(f"polynomial is not homogeneous (degrees {degs})")
        return degs[0]

    @property
    def norm_inf(self) -> float:
        if not self.terms:
            return 0.0
        return max(abs(c) for c in self.terms.values())

    def __add__(self, other: "SparsePolynomial") -> "SparsePolynomial":
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        acc = dict(self.terms)
        for key, coeff in other.terms.items():
            acc[key] = acc.get(key, 0.0) + coeff
        return SparsePolynomial(self.dim, acc)

    def __sub__(self, other: "SparsePolynomial") -> "SparsePolynomial":
        return self + (-1.0) * other

    def __rmul__(self, scalar) -> "SparsePolynomial":
        scalar = complex(scalar)
        return SparsePolynomial(
            self.dim, {key: scalar * coeff for key, coeff in self.terms.items()}
        )

    def __neg__(self) -> "SparsePolynomial":
        return (-1.0) * self

    def sorted_items(self) -> list:
        return sorted(self.terms.items(), key=lambda item: item[0].sort_key())

    def reality_defect(self) -> float:
        """Max |Q_conj(j) - conj(Q_j)|; zero for real-valued polynomials."""
        worst = 0.0
        for key, coeff in self.terms.items():
            partner = self.terms.get(key.conjugate(), 0.0)
            worst = max(worst, abs(partner - coeff.conjugate()))
        return worst

    def evaluate(self, state: SpectralState) -> complex:
        if state.lattice.dim != self.dim:
            raise ValueError("state dimension does not match polynomial")
        total = 0.0 + 0.0j
        for key, coeff in self.terms.items():
            prod = 1.0 + 0.0j
            for mode, delta in key.entries:
                amp = state.amplitude(mode if len(mode) > 1 else mode[0])
                prod *= amp if delta > 0 else amp.conjugate()
            total += coeff * prod
        return total


def mu_and_S(j: MultiIndex) -> tuple:
    """Third-largest weight and the spread largest - second + third.

    For weights sorted decreasingly as w0 >= w1 >= w2 >= ... this returns
    (w2, w0 - w1 + w2). Needs at least three entries.
    """
    if j.degree < 3:
        raise ValueError("index must have at least three entries")
    w = sorted(j.weights, reverse=True)
    mu = w[2]
    return mu, w[0] - w[1] + mu


def seminorm(poly: SparsePolynomial, big_m: float, nu: float) -> float:
    """max_j |Q_j| * S(j)^M / mu(j)^(M + nu) over the polynomial's support."""
    worst = 0.0
    for key, coeff in poly.terms.items():
        mu, spread = mu_and_S(key)
        worst = max(worst, abs(coeff) * spread**big_m / mu ** (big_m + nu))
    return worst


class JIndexClass(Enum):
    ACTION_TYPE = "action_type"
    IN_J = "in_j"
    OUTSIDE_J = "outside_j"


def jclass(j: MultiIndex, n: float, r: int) -> JIndexClass:
    """Classify a degree-r index against the weight cap N.

    Action-type indices are their own class. The remaining indices are
    near-resonant (IN_J) when the largest weight is at most (r-1)*N and the
    second largest at most N; everything else is OUTSIDE_J and must carry at
    least one high mode that a cap-N state cannot populate.
    """
    if j.degree != r:
        raise ValueError(f"index has degree {j.degree}, expected {r}")
    if n < 1:
        raise ValueError("weight cap must be at least 1")
    if is_action_type(j):
        return JIndexClass.ACTION_TYPE
    w = sorted(j.weights, reverse=True)
    if w[0] <= (r - 1) * n and w[1] <= n:
        return JIndexClass.IN_J
    return JIndexClass.OUTSIDE_J


def _remove_one(entries: tuple, target) -> tuple:
    out = list(entries)
    out.remove(target)
    return tuple(out)


def poisson_bracket(
    f: SparsePolynomial, g: SparsePolynomial, max_degree: int | None = None
) -> SparsePolynomial:
    """Canonical bracket {f, g} on sparse monomials.

    For monomials the bracket contracts one (a, -1) factor of f against one
    (a, +1) factor of g (with multiplicities, and a factor i), minus the
    transposed contraction. Degrees combine as deg f + deg g - 2; if
    max_degree is given, any term beyond it raises instead of being silently
    dropped.
    """
    if f.dim != g.dim:
        raise ValueError("dimension mismatch")
    # exact antisymmetry requires {g, f} to accumulate the bit-for-bit negation
    # of every partial sum, so each contribution is formed as scale * (cf * cg)
    # (complex products commute exactly) and summed in a swap-invariant order:
    # tagged by (lowering index, raising index, mode), identical in both calls
    acc: dict = {}

    def add_term(lower, raised, a, removed_lower, removed_raised, coeff):
        merged = MultiIndex.canonical(
            _remove_one(lower.entries, removed_lower)
            + _remove_one(raised.entries, removed_raised)
        )
        if max_degree is not None and merged.degree > max_degree:
            raise ValueError(
                f"bracket term of degree {merged.degree} exceeds cap {max_degree}"
            )
        acc.setdefault(merged, []).append(((lower.sort_key(), raised.sort_key(), a), coeff))

    for j, fj in f.terms.items():
        cj = Counter(j.entries)
        modes_j = {mode for mode, _ in j.entries}
        for k, gk in g.terms.items():
            ck = Counter(k.entries)
            pair = fj * gk
            for a in modes_j & {mode for mode, _ in k.entries}:
                m_jm, m_kp = cj[(a, -1)], ck[(a, 1)]
                if m_jm and m_kp:
                    add_term(j, k, a, (a, -1), (a, 1), (1j * (m_jm * m_kp)) * pair)
                m_jp, m_km = cj[(a, 1)], ck[(a, -1)]
                if m_jp and m_km:
                    add_term(k, j, a, (a, -1), (a, 1), (-1j * (m_jp * m_km)) * pair)
    out = {}
    for merged, parts in acc.items():
        parts.sort(key=lambda item: item[0])
        total = 0.0
        for _, coeff in parts:
            total += coeff
        out[merged] = total
    return SparsePolynomial(f.dim, out)


@dataclass
class HomologicalSolution:
    """Split of a perturbation into resonant part and generator.

    zed collects the action-type and remainder terms left in the normal
    form; chi solves (exp(i h Omega) - 1) chi_j = h P_j on the near-resonant
    set. Supports are disjoint by construction.
    """

    chi: SparsePolynomial
    zed: SparsePolynomial
    h: float
    n: float
    degree: int
    divisor_floor: float


def homological_solve(
    perturbation: SparsePolynomial,
    model: PdeModel,
    h: float,
    n: float,
    divisor_floor: float = DEFAULT_DIVISOR_FLOOR,
) -> HomologicalSolution:
    """Solve the one-step homological equation for a homogeneous perturbation.

    Every index must have zero moment and live on the model's lattice.
    Near-resonant indices get chi_j = h P_j / (exp(i h Omega_j) - 1); a
    divisor smaller than divisor_floor raises ResonanceError with the
    offending index as witness. Action-type and remainder indices pass
    through to zed unchanged.
    """
    if h <= 0:
        raise ValueError("step size must be positive")
    if not perturbation.terms:
        raise ValueError("perturbation has no terms")
    degree = perturbation.degree
    if degree < 3:
        raise ValueError(f"perturbation degree must be at least 3, got {degree}")
    if perturbation.dim != model.lattice.dim:
        raise ValueError("perturbation dimension does not match model")
    chi: dict = {}
    zed: dict = {}
    for key, coeff in perturbation.sorted_items():
        if not key.has_zero_moment():
            raise ValueError(f"index {key} has nonzero moment {key.moment()}")
        for mode, _ in key.entries:
            probe = mode if len(mode) > 1 else mode[0]
            if not model.lattice.contains(probe):
                raise ValueError(f"index {key} leaves the mode lattice")
        cls = jclass(key, n, degree)
        if cls is JIndexClass.IN_J:
            divisor = cmath.exp(1j * h * omega_sum(model, key)) - 1.0
            if abs(divisor) < divisor_floor:
                raise ResonanceError(
                    f"divisor {abs(divisor):.3e} below floor {divisor_floor:.3e} at {key}",
                    witness=key,
                    divisor=abs(divisor),
                )
            chi[key] = h * coeff / divisor
        else:
            zed[key] = coeff
    return HomologicalSolution(
        chi=SparsePolynomial(perturbation.dim, chi),
        zed=SparsePolynomial(perturbation.dim, zed),
        h=h,
        n=n,
        degree=degree,
        divisor_floor=divisor_floor,
    )


def verify_conjugacy(
    solution: HomologicalSolution, perturbation: SparsePolynomial, model: PdeModel
) -> float:
    """Max residual of (exp(i h Omega) - 1) chi_j - h P_j + h Z_j over all terms."""
    h = solution.h
    keys = set(perturbation.terms) | set(solution.chi.terms) | set(solution.zed.terms)
    worst = 0.0
    for key in keys:
        divisor = cmath.exp(1j * h * omega_sum(model, key)) - 1.0
        residual = (
            divisor * solution.chi.terms.get(key, 0.0)
            - h * perturbation.terms.get(key, 0.0)
            + h * solution.zed.terms.get(key, 0.0)
        )
        worst = max(worst, abs(residual))
    return worst


def normal_form_vanishing_check(
    zed: SparsePolynomial, state: SpectralState, s: float, n: float
) -> float:
    """|{weighted super-action capped at N, zed}| evaluated at the state.

    Bracketing a monomial z_j against sum_{w_a <= N} w_a^(2s) I_a multiplies
    it by i times the signed weight sum of its low entries, so the whole
    bracket evaluates in closed form. Remainder-supported zed on a state
    with no modes above N gives exactly zero.
    """
    if state.lattice.dim != zed.dim:
        raise ValueError("state dimension does not match polynomial")
    if head_tail(state, n, s)[1] != 0.0:
        raise ValueError("state has nonzero tail beyond the weight cap")
    total = 0.0 + 0.0j
    for key, coeff in zed.terms.items():
        c = 0.0
        for (_, delta), w in zip(key.entries, key.weights):
            if w <= n:
                c += delta * w ** (2.0 * s)
        prod = 1.0 + 0.0j
        for mode, delta in key.entries:
            amp = state.amplitude(mode if len(mode) > 1 else mode[0])
            prod *= amp if delta > 0 else amp.conjugate()
        total += coeff * 1j * c * prod
    return abs(total)


def save_polynomial_json(poly: SparsePolynomial, path) -> None:
    """Write {dim, terms: [{index: [[components..., sign]], re, im}]} JSON."""
    terms = []
    for key, coeff in poly.sorted_items():
        terms.append(
            {
                "index": [list(mode) + [delta] for mode, delta in key.entries],
                "re": coeff.real,
                "im": coeff.imag,
            }
        )
    with atomic_write(path) as handle:
        json.dump({"dim": poly.dim, "terms": terms}, handle, indent=2)
        handle.write("\n")


def load_polynomial_json(path) -> SparsePolynomial:
    """Read a polynomial, canonicalizing indices and merging duplicate terms.

    Every index must have zero moment; violations raise ConfigError since a
    momentum-conserving Hamiltonian cannot contain such terms.
    """
    with open(path, encoding="utf-8") as handle:
        data = json.load(handle)
    if not isinstance(data, dict):
        raise ConfigError("polynomial file must contain a JSON object")
    unknown = set(data) - {"dim", "terms"}
    if unknown:
        raise ConfigError(f"unknown polynomial keys {sorted(unknown)}")
    try:
        dim = int(data["dim"])
        raw_terms = data["terms"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad polynomial header: {exc}") from exc
    if not isinstance(raw_terms, list):
        raise ConfigError("terms must be a list")
    acc: dict = {}
    for pos, item in enumerate(raw_terms):
        if not isinstance(item, dict) or set(item) - {"index", "re", "im"}:
            raise ConfigError(f"bad term at position {pos}")
        try:
            entries = []
            for raw in item["index"]:
                comps, delta = raw[:-1], raw[-1]
                if len(comps) != dim:
                    raise ValueError(f"mode {comps} has {len(comps)} components, expected {dim}")
                entries.append((tuple(int(c) for c in comps), int(delta)))
            key = MultiIndex.canonical(entries)
            coeff = complex(float(item.get("re", 0.0)), float(item.get("im", 0.0)))
        except (TypeError, ValueError, IndexError) as exc:
            raise ConfigError(f"bad term at position {pos}: {exc}") from exc
        if not key.has_zero_moment():
            raise ConfigError(f"term at position {pos} has nonzero moment {key.moment()}")
        acc[key] = acc.get(key, 0.0) + coeff
    return SparsePolynomial(dim, acc)
