"""Model definitions: NLS on the d-torus and a nonlinear wave equation on the circle.

Both models split as H = H0 + P with H0 = sum_a omega_a I_a diagonal in the
spectral basis. Dispersion uses the raw sum of squared components (plus the
potential coefficient or the mass), never the weight with its floor at 1.

NLS synthesis convention: psi(x) = (2 pi)^(-d/2) sum_a xi_a exp(i a.x) on the
full lattice. The wave model uses the even (cosine) eigenbasis of
-d^2/dx^2 + m on the circle, phi_0 = 1/sqrt(2 pi) and phi_a = cos(ax)/sqrt(pi)
for a >= 1, realized on a half-period DCT grid of exactly K+1 collocation
points so that encoding arbitrary real (u, v) grids is a bijection.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from scipy import fft as sfft

from .errors import ConfigError
from .fileio import atomic_write
from .lattice import FULL, HALF, ModeLattice, as_components
from .state import SpectralState

NLS = "nls"
WAVE = "wave"

_TWO_PI = 2.0 * np.pi


class FilterKind(enum.Enum):
    """Frequency filter shapes for the mollified impulse variant."""

    NONE = "none"
    SINC = "sinc"
    RAISED_COSINE = "raised_cosine"


def _poly_nonzero_order(coeffs) -> int | None:
    for k, c in enumerate(coeffs):
        if c != 0:
            return k
    return None


@dataclass(frozen=True)
class NlsNonlinearity:
    """Gauge-invariant density G(|psi|^2), given by the coefficients of G'.

    ``gprime`` lists ascending powers of mu = |psi|^2. The constant term must
    vanish: a nonzero G'(0) would make the nonlinear energy quadratic in the
    state, below the required vanishing order 3.
    """

    gprime: tuple

    def __post_init__(self):
        object.__setattr__(self, "gprime", tuple(float(c) for c in self.gprime))
        if self.gprime and self.gprime[0] != 0.0:
            raise ConfigError("G' must vanish at mu = 0 (zero constant coefficient)")

    @property
    def vanishing_order(self) -> int | None:
        """Order of the nonlinear energy as a polynomial in the state, None if zero."""
        k = _poly_nonzero_order(self.gprime)
        return None if k is None else 2 * (k + 1)

    @property
    def is_zero(self) -> bool:
        return _poly_nonzero_order(self.gprime) is None


@dataclass(frozen=True)
class WaveNonlinearity:
    """Force density g(u) with antiderivative G, coefficients in ascending powers of u.

    g must vanish to order 2 at u = 0 (no constant, no linear term), which
    keeps the nonlinear energy at vanishing order >= 3.
    """

    g: tuple

    def __post_init__(self):
        object.__setattr__(self, "g", tuple(float(c) for c in self.g))
        if any(c != 0.0 for c in self.g[:2]):
            raise ConfigError("wave force must vanish to order 2 at u = 0")

    @property
    def vanishing_order(self) -> int | None:
        """Order of the nonlinear energy in the state, None if zero."""
        # G integrates g, u is linear in the state: order k + 1
        k = _poly_nonzero_order(self.g)
        return None if k is None else k + 1

    @property
    def is_zero(self) -> bool:
        return _poly_nonzero_order(self.g) is None


@dataclass(frozen=True, eq=False)
class PdeModel:
    """A Hamiltonian PDE truncated to a spectral lattice."""

    kind: str
    lattice: ModeLattice
    nonlinearity: NlsNonlinearity | WaveNonlinearity | None = None
    potential: np.ndarray | None = None
    mass: float | None = None
    filter_kind: FilterKind = FilterKind.NONE
    dealias: bool = True

    @cached_property
    def frequencies(self) -> np.ndarray:
        """Dispersion omega_a per mode, lattice shaped."""
        if self.kind == NLS:
            base = self.lattice.sum_of_squares.copy()
            if self.potential is not None:
                base = base + self.potential
            return base
        return np.sqrt(self.lattice.sum_of_squares + self.mass)

    def frequency(self, a) -> float:
        return float(self.frequencies[self.lattice.index(a)])

    @property
    def grid_size(self) -> int:
        """Collocation points per axis used by nonlinear evaluations."""
        k1 = self.lattice.cutoff + 1
        if self.kind == NLS:
            if not self.dealias:
                return 2 * k1
            # pad past 3(K+1) up to a power of two: radix-2 transforms carry no
            # measurable mass bias, mixed-radix ones drift ~1e-16 per round trip
            return 1 << (3 * k1 - 1).bit_length()
        return int(math.ceil(1.5 * k1)) if self.dealias else k1


def nls_model(
    dim: int,
    cutoff: int,
    gprime=(),
    potential=None,
    filter_kind: FilterKind = FilterKind.NONE,
    dealias: bool = True,
) -> PdeModel:
    """NLS on the d-torus: omega_a = sum a_i^2 + V_a on the full lattice.

    ``potential`` gives the real convolution coefficients V_a, either as a
    sparse {mode: value} mapping or as a lattice-shaped array; omitted modes
    are zero.
    """
    lattice = ModeLattice(dim, cutoff, FULL)
    pot = None
    if potential is not None:
        if isinstance(potential, dict):
            pot = np.zeros(lattice.shape)
            for a, v in potential.items():
                value = complex(v)
                if value.imag != 0.0:
                    raise ConfigError(f"potential coefficient at mode {a} must be real")
                pot[lattice.index(a)] = value.real
        else:
            arr = np.asarray(potential)
            if np.iscomplexobj(arr):
                if np.any(arr.imag != 0.0):
                    raise ConfigError("potential coefficients must be real")
                arr = arr.real
            pot = arr.astype(float)
            if pot.shape != lattice.shape:
                raise ConfigError(
                    f"potential shape {pot.shape} does not match lattice shape {lattice.shape}"
                )
        if not np.all(np.isfinite(pot)):
            raise ConfigError("potential coefficients must be finite")
    nl = gprime if isinstance(gprime, NlsNonlinearity) else NlsNonlinearity(tuple(gprime))
    return PdeModel(NLS, lattice, nl, pot, None, filter_kind, dealias)


def wave_model(
    cutoff: int,
    mass: float,
    g=(),
    filter_kind: FilterKind = FilterKind.NONE,
    dealias: bool = True,
) -> PdeModel:
    """Wave equation on the circle: omega_a = sqrt(a^2 + m) on the half lattice."""
    if mass <= 0:
        raise ConfigError("wave mass must be positive")
    lattice = ModeLattice(1, cutoff, HALF)
    nl = g if isinstance(g, WaveNonlinearity) else WaveNonlinearity(tuple(g))
    return PdeModel(WAVE, lattice, nl, None, float(mass), filter_kind, dealias)


# ---------------------------------------------------------------------------
# grid transforms


@lru_cache(maxsize=None)
def _fft_bins(cutoff: int, grid: int) -> np.ndarray:
    return np.arange(-cutoff, cutoff + 1) % grid


def _nls_embed(model: PdeModel, coeffs: np.ndarray, grid: int) -> np.ndarray:
    """Centered coefficients placed into an FFT-ordered zero-padded spectrum."""
    d = model.lattice.dim
    bins = _fft_bins(model.lattice.cutoff, grid)
    spec = np.zeros((grid,) * d, dtype=complex)
    spec[np.ix_(*([bins] * d))] = coeffs
    return spec


def _nls_extract(model: PdeModel, spec: np.ndarray, grid: int) -> np.ndarray:
    """Centered coefficients read back out of an FFT-ordered spectrum."""
    d = model.lattice.dim
    bins = _fft_bins(model.lattice.cutoff, grid)
    return spec[np.ix_(*([bins] * d))]


def _nls_grid_scale(model: PdeModel, grid: int) -> float:
    """Factor turning raw ifftn output into physical psi values."""
    d = model.lattice.dim
    return grid**d * _TWO_PI ** (-d / 2.0)


def nls_to_grid(model: PdeModel, coeffs: np.ndarray, grid: int | None = None) -> np.ndarray:
    """Evaluate psi on the collocation grid from centered coefficients."""
    m = grid or model.grid_size
    return sfft.ifftn(_nls_embed(model, coeffs, m)) * _nls_grid_scale(model, m)


def nls_from_grid(model: PdeModel, values: np.ndarray, grid: int | None = None) -> np.ndarray:
    """Extract centered coefficients from grid values, truncating to the lattice."""
    m = grid or model.grid_size
    return _nls_extract(model, sfft.fftn(values), m) / _nls_grid_scale(model, m)


def wave_to_grid(model: PdeModel, basis_coeffs: np.ndarray, grid: int | None = None) -> np.ndarray:
    """Evaluate sum_a c_a phi_a at the DCT collocation points x_m = pi(2m+1)/(2M)."""
    k1 = model.lattice.cutoff + 1
    m = grid or model.grid_size
    spec = np.zeros(m)
    spec[0] = 2.0 * m * basis_coeffs[0] / math.sqrt(_TWO_PI)
    spec[1:k1] = m * basis_coeffs[1:] / math.sqrt(np.pi)
    return sfft.idct(spec, type=2)


def wave_from_grid(model: PdeModel, values: np.ndarray) -> np.ndarray:
    """Cosine-basis coefficients of real grid values, truncated to the lattice."""
    k1 = model.lattice.cutoff + 1
    m = len(values)
    spec = sfft.dct(values, type=2)
    out = np.empty(k1)
    out[0] = spec[0] * math.sqrt(_TWO_PI) / (2.0 * m)
    out[1:] = spec[1:k1] * math.sqrt(np.pi) / m
    return out


def wave_grid_points(model: PdeModel, grid: int | None = None) -> np.ndarray:
    m = grid or model.grid_size
    return np.pi * (2.0 * np.arange(m) + 1.0) / (2.0 * m)


# ---------------------------------------------------------------------------
# encode / decode and gradients


def wave_encode(model: PdeModel, u_grid, v_grid) -> SpectralState:
    """Map displacement and velocity grids to spectral coordinates.

    In the cosine eigenbasis, xi_a = (omega_a^(1/2) u_a + i omega_a^(-1/2) v_a)/sqrt(2).
    Grids must have the model's base collocation size K+1.
    """
    if model.kind != WAVE:
        raise ValueError("wave_encode requires a wave model")
    k1 = model.lattice.cutoff + 1
    u_grid = np.asarray(u_grid, dtype=float)
    v_grid = np.asarray(v_grid, dtype=float)
    if u_grid.shape != (k1,) or v_grid.shape != (k1,):
        raise ValueError(f"wave grids must have {k1} points")
    ua = wave_from_grid(model, u_grid)
    va = wave_from_grid(model, v_grid)
    omega = model.frequencies
    root = np.sqrt(omega)
    coeffs = (root * ua + 1j * va / root) / math.sqrt(2.0)
    return SpectralState(model.lattice, coeffs)


def wave_decode(model: PdeModel, state: SpectralState) -> tuple:
    """Inverse of :func:`wave_encode`, returning (u_grid, v_grid)."""
    if model.kind != WAVE:
        raise ValueError("wave_decode requires a wave model")
    k1 = model.lattice.cutoff + 1
    omega = model.frequencies
    root = np.sqrt(omega)
    q = math.sqrt(2.0) * state.coeffs.real
    p = math.sqrt(2.0) * state.coeffs.imag
    u_grid = wave_to_grid(model, q / root, grid=k1)
    v_grid = wave_to_grid(model, p * root, grid=k1)
    return u_grid, v_grid


def _gprime_values(nl: NlsNonlinearity, mu: np.ndarray) -> np.ndarray:
    return np.polynomial.polynomial.polyval(mu, nl.gprime)


def _antiderivative(coeffs) -> np.ndarray:
    out = np.zeros(len(coeffs) + 1)
    for k, c in enumerate(coeffs):
        out[k + 1] = c / (k + 1.0)
    return out


def nonlinear_gradient(model: PdeModel, state: SpectralState) -> np.ndarray:
    """Spectral gradient of the nonlinear energy with respect to the conjugate variables.

    For NLS this is the coefficient array of G'(|psi|^2) psi; for the wave
    model it is omega^(-1/2) times the cosine coefficients of g(u), over
    sqrt(2). Evaluation runs on the dealiased grid when enabled.
    """
    if model.nonlinearity is None or model.nonlinearity.is_zero:
        return np.zeros(model.lattice.shape, dtype=complex)
    if model.kind == NLS:
        psi = nls_to_grid(model, state.coeffs)
        mu = psi.real**2 + psi.imag**2
        return nls_from_grid(model, _gprime_values(model.nonlinearity, mu) * psi)
    omega = model.frequencies
    root = np.sqrt(omega)
    q = math.sqrt(2.0) * state.coeffs.real
    u = wave_to_grid(model, q / root)
    gu = np.polynomial.polynomial.polyval(u, model.nonlinearity.g)
    ga = wave_from_grid(model, gu)
    return (ga / root / math.sqrt(2.0)).astype(complex)


def nonlinear_energy(model: PdeModel, state: SpectralState) -> float:
    """Quadrature value of the nonlinear energy integral."""
    if model.nonlinearity is None or model.nonlinearity.is_zero:
        return 0.0
    if model.kind == NLS:
        d = model.lattice.dim
        m = model.grid_size
        psi = nls_to_grid(model, state.coeffs)
        mu = psi.real**2 + psi.imag**2
        gcoeffs = _antiderivative(model.nonlinearity.gprime)
        density = np.polynomial.polynomial.polyval(mu, gcoeffs)
        return float(np.sum(density) * (_TWO_PI / m) ** d)
    m = model.grid_size
    omega = model.frequencies
    q = math.sqrt(2.0) * state.coeffs.real
    u = wave_to_grid(model, q / np.sqrt(omega))
    gcoeffs = _antiderivative(model.nonlinearity.g)
    density = np.polynomial.polynomial.polyval(u, gcoeffs)
    return float(np.sum(density) * _TWO_PI / m)


def mollifier_factors(model: PdeModel, h: float) -> np.ndarray:
    """Filter values Phi(h omega_a) per mode: real, even, bounded, Phi(0) = 1."""
    x = h * model.frequencies
    if model.filter_kind is FilterKind.NONE:
        return np.ones(model.lattice.shape)
    if model.filter_kind is FilterKind.SINC:
        return np.sinc(x / np.pi)
    return 0.5 * (1.0 + np.cos(x))


def mollifier_apply(model: PdeModel, h: float, state: SpectralState) -> SpectralState:
    """Apply the frequency filter Phi(h H0) to a state."""
    return SpectralState(model.lattice, mollifier_factors(model, h) * state.coeffs)


# ---------------------------------------------------------------------------
# descriptor files

_FILTER_NAMES = {f.value: f for f in FilterKind}


def save_model_json(model: PdeModel, path) -> None:
    """Write the model descriptor used by the command line tools."""
    doc: dict = {
        "type": model.kind,
        "d": model.lattice.dim,
        "K": model.lattice.cutoff,
    }
    if model.kind == NLS:
        if model.potential is not None and np.any(model.potential):
            entries = []
            flat = model.potential.ravel()
            for mode, v in zip(model.lattice.modes(), flat):
                if v != 0.0:
                    comps = [mode] if model.lattice.dim == 1 else list(mode)
                    entries.append([*comps, v])
            doc["potential"] = entries
        doc["nonlinearity"] = {
            "kind": "gauge_invariant",
            "coefficients": list(model.nonlinearity.gprime),
        }
    else:
        doc["mass"] = model.mass
        doc["nonlinearity"] = {"kind": "kick", "coefficients": list(model.nonlinearity.g)}
    doc["filter"] = model.filter_kind.value
    doc["dealias"] = model.dealias
    with atomic_write(path) as handle:
        json.dump(doc, handle, indent=2)
        handle.write("\n")


def load_model_json(source) -> PdeModel:
    """Read a model descriptor from a path or an already-parsed mapping.

    Unknown keys are rejected so that typos fail loudly.
    """
    if isinstance(source, dict):
        doc = source
    else:
        with open(source) as handle:
            doc = json.load(handle)
    allowed = {"type", "d", "K", "potential", "nonlinearity", "mass", "filter", "dealias"}
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown model descriptor keys: {sorted(unknown)}")
    kind = doc.get("type")
    if kind not in (NLS, WAVE):
        raise ConfigError(f"model type must be 'nls' or 'wave', got {kind!r}")
    try:
        dim = int(doc["d"])
        cutoff = int(doc["K"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError("model descriptor needs integer 'd' and 'K'") from exc
    filter_kind = _FILTER_NAMES.get(doc.get("filter") or "none")
    if filter_kind is None:
        raise ConfigError(f"unknown filter {doc.get('filter')!r}")
    dealias = bool(doc.get("dealias", True))
    nl = doc.get("nonlinearity") or {}
    nl_kind = nl.get("kind")
    coeffs = tuple(nl.get("coefficients", ()))
    if kind == NLS:
        if nl and nl_kind != "gauge_invariant":
            raise ConfigError(f"nls nonlinearity kind must be 'gauge_invariant', got {nl_kind!r}")
        potential = None
        if doc.get("potential"):
            potential = {}
            for entry in doc["potential"]:
                if len(entry) != dim + 1:
                    raise ConfigError(f"potential entry {entry} needs {dim} components and a value")
                mode = int(entry[0]) if dim == 1 else tuple(int(c) for c in entry[:dim])
                potential[mode] = float(entry[-1])
        if doc.get("mass") is not None:
            raise ConfigError("mass is a wave-model field")
        return nls_model(dim, cutoff, coeffs, potential, filter_kind, dealias)
    if nl and nl_kind != "kick":
        raise ConfigError(f"wave nonlinearity kind must be 'kick', got {nl_kind!r}")
    if dim != 1:
        raise ConfigError("the wave model is one dimensional")
    if doc.get("potential"):
        raise ConfigError("potential is an nls-model field")
    mass = doc.get("mass")
    if mass is None:
        raise ConfigError("wave model needs a positive mass")
    return wave_model(cutoff, float(mass), coeffs, filter_kind, dealias)
