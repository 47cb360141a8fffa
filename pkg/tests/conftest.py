"""Shared helpers for the test suite.

Random states use a geometric amplitude profile with seeded uniform phases
so every test is reproducible and smooth enough for the splitting flows.
"""

import numpy as np
import pytest

import hamsplit as hs


def decayed_state(lattice, seed, decay=0.7, norm=None, s=2.0):
    """Smooth random state: |xi_a| = decay^(|a|_w - 1) with random phases."""
    rng = np.random.default_rng(seed)
    phases = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, lattice.shape))
    coeffs = decay ** (lattice.weights - 1.0) * phases
    state = hs.SpectralState(lattice, coeffs)
    if norm is not None:
        state.coeffs *= norm / hs.sobolev_norm(state, s)
    return state


@pytest.fixture
def cubic_nls():
    # gprime = (0, 1): G'(mu) = mu, the focusing-sign-free cubic benchmark
    return hs.nls_model(1, 16, gprime=(0.0, 1.0))


@pytest.fixture
def plain_nls():
    return hs.nls_model(1, 8)


@pytest.fixture
def small_wave():
    # quartic potential G(u) = u^4/4, so g(u) = u^3 vanishes to order 2
    return hs.wave_model(8, 1.0, g=(0.0, 0.0, 0.0, 1.0))
