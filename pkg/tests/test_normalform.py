"""Sparse polynomial algebra, index classification, homological solver."""

import cmath
import json
import math

import numpy as np
import pytest

import hamsplit as hs
from hamsplit.normalform import DEFAULT_DIVISOR_FLOOR


MI = hs.MultiIndex.canonical
Poly = hs.SparsePolynomial
JC = hs.JIndexClass


def poly_of(pairs, dim=1):
    return Poly.from_entries(dim, pairs)


def action(a):
    return MI([(a, 1), (a, -1)])


def random_zero_moment_poly(seed, r=3, ncap=2.0, lattice=None, n_terms=6):
    lattice = lattice or hs.ModeLattice(1, 3, hs.FULL)
    pool = [j for j in hs.enumerate_zero_moment(r, ncap, lattice)]
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(pool), size=min(n_terms, len(pool)), replace=False)
    terms = {
        pool[i]: complex(rng.standard_normal(), rng.standard_normal()) for i in picks
    }
    return Poly(lattice.dim, terms)


# ----------------------------------------------------------------- polynomial


def test_polynomial_rejects_bad_keys():
    with pytest.raises(TypeError):
        Poly(1, {(1, 1): 2.0})
    noncanonical = hs.MultiIndex((((2,), 1), ((1,), 1)))
    with pytest.raises(ValueError):
        Poly(1, {noncanonical: 1.0})
    with pytest.raises(ValueError):
        Poly(1, {MI([((1, 2), 1), ((1, 2), -1)]): 1.0})


def test_polynomial_rejects_non_finite():
    with pytest.raises(ValueError):
        Poly(1, {action(1): float("nan")})
    with pytest.raises(ValueError):
        Poly(1, {action(1): complex(0, float("inf"))})


def test_polynomial_drops_zeros():
    p = Poly(1, {action(1): 0.0, action(2): 1.0})
    assert len(p) == 1
    assert action(1) not in p.terms


def test_polynomial_constant_term_allowed():
    p = Poly(1, {MI([]): 2.5})
    assert p.degrees == (0,)
    assert p.degree == 0


def test_from_entries_merges_permutations():
    p = Poly.from_entries(
        1, [([(1, 1), (2, -1), (1, 1)], 1.0), ([(2, -1), (1, 1), (1, 1)], 0.5)]
    )
    assert len(p) == 1
    assert p.terms[MI([(1, 1), (1, 1), (2, -1)])] == 1.5


def test_degrees_and_homogeneity():
    p = poly_of([([(1, 1), (1, -1)], 1.0), ([(1, 1), (1, 1), (2, -1)], 2.0)])
    assert p.degrees == (2, 3)
    assert not p.is_homogeneous
    with pytest.raises(ValueError):
        _ = p.degree
    q = poly_of([([(1, 1), (1, 1), (2, -1)], 2.0)])
    assert q.degree == 3


def test_norm_inf():
    assert Poly(1).norm_inf == 0.0
    p = poly_of([([(1, 1), (1, -1)], 3 + 4j), ([(2, 1), (2, -1)], 1.0)])
    assert p.norm_inf == 5.0


def test_arithmetic():
    a, b = action(1), action(2)
    p = Poly(1, {a: 1.0, b: 2.0})
    q = Poly(1, {a: -1.0, b: 1.0})
    assert (p + q).terms == {b: 3.0}
    assert (p - q).terms == {a: 2.0, b: 1.0}
    assert (2j * p).terms == {a: 2j, b: 4j}
    assert (-p).terms == {a: -1.0, b: -2.0}
    with pytest.raises(ValueError):
        p + Poly(2)


def test_reality_defect():
    j = MI([(1, 1), (1, 1), (2, -1)])
    c = 0.3 - 0.7j
    real_poly = Poly(1, {j: c, j.conjugate(): c.conjugate()})
    assert real_poly.reality_defect() == 0.0
    broken = Poly(1, {j: c, j.conjugate(): c.conjugate() + 0.25})
    assert broken.reality_defect() == pytest.approx(0.25, abs=1e-15)


def test_evaluate_monomial():
    lat = hs.ModeLattice(1, 2, hs.FULL)
    st = hs.SpectralState(lat, np.zeros(lat.shape, dtype=complex))
    st.coeffs[lat.index(1)] = 0.4 + 0.3j
    st.coeffs[lat.index(2)] = -0.2 + 0.5j
    p = poly_of([([(1, 1), (1, 1), (2, -1)], 2.0 - 1.0j)])
    xi1, xi2 = 0.4 + 0.3j, -0.2 + 0.5j
    expected = (2.0 - 1.0j) * xi1 * xi1 * xi2.conjugate()
    assert p.evaluate(st) == pytest.approx(expected, abs=1e-15)
    lat2 = hs.ModeLattice(2, 2, hs.FULL)
    with pytest.raises(ValueError):
        p.evaluate(hs.SpectralState(lat2, np.zeros(lat2.shape, dtype=complex)))


# --------------------------------------------------------------- mu and spread


def test_mu_and_spread_examples():
    assert hs.mu_and_S(MI([(5, 1), (3, 1), (2, -1)])) == (2.0, 4.0)
    assert hs.mu_and_S(MI([(7, 1), (7, -1), (1, 1), (1, -1)])) == (1.0, 1.0)
    assert hs.mu_and_S(MI([(3, 1), (3, 1), (-3, 1)])) == (3.0, 3.0)


def test_mu_and_spread_needs_three_entries():
    with pytest.raises(ValueError):
        hs.mu_and_S(MI([(1, 1), (1, -1)]))


# ------------------------------------------------------------------- seminorm


def test_seminorm_single_monomial():
    c = 0.7
    p = Poly(1, {MI([(5, 1), (3, 1), (2, -1)]): c})
    # mu = 2, spread = 4: best constant c * 4^1 / 2^1
    assert hs.seminorm(p, 1.0, 0.0) == pytest.approx(2 * c, rel=1e-15)


def test_seminorm_empty_and_homogeneous():
    assert hs.seminorm(Poly(1), 2.0, 1.0) == 0.0
    p = random_zero_moment_poly(11)
    lam = -2.5j
    assert hs.seminorm(lam * p, 1.5, 0.5) == pytest.approx(
        abs(lam) * hs.seminorm(p, 1.5, 0.5), rel=1e-13
    )


def test_seminorm_subadditive_on_shared_support():
    p = random_zero_moment_poly(21)
    q = Poly(1, {k: complex(0.3, -0.1) * v for k, v in p.terms.items()})
    s = lambda f: hs.seminorm(f, 1.0, 1.0)
    assert s(p + q) <= s(p) + s(q) + 1e-14


# ------------------------------------------------------------- classification


def test_jclass_examples():
    assert hs.jclass(MI([(1, 1), (1, 1), (2, -1)]), 2, 3) is JC.IN_J
    far = MI([(3, 1), (-3, 1), (0, -1)])
    assert far.has_zero_moment()
    assert hs.jclass(far, 2, 3) is JC.OUTSIDE_J
    assert sum(1 for w in far.weights if w > 2) >= 2
    big_action = MI([(3, 1), (3, -1), (5, 1), (5, -1)])
    assert hs.jclass(big_action, 1, 4) is JC.ACTION_TYPE


def test_jclass_boundary_inclusive():
    j = MI([(4, 1), (2, -1), (2, -1)])
    # largest weight exactly (r-1)*n, second exactly n
    assert hs.jclass(j, 2, 3) is JC.IN_J


def test_jclass_validation():
    with pytest.raises(ValueError):
        hs.jclass(MI([(1, 1), (1, 1), (2, -1)]), 2, 4)
    with pytest.raises(ValueError):
        hs.jclass(MI([(1, 1), (1, 1), (2, -1)]), 0.5, 3)


def test_jclass_matches_brute_force():
    lat = hs.ModeLattice(1, 4, hs.FULL)
    for j in hs.enumerate_zero_moment(3, 4.0, lat):
        got = hs.jclass(j, 2, 3)
        if hs.is_action_type(j):
            expected = JC.ACTION_TYPE
        else:
            w = sorted(j.weights, reverse=True)
            expected = JC.IN_J if w[0] <= 4 and w[1] <= 2 else JC.OUTSIDE_J
        assert got is expected
        if got is JC.OUTSIDE_J:
            assert sum(1 for w in j.weights if w > 2) >= 2


# -------------------------------------------------------------------- bracket


def test_bracket_actions_commute():
    for a in (-2, 0, 1):
        for b in (-1, 2):
            out = hs.poisson_bracket(Poly(1, {action(a): 1.0}), Poly(1, {action(b): 1.0}))
            assert out.terms == {}


def test_bracket_lowering_oracle():
    # {xi_a eta_a, xi_a} contracts the single eta factor: i * xi_a
    f = Poly(1, {action(1): 1.0})
    g = Poly(1, {MI([(1, 1)]): 1.0})
    out = hs.poisson_bracket(f, g)
    assert out.terms == {MI([(1, 1)]): 1j}


def test_bracket_antisymmetry_exact():
    for seed in range(6):
        f = random_zero_moment_poly(seed, r=3)
        g = random_zero_moment_poly(seed + 100, r=4, ncap=2.0)
        fg = hs.poisson_bracket(f, g)
        gf = hs.poisson_bracket(g, f)
        assert (fg + gf).terms == {}


def test_bracket_degree_formula():
    f = random_zero_moment_poly(5, r=3)
    g = random_zero_moment_poly(6, r=4, ncap=2.0)
    out = hs.poisson_bracket(f, g)
    assert out.terms
    assert out.degrees == (5,)


def test_bracket_preserves_zero_moment():
    f = random_zero_moment_poly(7, r=3)
    g = random_zero_moment_poly(8, r=3)
    for key in hs.poisson_bracket(f, g).terms:
        assert key.has_zero_moment()


def test_bracket_jacobi_identity():
    for seed in (0, 1, 2):
        f = random_zero_moment_poly(seed, r=3, n_terms=4)
        g = random_zero_moment_poly(seed + 50, r=3, n_terms=4)
        k = random_zero_moment_poly(seed + 90, r=3, n_terms=4)
        total = (
            hs.poisson_bracket(f, hs.poisson_bracket(g, k))
            + hs.poisson_bracket(g, hs.poisson_bracket(k, f))
            + hs.poisson_bracket(k, hs.poisson_bracket(f, g))
        )
        scale = max(f.norm_inf * g.norm_inf * k.norm_inf, 1.0)
        assert total.norm_inf <= 1e-10 * scale


def test_bracket_action_supported_commutes_with_actions():
    z = Poly(1, {action(1): 0.3, MI([(1, 1), (1, -1), (2, 1), (2, -1)]): -1.2j})
    for a in (-2, 1):
        assert hs.poisson_bracket(Poly(1, {action(a): 1.0}), z).terms == {}


def test_bracket_degree_cap():
    f = random_zero_moment_poly(9, r=4, ncap=2.0)
    g = random_zero_moment_poly(10, r=4, ncap=2.0)
    with pytest.raises(ValueError):
        hs.poisson_bracket(f, g, max_degree=5)
    out = hs.poisson_bracket(f, g, max_degree=6)
    assert all(key.degree <= 6 for key in out.terms)


def test_bracket_dim_mismatch():
    with pytest.raises(ValueError):
        hs.poisson_bracket(Poly(1), Poly(2))


# ---------------------------------------------------------- homological solve


def test_solve_in_j_formula():
    m = hs.nls_model(1, 2)
    c = 0.3 - 0.2j
    j = MI([(1, 1), (1, 1), (2, -1)])
    p = Poly(1, {j: c})
    sol = hs.homological_solve(p, m, 0.1, 2.0)
    expected = 0.1 * c / (cmath.exp(-0.2j) - 1.0)
    assert sol.chi.terms == {j: pytest.approx(expected, rel=1e-15)}
    assert sol.zed.terms == {}
    assert hs.verify_conjugacy(sol, p, m) <= 1e-12 * 0.1 * abs(c)


def test_solve_outside_j_passthrough():
    m = hs.nls_model(1, 3)
    j = MI([(3, 1), (-3, 1), (0, -1)])
    p = Poly(1, {j: 1.5j})
    sol = hs.homological_solve(p, m, 0.1, 2.0)
    assert sol.chi.terms == {}
    assert sol.zed.terms == {j: 1.5j}
    assert hs.verify_conjugacy(sol, p, m) == 0.0


def test_solve_action_passthrough():
    m = hs.nls_model(1, 2)
    j = MI([(1, 1), (1, -1), (2, 1), (2, -1)])
    p = Poly(1, {j: 0.8})
    sol = hs.homological_solve(p, m, 0.3, 2.0)
    assert sol.zed.terms == {j: 0.8}
    assert sol.chi.terms == {}


def test_solve_mixed_support_invariants():
    m = hs.nls_model(1, 4)
    p = Poly(
        1,
        {
            MI([(1, 1), (1, -1), (2, 1), (2, -1)]): 1.0,
            MI([(1, 1), (1, 1), (1, 1), (3, -1)]): 2.0 - 1.0j,
            MI([(3, 1), (-3, 1), (4, -1), (-4, -1)]): 0.5j,
        },
    )
    sol = hs.homological_solve(p, m, 0.2, 2.0)
    assert set(sol.chi.terms) & set(sol.zed.terms) == set()
    assert set(sol.chi.terms) | set(sol.zed.terms) == set(p.terms)
    for key in sol.chi.terms:
        assert hs.jclass(key, 2.0, 4) is JC.IN_J
    for key in sol.zed.terms:
        assert hs.jclass(key, 2.0, 4) in (JC.ACTION_TYPE, JC.OUTSIDE_J)
    assert hs.verify_conjugacy(sol, p, m) <= 1e-12 * 0.2 * p.norm_inf


def test_solve_resonant_step_raises():
    m = hs.nls_model(1, 2)
    j = MI([(1, 1), (1, 1), (2, -1)])
    p = Poly(1, {j: 1.0})
    with pytest.raises(hs.ResonanceError) as info:
        hs.homological_solve(p, m, math.pi, 2.0)
    assert info.value.witness == j
    assert info.value.divisor <= DEFAULT_DIVISOR_FLOOR


def test_solve_divisor_floor_configurable():
    m = hs.nls_model(1, 2)
    p = Poly(1, {MI([(1, 1), (1, 1), (2, -1)]): 1.0})
    divisor = abs(cmath.exp(-0.2j) - 1.0)
    with pytest.raises(hs.ResonanceError):
        hs.homological_solve(p, m, 0.1, 2.0, divisor_floor=2 * divisor)
    sol = hs.homological_solve(p, m, 0.1, 2.0, divisor_floor=0.5 * divisor)
    assert sol.divisor_floor == 0.5 * divisor


def test_solve_validation():
    m = hs.nls_model(1, 2)
    good = Poly(1, {MI([(1, 1), (1, 1), (2, -1)]): 1.0})
    with pytest.raises(ValueError):
        hs.homological_solve(good, m, 0.0, 2.0)
    with pytest.raises(ValueError):
        hs.homological_solve(Poly(1), m, 0.1, 2.0)
    with pytest.raises(ValueError):
        hs.homological_solve(Poly(1, {action(1): 1.0}), m, 0.1, 2.0)
    with pytest.raises(ValueError):
        hs.homological_solve(Poly(1, {MI([(1, 1), (1, 1), (1, 1)]): 1.0}), m, 0.1, 2.0)
    off_lattice = Poly(1, {MI([(9, 1), (9, -1), (1, 1), (1, -1)]): 1.0})
    with pytest.raises(ValueError):
        hs.homological_solve(off_lattice, m, 0.1, 2.0)
    with pytest.raises(ValueError):
        hs.homological_solve(good, hs.nls_model(2, 2), 0.1, 2.0)


def test_solve_reality_propagation():
    m = hs.nls_model(1, 3)
    rng = np.random.default_rng(17)
    terms = {}
    for raw in ([(1, 1), (1, 1), (2, -1)], [(1, 1), (2, 1), (3, -1)], [(3, 1), (-3, 1), (0, -1)]):
        j = MI(raw)
        c = complex(rng.standard_normal(), rng.standard_normal())
        terms[j] = c
        terms[j.conjugate()] = c.conjugate()
    p = Poly(1, terms)
    assert p.reality_defect() == 0.0
    sol = hs.homological_solve(p, m, 0.2, 2.0)
    assert sol.chi.reality_defect() <= 1e-12 * max(sol.chi.norm_inf, 1.0)
    assert sol.zed.reality_defect() <= 1e-12 * max(sol.zed.norm_inf, 1.0)


def test_conjugacy_detects_perturbation():
    m = hs.nls_model(1, 2)
    j = MI([(1, 1), (1, 1), (2, -1)])
    p = Poly(1, {j: 1.0})
    sol = hs.homological_solve(p, m, 0.1, 2.0)
    delta = 1e-3
    bumped = hs.HomologicalSolution(
        chi=sol.chi + Poly(1, {j: delta}),
        zed=sol.zed,
        h=sol.h,
        n=sol.n,
        degree=sol.degree,
        divisor_floor=sol.divisor_floor,
    )
    divisor = abs(cmath.exp(-0.2j) - 1.0)
    assert hs.verify_conjugacy(bumped, p, m) >= divisor * delta - 1e-12


def test_conjugacy_empty_solution_zero():
    m = hs.nls_model(1, 2)
    empty = hs.HomologicalSolution(
        chi=Poly(1), zed=Poly(1), h=0.1, n=2.0, degree=3, divisor_floor=1e-12
    )
    assert hs.verify_conjugacy(empty, Poly(1), m) == 0.0


# ------------------------------------------------------------ vanishing check


def zero_tail_state(ncap=2.0, cutoff=3):
    lat = hs.ModeLattice(1, cutoff, hs.FULL)
    st = hs.SpectralState(lat, np.zeros(lat.shape, dtype=complex))
    rng = np.random.default_rng(23)
    for a in lat.modes():
        if hs.mode_weight(a) <= ncap:
            st.coeffs[lat.index(a)] = complex(rng.standard_normal(), rng.standard_normal())
    return st


def test_vanishing_check_outside_j_exact_zero():
    st = zero_tail_state()
    zed = Poly(1, {MI([(3, 1), (-3, 1), (0, -1)]): 2.3 - 1.1j})
    assert hs.normal_form_vanishing_check(zed, st, 1.0, 2.0) == 0.0


def test_vanishing_check_in_j_control_nonzero():
    st = zero_tail_state()
    zed = Poly(1, {MI([(1, 1), (1, 1), (2, -1)]): 1.0})
    assert hs.normal_form_vanishing_check(zed, st, 1.0, 2.0) > 1e-6


def test_vanishing_check_empty_polynomial():
    assert hs.normal_form_vanishing_check(Poly(1), zero_tail_state(), 1.0, 2.0) == 0.0


def test_vanishing_check_requires_zero_tail():
    lat = hs.ModeLattice(1, 3, hs.FULL)
    st = hs.SpectralState(lat, np.zeros(lat.shape, dtype=complex))
    st.coeffs[lat.index(3)] = 0.5
    zed = Poly(1, {MI([(3, 1), (-3, 1), (0, -1)]): 1.0})
    with pytest.raises(ValueError):
        hs.normal_form_vanishing_check(zed, st, 1.0, 2.0)


# ----------------------------------------------------------------------- json


def test_polynomial_json_round_trip(tmp_path):
    p = random_zero_moment_poly(31, r=3)
    path = tmp_path / "poly.json"
    hs.save_polynomial_json(p, path)
    assert hs.load_polynomial_json(path) == p


def test_polynomial_json_merges_duplicates(tmp_path):
    doc = {
        "dim": 1,
        "terms": [
            {"index": [[1, 1], [1, 1], [2, -1]], "re": 1.0, "im": 0.0},
            {"index": [[2, -1], [1, 1], [1, 1]], "re": 0.5, "im": -0.5},
        ],
    }
    path = tmp_path / "dup.json"
    path.write_text(json.dumps(doc))
    p = hs.load_polynomial_json(path)
    assert p.terms == {MI([(1, 1), (1, 1), (2, -1)]): 1.5 - 0.5j}


def test_polynomial_json_rejects_nonzero_moment(tmp_path):
    doc = {"dim": 1, "terms": [{"index": [[1, 1], [1, 1]], "re": 1.0, "im": 0.0}]}
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(hs.ConfigError):
        hs.load_polynomial_json(path)


def test_polynomial_json_rejects_unknown_keys(tmp_path):
    path = tmp_path / "extra.json"
    path.write_text(json.dumps({"dim": 1, "terms": [], "note": "hi"}))
    with pytest.raises(hs.ConfigError):
        hs.load_polynomial_json(path)
    path.write_text(json.dumps({"dim": 1, "terms": [{"index": [], "re": 0.0, "what": 1}]}))
    with pytest.raises(hs.ConfigError):
        hs.load_polynomial_json(path)


def test_polynomial_json_rejects_component_mismatch(tmp_path):
    doc = {"dim": 2, "terms": [{"index": [[1, 1], [1, -1]], "re": 1.0, "im": 0.0}]}
    path = tmp_path / "dims.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(hs.ConfigError):
        hs.load_polynomial_json(path)
