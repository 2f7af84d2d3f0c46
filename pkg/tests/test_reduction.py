import cmath
import math
from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st

from nlsnf.lattice import SpectralField
from nlsnf.poly import ModeSpace, exps_from
from nlsnf.qcomplex import QComplex
from nlsnf.reduction import (ReducedState, bogoliubov, bogoliubov_symbolic, diagonalize, expand_reduced_hamiltonian,
                             field_to_vector, frequencies, from_x, inverse, omega, pde_to_u,
                             reduced_hamiltonian_blocks, reduce, to_x)

SPACE = ModeSpace.ball(1, 3)


def grid_energy(u: SpectralField, p: int, n_grid: int = 64) -> float:
    """Independent oracle: kinetic sum plus the grid mean of |u|^{2p+2}/(p+1) (exact quadrature)."""
    kin = math.fsum(n[0] ** 2 * abs(c) ** 2 for n, c in u.items())
    vals = np.zeros(n_grid, dtype=complex)
    x = 2 * np.pi * np.arange(n_grid) / n_grid
    for n, c in u.items():
        vals += c * np.exp(1j * n[0] * x)
    return kin + float(np.mean(np.abs(vals) ** (2 * p + 2))) / (p + 1)


@pytest.mark.parametrize("p,L", [(1, 0.7), (2, 0.7), (1, 1.3)])
def test_quadratic_block_closed_form(p, L):
    sp = ModeSpace.ball(1, 2)
    H = expand_reduced_hamiltonian(p, L, sp, 2)
    Lp = L ** p
    for m in sp.modes:
        assert H.terms[exps_from(sp, {m: 1}, {m: 1})] == pytest.approx(m[0] ** 2 + p * Lp)
    assert H.terms[exps_from(sp, {(1,): 1, (-1,): 1})] == pytest.approx(p * Lp)
    assert H.terms[exps_from(sp, None, {(2,): 1, (-2,): 1})] == pytest.approx(p * Lp)


@pytest.mark.parametrize("p", [1, 2, 3])
def test_cubic_block_closed_form(p):
    sp = ModeSpace.ball(1, 2)
    blocks = reduced_hamiltonian_blocks(p, sp, 3)
    # per ordered tuple: p(p+1)/2 on v v conj(v) and p(p-1)/6 on v v v
    assert blocks[3].terms[exps_from(sp, {(1,): 2}, {(2,): 1})] == QComplex(Fraction(p * (p + 1), 2))
    # v_1 v_1 v_{-2} arises from 3 orderings
    vvv = blocks[3].terms.get(exps_from(sp, {(1,): 2, (-2,): 1}), QComplex(0))
    assert vvv == QComplex(Fraction(3 * p * (p - 1), 6))


@pytest.mark.parametrize("p", [1, 2])
def test_quartic_block_mixed_coefficients(p):
    sp = ModeSpace.ball(1, 2)
    B4 = reduced_hamiltonian_blocks(p, sp, 4)[4]
    # v_1 v_2 conj(v_1) conj(v_2): convolution part p^2 (p+1) plus the S^2 cross term of the mass expansion
    mono = exps_from(sp, {(1,): 1, (2,): 1}, {(1,): 1, (2,): 1})
    expected = {1: -1, 2: 2}[p]
    assert B4.terms[mono] == QComplex(expected)


def test_p1_has_no_degree_six_block():
    assert 6 not in reduced_hamiltonian_blocks(1, ModeSpace.ball(1, 2), 6)


def test_zero_mode_rejected():
    with pytest.raises(ValueError):
        reduced_hamiltonian_blocks(1, ModeSpace([(0,), (1,)]), 3)


@pytest.mark.parametrize("p", [1, 2])
@pytest.mark.parametrize("D", [3, 4, 5])
def test_expansion_matches_grid_quadrature(p, D):
    L = 0.6
    rng = np.random.default_rng(p * 10 + D)
    base = {m: complex(rng.normal(), rng.normal()) for m in SPACE.modes}
    H = expand_reduced_hamiltonian(p, L, SPACE, D)
    e0 = L ** (p + 1) / (p + 1)
    errs = []
    for t in (1e-2, 5e-3):
        v = SpectralField(1, 8, {m: t * c for m, c in base.items()})
        u = inverse(ReducedState(L, 0.0, v))
        exact = grid_energy(u, p) - e0
        approx = H.evaluate(field_to_vector(v, SPACE)).real
        errs.append(abs(exact - approx))
    # remainder is O(t^q) with q the next nonvanishing degree (p = 1 has no degree-6 block)
    q = D + 2 if (p == 1 and D == 5) else D + 1
    assert errs[1] / errs[0] == pytest.approx(0.5 ** q, rel=0.15)


@settings(max_examples=25)
@given(st.floats(0.05, 2.0), st.floats(-3, 3))
def test_reduce_inverse_round_trip(L, phase):
    v = SpectralField(1, 4, {(1,): 0.1 + 0.05j, (-2,): 0.02})
    if 0.1 ** 2 + 0.05 ** 2 + 0.02 ** 2 >= L:
        return
    u = inverse(ReducedState(L, phase, v))
    st_ = reduce(u)
    assert st_.L == pytest.approx(L)
    assert abs(cmath.exp(1j * st_.nu0) - cmath.exp(1j * phase)) < 1e-12
    for n in v:
        assert abs(st_.v[n] - v[n]) < 1e-14


def test_mass_above_L_rejected():
    with pytest.raises(ValueError):
        ReducedState(0.01, 0.0, SpectralField(1, 2, {(1,): 0.2}))


def test_pde_to_u_is_an_involution():
    psi = SpectralField(1, 3, {(0,): 0.5, (1,): 0.1j, (-2,): 0.03})
    assert pde_to_u(pde_to_u(psi)).coeffs == psi.coeffs
    assert pde_to_u(psi)[(-1,)] == pytest.approx(-0.1j)


@pytest.mark.parametrize("mu,p,L", [(1, 1, 1.0), (4, 2, 0.5), (9, 1, 0.31), (25, 3, 0.2)])
def test_bogoliubov_coefficients(mu, p, L):
    bc = bogoliubov(mu, p, L)
    assert bc.a ** 2 - bc.b ** 2 == pytest.approx(1.0, abs=1e-13)
    A, B = mu + p * L ** p, p * L ** p
    assert bc.omega == pytest.approx(math.sqrt(A * A - B * B))
    assert math.tanh(2 * math.atanh(bc.b / bc.a)) == pytest.approx(B / A)
    assert bc.condition >= 1.0


def test_omega_values():
    assert omega(1, 1, 1.0) == pytest.approx(math.sqrt(3), abs=1e-15)
    freq = frequencies(2, 0.5, 10)
    for mu in range(1, 11):
        assert freq[mu] == pytest.approx(math.sqrt(mu * (mu + 4 * 0.25)))
    with pytest.raises(KeyError):
        freq[11]


def test_focusing_frequencies_can_be_complex():
    # lam = +1: Omega(1)^2 = 1 - 2 p L^p < 0 for L > 1/2
    with pytest.raises(ValueError):
        omega(1, 1, 0.8, lam=1.0)
    assert omega(1, 1, 0.2, lam=1.0) == pytest.approx(math.sqrt(1 - 0.4))


@pytest.mark.parametrize("p,L", [(1, 0.31), (2, 0.8)])
def test_diagonalized_quadratic_part(p, L):
    sp = ModeSpace.ball(1, 3)
    Hx = diagonalize(expand_reduced_hamiltonian(p, L, sp, 2), p, L)
    for k, c in Hx.terms.items():
        alpha, beta = k[:sp.n], k[sp.n:]
        if sum(alpha) != sum(beta):
            assert abs(c) < 1e-13
        elif abs(c) > 1e-13:
            i = alpha.index(1)
            assert beta[i] == 1
            assert c.real == pytest.approx(omega(sp.modes[i][0] ** 2, p, L), rel=1e-13)


def test_symbolic_bogoliubov_is_exact():
    sp = ModeSpace.ball(1, 2)
    poly, omegas = bogoliubov_symbolic(sp, 1)
    assert len(poly.terms) == sp.n
    for i, m in enumerate(sp.modes):
        c = poly.terms[exps_from(sp, {m: 1}, {m: 1})]
        assert sympy.simplify(c - omegas[m[0] ** 2]) == 0


@settings(max_examples=25)
@given(st.floats(0.05, 1.5), st.integers(1, 2))
def test_to_x_round_trip(L, p):
    v = SpectralField(1, 4, {(1,): 0.1 + 0.05j, (-1,): -0.02j, (3,): 0.01})
    back = from_x(to_x(v, p, L), p, L)
    for n in set(v) | set(back):
        assert abs(back[n] - v[n]) < 1e-13
