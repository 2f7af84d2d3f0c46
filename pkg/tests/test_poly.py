import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlsnf.poly import (DegreeOverflowError, ModeSpace, PolyHamiltonian, PolyVectorField, exps_from, from_text,
                        hamiltonian_of, lie_bracket, lie_derivative, majorant, poisson_bracket, to_text,
                        vector_field_of)
from nlsnf.qcomplex import QComplex

SPACE = ModeSpace.ball(1, 2)  # modes -2, -1, 1, 2 -> 8 variables


def random_field(rng, space, n_terms, degrees=(1, 2, 3), exact=False):
    terms = {}
    nv = space.nvars
    for _ in range(n_terms):
        deg = int(rng.choice(degrees))
        e = np.zeros(nv, dtype=int)
        for v in rng.integers(0, nv, size=deg):
            e[v] += 1
        t = int(rng.integers(0, nv))
        if exact:
            c = QComplex(int(rng.integers(-5, 6)), int(rng.integers(-5, 6)))
        else:
            c = complex(rng.normal(), rng.normal())
        terms[(tuple(int(x) for x in e), t)] = c
    return PolyVectorField(space, terms)


def random_real_hamiltonian(rng, space, n_terms, degrees=(3, 4)):
    terms = {}
    for _ in range(n_terms):
        deg = int(rng.choice(degrees))
        e = np.zeros(space.nvars, dtype=int)
        for v in rng.integers(0, space.nvars, size=deg):
            e[v] += 1
        terms[tuple(int(x) for x in e)] = complex(rng.normal(), rng.normal())
    return PolyHamiltonian(space, terms).realified()


def eval_full(X, z):
    """Independent evaluator: all components, y and conj(y) treated as independent variables."""
    out = np.zeros(len(z), dtype=complex)
    for (e, t), c in X.terms.items():
        out[t] += complex(c) * np.prod(z ** np.asarray(e))
    return out


def jacobian(X, z, h=1e-5):
    J = np.zeros((len(z), len(z)), dtype=complex)
    for v in range(len(z)):
        dz = np.zeros(len(z), dtype=complex)
        dz[v] = h
        J[:, v] = (eval_full(X, z + dz) - eval_full(X, z - dz)) / (2 * h)
    return J


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_jacobi_identity_exact(seed):
    rng = np.random.default_rng(seed)
    X, Y, Z = (random_field(rng, SPACE, 4, (1, 2), exact=True) for _ in range(3))
    total = lie_bracket(X, lie_bracket(Y, Z)) + lie_bracket(Y, lie_bracket(Z, X)) + lie_bracket(Z, lie_bracket(X, Y))
    assert total.terms == {}


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_bracket_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    X = random_field(rng, SPACE, 6)
    Y = random_field(rng, SPACE, 6)
    z = rng.normal(size=SPACE.nvars) * 0.5 + 1j * rng.normal(size=SPACE.nvars) * 0.5
    expected = jacobian(Y, z) @ eval_full(X, z) - jacobian(X, z) @ eval_full(Y, z)
    got = eval_full(lie_bracket(X, Y), z)
    np.testing.assert_allclose(got, expected, atol=1e-7 * max(1.0, np.abs(expected).max()))


def test_bracket_antisymmetric():
    rng = np.random.default_rng(3)
    X, Y = random_field(rng, SPACE, 6, exact=True), random_field(rng, SPACE, 6, exact=True)
    assert (lie_bracket(X, Y) + lie_bracket(Y, X)).terms == {}


@pytest.mark.parametrize("seed", range(5))
def test_real_mirroring_agrees_with_full_bracket(seed):
    rng = np.random.default_rng(seed)
    X = vector_field_of(random_real_hamiltonian(rng, SPACE, 6))
    Y = vector_field_of(random_real_hamiltonian(rng, SPACE, 6))
    full = lie_bracket(X, Y)
    mirrored = lie_bracket(X, Y, real=True)
    keys = set(full.terms) | set(mirrored.terms)
    assert max(abs(full.terms.get(k, 0) - mirrored.terms.get(k, 0)) for k in keys) < 1e-12


def test_field_hamiltonian_round_trip():
    rng = np.random.default_rng(7)
    H = random_real_hamiltonian(rng, SPACE, 10).to_exact()
    X = vector_field_of(H)
    assert hamiltonian_of(X) == H


def test_non_hamiltonian_field_rejected():
    X = PolyVectorField(SPACE, {(exps_from(SPACE, {(1,): 2}), 0): 1.0})
    with pytest.raises(ValueError):
        hamiltonian_of(X)


def test_hamiltonian_vector_field_convention():
    # H = |y_1|^2 gives dy_1/dt = -i y_1
    H = PolyHamiltonian.monomial(SPACE, {(1,): 1}, {(1,): 1})
    X = vector_field_of(H)
    y = np.array([0, 0, 2.0, 0], dtype=complex)
    np.testing.assert_allclose(X.evaluate(y), [0, 0, -2j, 0])


def test_bracket_of_hamiltonian_fields_is_hamiltonian():
    rng = np.random.default_rng(11)
    F = random_real_hamiltonian(rng, SPACE, 5).to_exact()
    H = random_real_hamiltonian(rng, SPACE, 5).to_exact()
    lhs = lie_bracket(vector_field_of(F), vector_field_of(H))
    assert lhs == vector_field_of(poisson_bracket(H, F))


def test_poisson_bracket_of_real_hamiltonians_is_real():
    rng = np.random.default_rng(5)
    F = random_real_hamiltonian(rng, SPACE, 5).to_exact()
    H = random_real_hamiltonian(rng, SPACE, 5).to_exact()
    assert poisson_bracket(F, H).is_real()


def test_lie_derivative_leibniz():
    rng = np.random.default_rng(2)
    X = random_field(rng, SPACE, 5, exact=True)
    F = PolyHamiltonian.monomial(SPACE, {(1,): 1}, {(2,): 1}, QComplex(2, 1))
    G = PolyHamiltonian.monomial(SPACE, {(-1,): 2}, None, QComplex(1, -3))
    assert lie_derivative(X, F * G) == lie_derivative(X, F) * G + F * lie_derivative(X, G)


def test_product_rule_for_partial():
    F = PolyHamiltonian.monomial(SPACE, {(1,): 2}, {(2,): 1}, 3)
    G = PolyHamiltonian.monomial(SPACE, {(1,): 1}, None, 2)
    v = SPACE.var((1,))
    assert (F * G).partial(v) == F.partial(v) * G + F * G.partial(v)


def test_degree_budget_enforced():
    rng = np.random.default_rng(0)
    X = random_field(rng, SPACE, 3, degrees=(5,))
    with pytest.raises(DegreeOverflowError):
        lie_bracket(X, X.scale(2.0), budget=8)
    assert lie_bracket(X, X.scale(2.0), max_degree=4).terms == {}


@pytest.mark.parametrize("exact", [False, True])
def test_text_round_trip(exact):
    rng = np.random.default_rng(1)
    X = random_field(rng, SPACE, 12, exact=exact)
    Y = from_text(to_text(X))
    assert Y.space == X.space
    assert Y.terms == X.terms
    H = random_real_hamiltonian(rng, SPACE, 6)
    H = H.to_exact() if exact else H
    assert from_text(to_text(H)).terms == H.terms


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_majorant_dominates(seed):
    rng = np.random.default_rng(seed)
    X = random_field(rng, SPACE, 8)
    z = rng.normal(size=SPACE.nvars) + 1j * rng.normal(size=SPACE.nvars)
    assert np.all(np.abs(eval_full(X, z)) <= eval_full(majorant(X), np.abs(z)).real + 1e-9)


def test_momentum_conservation_of_monomials():
    sp = ModeSpace.ball(2, 1)
    H = PolyHamiltonian.monomial(sp, {(1, 0): 1, (-1, 0): 1}, {(0, 1): 1, (0, -1): 1})
    assert H.is_momentum_conserving()
    H2 = PolyHamiltonian.monomial(sp, {(1, 0): 2}, {(0, 1): 1, (0, -1): 1})
    assert not H2.is_momentum_conserving()
