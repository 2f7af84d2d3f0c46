import pytest

from nlsnf.birkhoff import build_normal_form


@pytest.fixture(scope="session")
def nf_d1():
    """p=1, L=0.31, d=1, N_trunc=3, ell=2 with the default degree cap."""
    return build_normal_form(1, 0.31, 1, 3, ell=2)


@pytest.fixture(scope="session")
def nf_d1_exact():
    """Same shape in exact rational arithmetic with a Hamiltonian-path cross-check (L = 1)."""
    return build_normal_form(1, 1.0, 1, 2, ell=2, exact=True, hamiltonian_check=True)


@pytest.fixture(scope="session")
def nf_d2():
    return build_normal_form(1, 0.31, 2, 2, ell=2, degree_cap=4)
