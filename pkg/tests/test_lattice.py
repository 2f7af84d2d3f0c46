import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlsnf.lattice import (LatticeOverflowError, SobolevParams, SpectralField, ball_modes, bracket, modulate,
                           orbital_distance, phase_optimized_distance, shell_compose, shell_decompose,
                           sobolev_inner, sobolev_norm, super_actions)

coeff = st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False)


@st.composite
def fields(draw, d=1, n_lat=5):
    modes = draw(st.lists(st.tuples(*[st.integers(-n_lat, n_lat)] * d), min_size=0, max_size=8, unique=True))
    return SpectralField(d, n_lat, {m: draw(coeff) for m in modes})


def test_single_mode_norm():
    x = SpectralField(1, 4, {(3,): 2.0})
    assert sobolev_norm(x, 2) == pytest.approx(2.0 * 10, rel=1e-15)
    assert sobolev_norm(x, 0) == pytest.approx(2.0)


def test_negative_exponent_rejected():
    with pytest.raises(ValueError):
        SobolevParams(-1)


def test_overflow_rejected():
    with pytest.raises(LatticeOverflowError):
        SpectralField(1, 2, {(3,): 1.0})


@given(fields(), fields(), st.floats(0, 4))
def test_triangle_inequality(a, b, s):
    assert sobolev_norm(a + b, s) <= sobolev_norm(a, s) + sobolev_norm(b, s) + 1e-9


@given(fields(d=2, n_lat=3))
def test_grid_round_trip(x):
    y = SpectralField.from_grid(x.to_grid(8), n_lat=3)
    for n in set(x) | set(y):
        assert abs(x[n] - y[n]) < 1e-12


@given(fields(d=2, n_lat=3))
def test_json_round_trip(x):
    assert SpectralField.from_json(x.to_json()).coeffs == x.coeffs


@given(fields(d=2, n_lat=3))
def test_shell_round_trip_and_mass(x):
    sh = shell_decompose(x)
    assert shell_compose(sh, 2, 3).coeffs == x.coeffs
    mass = math.fsum(abs(v) ** 2 for _, v in x.items())
    assert math.fsum(super_actions(x).values()) == pytest.approx(mass, rel=1e-12, abs=1e-12)


def test_grid_point_values():
    # e^{i x} sampled at x_j = 2 pi j / 8
    x = SpectralField(1, 3, {(1,): 1.0})
    g = x.to_grid(8)
    np.testing.assert_allclose(g, np.exp(2j * np.pi * np.arange(8) / 8), atol=1e-14)


@settings(max_examples=30)
@given(st.floats(0, 2 * math.pi), st.floats(0.1, 2))
def test_orbital_distance_of_plane_wave_vanishes(phi, rho):
    x = SpectralField(1, 4, {(2,): rho * cmath.exp(1j * phi)})
    assert orbital_distance(x, (2,), 3) == 0.0


def test_orbital_distance_uses_relative_weights():
    x = SpectralField(1, 6, {(2,): 1.0, (5,): 0.1})
    assert orbital_distance(x, (2,), 1) == pytest.approx(0.1 * bracket((3,)))


@given(fields(), st.floats(0, 2 * math.pi))
def test_phase_optimized_distance_ignores_phase(a, phi):
    b = a.scaled(cmath.exp(1j * phi))
    assert phase_optimized_distance(b, a, 1) <= 1e-6 * max(1.0, sobolev_norm(a, 1))


def test_sobolev_inner_matches_norm():
    x = SpectralField(1, 4, {(1,): 1 + 1j, (-2,): 0.5})
    assert sobolev_inner(x, x, 1.5).real == pytest.approx(sobolev_norm(x, 1.5) ** 2)


def test_modulate_shifts_and_checks_cutoff():
    x = SpectralField(1, 4, {(0,): 1.0, (1,): 2.0})
    y = modulate(x, (2,))
    assert dict(y.items()) == {(2,): 1.0, (3,): 2.0}
    with pytest.raises(LatticeOverflowError):
        modulate(x, (4,))


@pytest.mark.parametrize("d,radius,count", [(1, 3, 6), (2, 1, 4), (2, 2, 12), (3, 1, 6)])
def test_ball_counts(d, radius, count):
    assert len(ball_modes(d, radius)) == count
