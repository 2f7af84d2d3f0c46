import math

import numpy as np
import pytest

from nlsnf.lattice import SpectralField, orbital_distance, sobolev_norm
from nlsnf.reduction import omega
from nlsnf.simulate import (SimConfig, SimulationError, Stepper, energy, floquet_matrix, initial_datum, mass,
                            perturbation, plane_wave, run_stability, step)


def expm_diag(A, t):
    w, V = np.linalg.eig(A)
    return V @ np.diag(np.exp(w * t)) @ np.linalg.inv(V)


@pytest.mark.parametrize("kw", [dict(n_grid=6), dict(dt=0), dict(integrator="rk4"), dict(p=0),
                                dict(dt=1e-2, sample_dt=1e-3)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SimConfig(**kw)


def test_dealias_default():
    assert not SimConfig(p=1).use_dealias
    assert SimConfig(p=2).use_dealias
    assert not SimConfig(p=2, dealias=False).use_dealias


def test_focusing_frequency_check():
    SimConfig(lam=1.0).check_frequencies(0.2)
    with pytest.raises(ValueError):
        SimConfig(lam=1.0).check_frequencies(0.6)


@pytest.mark.parametrize("integrator", ["strang2", "yoshida4"])
@pytest.mark.parametrize("p,m", [(1, (0,)), (2, (1,)), (1, (-3,))])
def test_plane_wave_is_exact(integrator, p, m):
    cfg = SimConfig(p=p, n_grid=16, dt=1e-2, integrator=integrator)
    psi0 = plane_wave(m, 0.5, cfg, 0.0)
    psi = step(psi0, cfg, 300)
    ref = plane_wave(m, 0.5, cfg, 3.0)
    assert abs(psi[m] - ref[m]) < 1e-12
    assert all(abs(v) < 1e-14 for n, v in psi.items() if n != m)


def test_plane_wave_phase_convention():
    cfg = SimConfig(p=1)
    # theta = lam rho^2 - |m|^2 = -0.25 at m = 0, so the phase at t = 4 is e^{i}
    assert plane_wave((0,), 0.5, cfg, 4.0)[(0,)] == pytest.approx(0.5 * np.exp(1j))


def test_perturbation_norm_and_support():
    pert = perturbation(1, (2,), 3.0, 1e-2, seed=4, k_max=5, n_lat=20)
    rel = SpectralField(1, 20, {(n[0] - 2,): v for n, v in pert.items()})
    assert sobolev_norm(rel, 3.0) == pytest.approx(1e-2, rel=1e-13)
    assert all(0 < abs(n[0] - 2) <= 5 for n in pert)


def test_initial_datum_mass_is_exact():
    cfg = SimConfig(n_grid=32)
    psi = initial_datum(cfg, (0,), 0.5, 1e-2, 2.0, seed=1)
    assert mass(psi) == pytest.approx(0.25, rel=1e-14)
    assert orbital_distance(psi, (0,), 2.0) == pytest.approx(1e-2, rel=1e-12)


def test_seed_determinism():
    cfg = SimConfig(n_grid=32, dt=1e-2, t_end=0.5)
    a = run_stability(cfg, (0,), 0.5, 1e-2, 2.0, seed=3)
    b = run_stability(cfg, (0,), 0.5, 1e-2, 2.0, seed=3)
    c = run_stability(cfg, (0,), 0.5, 1e-2, 2.0, seed=4)
    assert np.array_equal(a.rows(), b.rows())
    assert not np.array_equal(a.rows(), c.rows())


@pytest.mark.parametrize("m,s", [((0,), 6.0), ((1,), 1.0), ((-2,), 1.0)])
def test_zero_perturbation_stays_on_orbit(m, s):
    # for m != 0 grid roundoff in the top modes is amplified by <k>^s, hence the low s there
    cfg = SimConfig(n_grid=32, dt=1e-2, t_end=2.0)
    rec = run_stability(cfg, m, 0.5, 0.0, s)
    assert rec.orbital_dist.max() <= 1e-10


@pytest.mark.parametrize("integrator", ["strang2", "yoshida4"])
def test_conservation_short_run(integrator):
    cfg = SimConfig(n_grid=64, dt=1e-3, t_end=2.0, integrator=integrator, sample_dt=0.1)
    rec = run_stability(cfg, (0,), 0.5, 1e-2, 6.0, seed=0)
    assert np.max(np.abs(rec.mass - rec.mass[0])) / rec.mass[0] < 1e-12
    assert np.max(np.abs(rec.energy - rec.energy[0])) / abs(rec.energy[0]) < 1e-9


def test_energy_of_plane_wave():
    cfg = SimConfig(p=2, n_grid=16)
    psi = plane_wave((2,), 0.5, cfg, 0.0)
    assert energy(psi, cfg) == pytest.approx(4 * 0.25 + 0.5 ** 6 / 3)


@pytest.mark.parametrize("integrator,order", [("strang2", 2), ("yoshida4", 4)])
def test_convergence_order(integrator, order):
    base = SimConfig(n_grid=32, dt=1e-3, integrator="yoshida4")
    psi0 = initial_datum(base, (0,), 0.8, 0.2, 1.0, seed=2, k_max=4)
    T = 0.4
    ref = Stepper(SimConfig(n_grid=32, dt=T / 800, integrator="yoshida4")).advance(psi0.to_array(32), 800)
    errs = []
    for nsteps in (10, 20):
        cfg = SimConfig(n_grid=32, dt=T / nsteps, integrator=integrator)
        out = Stepper(cfg).advance(psi0.to_array(32), nsteps)
        errs.append(np.max(np.abs(out - ref)))
    assert math.log2(errs[0] / errs[1]) == pytest.approx(order, abs=0.3)


def test_nonfinite_state_raises_with_partial_record():
    cfg = SimConfig(n_grid=16, dt=1e-2, t_end=0.1)
    psi0 = SpectralField(1, 7, {(0,): 0.5, (1,): complex("nan")})
    with pytest.raises(SimulationError) as err:
        run_stability(cfg, (0,), 0.5, 0.0, 1.0, psi0=psi0)
    assert err.value.record is not None and len(err.value.record.times) == 1


@pytest.mark.parametrize("p", [1, 2])
@pytest.mark.parametrize("n", [1, 3, 5])
def test_floquet_constant_matrix_eigenvalues(p, n):
    rho = 0.6
    _, K = floquet_matrix((n,), rho, p, 0.0)
    ev = np.sort(np.linalg.eigvals(K).real)
    om = omega(n * n, p, rho ** 2)
    np.testing.assert_allclose(ev, [-om, om], rtol=1e-13)


@pytest.mark.parametrize("p", [1, 2])
def test_floquet_matrix_predicts_linearized_flow(p):
    """Independent oracle: small perturbations evolved by the simulator follow the linear system."""
    rho, n, delta, T = 0.6, 2, 1e-7, 0.7
    cfg = SimConfig(p=p, n_grid=32, dt=1e-3, integrator="yoshida4", dealias=False)
    z0 = np.array([0.3 + 0.1j, -0.2 + 0.4j])
    psi0 = SpectralField(1, 15, {(0,): rho, (n,): delta * z0[0], (-n,): delta * np.conj(z0[1])})
    psi = step(psi0, cfg, int(round(T / cfg.dt)))
    got = np.array([psi[(n,)], np.conj(psi[(-n,)])]) / delta
    _, K = floquet_matrix((n,), rho, p, 0.0)
    r2p = rho ** (2 * p)
    D = np.diag([np.exp(1j * r2p * T), np.exp(-1j * r2p * T)])
    expected = D @ expm_diag(-1j * K, T) @ z0
    np.testing.assert_allclose(got, expected, atol=1e-5)
    M, _ = floquet_matrix((n,), rho, p, T)
    assert np.allclose(M, M.T.conj() * np.array([[1, -1], [-1, 1]]))
