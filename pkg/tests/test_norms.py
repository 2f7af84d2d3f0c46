import numpy as np
import pytest

from nlsnf.norms import ball_norm, bracketed_norm, sigma0, tame_certificate, tame_norm_bound
from nlsnf.poly import ModeSpace, PolyVectorField, exps_from, vector_field_of
from nlsnf.reduction import expand_reduced_hamiltonian

SPACE = ModeSpace.ball(1, 3)


def cubic_field(p=1, L=0.5, deg=2):
    H = expand_reduced_hamiltonian(p, L, SPACE, deg + 1)
    return vector_field_of(H).homogeneous(deg)


def test_sigma0():
    assert sigma0(1) == 1.0
    assert sigma0(2) == 1.5


def test_linear_diagonal_field_norm_is_max_coefficient():
    terms = {(exps_from(SPACE, {m: 1}), SPACE.var(m)): complex(k + 1, 0) for k, m in enumerate(SPACE.modes)}
    X = PolyVectorField(SPACE, terms)
    assert tame_certificate(X, 3.0) == pytest.approx(len(SPACE.modes))


@pytest.mark.parametrize("deg", [2, 3])
def test_certificate_bounds_sampled_ratio(deg):
    X = cubic_field(deg=deg)
    up, lo = tame_norm_bound(X, 2.0, samples=400, seed=1)
    assert up.kind == "upper_bound" and lo.kind == "monte_carlo_lower"
    assert 0 < lo.value <= up.value * (1 + 1e-12)


@pytest.mark.parametrize("R", [0.01, 0.1])
def test_ball_norm_sandwich(R):
    X = cubic_field(deg=2) + cubic_field(deg=3)
    up, lo = ball_norm(X, 3.0, R, samples=300, seed=0)
    assert lo.value <= up.value * (1 + 1e-12)
    assert up.value == pytest.approx(min(up.detail["bracketed"], up.detail["pointwise"]))


def test_homogeneity_of_certificate():
    X = cubic_field()
    assert tame_certificate(X.scale(-3.0), 2.0) == pytest.approx(3 * tame_certificate(X, 2.0))


def test_bracketed_norm_scales_with_radius():
    X = cubic_field(deg=2)
    assert bracketed_norm(X, 2.0, 0.2) == pytest.approx(4 * bracketed_norm(X, 2.0, 0.1))


def test_inhomogeneous_field_rejected():
    with pytest.raises(ValueError):
        tame_certificate(cubic_field(deg=2) + cubic_field(deg=3), 2.0)


def test_ball_norm_rejects_nonpositive_radius():
    with pytest.raises(ValueError):
        ball_norm(cubic_field(), 2.0, 0.0)


def test_pointwise_evaluation_below_ball_bound():
    X = cubic_field(deg=2)
    rng = np.random.default_rng(0)
    w = np.array([np.sqrt(1 + m[0] ** 2) for m in SPACE.modes])
    up, _ = ball_norm(X, 2.0, 0.05, samples=10)
    for _ in range(20):
        z = rng.normal(size=SPACE.n) + 1j * rng.normal(size=SPACE.n)
        z *= 0.05 / np.sqrt(np.sum(np.abs(z) ** 2 * w ** 4))
        val = np.sqrt(np.sum(np.abs(X.evaluate(z)) ** 2 * w ** 4))
        assert val <= up.value * (1 + 1e-12)
