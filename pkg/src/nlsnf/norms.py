"""Two-sided estimates of the tame norm and the ball norm of polynomial fields.

Neither supremum is exactly computable, so every estimator returns either a
certified upper bound or a Monte Carlo lower bound.

Tame certificate
----------------
For a homogeneous field of degree ``l`` write each term as a product of
``l`` variables with modes ``n_1..n_l``.  Pick the position ``k*`` of largest
``<n_j>`` as the "high" factor and bound every other factor pointwise by
``|z_n| <= ||z||_{sigma0} <n>^{-sigma0}`` with ``sigma0 = (d+1)/2``.  Averaging
over the permutations in the polarization puts each input in the high slot
exactly ``1/l`` of the time, which reproduces the ``1/l`` average in the
definition.  What remains is a nonnegative matrix ``B[m, n]`` acting on the
high factor; its spectral norm (weighted by ``<m>^s / <n>^s``) is the
certified constant.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import bracket
from .poly import CompiledField, PolyVectorField


@dataclass(frozen=True)
class NormEstimate:
    value: float
    kind: str  # "upper_bound" | "monte_carlo_lower"
    samples: int = 0
    detail: dict = field(default_factory=dict)


def sigma0(d: int) -> float:
    return (d + 1) / 2.0


def _factor_lists(X: PolyVectorField):
    """[(variable indices with multiplicity, target, |coeff|)] over d/dy targets."""
    out = []
    for (e, t), c in X.y_part().items():
        vars_ = [v for v, k in enumerate(e) for _ in range(k)]
        out.append((vars_, t, abs(complex(c))))
    return out


def _homogeneous_degree(X: PolyVectorField) -> int:
    degs = X.degrees()
    if len(degs) > 1:
        raise ValueError(f"field is not homogeneous (degrees {degs})")
    return degs[0] if degs else 0


def _tame_matrix(X: PolyVectorField, s: float, low_exp: float) -> np.ndarray:
    sp = X.space
    n = sp.n
    wts = np.array([bracket(m) for m in sp.modes])
    B = np.zeros((n, n))
    for vars_, t, c in _factor_lists(X):
        modes = [v % n for v in vars_]
        k_star = max(range(len(modes)), key=lambda j: (wts[modes[j]], -j))
        low = math.prod(wts[modes[j]] ** (-low_exp) for j in range(len(modes)) if j != k_star)
        B[t, modes[k_star]] += c * low
    return (wts[:, None] ** s) * B * (wts[None, :] ** (-s))


def tame_certificate(X: PolyVectorField, s: float) -> float:
    """Certified upper bound for the tame s-norm of a homogeneous field."""
    deg = _homogeneous_degree(X)
    if deg == 0:
        return _const_norm(X, s)
    B = _tame_matrix(X, s, sigma0(X.space.d))
    return float(np.linalg.norm(B, 2))


def _const_norm(X, s):
    vals = np.zeros(X.space.n, dtype=complex)
    for (e, t), c in X.y_part().items():
        vals[t] += complex(c)
    wts = np.array([bracket(m) for m in X.space.modes])
    return float(np.sqrt(np.sum(np.abs(vals) ** 2 * wts ** (2 * s))))


def _polarized(X: PolyVectorField, zs: list[np.ndarray]) -> np.ndarray:
    """Symmetric multilinear form of the majorant at nonnegative inputs (per target)."""
    n = X.space.n
    facs = _factor_lists(X)
    ell = len(zs)
    idx = np.array([[v % n for v in f[0]] for f in facs], dtype=np.intp).reshape(len(facs), ell)
    tgt = np.array([f[1] for f in facs], dtype=np.intp)
    coef = np.array([f[2] for f in facs])
    acc = np.zeros(len(facs))
    perms = list(itertools.permutations(range(ell)))
    for pi in perms:
        prod = coef.copy()
        for j in range(ell):
            prod *= zs[pi[j]][idx[:, j]]
        acc += prod
    acc /= len(perms)
    return np.bincount(tgt, weights=acc, minlength=n)


def _wnorm(z, wts, s):
    return float(np.sqrt(np.sum(np.abs(z) ** 2 * wts ** (2 * s))))


def _random_nonneg(rng, n, wts, s):
    kind = rng.integers(3)
    if kind == 0:
        z = np.zeros(n)
        z[rng.integers(n)] = 1.0
    elif kind == 1:
        z = np.zeros(n)
        sup = rng.choice(n, size=min(n, int(rng.integers(1, 4))), replace=False)
        z[sup] = rng.random(len(sup))
    else:
        z = rng.random(n) * wts ** (-s * rng.random())
    return z


def tame_norm_bound(X: PolyVectorField, s: float, samples: int = 2000, seed: int = 0):
    """(upper, lower) estimates of the tame s-norm of a homogeneous field."""
    ell = _homogeneous_degree(X)
    upper = NormEstimate(tame_certificate(X, s), "upper_bound")
    if ell == 0 or not X.terms:
        return upper, NormEstimate(upper.value, "monte_carlo_lower", 0)
    sp = X.space
    wts = np.array([bracket(m) for m in sp.modes])
    s0 = sigma0(sp.d)
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(samples):
        zs = [_random_nonneg(rng, sp.n, wts, s) for _ in range(ell)]
        if any(not z.any() for z in zs):
            continue
        lhs = _wnorm(_polarized(X, zs), wts, s)
        hi = [_wnorm(z, wts, s) for z in zs]
        lo = [_wnorm(z, wts, s0) for z in zs]
        rhs = sum(hi[k] * math.prod(lo[j] for j in range(ell) if j != k) for k in range(ell)) / ell
        best = max(best, lhs / rhs)
    return upper, NormEstimate(best, "monte_carlo_lower", samples)


def ball_norm(X: PolyVectorField, s: float, R: float, samples: int = 2000, seed: int = 0):
    """(upper, lower) estimates of sup_{||z||_s <= R} ||X(z)||_s.

    The upper bound is ``sum_l |X_l|_s kappa^{l-1} R^l`` where ``kappa`` bounds
    ``||z||_{sigma0} / ||z||_s`` on the mode set (1 when ``s >= sigma0``); this is
    the bracketed norm of the field.  A second certificate bounds every low
    factor by ``R <n>^{-s}`` instead; the reported upper value is the smaller.
    """
    if R <= 0:
        raise ValueError("radius must be positive")
    sp = X.space
    wts = np.array([bracket(m) for m in sp.modes])
    s0 = sigma0(sp.d)
    kappa = float(np.max(wts ** max(s0 - s, 0.0))) if sp.n else 1.0
    bracketed = 0.0
    pointwise = 0.0
    for deg in X.degrees():
        Xl = X.homogeneous(deg)
        if deg == 0:
            c = _const_norm(Xl, s)
            bracketed += c
            pointwise += c
            continue
        bracketed += tame_certificate(Xl, s) * kappa ** (deg - 1) * R ** deg
        B = _tame_matrix(Xl, s, s)
        pointwise += float(np.linalg.norm(B, 2)) * R ** deg
    upper = NormEstimate(min(bracketed, pointwise), "upper_bound",
                         detail={"bracketed": bracketed, "pointwise": pointwise})
    rng = np.random.default_rng(seed)
    best = 0.0
    if X.y_part():
        f = CompiledField(X)
        for _ in range(samples):
            kind = rng.integers(3)
            if kind == 0:
                z = np.zeros(sp.n, dtype=complex)
                z[rng.integers(sp.n)] = 1.0
            else:
                z = rng.normal(size=sp.n) + 1j * rng.normal(size=sp.n)
                if kind == 1:
                    z = np.abs(z) * wts ** (-s)
            z *= R / _wnorm(z, wts, s)
            best = max(best, _wnorm(f(z), wts, s))
    return upper, NormEstimate(best, "monte_carlo_lower", samples)


def bracketed_norm(X: PolyVectorField, s: float, R: float) -> float:
    """Certified <X>_{s,R} = sum_l |X_l|_s R^l (tame certificates)."""
    return sum(tame_certificate(X.homogeneous(deg), s) * R ** deg for deg in X.degrees())
