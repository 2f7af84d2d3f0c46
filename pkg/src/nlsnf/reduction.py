"""Zero-mode reduction, Taylor expansion and quadratic diagonalization.

Conventions
-----------
The Hamiltonian is ``H = sum |k|^2 |u_k|^2 + (1/(p+1)) int |u|^{2p+2}`` (the
defocusing case) with vector field ``du_k/dt = -i dH/d conj(u_k)``.  This is
the complex conjugate of the flow integrated by :mod:`nlsnf.simulate` with
``lambda = -1``: a simulated field ``psi`` corresponds to ``u = conj(psi)``,
see :func:`pde_to_u`.

The reduction writes ``u_0 = e^{i nu0} sqrt(L - S)`` and ``u_k = e^{i nu0} v_k``
with ``S = sum_{k != 0} |v_k|^2``.  Expanding
``int (|u|^2)^{p+1}`` with ``|u|^2 = w^2 + w (phi + conj phi) + |phi|^2``
(``w = sqrt(L - S)``, ``phi = sum v_k e^{ikx}``) shows that the part of total
degree ``D`` in ``(v, conj v)`` carries exactly the factor ``L^{p+1-D/2}``.
Each degree block is therefore an exact rational polynomial times a single
power of ``L``.
"""
from __future__ import annotations

import cmath
import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations_with_replacement
from typing import Mapping

import numpy as np

from .lattice import SpectralField, add, neg, norm2
from .poly import ModeSpace, PolyHamiltonian, substitute_linear
from .qcomplex import QComplex

MAX_EXPANSION_DEGREE = 8


# --- reduction ------------------------------------------------------------------------------

@dataclass(frozen=True)
class ReducedState:
    L: float
    nu0: float
    v: SpectralField

    def __post_init__(self):
        if sum(abs(x) ** 2 for _, x in self.v.items()) >= self.L:
            raise ValueError("sum |v_k|^2 must stay below L")


def reduce(u: SpectralField) -> ReducedState:
    """Split off mass and zero-mode phase: L = ||u||^2, nu0 = arg u_0, v_k = u_k e^{-i nu0}."""
    u0 = u[(0,) * u.d]
    if u0 == 0:
        raise ValueError("zero mode vanishes; its phase is undefined")
    L = math.fsum(abs(x) ** 2 for _, x in u.items())
    nu0 = cmath.phase(u0)
    rot = cmath.exp(-1j * nu0)
    v = SpectralField(u.d, u.n_lat, {n: x * rot for n, x in u.items() if any(n)})
    return ReducedState(L, nu0, v)


def inverse(state: ReducedState) -> SpectralField:
    v = state.v
    S = math.fsum(abs(x) ** 2 for _, x in v.items())
    rot = cmath.exp(1j * state.nu0)
    coeffs = {n: x * rot for n, x in v.items()}
    coeffs[(0,) * v.d] = rot * math.sqrt(state.L - S)
    return SpectralField(v.d, v.n_lat, coeffs)


def pde_to_u(psi: SpectralField) -> SpectralField:
    """Simulator field -> Hamiltonian variable (complex conjugate function)."""
    return psi.conj_field()


# --- Taylor expansion -----------------------------------------------------------------------

def _gen_binom(e: Fraction, r: int) -> Fraction:
    out = Fraction(1)
    for i in range(r):
        out *= (e - i)
    return out / math.factorial(r)


def _multisets_by_momentum(space: ModeSpace, size: int) -> dict:
    """Multisets (as index tuples) of ``size`` modes, grouped by their momentum sum."""
    out = defaultdict(list)
    zero = (0,) * space.d
    for combo in combinations_with_replacement(range(space.n), size):
        mom = zero
        for i in combo:
            mom = add(mom, space.modes[i])
        out[mom].append(combo)
    return out


def _multinomial_count(combo) -> int:
    """Number of ordered tuples giving the multiset ``combo``."""
    counts = defaultdict(int)
    for i in combo:
        counts[i] += 1
    out = math.factorial(len(combo))
    for c in counts.values():
        out //= math.factorial(c)
    return out


def convolution_integral(space: ModeSpace, A: int, B: int) -> PolyHamiltonian:
    """int phi^A conj(phi)^B over the torus, phi = sum_k v_k e^{ikx} on ``space``.

    The monomial ``v^alpha conj(v)^beta`` (momentum conserving) has coefficient
    ``(A!/alpha!) (B!/beta!)``.
    """
    n = space.n
    terms = {}
    left = _multisets_by_momentum(space, A)
    right = left if A == B else _multisets_by_momentum(space, B)
    for mom, alphas in left.items():
        betas = right.get(mom)
        if not betas:
            continue
        for a in alphas:
            ca = _multinomial_count(a)
            for b in betas:
                e = [0] * (2 * n)
                for i in a:
                    e[i] += 1
                for i in b:
                    e[n + i] += 1
                terms[tuple(e)] = QComplex(ca * _multinomial_count(b))
    return PolyHamiltonian(space, terms)


def _mass_poly(space: ModeSpace) -> PolyHamiltonian:
    n = space.n
    terms = {}
    for i in range(n):
        e = [0] * (2 * n)
        e[i] = e[n + i] = 1
        terms[tuple(e)] = QComplex(1)
    return PolyHamiltonian(space, terms)


def reduced_hamiltonian_blocks(p: int, space: ModeSpace, max_degree: int) -> dict[int, PolyHamiltonian]:
    """Exact rational blocks ``B_D`` with ``H = kinetic + sum_D L^{p+1-D/2} B_D``.

    Only degrees ``2 <= D <= max_degree`` are returned (the constant
    ``L^{p+1}/(p+1)`` does not affect the dynamics).
    """
    if p < 1:
        raise ValueError("p must be a positive integer")
    if max_degree < 2:
        raise ValueError("max_degree must be >= 2")
    if max_degree > MAX_EXPANSION_DEGREE:
        raise ValueError(f"max_degree {max_degree} exceeds the expansion budget {MAX_EXPANSION_DEGREE}")
    if any(not any(m) for m in space.modes):
        raise ValueError("mode set must exclude the zero mode")
    S = _mass_poly(space)
    s_pow = {0: PolyHamiltonian(space, {space.zero(): QComplex(1)})}
    for r in range(1, max_degree // 2 + 1):
        s_pow[r] = s_pow[r - 1] * S
    integrals: dict = {}
    blocks: dict = defaultdict(lambda: PolyHamiltonian(space))
    P1 = p + 1
    for n2 in range(P1 + 1):
        for n3 in range(P1 + 1 - n2):
            n1 = P1 - n2 - n3
            j = n2 + 2 * n3
            if j > max_degree:
                continue
            multi = Fraction(math.factorial(P1), math.factorial(n1) * math.factorial(n2) * math.factorial(n3))
            e = Fraction(2 * P1 - j, 2)
            for a in range(n2 + 1):
                A, B = a + n3, n2 - a + n3
                key = (A, B)
                if key not in integrals:
                    integrals[key] = convolution_integral(space, A, B) if A + B > 0 else \
                        PolyHamiltonian(space, {space.zero(): QComplex(1)})
                base = multi * math.comb(n2, a) / P1
                for r in range(0, (max_degree - j) // 2 + 1):
                    D = j + 2 * r
                    if D < 2:
                        continue
                    c = base * _gen_binom(e, r) * (-1) ** r
                    if c == 0:
                        continue
                    blocks[D] = blocks[D] + (integrals[key] * s_pow[r]).scale(QComplex(c))
    return {D: blocks[D] for D in sorted(blocks) if blocks[D].terms}


def kinetic(space: ModeSpace) -> PolyHamiltonian:
    n = space.n
    terms = {}
    for i, m in enumerate(space.modes):
        e = [0] * (2 * n)
        e[i] = e[n + i] = 1
        terms[tuple(e)] = QComplex(norm2(m))
    return PolyHamiltonian(space, terms)


def expand_reduced_hamiltonian(p: int, L: float, mode_set, max_degree: int, exact: bool = False) -> PolyHamiltonian:
    """Taylor expansion of the reduced Hamiltonian through ``max_degree``.

    ``mode_set`` is a :class:`ModeSpace` or an iterable of nonzero modes.  With
    ``exact=True`` and rational ``L**p`` and integer ``p`` the coefficients of
    even-degree blocks stay rational (QComplex); otherwise they are complex floats.
    """
    space = mode_set if isinstance(mode_set, ModeSpace) else ModeSpace(mode_set)
    if L <= 0:
        raise ValueError("L must be positive")
    H = kinetic(space)
    if not exact:
        H = H.to_float()
    for D, block in reduced_hamiltonian_blocks(p, space, max_degree).items():
        if exact:
            if D % 2:
                raise ValueError("exact expansion needs rational L-powers; odd degrees involve sqrt(L)")
            factor = Fraction(L) ** (p + 1 - D // 2)
            H = H + block.scale(QComplex(factor))
        else:
            H = H + block.to_float().scale(L ** (p + 1 - D / 2))
    return H


# --- frequencies ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FrequencyTable:
    """Shell frequencies Omega(mu) = sqrt(mu (mu - 2 lam p L^p)), lam = -1 by default."""

    p: int
    L: float
    entries: Mapping
    lam: float = -1.0

    def __getitem__(self, mu: int) -> float:
        if mu not in self.entries:
            raise KeyError(f"shell {mu} outside the frequency table (mu_max={self.mu_max})")
        return self.entries[mu]

    def __contains__(self, mu):
        return mu in self.entries

    @property
    def mu_max(self) -> int:
        return max(self.entries)

    @property
    def Lp(self) -> float:
        return self.L ** self.p


def omega(mu: int, p: int, L: float, lam: float = -1.0) -> float:
    val = mu * (mu - 2.0 * lam * p * L ** p)
    if val < 0:
        raise ValueError(f"frequency at shell {mu} is not real (mu(mu - 2 lam p L^p) = {val})")
    return math.sqrt(val)


def frequencies(p: int, L: float, mu_max: int, lam: float = -1.0) -> FrequencyTable:
    if L <= 0:
        raise ValueError("L must be positive")
    return FrequencyTable(p, L, {mu: omega(mu, p, L, lam) for mu in range(1, mu_max + 1)}, lam)


# --- Bogoliubov diagonalization ---------------------------------------------------------------

@dataclass(frozen=True)
class BogoliubovCoeffs:
    """x_k = a v_k + b conj(v_{-k}) on shell ``mu`` (inverse: v_k = a x_k - b conj(x_{-k}))."""

    mu: int
    a: float
    b: float
    omega: float

    @property
    def condition(self) -> float:
        return (self.a + abs(self.b)) ** 2


def bogoliubov(mu: int, p: int, L: float) -> BogoliubovCoeffs:
    """Real hyperbolic rotation with tanh(2 theta) = p L^p / (mu + p L^p).

    With this sign the anomalous terms v_k v_{-k} cancel and the shell block
    becomes Omega(mu) |x_k|^2 per mode.
    """
    if mu < 1:
        raise ValueError("shell must be >= 1")
    B = p * L ** p
    A = mu + B
    if A * A - B * B <= 0:
        raise ValueError(f"frequency gap closes at shell {mu}")
    om = math.sqrt(A * A - B * B)
    # cosh(2t) = A/om, sinh(2t) = B/om, and a = cosh t, b = sinh t
    a = math.sqrt((A / om + 1.0) / 2.0)
    b = math.copysign(math.sqrt((A / om - 1.0) / 2.0), B)
    return BogoliubovCoeffs(mu, a, b, om)


def _images(space: ModeSpace, coeffs: Mapping[int, tuple]) -> dict[int, PolyHamiltonian]:
    """Linear images v -> (a x - b conj(x_{-k})) and conj v accordingly."""
    n = space.n
    images = {}
    for i, m in enumerate(space.modes):
        a, b = coeffs[norm2(m)]
        j = space.index.get(neg(m))
        if j is None:
            raise ValueError(f"mode set is not symmetric: {neg(m)} missing")
        e_x = [0] * (2 * n)
        e_x[i] = 1
        e_xb = [0] * (2 * n)
        e_xb[n + j] = 1
        images[i] = PolyHamiltonian(space, {tuple(e_x): a, tuple(e_xb): -b})
        f_x = [0] * (2 * n)
        f_x[n + i] = 1
        f_xb = [0] * (2 * n)
        f_xb[j] = 1
        images[n + i] = PolyHamiltonian(space, {tuple(f_x): a, tuple(f_xb): -b})
    return images


def diagonalize(H: PolyHamiltonian, p: int, L: float) -> PolyHamiltonian:
    """Express H(v) in Bogoliubov variables x; returned exactly real."""
    space = H.space
    coeffs = {}
    for mu in space.shells():
        bc = bogoliubov(mu, p, L)
        coeffs[mu] = (bc.a, bc.b)
    Hx = substitute_linear(H, _images(space, coeffs), space)
    return Hx.realified()


def bogoliubov_symbolic(space: ModeSpace, p: int):
    """Symbolic check of the quadratic diagonalization.

    The shell coefficients ``a_mu, b_mu`` and the parameter ``P = p L^p`` are
    sympy symbols.  After substitution each coefficient is a quadratic form in
    ``(a_mu, b_mu)``, which is reduced with ``a^2 = (A/Omega + 1)/2``,
    ``b^2 = (A/Omega - 1)/2``, ``a b = B/(2 Omega)`` (``A = mu + P``, ``B = P``).
    Returns ``(reduced polynomial, {mu: Omega_mu expression})``.
    """
    import sympy as sp

    P = sp.Symbol("P", positive=True)
    syms = {}
    omegas = {}
    rules = {}
    for mu in space.shells():
        a, b = sp.symbols(f"a_{mu} b_{mu}", positive=True)
        syms[mu] = (a, b)
        A = mu + P
        om = sp.sqrt(mu * (mu + 2 * P))
        omegas[mu] = om
        rules[mu] = {(2, 0): (A / om + 1) / 2, (0, 2): (A / om - 1) / 2, (1, 1): P / (2 * om)}
    H2 = PolyHamiltonian(space, {})
    n = space.n
    for i, m in enumerate(space.modes):
        e = [0] * (2 * n)
        e[i] = e[n + i] = 1
        H2 = H2 + PolyHamiltonian(space, {tuple(e): sp.Integer(norm2(m)) + P})
    h = reduced_hamiltonian_blocks(p, space, 2)[2]
    H2 = H2 + PolyHamiltonian(space, {k: sp.Rational(v.re.numerator, v.re.denominator) * P / p
                                      for k, v in h.terms.items()
                                      if _is_anomalous(space, k)})
    # the |v_k|^2 part of the block equals p S, already included above as P |v|^2
    Hx = substitute_linear(H2, _images(space, syms), space)
    reduced = {}
    for k, c in Hx.terms.items():
        mu = space.shell_of(next(v for v, e in enumerate(k) if e))
        a, b = syms[mu]
        poly = sp.Poly(sp.expand(c), a, b)
        out = sp.simplify(sum((coef * rules[mu][ij] for ij, coef in poly.terms()), sp.Integer(0)))
        if out != 0:
            reduced[k] = out
    return PolyHamiltonian(space, reduced), omegas


def _is_anomalous(space: ModeSpace, exps) -> bool:
    n = space.n
    return sum(exps[:n]) != sum(exps[n:])


def to_x(v: SpectralField, p: int, L: float) -> SpectralField:
    """Apply x_k = a v_k + b conj(v_{-k}) shell by shell."""
    out = {}
    modes = set(v.coeffs) | {neg(m) for m in v.coeffs}
    for k in modes:
        bc = bogoliubov(norm2(k), p, L)
        out[k] = bc.a * v[k] + bc.b * v[neg(k)].conjugate()
    return SpectralField(v.d, v.n_lat, out)


def from_x(x: SpectralField, p: int, L: float) -> SpectralField:
    """Inverse of :func:`to_x`."""
    out = {}
    modes = set(x.coeffs) | {neg(m) for m in x.coeffs}
    for k in modes:
        bc = bogoliubov(norm2(k), p, L)
        out[k] = bc.a * x[k] - bc.b * x[neg(k)].conjugate()
    return SpectralField(x.d, x.n_lat, out)


def field_to_vector(x: SpectralField, space: ModeSpace) -> np.ndarray:
    extra = set(x.coeffs) - set(space.modes)
    if extra:
        raise ValueError(f"field has modes outside the mode set: {sorted(extra)[:4]}")
    return np.array([x[m] for m in space.modes], dtype=complex)


def vector_to_field(y: np.ndarray, space: ModeSpace, n_lat: int | None = None) -> SpectralField:
    n_lat = n_lat if n_lat is not None else max(max(abs(c) for c in m) for m in space.modes)
    return SpectralField(space.d, n_lat, dict(zip(space.modes, y)))
