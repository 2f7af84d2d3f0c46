"""Birkhoff normal form: resonance classification, homological equation, Lie series.

Conventions
-----------
Fields are true-time vector fields ``dy/dt = F(y)`` (see :mod:`nlsnf.poly`);
the quadratic part of the diagonalized Hamiltonian ``sum Omega |y|^2`` gives
``Lambda: dy_m/dt = -i Omega_m y_m``.

For a term ``X = y^alpha conj(y)^beta d/dz_t`` one has ``[X, Lambda] = i delta X``
with ``delta = (alpha - beta).Omega - Omega_m`` for a ``d/dy_m`` target and
``+ Omega_m`` for a ``d/d conj(y_m)`` target.  The Lie transform
``F -> exp(ad_X) F`` with ``X = i Y / delta`` removes the nonresonant part ``Y``
of a homogeneous block.  In the ``i d/dt`` form used for writing normal forms
(``G = i X``) this is the coefficient identity ``R - delta G = Y``.

Degrees
-------
``ell`` and ``K0`` count Hamiltonian degree; a Hamiltonian of degree ``K``
has a field of degree ``K - 1``.  ``normalize`` treats ``K0 = 3 .. ell + 2``,
so the resonant part has Hamiltonian degree at most ``ell + 2`` and the
remainder starts at Hamiltonian degree ``ell + 3``.

Resonance is decided structurally: with ``lambda_mu`` the net number of
``y`` minus ``conj(y)`` factors on shell ``mu`` (target included), a term is
resonant iff ``lambda == 0``.  Since the shell frequencies are distinct this
gives an exactly zero divisor; for generic ``L`` nonzero ``lambda`` gives a
nonzero divisor, which is checked against a floor.
"""
from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .lattice import SpectralField, bracket, norm2
from .norms import ball_norm, tame_certificate
from .poly import (CompiledField, ModeSpace, PolyHamiltonian, PolyVectorField, hamiltonian_of,
                   lie_bracket, momentum_of_monomial, poisson_bracket, to_text, vector_field_of)
from .qcomplex import QComplex
from .reduction import FrequencyTable, diagonalize, expand_reduced_hamiltonian, frequencies
from .simulate import SimulationError, StabilityRecord

DEFAULT_FLOOR = 1e-8


class NearResonanceError(ArithmeticError):
    """A structurally nonresonant term has a divisor below the configured floor."""

    def __init__(self, lambda_vector, divisor, L, floor):
        super().__init__(f"near resonance at L={L}: lambda={lambda_vector}, |divisor|={abs(divisor):.3e} "
                         f"< floor {floor:.3e}")
        self.lambda_vector = lambda_vector
        self.divisor = divisor
        self.L = L
        self.floor = floor


# --- classification -----------------------------------------------------------------------

@dataclass(frozen=True)
class ResonanceVerdict:
    resonant: bool
    lambda_vector: dict
    divisor: float


def lambda_vector(space: ModeSpace, exps, target: int | None = None) -> dict[int, int]:
    """Net y-minus-conj(y) count per shell; the target counts as -1 (y) or +1 (conj y)."""
    lam = defaultdict(int)
    n = space.n
    for v, k in enumerate(exps):
        if k:
            lam[norm2(space.modes[v % n])] += k if v < n else -k
    if target is not None:
        mu = space.shell_of(target)
        lam[mu] += 1 if space.is_conj(target) else -1
    return {mu: c for mu, c in sorted(lam.items()) if c}


def divisor_of(lam: dict, freq: FrequencyTable) -> float:
    return math.fsum(c * freq[mu] for mu, c in lam.items())


def classify(space: ModeSpace, exps, target: int | None, freq: FrequencyTable) -> ResonanceVerdict:
    """Structural resonance verdict for a field term (or a Hamiltonian monomial if target is None)."""
    zero = (0,) * space.d
    mom = momentum_of_monomial(space, exps, target) if target is not None else space.momentum(exps)
    if mom != zero:
        raise ValueError(f"term violates momentum conservation (momentum {mom})")
    lam = lambda_vector(space, exps, target)
    for mu in lam:
        if mu not in freq:
            raise ValueError(f"term touches shell {mu} beyond the frequency table")
    if not lam:
        return ResonanceVerdict(True, {}, 0.0)
    return ResonanceVerdict(False, lam, divisor_of(lam, freq))


# --- homological equation ---------------------------------------------------------------

@dataclass
class HomologicalSolution:
    generator: PolyHamiltonian
    resonant_part: PolyVectorField
    generator_field: PolyVectorField
    divisors: dict = field(default_factory=dict)

    def i_form_generator(self) -> PolyVectorField:
        """G = i X_chi, the generator written for the i d/dt convention."""
        unit = QComplex(0, 1) if any(isinstance(c, QComplex) for c in self.generator_field.terms.values()) else 1j
        return self.generator_field.scale(unit)

    def identity_residuals(self, Y: PolyVectorField) -> dict:
        """Per-term R - delta G - Y (exact zeros in exact arithmetic)."""
        G = self.i_form_generator()
        out = {}
        for key in set(Y.terms) | set(G.terms) | set(self.resonant_part.terms):
            r = self.resonant_part.terms.get(key, 0)
            g = G.terms.get(key, 0)
            out[key] = r - self.divisors.get(key, 0) * g - Y.terms.get(key, 0)
        return out

    def identity_defect(self, Y: PolyVectorField) -> float:
        return max((abs(complex(v)) for v in self.identity_residuals(Y).values()), default=0.0)


def solve_homological(Y: PolyVectorField, freq: FrequencyTable, floor: float = DEFAULT_FLOOR,
                      exact: bool = False) -> HomologicalSolution:
    """Split a homogeneous block into resonant part and Lie generator.

    With ``exact=True`` coefficients and divisors are converted to exact
    rationals so the identity ``R - delta G = Y`` holds with no rounding.
    """
    if len(Y.degrees()) > 1:
        raise ValueError("solve_homological expects a homogeneous field")
    if Y.degrees() and Y.degrees()[0] < 2:
        raise ValueError("homological equation needs field degree >= 2")
    sp = Y.space
    unit = QComplex(0, 1) if exact else 1j
    R, X, divs = {}, {}, {}
    for (e, t), c in Y.terms.items():
        if exact:
            c = QComplex.coerce(c)
        v = classify(sp, e, t, freq)
        if v.resonant:
            R[(e, t)] = c
            continue
        if abs(v.divisor) < floor:
            raise NearResonanceError(v.lambda_vector, v.divisor, freq.L, floor)
        d = Fraction(v.divisor) if exact else v.divisor
        divs[(e, t)] = d
        X[(e, t)] = unit * c / d
    Xf = PolyVectorField(sp, X)
    scale = max((abs(complex(c)) for c in X.values()), default=0.0)
    gen = hamiltonian_of(Xf, tol=0.0 if exact else 1e-12 * max(scale, 1.0))
    return HomologicalSolution(gen, PolyVectorField(sp, R), Xf, divs)


# --- Lie series ---------------------------------------------------------------------------

def _fact_scale(k: int, exact: bool):
    return Fraction(1, math.factorial(k)) if exact else 1.0 / math.factorial(k)


def lie_transform(X: PolyVectorField, H: PolyHamiltonian | PolyVectorField, degree_cap: int) -> PolyVectorField:
    """exp(ad_{X_H}) X = sum_k ad^k X / k!, truncated at field degree ``degree_cap``."""
    if X.terms and degree_cap < X.max_degree():
        raise ValueError("degree cap below the degree of the transformed field")
    G = H if isinstance(H, PolyVectorField) else vector_field_of(H)
    if not G.terms:
        return X.copy()
    if min(G.degrees()) < 2:
        raise ValueError("generator must have a zero of order three (field degree >= 2)")
    exact = any(isinstance(c, QComplex) for c in G.terms.values())
    tol = 0.0 if exact else 1e-12 * max(1.0, max(abs(complex(c)) for c in G.terms.values()))
    real = G.conj_pairing_defect() <= tol and X.conj_pairing_defect() <= tol * max(
        1.0, max((abs(complex(c)) for c in X.terms.values()), default=1.0))
    out = X.copy()
    term = X
    k = 0
    while term.terms:
        k += 1
        term = lie_bracket(G, term, max_degree=degree_cap, real=real)
        out = out + term.scale(_fact_scale(k, exact))
    return out


def hamiltonian_transform(H: PolyHamiltonian, chi: PolyHamiltonian, degree_cap: int) -> PolyHamiltonian:
    """H o Phi_chi = sum_k ad^k H / k! with ad H = {H, chi}, truncated at ``degree_cap``."""
    if not chi.terms:
        return H.copy()
    exact = any(isinstance(c, QComplex) for c in chi.terms.values())
    out = H.copy()
    term = H
    k = 0
    while term.terms:
        k += 1
        term = poisson_bracket(term, chi, max_degree=degree_cap)
        out = out + term.scale(_fact_scale(k, exact))
    return out


# --- normalization ------------------------------------------------------------------------

def linear_hamiltonian(space: ModeSpace, freq: FrequencyTable, exact: bool = False) -> PolyHamiltonian:
    n = space.n
    terms = {}
    for i, m in enumerate(space.modes):
        e = [0] * (2 * n)
        e[i] = e[n + i] = 1
        om = freq[norm2(m)]
        terms[tuple(e)] = QComplex(om) if exact else complex(om)
    return PolyHamiltonian(space, terms)


@dataclass
class NormalFormResult:
    space: ModeSpace
    freq: FrequencyTable
    p: int
    L: float
    ell: int
    degree_cap: int
    linear: PolyVectorField
    resonant_field: PolyVectorField
    remainder: PolyVectorField
    generators: list
    census: dict
    hamiltonian: PolyHamiltonian | None = None
    budgets: dict = field(default_factory=dict)

    @property
    def N_trunc(self) -> int:
        return max(max(abs(c) for c in m) for m in self.space.modes)

    def full_field(self, include_remainder: bool = True) -> PolyVectorField:
        F = self.linear + self.resonant_field
        return F + self.remainder if include_remainder else F

    def resonant_hamiltonian(self, tol: float | None = None) -> PolyHamiltonian:
        exact = any(isinstance(c, QComplex) for c in self.resonant_field.terms.values())
        if tol is None:
            scale = max((abs(complex(c)) for c in self.resonant_field.terms.values()), default=1.0)
            tol = 0.0 if exact else 1e-11 * max(scale, 1.0)
        return hamiltonian_of(self.resonant_field, tol=tol)

    def manifest(self) -> dict:
        return {
            "ell": self.ell, "N_trunc": self.N_trunc, "p": self.p, "L": self.L, "d": self.space.d,
            "degree_cap": self.degree_cap,
            "modes": [list(m) for m in self.space.modes],
            "census": {str(k): v for k, v in sorted(self.census.items())},
            "generator_norms": [float(tame_norm_sum(vector_field_of(g))) for g in self.generators],
            "norm_budgets": self.budgets,
        }

    def to_text(self) -> str:
        parts = ["## resonant", to_text(self.resonant_field), "## remainder", to_text(self.remainder)]
        for k, g in enumerate(self.generators):
            parts += [f"## generator {k}", to_text(g)]
        return "\n".join(parts)


def tame_norm_sum(X: PolyVectorField, s: float = 1.0) -> float:
    """sum over homogeneous parts of the tame certificate (a size measure for generators)."""
    return sum(tame_certificate(X.homogeneous(d), s) for d in X.degrees())


def _census(space, F: PolyVectorField, freq) -> dict:
    out = defaultdict(lambda: {"resonant": 0, "nonresonant": 0})
    for (e, t) in F.y_part():
        v = classify(space, e, t, freq)
        out[sum(e) + 1]["resonant" if v.resonant else "nonresonant"] += 1
    return {k: dict(v) for k, v in sorted(out.items())}


def normalize(H: PolyHamiltonian | PolyVectorField, freq: FrequencyTable, ell: int,
              degree_cap: int | None = None, floor: float = DEFAULT_FLOOR, exact: bool = False,
              hamiltonian_check: bool = False, p: int | None = None, L: float | None = None,
              radius: float | None = None, s: float = 6.0) -> NormalFormResult:
    """Iterative normalization of the diagonalized field.

    ``H`` is the Hamiltonian (or its field) in Bogoliubov variables; its
    quadratic part is replaced by the exact ``sum Omega |y|^2``.  Hamiltonian
    degrees above ``degree_cap`` (default ``ell + 3``) are discarded.
    """
    if ell < 0:
        raise ValueError("ell must be >= 0")
    degree_cap = ell + 3 if degree_cap is None else degree_cap
    if degree_cap < ell + 2:
        raise ValueError("degree_cap must be >= ell + 2")
    space = H.space
    fcap = degree_cap - 1
    Hlin = linear_hamiltonian(space, freq, exact)
    Lam = vector_field_of(Hlin)
    if isinstance(H, PolyHamiltonian):
        Hham = H.truncate(degree_cap)
        Hham = PolyHamiltonian(space, {k: v for k, v in Hham.terms.items() if sum(k) >= 3})
        F = vector_field_of(Hham)
    else:
        F = H.truncate(fcap)
        F = PolyVectorField(space, {k: v for k, v in F.terms.items() if sum(k[0]) >= 2})
        Hham = hamiltonian_of(F, tol=1e-12) if hamiltonian_check else None
    if exact:
        F = F.to_exact()
        if Hham is not None:
            Hham = Hham.to_exact()
    census = {}
    full_census = _census(space, F, freq)
    generators = []
    Hcur = (Hlin + Hham) if (hamiltonian_check and Hham is not None) else None
    Fcur = Lam + F
    for K0 in range(3, ell + 3):
        Y = Fcur.homogeneous(K0 - 1)
        sol = solve_homological(Y, freq, floor=floor, exact=exact)
        census[K0] = full_census.get(K0, {"resonant": 0, "nonresonant": 0})
        generators.append(sol.generator)
        if sol.generator_field.terms:
            Fcur = lie_transform(Fcur, sol.generator_field, fcap)
            # the transformed block equals R analytically; drop round-off remnants
            Fcur = PolyVectorField(space, {k: v for k, v in Fcur.terms.items() if sum(k[0]) != K0 - 1})
            Fcur = Fcur + sol.resonant_part
            if Hcur is not None:
                Hcur = hamiltonian_transform(Hcur, sol.generator, degree_cap)
    nonlin = Fcur - Lam
    if nonlin.homogeneous(1).terms or nonlin.homogeneous(0).terms:
        raise RuntimeError("linear part changed during normalization")
    R = PolyVectorField(space, {k: v for k, v in nonlin.terms.items() if 2 <= sum(k[0]) <= ell + 1})
    Xrem = PolyVectorField(space, {k: v for k, v in nonlin.terms.items() if sum(k[0]) >= ell + 2})
    for K in range(ell + 3, degree_cap + 1):
        census.setdefault(K, full_census.get(K, {"resonant": 0, "nonresonant": 0}))
    res = NormalFormResult(space, freq, p if p is not None else freq.p, L if L is not None else freq.L, ell,
                           degree_cap, Lam, R, Xrem, generators, census, Hcur)
    if radius is not None:
        up, lo = ball_norm(Xrem.to_float(), s, radius, samples=200)
        res.budgets = {"radius": radius, "s": s, "remainder_ball_upper": up.value,
                       "remainder_ball_lower": lo.value}
    return res


def reduced_normal_form_input(p: int, L: float, d: int, N_trunc: int, max_degree: int):
    """Diagonalized reduced Hamiltonian on the ball |n| <= N_trunc and its frequency table."""
    space = ModeSpace.ball(d, N_trunc)
    Hv = expand_reduced_hamiltonian(p, L, space, max_degree)
    Hx = diagonalize(Hv, p, L)
    freq = frequencies(p, L, max(norm2(m) for m in space.modes))
    return Hx, freq


def build_normal_form(p: int, L: float, d: int, N_trunc: int, ell: int, degree_cap: int | None = None,
                      **kw) -> NormalFormResult:
    degree_cap = ell + 3 if degree_cap is None else degree_cap
    Hx, freq = reduced_normal_form_input(p, L, d, N_trunc, degree_cap)
    return normalize(Hx, freq, ell, degree_cap=degree_cap, p=p, L=L, **kw)


# --- shell matrices and resonant structure -----------------------------------------------------

@dataclass
class ShellMatrix:
    mu: int
    modes: tuple
    matrix: np.ndarray


def _shell_counts(space: ModeSpace, exps) -> tuple[dict, dict]:
    a, b = defaultdict(int), defaultdict(int)
    n = space.n
    for v, k in enumerate(exps):
        if k:
            (a if v < n else b)[norm2(space.modes[v % n])] += k
    return a, b


class ShellMatrixModel:
    """Polynomial entries of M_mu(y) with i dy_m/dt = sum_j M_mj(y) y_j on each shell.

    ``M_mj = delta_mj Omega + sum_mono (1/a_mu) d^2 mono / dy_j d conj(y_m)``
    where ``a_mu`` is the number of y-factors of the monomial on shell ``mu``;
    by Euler's identity this reproduces ``dZ/d conj(y_m)``, and it is Hermitian
    whenever ``Z`` is real and resonant.
    """

    def __init__(self, R: PolyVectorField, freq: FrequencyTable, tol: float | None = None):
        self.space = R.space
        self.freq = freq
        exact = any(isinstance(c, QComplex) for c in R.terms.values())
        if tol is None:
            scale = max((abs(complex(c)) for c in R.terms.values()), default=1.0)
            tol = 0.0 if exact else 1e-11 * max(scale, 1.0)
        self.Z = hamiltonian_of(R, tol=tol)
        sp = self.space
        n = sp.n
        self.shells = defaultdict(list)
        for i, m in enumerate(sp.modes):
            self.shells[norm2(m)].append(i)
        entries = defaultdict(dict)
        for e, c in self.Z.terms.items():
            a, _ = _shell_counts(sp, e)
            for mi in range(n):
                if not e[n + mi]:
                    continue
                mu = sp.shell_of(mi)
                d1 = list(e)
                c1 = c * d1[n + mi]
                d1[n + mi] -= 1
                for j in self.shells[mu]:
                    if not d1[j]:
                        continue
                    d2 = list(d1)
                    c2 = c1 * d2[j]
                    d2[j] -= 1
                    w = Fraction(1, a[mu]) if exact else 1.0 / a[mu]
                    key = tuple(d2)
                    ent = entries[(mi, j)]
                    ent[key] = ent.get(key, 0) + c2 * w
        self.entries = {k: PolyHamiltonian(sp, v) for k, v in entries.items()}

    def evaluate(self, y, check: float | None = 1e-12) -> list[ShellMatrix]:
        y = np.asarray(y, dtype=complex)
        out = []
        for mu, idx in sorted(self.shells.items()):
            k = len(idx)
            M = np.eye(k, dtype=complex) * self.freq[mu]
            for a, mi in enumerate(idx):
                for b, j in enumerate(idx):
                    P = self.entries.get((mi, j))
                    if P is not None:
                        M[a, b] += P.evaluate(y)
            if check is not None:
                defect = float(np.max(np.abs(M - M.conj().T)))
                if defect > check:
                    raise ArithmeticError(f"shell matrix at mu={mu} is not Hermitian (defect {defect:.2e})")
            out.append(ShellMatrix(mu, tuple(self.space.modes[i] for i in idx), M))
        return out

    def hermitian_defect(self) -> float:
        """Largest polynomial-coefficient violation of M_mj = conj(M_jm)."""
        worst = 0.0
        keys = set(self.entries) | {(j, m) for m, j in self.entries}
        for (m, j) in keys:
            A = self.entries.get((m, j), PolyHamiltonian(self.space))
            B = self.entries.get((j, m), PolyHamiltonian(self.space)).conjugate()
            D = A - B
            worst = max([worst] + [abs(complex(v)) for v in D.terms.values()])
        return worst

    def reproduction_defect(self, R: PolyVectorField) -> float:
        """|| i R_m - sum_j M_mj y_j || coefficientwise (the Omega part excluded)."""
        acc = defaultdict(int)
        for (m, j), P in self.entries.items():
            for e, c in P.terms.items():
                ee = list(e)
                ee[j] += 1
                key = (tuple(ee), m)
                acc[key] = acc[key] + c
        unit = QComplex(0, 1) if any(isinstance(c, QComplex) for c in R.terms.values()) else 1j
        target = {k: unit * v for k, v in R.y_part().items()}
        keys = set(acc) | set(target)
        return max((abs(complex(acc.get(k, 0) - target.get(k, 0))) for k in keys), default=0.0)


def shell_matrices(R, freq: FrequencyTable, y) -> list[ShellMatrix]:
    """Evaluate the shell matrices of a resonant field at the point y."""
    if isinstance(R, NormalFormResult):
        R = R.resonant_field
    space = R.space
    if isinstance(y, SpectralField):
        y = np.array([y[m] for m in space.modes], dtype=complex)
    return ShellMatrixModel(R, freq).evaluate(y)


@dataclass
class PQReport:
    ok: bool
    resonant: bool
    balanced: bool
    hermitian_defect: float
    reproduction_defect: float
    p_real_defect: float | None = None
    q_pair_defect: float | None = None
    messages: list = field(default_factory=list)


def pq_form_check(R: PolyVectorField, freq: FrequencyTable, tol: float = 1e-12) -> PQReport:
    """Structural check of a resonant field.

    Every term must be resonant and factor as (shell-balanced monomial) times
    a ``y_j`` on the target's shell.  The shell matrices must be Hermitian as
    polynomials and reproduce the field.  In d = 1, ``P_m = M_mm`` must be real
    and ``Q_m = M_{m,-m}`` must satisfy ``conj(Q_m) = Q_{-m}``.
    """
    sp = R.space
    msgs = []
    resonant = True
    balanced = True
    for (e, t) in R.terms:
        v = classify(sp, e, t, freq)
        if not v.resonant:
            resonant = False
            msgs.append(f"nonresonant term {e}->{t}")
            continue
        if t >= sp.n:
            continue
        mu = sp.shell_of(t)
        a, b = _shell_counts(sp, e)
        a[mu] -= 1
        if a[mu] < 0 or any(a[k] != b[k] for k in set(a) | set(b)):
            balanced = False
            msgs.append(f"term {e}->{t} is not (balanced monomial) x (same-shell y)")
    model = ShellMatrixModel(R, freq)
    hd = model.hermitian_defect()
    rd = model.reproduction_defect(R)
    report = PQReport(False, resonant, balanced, hd, rd, messages=msgs)
    ok = resonant and balanced and hd <= tol and rd <= tol
    if sp.d == 1:
        p_def = 0.0
        q_def = 0.0
        empty = PolyHamiltonian(sp)
        for i, m in enumerate(sp.modes):
            j = sp.index.get((-m[0],))
            P = model.entries.get((i, i), empty)
            p_def = max([p_def] + [abs(complex(v)) for v in (P - P.conjugate()).terms.values()])
            if j is not None:
                Q = model.entries.get((i, j), empty)
                Qm = model.entries.get((j, i), empty)
                q_def = max([q_def] + [abs(complex(v)) for v in (Q.conjugate() - Qm).terms.values()])
        report.p_real_defect = p_def
        report.q_pair_defect = q_def
        ok = ok and p_def <= tol and q_def <= tol
    report.ok = ok
    return report


def super_action_brackets(Z: PolyHamiltonian) -> dict[int, PolyHamiltonian]:
    """{S_mu, Z} for every shell; exactly zero polynomials for a resonant Z."""
    sp = Z.space
    exact = any(isinstance(c, QComplex) for c in Z.terms.values())
    out = {}
    for mu in sp.shells():
        S = PolyHamiltonian.super_action(sp, mu, QComplex(1) if exact else 1.0)
        out[mu] = poisson_bracket(S, Z)
    return out


# --- truncated dynamics ---------------------------------------------------------------------

def _omega_vec(space: ModeSpace, freq: FrequencyTable) -> np.ndarray:
    return np.array([freq[norm2(m)] for m in space.modes])


def integrate_truncated(result: NormalFormResult, y0, T: float, dt: float, include_remainder: bool,
                        s: float = 6.0, sample_every: int | None = None) -> StabilityRecord:
    """Integrate i dy/dt = Omega y + R(y) (+ X(y)) with integrating-factor RK4.

    The linear flow is exact (interaction picture ``y = e^{-i Omega t} z``); RK4
    acts on the nonlinear part only.  Records ``||y||_s`` (in the
    ``orbital_dist`` column), mass, the Hamiltonian of the integrated field and
    the super-actions.
    """
    space = result.space
    if isinstance(y0, SpectralField):
        extra = set(y0.coeffs) - set(space.modes)
        if extra:
            raise ValueError("initial datum is not supported on the truncated mode set")
        y0 = np.array([y0[m] for m in space.modes], dtype=complex)
    y = np.asarray(y0, dtype=complex).copy()
    N = result.resonant_field + result.remainder if include_remainder else result.resonant_field
    f = CompiledField(N.to_float())
    try:
        Hnl = hamiltonian_of(N.to_float(), tol=1e-9)
        Hfull = Hnl + linear_hamiltonian(space, result.freq)
    except ValueError:
        Hfull = None
    om = _omega_vec(space, result.freq)
    wts = np.array([bracket(m) ** (2 * s) for m in space.modes])
    shells = sorted(set(norm2(m) for m in space.modes))
    sidx = np.array([shells.index(norm2(m)) for m in space.modes])
    nsteps = int(round(T / dt))
    every = sample_every or max(1, nsteps // 1000)
    rows = []

    def record(t, y):
        a2 = np.abs(y) ** 2
        sa = np.bincount(sidx, weights=a2, minlength=len(shells))
        en = float(Hfull.evaluate(y).real) if Hfull is not None else float("nan")
        rows.append((t, math.sqrt(float(np.sum(a2 * wts))), float(np.sum(a2)), en, sa))

    def rhs(tau, z):
        ph = np.exp(-1j * om * tau)
        return np.conj(ph) * f(ph * z)

    h = dt
    z = y
    record(0.0, y)
    for k in range(nsteps):
        t = k * h
        k1 = rhs(t, z)
        k2 = rhs(t + h / 2, z + h / 2 * k1)
        k3 = rhs(t + h / 2, z + h / 2 * k2)
        k4 = rhs(t + h, z + h * k3)
        z = z + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(z)):
            raise SimulationError(f"non-finite state at t={t + h}")
        if (k + 1) % every == 0 or k + 1 == nsteps:
            record((k + 1) * h, np.exp(-1j * om * (k + 1) * h) * z)
    times = np.array([r[0] for r in rows])
    sa = np.array([r[4] for r in rows])
    return StabilityRecord(times, np.array([r[1] for r in rows]), np.array([r[2] for r in rows]),
                           np.array([r[3] for r in rows]), {mu: sa[:, j] for j, mu in enumerate(shells)},
                           meta={"s": s, "include_remainder": include_remainder})


def norm_growth_rate(F: PolyVectorField, y: np.ndarray, s: float) -> float:
    """d||y||_s/dt = Re<F(y), y>_s / ||y||_s at the point y."""
    space = F.space
    w = np.array([bracket(m) ** (2 * s) for m in space.modes])
    v = CompiledField(F.to_float())(y)
    return float(np.sum((v * np.conj(y)).real * w)) / math.sqrt(float(np.sum(np.abs(y) ** 2 * w)))


def growth_exponent(result: NormalFormResult, radii=(0.1, 0.05, 0.025), s: float = 6.0,
                    samples: int = 200, seed: int = 0) -> dict:
    """Fit the exponent of max_{||y||_s = r} |d||y||_s/dt| against r.

    The field is the full normal form including the remainder; the linear and
    resonant parts contribute nothing analytically, so the rate measures the
    remainder.  Directions are shared across radii.
    """
    space = result.space
    F = result.full_field(include_remainder=True)
    w = np.array([bracket(m) ** s for m in space.modes])
    rng = np.random.default_rng(seed)
    dirs = []
    for _ in range(samples):
        u = (rng.normal(size=space.n) + 1j * rng.normal(size=space.n)) / w
        dirs.append(u / math.sqrt(float(np.sum(np.abs(u) ** 2 * w ** 2))))
    rates = []
    for r in radii:
        rates.append(max(abs(norm_growth_rate(F, r * u, s)) for u in dirs))
    slope, intercept = np.polyfit(np.log(radii), np.log(rates), 1)
    return {"radii": list(radii), "rates": rates, "exponent": float(slope), "log_C": float(intercept)}


def result_manifest_json(result: NormalFormResult) -> str:
    return json.dumps(result.manifest(), indent=2, sort_keys=True)
