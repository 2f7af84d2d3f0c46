"""Sparse polynomials and polynomial vector fields in the variables (y, conj y).

Variables live in a :class:`ModeSpace`: an ordered tuple of lattice modes.
With ``n`` modes there are ``2n`` variables; index ``i < n`` is ``y_{modes[i]}``
and index ``n + i`` is ``conj(y_{modes[i]})``.  A monomial is a dense tuple of
``2n`` exponents (first half alpha, second half beta), which gives a unique key
for exact equality tests.

Vector fields are stored in the true-time form ``d/dt z_t = X_t(z)`` with one
component per variable ``t`` (``t < n``: the ``d/dy`` part, ``t >= n``: the
``d/d conj(y)`` part).  The field of a Hamiltonian is ``dy_m/dt = -i dH/d conj(y_m)``.

Coefficients may be ``complex`` or exact :class:`~nlsnf.qcomplex.QComplex`;
no operation converts between them silently.
"""
from __future__ import annotations

import operator
import re
from collections import defaultdict
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np

from .lattice import Mode, as_mode, ball_modes, norm2
from .qcomplex import QComplex

DEGREE_BUDGET = 8


class DegreeOverflowError(ValueError):
    """A product or bracket would exceed the configured degree budget."""


def _i_like(c):
    return QComplex(0, 1) if isinstance(c, QComplex) else 1j


def _conj(c):
    return c.conjugate()


def _vec_add(a, b):
    return tuple(map(operator.add, a, b))


class ModeSpace:
    """Ordered set of modes defining the variable layout."""

    def __init__(self, modes: Iterable):
        modes = [as_mode(m) for m in modes]
        if len(set(modes)) != len(modes):
            raise ValueError("duplicate modes")
        self.modes: tuple = tuple(sorted(modes))
        self.n = len(self.modes)
        self.d = len(self.modes[0]) if self.modes else 0
        self.index = {m: i for i, m in enumerate(self.modes)}

    @classmethod
    def ball(cls, d: int, radius: float, include_zero: bool = False) -> "ModeSpace":
        return cls(ball_modes(d, radius, include_zero))

    @property
    def nvars(self) -> int:
        return 2 * self.n

    def var(self, mode, conj: bool = False) -> int:
        i = self.index[as_mode(mode, self.d)]
        return i + self.n if conj else i

    def mode_of(self, v: int) -> Mode:
        return self.modes[v % self.n]

    def is_conj(self, v: int) -> bool:
        return v >= self.n

    def conj_var(self, v: int) -> int:
        return (v + self.n) % (2 * self.n)

    def shell_of(self, v: int) -> int:
        return norm2(self.mode_of(v))

    def shells(self) -> list[int]:
        return sorted({norm2(m) for m in self.modes})

    def unit(self, v: int) -> tuple:
        e = [0] * self.nvars
        e[v] = 1
        return tuple(e)

    def zero(self) -> tuple:
        return (0,) * self.nvars

    def momentum(self, exps) -> tuple:
        """sum(alpha-modes) - sum(beta-modes)."""
        out = [0] * self.d
        for v, k in enumerate(exps):
            if k:
                sgn = -k if v >= self.n else k
                for j, c in enumerate(self.modes[v % self.n]):
                    out[j] += sgn * c
        return tuple(out)

    def conj_exps(self, exps) -> tuple:
        return tuple(exps[self.n:]) + tuple(exps[:self.n])

    def __eq__(self, other):
        return isinstance(other, ModeSpace) and self.modes == other.modes

    def __hash__(self):
        return hash(self.modes)

    def __repr__(self):
        return f"ModeSpace({list(self.modes)})"


def exps_from(space: ModeSpace, alpha: Mapping = None, beta: Mapping = None) -> tuple:
    e = [0] * space.nvars
    for m, k in (alpha or {}).items():
        e[space.var(m)] += k
    for m, k in (beta or {}).items():
        e[space.var(m, conj=True)] += k
    return tuple(e)


def _purge(d: dict) -> dict:
    return {k: v for k, v in d.items() if v}


class PolyHamiltonian:
    """Scalar polynomial in (y, conj y); used for Hamiltonians and other functionals."""

    def __init__(self, space: ModeSpace, terms: Mapping | None = None):
        self.space = space
        self.terms: dict = _purge(dict(terms or {}))

    @classmethod
    def monomial(cls, space, alpha=None, beta=None, coeff=1) -> "PolyHamiltonian":
        return cls(space, {exps_from(space, alpha, beta): coeff})

    @classmethod
    def super_action(cls, space: ModeSpace, mu: int, coeff=1) -> "PolyHamiltonian":
        """sum_{|n|^2 = mu} |y_n|^2."""
        return cls(space, {exps_from(space, {m: 1}, {m: 1}): coeff
                           for m in space.modes if norm2(m) == mu})

    # --- algebra ------------------------------------------------------------------
    def copy(self):
        return PolyHamiltonian(self.space, dict(self.terms))

    def __add__(self, other):
        out = defaultdict(int, self.terms)
        for k, v in other.terms.items():
            out[k] = out[k] + v
        return PolyHamiltonian(self.space, out)

    def __neg__(self):
        return PolyHamiltonian(self.space, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        return PolyHamiltonian(self.space, {k: c * v for k, v in self.terms.items()})

    def __mul__(self, other):
        if not isinstance(other, PolyHamiltonian):
            return self.scale(other)
        out = defaultdict(int)
        for ka, va in self.terms.items():
            for kb, vb in other.terms.items():
                k = _vec_add(ka, kb)
                out[k] = out[k] + va * vb
        return PolyHamiltonian(self.space, out)

    __rmul__ = scale

    def map_coeffs(self, f):
        return PolyHamiltonian(self.space, {k: f(v) for k, v in self.terms.items()})

    def to_exact(self):
        return self.map_coeffs(QComplex.coerce)

    def to_float(self):
        return self.map_coeffs(complex)

    # --- structure ----------------------------------------------------------------
    def degrees(self) -> list[int]:
        return sorted({sum(k) for k in self.terms})

    def max_degree(self) -> int:
        return max((sum(k) for k in self.terms), default=0)

    def homogeneous(self, deg: int) -> "PolyHamiltonian":
        return PolyHamiltonian(self.space, {k: v for k, v in self.terms.items() if sum(k) == deg})

    def truncate(self, max_deg: int) -> "PolyHamiltonian":
        return PolyHamiltonian(self.space, {k: v for k, v in self.terms.items() if sum(k) <= max_deg})

    def conjugate(self) -> "PolyHamiltonian":
        c = self.space.conj_exps
        return PolyHamiltonian(self.space, {c(k): _conj(v) for k, v in self.terms.items()})

    def is_real(self, tol: float = 0.0) -> bool:
        conj = self.conjugate()
        keys = set(self.terms) | set(conj.terms)
        if tol == 0:
            return all(self.terms.get(k, 0) == conj.terms.get(k, 0) for k in keys)
        return all(abs(complex(self.terms.get(k, 0)) - complex(conj.terms.get(k, 0))) <= tol for k in keys)

    def realified(self) -> "PolyHamiltonian":
        """(H + conj H) / 2, exactly real."""
        half = Fraction(1, 2) if any(isinstance(v, QComplex) for v in self.terms.values()) else 0.5
        return (self + self.conjugate()).scale(half)

    def is_momentum_conserving(self) -> bool:
        zero = (0,) * self.space.d
        return all(self.space.momentum(k) == zero for k in self.terms)

    def partial(self, v: int) -> "PolyHamiltonian":
        out = {}
        for k, c in self.terms.items():
            if k[v]:
                kk = list(k)
                kk[v] -= 1
                out[tuple(kk)] = c * k[v]
        return PolyHamiltonian(self.space, out)

    def evaluate(self, y) -> complex:
        z = np.concatenate([np.asarray(y, dtype=complex), np.conj(np.asarray(y, dtype=complex))])
        total = 0j
        for k, c in self.terms.items():
            total += complex(c) * np.prod(z ** np.asarray(k))
        return total

    def __eq__(self, other):
        return isinstance(other, PolyHamiltonian) and self.space == other.space and self.terms == other.terms

    def __len__(self):
        return len(self.terms)

    def __repr__(self):
        return f"PolyHamiltonian({len(self.terms)} terms, degrees {self.degrees()})"


class PolyVectorField:
    """Polynomial vector field; keys are ``(exps, target_variable)``."""

    def __init__(self, space: ModeSpace, terms: Mapping | None = None):
        self.space = space
        self.terms: dict = _purge(dict(terms or {}))

    def copy(self):
        return PolyVectorField(self.space, dict(self.terms))

    def __add__(self, other):
        out = defaultdict(int, self.terms)
        for k, v in other.terms.items():
            out[k] = out[k] + v
        return PolyVectorField(self.space, out)

    def __neg__(self):
        return PolyVectorField(self.space, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        return PolyVectorField(self.space, {k: c * v for k, v in self.terms.items()})

    __mul__ = scale
    __rmul__ = scale

    def map_coeffs(self, f):
        return PolyVectorField(self.space, {k: f(v) for k, v in self.terms.items()})

    def to_exact(self):
        return self.map_coeffs(QComplex.coerce)

    def to_float(self):
        return self.map_coeffs(complex)

    def degrees(self) -> list[int]:
        return sorted({sum(e) for e, _ in self.terms})

    def max_degree(self) -> int:
        return max((sum(e) for e, _ in self.terms), default=0)

    def homogeneous(self, deg: int) -> "PolyVectorField":
        return PolyVectorField(self.space, {k: v for k, v in self.terms.items() if sum(k[0]) == deg})

    def truncate(self, max_deg: int) -> "PolyVectorField":
        return PolyVectorField(self.space, {k: v for k, v in self.terms.items() if sum(k[0]) <= max_deg})

    def above(self, deg: int) -> "PolyVectorField":
        return PolyVectorField(self.space, {k: v for k, v in self.terms.items() if sum(k[0]) > deg})

    def y_part(self) -> dict:
        """Terms with a d/dy target (the conj half mirrors these for real fields)."""
        return {k: v for k, v in self.terms.items() if k[1] < self.space.n}

    def conj_pairing_defect(self) -> float:
        """Largest violation of X_{conj t}(alpha, beta) = conj X_t(beta, alpha)."""
        sp = self.space
        worst = 0.0
        keys = set(self.terms)
        keys |= {(sp.conj_exps(e), sp.conj_var(t)) for e, t in self.terms}
        for e, t in keys:
            a = self.terms.get((e, t), 0)
            b = self.terms.get((sp.conj_exps(e), sp.conj_var(t)), 0)
            worst = max(worst, abs(complex(a) - complex(_conj(b))))
        return worst

    def is_momentum_conserving(self) -> bool:
        zero = (0,) * self.space.d
        return all(momentum_of_monomial(self.space, e, t) == zero for e, t in self.terms)

    def evaluate(self, y) -> np.ndarray:
        """Components d/dt y_m at the point y (length n)."""
        return CompiledField(self)(np.asarray(y, dtype=complex))

    def __eq__(self, other):
        return isinstance(other, PolyVectorField) and self.space == other.space and self.terms == other.terms

    def __len__(self):
        return len(self.terms)

    def __repr__(self):
        return f"PolyVectorField({len(self.terms)} terms, degrees {self.degrees()})"


# --- basic operations ------------------------------------------------------------------

def momentum_of_monomial(space: ModeSpace, exps, target: int) -> tuple:
    """sum(alpha-modes) - sum(beta-modes) - (+-target mode); zero iff momentum is conserved.

    A ``d/dy_m`` target contributes ``-m``, a ``d/d conj(y_m)`` target ``+m``.
    """
    mom = space.momentum(exps)
    m = space.mode_of(target)
    if space.is_conj(target):
        return tuple(a + b for a, b in zip(mom, m))
    return tuple(a - b for a, b in zip(mom, m))


def vector_field_of(H: PolyHamiltonian) -> PolyVectorField:
    """Hamiltonian vector field: dy_m/dt = -i dH/d conj(y_m), d conj(y_m)/dt = i dH/dy_m."""
    sp = H.space
    n = sp.n
    out = defaultdict(int)
    for e, c in H.terms.items():
        unit = _i_like(c)
        for v, k in enumerate(e):
            if not k:
                continue
            ee = list(e)
            ee[v] -= 1
            ee = tuple(ee)
            if v >= n:
                key = (ee, v - n)
                out[key] = out[key] + (-unit) * c * k
            else:
                key = (ee, v + n)
                out[key] = out[key] + unit * c * k
    return PolyVectorField(sp, out)


def hamiltonian_of(X: PolyVectorField, tol: float = 0.0) -> PolyHamiltonian:
    """Recover H with vector_field_of(H) == X (up to constants).

    Raises ValueError if X is not Hamiltonian (checked to ``tol``; 0 = exact).
    """
    sp = X.space
    n = sp.n
    terms = {}
    for (e, t), c in sorted(X.terms.items(), key=lambda kv: kv[0][1] >= n):
        ee = list(e)
        v = t + n if t < n else t - n  # the variable differentiated away
        ee[v] += 1
        ee = tuple(ee)
        if ee in terms:
            continue
        # d/dy target: c = -i h k; d/dconj(y) target: c = i h k (k = exponent of v)
        h = c * _i_like(c) / ee[v] if t < n else -(c * _i_like(c)) / ee[v]
        terms[ee] = h
    H = PolyHamiltonian(sp, terms)
    back = vector_field_of(H)
    keys = set(back.terms) | set(X.terms)
    if tol == 0:
        bad = [k for k in keys if back.terms.get(k, 0) != X.terms.get(k, 0)]
    else:
        bad = [k for k in keys if abs(complex(back.terms.get(k, 0)) - complex(X.terms.get(k, 0))) > tol]
    if bad:
        raise ValueError(f"vector field is not Hamiltonian ({len(bad)} inconsistent terms)")
    return H


def _by_target(X: PolyVectorField) -> dict:
    out = defaultdict(list)
    for (e, t), c in X.terms.items():
        out[t].append((e, c))
    return out


_BITS = 8


def _pack(e) -> int:
    """Exponent tuple -> one integer with 8 bits per variable (exponent addition is integer addition)."""
    return sum(k << (_BITS * i) for i, k in enumerate(e) if k)


def _unpack(x: int, nv: int) -> tuple:
    mask = (1 << _BITS) - 1
    return tuple((x >> (_BITS * i)) & mask for i in range(nv))


def _directional(Y: PolyVectorField, X: PolyVectorField, out: dict, sign: int, max_degree,
                 y_only: bool = False):
    """Accumulate sign * DY . X into out (keys are (packed exponents, target))."""
    n = Y.space.n
    xt = defaultdict(list)
    for (f, t), c in X.terms.items():
        xt[t].append((sum(f), _pack(f), c))
    for lst in xt.values():
        lst.sort(key=lambda r: r[0])
    for (e, t), c in Y.terms.items():
        if y_only and t >= n:
            continue
        pe = _pack(e)
        de = sum(e)
        limit = None if max_degree is None else max_degree - de + 1
        for v, k in enumerate(e):
            if not k or v not in xt:
                continue
            base = pe - (1 << (_BITS * v))
            ck = c * (sign * k)
            for df, pf, cx in xt[v]:
                if limit is not None and df > limit:
                    break
                key = (base + pf, t)
                out[key] = out[key] + ck * cx


def lie_bracket(X: PolyVectorField, Y: PolyVectorField, max_degree: int | None = None,
                budget: int | None = None, real: bool = False) -> PolyVectorField:
    """[X, Y] = DY.X - DX.Y (so that [X, Y] is the Lie derivative of Y along X).

    ``max_degree`` truncates explicitly; otherwise the result must fit in the
    degree budget (default :data:`DEGREE_BUDGET`).  With ``real=True`` both
    fields are assumed conjugation-paired (see
    :meth:`PolyVectorField.conj_pairing_defect`); only the d/dy half is
    computed and the d/dconj(y) half is obtained by mirroring.
    """
    if X.space != Y.space:
        raise ValueError("fields live on different mode spaces")
    if max_degree is None and X.terms and Y.terms:
        budget = DEGREE_BUDGET if budget is None else budget
        top = X.max_degree() + Y.max_degree() - 1
        if top > budget:
            raise DegreeOverflowError(f"bracket degree {top} exceeds budget {budget}")
    out: dict = defaultdict(int)
    _directional(Y, X, out, 1, max_degree, real)
    _directional(X, Y, out, -1, max_degree, real)
    sp = X.space
    nv = sp.nvars
    terms = {(_unpack(k, nv), t): c for (k, t), c in out.items()}
    if real:
        terms.update({(sp.conj_exps(e), t + sp.n): _conj(c) for (e, t), c in list(terms.items())})
    return PolyVectorField(sp, terms)


def lie_derivative(X: PolyVectorField, F: PolyHamiltonian, max_degree: int | None = None) -> PolyHamiltonian:
    """X(F) = sum_t dF/dz_t X_t."""
    out = defaultdict(int)
    xt = _by_target(X)
    for e, c in F.terms.items():
        for v, k in enumerate(e):
            if not k or v not in xt:
                continue
            base = list(e)
            base[v] -= 1
            base = tuple(base)
            for f, cx in xt[v]:
                ne = _vec_add(base, f)
                if max_degree is not None and sum(ne) > max_degree:
                    continue
                out[ne] = out[ne] + c * k * cx
    return PolyHamiltonian(F.space, out)


def poisson_bracket(F: PolyHamiltonian, H: PolyHamiltonian, max_degree: int | None = None) -> PolyHamiltonian:
    """{F, H} := X_H(F), the derivative of F along the flow of H.

    With this convention [X_F, X_H] = X_{{H, F}}.
    """
    return lie_derivative(vector_field_of(H), F, max_degree)


def majorant(X):
    """Replace every coefficient by its modulus (fields or scalar polynomials)."""
    if isinstance(X, PolyVectorField):
        return PolyVectorField(X.space, {k: abs(complex(v)) for k, v in X.terms.items()})
    return PolyHamiltonian(X.space, {k: abs(complex(v)) for k, v in X.terms.items()})


def substitute_linear(H: PolyHamiltonian, images: Mapping[int, PolyHamiltonian],
                      space: ModeSpace | None = None) -> PolyHamiltonian:
    """Replace every variable v of H by the linear polynomial ``images[v]``."""
    space = space or next(iter(images.values())).space
    cache: dict = {}

    def power(v, k):
        key = (v, k)
        if key not in cache:
            cache[key] = images[v] if k == 1 else power(v, k - 1) * images[v]
        return cache[key]

    out = defaultdict(int)
    one = space.zero()
    for e, c in H.terms.items():
        acc = PolyHamiltonian(space, {one: c})
        for v, k in enumerate(e):
            if k:
                acc = acc * power(v, k)
        for kk, vv in acc.terms.items():
            out[kk] = out[kk] + vv
    return PolyHamiltonian(space, out)


# --- fast numeric evaluation -------------------------------------------------------------

class CompiledField:
    """Vectorized evaluator of the d/dy half of a field at complex points."""

    def __init__(self, X: PolyVectorField):
        self.n = X.space.n
        items = list(X.y_part().items())
        deg = max((sum(e) for (e, _), _ in items), default=0)
        self.deg = deg
        idx = np.full((len(items), max(deg, 1)), 2 * self.n, dtype=np.intp)
        for r, ((e, _), _) in enumerate(items):
            col = 0
            for v, k in enumerate(e):
                for _ in range(k):
                    idx[r, col] = v
                    col += 1
        self.idx = idx
        self.target = np.array([t for (_, t), _ in items], dtype=np.intp)
        self.coef = np.array([complex(c) for _, c in items], dtype=complex)

    def __call__(self, y: np.ndarray) -> np.ndarray:
        z = np.empty(2 * self.n + 1, dtype=complex)
        z[:self.n] = y
        z[self.n:2 * self.n] = np.conj(y)
        z[2 * self.n] = 1.0
        if not len(self.coef):
            return np.zeros(self.n, dtype=complex)
        mono = self.coef.copy()
        for col in range(self.idx.shape[1]):
            mono *= z[self.idx[:, col]]
        re = np.bincount(self.target, weights=mono.real, minlength=self.n)
        im = np.bincount(self.target, weights=mono.imag, minlength=self.n)
        return re + 1j * im


# --- text serialization -------------------------------------------------------------------

def _fmt_num(x) -> str:
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    return repr(float(x))


def _parse_num(s: str, exact: bool):
    if "/" in s or exact:
        return Fraction(s)
    return float(s)


def _fmt_mode(m) -> str:
    return ",".join(str(c) for c in m)


def _fmt_powers(space, exps, conj: bool) -> str:
    lo, hi = (space.n, 2 * space.n) if conj else (0, space.n)
    return " ".join(f"{_fmt_mode(space.mode_of(v))}^{exps[v]}" for v in range(lo, hi) if exps[v])


def to_text(P) -> str:
    """One term per line: ``re im | alpha: n^k ... | beta: n^k ... [| target m conj]``."""
    sp = P.space
    lines = ["# modes: " + " ".join(_fmt_mode(m) for m in sp.modes)]
    is_field = isinstance(P, PolyVectorField)
    for key in sorted(P.terms):
        c = P.terms[key]
        e, t = key if is_field else (key, None)
        re_, im_ = (c.re, c.im) if isinstance(c, QComplex) else (complex(c).real, complex(c).imag)
        parts = [f"{_fmt_num(re_)} {_fmt_num(im_)}",
                 f"alpha: {_fmt_powers(sp, e, False)}".rstrip(),
                 f"beta: {_fmt_powers(sp, e, True)}".rstrip()]
        if is_field:
            parts.append(f"target {_fmt_mode(sp.mode_of(t))} {int(sp.is_conj(t))}")
        lines.append(" | ".join(parts))
    return "\n".join(lines) + "\n"


def from_text(text: str):
    """Inverse of :func:`to_text`; returns a field if target columns are present."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("# modes:"):
        raise ValueError("missing '# modes:' header")
    modes = [tuple(int(c) for c in tok.split(",")) for tok in lines[0][len("# modes:"):].split()]
    sp = ModeSpace(modes)
    terms = {}
    is_field = None
    for ln in lines[1:]:
        parts = [p.strip() for p in ln.split("|")]
        re_s, im_s = parts[0].split()
        exact = "/" in re_s or "/" in im_s
        if exact:
            coeff = QComplex(Fraction(re_s), Fraction(im_s))
        else:
            coeff = complex(float(re_s), float(im_s))
        e = [0] * sp.nvars
        for part, conj in ((parts[1], False), (parts[2], True)):
            body = re.sub(r"^(alpha|beta):", "", part).split()
            for tok in body:
                m, k = tok.split("^")
                e[sp.var(tuple(int(c) for c in m.split(",")), conj)] += int(k)
        e = tuple(e)
        this_field = len(parts) > 3
        if is_field is None:
            is_field = this_field
        if this_field:
            _, m, cbit = parts[3].split()
            terms[(e, sp.var(tuple(int(c) for c in m.split(",")), bool(int(cbit))))] = coeff
        else:
            terms[e] = coeff
    return PolyVectorField(sp, terms) if is_field else PolyHamiltonian(sp, terms)
