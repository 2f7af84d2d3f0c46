"""Truncated Fourier lattices, Sobolev norms, shells and orbital distances.

A function on the torus ``T^d`` (normalized Lebesgue measure) is stored by
its Fourier coefficients ``psi(x) = sum_n psi_n exp(i n.x)``, so the L^2
norm squared is the plain l^2 sum of the coefficients.  Modes are tuples of
ints ordered lexicographically; shells are keyed by ``mu = |n|^2``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, NamedTuple, Union

import numpy as np

Mode = tuple  # tuple[int, ...]


class LatticeOverflowError(ValueError):
    """A shifted or constructed field leaves the lattice cutoff."""


def norm2(n: Mode) -> int:
    """|n|^2, the shell key of a mode."""
    return sum(c * c for c in n)


def bracket(n: Mode) -> float:
    """Japanese bracket <n> = sqrt(1 + |n|^2)."""
    return math.sqrt(1.0 + norm2(n))


def as_mode(n, d: int | None = None) -> Mode:
    if isinstance(n, (int, np.integer)):
        n = (int(n),)
    n = tuple(int(c) for c in n)
    if d is not None and len(n) != d:
        raise ValueError(f"mode {n} has dimension {len(n)}, expected {d}")
    return n


def neg(n: Mode) -> Mode:
    return tuple(-c for c in n)


def add(n: Mode, m: Mode) -> Mode:
    return tuple(a + b for a, b in zip(n, m))


def sub(n: Mode, m: Mode) -> Mode:
    return tuple(a - b for a, b in zip(n, m))


def box_modes(d: int, cutoff: int) -> list[Mode]:
    """All modes with every component in [-cutoff, cutoff], sorted."""
    rng = range(-cutoff, cutoff + 1)
    return sorted(tuple(c) for c in np.array(np.meshgrid(*[rng] * d, indexing="ij")).reshape(d, -1).T)


def ball_modes(d: int, radius: float, include_zero: bool = False) -> list[Mode]:
    """Modes with |n| <= radius, sorted lexicographically."""
    r2 = radius * radius + 1e-9
    out = [n for n in box_modes(d, int(math.floor(radius))) if norm2(n) <= r2]
    if not include_zero:
        out = [n for n in out if any(n)]
    return out


@dataclass(frozen=True)
class SobolevParams:
    """Sobolev exponent with the weight <n> = sqrt(1+|n|^2)."""

    s: float

    def __post_init__(self):
        if self.s < 0:
            raise ValueError(f"Sobolev exponent must be >= 0, got {self.s}")

    def weight(self, n: Mode) -> float:
        return bracket(n) ** self.s


def _sp(s: Union[SobolevParams, float]) -> SobolevParams:
    return s if isinstance(s, SobolevParams) else SobolevParams(float(s))


@dataclass(frozen=True)
class SpectralField:
    """Finitely supported Fourier coefficients on a truncated lattice.

    ``coeffs`` maps modes (tuples of length ``d``) to complex amplitudes.
    Every mode must satisfy ``max |n_i| <= n_lat``.
    """

    d: int
    n_lat: int
    coeffs: Mapping = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for n, v in self.coeffs.items():
            n = as_mode(n, self.d)
            if max((abs(c) for c in n), default=0) > self.n_lat:
                raise LatticeOverflowError(f"mode {n} outside cutoff {self.n_lat}")
            v = complex(v)
            if v != 0:
                clean[n] = v
        object.__setattr__(self, "coeffs", MappingProxyType(dict(sorted(clean.items()))))

    def __getitem__(self, n) -> complex:
        return self.coeffs.get(as_mode(n, self.d), 0j)

    def __iter__(self):
        return iter(self.coeffs)

    def __len__(self):
        return len(self.coeffs)

    def items(self):
        return self.coeffs.items()

    def modes(self) -> list[Mode]:
        return list(self.coeffs)

    def scaled(self, c: complex) -> "SpectralField":
        return SpectralField(self.d, self.n_lat, {n: c * v for n, v in self.items()})

    def __add__(self, other: "SpectralField") -> "SpectralField":
        out = dict(self.coeffs)
        for n, v in other.items():
            out[n] = out.get(n, 0) + v
        return SpectralField(self.d, max(self.n_lat, other.n_lat), out)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        return self + other.scaled(-1)

    def conj_field(self) -> "SpectralField":
        """Coefficients of the complex conjugate function: (conj psi)_n = conj(psi_{-n})."""
        return SpectralField(self.d, self.n_lat, {neg(n): v.conjugate() for n, v in self.items()})

    # --- grid / array conversions -------------------------------------------------

    def to_array(self, n_grid: int) -> np.ndarray:
        """Coefficients in FFT ordering on an ``n_grid``^d array."""
        arr = np.zeros((n_grid,) * self.d, dtype=complex)
        for n, v in self.items():
            if max(abs(c) for c in n) >= n_grid // 2:
                raise LatticeOverflowError(f"mode {n} does not fit grid {n_grid}")
            arr[tuple(c % n_grid for c in n)] = v
        return arr

    @classmethod
    def from_array(cls, arr: np.ndarray, n_lat: int | None = None, tol: float = 0.0) -> "SpectralField":
        """Inverse of :meth:`to_array`; the Nyquist plane is dropped."""
        n_grid = arr.shape[0]
        d = arr.ndim
        if n_lat is None:
            n_lat = n_grid // 2 - 1
        ks = np.fft.fftfreq(n_grid, 1.0 / n_grid).astype(int)
        coeffs = {}
        for idx in zip(*np.nonzero(np.abs(arr) > tol)):
            n = tuple(int(ks[i]) for i in idx)
            if max(abs(c) for c in n) <= n_lat:
                coeffs[n] = arr[idx]
        return cls(d, n_lat, coeffs)

    def to_grid(self, n_grid: int) -> np.ndarray:
        """Point values on the uniform grid ``x_j = 2 pi j / n_grid``."""
        return np.fft.ifftn(self.to_array(n_grid)) * n_grid ** self.d

    @classmethod
    def from_grid(cls, values: np.ndarray, n_lat: int | None = None) -> "SpectralField":
        arr = np.fft.fftn(values) / values.size
        return cls.from_array(arr, n_lat)

    # --- serialization ------------------------------------------------------------

    def to_json(self) -> str:
        entries = [[list(n), v.real, v.imag] for n, v in self.items()]
        return json.dumps({"d": self.d, "N_lat": self.n_lat, "entries": entries})

    @classmethod
    def from_json(cls, text: str) -> "SpectralField":
        obj = json.loads(text)
        return cls(obj["d"], obj["N_lat"], {tuple(e[0]): complex(e[1], e[2]) for e in obj["entries"]})


def sobolev_norm(x: SpectralField, sp: Union[SobolevParams, float]) -> float:
    """||x||_s = sqrt(sum |x_n|^2 <n>^{2s})."""
    sp = _sp(sp)
    return math.sqrt(math.fsum(abs(v) ** 2 * bracket(n) ** (2 * sp.s) for n, v in x.items()))


def sobolev_inner(a: SpectralField, b: SpectralField, sp: Union[SobolevParams, float]) -> complex:
    """<a, b>_s = sum a_n conj(b_n) <n>^{2s}."""
    sp = _sp(sp)
    terms = [a[n] * b[n].conjugate() * bracket(n) ** (2 * sp.s) for n in a if n in b.coeffs]
    return complex(math.fsum(t.real for t in terms), math.fsum(t.imag for t in terms))


class Shell(NamedTuple):
    modes: tuple
    values: np.ndarray


def shell_decompose(x: SpectralField) -> dict[int, Shell]:
    """Group coefficients by mu = |n|^2; modes inside a shell keep lexicographic order."""
    groups: dict[int, list] = {}
    for n, v in x.items():
        groups.setdefault(norm2(n), []).append((n, v))
    return {mu: Shell(tuple(n for n, _ in g), np.array([v for _, v in g], dtype=complex))
            for mu, g in sorted(groups.items())}


def shell_compose(shells: Mapping[int, Shell], d: int, n_lat: int) -> SpectralField:
    return SpectralField(d, n_lat, {n: v for sh in shells.values() for n, v in zip(sh.modes, sh.values)})


def super_actions(x: SpectralField) -> dict[int, float]:
    """Per-shell mass sum_{|n|^2 = mu} |x_n|^2."""
    return {mu: float(np.sum(np.abs(sh.values) ** 2)) for mu, sh in shell_decompose(x).items()}


def orbital_distance(psi: SpectralField, m, sp: Union[SobolevParams, float]) -> float:
    """H^s distance of the demodulated field from its zero mode.

    Equals sqrt(sum_{n != m} |psi_n|^2 <n - m>^{2s}).
    """
    sp = _sp(sp)
    m = as_mode(m, psi.d)
    return math.sqrt(math.fsum(abs(v) ** 2 * bracket(sub(n, m)) ** (2 * sp.s)
                               for n, v in psi.items() if n != m))


def phase_optimized_distance(a: SpectralField, b: SpectralField, sp: Union[SobolevParams, float]) -> float:
    """min over phi of ||exp(-i phi) a - b||_s, in closed form."""
    na2 = sobolev_norm(a, sp) ** 2
    nb2 = sobolev_norm(b, sp) ** 2
    val = na2 + nb2 - 2.0 * abs(sobolev_inner(a, b, sp))
    return math.sqrt(max(val, 0.0))


def modulate(x: SpectralField, m) -> SpectralField:
    """Multiply by exp(i m.x): (modulate(x, m))_n = x_{n - m}."""
    m = as_mode(m, x.d)
    shifted = {add(n, m): v for n, v in x.items()}
    for n in shifted:
        if max(abs(c) for c in n) > x.n_lat:
            raise LatticeOverflowError(f"modulation by {m} pushes mode {n} past cutoff {x.n_lat}")
    return SpectralField(x.d, x.n_lat, shifted)


# --- array helpers used by the simulator ----------------------------------------------

def fft_modes(n_grid: int, d: int) -> np.ndarray:
    """Integer wavenumbers in FFT order, shape (d, n_grid, ..., n_grid)."""
    k = np.fft.fftfreq(n_grid, 1.0 / n_grid).astype(int)
    return np.array(np.meshgrid(*[k] * d, indexing="ij"))


def array_weights(n_grid: int, d: int, s: float, m: Iterable[int] | None = None) -> np.ndarray:
    """<n - m>^{2s} on the FFT-ordered grid."""
    ks = fft_modes(n_grid, d)
    if m is not None:
        ks = ks - np.asarray(tuple(m)).reshape((d,) + (1,) * d)
    return (1.0 + np.sum(ks ** 2, axis=0)) ** s
