"""Split-step Fourier integration of ``i psi_t = Lap psi + lam |psi|^{2p} psi`` on T^d.

Both substeps are exact flows: the linear one multiplies mode ``n`` by
``exp(i |n|^2 tau)``, the nonlinear one rotates each grid value by
``exp(-i lam |psi|^{2p} tau)``.  Strang splitting composes them as
L(tau/2) N(tau) L(tau/2); the fourth-order option is the symmetric triple
jump of Strang steps.  Consecutive linear half steps are merged.

The conserved energy of this flow is
``E = sum |k|^2 |psi_k|^2 - lam/(p+1) mean_grid |psi|^{2p+2}``,
which matches the defocusing Hamiltonian with ``+1/(p+1)`` when ``lam = -1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import SpectralField, as_mode, bracket, fft_modes, norm2

YOSHIDA_W1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
YOSHIDA_W0 = -(2.0 ** (1.0 / 3.0)) / (2.0 - 2.0 ** (1.0 / 3.0))


class SimulationError(RuntimeError):
    """Non-finite values appeared; ``record`` holds the trajectory up to the failure."""

    def __init__(self, msg, record=None):
        super().__init__(msg)
        self.record = record


@dataclass(frozen=True)
class SimConfig:
    d: int = 1
    p: int = 1
    lam: float = -1.0
    n_grid: int = 64
    dt: float = 1e-3
    t_end: float = 1.0
    integrator: str = "strang2"
    dealias: bool | None = None  # None: on for p >= 2
    sample_dt: float | None = None  # None: sample every step

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.p < 1 or int(self.p) != self.p:
            raise ValueError("p must be a positive integer")
        if self.n_grid < 4 or self.n_grid & (self.n_grid - 1):
            raise ValueError("n_grid must be a power of two >= 4")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.t_end < 0:
            raise ValueError("t_end must be >= 0")
        if self.integrator not in ("strang2", "yoshida4"):
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if self.sample_dt is not None and self.sample_dt < self.dt:
            raise ValueError("sample_dt must be >= dt")

    @property
    def use_dealias(self) -> bool:
        return self.p >= 2 if self.dealias is None else bool(self.dealias)

    def check_frequencies(self, L: float) -> None:
        """Frequencies are real iff 1 - 2 p lam L^p > 0."""
        if 1.0 - 2.0 * self.p * self.lam * L ** self.p <= 0:
            raise ValueError(f"1 - 2 p lam L^p <= 0 at L={L}: frequencies are not real")


@dataclass(frozen=True)
class PlaneWaveRef:
    m: tuple
    rho: float
    theta: float

    @classmethod
    def make(cls, m, rho: float, cfg: SimConfig) -> "PlaneWaveRef":
        if rho <= 0:
            raise ValueError("rho must be positive")
        m = as_mode(m, cfg.d)
        return cls(m, rho, cfg.lam * rho ** (2 * cfg.p) - norm2(m))


def plane_wave(m, rho: float, cfg: SimConfig, t: float, n_lat: int | None = None) -> SpectralField:
    """Exact orbit rho exp(i (m.x - theta t)) with theta = lam rho^{2p} - |m|^2."""
    ref = PlaneWaveRef.make(m, rho, cfg)
    n_lat = n_lat if n_lat is not None else cfg.n_grid // 2 - 1
    return SpectralField(cfg.d, n_lat, {ref.m: rho * np.exp(-1j * ref.theta * t)})


@dataclass
class StabilityRecord:
    times: np.ndarray
    orbital_dist: np.ndarray
    mass: np.ndarray
    energy: np.ndarray
    super_actions: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.times)
        for name in ("orbital_dist", "mass", "energy"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} has the wrong length")
        for mu, v in self.super_actions.items():
            if len(v) != n:
                raise ValueError(f"super-action series {mu} has the wrong length")
        if n > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    def columns(self) -> list[str]:
        return ["time", "orbital_dist", "mass", "energy"] + [f"sa_mu{mu}" for mu in sorted(self.super_actions)]

    def rows(self) -> np.ndarray:
        cols = [self.times, self.orbital_dist, self.mass, self.energy]
        cols += [self.super_actions[mu] for mu in sorted(self.super_actions)]
        return np.column_stack(cols)


class Stepper:
    """Array-level integrator on FFT-ordered coefficient arrays."""

    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        ks = fft_modes(cfg.n_grid, cfg.d)
        self.k2 = np.sum(ks ** 2, axis=0).astype(float)
        self.mask = None
        if cfg.use_dealias:
            self.mask = np.all(np.abs(ks) <= cfg.n_grid // 3, axis=0)
        if cfg.integrator == "strang2":
            self.nl = [1.0]
        else:
            self.nl = [YOSHIDA_W1, YOSHIDA_W0, YOSHIDA_W1]
        # linear coefficients between nonlinear substeps, merged across step boundaries
        lin = [self.nl[0] / 2]
        for a, b in zip(self.nl[:-1], self.nl[1:]):
            lin.append((a + b) / 2)
        lin.append(self.nl[-1] / 2)
        self.lin = lin
        self._cache: dict = {}

    def _lin(self, c: float) -> np.ndarray:
        if c not in self._cache:
            self._cache[c] = np.exp(1j * self.k2 * (c * self.cfg.dt))
        return self._cache[c]

    def _nonlinear(self, c: np.ndarray, tau: float) -> np.ndarray:
        p, lam = self.cfg.p, self.cfg.lam
        g = np.fft.ifftn(c, norm="forward")
        g *= np.exp(-1j * lam * tau * (g.real ** 2 + g.imag ** 2) ** p)
        out = np.fft.fftn(g, norm="forward")
        if self.mask is not None:
            out *= self.mask
        return out

    def advance(self, c: np.ndarray, nsteps: int) -> np.ndarray:
        if nsteps <= 0:
            return c
        dt = self.cfg.dt
        c = c * self._lin(self.lin[0])
        edge = self.lin[-1] + self.lin[0]
        for k in range(nsteps):
            for j, w in enumerate(self.nl):
                c = self._nonlinear(c, w * dt)
                if j < len(self.nl) - 1:
                    c *= self._lin(self.lin[j + 1])
            if k < nsteps - 1:
                c *= self._lin(edge)
        c *= self._lin(self.lin[-1])
        return c


def _to_arr(psi: SpectralField, cfg: SimConfig) -> np.ndarray:
    if psi.d != cfg.d:
        raise ValueError("field dimension does not match the configuration")
    return psi.to_array(cfg.n_grid)


def step(psi: SpectralField, cfg: SimConfig, nsteps: int = 1) -> SpectralField:
    """Advance ``nsteps`` time steps of size cfg.dt."""
    c = Stepper(cfg).advance(_to_arr(psi, cfg), nsteps)
    if not np.all(np.isfinite(c)):
        raise SimulationError("non-finite coefficients after step")
    return SpectralField.from_array(c, psi.n_lat)


def mass(psi: SpectralField) -> float:
    return math.fsum(abs(v) ** 2 for _, v in psi.items())


def _energy_arr(c: np.ndarray, cfg: SimConfig, k2: np.ndarray) -> float:
    kin = float(np.sum(k2 * np.abs(c) ** 2))
    g = np.fft.ifftn(c, norm="forward")
    pot = float(np.mean(np.abs(g) ** (2 * cfg.p + 2)))
    return kin - cfg.lam / (cfg.p + 1) * pot


def energy(psi: SpectralField, cfg: SimConfig) -> float:
    """Kinetic energy minus lam/(p+1) times the mean of |psi|^{2p+2} on the collocation grid."""
    k2 = np.sum(fft_modes(cfg.n_grid, cfg.d) ** 2, axis=0)
    return _energy_arr(_to_arr(psi, cfg), cfg, k2)


def perturbation(d: int, m, s: float, eps: float, seed: int, k_max: int, n_lat: int) -> SpectralField:
    """Random perturbation around mode m with ||.||_s (relative to m) exactly eps.

    Amplitudes decay like <k>^{-s-1} over offsets 0 < max|k_i| <= k_max, phases
    are uniform; the field is supported on m + k.
    """
    m = as_mode(m, d)
    rng = np.random.default_rng(seed)
    rng_k = range(-k_max, k_max + 1)
    offsets = [k for k in np.ndindex(*(len(rng_k),) * d)]
    offsets = [tuple(int(i) - k_max for i in k) for k in offsets]
    offsets = [k for k in offsets if any(k)]
    phases = rng.uniform(0.0, 2 * np.pi, size=len(offsets))
    if eps == 0:
        return SpectralField(d, n_lat, {})
    amps = np.array([bracket(k) ** (-s - 1) for k in offsets])
    coeffs = amps * np.exp(1j * phases)
    norm = math.sqrt(math.fsum(abs(c) ** 2 * bracket(k) ** (2 * s) for c, k in zip(coeffs, offsets)))
    coeffs *= eps / norm
    return SpectralField(d, n_lat, {tuple(a + b for a, b in zip(m, k)): c for k, c in zip(offsets, coeffs)})


def initial_datum(cfg: SimConfig, m, rho: float, eps: float, s: float, seed: int,
                  k_max: int | None = None) -> SpectralField:
    """Plane wave at m plus a perturbation, with total mass exactly rho^2."""
    n_lat = cfg.n_grid // 2 - 1
    k_max = k_max if k_max is not None else max(1, cfg.n_grid // 4)
    m = as_mode(m, cfg.d)
    pert = perturbation(cfg.d, m, s, eps, seed, k_max, n_lat)
    pm = mass(pert)
    if pm >= rho ** 2:
        raise ValueError("perturbation mass exceeds the plane-wave mass")
    coeffs = dict(pert.coeffs)
    coeffs[m] = math.sqrt(rho ** 2 - pm)
    return SpectralField(cfg.d, n_lat, coeffs)


def run_stability(cfg: SimConfig, m, rho: float, eps: float, s: float, seed: int = 0,
                  k_max: int | None = None, mu_record: int | None = None,
                  psi0: SpectralField | None = None) -> StabilityRecord:
    """Integrate from a perturbed plane wave and record diagnostics.

    Sampled quantities: orbital distance from the orbit of mode ``m`` in H^s,
    mass, energy and the super-actions of the demodulated field (shells
    ``1 <= mu <= mu_record`` of ``n - m``).
    """
    if eps < 0:
        raise ValueError("eps must be >= 0")
    m = as_mode(m, cfg.d)
    if psi0 is None:
        psi0 = initial_datum(cfg, m, rho, eps, s, seed, k_max)
    stepper = Stepper(cfg)
    ks = fft_modes(cfg.n_grid, cfg.d)
    rel = ks - np.asarray(m).reshape((cfg.d,) + (1,) * cfg.d)
    rel2 = np.sum(rel ** 2, axis=0)
    w2s = (1.0 + rel2) ** s
    at_m = rel2 == 0
    if mu_record is None:
        kk = k_max if k_max is not None else max(1, cfg.n_grid // 4)
        mu_record = cfg.d * kk * kk
    shells = list(range(1, mu_record + 1))
    shell_idx = np.where((rel2 >= 1) & (rel2 <= mu_record), rel2, 0).ravel()
    k2 = stepper.k2

    every = 1 if cfg.sample_dt is None else max(1, int(round(cfg.sample_dt / cfg.dt)))
    nsteps = int(round(cfg.t_end / cfg.dt))
    n_samples = nsteps // every + 1
    times = np.zeros(n_samples)
    od = np.zeros(n_samples)
    ms = np.zeros(n_samples)
    en = np.zeros(n_samples)
    sa = np.zeros((n_samples, len(shells)))

    def sample(i, c, t):
        a2 = np.abs(c) ** 2
        times[i] = t
        od[i] = math.sqrt(math.fsum((a2 * w2s)[~at_m].ravel()))
        ms[i] = math.fsum(a2.ravel())
        en[i] = _energy_arr(c, cfg, k2)
        sa[i] = np.bincount(shell_idx, weights=a2.ravel(), minlength=mu_record + 1)[1:]

    def record(upto):
        return StabilityRecord(times[:upto].copy(), od[:upto].copy(), ms[:upto].copy(), en[:upto].copy(),
                               {mu: sa[:upto, j].copy() for j, mu in enumerate(shells)},
                               meta={"m": list(m), "rho": rho, "eps": eps, "s": s, "seed": seed})

    c = _to_arr(psi0, cfg)
    if stepper.mask is not None:
        c = c * stepper.mask
    sample(0, c, 0.0)
    for i in range(1, n_samples):
        c = stepper.advance(c, every)
        if not np.all(np.isfinite(c)):
            raise SimulationError(f"non-finite state at t={i * every * cfg.dt}", record(i))
        sample(i, c, i * every * cfg.dt)
    return record(n_samples)


# --- linearization around the plane wave -------------------------------------------------

def floquet_matrix(n, rho: float, p: int, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Linearization of the defocusing flow around w0 = rho e^{i rho^{2p} t}.

    Acts on (psi_n, conj psi_{-n}) as ``i d/dt z = M(t) z``.  Returns
    ``(M(t), K)`` where K is the constant matrix after v_n = psi_n e^{-i rho^{2p} t}.
    """
    n2 = norm2(as_mode(n))
    r2p = rho ** (2 * p)
    w0 = rho * np.exp(1j * r2p * t)
    pre = p * rho ** (2 * (p - 1))
    M = np.array([[-n2 - (p + 1) * r2p, -pre * w0 ** 2],
                  [pre * np.conj(w0) ** 2, n2 + (p + 1) * r2p]], dtype=complex)
    K = np.array([[-n2 - p * r2p, -p * r2p],
                  [p * r2p, n2 + p * r2p]], dtype=complex)
    return M, K
