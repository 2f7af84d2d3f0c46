"""Small-divisor enumeration for the shell frequencies.

Admissible integer vectors ``lam`` over shells ``1..mu_max`` satisfy
``||lam||_1 <= M``, ``sum_{q > N} |lam_q| <= 2`` and ``lam != 0``.  Every
admissible vector splits into a head part (shells ``<= N``) and one of the
tail patterns ``{}, +-e_q, +-e_q +- e_q', +-2 e_q`` (shells ``> N``).

The main enumerator lists head vectors once per query shape, evaluates them
with a matrix product and pairs each with the closest tail value through a
binary search over the sorted tail values.  An independent enumerator
(recursive generation plus brute-force pairing) cross-checks it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from itertools import combinations

import numpy as np

from .reduction import omega

EPS = np.finfo(float).eps
MAX_M = 8
MAX_MU = 400
MAX_PAIRS = 5e9


@dataclass(frozen=True)
class DivisorQuery:
    M: int
    N: int
    p: int
    L: float
    mu_max: int
    lam: float = -1.0

    def __post_init__(self):
        if self.M < 1 or self.N < 1:
            raise ValueError("M and N must be >= 1")
        if self.mu_max < 1:
            raise ValueError("mu_max must be >= 1")

    @property
    def n_head(self) -> int:
        return min(self.N, self.mu_max)

    @property
    def n_tail(self) -> int:
        return max(self.mu_max - self.N, 0)


@dataclass(frozen=True)
class ScanResult:
    min_divisor: float
    argmin_lambda: dict
    enumerated_count: int
    rounding_bound: float = 0.0


def omegas(q: DivisorQuery) -> np.ndarray:
    """Omega(1..mu_max); raises if any frequency is not real."""
    return np.array([omega(mu, q.p, q.L, q.lam) for mu in range(1, q.mu_max + 1)])


# --- vectorized enumerator ----------------------------------------------------------------

@lru_cache(maxsize=256)
def _head_patterns(n: int, M: int) -> tuple[np.ndarray, np.ndarray]:
    """All integer vectors in Z^n with l1 norm <= M (as rows) and their l1 norms."""
    if n == 0:
        mat = np.zeros((1, 0), dtype=np.int64)
        return mat, np.zeros(1, dtype=np.int64)
    blocks = []
    for c in range(-M, M + 1):
        sub, _ = _head_patterns(n - 1, M - abs(c))
        blocks.append(np.hstack([np.full((len(sub), 1), c, dtype=np.int64), sub]))
    mat = np.vstack(blocks)
    return mat, np.abs(mat).sum(axis=1)


@lru_cache(maxsize=32)
def _tail_patterns(n_tail: int):
    """Tail patterns grouped by l1 norm: lists of ((index, coef), ...)."""
    groups = {0: [()], 1: [], 2: []}
    for i in range(n_tail):
        groups[1] += [((i, 1),), ((i, -1),)]
        groups[2] += [((i, 2),), ((i, -2),)]
    for i, j in combinations(range(n_tail), 2):
        for a in (1, -1):
            for b in (1, -1):
                groups[2].append(((i, a), (j, b)))
    return groups


def _tail_values(groups, om_tail):
    out = {}
    for l1, pats in groups.items():
        vals = np.array([math.fsum(c * om_tail[i] for i, c in pat) for pat in pats], dtype=float)
        order = np.argsort(vals, kind="stable")
        out[l1] = (vals[order], [pats[k] for k in order])
    return out


def estimate_count(q: DivisorQuery) -> int:
    heads = [sum(2 ** k * math.comb(q.n_head, k) * math.comb(t - 1, k - 1) if k else (t == 0)
                 for k in range(min(q.n_head, t) + 1)) for t in range(q.M + 1)]
    nt = q.n_tail
    tails = [1, 2 * nt, 2 * nt + 2 * nt * (nt - 1)]
    total = 0
    for t, h in enumerate(heads):
        total += h * sum(tails[j] for j in range(3) if t + j <= q.M)
    return total - 1


def min_divisor(q: DivisorQuery) -> ScanResult:
    """Exhaustive minimum of |sum lam_q Omega(q)| over admissible lam."""
    if q.M > MAX_M or q.mu_max > MAX_MU:
        raise ValueError(f"query exceeds the desk budget (M <= {MAX_M}, mu_max <= {MAX_MU}); "
                         f"estimated {estimate_count(q)} vectors")
    est = estimate_count(q)
    if est > MAX_PAIRS:
        raise ValueError(f"enumeration budget overflow: about {est} vectors")
    om = omegas(q)
    nh = q.n_head
    H, h_l1 = _head_patterns(nh, q.M)
    hv = H @ om[:nh]
    tails = _tail_values(_tail_patterns(q.n_tail), om[nh:])
    best = (math.inf, None, None)
    count = 0
    for j in range(3):
        tv, tp = tails[j]
        if not len(tv):
            continue
        sel = np.nonzero(h_l1 + j <= q.M)[0]
        if not len(sel):
            continue
        if j == 0:
            sel = sel[h_l1[sel] > 0]  # exclude lam = 0
        count += len(sel) * len(tv)
        target = -hv[sel]
        pos = np.searchsorted(tv, target)
        cand = []
        for shift in (-1, 0):
            idx = np.clip(pos + shift, 0, len(tv) - 1)
            cand.append((np.abs(hv[sel] + tv[idx]), idx))
        vals = np.where(cand[0][0] <= cand[1][0], cand[0][0], cand[1][0])
        idxs = np.where(cand[0][0] <= cand[1][0], cand[0][1], cand[1][1])
        k = int(np.argmin(vals))
        if vals[k] < best[0]:
            best = (float(vals[k]), int(sel[k]), tp[int(idxs[k])])
    _, hi, pat = best
    lam = {mu + 1: int(c) for mu, c in enumerate(H[hi]) if c}
    for i, c in pat:
        lam[nh + i + 1] = lam.get(nh + i + 1, 0) + c
    exact = abs(math.fsum(c * om[mu - 1] for mu, c in lam.items()))
    l1 = sum(abs(c) for c in lam.values())
    bound = (l1 + 1) * EPS * math.fsum(abs(c) * om[mu - 1] for mu, c in lam.items())
    return ScanResult(exact, dict(sorted(lam.items())), count, float(bound))


# --- independent enumerator -----------------------------------------------------------------

def _rec_vectors(n: int, budget: int, prefix=()):
    """Recursive generation of all integer vectors of length n with l1 <= budget."""
    if len(prefix) == n:
        yield prefix
        return
    for c in range(-budget, budget + 1):
        yield from _rec_vectors(n, budget - abs(c), prefix + (c,))


def _rec_tail(n_tail: int, budget: int, start: int = 0, prefix=()):
    """Recursive generation of sparse tail vectors with l1 <= budget."""
    yield prefix
    if budget == 0:
        return
    for i in range(start, n_tail):
        for c in range(-budget, budget + 1):
            if c:
                yield from _rec_tail(n_tail, budget - abs(c), i + 1, prefix + ((i, c),))


def min_divisor_recursive(q: DivisorQuery, chunk: int = 2000) -> ScanResult:
    """Independent enumeration: recursion for heads and tails, brute-force pairing."""
    om = [omega(mu, q.p, q.L, q.lam) for mu in range(1, q.mu_max + 1)]
    nh = q.n_head
    heads = list(_rec_vectors(nh, q.M))
    h_val = np.array([math.fsum(c * om[i] for i, c in enumerate(h) if c) for h in heads])
    h_l1 = np.array([sum(abs(c) for c in h) for h in heads])
    tails = list(_rec_tail(q.n_tail, min(2, q.M)))
    t_val = np.array([math.fsum(c * om[nh + i] for i, c in t) for t in tails])
    t_l1 = np.array([sum(abs(c) for _, c in t) for t in tails])
    best = (math.inf, None, None)
    count = 0
    for a in range(0, len(heads), chunk):
        hv = h_val[a:a + chunk, None]
        ok = (h_l1[a:a + chunk, None] + t_l1[None, :]) <= q.M
        ok &= (h_l1[a:a + chunk, None] + t_l1[None, :]) > 0
        vals = np.where(ok, np.abs(hv + t_val[None, :]), np.inf)
        count += int(ok.sum())
        k = np.unravel_index(np.argmin(vals), vals.shape)
        if vals[k] < best[0]:
            best = (float(vals[k]), a + int(k[0]), int(k[1]))
    _, hi, ti = best
    lam = {i + 1: c for i, c in enumerate(heads[hi]) if c}
    for i, c in tails[ti]:
        lam[nh + i + 1] = c
    exact = abs(math.fsum(c * om[mu - 1] for mu, c in lam.items()))
    l1 = sum(abs(c) for c in lam.values())
    bound = (l1 + 1) * EPS * math.fsum(abs(c) * om[mu - 1] for mu, c in lam.items())
    return ScanResult(exact, dict(sorted(lam.items())), count, float(bound))


# --- floors and scans ---------------------------------------------------------------------------

@lru_cache(maxsize=4096)
def divisor_floor(p: int, L: float, M: int, N: int, mu_max: int | None = None) -> float:
    """Measured minimum divisor for the budget (memoized); mu_max defaults to N."""
    return min_divisor(DivisorQuery(M, N, p, L, mu_max if mu_max is not None else N)).min_divisor


@dataclass
class MeasureEstimate:
    L_grid: np.ndarray
    min_divisors: np.ndarray
    gammas: np.ndarray
    bad_fraction: np.ndarray
    gamma_fit: float
    tau_fit: float
    excluded: list = field(default_factory=list)
    fit_table: dict = field(default_factory=dict)
    witnesses: list = field(default_factory=list)


def l_grid(L0: float, grid: int) -> np.ndarray:
    """Uniform grid on (0, L0]: L0 * k / grid for k = 1..grid."""
    return L0 * np.arange(1, grid + 1) / grid


def scan_L(p: int, L0: float, grid: int, q_template: DivisorQuery, gammas=None,
           fit_Ns=(4, 8, 16, 32), fail_level: float = 0.05, fit: bool = True) -> MeasureEstimate:
    """Minimum divisor over a uniform L grid, failure fractions and a (gamma, tau) fit.

    ``bad_fraction[i]`` is the fraction of grid points with
    ``min_divisor < gammas[i] / N^tau_fit``.  The fit regresses
    ``log f(N)`` on ``log N``, where ``f(N)`` is the ``fail_level`` quantile of
    the minimum divisor on the grid (the largest floor whose failure fraction
    stays at the configured level): ``f(N) ~ gamma_fit / N^tau_fit``.
    """
    if grid < 100:
        raise ValueError("grid must have at least 100 points")
    Ls = l_grid(L0, grid)
    mins, wit, excluded = [], [], []
    keep = []
    for L in Ls:
        q = replace(q_template, p=p, L=float(L))
        try:
            r = min_divisor(q)
        except ValueError as exc:
            if "not real" in str(exc):
                excluded.append(float(L))
                continue
            raise
        keep.append(L)
        mins.append(r.min_divisor)
        wit.append(r.argmin_lambda)
    Ls = np.array(keep)
    mins = np.array(mins)
    table = {}
    gamma_fit, tau_fit = float("nan"), 0.0
    if fit and len(Ls):
        qs = []
        for N in fit_Ns:
            vals = []
            for L in Ls:
                q = replace(q_template, p=p, L=float(L), N=N, mu_max=max(q_template.mu_max, N))
                vals.append(min_divisor(q).min_divisor)
            f = float(np.quantile(vals, fail_level))
            table[N] = f
            qs.append(f)
        if all(v > 0 for v in qs):
            slope, icpt = np.polyfit(np.log(fit_Ns), np.log(qs), 1)
            tau_fit, gamma_fit = float(-slope), float(np.exp(icpt))
    if gammas is None:
        gammas = np.logspace(-12, 0, 25)
    gammas = np.asarray(gammas, dtype=float)
    floors = gammas / q_template.N ** tau_fit
    bad = np.array([float(np.mean(mins < f)) if len(mins) else 0.0 for f in floors])
    return MeasureEstimate(Ls, mins, gammas, bad, gamma_fit, tau_fit, excluded, table, wit)
