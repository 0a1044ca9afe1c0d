"""Delayed branching process: generation sizes, martingale limit W, limit law of R_a.

Generation 1 has law f (the degree law), later generations use the
offspring law g.  W_n = Z_n / (mu nu^{n-1}).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .degree_model import (SUM_DIRECT, DegreeLaw, DivergentMomentError, MomentSummary,
                           OffspringLaw, _power_series)

DEFAULT_CAP = 10**8


def law_mean(f: DegreeLaw) -> float:
    try:
        return f.moments().mu
    except DivergentMomentError:
        raise
    except (ZeroDivisionError, ValueError):
        p = f._pmf_table()
        return float(np.arange(p.size) @ p)


def default_depth(nu: float) -> int:
    """Generations needed for nu^n >= 1e6."""
    return max(1, math.ceil(math.log(1e6) / math.log(nu)))


@dataclass
class BPTrace:
    Z: list[int]
    extinct: bool
    capped: bool


def simulate_delayed_bp(f: DegreeLaw, g: OffspringLaw, n_gen: int, cap: int, rng) -> BPTrace:
    """Z_0 = 1, Z_1 ~ f, Z_{k+1} = sum of Z_k independent g-draws.

    Stops early once the cumulative population would exceed ``cap``.
    """
    if n_gen < 1 or cap <= 0:
        raise ValueError("need n_gen >= 1 and cap > 0")
    Z = [1, int(f.sample(rng, 1)[0])]
    total = 1 + Z[1]
    capped = False
    while len(Z) <= n_gen and Z[-1] > 0:
        nxt = g.sample_sum(rng, Z[-1])
        if total + nxt > cap:
            capped = True
            break
        total += nxt
        Z.append(nxt)
    Z = Z[: n_gen + 1]
    extinct = Z[-1] == 0
    if extinct:
        Z += [0] * (n_gen + 1 - len(Z))
    return BPTrace(Z, extinct, capped)


@dataclass
class WEstimate:
    samples: np.ndarray
    n_gen: int
    atom_frequency: float
    n_capped: int
    path: np.ndarray | None = None  # column k-1 holds W_k

    def to_csv(self, path) -> None:
        w = 1.0 / self.samples.size
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["value", "weight"])
            for x in self.samples:
                out.writerow([repr(float(x)), repr(w)])


def _normalize(Z, depth, mu, nu):
    out = np.zeros(Z.size)
    live = Z > 0
    out[live] = Z[live] / (mu * np.power(nu, depth[live] - 1.0))
    return out


def sample_W(f: DegreeLaw, g: OffspringLaw, n_gen: int | None, n_samples: int, rng,
             cap: int = DEFAULT_CAP, keep_path: bool = False) -> WEstimate:
    """Independent samples of W_n = Z_n / (mu nu^{n-1}).

    All samples advance one generation at a time; small generations are
    drawn term by term from one pooled batch, large ones through
    ``OffspringLaw.sample_sum``.  A sample whose cumulative size would pass
    ``cap`` keeps its last generation and is normalized at that depth.
    With ``keep_path`` the estimate also holds W_1..W_n for every sample.
    """
    nu = g.mean
    if not nu > 1:
        raise ValueError(f"offspring law is not supercritical (nu = {nu})")
    n = default_depth(nu) if n_gen is None else int(n_gen)
    if n < 1 or n_samples < 1:
        raise ValueError("need n_gen >= 1 and n_samples >= 1")
    mu = law_mean(f)
    Z = f.sample(rng, n_samples).astype(np.int64)
    total = 1 + Z
    depth = np.ones(n_samples, dtype=np.int64)
    capped = np.zeros(n_samples, dtype=bool)
    path = np.zeros((n_samples, n)) if keep_path else None
    if keep_path:
        path[:, 0] = _normalize(Z, depth, mu, nu)
    for k in range(2, n + 1):
        live = (Z > 0) & ~capped
        if not live.any():
            if keep_path:
                path[:, k - 1:] = path[:, [k - 2]]
            break
        nxt = np.zeros(n_samples, dtype=np.int64)
        small = np.flatnonzero(live & (Z <= SUM_DIRECT))
        if small.size:
            counts = Z[small]
            draws = g.sample(rng, int(counts.sum()))
            starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
            nxt[small] = np.add.reduceat(draws, starts)
        for i in np.flatnonzero(live & (Z > SUM_DIRECT)):
            nxt[i] = g.sample_sum(rng, int(Z[i]))
        over = live & (total + nxt > cap)
        capped |= over
        adv = live & ~over
        Z[adv] = nxt[adv]
        total[adv] += nxt[adv]
        depth[adv] += 1
        if keep_path:
            path[:, k - 1] = _normalize(Z, depth, mu, nu)
    W = _normalize(Z, depth, mu, nu)
    return WEstimate(W, n, float((Z == 0).mean()), int(capped.sum()), path)


def extinction_probability(f: DegreeLaw, g: OffspringLaw, tol: float = 1e-12,
                           max_iter: int = 10**6) -> tuple[float, float]:
    """(q, s*): s* is the smallest fixed point of the g generating function,
    q = 1 - sum_j f_j s*^j is the survival probability of the delayed process."""
    s = g.fixed_point_extinction(tol=tol, max_iter=max_iter)
    if s == 0.0:
        ext = float(f.pmf(0))
    else:
        ext = float(_power_series(f._pmf_table(), s))
    return 1.0 - ext, s


@dataclass
class LimitLawResult:
    a: float
    k: np.ndarray
    survival: np.ndarray
    kappa: float
    n_pairs: int


def _products(w_pairs) -> np.ndarray:
    if isinstance(w_pairs, tuple) and len(w_pairs) == 2:
        w1, w2 = (np.asarray(x, dtype=float) for x in w_pairs)
    else:
        arr = np.asarray(w_pairs, dtype=float).reshape(-1, 2)
        w1, w2 = arr[:, 0], arr[:, 1]
    if w1.shape != w2.shape:
        raise ValueError("the two W sample sets must have equal size")
    if w1.size == 0:
        raise ValueError("empty W sample set")
    return w1 * w2


def _kappa(moments: MomentSummary) -> float:
    if not moments.supercritical:
        raise ValueError("limit law needs nu > 1")
    return moments.kappa


def _mean_exp(a: float, ks, prod: np.ndarray, moments: MomentSummary) -> np.ndarray:
    kap = _kappa(moments)
    out = np.empty(len(ks))
    for i, k in enumerate(ks):
        out[i] = np.mean(np.exp(-kap * moments.nu ** (a + k) * prod))
    return out


def eval_limit_law(a: float, k_range, w_pairs, moments: MomentSummary) -> LimitLawResult:
    """P(R_a > k) = E[exp(-kappa nu^{a+k} W1 W2) | W1 W2 > 0] over k_range.

    The value depends on (a, k) only through a + k, so any real a is
    accepted; centering constants lie in (-1, 0].
    """
    prod = _products(w_pairs)
    prod = prod[prod > 0]
    if prod.size == 0:
        raise ValueError("no pair with W1 W2 > 0")
    ks = np.asarray(list(k_range), dtype=np.int64)
    return LimitLawResult(float(a), ks, _mean_exp(a, ks, prod, moments), _kappa(moments), prod.size)


def unconditional_survival(a: float, k: int, w_pairs, moments: MomentSummary) -> float:
    """E[exp(-kappa nu^{a+k} W1 W2)]; pairs with W1 W2 = 0 contribute 1."""
    return float(_mean_exp(a, [k], _products(w_pairs), moments)[0])


@dataclass
class ExpectedR:
    value: float
    truncation_bound: float
    window: int

    def __float__(self) -> float:
        return self.value


def expected_R(a: float, w_pairs, moments: MomentSummary, window: int = 60,
               tail_tol: float = 1e-6) -> ExpectedR:
    """E[R_a] = sum_{k>=0} P(R_a>k) - sum_{k<0} (1 - P(R_a>k)), k in [-window, window).

    The reported bound covers both omitted tails: for k >= window each
    pair contributes at most e^{-x}/(1 - e^{-x(nu-1)}) with x = kappa
    nu^{a+window} W1 W2, and for k < -window at most kappa W1 W2
    nu^{a-window}/(nu-1), using 1 - e^{-y} <= y.
    """
    prod = _products(w_pairs)
    prod = prod[prod > 0]
    if prod.size == 0:
        raise ValueError("no pair with W1 W2 > 0")
    nu, kap = moments.nu, _kappa(moments)
    ks = np.arange(-window, window)
    surv = _mean_exp(a, ks, prod, moments)
    hi = float(surv[-1])
    lo = float(1.0 - surv[0])
    if hi >= tail_tol or lo >= tail_tol:
        raise ValueError(f"window {window} too small: P(R>{window - 1}) = {hi:.3g}, "
                         f"P(R<={-window}) = {lo:.3g}, need both < {tail_tol}")
    value = math.fsum(surv[ks >= 0]) - math.fsum(1.0 - surv[ks < 0])
    x = kap * nu ** (a + window) * prod
    upper = float(np.mean(np.exp(-x) / -np.expm1(-x * (nu - 1))))
    lower = float(kap * np.mean(prod) * nu ** (a - window) / (nu - 1))
    return ExpectedR(value, upper + lower, window)


# --- discretized law of W (experimental) -----------------------------------

@dataclass
class DiscreteWLaw:
    """Masses on the grid 0, h, 2h, ... plus a lump for mass beyond the grid.

    The lump's position is set so the overall mean is 1.
    """

    step: float
    probs: np.ndarray
    tail_mass: float
    tail_mean: float
    iterations: int
    converged: bool

    @property
    def grid(self) -> np.ndarray:
        return self.step * np.arange(self.probs.size)

    def mean(self) -> float:
        return float(self.grid @ self.probs) + self.tail_mass * self.tail_mean

    def total_mass(self) -> float:
        return float(self.probs.sum()) + self.tail_mass

    def cdf(self, x) -> np.ndarray:
        """P(W <= x); the lump sits beyond the last grid point."""
        c = np.cumsum(self.probs)
        idx = np.floor(np.asarray(x, dtype=float) / self.step + 1e-9).astype(np.int64)
        return np.where(idx < 0, 0.0, c[np.clip(idx, 0, c.size - 1)])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["value", "probability"])
            for x, p in zip(self.grid, self.probs):
                if p > 0:
                    out.writerow([repr(float(x)), repr(float(p))])
            if self.tail_mass > 0:
                out.writerow([repr(self.tail_mean), repr(self.tail_mass)])


def _rescale(p: np.ndarray, factor: float, M: int) -> np.ndarray:
    """Law of X * factor for X with masses p on 0..len(p)-1 (grid units).

    Each mass is split linearly between its two neighbouring grid points,
    which keeps the mean.  Mass landing at or beyond M-1 is dropped; the
    caller accounts for it.
    """
    pos = np.arange(p.size) * factor
    lo = np.floor(pos).astype(np.int64)
    frac = pos - lo
    keep = lo < M - 1
    out = np.bincount(lo[keep], weights=p[keep] * (1 - frac[keep]), minlength=M)
    out[1:] += np.bincount(lo[keep], weights=p[keep] * frac[keep], minlength=M)[: M - 1]
    return out[:M]


def _eval_pgf(coeffs: np.ndarray, z: np.ndarray, tol: float = 1e-17) -> np.ndarray:
    """sum_j c_j z^j with a per-point degree cut where |z|^j < tol (Horner)."""
    r = np.abs(z)
    with np.errstate(divide="ignore"):
        deg = np.where(r > 0, np.ceil(np.log(tol) / np.log(np.maximum(r, 1e-300))), 0)
    deg = np.minimum(np.where(r >= 1, coeffs.size - 1, deg), coeffs.size - 1).astype(np.int64)
    order = np.argsort(-deg, kind="stable")
    zs = z[order]
    ds = deg[order]
    acc = np.zeros(z.size, dtype=complex)
    # number of points whose degree is >= j, for j = max..0
    top = int(ds[0]) if ds.size else 0
    counts = np.searchsorted(-ds, -np.arange(top + 1), side="right")
    for j in range(top, -1, -1):
        n = counts[j]
        acc[:n] = acc[:n] * zs[:n] + coeffs[j]
    out = np.empty_like(acc)
    out[order] = acc
    return out


def _compound(p: np.ndarray, coeffs: np.ndarray, out_len: int, theta_m: float = 25.0) -> np.ndarray:
    """Masses of X_1 + ... + X_K on 0..out_len-1, K with pmf ``coeffs``.

    Uses an exponentially tilted FFT: if P(z) is the generating function of
    X then that of the compound is G(P(z)), evaluated at z = e^{-theta} w^k.
    The tilt suppresses wrap-around from mass beyond the FFT length.
    """
    n_fft = 1 << int(math.ceil(math.log2(2 * max(out_len, p.size))))
    theta = theta_m / n_fft
    m = np.arange(n_fft)
    x = np.zeros(n_fft)
    x[: p.size] = p
    phi = np.fft.fft(x * np.exp(-theta * m))
    comp = _eval_pgf(coeffs, phi)
    y = np.fft.ifft(comp).real[:out_len] * np.exp(theta * m[:out_len])
    return np.clip(y, 0.0, None)


def _with_lump(p: np.ndarray, lump_mass: float, lump_pos: float, reach: float) -> np.ndarray:
    """Grid masses plus the lump split onto its two neighbours, if it can matter."""
    if lump_mass <= 0 or lump_pos >= reach:
        return p
    lo = int(lump_pos)
    out = np.zeros(max(p.size, lo + 2))
    out[: p.size] = p
    out[lo] += lump_mass * (lo + 1 - lump_pos)
    out[lo + 1] += lump_mass * (lump_pos - lo)
    return out


def _close(p: np.ndarray, step: float) -> tuple[float, float]:
    """Lump (mass, position in grid units) that restores total mass 1 and mean 1."""
    mass = max(0.0, 1.0 - float(p.sum()))
    head = float(np.arange(p.size) @ p)
    if mass <= 1e-300:
        return 0.0, 0.0
    return mass, max(0.0, 1.0 / step - head) / mass


def _iterate(p, lump, coeffs, factor, M, step):
    """One compound-and-rescale step: law of factor * (X_1 + ... + X_K)."""
    reach = (M + 1) / factor  # sums at or beyond this never return to the grid
    src = _with_lump(p, lump[0], lump[1], reach)
    s = _compound(src, coeffs, int(math.ceil(reach)) + 2)
    new = _rescale(s, factor, M)
    return new, _close(new, step)


def w_law_fixed_point(g: OffspringLaw, grid: tuple[int, float] = (16384, 1 / 256),
                      iters: int = 200, tol: float = 1e-9, damping: float = 0.0) -> DiscreteWLaw:
    """Discretized law of W' = lim Z'_n / nu^n for a process started by one g-individual.

    Iterates W'_{n+1} = (1/nu) sum_{i <= X} W'_i from W'_0 = 1 on the grid
    ``grid = (size, step)``; the step must divide 1.  Mass pushed past the
    grid is kept as one lump placed so that the mean stays exactly 1, and
    the lump takes part in later sums.  Stops after ``iters`` steps (with no
    damping this is the law of W'_iters) or once successive CDFs differ by
    less than ``tol``.  The single-point lump can settle into a 2-cycle;
    ``damping`` in (0, 1) mixes in that share of the previous iterate, which
    keeps the fixed points and removes the cycle.  Experimental.
    """
    M, h = int(grid[0]), float(grid[1])
    nu = g.mean
    if not nu > 1:
        raise ValueError("offspring law is not supercritical")
    one = round(1 / h)
    if abs(one * h - 1) > 1e-12 or one >= M - 1:
        raise ValueError("grid step must divide 1 and the grid must extend past 1")
    p = np.zeros(M)
    p[one] = 1.0
    lump = (0.0, 0.0)
    converged = False
    it = 0
    for it in range(1, iters + 1):
        new, lump = _iterate(p, lump, g.head, 1.0 / nu, M, h)
        if damping:
            new = (1 - damping) * new + damping * p
            lump = _close(new, h)
        diff = float(np.max(np.abs(np.cumsum(new) - np.cumsum(p))))
        p = new
        if diff < tol:
            converged = True
            break
    return DiscreteWLaw(h, p, lump[0], lump[1] * h, it, converged)


def delayed_w_law(f: DegreeLaw, w_prime: DiscreteWLaw) -> DiscreteWLaw:
    """Law of W = (1/mu) sum_{i <= D} W'_i with D ~ f, on the grid of ``w_prime``."""
    mu = law_mean(f)
    M, h = w_prime.probs.size, w_prime.step
    lump = (w_prime.tail_mass, w_prime.tail_mean / h)
    p, lump = _iterate(w_prime.probs, lump, f._pmf_table(), 1.0 / mu, M, h)
    return DiscreteWLaw(h, p, lump[0], lump[1] * h, w_prime.iterations, w_prime.converged)
