"""Degree laws, their moments, and the size-biased offspring law.

Every law exposes its pmf, survival function, exact sampler and a
truncation point beyond which the remaining probability mass is certified
to be below a tolerance.  Infinite-support laws are never materialised
in full.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

TAIL_TOL = 1e-10
SUM_DIRECT = 4096  # below this many terms, sums are drawn term by term

# B_2, B_4, ..., B_20
_BERNOULLI = (
    1 / 6, -1 / 30, 1 / 42, -1 / 30, 5 / 66, -691 / 2730, 7 / 6,
    -3617 / 510, 43867 / 798, -174611 / 330,
)


class DivergentMomentError(ValueError):
    """Raised when nu (the second factorial moment) is infinite."""


def zeta(s: float, n_terms: int = 20) -> float:
    """Riemann zeta for real s > 1 by Euler-Maclaurin summation.

    With 20 explicit terms and ten Bernoulli corrections the remainder is
    far below 1e-12 for every s > 1.
    """
    if not s > 1:
        raise ValueError(f"zeta needs s > 1, got {s}")
    n = n_terms
    total = math.fsum(k ** -s for k in range(1, n))
    total += n ** (1 - s) / (s - 1) + 0.5 * n ** -s
    rising = s  # s (s+1) ... (s+2k-2)
    fact = 2.0  # (2k)!
    for k, b in enumerate(_BERNOULLI, start=1):
        total += b / fact * rising * n ** (-s - 2 * k + 1)
        rising *= (s + 2 * k - 1) * (s + 2 * k)
        fact *= (2 * k + 1) * (2 * k + 2)
    return total


@dataclass(frozen=True)
class MomentSummary:
    mu: float
    nu: float
    kappa: float | None
    supercritical: bool


class DegreeLaw:
    """Base class; subclasses implement the pmf/sf/sampler for one family."""

    name = "abstract"

    def pmf(self, j):
        raise NotImplementedError

    def sf(self, k: int) -> float:
        """P(D > k)."""
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def truncation(self, tol: float = TAIL_TOL) -> int:
        """Smallest K with P(D > K) <= tol."""
        raise NotImplementedError

    def moments(self) -> MomentSummary:
        raise NotImplementedError

    def params(self) -> dict[str, str]:
        raise NotImplementedError

    # size-biased draws: P(D* = k) = k f_k / mu
    def sample_size_biased(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return _table_sample(rng, self._size_biased_table(), size)

    def sample_size_biased_above(self, rng: np.random.Generator, size: int, k: int) -> np.ndarray:
        """Size-biased draws conditioned on D* > k (rejection; fine when that event is not rare)."""
        out = np.empty(size, dtype=np.int64)
        filled = tries = 0
        while filled < size:
            x = self.sample_size_biased(rng, 4096)
            x = x[x > k][: size - filled]
            out[filled:filled + x.size] = x
            filled += x.size
            tries += 1
            if tries > 10**4 and filled == 0:
                raise RuntimeError(f"conditioning on D* > {k} is too rare for rejection")
        return out

    def _size_biased_table(self) -> np.ndarray:
        K = self.truncation(1e-16)
        k = np.arange(K + 1)
        w = k * self.pmf(k)
        return w / w.sum()

    def _pmf_table(self) -> np.ndarray:
        K = self.truncation(1e-16)
        p = self.pmf(np.arange(K + 1))
        return p / p.sum()

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"


def _table_sample(rng, probs: np.ndarray, size: int) -> np.ndarray:
    cdf = np.cumsum(probs)
    cdf /= cdf[-1]
    idx = np.searchsorted(cdf, rng.random(size), side="right")
    return np.minimum(idx, len(probs) - 1).astype(np.int64)


def _open_uniform(rng, size: int) -> np.ndarray:
    u = rng.random(size)
    while True:
        bad = u == 0.0
        if not bad.any():
            return u
        u[bad] = rng.random(int(bad.sum()))


@dataclass(frozen=True, repr=False)
class ParetoCeil(DegreeLaw):
    """D = ceil(U^{-1/(tau-1)}): P(D > k) = k^{1-tau} for integers k >= 1."""

    tau: float
    name = "pareto_ceil"

    def __post_init__(self):
        if not self.tau > 2:
            raise ValueError(f"ParetoCeil needs tau > 2, got {self.tau}")

    def sf(self, k):
        k = np.asarray(k, dtype=float)
        out = np.where(k >= 1, np.maximum(k, 1.0) ** (1 - self.tau), 1.0)
        return out if out.ndim else float(out)

    def pmf(self, j):
        j = np.asarray(j, dtype=float)
        jm = np.maximum(j - 1, 1.0)
        out = np.where(j >= 2, jm ** (1 - self.tau) - np.maximum(j, 1.0) ** (1 - self.tau), 0.0)
        return out if out.ndim else float(out)

    def from_uniform(self, u):
        """Inverse transform: ceil(u^{-1/(tau-1)})."""
        return np.ceil(np.asarray(u, dtype=float) ** (-1.0 / (self.tau - 1))).astype(np.int64)

    def sample(self, rng, size):
        return self.from_uniform(_open_uniform(rng, size))

    def sample_size_biased(self, rng, size):
        return self.sample_size_biased_above(rng, size, 0)

    def sample_size_biased_above(self, rng, size, k):
        # Propose Y with density prop. to y^{1-tau} on [max(k,1), inf), accept with
        # prob ceil(Y) / (2Y); then ceil(Y) has law j f_j / mu restricted to j > k.
        lo = float(max(k, 1))
        out = np.empty(size, dtype=np.int64)
        filled = 0
        while filled < size:
            m = int(1.6 * (size - filled)) + 16
            y = lo * _open_uniform(rng, m) ** (-1.0 / (self.tau - 2))
            c = np.ceil(y)
            acc = (rng.random(m) * 2.0 * y < c) & (c > k)
            got = c[acc][: size - filled].astype(np.int64)
            out[filled:filled + got.size] = got
            filled += got.size
        return out

    def truncation(self, tol=TAIL_TOL):
        return max(1, math.ceil(tol ** (-1.0 / (self.tau - 1))))

    def moments(self):
        if self.tau <= 3:
            raise DivergentMomentError(f"nu diverges for ParetoCeil with tau={self.tau} <= 3")
        mu = 1.0 + zeta(self.tau - 1)
        nu = 2.0 * zeta(self.tau - 2) / mu
        return _summary(mu, nu)

    def params(self):
        return {"tau": repr(float(self.tau))}


@dataclass(frozen=True, repr=False)
class Regular(DegreeLaw):
    r: int
    name = "regular"

    def __post_init__(self):
        if int(self.r) != self.r or self.r < 1:
            raise ValueError(f"Regular needs an integer r >= 1, got {self.r}")

    def pmf(self, j):
        out = (np.asarray(j) == self.r).astype(float)
        return out if out.ndim else float(out)

    def sf(self, k):
        return 1.0 if k < self.r else 0.0

    def sample(self, rng, size):
        return np.full(size, self.r, dtype=np.int64)

    def sample_size_biased(self, rng, size):
        return self.sample(rng, size)

    def truncation(self, tol=TAIL_TOL):
        return self.r

    def moments(self):
        return _summary(float(self.r), float(self.r - 1))

    def params(self):
        return {"r": str(self.r)}


@dataclass(frozen=True, repr=False)
class GeometricSizeBiased(DegreeLaw):
    """Law whose size-biased offspring is geometric: g_j = p (1-p)^{j-1}, j >= 1.

    f_j = p (1-p)^{j-2} / (j c_p) on j >= 2, with c_p found by summation.
    """

    p: float
    c_p: float = field(init=False)
    name = "geometric_size_biased"

    def __post_init__(self):
        if not 0.5 < self.p < 1:
            raise ValueError(f"GeometricSizeBiased needs p in (1/2, 1), got {self.p}")
        K = self.truncation(1e-18)
        j = np.arange(2, K + 1, dtype=float)
        object.__setattr__(self, "c_p", math.fsum(self.p * (1 - self.p) ** (j - 2) / j))

    def pmf(self, j):
        j = np.asarray(j, dtype=float)
        jj = np.maximum(j, 2.0)
        out = np.where(j >= 2, self.p * (1 - self.p) ** (jj - 2) / (jj * self.c_p), 0.0)
        return out if out.ndim else float(out)

    def sf(self, k):
        K = self.truncation(1e-18)
        if k >= K:
            return 0.0
        return float(self.pmf(np.arange(max(k + 1, 0), K + 1)).sum())

    def sample(self, rng, size):
        return _table_sample(rng, self._pmf_table(), size)

    def sample_size_biased(self, rng, size):
        return rng.geometric(self.p, size).astype(np.int64) + 1

    def sample_size_biased_above(self, rng, size, k):
        # memoryless: D* - 1 is geometric on {1, 2, ...}
        if k < 1:
            return self.sample_size_biased(rng, size)
        return rng.geometric(self.p, size).astype(np.int64) + k

    def truncation(self, tol=TAIL_TOL):
        # P(D > K) <= (1-p)^{K-1} / ((K+1) c_p) and c_p >= p/2 > 1/4
        return max(2, math.ceil(math.log(tol / 4) / math.log(1 - self.p)) + 1)

    def moments(self):
        return _summary(1.0 / self.c_p, 1.0 / self.p)

    def params(self):
        return {"p": repr(float(self.p))}


@dataclass(frozen=True, repr=False)
class PowerLawExpCutoff(DegreeLaw):
    """f_k = C k^{-gamma} exp(-k / kappa_cut), k >= 1."""

    gamma: float
    kappa_cut: float
    C: float = field(init=False)
    name = "power_law_exp_cutoff"

    def __post_init__(self):
        if not self.kappa_cut > 0:
            raise ValueError(f"kappa_cut must be positive, got {self.kappa_cut}")
        K = self._cut(1e-18)
        k = np.arange(1, K + 1, dtype=float)
        object.__setattr__(self, "C", 1.0 / math.fsum(k ** -self.gamma * np.exp(-k / self.kappa_cut)))

    def _cut(self, tol):
        # terms k^2 f_k decay at least like exp(-k/kappa) once k > 2 kappa |2 - gamma|
        start = max(1, math.ceil(2 * self.kappa_cut * max(abs(2 - self.gamma), 1.0)))
        return start + math.ceil(self.kappa_cut * (-math.log(tol) + 2 * math.log(start + 1) + 5))

    def pmf(self, j):
        j = np.asarray(j, dtype=float)
        jj = np.maximum(j, 1.0)
        out = np.where(j >= 1, self.C * jj ** -self.gamma * np.exp(-jj / self.kappa_cut), 0.0)
        return out if out.ndim else float(out)

    def sf(self, k):
        K = self._cut(1e-18)
        if k >= K:
            return 0.0
        return float(self.pmf(np.arange(max(k + 1, 1), K + 1)).sum())

    def sample(self, rng, size):
        return _table_sample(rng, self._pmf_table(), size)

    def truncation(self, tol=TAIL_TOL):
        return self._cut(tol)

    def moments(self):
        K = self._cut(1e-18)
        k = np.arange(K + 1, dtype=float)
        f = self.pmf(k)
        mu = math.fsum(k * f)
        return _summary(mu, math.fsum(k * (k - 1) * f) / mu)

    def params(self):
        return {"gamma": repr(float(self.gamma)), "kappa_cut": repr(float(self.kappa_cut))}


@dataclass(frozen=True, repr=False)
class Empirical(DegreeLaw):
    """Finite-support law given by probabilities f_0, f_1, ..., f_K."""

    probs: tuple
    name = "empirical"

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or p.size == 0 or (p < 0).any():
            raise ValueError("Empirical law needs a nonempty vector of nonnegative probabilities")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"Empirical probabilities sum to {p.sum()}, not 1")
        object.__setattr__(self, "probs", tuple(float(x) for x in p))

    def pmf(self, j):
        p = np.asarray(self.probs)
        j = np.asarray(j)
        inside = (j >= 0) & (j < p.size)
        out = np.where(inside, p[np.clip(j, 0, p.size - 1)], 0.0)
        return out if out.ndim else float(out)

    def sf(self, k):
        return float(sum(self.probs[k + 1:])) if k >= -1 else 1.0

    def sample(self, rng, size):
        return _table_sample(rng, np.asarray(self.probs), size)

    def truncation(self, tol=TAIL_TOL):
        return len(self.probs) - 1

    def _size_biased_table(self):
        k = np.arange(len(self.probs))
        w = k * np.asarray(self.probs)
        return w / w.sum()

    def moments(self):
        k = np.arange(len(self.probs), dtype=float)
        f = np.asarray(self.probs)
        mu = math.fsum(k * f)
        if mu <= 0:
            raise ValueError("degree law has zero mean")
        return _summary(mu, math.fsum(k * (k - 1) * f) / mu)

    def params(self):
        return {"probs": ",".join(repr(x) for x in self.probs)}


def _summary(mu: float, nu: float) -> MomentSummary:
    sup = nu > 1
    return MomentSummary(mu=mu, nu=nu, kappa=mu / (nu - 1) if sup else None, supercritical=sup)


class OffspringLaw:
    """Law of X with P(X = j) = g_j.

    ``head`` holds g_0..g_K explicitly; ``tail_mass`` bounds P(X > K).
    When the law comes from a degree law, sampling is exact (it draws a
    size-biased degree and subtracts one) even beyond the stored head.
    """

    def __init__(self, head, tail_mass: float = 0.0, mean: float | None = None,
                 parent: DegreeLaw | None = None):
        self.head = np.asarray(head, dtype=float)
        self.tail_mass = float(tail_mass)
        self.parent = parent
        if mean is None:
            if tail_mass > 1e-12:
                raise ValueError("mean must be given for a law with a truncated tail")
            mean = math.fsum(np.arange(self.head.size) * self.head)
        self.mean = float(mean)
        self._mn = None

    @classmethod
    def from_probs(cls, probs) -> "OffspringLaw":
        p = np.asarray(probs, dtype=float)
        if (p < 0).any() or abs(p.sum() - 1) > 1e-12:
            raise ValueError("offspring probabilities must be nonnegative and sum to 1")
        return cls(p)

    @property
    def truncation(self) -> int:
        return self.head.size - 1

    def pmf(self, j: int) -> float:
        if 0 <= j < self.head.size:
            return float(self.head[j])
        if self.parent is not None and j >= 0:
            mu = self.parent.moments().mu
            return float((j + 1) * self.parent.pmf(j + 1) / mu)
        return 0.0

    def sample(self, rng, size: int) -> np.ndarray:
        if self.parent is not None:
            return self.parent.sample_size_biased(rng, size) - 1
        return _table_sample(rng, self.head, size)

    def sample_sum(self, rng, n: int) -> int:
        """Exact draw of X_1 + ... + X_n.

        Large n uses a multinomial count over the stored head plus
        conditional draws for the (rare) values beyond it.
        """
        if n <= SUM_DIRECT:
            return int(self.sample(rng, n).sum()) if n > 0 else 0
        if self._mn is None:
            tot = self.head.sum() + self.tail_mass
            self._mn = np.append(self.head / tot, self.tail_mass / tot)
            self._vals = np.arange(self.head.size, dtype=np.int64)
        counts = rng.multinomial(n, self._mn)
        total = int(counts[:-1] @ self._vals)
        t = int(counts[-1])
        if t:
            if self.parent is None:
                raise RuntimeError("tail draw requested from a law without a sampler")
            total += int((self.parent.sample_size_biased_above(rng, t, self.head.size) - 1).sum())
        return total

    def pgf(self, z):
        """sum_j g_j z^j over the stored head (error <= tail_mass for |z| <= 1)."""
        return _power_series(self.head, z)

    def fixed_point_extinction(self, tol: float = 1e-12, max_iter: int = 10**6) -> float:
        """Smallest root of pgf(s) = s in [0, 1].

        Newton from s = 0: pgf(s) - s is convex, so the iterates increase
        monotonically to the smallest root, also when the law is close to
        critical and plain iteration s <- pgf(s) contracts very slowly.
        """
        d = np.arange(1, self.head.size) * self.head[1:]
        s = 0.0
        for _ in range(max_iter):
            h = float(self.pgf(s)) - s
            if abs(h) < tol:
                return s
            slope = 1.0 - float(_power_series(d, s)) if d.size else 1.0
            if slope <= 0:  # at or past the root of a critical law
                return s
            nxt = min(s + h / slope, 1.0)
            if nxt <= s:
                return s
            s = nxt
        raise RuntimeError(f"extinction iteration did not converge in {max_iter} steps")


def _power_series(coeffs: np.ndarray, z, tol: float = 1e-16):
    """Evaluate sum_j c_j z^j, dropping points once |z|^j is negligible."""
    z = np.asarray(z, dtype=complex if np.iscomplexobj(z) else float)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    out = np.zeros_like(z)
    power = np.ones_like(z)
    active = np.arange(z.size)
    for j, c in enumerate(coeffs):
        if c:
            out[active] += c * power
        power = power * z[active]
        if j % 64 == 63:
            keep = np.abs(power) > tol
            if not keep.all():
                active = active[keep]
                power = power[keep]
                if active.size == 0:
                    break
    return out[0] if scalar else out


def pmf(law: DegreeLaw, j: int) -> float:
    if j < 0:
        raise ValueError("pmf index must be nonnegative")
    return float(law.pmf(j))


def sample_degree(law: DegreeLaw, rng) -> int:
    return int(law.sample(rng, 1)[0])


def moments(law: DegreeLaw) -> MomentSummary:
    return law.moments()


def size_biased_offspring(law: DegreeLaw, max_head: int = 1 << 16) -> OffspringLaw:
    """g_j = (j+1) f_{j+1} / mu, with the head stored up to a tail of 1e-10 (or max_head)."""
    m = law.moments() if not isinstance(law, ParetoCeil) or law.tau > 3 else None
    mu = m.mu if m is not None else 1.0 + zeta(law.tau - 1)
    if not mu > 0 or not math.isfinite(mu):
        raise ValueError("size-biased law needs a finite positive mean")
    # g has a heavier tail than f (by one power), so truncate f much further out
    J = min(law.truncation(TAIL_TOL ** 2), max_head)
    j = np.arange(J + 1)
    head = (j + 1) * law.pmf(j + 1) / mu
    tail = max(0.0, 1.0 - math.fsum(head))
    mean = m.nu if m is not None else math.inf
    return OffspringLaw(head, tail_mass=tail, mean=mean, parent=law)


LAWS = {cls.name: cls for cls in (ParetoCeil, Regular, GeometricSizeBiased, PowerLawExpCutoff, Empirical)}


def law_to_config(law: DegreeLaw) -> dict[str, str]:
    return {"name": law.name, **law.params()}


def law_from_config(cfg: Mapping[str, str]) -> DegreeLaw:
    """Build a law from ``name`` plus named decimal parameters."""
    cfg = dict(cfg)
    name = cfg.pop("name", None)
    if name not in LAWS:
        raise ValueError(f"unknown degree law {name!r}; choose from {sorted(LAWS)}")
    try:
        if name == "pareto_ceil":
            return ParetoCeil(float(cfg["tau"]))
        if name == "regular":
            return Regular(int(cfg["r"]))
        if name == "geometric_size_biased":
            return GeometricSizeBiased(float(cfg["p"]))
        if name == "power_law_exp_cutoff":
            return PowerLawExpCutoff(float(cfg["gamma"]), float(cfg["kappa_cut"]))
        return Empirical(tuple(float(x) for x in cfg["probs"].split(",")))
    except KeyError as exc:
        raise ValueError(f"degree law {name!r} is missing parameter {exc.args[0]!r}") from None
