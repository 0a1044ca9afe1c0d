"""Survival curves of hopcounts, lattice centering and curve comparison."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from decimal import Decimal, localcontext

import numpy as np

from .bp import eval_limit_law
from .degree_model import MomentSummary

FINITE_ONLY = "finite-only"
UNCONDITIONAL = "unconditional"


@dataclass(frozen=True)
class CenteringInfo:
    N: int
    nu: float
    sigma_N: int
    a_N: float

    @property
    def log_nu_N(self) -> float:
        return self.sigma_N - self.a_N


def _log_nu(N: int, nu: float) -> float:
    return math.log(N) / math.log(nu)


def centering(N: int, nu: float) -> CenteringInfo:
    """sigma_N = floor(log_nu N) and a_N = sigma_N - log_nu N in (-1, 0].

    Near an integer the floor is settled by checking nu^s <= N < nu^{s+1}
    in 60-digit decimal arithmetic.
    """
    if N < 2 or not nu > 1:
        raise ValueError("need N >= 2 and nu > 1")
    x = _log_nu(N, nu)
    s = math.floor(x)
    r = round(x)
    if abs(x - r) < 1e-9:
        with localcontext() as ctx:
            ctx.prec = 60
            base = Decimal(nu)
            s = r if base ** r <= Decimal(N) else r - 1
            xd = Decimal(N).ln() / base.ln()
            a = float(Decimal(s) - xd)
    else:
        a = s - x
    if a > 0:  # only from rounding when N is an exact power
        a = 0.0
    return CenteringInfo(int(N), float(nu), int(s), a)


@dataclass
class SurvivalCurve:
    """P(H > k) for k = k[0], ..., k[-1].

    Below the stored range the survival is 1; above it, ``floor`` (0 for
    finite-only curves, the infinite fraction for unconditional ones).
    """

    k: np.ndarray
    survival: np.ndarray
    sample_count: int
    conditioning: str = FINITE_ONLY
    dropped_fraction: float = 0.0
    floor: float = 0.0

    def at(self, k) -> np.ndarray:
        k = np.asarray(k)
        idx = k - self.k[0]
        inside = (idx >= 0) & (idx < self.k.size)
        out = np.where(idx < 0, 1.0, self.floor)
        out = np.where(inside, self.survival[np.clip(idx, 0, self.k.size - 1)], out)
        return out

    @property
    def support(self) -> tuple[int, int]:
        """Range over which the curve is informative, starting where it is still 1."""
        return int(self.k[0]) - 1, int(self.k[-1])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["k", "survival", "n"])
            for k, s in zip(self.k, self.survival):
                out.writerow([int(k), repr(float(s)), self.sample_count])


def empirical_survival(hopcounts, conditioning: str = FINITE_ONLY) -> SurvivalCurve:
    """Empirical P(H > k) from integer hopcounts; infinite values are inf.

    ``finite-only`` drops infinite values and records their fraction;
    ``unconditional`` keeps them as larger than every k.
    """
    h = np.asarray(list(hopcounts), dtype=float)
    if h.size == 0:
        raise ValueError("empty sample")
    if conditioning not in (FINITE_ONLY, UNCONDITIONAL):
        raise ValueError(f"unknown conditioning {conditioning!r}")
    finite = h[np.isfinite(h)].astype(np.int64)
    dropped = 1.0 - finite.size / h.size
    if finite.size == 0:
        if conditioning == FINITE_ONLY:
            raise ValueError("all hopcounts are infinite")
        return SurvivalCurve(np.array([0]), np.array([1.0]), int(h.size), conditioning, 1.0, 1.0)
    ks = np.arange(finite.min(), finite.max() + 1)
    le = np.searchsorted(np.sort(finite), ks, side="right")
    if conditioning == FINITE_ONLY:
        surv = 1.0 - le / finite.size
        return SurvivalCurve(ks, surv, int(finite.size), conditioning, dropped, 0.0)
    surv = 1.0 - le / h.size
    return SurvivalCurve(ks, surv, int(h.size), conditioning, dropped, dropped)


def shift_distance(c1: SurvivalCurve, c2: SurvivalCurve, shift: int) -> float:
    """sup_k |c1(k) - c2(k + shift)| over the union of the two supports (c2's moved by -shift)."""
    lo1, hi1 = c1.support
    lo2, hi2 = c2.support
    lo2, hi2 = lo2 - shift, hi2 - shift
    if hi1 < lo2 or hi2 < lo1:
        raise ValueError("shifted curves do not overlap")
    ks = np.arange(min(lo1, lo2), max(hi1, hi2) + 1)
    return float(np.max(np.abs(c1.at(ks) - c2.at(ks + shift))))


def theoretical_survival_curve(center: CenteringInfo, w_pairs, moments: MomentSummary,
                               k_range) -> SurvivalCurve:
    """P(R_{a_N} > k) over k_range in centered coordinates (H - sigma_N)."""
    res = eval_limit_law(center.a_N, k_range, w_pairs, moments)
    ks = res.k
    if ks.size and np.any(np.diff(ks) != 1):
        raise ValueError("k_range must be consecutive integers")
    return SurvivalCurve(ks, res.survival, res.n_pairs, FINITE_ONLY, 0.0, 0.0)


def centered(hopcounts, center: CenteringInfo) -> list:
    """H - sigma_N, keeping infinite values."""
    return [h - center.sigma_N if math.isfinite(h) else math.inf for h in hopcounts]


def tightness_report(hopcounts, center: CenteringInfo, K_list) -> dict[int, float]:
    """Fraction of finite hopcounts with |H - log_nu N| <= K, for each K."""
    h = np.asarray(list(hopcounts), dtype=float)
    h = h[np.isfinite(h)]
    if h.size == 0:
        raise ValueError("no finite hopcounts")
    dev = np.abs(h - center.log_nu_N)
    return {int(K): float(np.mean(dev <= K)) for K in K_list}
