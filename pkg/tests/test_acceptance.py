"""Acceptance criteria, one test each; every test prints a single PASS/FAIL line."""

import json
import math
from collections import Counter

import numpy as np
import pytest

from cmhop.bp import eval_limit_law, extinction_probability, sample_W
from cmhop.cli import ExperimentConfig, execute
from cmhop.degree_model import (Empirical, GeometricSizeBiased, ParetoCeil, PowerLawExpCutoff, Regular,
                                size_biased_offspring)
from cmhop.graph import (DegreeSequence, components, hopcount, non_attachment_prob, pair_stubs,
                         sample_degree_sequence)
from cmhop.rng import stream
from cmhop.spg import bilateral_hopcount, coupling_error_rate, grow_spg
from cmhop.stats import centered, centering, empirical_survival, shift_distance, theoretical_survival_curve
from conftest import ks_stat, perfect_matchings
from test_graph import _enumerated
from test_spg import _coupled_runs, _z12_from_matching

PARETO = ParetoCeil(3.5)


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail
    return emit


def fig_run(tmp_path, mode, N, reps, seed, threads=1):
    cfg = ExperimentConfig(mode=mode, law=PARETO, N=list(N), replications=reps, seed=seed)
    return execute(cfg, tmp_path / mode, threads)


def test_c1_centering(report):
    nu = PARETO.moments().nu
    c25, c75, c125 = (centering(N, nu) for N in (25_000, 75_000, 125_000))
    ok = (c25.sigma_N == 12 and c125.sigma_N == 14 and abs(c25.a_N + 0.62) <= 0.005
          and abs(c125.a_N + 0.62) <= 0.005 and abs(c75.a_N + 0.99) <= 0.005 and abs(nu ** 2 - 5) <= 0.05)
    report(1, ok, f"sigma=({c25.sigma_N},{c75.sigma_N},{c125.sigma_N}) "
                  f"a=({c25.a_N:.4f},{c75.a_N:.4f},{c125.a_N:.4f}) nu^2={nu ** 2:.4f}")


def test_c2_figure1(tmp_path, report):
    run = fig_run(tmp_path, "fig1", (25_000, 75_000, 125_000), 1000, 1)
    d = {(r["N1"], r["N2"]): r["distance"] for r in run.results["shift_distances"]}
    main = d[(25_000, 125_000)]
    odd = (d[(25_000, 75_000)], d[(75_000, 125_000)])
    ok = main < 0.10 and all(x > 0.10 for x in odd)
    report(2, ok, f"d(25k,125k,2)={main:.4f}<0.10; d(25k,75k,2)={odd[0]:.4f}, d(75k,125k,2)={odd[1]:.4f} >0.10")


def test_c3_figure2(tmp_path, report):
    Ns = [5000 * 5 ** k for k in range(4)]
    run = fig_run(tmp_path, "fig2", Ns, 1000, 2)
    ds = [r["distance"] for r in run.results["shift_distances"]]
    ok = len(ds) == 3 and all(x < 0.10 for x in ds)
    report(3, ok, "consecutive shift-2 distances " + ", ".join(f"{x:.4f}" for x in ds) + " (<0.10)")


def test_c4_regular_closed_form(report):
    law, N = Regular(3), 10**5
    h = [bilateral_hopcount(sample_degree_sequence(law, N, stream(4, i)), 0, 1, stream(4, i, 1))
         for i in range(2000)]
    c = centering(N, 2.0)
    emp = empirical_survival(centered(h, c))
    ones = (np.ones(1), np.ones(1))
    th = theoretical_survival_curve(c, ones, law.moments(), range(-12, 12))
    ks = np.arange(-12, 12)
    closed = np.exp(-3 * 2.0 ** (c.a_N + ks))
    d = shift_distance(emp, th, 0)
    ok = d < 0.06 and np.allclose(th.survival, closed, rtol=0, atol=1e-15)
    report(4, ok, f"sup-norm {d:.4f} < 0.06")


W_LAWS = [PARETO, ParetoCeil(4.5), Regular(3), GeometricSizeBiased(0.7), PowerLawExpCutoff(2.5, 20.0),
          Empirical((0.1, 0.2, 0.3, 0.4))]


def test_c5_martingale_and_limit_law(report):
    worst = (0.0, None)
    for i, law in enumerate(W_LAWS):
        est = sample_W(law, size_biased_offspring(law), 12, 50_000, stream(5, i), keep_path=True)
        for n in range(1, 13):
            w = est.path[:, n - 1]
            se = w.std(ddof=1) / math.sqrt(w.size)
            err = abs(w.mean() - 1)
            t = err / se if se > 0 else (0.0 if err < 1e-12 else math.inf)
            if t > worst[0]:
                worst = (t, f"{law!r} n={n}")
    mart_ok = worst[0] <= 4
    g = size_biased_offspring(PARETO)
    pairs = (sample_W(PARETO, g, 10, 4000, stream(5, 100)).samples,
             sample_W(PARETO, g, 10, 4000, stream(5, 101)).samples)
    m = PARETO.moments()
    s = eval_limit_law(-0.4, range(-10, 20), pairs, m).survival
    mono = bool((np.diff(s) <= 0).all())
    sym = bool((s == eval_limit_law(-0.4, range(-10, 20), pairs[::-1], m).survival).all())
    lat = bool((s == eval_limit_law(-1.4, range(-9, 21), pairs, m).survival).all()
               and (s == eval_limit_law(0.6, range(-11, 19), pairs, m).survival).all())
    ok = mart_ok and mono and sym and lat
    report(5, ok, f"max |t| = {worst[0]:.2f} at {worst[1]} (<=4); monotone={mono} symmetric={sym} lattice={lat}")


def test_c6_giant_component(report):
    q = extinction_probability(PARETO, size_biased_offspring(PARETO))[0]
    ratio = {}
    worst = 0.0
    for j, N in enumerate((10**4, 3 * 10**4, 10**5)):
        second = []
        for s in range(50):
            r = stream(6, j, s)
            cs = components(pair_stubs(sample_degree_sequence(PARETO, N, r), r))
            second.append(cs.second_largest)
            if N == 10**5:
                worst = max(worst, abs(cs.largest_fraction - q))
        ratio[N] = float(np.mean(second)) / math.log(N)
    spread = max(ratio.values()) / min(ratio.values())
    ok = worst <= 0.03 and spread < 4
    report(6, ok, f"max |largest/N - q| = {worst:.4f} (<=0.03, q={q:.4f}); "
                  f"second/log N = {[round(v, 3) for v in ratio.values()]}, max/min = {spread:.2f} (<4)")


def test_c7_pairing_oracle(report):
    enum_ok = all(non_attachment_prob(n, m, L) == _enumerated(n, m, L)
                  for L in range(2, 11, 2) for n in range(L + 1) for m in range(L - n + 1))
    mc = []
    for n, m, L in [(3, 4, 20), (5, 5, 50)]:
        seq = DegreeSequence(np.ones(L, dtype=int))
        r = stream(7, L)
        reps = 40_000
        hits = sum(not ((p >= n) & (p < n + m)).any()
                   for p in (pair_stubs(seq, r).partner[:n] for _ in range(reps)))
        p = float(non_attachment_prob(n, m, L))
        mc.append(abs(hits - reps * p) / math.sqrt(reps * p * (1 - p)))
    sandwich_ok = True
    for L in range(2, 101, 2):
        for n in range(11):
            for m in range(11):
                if not L > 2 * n or n + m > L:
                    continue
                p = float(non_attachment_prob(n, m, L))
                lower = math.prod(1 - m / (L - 2 * i - 1) for i in range(n))
                sandwich_ok &= lower - 1e-12 <= p <= lower + n * n * m / (L - 2 * n) ** 2 + 1e-12
    ok = enum_ok and all(z <= 3 for z in mc) and sandwich_ok
    report(7, ok, f"enumeration={enum_ok}; MC z-scores {[round(z, 2) for z in mc]} (<=3); sandwich={sandwich_ok}")


def _enumeration_check(degrees, root, n, seed):
    L = sum(degrees)
    exact, total = Counter(), 0
    for match in perfect_matchings(list(range(L))):
        partner = [0] * L
        for a, b in match:
            partner[a], partner[b] = b, a
        exact[_z12_from_matching(degrees, root, partner)] += 1
        total += 1
    seq = DegreeSequence(np.asarray(degrees))
    r = stream(8, seed)
    seen = Counter(tuple(grow_spg(seq, root, 2, r).Z[:2]) for _ in range(n))
    if not set(seen) <= set(exact):
        return math.inf
    return max(abs(seen[k] - n * c / total) / math.sqrt(n * (c / total) * (1 - c / total))
               for k, c in exact.items())


def test_c8_coupling_validity(report):
    bil, full = [], []
    for i in range(10**4):
        seq = sample_degree_sequence(PARETO, 1000, stream(8, i, 0))
        bil.append(bilateral_hopcount(seq, 0, 1, stream(8, i, 1)))
        full.append(hopcount(pair_stubs(seq, stream(8, i, 2)), 0, 1))
    big = 10**6
    ks = ks_stat(np.where(np.isinf(bil), big, bil), np.where(np.isinf(full), big, full))
    z = max(_enumeration_check(d, root, 2 * 10**5, j) for j, (d, root) in enumerate(
        [([2, 3, 1, 2, 2], 0), ([3, 1, 2, 2, 1, 1], 0), ([1, 2, 2, 3], 2), ([2, 2, 2, 2, 2, 2], 5)]))
    rates = [coupling_error_rate(_coupled_runs(N, 10**4, 80 + j), 2) for j, N in enumerate((10**3, 10**4, 10**5))]
    ok = ks < 0.05 and z <= 4 and rates[0] > rates[1] > rates[2]
    report(8, ok, f"KS {ks:.4f} (<0.05); enumeration max z {z:.2f} (<=4); "
                  f"miscoupling rate m=2 at N=1e3,1e4,1e5: {rates}")


def test_c9_connectivity(report):
    q = extinction_probability(PARETO, size_biased_offspring(PARETO))[0]
    h = [bilateral_hopcount(sample_degree_sequence(PARETO, 10**5, stream(9, i)), 0, 1, stream(9, i, 1))
         for i in range(2000)]
    dropped = empirical_survival(h).dropped_fraction
    ok = abs(dropped - (1 - q * q)) <= 0.05
    report(9, ok, f"dropped {dropped:.4f} vs 1-q^2 = {1 - q * q:.4f} (within 0.05)")


def _outputs(out):
    files = {}
    for p in sorted(out.iterdir()):
        data = p.read_bytes()
        if p.name == "manifest.json":
            m = json.loads(data)
            m.pop("wall_time")
            data = json.dumps(m, sort_keys=True).encode()
        files[p.name] = data
    return files


def test_c10_determinism(tmp_path, report):
    same = {}
    for mode, N, reps in [("fig1", (3000, 9000), 60), ("components", (5000,), 8),
                          ("coupling-diagnostics", (5000,), 20)]:
        outs = []
        for t in (1, 4, 16):
            cfg = ExperimentConfig(mode=mode, law=PARETO, N=list(N), replications=reps, seed=10)
            outs.append(_outputs(execute(cfg, tmp_path / f"{mode}_{t}", t).out))
        same[mode] = outs[0] == outs[1] == outs[2]
    report(10, all(same.values()), f"byte-identical at 1/4/16 threads: {same}")
