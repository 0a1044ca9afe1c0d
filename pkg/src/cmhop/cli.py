"""Command-line experiment driver.

    cmhop <mode> [--config FILE] [--seed S] [--out DIR] [--threads T] [--oracle-bfs]

Modes: hopcount, components, bp-w, limit-law, coupling-diagnostics, fig1, fig2.
The config file uses ``key = value`` sections: ``[experiment]`` for run
settings and ``[law]`` for the degree law (``name`` plus parameters).
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bp import expected_R, extinction_probability, sample_W
from .degree_model import DegreeLaw, law_from_config, law_to_config, size_biased_offspring
from .graph import (check_well_behaved, components, empirical_offspring, hopcount,
                    pair_stubs, sample_degree_sequence, truncate_graph)
from .rng import stream
from .spg import CapExceeded, bilateral_hopcount, coupling_error_rate, grow_coupled, traces_to_json
from .stats import (FINITE_ONLY, UNCONDITIONAL, centered, centering, empirical_survival,
                    shift_distance, theoretical_survival_curve, tightness_report)

MODES = ("hopcount", "components", "bp-w", "limit-law", "coupling-diagnostics", "fig1", "fig2")
EXIT_OK, EXIT_CONFIG, EXIT_CAP = 0, 2, 3

FIG1_N = (25_000, 75_000, 125_000)
FIG2_N = (5_000, 25_000, 125_000, 625_000)


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    mode: str
    law: DegreeLaw
    N: list[int]
    replications: int = 1000
    seed: int = 0
    epsilon: float = 0.05
    conditioning: str = FINITE_ONLY
    oracle_bfs: bool = False
    hop_cap: int | None = None
    w_samples: int = 2000
    w_gen: int | None = None
    k_min: int = -8
    k_max: int = 12
    m_max: int = 3
    eps_prime: float = 0.1
    extra: dict = field(default_factory=dict)

    def echo(self) -> dict:
        d = asdict(self)
        d["law"] = law_to_config(self.law)
        return d


def config_ini(cfg: ExperimentConfig) -> str:
    """Config file text that load_config turns back into ``cfg``."""
    cp = configparser.ConfigParser()
    exp = {}
    for k, v in asdict(cfg).items():
        if k in ("law", "extra") or v is None:
            continue
        exp[k.lower()] = " ".join(map(str, v)) if isinstance(v, list) else repr(v) if isinstance(v, float) else str(v)
    cp["experiment"] = exp
    cp["law"] = law_to_config(cfg.law)
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def _default_N(mode: str) -> list[int]:
    if mode == "fig1":
        return list(FIG1_N)
    if mode == "fig2":
        return list(FIG2_N)
    return [100_000]


def _ints(text: str) -> list[int]:
    return [int(float(x)) for x in text.replace(",", " ").split()]


def load_config(mode: str, path: str | None, seed: int | None, oracle_bfs: bool) -> ExperimentConfig:
    """Read the config file (if any) and apply command-line overrides."""
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}")
    cp = configparser.ConfigParser()
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                cp.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    exp = dict(cp["experiment"]) if cp.has_section("experiment") else {}
    lawcfg = dict(cp["law"]) if cp.has_section("law") else {"name": "pareto_ceil", "tau": "3.5"}
    try:
        law = law_from_config(lawcfg)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    if exp.get("mode", mode) != mode:
        raise ConfigError(f"config mode {exp['mode']!r} does not match subcommand {mode!r}")
    known = {f.lower() for f in ExperimentConfig.__dataclass_fields__} - {"mode", "law", "extra"}
    unknown = set(exp) - known - {"mode"}
    if unknown:
        raise ConfigError(f"unknown experiment keys: {sorted(unknown)}")
    try:
        cfg = ExperimentConfig(
            mode=mode,
            law=law,
            N=_ints(exp["n"]) if "n" in exp else _default_N(mode),
            replications=int(exp.get("replications", 1000)),
            seed=int(exp.get("seed", 0)),
            epsilon=float(exp.get("epsilon", 0.05)),
            conditioning=exp.get("conditioning", FINITE_ONLY),
            oracle_bfs=exp.get("oracle_bfs", "false").lower() in ("1", "true", "yes"),
            hop_cap=int(exp["hop_cap"]) if "hop_cap" in exp else None,
            w_samples=int(exp.get("w_samples", 2000)),
            w_gen=int(exp["w_gen"]) if "w_gen" in exp else None,
            k_min=int(exp.get("k_min", -8)),
            k_max=int(exp.get("k_max", 12)),
            m_max=int(exp.get("m_max", 3)),
            eps_prime=float(exp.get("eps_prime", 0.1)),
        )
    except ValueError as exc:
        raise ConfigError(f"bad experiment value: {exc}") from exc
    if seed is not None:
        cfg.seed = seed
    if oracle_bfs:
        cfg.oracle_bfs = True
    if cfg.replications < 1:
        raise ConfigError("replications must be at least 1")
    if not cfg.N or min(cfg.N) < 2:
        raise ConfigError("N values must be at least 2")
    if cfg.conditioning not in (FINITE_ONLY, UNCONDITIONAL):
        raise ConfigError(f"conditioning must be {FINITE_ONLY} or {UNCONDITIONAL}")
    if not 0 < cfg.epsilon < 0.25:
        raise ConfigError("epsilon must lie in (0, 1/4)")
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    return cfg


class Run:
    """Collects output files and summaries; writes the manifest at the end."""

    def __init__(self, cfg: ExperimentConfig, out: Path, threads: int):
        self.cfg = cfg
        self.out = out
        self.threads = max(1, int(threads))
        self.files: list[str] = []
        self.summaries: dict[str, dict] = {}
        self.results: dict = {}
        self.cap_breaches = 0
        self.t0 = time.perf_counter()
        out.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.out / name

    def map(self, fn, items):
        items = list(items)
        if self.threads == 1:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            return list(pool.map(fn, items))

    def write_manifest(self) -> Path:
        man = {
            "version": __version__,
            "config": self.cfg.echo(),
            "files": sorted(self.files),
            "summaries": self.summaries,
            "results": self.results,
            "cap_breaches": self.cap_breaches,
            "wall_time": time.perf_counter() - self.t0,
        }
        p = self.out / "manifest.json"
        p.write_text(json.dumps(man, indent=1, sort_keys=True, default=_jsonable) + "\n")
        return p


def _jsonable(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not serializable: {type(x)}")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return repr(x) if isinstance(x, float) else str(x)


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for r in rows:
            out.writerow([_fmt(v) for v in r])


def _law_summary(law: DegreeLaw) -> dict:
    m = law.moments()
    d = {"mu": m.mu, "nu": m.nu, "kappa": m.kappa, "supercritical": m.supercritical}
    if m.supercritical:
        q, s = extinction_probability(law, size_biased_offspring(law))
        d.update(q=q, s_star=s)
    return d


# --- hopcount experiments ----------------------------------------------------

def one_hopcount(law: DegreeLaw, N: int, seed: int, n_index: int, rep: int,
                 oracle_bfs: bool = False, cap: int | None = None):
    """Hopcount between nodes 0 and 1 of a fresh graph (i.i.d. degrees, so a uniform pair)."""
    rng = stream(seed, n_index, rep)
    seq = sample_degree_sequence(law, N, rng)
    if oracle_bfs:
        return hopcount(pair_stubs(seq, rng), 0, 1)
    return bilateral_hopcount(seq, 0, 1, rng, cap=cap)


def collect_hopcounts(run: Run, N: int, n_index: int) -> list:
    cfg = run.cfg

    def job(rep):
        try:
            return one_hopcount(cfg.law, N, cfg.seed, n_index, rep, cfg.oracle_bfs, cfg.hop_cap)
        except CapExceeded:
            return None

    hs = run.map(job, range(cfg.replications))
    breaches = sum(h is None for h in hs)
    run.cap_breaches += breaches
    return [h for h in hs if h is not None]


def run_hopcount(run: Run) -> dict:
    """Hopcount samples and survival curves for every N in the config."""
    cfg = run.cfg
    law_sum = _law_summary(cfg.law)
    curves = {}
    for i, N in enumerate(cfg.N):
        hs = collect_hopcounts(run, N, i)
        _write_rows(run.path(f"hopcounts_N{N}.csv"), ["rep", "hopcount"], enumerate(hs))
        summary = {"N": N, "mu": law_sum["mu"], "nu": law_sum["nu"], "q": law_sum.get("q"),
                   "samples": len(hs)}
        if not hs or not any(math.isfinite(h) for h in hs):
            summary["dropped_fraction"] = 1.0
            run.summaries[str(N)] = summary
            continue
        curve = empirical_survival(hs, cfg.conditioning)
        curve.to_csv(run.path(f"survival_N{N}.csv"))
        curves[N] = curve
        if law_sum["supercritical"]:
            c = centering(N, law_sum["nu"])
            summary.update(sigma_N=c.sigma_N, a_N=c.a_N)
            ccurve = empirical_survival(centered(hs, c), cfg.conditioning)
            ccurve.to_csv(run.path(f"survival_centered_N{N}.csv"))
            summary["tightness"] = {str(k): v for k, v in tightness_report(hs, c, [1, 2, 4, 8]).items()}
        summary["dropped_fraction"] = curve.dropped_fraction
        if "q" in law_sum:
            summary["one_minus_q_squared"] = 1.0 - law_sum["q"] ** 2
        run.summaries[str(N)] = summary
    return curves


def _shift_rows(curves: dict, pairs) -> list:
    rows = []
    for a, b, s in pairs:
        if a in curves and b in curves:
            try:
                d = shift_distance(curves[a], curves[b], s)
            except ValueError:  # degenerate curves whose shifted supports miss each other
                d = None
            rows.append((a, b, s, d))
    return rows


def run_fig1(run: Run) -> None:
    """Survival curves at each N plus shift-2 distances between all pairs."""
    curves = run_hopcount(run)
    Ns = sorted(curves)
    pairs = [(a, b, 2) for i, a in enumerate(Ns) for b in Ns[i + 1:]]
    rows = _shift_rows(curves, pairs)
    _write_rows(run.path("shift_distances.csv"), ["N1", "N2", "shift", "distance"], rows)
    run.results["shift_distances"] = [{"N1": a, "N2": b, "shift": s, "distance": d} for a, b, s, d in rows]


def run_fig2(run: Run) -> None:
    """Survival curves along N_k ~ N_1 nu^{2k}; shift-2 distances of consecutive curves."""
    curves = run_hopcount(run)
    Ns = sorted(curves)
    rows = _shift_rows(curves, [(a, b, 2) for a, b in zip(Ns, Ns[1:])])
    _write_rows(run.path("shift_distances.csv"), ["N1", "N2", "shift", "distance"], rows)
    run.results["shift_distances"] = [{"N1": a, "N2": b, "shift": s, "distance": d} for a, b, s, d in rows]


# --- components ------------------------------------------------------------

def one_components(law: DegreeLaw, N: int, eps: float, seed: int, n_index: int, rep: int) -> dict:
    rng = stream(seed, n_index, rep)
    seq = sample_degree_sequence(law, N, rng)
    g = pair_stubs(seq, rng)
    full = components(g)
    gt, R = truncate_graph(g, eps, rng)
    trunc = components(gt)
    nu_N = empirical_offspring(seq, law).nu_N
    return {"G": full, "G'": trunc, "R_N": R, "nu_N": nu_N}


def run_components(run: Run) -> None:
    cfg = run.cfg
    m = cfg.law.moments()
    q = extinction_probability(cfg.law, size_biased_offspring(cfg.law))[0] if m.supercritical else None
    for i, N in enumerate(cfg.N):
        res = run.map(lambda r: one_components(cfg.law, N, cfg.epsilon, cfg.seed, i, r),
                      range(cfg.replications))
        rows = []
        for r, d in enumerate(res):
            for graph in ("G", "G'"):
                for rank, size in enumerate(d[graph].sizes[:10].tolist(), start=1):
                    rows.append((r, graph, rank, size))
        _write_rows(run.path(f"components_N{N}.csv"), ["rep", "graph", "rank", "size"], rows)
        largest = np.array([d["G"].largest_fraction for d in res])
        second = np.array([d["G"].second_largest for d in res])
        subcrit = bool(np.mean([d["nu_N"] for d in res]) <= 1) or not m.supercritical
        run.summaries[str(N)] = {
            "N": N, "q": q, "subcritical": subcrit,
            "largest_fraction_mean": float(largest.mean()),
            "largest_fraction_truncated_mean": float(np.mean([d["G'"].largest_fraction for d in res])),
            "max_abs_largest_minus_q": None if subcrit or q is None else float(np.max(np.abs(largest - q))),
            "second_over_logN_mean": float(second.mean() / math.log(N)),
            "R_N_mean": float(np.mean([d["R_N"] for d in res])),
        }


# --- branching process -------------------------------------------------------

def run_bp_w(run: Run) -> None:
    cfg = run.cfg
    g = size_biased_offspring(cfg.law)
    est = sample_W(cfg.law, g, cfg.w_gen, cfg.w_samples, stream(cfg.seed, 0, 0))
    est.to_csv(run.path("w_samples.csv"))
    q, s = extinction_probability(cfg.law, g)
    x = est.samples
    run.results["bp_w"] = {
        "n_gen": est.n_gen, "n_samples": int(x.size), "mean": float(x.mean()),
        "standard_error": float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else None,
        "atom_frequency": est.atom_frequency, "extinction_probability": 1.0 - q, "s_star": s,
        "n_capped": est.n_capped,
    }


def w_pairs_for(cfg: ExperimentConfig):
    g = size_biased_offspring(cfg.law)
    w1 = sample_W(cfg.law, g, cfg.w_gen, cfg.w_samples, stream(cfg.seed, 1000, 1)).samples
    w2 = sample_W(cfg.law, g, cfg.w_gen, cfg.w_samples, stream(cfg.seed, 1000, 2)).samples
    return w1, w2


def run_limit_law(run: Run) -> None:
    cfg = run.cfg
    m = cfg.law.moments()
    if not m.supercritical:
        raise ConfigError("limit law needs a supercritical law")
    pairs = w_pairs_for(cfg)
    ks = range(cfg.k_min, cfg.k_max + 1)
    for N in cfg.N:
        c = centering(N, m.nu)
        curve = theoretical_survival_curve(c, pairs, m, ks)
        curve.to_csv(run.path(f"limit_law_N{N}.csv"))
        er = expected_R(c.a_N, pairs, m)
        run.summaries[str(N)] = {"N": N, "sigma_N": c.sigma_N, "a_N": c.a_N, "mu": m.mu, "nu": m.nu,
                                 "expected_R": er.value, "expected_R_truncation_bound": er.truncation_bound}


# --- coupling diagnostics ----------------------------------------------------

def one_diagnostic(cfg: ExperimentConfig, N: int, n_index: int, rep: int) -> dict:
    rng = stream(cfg.seed, n_index, rep)
    law = cfg.law
    m = law.moments()
    seq = sample_degree_sequence(law, N, rng)
    emp = empirical_offspring(seq, law)
    wb = check_well_behaved(seq, law, cfg.eps_prime, cfg.epsilon)
    g = pair_stubs(seq, rng)
    gt, _ = truncate_graph(g, cfg.epsilon, rng)
    wbt = check_well_behaved(gt.seq, law, cfg.eps_prime, cfg.epsilon)
    trace = grow_coupled(seq, 0, cfg.m_max + 1, rng)
    return {
        "L_dev": seq.L / (m.mu * N) - 1.0, "p_N": emp.p_N, "nu_dev": abs(emp.nu_N - m.nu),
        "cond1": wb.cond1_deviation, "cond1_ok": wb.cond1_ok, "i_star": wb.i_star,
        "cond1_truncated": wbt.cond1_deviation, "cond2_truncated_ok": wbt.cond2_ok,
        "max_degree": wb.max_degree, "degree_cap": wb.degree_cap, "trace": trace,
    }


def run_diagnostics(run: Run) -> None:
    cfg = run.cfg
    for i, N in enumerate(cfg.N):
        res = run.map(lambda r: one_diagnostic(cfg, N, i, r), range(cfg.replications))
        keys = ["L_dev", "p_N", "nu_dev", "cond1", "cond1_ok", "i_star", "cond1_truncated",
                "cond2_truncated_ok", "max_degree", "degree_cap", "miscoupling_generation"]
        rows = [[r] + [d[k] for k in keys[:-1]] + [d["trace"].miscoupling_generation]
                for r, d in enumerate(res)]
        _write_rows(run.path(f"diagnostics_N{N}.csv"), ["rep"] + keys, rows)
        traces = [d["trace"] for d in res]
        traces_to_json(traces, run.path(f"traces_N{N}.json"))
        capped = sum(t.terminated_reason == "cap" for t in traces)
        run.cap_breaches += capped
        run.summaries[str(N)] = {
            "N": N,
            "max_abs_L_dev": float(max(abs(d["L_dev"]) for d in res)),
            "p_N_mean": float(np.mean([d["p_N"] for d in res])),
            "p_N_below_0.05": float(np.mean([d["p_N"] < 0.05 for d in res])),
            "nu_dev_mean": float(np.mean([d["nu_dev"] for d in res])),
            "cond1_pass_fraction": float(np.mean([d["cond1_ok"] for d in res])),
            "cond2_pass_fraction": float(np.mean([d["i_star"] is not None for d in res])),
            "coupling_error_rate": {str(mm): coupling_error_rate(traces, mm) for mm in range(1, cfg.m_max + 1)},
        }


RUNNERS = {
    "hopcount": run_hopcount, "fig1": run_fig1, "fig2": run_fig2, "components": run_components,
    "bp-w": run_bp_w, "limit-law": run_limit_law, "coupling-diagnostics": run_diagnostics,
}


def execute(cfg: ExperimentConfig, out, threads: int = 1) -> Run:
    """Run one experiment and write its outputs and manifest into ``out``."""
    run = Run(cfg, Path(out), threads)
    RUNNERS[cfg.mode](run)
    run.path("config.ini").write_text(config_ini(cfg))
    run.write_manifest()
    return run


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cmhop", description="Configuration-model hopcount experiments.")
    ap.add_argument("mode", choices=MODES)
    ap.add_argument("--config", help="key = value config file with [experiment] and [law] sections")
    ap.add_argument("--seed", type=int, help="64-bit seed (overrides the config)")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("--threads", type=int, default=1, help="worker threads")
    ap.add_argument("--oracle-bfs", action="store_true", help="measure hopcounts by BFS on the full graph")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.mode, args.config, args.seed, args.oracle_bfs)
        if args.threads < 1:
            raise ConfigError("threads must be at least 1")
        run = execute(cfg, args.out, args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if run.cap_breaches:
        print(f"{run.cap_breaches} replication(s) hit the exploration cap", file=sys.stderr)
        return EXIT_CAP
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
