"""Command-line interface: ``methfid {simulate,fit,summarize,loglik,oracle}``.

Every command reads an optional flat ``key=value`` config file (``--config``)
plus ``--set key=value`` overrides, honours the global ``--seed``, ``--out``
and ``--threads`` flags, and writes its outputs atomically.

Exit codes: 0 success, 2 usage or configuration error, 3 data error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from .core import BMode, HyperParams, MethylationPattern, SiteRates
from .errors import (
    ConfigError,
    DataError,
    DegenerateRateError,
    DimensionError,
    InvalidParameterError,
    NumericalFailure,
)
from .hierarchy import stationary_rm
from .io import (
    REQUIRED,
    atomic_write,
    format_dataset,
    load_config,
    parse_dataset,
    read_samples_csv,
    samples_csv_text,
    write_json,
)
from .likelihood import dataset_loglik, pattern_loglik
from .mcmc import ChainConfig, run_chain
from .oracle import (
    MomentConstraints,
    brute_force_pattern_prob,
    em_fit,
    moment_fit,
)
from .plots import histogram_svg, scatter_svg
from .posterior import joint_scatter, site_intervals, summarize
from .simulator import draw_site_rates, make_rng, simulate_dataset

__all__ = ["cmd_fit", "cmd_loglik", "cmd_oracle", "cmd_simulate", "cmd_summarize", "main"]

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

# Reference values drawn on summary plots.
FAIL_VS_C_LINE = (1.04, 0.04)
DENOVO_VS_C_CURVE = (0.44, 0.05, 0.15)

SIMULATE_SCHEMA = {
    "n_patterns": (int, REQUIRED),
    "n_sites": (int, REQUIRED),
    "truth": (str, "hierarchical"),
    "with_error": (bool, True),
    "r_mu": (float, 0.976),
    "log10_g_mu": (float, -2.5),
    "r_dp": (float, 0.08),
    "log10_g_dp": (float, -1.5),
    "r_dd": (float, 0.07),
    "log10_g_dd": (float, -2.0),
    "r_c": (float, 0.016),
    "log10_g_c": (float, -2.5),
    "log10_g_m": (float, -3.0),
    "b_mode": (str, "fixed"),
    "b": (float, 0.003),
    "r_b": (float, 0.003),
    "log10_g_b": (float, -2.5),
    "mu": (float, 0.976),
    "dp": (float, 0.08),
    "dd": (float, 0.07),
    "c": (float, 0.016),
    "m": (float, math.nan),
}

_CHAIN_FIELDS = {f.name: f for f in fields(ChainConfig)}
FIT_SCHEMA = {"data": (str, ""), "n_sites": (int, 0)}
for _name, _f in _CHAIN_FIELDS.items():
    if _name in ("seed", "threads"):
        continue
    _typ = str if _name in ("b_mode", "model") else type(_f.default)
    _default = _f.default.value if isinstance(_f.default, BMode) else _f.default
    FIT_SCHEMA[_name] = (_typ, _default)

SUMMARIZE_SCHEMA = {
    "samples": (str, REQUIRED),
    "coverage": (float, 0.8),
}

LOGLIK_SCHEMA = {
    "data": (str, REQUIRED),
    "mu": (str, REQUIRED),
    "dp": (str, REQUIRED),
    "dd": (str, REQUIRED),
    "c": (str, REQUIRED),
    "b": (str, "0.003"),
    "m": (str, "stationary"),
    "with_error": (bool, True),
}

ORACLE_SCHEMA = {
    "data": (str, ""),
    "n_instances": (int, 200),
    "max_sites": (int, 4),
    "observed": (str, ""),
    "b": (float, 0.003),
    "em": (bool, True),
    "with_error": (bool, True),
    "tolerance": (float, 1e-12),
}


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _overrides(pairs) -> dict[str, str]:
    out = {}
    problems = []
    for item in pairs or []:
        if "=" not in item:
            problems.append(f"--set expects KEY=VALUE, got {item!r}")
            continue
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    if problems:
        raise ConfigError(problems)
    return out


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _seed_streams(seed: int, n: int) -> list[int]:
    return [int(v) for v in np.random.SeedSequence(seed).generate_state(n)]


# ---------------------------------------------------------------------------
# simulate

def _simulation_truth(cfg: dict, seed: int) -> tuple[SiteRates, dict]:
    s = cfg["n_sites"]
    if s < 1 or cfg["n_patterns"] < 1:
        raise ConfigError(["n_patterns and n_sites must be positive"])
    if cfg["truth"] == "hierarchical":
        hp = HyperParams(
            r_mu=cfg["r_mu"], g_mu=10 ** cfg["log10_g_mu"],
            r_dp=cfg["r_dp"], g_dp=10 ** cfg["log10_g_dp"],
            r_dd=cfg["r_dd"], g_dd=10 ** cfg["log10_g_dd"],
            r_c=cfg["r_c"], g_c=10 ** cfg["log10_g_c"],
            r_b=cfg["r_b"], g_b=10 ** cfg["log10_g_b"],
            g_m=10 ** cfg["log10_g_m"],
            b_mode=BMode(cfg["b_mode"]), b_value=cfg["b"],
        )
        rates = draw_site_rates(hp, s, seed=seed, with_error=cfg["with_error"])
        hyper = {k: getattr(hp, k) for k in ("r_mu", "g_mu", "r_dp", "g_dp", "r_dd", "g_dd",
                                             "r_c", "g_c", "r_b", "g_b", "g_m")}
        hyper["b_mode"] = hp.b_mode.value
        hyper["b_value"] = hp.b_value
        return rates, hyper
    if cfg["truth"] == "shared":
        m = cfg["m"]
        if math.isnan(m):
            m = float(stationary_rm(cfg["mu"], cfg["dp"], cfg["dd"]))
        b, c = (cfg["b"], cfg["c"]) if cfg["with_error"] else (0.0, 0.0)
        return SiteRates.shared(s, cfg["mu"], cfg["dp"], cfg["dd"], m, b, c), {}
    raise ConfigError([f"truth must be 'hierarchical' or 'shared', got {cfg['truth']!r}"])


def cmd_simulate(args) -> int:
    cfg = load_config(SIMULATE_SCHEMA, args.config, _overrides(args.set))
    if cfg["b_mode"] not in ("fixed", "hierarchical"):
        raise ConfigError(["b_mode must be 'fixed' or 'hierarchical'"])
    rate_seed, data_seed = _seed_streams(args.seed, 2)
    rates, hyper = _simulation_truth(cfg, rate_seed)
    data = simulate_dataset(rates, cfg["n_patterns"], seed=data_seed,
                            with_error=cfg["with_error"], source=f"simulated seed={args.seed}")
    out = _out_dir(args)
    atomic_write(out / "data.txt", format_dataset(data, header=f"simulated, seed {args.seed}"))
    truth = {
        "seed": args.seed,
        "config": cfg,
        "rates": {"mu": rates.mu, "dp": rates.delta_p, "dd": rates.delta_d,
                  "m": rates.m, "b": rates.b, "c": rates.c},
        "hyper": hyper,
        "loglik": dataset_loglik(data, rates, cfg["with_error"]),
    }
    write_json(out / "truth.json", truth)
    _log(f"wrote {data.n_patterns} patterns x {data.n_sites} sites to {out / 'data.txt'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# fit

def _chain_config(cfg: dict, args) -> ChainConfig:
    kw = {k: v for k, v in cfg.items() if k in _CHAIN_FIELDS}
    kw["seed"] = args.seed
    kw["threads"] = args.threads
    chain_cfg = ChainConfig(**kw)
    if getattr(args, "no_error", False):
        chain_cfg = chain_cfg.no_error()
    return chain_cfg


def cmd_fit(args) -> int:
    cfg = load_config(FIT_SCHEMA, args.config, _overrides(args.set))
    chain_cfg = _chain_config(cfg, args)
    data = None
    if cfg["data"]:
        data = parse_dataset(cfg["data"])
    elif not chain_cfg.prior_only:
        raise ConfigError(["missing required key 'data' (only prior_only runs may omit it)"])
    elif cfg["n_sites"] < 1:
        raise ConfigError(["prior_only runs without data need n_sites >= 1"])
    samples = run_chain(data, chain_cfg, n_sites=cfg["n_sites"] or None)
    if not np.all(np.isfinite(samples.column("logpost"))):
        raise NumericalFailure("non-finite log posterior in retained draws")
    out = _out_dir(args)
    files = []
    for k in samples.chains():
        name = f"chain_{k + 1}.csv"
        atomic_write(out / name, samples_csv_text(samples, chain=k))
        files.append(name)
    manifest = {
        "version": __version__,
        "command": "fit",
        "seed": args.seed,
        "config": chain_cfg.as_dict(),
        "data": cfg["data"],
        "n_patterns": data.n_patterns if data is not None else 0,
        "n_sites": data.n_sites if data is not None else cfg["n_sites"],
        "files": files,
        "acceptance": samples.acceptance,
        "cache_drift": samples.meta.get("cache_drift", {}),
    }
    write_json(out / "manifest.json", manifest)
    # wall-clock differs between runs, so it lives apart from the reproducible outputs
    write_json(out / "timing.json", {"wall_clock_seconds": samples.meta.get("wall_clock", {})})
    _log(f"wrote {len(files)} chain files ({len(samples)} draws) to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# summarize

def _sample_paths(spec: str) -> list[Path]:
    paths = []
    for part in (p.strip() for p in spec.split(",")):
        if not part:
            continue
        p = Path(part)
        if p.is_dir():
            found = sorted(p.glob("chain_*.csv"), key=lambda q: int(q.stem.split("_")[1]))
            if not found:
                raise DataError(f"no chain_*.csv files in {p}")
            paths.extend(found)
        elif p.exists():
            paths.append(p)
        else:
            raise DataError(f"sample file {p} not found")
    if not paths:
        raise ConfigError(["samples must name at least one file or directory"])
    return paths


def _write_scatter(out: Path, stem: str, samples, px: str, py: str, title: str,
                   xlabel: str, ylabel: str, reference: tuple[str, callable] | None) -> dict:
    sc = joint_scatter(samples, px, py)
    lines = [f"{xlabel},{ylabel}"] + [f"{a!r},{b!r}" for a, b in zip(sc.x.tolist(), sc.y.tolist())]
    atomic_write(out / f"{stem}.csv", "\n".join(lines) + "\n")
    overlays = {"least squares": lambda x: sc.slope * x + sc.intercept}
    if reference is not None:
        overlays[reference[0]] = reference[1]
    atomic_write(out / f"{stem}.svg", scatter_svg(sc.x, sc.y, title, xlabel, ylabel, overlays))
    return {"correlation": sc.correlation, "slope": sc.slope, "intercept": sc.intercept}


def cmd_summarize(args) -> int:
    cfg = load_config(SUMMARIZE_SCHEMA, args.config, _overrides(args.set))
    samples = read_samples_csv(_sample_paths(cfg["samples"]))
    report = summarize(samples, cfg["coverage"])
    out = _out_dir(args)
    if samples.n_sites:
        for fam in ("1-mu", "dp", "dd", "m", "c"):
            rows = site_intervals(samples, fam, cfg["coverage"])
            text = "site,lower,median,upper\n" + "".join(
                f"{int(r[0])},{r[1]!r},{r[2]!r},{r[3]!r}\n" for r in rows)
            atomic_write(out / f"sites_{fam}.csv", text)
        for name, label in (("r_c", "r_c"), ("1-r_mu", "1 - r_mu")):
            vals = samples.series(name)
            if np.all(np.isfinite(vals)) and np.ptp(vals) > 0:
                atomic_write(out / f"hist_{name}.svg", histogram_svg(vals, label, label))
        for fam in ("mu", "dp", "dd", "c", "m"):
            g = samples.column(f"g_{fam}")
            if np.all(np.isfinite(g)) and np.all(g > 0):
                atomic_write(out / f"hist_log10_g_{fam}.svg",
                             histogram_svg(np.log10(g), f"log10 g ({fam})", "log10 g"))
        if np.ptp(samples.column("r_c")) > 0:
            a, b0 = FAIL_VS_C_LINE
            report["scatter_r_c_fail"] = _write_scatter(
                out, "scatter_r_c_fail", samples, "r_c", "1-r_mu",
                "mean error rate vs mean failure of maintenance", "r_c", "1 - r_mu",
                ("reference line", lambda x: a * x + b0))
            a, b1, c0 = DENOVO_VS_C_CURVE
            report["scatter_c_denovo"] = _write_scatter(
                out, "scatter_c_denovo", samples, "median.c", "median.denovo",
                "median error rate vs median mean de novo rate", "median c",
                "median (dp + dd) / 2", ("reference curve", lambda x: a + b1 / (x - c0)))
    write_json(out / "summary.json", report)
    for fam, vals in report["families"].items():
        r = vals["r"] or vals["median_rate"]
        _log(f"{fam:>5}: median {r[1]:.4g}  ({r[0]:.4g}, {r[2]:.4g})"
             + (f"  variability {vals['label']}" if vals["label"] else ""))
    return EXIT_OK


# ---------------------------------------------------------------------------
# loglik

def _rate_values(text: str, name: str, s: int) -> np.ndarray:
    try:
        vals = np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise ConfigError([f"{name}: cannot read {text!r} as numbers"]) from None
    if vals.size == 1:
        vals = np.full(s, vals[0])
    if vals.size != s:
        raise DimensionError(f"{name} has {vals.size} values for {s} sites")
    if not np.all((vals >= 0) & (vals <= 1)):
        raise InvalidParameterError(f"{name} values must lie in [0, 1]")
    return vals


def cmd_loglik(args) -> int:
    cfg = load_config(LOGLIK_SCHEMA, args.config, _overrides(args.set))
    data = parse_dataset(cfg["data"])
    s = data.n_sites
    vals = {k: _rate_values(cfg[k], k, s) for k in ("mu", "dp", "dd", "b", "c")}
    if cfg["m"].strip().lower() == "stationary":
        m = np.atleast_1d(stationary_rm(vals["mu"], vals["dp"], vals["dd"]))
    else:
        m = _rate_values(cfg["m"], "m", s)
    rates = SiteRates(vals["mu"], vals["dp"], vals["dd"], m, vals["b"], vals["c"])
    value = dataset_loglik(data, rates, cfg["with_error"])
    if math.isnan(value):
        raise NumericalFailure("log-likelihood is NaN")
    print(repr(value))
    return EXIT_OK


# ---------------------------------------------------------------------------
# oracle

def _random_instance(rng, max_sites: int):
    s = int(rng.integers(1, max_sites + 1))
    rates = SiteRates(*rng.uniform(0.001, 0.999, size=(4, s)), rng.uniform(0, 0.1, s),
                      rng.uniform(0, 0.1, s))
    pat = MethylationPattern(rng.integers(0, 2, s), rng.integers(0, 2, s))
    return pat, rates


def cmd_oracle(args) -> int:
    cfg = load_config(ORACLE_SCHEMA, args.config, _overrides(args.set))
    rng = make_rng(args.seed)
    worst = 0.0
    for _ in range(cfg["n_instances"]):
        pat, rates = _random_instance(rng, cfg["max_sites"])
        for with_error in (True, False):
            brute = brute_force_pattern_prob(pat, rates, with_error)
            fast = math.exp(pattern_loglik(pat, rates, with_error))
            if brute > 0:
                worst = max(worst, abs(fast - brute) / brute)
    report = {
        "brute_force": {"instances": cfg["n_instances"], "max_relative_error": worst,
                        "passed": worst <= cfg["tolerance"]},
    }
    data = parse_dataset(cfg["data"]) if cfg["data"] else None
    if cfg["observed"]:
        try:
            observed = tuple(float(v) for v in cfg["observed"].split(","))
        except ValueError:
            raise ConfigError([f"observed: cannot read {cfg['observed']!r}"]) from None
    elif data is not None:
        observed = data.dyad_fractions()
    else:
        observed = (0.82, 0.064, 0.116)
    fam = moment_fit(observed, MomentConstraints(b=cfg["b"]))
    out = _out_dir(args)
    atomic_write(out / "moment_family.csv", fam.to_csv())
    report["moment"] = {"observed": observed, "feasible_points": int(fam.feasible.sum())}
    if fam.feasible.sum() >= 2:
        slope, intercept = fam.linear_fit()
        report["moment"]["fail_vs_c"] = {"slope": slope, "intercept": intercept,
                                         "reference": FAIL_VS_C_LINE}
    if data is not None and cfg["em"]:
        res = em_fit(data, with_error=cfg["with_error"], fixed={"b": cfg["b"]} if cfg["with_error"] else None)
        atomic_write(out / "em_trace.csv", res.trace_csv())
        monotone = bool(np.all(np.diff(res.trace) >= -1e-9 * max(1.0, abs(res.loglik))))
        report["em"] = {"params": res.params, "loglik": res.loglik, "iterations": res.n_iter,
                        "converged": res.converged, "monotone": monotone}
    write_json(out / "oracle_report.json", report)
    _log(json.dumps({"max_relative_error": worst}, sort_keys=True))
    if not report["brute_force"]["passed"] or not report.get("em", {}).get("monotone", True):
        return EXIT_NUMERIC
    return EXIT_OK


# ---------------------------------------------------------------------------

COMMANDS = {
    "simulate": (cmd_simulate, "draw a dataset (and its true rates) from the model"),
    "fit": (cmd_fit, "run MCMC chains and write sample CSVs plus a manifest"),
    "summarize": (cmd_summarize, "posterior intervals, variability labels and plot data"),
    "loglik": (cmd_loglik, "print the dataset log-likelihood at given rates"),
    "oracle": (cmd_oracle, "brute-force, moment and EM cross-checks"),
}


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--config", default=d(None), metavar="PATH",
                        help="flat key=value configuration file")
    parser.add_argument("--seed", type=int, default=d(0), help="master random seed")
    parser.add_argument("--out", default=d("."), metavar="DIR", help="output directory")
    parser.add_argument("--threads", type=int, default=d(1), help="worker threads for chains")
    parser.add_argument("--set", action="append", default=d([]), metavar="KEY=VALUE",
                        help="override one configuration key (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="methfid", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        _global_flags(p, suppress=True)
        if name == "fit":
            p.add_argument("--no-error", action="store_true",
                           help="pin both conversion error rates at zero")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    handler = COMMANDS[args.command][0]
    try:
        with np.errstate(invalid="ignore", divide="ignore"):
            return handler(args)
    except (ConfigError, InvalidParameterError) as exc:
        _log(f"error: {exc}")
        return EXIT_USAGE
    except (DataError, DimensionError) as exc:
        _log(f"data error: {exc}")
        return EXIT_DATA
    except (DegenerateRateError, NumericalFailure, FloatingPointError) as exc:
        _log(f"numerical failure: {exc}")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
