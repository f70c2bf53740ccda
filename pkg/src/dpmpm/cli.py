"""Command-line front end: ``dpmpm impute|synthesize|pool|diagnose|simulate``.

Exit codes: 0 success, 2 configuration error, 3 data error.  Any flag may be
set in a JSON file passed with ``--config``; flags given on the command line
win over the file.
"""

from __future__ import annotations

import argparse
import glob
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .catdata import (
    CategoricalDataset,
    MixtureTruth,
    Schema,
    dump_schema,
    generate_from_mixture,
    inject_mcar,
    load_csv,
    load_mcz,
    load_schema,
    union_schema,
    write_csv,
)
from .diagnostics import kstar_mcmc_diag, marginal_compare
from .engines import impute_nozeros, impute_zeros, synthesize, write_outputs
from .errors import ConfigurationError, DataError, DpmpmError
from .glm import fit_GLMs, pool_fitted_GLMs
from .pooling import Method, compute_probs, pool_estimated_probs, pooled_tables_csv
from .sampler import TraceLog

log = logging.getLogger("dpmpm")

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3

# defaults applied after merging config file and flags
DEFAULTS = {
    "impute": {"missing_token": "NA", "nmax": 200000, "nrun": 10000, "burn": None, "thin": 50,
               "aalpha": 0.25, "balpha": 0.25, "m": 10, "seed": 0, "silent": False,
               "out": "out", "chains": 1, "timing": False, "placeholder_token": "NA"},
    "synthesize": {"missing_token": "NA", "nrun": 10000, "burn": None, "thin": 50,
                   "aalpha": 0.25, "balpha": 0.25, "m": 5, "seed": 0, "silent": False,
                   "out": "out", "timing": False},
    "pool": {"missing_token": "NA", "family": "logistic", "out": "pooled", "digits": 4},
    "diagnose": {"out": "diag", "mode": "imp", "missing_token": "NA"},
    "simulate": {"seed": 0, "missing_token": "NA", "placeholder_token": "NA"},
}
REQUIRED = {
    "impute": ["data", "k"],
    "synthesize": ["data", "k"],
    "pool": ["inputs", "method"],
    "diagnose": ["trace"],
    "simulate": ["truth", "n", "out"],
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _flag(p, name, **kw):
    kw.setdefault("default", None)
    p.add_argument(name, **kw)


def _sampler_flags(p):
    _flag(p, "--data", help="input CSV")
    _flag(p, "--schema", help="schema sidecar JSON (levels); inferred from data if omitted")
    _flag(p, "--missing-token", help="token marking missing cells (default NA)")
    _flag(p, "--nrun", type=int, help="MCMC sweeps (default 10000)")
    _flag(p, "--burn", type=int, help="burn-in sweeps (default nrun/2)")
    _flag(p, "--thin", type=int, help="thinning interval (default 50)")
    _flag(p, "--k", type=int, help="maximum number of latent classes (required)")
    _flag(p, "--aalpha", type=float, help="Gamma shape for alpha (default 0.25)")
    _flag(p, "--balpha", type=float, help="Gamma rate for alpha (default 0.25)")
    _flag(p, "--m", type=int, help="number of output datasets")
    _flag(p, "--seed", type=int, help="random seed (default 0)")
    p.add_argument("--silent", action="store_const", const=True, default=None,
                   help="suppress per-iteration progress lines")
    _flag(p, "--out", help="output path prefix")
    p.add_argument("--timing", action="store_const", const=True, default=None,
                   help="record wall-clock runtime in the report (breaks byte-identity)")
    _flag(p, "--config", help="JSON file with flag values")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dpmpm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("impute", help="multiple imputation (optionally with structural zeros)")
    _sampler_flags(p)
    _flag(p, "--mcz", help="structural-zeros CSV; switches to the structural-zeros engine")
    _flag(p, "--nmax", type=int, help="cap on the augmented sample size (default 200000)")
    _flag(p, "--placeholder-token", help="wildcard token in the MCZ file (default NA)")
    _flag(p, "--chains", type=int, help="independent chains for diagnostics (default 1)")

    p = sub.add_parser("synthesize", help="partially or fully synthetic data")
    _sampler_flags(p)
    _flag(p, "--vars", help="comma-separated columns to synthesize (default: all)")

    p = sub.add_parser("pool", help="pool estimates across completed datasets")
    _flag(p, "--inputs", help="glob of completed CSV files")
    _flag(p, "--schema", help="schema sidecar JSON")
    _flag(p, "--missing-token")
    _flag(p, "--probs", help='probability tables, e.g. "MAR;SEX;MAR,WKL"')
    _flag(p, "--glm", help='model formula, e.g. "SEX~WKL+MAR"')
    _flag(p, "--family", help="logistic or multinomial (default logistic)")
    _flag(p, "--method", help="imputation, synthesis_full or synthesis_partial")
    _flag(p, "--out", help="output prefix (default pooled)")
    _flag(p, "--digits", type=int, help="decimals in the text table (default 4)")
    _flag(p, "--config")

    p = sub.add_parser("diagnose", help="kstar trace/ACF plots and marginal comparisons")
    _flag(p, "--trace", help="trace CSV written by impute/synthesize")
    _flag(p, "--k", type=int, help="maximum number of latent classes used in the run")
    _flag(p, "--nrun", type=int)
    _flag(p, "--burn", type=int)
    _flag(p, "--thin", type=int)
    _flag(p, "--max-lag", type=int)
    _flag(p, "--compare", help="variable for the marginal comparison")
    _flag(p, "--obs", help="observed-data CSV for the comparison")
    _flag(p, "--inputs", help="glob of completed CSV files for the comparison")
    _flag(p, "--mode", help="imp or syn (default imp)")
    _flag(p, "--schema")
    _flag(p, "--missing-token")
    _flag(p, "--out", help="output prefix (default diag)")
    _flag(p, "--config")

    p = sub.add_parser("simulate", help="draw a fixture from a latent class truth")
    _flag(p, "--truth", help="truth JSON (variables, weights, components)")
    _flag(p, "--n", type=int)
    _flag(p, "--seed", type=int)
    _flag(p, "--mcar", type=float, help="MCAR rate in [0, 1]")
    _flag(p, "--mcar-seed", type=int)
    _flag(p, "--mcz", help="structural zeros to reject")
    _flag(p, "--placeholder-token")
    _flag(p, "--missing-token")
    _flag(p, "--out", help="output CSV")
    _flag(p, "--schema-out", help="also write the schema sidecar here")
    _flag(p, "--config")
    return parser


def effective_config(command: str, args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS.get(command, {}))
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                filecfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(filecfg, dict):
            raise ConfigurationError("config file must hold a JSON object")
        known = set(vars(args)) - {"command", "config"}
        for key, val in filecfg.items():
            key = key.replace("-", "_")
            if key not in known:
                raise ConfigurationError(f"unknown config key {key!r}")
            cfg[key] = val
    for key, val in vars(args).items():
        if key in ("command", "config") or val is None:
            continue
        cfg[key] = val
    for key in REQUIRED.get(command, []):
        if cfg.get(key) is None:
            raise ConfigurationError(f"--{key.replace('_', '-')} is required")
    if "nrun" in cfg and cfg.get("burn") is None and cfg.get("nrun") is not None:
        cfg["burn"] = int(cfg["nrun"]) // 2
    return cfg


def _load_data(cfg) -> CategoricalDataset:
    schema = load_schema(cfg["schema"]) if cfg.get("schema") else None
    return load_csv(cfg["data"], cfg["missing_token"], schema)


def _chain_job(args):
    X, cfg, seed = args
    res = impute_nozeros(X, cfg["nrun"], cfg["burn"], cfg["thin"], cfg["k"], cfg["aalpha"],
                         cfg["balpha"], 1, seed, silent=True)
    return res.trace


def _merge_traces(traces: list[TraceLog]) -> str:
    lines = ["chain,iter,kstar,alpha,nmis"]
    for c, tr in enumerate(traces):
        for row in zip(tr.kept, tr.kstar_trace, tr.alpha_trace, tr.nmis_trace):
            lines.append(f"{c},{row[0]},{row[1]},{row[2]!r},{row[3]}")
    return "\n".join(lines) + "\n"


def cmd_impute(cfg: dict) -> int:
    X = _load_data(cfg)
    silent = bool(cfg["silent"])
    common = dict(nrun=cfg["nrun"], burn=cfg["burn"], thin=cfg["thin"], K=cfg["k"],
                  aalpha=cfg["aalpha"], balpha=cfg["balpha"], m=cfg["m"], seed=cfg["seed"],
                  silent=silent)
    if cfg.get("mcz"):
        mcz = load_mcz(cfg["mcz"], X.schema, cfg["placeholder_token"])
        result = impute_zeros(X, mcz, cfg["nmax"], **common)
    else:
        result = impute_nozeros(X, **common)
    for w in result.warnings:
        log.warning(w)
    paths = write_outputs(result, cfg["out"], "impute", cfg, cfg["missing_token"],
                          runtime=bool(cfg["timing"]))
    chains = int(cfg.get("chains") or 1)
    if chains > 1:
        if cfg.get("mcz"):
            raise ConfigurationError("--chains is only supported without structural zeros")
        seeds = [int(s.generate_state(1)[0]) for s in
                 np.random.SeedSequence([cfg["seed"], 7]).spawn(chains - 1)]
        with ProcessPoolExecutor(max_workers=min(chains - 1, os.cpu_count() or 1)) as pool:
            extra = list(pool.map(_chain_job, [(X, cfg, s) for s in seeds]))
        with open(f"{cfg['out']}_chains_trace.csv", "w", encoding="utf-8") as fh:
            fh.write(_merge_traces([result.trace] + extra))
    print(f"wrote {len(paths)} files with prefix {cfg['out']}", file=sys.stderr)
    return EXIT_OK


def cmd_synthesize(cfg: dict) -> int:
    X = _load_data(cfg)
    vars_ = None
    if cfg.get("vars"):
        vars_ = [v.strip() for v in str(cfg["vars"]).split(",") if v.strip()]
        for v in vars_:
            if v not in X.schema.names:
                raise ConfigurationError(f"unknown variable {v!r} in --vars")
    if not cfg["silent"]:
        print("dj = " + " ".join(str(int(x)) for x in X.schema.d))
    result = synthesize(X, cfg["nrun"], cfg["burn"], cfg["thin"], cfg["k"], cfg["aalpha"],
                        cfg["balpha"], cfg["m"], vars_, cfg["seed"], silent=bool(cfg["silent"]))
    for w in result.warnings:
        log.warning(w)
    paths = write_outputs(result, cfg["out"], "synthesize", cfg, cfg["missing_token"],
                          runtime=bool(cfg["timing"]))
    print(f"wrote {len(paths)} files with prefix {cfg['out']}", file=sys.stderr)
    return EXIT_OK


def _load_many(pattern: str, cfg: dict) -> list[CategoricalDataset]:
    paths = sorted(glob.glob(pattern))
    if not paths:
        raise DataError(f"no files match {pattern!r}")
    schema = load_schema(cfg["schema"]) if cfg.get("schema") else union_schema(paths, cfg["missing_token"])
    return [load_csv(p, cfg["missing_token"], schema) for p in paths]


def cmd_pool(cfg: dict) -> int:
    method = Method.parse(cfg["method"])
    if bool(cfg.get("probs")) == bool(cfg.get("glm")):
        raise ConfigurationError("give exactly one of --probs or --glm")
    datasets = _load_many(cfg["inputs"], cfg)
    if cfg.get("probs"):
        varlist = [tuple(v.strip() for v in group.split(",") if v.strip())
                   for group in str(cfg["probs"]).split(";") if group.strip()]
        for group in varlist:
            for v in group:
                if v not in datasets[0].schema.names:
                    raise ConfigurationError(f"unknown variable {v!r} in --probs")
        tables = pool_estimated_probs(compute_probs(datasets, varlist), method)
        csv_text = pooled_tables_csv(tables)
        text = "\n".join(t.to_text(cfg["digits"]) for t in tables)
        warnings = [w for t in tables for w in t.warnings]
    else:
        if cfg["family"] not in ("logistic", "multinomial"):
            raise ConfigurationError(f"unknown family {cfg['family']!r}")
        from .glm import parse_formula
        response, preds = parse_formula(cfg["glm"])
        for v in [response] + preds:
            if v not in datasets[0].schema.names:
                raise ConfigurationError(f"unknown variable {v!r} in --glm")
        table = pool_fitted_GLMs(fit_GLMs(datasets, cfg["glm"], cfg["family"]), method)
        csv_text = table.to_csv()
        text = table.to_text(cfg["digits"])
        warnings = table.warnings
    for w in warnings:
        log.warning(w)
    out = cfg["out"]
    parent = os.path.dirname(out)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(f"{out}_pooled.csv", "w", encoding="utf-8") as fh:
        fh.write(csv_text)
    with open(f"{out}_pooled.txt", "w", encoding="utf-8") as fh:
        fh.write(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_diagnose(cfg: dict) -> int:
    trace = TraceLog.read_csv(cfg["trace"])
    diag = kstar_mcmc_diag(trace, cfg.get("nrun"), cfg.get("burn"), cfg.get("thin"),
                           cfg.get("k"), cfg.get("max_lag"))
    out = cfg["out"]
    parent = os.path.dirname(out)
    if parent:
        os.makedirs(parent, exist_ok=True)
    files = {
        f"{out}_kstar_trace.svg": diag["traceplot"],
        f"{out}_kstar_acf.svg": diag["autocorrplot"],
        f"{out}_kstar_trace.csv": diag["trace_csv"],
        f"{out}_kstar_acf.csv": diag["acf_csv"],
        f"{out}_kstar_summary.json": json.dumps(diag["summary"], indent=2, sort_keys=True) + "\n",
    }
    if cfg.get("compare"):
        if not (cfg.get("obs") and cfg.get("inputs")):
            raise ConfigurationError("--compare needs --obs and --inputs")
        paths = sorted(glob.glob(cfg["inputs"]))
        if not paths:
            raise DataError(f"no files match {cfg['inputs']!r}")
        schema = (load_schema(cfg["schema"]) if cfg.get("schema")
                  else union_schema([cfg["obs"]] + paths, cfg["missing_token"]))
        obs = load_csv(cfg["obs"], cfg["missing_token"], schema)
        done = [load_csv(p, cfg["missing_token"], schema) for p in paths]
        if cfg["compare"] not in schema.names:
            raise ConfigurationError(f"unknown variable {cfg['compare']!r}")
        cmp_ = marginal_compare(obs, done, cfg["compare"], cfg["mode"])
        files[f"{out}_compare_{cfg['compare']}.svg"] = cmp_["svg"]
        files[f"{out}_compare_{cfg['compare']}.csv"] = cmp_["csv"]
        sys.stdout.write(cmp_["table"].to_text())
    for path, text in files.items():
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    s = diag["summary"]
    print(f"kstar: n={s['n']} mean={s['mean']:.3f} min={s['min']} max={s['max']}")
    if s.get("kstar_at_K"):
        log.warning("kstar reached K=%s; consider a larger K", s["K"])
    return EXIT_OK


def cmd_simulate(cfg: dict) -> int:
    if cfg.get("mcar") is not None and not 0.0 <= float(cfg["mcar"]) <= 1.0:
        raise ConfigurationError(f"--mcar must lie in [0, 1], got {cfg['mcar']}")
    if int(cfg["n"]) < 0:
        raise ConfigurationError("--n must be non-negative")
    try:
        with open(cfg["truth"], encoding="utf-8") as fh:
            obj = json.load(fh)
        schema = Schema.from_json(obj)
        truth = MixtureTruth.from_json(obj)
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise DataError(f"cannot read truth {cfg['truth']}: {exc}") from None
    except ValueError as exc:
        raise DataError(f"invalid truth {cfg['truth']}: {exc}") from None
    mcz = load_mcz(cfg["mcz"], schema, cfg["placeholder_token"]) if cfg.get("mcz") else None
    data = generate_from_mixture(truth, int(cfg["n"]), schema, int(cfg["seed"]), mcz=mcz)
    if cfg.get("mcar"):
        mseed = cfg.get("mcar_seed")
        data = inject_mcar(data, float(cfg["mcar"]), int(cfg["seed"]) + 1 if mseed is None else int(mseed))
    parent = os.path.dirname(cfg["out"])
    if parent:
        os.makedirs(parent, exist_ok=True)
    write_csv(data, cfg["out"], cfg["missing_token"])
    if cfg.get("schema_out"):
        dump_schema(schema, cfg["schema_out"])
    return EXIT_OK


COMMANDS = {
    "impute": cmd_impute,
    "synthesize": cmd_synthesize,
    "pool": cmd_pool,
    "diagnose": cmd_diagnose,
    "simulate": cmd_simulate,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not args.command:
        parser.print_help(sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s",
                        stream=sys.stderr)
    try:
        cfg = effective_config(args.command, args)
        return COMMANDS[args.command](cfg)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DpmpmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
