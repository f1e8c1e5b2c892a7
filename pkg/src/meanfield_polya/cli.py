"""Command-line front end tying the library into reproducible experiments.

Subcommands: simulate | moments | asymptotics | clt | verify.  Options can
come from a JSON config file (--config); explicit flags override config
values.  Every output embeds its resolved, result-affecting configuration in
the metadata header, so outputs can be regenerated from the files themselves.
Execution-only options (--out, --threads) are not embedded: they cannot
change the produced bytes.

Exit codes: 0 success, 1 validation/usage error, 2 verification failure.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import classify_regime, critical_diagnostic, fit_power_law
from .core import ModelParams, run_trajectory
from .clt import clt_moment_test
from .moments import finite_moment_sequences, limit_moment_sequence
from .montecarlo import BudgetError, DEFAULT_BUDGET
from .rng import UniformSource
from .serialize import serialize_records


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


_COMMON_DEFAULTS = {"seed": 0, "format": "csv"}

DEFAULTS = {
    "simulate": {
        **_COMMON_DEFAULTS,
        "n": 2, "a": 1, "b": 1, "alpha": 0.5, "horizon": 1000,
        "replica": 0, "record_every": None, "full_state": False,
    },
    "moments": {**_COMMON_DEFAULTS, "n": 2, "a": 1, "b": 1, "alpha": 0.5, "horizon": 100},
    "asymptotics": {
        **_COMMON_DEFAULTS,
        "a": 1, "b": 1, "alphas": "0.1,0.2,0.3,0.4,0.5,0.6,0.8,1.0",
        "horizon": 1_000_000, "window": None, "format": "jsonl",
    },
    "clt": {
        **_COMMON_DEFAULTS,
        "n": 2000, "a": 1, "b": 1, "alpha": 0.5, "horizon": 20,
        "replicas": 2000, "format": "jsonl",
    },
    "verify": {"quick": False},
}


def build_parser() -> _Parser:
    parser = _Parser(prog="mfpolya", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="command")

    def add_common(p, with_model=True):
        if with_model:
            p.add_argument("--n", type=int, help="number of urns")
            p.add_argument("--a", type=int, help="initial red balls per urn")
            p.add_argument("--b", type=int, help="initial white balls per urn")
            p.add_argument("--alpha", type=float, help="coupling strength in [0,1]")
        p.add_argument("--horizon", type=int, help="number of time steps")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--config", type=str, help="JSON config file (flags override)")
        p.add_argument("--out", type=str, help="output path ('-' or absent = stdout)")
        p.add_argument("--format", choices=["csv", "jsonl"], help="output format")
        p.add_argument("--threads", type=int, default=1, help="worker threads")
        p.add_argument("--budget-override", action="store_true", default=None,
                       help="run even if the work budget is exceeded")

    p_sim = sub.add_parser("simulate", help="run one trajectory and record summaries")
    add_common(p_sim)
    p_sim.add_argument("--replica", type=int, help="replica index (stream address)")
    p_sim.add_argument("--record-every", type=int, dest="record_every",
                       help="record every k-th step")
    p_sim.add_argument("--full-state", action="store_true", default=None, dest="full_state",
                       help="also dump per-urn fractions next to the output file")

    p_mom = sub.add_parser("moments", help="exact moment recursions (v, x, x_inf)")
    add_common(p_mom)

    p_asy = sub.add_parser("asymptotics", help="decay-rate fits and regime report")
    add_common(p_asy, with_model=False)
    p_asy.add_argument("--a", type=int, help="initial red balls per urn")
    p_asy.add_argument("--b", type=int, help="initial white balls per urn")
    p_asy.add_argument("--alphas", type=str, help="comma-separated coupling strengths")
    p_asy.add_argument("--window", type=str, help="fit window 'tlo:thi'")

    p_clt = sub.add_parser("clt", help="ensemble fluctuation checks vs the Gaussian limit")
    add_common(p_clt)
    p_clt.add_argument("--replicas", type=int, help="ensemble size")

    p_ver = sub.add_parser("verify", help="run the acceptance suite")
    p_ver.add_argument("--quick", action="store_true", default=None,
                       help="reduced-size smoke run")
    return parser


def _resolve_config(command: str, args: argparse.Namespace) -> dict:
    """defaults < config file < explicit flags."""
    cfg = dict(DEFAULTS[command])
    path = getattr(args, "config", None)
    if path:
        try:
            loaded = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read config {path}: {exc}")
        loaded.pop("command", None)
        for key, value in loaded.items():
            if key not in cfg:
                raise CliError(f"unknown config key for {command}: {key}")
            cfg[key] = value
    for key in cfg:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def _meta(command: str, cfg: dict) -> dict:
    return {"version": __version__, "command": command, "config": cfg}


def _params(cfg) -> ModelParams:
    return ModelParams(n_urns=cfg["n"], red_init=cfg["a"], white_init=cfg["b"],
                       alpha=cfg["alpha"])


def _cmd_simulate(cfg: dict, threads: int) -> tuple[str, str | None]:
    params = _params(cfg)
    horizon = cfg["horizon"]
    if cfg["record_every"] is None:
        cfg["record_every"] = max(1, horizon // 250)
    source = UniformSource(cfg["seed"])
    record = run_trajectory(
        params, horizon, source, replica=cfg["replica"],
        record_every=cfg["record_every"], keep_full_state=cfg["full_state"],
    )
    meta = _meta("simulate", cfg)
    main = serialize_records(record.summary_rows(), cfg["format"], meta,
                             columns=["t", "z_bar", "z_min", "z_max", "spread"])
    extra = None
    if cfg["full_state"]:
        extra = serialize_records(record.full_state_rows(), cfg["format"], meta,
                                  columns=["t", "urn", "z"])
    return main, extra


def _cmd_moments(cfg: dict, threads: int) -> tuple[str, None]:
    params = _params(cfg)
    horizon = cfg["horizon"]
    seqs = finite_moment_sequences(params, horizon)
    x_inf = limit_moment_sequence(params, horizon)
    records = (
        {"t": int(t), "v_exact": float(seqs.v[t]), "x_exact": float(seqs.x[t]),
         "x_inf": float(x_inf[t])}
        for t in range(horizon + 1)
    )
    text = serialize_records(records, cfg["format"], _meta("moments", cfg),
                             columns=["t", "v_exact", "x_exact", "x_inf"])
    return text, None


def _cmd_asymptotics(cfg: dict, threads: int) -> tuple[str, None]:
    horizon = cfg["horizon"]
    if cfg["window"] is None:
        cfg["window"] = f"{max(10, horizon // 1000)}:{horizon}"
    try:
        lo, hi = (float(part) for part in cfg["window"].split(":"))
    except ValueError:
        raise CliError(f"bad window {cfg['window']!r}, expected 'tlo:thi'")
    alphas = [float(s) for s in str(cfg["alphas"]).split(",") if s]

    records = []
    times = np.arange(horizon + 1)
    for alpha in alphas:
        params = ModelParams(n_urns=1, red_init=cfg["a"], white_init=cfg["b"], alpha=alpha)
        regime = classify_regime(alpha)
        x_inf = limit_moment_sequence(params, horizon)
        fit = fit_power_law(times, x_inf, (lo, hi))
        try:
            diag = critical_diagnostic(times, x_inf)
            ratio_flag = "bounded" if diag.bounded else "unbounded"
        except ValueError:
            ratio_flag = None
        records.append({
            "alpha": alpha,
            "regime": regime.label,
            "predicted_rate": regime.predicted_rate,
            "slope": fit.slope,
            "r_squared": fit.r_squared,
            "window": cfg["window"],
            "ratio_flag": ratio_flag,
        })
    text = serialize_records(
        records, cfg["format"], _meta("asymptotics", cfg),
        columns=["alpha", "regime", "predicted_rate", "slope", "r_squared",
                 "window", "ratio_flag"],
    )
    return text, None


def _cmd_clt(cfg: dict, threads: int, budget_override: bool = False) -> tuple[str, None]:
    params = _params(cfg)
    report = clt_moment_test(params, cfg["replicas"], cfg["horizon"], cfg["seed"],
                             threads=threads, budget_override=budget_override)
    records = list(report.records())
    records.append({
        "t": None,
        "max_abs_increment_corr": report.max_abs_increment_corr,
        "corr_threshold": report.corr_threshold,
        "corr_ok": report.corr_ok,
        "all_ok": report.all_ok,
    })
    if cfg["format"] == "csv":
        records = records[:-1]  # summary object has a different schema
    text = serialize_records(
        records, cfg["format"], _meta("clt", cfg),
        columns=["t", "w_mean", "w_var", "w_var_se", "ref_var_finite",
                 "ref_var_limit", "skewness", "excess_kurtosis",
                 "var_ok", "skew_ok", "kurt_ok"],
    )
    return text, None


def _cmd_verify(cfg: dict, threads: int) -> int:
    from .acceptance import run_all

    results = run_all(quick=cfg["quick"])
    for res in results:
        print(res.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed"
          + (" (quick mode)" if cfg["quick"] else ""))
    return 2 if failed else 0


_RUNNERS = {
    "simulate": _cmd_simulate,
    "moments": _cmd_moments,
    "asymptotics": _cmd_asymptotics,
    "clt": _cmd_clt,
}


def _write(text: str, out: str | None, suffix: str = ""):
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    path = Path(out + suffix)
    path.write_bytes(text.encode())


def run_command(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise CliError("a subcommand is required (see --help)")
        cfg = _resolve_config(args.command, args)
        if args.command == "verify":
            return _cmd_verify(cfg, threads=1)
        threads = getattr(args, "threads", 1) or 1
        if args.command == "clt":
            text, extra = _cmd_clt(cfg, threads,
                                   budget_override=bool(getattr(args, "budget_override", None)))
        else:
            text, extra = _RUNNERS[args.command](cfg, threads)
        _write(text, args.out)
        if extra is not None:
            if args.out is None or args.out == "-":
                raise CliError("--full-state needs --out to place the state dump")
            _write(extra, args.out, suffix=".full.csv" if cfg["format"] == "csv" else ".full.jsonl")
        return 0
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, BudgetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
