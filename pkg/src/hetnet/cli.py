"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 numerical non-convergence,
4 I/O failure.
"""

import argparse
import sys

import numpy as np

from . import __version__
from .association import association_probabilities
from .config import config_hash, default_config_path, parse_config, parse_overrides
from .errors import ConfigError, ConvergenceError, DegenerateBranchError
from .experiments import (
    FIGURES,
    SweepSpec,
    apply_variable,
    optimize_parameter,
    optimize_split,
    reproduce,
    split_grid,
    sweep,
)
from .io import RunManifest, emit, render, write_manifest
from .montecarlo import SimConfig, estimate_rate
from .rate import achievable_rate

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_IO = 0, 2, 3, 4

ASSOC_COLUMNS = ("lambda_s", "a_m_los", "a_m_nlos", "a_s_los", "a_s_nlos", "n_m", "n_s")
RATE_COLUMNS = ("lambda_s", "M_m", "M_s", "N", "B", "r_total", "r_m_los", "r_m_nlos", "r_s_los",
                "r_s_nlos", "quadrature_error")


def _common(p):
    p.add_argument("--config", default=None, help="config file (default: packaged paper.cfg)")
    p.add_argument("--set", action="append", default=[], metavar="K=V[,K=V]", help="override config keys")
    p.add_argument("--out", default=None, help="output file (default: stdout, no manifest)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--tolerance", type=float, default=1e-3)


def _grid(text):
    """``a:b:step`` or a comma list."""
    try:
        if ":" in text:
            parts = [float(x) for x in text.split(":")]
            if len(parts) != 3 or parts[2] <= 0:
                raise ValueError
            lo, hi, step = parts
            n = int(np.floor((hi - lo) / step + 1e-9)) + 1
            return [round(lo + i * step, 12) for i in range(n)]
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse grid {text!r}; use lo:hi:step or v1,v2,...") from None


def _bracket(text):
    try:
        lo, hi = (float(x) for x in text.split(":"))
    except ValueError:
        raise ConfigError(f"cannot parse bracket {text!r}; use lo:hi") from None
    if not hi > lo:
        raise ConfigError("bracket must satisfy lo < hi")
    return lo, hi


def build_parser():
    parser = argparse.ArgumentParser(prog="hetnet", description="Two-tier massive MIMO HetNet analysis")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    analyze = sub.add_parser("analyze", help="analytic association or rate at one configuration")
    analyze.add_argument("what", choices=("assoc", "rate"))
    analyze.add_argument("--sweep", default=None, metavar="VAR=GRID",
                         help="evaluate over a grid, e.g. lambda_s=1:30:1")
    _common(analyze)

    simulate = sub.add_parser("simulate", help="Monte Carlo rate of the typical user")
    _common(simulate)
    simulate.add_argument("--realizations", type=int, default=1000)
    simulate.add_argument("--window-km", type=float, default=6.0)
    simulate.add_argument("--summary", action="store_true", help="emit only the aggregate row")

    sw = sub.add_parser("sweep", help="evaluate an engine over a grid of one variable")
    sw.add_argument("variable", choices=("lambda_s", "M_m", "B", "varpi", "N"))
    sw.add_argument("--grid", required=True, help="lo:hi:step or v1,v2,...")
    sw.add_argument("--engine", choices=("analytic", "montecarlo", "association"), default="analytic")
    sw.add_argument("--m-total", type=float, default=None)
    sw.add_argument("--realizations", type=int, default=1000)
    sw.add_argument("--window-km", type=float, default=6.0)
    _common(sw)

    opt = sub.add_parser("optimize", help="rate-maximising value of one variable")
    opt.add_argument("variable", choices=("lambda_s", "B", "varpi"))
    opt.add_argument("--bracket", default=None, help="lo:hi search interval")
    opt.add_argument("--m-total", type=float, default=200.0)
    _common(opt)

    rep = sub.add_parser("reproduce", help="write the data behind one figure or all of them")
    rep.add_argument("figure", choices=sorted(FIGURES) + ["all"])
    _common(rep)
    return parser


def _load(args):
    overrides = parse_overrides(args.set)
    path = args.config or default_config_path()
    return parse_config(path, overrides)


def _assoc_row(config, report):
    d = report.as_dict()
    row = {"lambda_s": config.lambda_s}
    row.update({k: d[k] for k in ASSOC_COLUMNS[1:]})
    return row


def _rate_row(config, report):
    row = {"lambda_s": config.lambda_s, "M_m": config.M_m, "M_s": config.M_s, "N": config.N, "B": config.B}
    row.update(report.as_dict())
    return row


def _analyze_rows(args, config, model):
    configs, variable = [config], None
    if args.sweep:
        variable, sep, grid = args.sweep.partition("=")
        if not sep or variable not in ("lambda_s", "M_m", "M_s", "B", "N"):
            raise ConfigError("--sweep expects VAR=GRID with VAR one of lambda_s, M_m, M_s, B, N")
        configs = [apply_variable(config, variable, v) for v in _grid(grid)]
    rows = []
    for c in configs:
        if args.what == "assoc":
            row = _assoc_row(c, association_probabilities(model, c))
            if variable not in (None, "lambda_s"):
                row = {variable: getattr(c, variable), **row}
        else:
            row = _rate_row(c, achievable_rate(model, c))
        rows.append(row)
    return rows


def _simulate_rows(est, summary):
    if summary:
        s = est.summary()
        row = {k: s[k] for k in ("mean_rate", "ci95", "ci_reliable", "n", "user_resamples", "short_cells")}
        for b, f in s["branch_frequencies"].items():
            row[f"freq_{b}"] = f
        return [row]
    return [
        {
            "realization": i,
            "branch": s.branch.value,
            "serving_distance_km": s.serving_distance,
            "sinr": s.sinr,
            "rate": s.rate,
        }
        for i, s in enumerate(est.samples)
    ]


def _sweep_rows(spec, points):
    rows = []
    for p in points:
        row = {spec.variable: p.value, "status": "ok" if p.ok else p.error}
        if spec.engine == "association":
            cols = ASSOC_COLUMNS[1:]
            vals = p.result.as_dict() if p.ok else {}
        elif spec.engine == "analytic":
            cols = RATE_COLUMNS[5:]
            vals = p.result.as_dict() if p.ok else {}
        else:
            cols = ("mean_rate", "ci95", "n")
            vals = p.result.summary() if p.ok else {}
        row.update({c: vals.get(c) for c in cols})
        if p.config is not None:
            row.update(M_m=p.config.M_m, M_s=p.config.M_s)
        else:
            row.update(M_m=None, M_s=None)
        rows.append(row)
    return rows


_DEFAULT_BRACKETS = {"lambda_s": (1.0, 60.0), "B": (0.01, 100.0), "varpi": None}


def _optimize_rows(args, config, model):
    if args.variable == "varpi":
        grid = split_grid(args.m_total, config)
        res = optimize_split(args.m_total, model, config, grid, args.tolerance)
        m_m, m_s = res.split(config).rounded()
        return [{
            "M_total": args.m_total,
            "lambda_s": config.lambda_s,
            "N": config.N,
            "varpi_opt": res.varpi_star,
            "r_opt": res.rate_star,
            "M_m_int": m_m,
            "M_s_int": m_s,
        }]
    bracket = _bracket(args.bracket) if args.bracket else _DEFAULT_BRACKETS[args.variable]
    opt = optimize_parameter(args.variable, model, config, bracket, args.tolerance,
                             log_scale=args.variable == "B")
    return [{
        "variable": args.variable,
        "argmax": opt.argmax,
        "r_opt": opt.value,
        "flag": opt.flag or "",
        "evaluations": opt.evaluations,
    }]


def _write(args, rows, config, model, argv):
    if args.out is None:
        sys.stdout.write(render(rows, args.format))
        return
    emit(rows, args.format, args.out)
    _manifest(args, config, model, argv, [args.out])


def _manifest(args, config, model, argv, outputs):
    manifest = RunManifest(
        command=["hetnet", *argv],
        config_hash=config_hash(config, model),
        seed=args.seed,
        version=__version__,
        started=args._started,
        finished=RunManifest.now(),
        outputs=list(outputs),
    )
    for path in outputs:
        write_manifest(manifest, path)


def run(argv):
    args = build_parser().parse_args(argv)
    args._started = RunManifest.now()
    config, model = _load(args)
    if args.threads < 1:
        raise ConfigError("--threads must be >= 1")

    if args.command == "analyze":
        rows = _analyze_rows(args, config, model)
    elif args.command == "simulate":
        sim = SimConfig(model, config, window_radius=args.window_km, n_realizations=args.realizations,
                        seed=args.seed)
        rows = _simulate_rows(estimate_rate(sim, threads=args.threads), args.summary)
    elif args.command == "sweep":
        spec = SweepSpec(
            variable=args.variable,
            grid=_grid(args.grid),
            model=model,
            config=config,
            engine=args.engine,
            m_total=args.m_total,
            n_realizations=args.realizations,
            seed=args.seed,
            window_radius=args.window_km,
            threads=args.threads,
        )
        rows = _sweep_rows(spec, sweep(spec))
    elif args.command == "optimize":
        rows = _optimize_rows(args, config, model)
    else:
        out_dir = args.out or "."
        figures = sorted(FIGURES) if args.figure == "all" else [args.figure]
        paths = [reproduce(f, out_dir, model, config)[0] for f in figures]
        _manifest(args, config, model, argv, paths)
        for path in paths:
            print(path)
        return EXIT_OK
    _write(args, rows, config, model, argv)
    return EXIT_OK


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        return run(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, DegenerateBranchError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
