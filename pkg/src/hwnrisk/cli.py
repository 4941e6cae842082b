"""Command-line interface.

Every subcommand writes CSV results plus ``manifest.json`` into ``--out``.
Exit codes: 0 success, 2 configuration or usage error, 3 runtime or
resource error.
"""

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .config import load_config, preset
from .errors import (
    CalibrationError,
    ConfigError,
    InvalidParameterError,
    ManifestError,
    NoCoverageError,
    ResourceLimitError,
)
from .geometry import MAX_MATRIX_SIZE
from .pipeline import (
    ASSESS_COLUMNS,
    CALIBRATE_COLUMNS,
    OUTAGE_COLUMNS,
    RUIN_COLUMNS,
    assess,
    calibration_row,
    command_line,
    emit_manifest,
    example_paths,
    outage_table,
    ruin_table,
    sample_patterns,
    sweep,
    verify_manifest,
    write_csv,
)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _str_list(text):
    return [v.strip() for v in text.split(",") if v.strip()]


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _seed(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer seed, got {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError("seed must be >= 0")
    return v


def _alpha_value(v):
    return v if v.upper() == "PPP" else float(v)


# --- command runners: (cfg, args dict, out_dir, n_jobs) -> {file: schema} ----


def _run_sample_geometry(cfg, args, out, n_jobs):
    patterns = sample_patterns(cfg, args.get("source", "tier0"), args.get("count", 1),
                               args.get("max_matrix_size", MAX_MATRIX_SIZE))
    files = {}
    for i, p in enumerate(patterns):
        name = f"pattern_{i:04d}.csv"
        p.to_csv(out / name)
        files[name] = "pattern"
    return files


def _run_outage(cfg, args, out, n_jobs):
    alphas = args.get("alpha_j")
    rows = outage_table(cfg, args.get("zeta_j"), [_alpha_value(a) for a in alphas] if alphas else None, n_jobs)
    write_csv(out / "outage.csv", OUTAGE_COLUMNS, rows)
    return {"outage.csv": "outage"}


def _run_ruin(cfg, args, out, n_jobs):
    rows = ruin_table(cfg, args.get("premium_rate"), args.get("lambda"), n_jobs)
    write_csv(out / "ruin.csv", RUIN_COLUMNS, rows)
    files = {"ruin.csv": "ruin"}
    if args.get("dump_paths"):
        lam = rows[0]["lambda"]
        (_, ruined), (_, survived) = example_paths(cfg, lam)
        ruined.to_csv(out / "path_ruin.csv")
        survived.to_csv(out / "path_no_ruin.csv")
        files.update({"path_ruin.csv": "path", "path_no_ruin.csv": "path"})
    return files


def _run_assess(cfg, args, out, n_jobs):
    report = assess(cfg, n_jobs)
    write_csv(out / "assess.csv", ASSESS_COLUMNS, [report.row(cfg)])
    return {"assess.csv": "assess"}


def _run_sweep(cfg, args, out, n_jobs):
    axis = args["axis"]
    values = args.get("values") or cfg.sweep.get(axis)
    if not values:
        raise ConfigError(f"sweep.{axis}", "no values given on the command line or in the config")
    rows = sweep(cfg, axis, values, n_jobs)
    write_csv(out / "sweep.csv", ASSESS_COLUMNS, rows)
    return {"sweep.csv": "assess"}


def _run_calibrate(cfg, args, out, n_jobs):
    write_csv(out / "calibrate.csv", CALIBRATE_COLUMNS, [calibration_row(cfg, n_jobs=n_jobs)])
    return {"calibrate.csv": "calibrate"}


RUNNERS = {
    "sample-geometry": _run_sample_geometry,
    "outage": _run_outage,
    "ruin": _run_ruin,
    "assess": _run_assess,
    "sweep": _run_sweep,
    "calibrate": _run_calibrate,
}


def run_command(cfg, command, out_dir, n_jobs=1):
    """Produce the result files of a recorded command in ``out_dir``."""
    name = command.get("subcommand")
    if name not in RUNNERS:
        raise ManifestError(f"unknown subcommand {name!r} in manifest")
    return RUNNERS[name](cfg, command.get("args", {}), Path(out_dir), n_jobs)


# --- argument parsing --------------------------------------------------------


def _global_flags(parser, suppress):
    default = argparse.SUPPRESS if suppress else None
    g = parser.add_argument_group("global options")
    g.add_argument("--config", metavar="PATH", default=default,
                   help="scenario JSON file (default: the bundled two-tier preset)")
    g.add_argument("--seed", metavar="N", type=_seed, default=default, help="master seed")
    g.add_argument("--trials", metavar="N", type=_positive_int, default=default, help="network Monte Carlo trials")
    g.add_argument("--paths", metavar="N", type=_positive_int, default=default, help="surplus paths")
    g.add_argument("--out", metavar="DIR", default=default, help="output directory (default: ./out)")
    g.add_argument("--jobs", metavar="N", type=int, default=default,
                   help="parallel workers for network trials; results do not depend on it")


def build_parser():
    parser = argparse.ArgumentParser(prog="hwnrisk", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        _global_flags(p, suppress=True)
        return p

    p = add("sample-geometry", "write sampled point patterns as x,y CSVs")
    p.add_argument("--source", default="tier0", help="tier0, tier1, ... or jammers")
    p.add_argument("--count", type=_positive_int, default=1, help="number of patterns")
    p.add_argument("--max-matrix-size", type=_positive_int, default=MAX_MATRIX_SIZE)

    p = add("outage", "outage probability over a jammer density / repulsion grid")
    p.add_argument("--zeta-j", type=_float_list, help="jammer densities (comma-separated)")
    p.add_argument("--alpha-j", type=_str_list, help="jammer repulsions, PPP allowed (comma-separated)")
    p.add_argument("--method", choices=("bernoulli", "conditional"), help="outage estimator")

    p = add("ruin", "ruin probability over a premium rate / claim intensity grid")
    p.add_argument("--premium-rate", type=_float_list, help="premium rates (comma-separated)")
    p.add_argument("--lambda", dest="lambda_", type=_float_list,
                   help="claim intensities (default: outage x users)")
    p.add_argument("--outage", type=float, help="use this outage probability instead of simulating")
    p.add_argument("--dump-paths", action="store_true", help="also write one ruin and one non-ruin path")
    p.add_argument("--method", choices=("bernoulli", "conditional"), help="outage estimator")

    p = add("assess", "outage, claim intensity, ruin and optional premium calibration")
    p.add_argument("--outage", type=float, help="use this outage probability instead of simulating")
    p.add_argument("--target", type=float, help="also calibrate the premium for this ruin probability")
    p.add_argument("--method", choices=("bernoulli", "conditional"), help="outage estimator")

    p = add("sweep", "assessment rows along one axis")
    p.add_argument("--axis", required=True, choices=("zeta_j", "alpha_j", "premium_rate", "tau_db"))
    p.add_argument("--values", type=_str_list, help="axis values (default: the config's sweep list)")
    p.add_argument("--outage", type=float, help="use this outage probability instead of simulating")
    p.add_argument("--method", choices=("bernoulli", "conditional"), help="outage estimator")

    p = add("calibrate", "smallest premium rate meeting a ruin target")
    p.add_argument("--target", type=float, help="ruin probability target")
    p.add_argument("--resolution", type=float, help="bracket width in premium-rate units")
    p.add_argument("--outage", type=float, help="use this outage probability instead of simulating")
    p.add_argument("--method", choices=("bernoulli", "conditional"), help="outage estimator")

    p = add("verify", "check a manifest and re-run its command")
    p.add_argument("manifest", help="path to manifest.json")
    p.add_argument("--no-rerun", action="store_true", help="only check recorded digests")
    return parser


def _scenario(ns):
    cfg = load_config(ns.config) if ns.config else preset()
    cfg = cfg.with_overrides(seed=ns.seed, trials=ns.trials, paths=ns.paths)
    changes = {}
    if getattr(ns, "method", None):
        changes["outage_method"] = ns.method
    if getattr(ns, "outage", None) is not None:
        if not 0 <= ns.outage <= 1:
            raise ConfigError("simulation.outage_override", f"must lie in [0, 1], got {ns.outage}")
        changes["outage_override"] = ns.outage
    if getattr(ns, "target", None) is not None:
        if not 0 < ns.target < 1:
            raise ConfigError("simulation.calibration_target", f"must lie in (0, 1), got {ns.target}")
        changes["calibration_target"] = ns.target
    if getattr(ns, "resolution", None) is not None:
        if not ns.resolution > 0:
            raise ConfigError("simulation.calibration_resolution", "must be positive")
        changes["calibration_resolution"] = ns.resolution
    return cfg.replace(**changes) if changes else cfg


def _command(ns):
    name = ns.command
    if name == "sample-geometry":
        args = {"source": ns.source, "count": ns.count, "max_matrix_size": ns.max_matrix_size}
    elif name == "outage":
        args = {"zeta_j": ns.zeta_j, "alpha_j": ns.alpha_j}
    elif name == "ruin":
        args = {"premium_rate": ns.premium_rate, "lambda": ns.lambda_, "dump_paths": ns.dump_paths}
    elif name == "sweep":
        args = {"axis": ns.axis, "values": ns.values}
    else:
        args = {}
    return {"subcommand": name, "args": {k: v for k, v in args.items() if v is not None}}


def _verify(ns):
    def runner(cfg, command, out_dir):
        run_command(cfg, command, out_dir, ns.jobs or 1)

    report = verify_manifest(ns.manifest, rerun=not ns.no_rerun, runner=runner)
    print(report)
    return EXIT_OK if report.ok else EXIT_RUNTIME


def main(argv=None):
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        if ns.command == "verify":
            return _verify(ns)
        cfg = _scenario(ns)
        out = Path(ns.out or "out")
        out.mkdir(parents=True, exist_ok=True)
        command = _command(ns)
        files = run_command(cfg, command, out, ns.jobs or 1)
        manifest = emit_manifest(out, cfg, command, files)
        print(f"hwnrisk {command_line(command)}: wrote {', '.join(sorted(files))} and {manifest.name} to {out}")
        for name in sorted(files):
            if files[name] in ("assess", "outage", "ruin", "calibrate"):
                sys.stdout.write((out / name).read_text())
        return EXIT_OK
    except (ConfigError, InvalidParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ResourceLimitError, CalibrationError, NoCoverageError, ManifestError, OSError, RuntimeError) as exc:
        detail = getattr(exc, "diagnostics", None)
        print(f"error: {exc}" + (f" {json.dumps(detail)}" if detail else ""), file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
