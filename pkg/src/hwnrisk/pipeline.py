"""End-to-end assessment: network outage -> claim intensity -> insurer ruin.

Every quantity here is a deterministic function of the scenario and its
master seed. Sweeps keep common random numbers across their rows: jammer
densities share one dilated draw, all rows share the tier draws, and ruin
rows share one master claim stream thinned to each row's intensity.
"""

import csv
import hashlib
import io
import json
import math
import shlex
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .actuarial import RuinEstimate, calibrate_premium, path_infima, ruin_probability, simulate_surplus_path
from .config import SCHEMA_VERSION, SWEEP_AXES, config_digest, parse_config
from .errors import ConfigError, InvalidParameterError, ManifestError, ResourceLimitError
from .geometry import MAX_MATRIX_SIZE, ProcessSpec, sample_pattern
from .hwn import JammerConfig, JammerVariant, OutageEstimate, outage_samples, summarize
from .seeding import child_seed

MANIFEST_SCHEMA_VERSION = 1

ASSESS_COLUMNS = (
    "axis", "value", "zeta_j", "alpha_j", "tau_db", "premium_rate",
    "outage", "outage_ci", "lambda", "ruin", "ruin_ci",
    "calibrated_premium", "trials", "paths", "seed",
)
OUTAGE_COLUMNS = ("zeta_j", "alpha_j", "outage", "ci_halfwidth", "trials", "seed")
RUIN_COLUMNS = ("premium_rate", "lambda", "ruin", "ci_halfwidth", "paths", "seed")
CALIBRATE_COLUMNS = (
    "target", "premium_rate", "lower", "ruin_at_premium", "ruin_at_lower",
    "lambda", "evaluations", "paths", "seed",
)
PATH_COLUMNS = ("t", "reserve")
PATTERN_COLUMNS = ("x", "y")

#: CSV schema name -> (version, columns); pinned by golden tests.
CSV_SCHEMAS = {
    "assess": (1, ASSESS_COLUMNS),
    "outage": (1, OUTAGE_COLUMNS),
    "ruin": (1, RUIN_COLUMNS),
    "calibrate": (1, CALIBRATE_COLUMNS),
    "path": (1, PATH_COLUMNS),
    "pattern": (1, PATTERN_COLUMNS),
}


def alpha_label(alpha):
    return "PPP" if alpha is None else alpha


def parse_alpha(value):
    """``None``/``"PPP"`` for Poisson, otherwise a repulsion in (0, 1]."""
    if value is None or (isinstance(value, str) and value.strip().upper() == "PPP"):
        return None
    a = float(value)
    if not 0 < a <= 1:
        raise InvalidParameterError(f"alpha must lie in (0, 1] or be PPP, got {value!r}")
    return a


def _alpha_order(alpha):
    return 0.0 if alpha is None else alpha


@dataclass(frozen=True)
class AssessmentReport:
    outage: OutageEstimate
    outage_probability: float  # the value fed to the claim model (may be overridden)
    claim_intensity: float
    ruin: RuinEstimate
    calibration: object  # CalibrationResult in input premium units, or None
    config_digest: str
    seed: int
    tool_version: str = __version__

    def row(self, cfg, axis="", value=""):
        net = cfg.network
        jam = net.jammers
        return {
            "axis": axis,
            "value": value,
            "zeta_j": 0.0 if jam is None else jam.density,
            "alpha_j": "" if jam is None else alpha_label(jam.alpha),
            "tau_db": net.sinr_threshold_db,
            "premium_rate": cfg.premium_rate,
            "outage": self.outage_probability,
            "outage_ci": self.outage.half_width,
            "lambda": self.claim_intensity,
            "ruin": self.ruin.probability,
            "ruin_ci": self.ruin.half_width,
            "calibrated_premium": "" if self.calibration is None else self.calibration.premium,
            "trials": self.outage.trials,
            "paths": self.ruin.paths,
            "seed": self.seed,
        }


def _outage(cfg, variants=None, n_jobs=1):
    samples = outage_samples(cfg.network, cfg.trials, cfg.seed, variants, method=cfg.outage_method, n_jobs=n_jobs)
    return [summarize(np.ascontiguousarray(samples[:, j]), cfg.seed, cfg.outage_method)
            for j in range(samples.shape[1])]


def _claim_intensity(cfg, estimate):
    p = estimate.probability if cfg.outage_override is None else cfg.outage_override
    return p, p * cfg.user_count


def _calibrate(cfg, claim_intensity):
    if cfg.calibration_target is None:
        return None
    factor = cfg.aggregate_premium(1.0)
    result = calibrate_premium(
        cfg.insurance(claim_intensity), cfg.calibration_target, cfg.paths, cfg.seed,
        resolution=cfg.calibration_resolution * factor,
    )
    # report in the units the premium rate was given in
    return result.__class__(
        result.premium / factor, result.lower / factor,
        result.ruin_at_premium, result.ruin_at_lower, result.evaluations,
    )


def assess(cfg, n_jobs=1):
    """Outage estimate, lambda = p * U, ruin estimate and (if requested) calibrated premium."""
    est = _outage(cfg, n_jobs=n_jobs)[0]
    p, lam = _claim_intensity(cfg, est)
    ruin = ruin_probability(cfg.insurance(lam), cfg.paths, cfg.seed)
    return AssessmentReport(est, p, lam, ruin, _calibrate(cfg, lam), cfg.digest(), cfg.seed)


def _require_jammers(cfg, axis):
    if cfg.network.jammers is None:
        raise ConfigError("network.jammers", f"a {axis} sweep needs a jammer block")
    return cfg.network.jammers


def _axis_values(axis, values):
    if axis not in SWEEP_AXES:
        raise InvalidParameterError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")
    values = list(values)
    if not values:
        raise InvalidParameterError("a sweep needs at least one value")
    if axis == "alpha_j":
        values = sorted({parse_alpha(v) for v in values}, key=_alpha_order)
    else:
        values = sorted({float(v) for v in values})
        if any(not math.isfinite(v) for v in values):
            raise InvalidParameterError(f"{axis} values must be finite")
        if axis in ("zeta_j", "premium_rate") and values[0] < 0:
            raise InvalidParameterError(f"{axis} values must be >= 0")
    return values


def sweep(cfg, axis, values, n_jobs=1):
    """One assessment row per axis value, sorted by value, coupled across rows."""
    values = _axis_values(axis, values)
    net = cfg.network
    if axis == "zeta_j":
        jam = _require_jammers(cfg, axis)
        estimates = _outage(cfg, [JammerVariant.of(jam, values)], n_jobs)
        scenarios = [cfg.replace(network=net.replace(jammers=jam.__class__(
            jam.power_dbm, v, jam.alpha, jam.pathloss_exponent))) for v in values]
    elif axis == "alpha_j":
        jam = _require_jammers(cfg, axis)
        jams = [JammerConfig(jam.power_dbm, jam.density, a, jam.pathloss_exponent) for a in values]
        estimates = _outage(cfg, [JammerVariant.of(j) for j in jams], n_jobs)
        scenarios = [cfg.replace(network=net.replace(jammers=j)) for j in jams]
    elif axis == "tau_db":
        scenarios = [cfg.replace(network=net.replace(sinr_threshold_db=v)) for v in values]
        # tier and jammer draws depend only on the seed, so rows share them
        estimates = [_outage(s, n_jobs=n_jobs)[0] for s in scenarios]
    else:
        est = _outage(cfg, n_jobs=n_jobs)[0]
        estimates = [est] * len(values)
        scenarios = [cfg.replace(premium_rate=v) for v in values]

    intensities = [_claim_intensity(s, e) for s, e in zip(scenarios, estimates)]
    ref = max(lam for _, lam in intensities)
    rows = []
    for v, s, est, (p, lam) in zip(values, scenarios, estimates, intensities):
        ruin = ruin_probability(s.insurance(lam), s.paths, s.seed, reference_intensity=ref)
        report = AssessmentReport(est, p, lam, ruin, _calibrate(s, lam), s.digest(), s.seed)
        rows.append(report.row(s, axis, alpha_label(v) if axis == "alpha_j" else v))
    return rows


def outage_table(cfg, zeta_j=None, alpha_j=None, n_jobs=1):
    """Outage over a (alpha_J, zeta_J) grid; one coupled jammer draw per alpha_J."""
    net = cfg.network
    if net.jammers is None:
        est = _outage(cfg, n_jobs=n_jobs)[0]
        return [_outage_row(0.0, "", est)]
    jam = net.jammers
    zetas = _axis_values("zeta_j", zeta_j if zeta_j else [jam.density])
    alphas = _axis_values("alpha_j", alpha_j if alpha_j else [alpha_label(jam.alpha)])
    variants = [JammerVariant.of(JammerConfig(jam.power_dbm, zetas[-1], a, jam.pathloss_exponent), zetas)
                for a in alphas]
    estimates = _outage(cfg, variants, n_jobs)
    rows = []
    for i, a in enumerate(alphas):
        for j, z in enumerate(zetas):
            rows.append(_outage_row(z, alpha_label(a), estimates[i * len(zetas) + j]))
    return rows


def _outage_row(zeta, alpha, est):
    return {"zeta_j": zeta, "alpha_j": alpha, "outage": est.probability,
            "ci_halfwidth": est.half_width, "trials": est.trials, "seed": est.seed}


def ruin_table(cfg, premium_rates=None, intensities=None, n_jobs=1):
    """Ruin over a (premium rate, lambda) grid on one master claim stream.

    Without explicit intensities lambda comes from the scenario's outage.
    """
    if not intensities:
        est = None if cfg.outage_override is not None else _outage(cfg, n_jobs=n_jobs)[0]
        intensities = [_claim_intensity(cfg, est)[1]]
    lams = sorted({float(v) for v in intensities})
    if any(not (v >= 0 and math.isfinite(v)) for v in lams):
        raise InvalidParameterError("claim intensities must be finite and >= 0")
    rates = _axis_values("premium_rate", premium_rates if premium_rates else [cfg.premium_rate])
    ref = lams[-1]
    rows = []
    for c in rates:
        for lam in lams:
            r = ruin_probability(cfg.insurance(lam, c), cfg.paths, cfg.seed, reference_intensity=ref)
            rows.append({"premium_rate": c, "lambda": lam, "ruin": r.probability,
                         "ci_halfwidth": r.half_width, "paths": r.paths, "seed": r.seed})
    return rows


def coupled_infima(cfg, intensities, premium_rates):
    """Path infima on a common claim stream, shape (len(rates), len(intensities), paths)."""
    ref = max(intensities)
    return np.array([[path_infima(cfg.insurance(lam, c), cfg.paths, cfg.seed, reference_intensity=ref)
                      for lam in intensities] for c in premium_rates])


def calibration_row(cfg, claim_intensity=None, n_jobs=1):
    if cfg.calibration_target is None:
        raise ConfigError("simulation.calibration_target", "required for calibration")
    if claim_intensity is None:
        est = None if cfg.outage_override is not None else _outage(cfg, n_jobs=n_jobs)[0]
        claim_intensity = _claim_intensity(cfg, est)[1]
    res = _calibrate(cfg, claim_intensity)
    return {"target": cfg.calibration_target, "premium_rate": res.premium, "lower": res.lower,
            "ruin_at_premium": res.ruin_at_premium, "ruin_at_lower": res.ruin_at_lower,
            "lambda": claim_intensity, "evaluations": res.evaluations, "paths": cfg.paths, "seed": cfg.seed}


def example_paths(cfg, claim_intensity, max_scan=100_000):
    """One ruined and one surviving surplus path, found by scanning path seeds upward from the master seed."""
    ins = cfg.insurance(claim_intensity)
    found = {}
    for k in range(max_scan):
        path = simulate_surplus_path(ins, cfg.seed + k)
        found.setdefault(path.ruined, (cfg.seed + k, path))
        if len(found) == 2:
            return found[True], found[False]
    missing = "ruin" if True not in found else "non-ruin"
    raise ResourceLimitError(f"no {missing} path within {max_scan} seeds; adjust premium or claim intensity")


def sample_patterns(cfg, source="tier0", count=1, max_matrix_size=MAX_MATRIX_SIZE):
    """Point patterns of one tier (``tier<k>``) or of the jammer field (``jammers``)."""
    net = cfg.network
    if source == "jammers":
        tc = _require_jammers(cfg, "jammer pattern")
    elif source.startswith("tier") and source[4:].isdigit() and int(source[4:]) < len(net.tiers):
        tc = net.tiers[int(source[4:])]
    else:
        raise InvalidParameterError(f"unknown pattern source {source!r}; use tier0..tier{len(net.tiers) - 1} or jammers")
    spec = ProcessSpec(tc.density, tc.alpha)
    return [sample_pattern(spec, net.window, child_seed(cfg.seed, f"pattern-{source}", i), max_matrix_size)
            for i in range(int(count))]


# --- CSV and manifest output -------------------------------------------------


def format_value(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def csv_text(columns, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(row[c]) for c in columns])
    return buf.getvalue()


def write_csv(path, columns, rows):
    path = Path(path)
    try:
        path.write_text(csv_text(columns, rows))
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from None
    return path


def file_digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def emit_manifest(out_dir, cfg, command, files):
    """Write manifest.json next to the result files and return its path.

    ``files`` maps a file name inside ``out_dir`` to its CSV schema name.
    ``command`` is the subcommand and its arguments, enough to re-run.
    """
    out_dir = Path(out_dir)
    config = cfg.to_dict()
    manifest = {
        "manifest_schema_version": MANIFEST_SCHEMA_VERSION,
        "config_schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "command": command,
        "config": config,
        "config_digest": config_digest(config),
        "seed": cfg.seed,
        "trials": cfg.trials,
        "paths": cfg.paths,
        "results": {
            name: {
                "schema": schema,
                "schema_version": CSV_SCHEMAS[schema][0],
                "sha256": file_digest(out_dir / name),
            }
            for name, schema in sorted(files.items())
        },
    }
    path = out_dir / "manifest.json"
    try:
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from None
    return path


@dataclass(frozen=True)
class VerificationReport:
    ok: bool
    problems: tuple

    def __str__(self):
        return "manifest verified" if self.ok else "verification failed:\n  " + "\n  ".join(self.problems)


def read_manifest(path):
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest {path} is not valid JSON: {exc.msg}") from None
    for key in ("config", "config_digest", "results", "command", "manifest_schema_version"):
        if key not in data:
            raise ManifestError(f"manifest {path} lacks {key!r}")
    if data["manifest_schema_version"] != MANIFEST_SCHEMA_VERSION:
        raise ManifestError(f"unsupported manifest schema version {data['manifest_schema_version']!r}")
    return data


def verify_manifest(path, rerun=True, runner=None):
    """Check recorded digests, and optionally re-run the command and compare bytes.

    ``runner(cfg, command, out_dir)`` re-creates the result files; the CLI
    supplies its own dispatcher.
    """
    import tempfile

    path = Path(path)
    data = read_manifest(path)
    problems = []
    if config_digest(data["config"]) != data["config_digest"]:
        problems.append("config digest does not match the recorded config")
    for name, info in sorted(data["results"].items()):
        f = path.parent / name
        if not f.exists():
            problems.append(f"{name}: missing")
        elif file_digest(f) != info["sha256"]:
            problems.append(f"{name}: sha256 differs from the manifest")
    if rerun and not problems:
        if runner is None:
            raise ManifestError("re-running needs a runner")
        try:
            cfg = parse_config(data["config"])
        except ConfigError as exc:
            return VerificationReport(False, (f"recorded config is invalid: {exc}",))
        with tempfile.TemporaryDirectory() as tmp:
            runner(cfg, data["command"], Path(tmp))
            for name, info in sorted(data["results"].items()):
                f = Path(tmp) / name
                if not f.exists() or file_digest(f) != info["sha256"]:
                    problems.append(f"{name}: re-run does not reproduce the recorded bytes")
    return VerificationReport(not problems, tuple(problems))


def command_line(command):
    """Shell-style rendering of a recorded command, for logs."""
    args = command.get("args", {})
    parts = [command.get("subcommand", "?")]
    for k, v in sorted(args.items()):
        if v is None or v is False:
            continue
        flag = "--" + k.replace("_", "-")
        if v is True:
            parts.append(flag)
        elif isinstance(v, list):
            parts += [flag, ",".join(format_value(x) for x in v)]
        else:
            parts += [flag, format_value(v)]
    return shlex.join(parts)


__all__ = [
    "ASSESS_COLUMNS", "CALIBRATE_COLUMNS", "CSV_SCHEMAS", "OUTAGE_COLUMNS", "PATH_COLUMNS",
    "PATTERN_COLUMNS", "RUIN_COLUMNS", "AssessmentReport", "VerificationReport", "assess",
    "calibration_row", "coupled_infima", "csv_text", "emit_manifest",
    "example_paths", "outage_table", "read_manifest", "ruin_table", "sample_patterns", "sweep",
    "verify_manifest", "write_csv",
]
