"""Scenario files: JSON with a versioned schema, validated field by field.

A scenario file may be partial. Scalar fields missing from it take their
values from the bundled two-tier preset. ``network.tiers`` is taken from the
preset only when absent, while ``network.jammers`` is never implied: leaving
it out describes a jammer-free network.
"""

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from .actuarial import ClaimDistribution, InsuranceConfig
from .errors import ConfigError, InvalidParameterError
from .geometry import Window
from .hwn import METHODS, JammerConfig, NetworkConfig, TierConfig

SCHEMA_VERSION = 1
SWEEP_AXES = ("zeta_j", "alpha_j", "premium_rate", "tau_db")
PREMIUM_BASES = ("per_user", "aggregate")


def preset_dict():
    """The bundled two-tier scenario as a plain dict."""
    text = resources.files("hwnrisk").joinpath("presets/two_tier.json").read_text()
    return json.loads(text)


@dataclass(frozen=True)
class ScenarioConfig:
    network: NetworkConfig
    premium_rate: float
    initial_reserve: float
    claims: ClaimDistribution
    horizon: float
    premium_basis: str = "per_user"
    trials: int = 2000
    paths: int = 20000
    seed: int = 0
    outage_method: str = "bernoulli"
    outage_override: float | None = None
    calibration_target: float | None = None
    calibration_resolution: float = 1e-3
    sweep: dict = field(default_factory=dict)

    @property
    def user_count(self):
        return self.network.user_count

    def aggregate_premium(self, rate=None):
        """Premium income rate c of the surplus model for a given input rate."""
        rate = self.premium_rate if rate is None else rate
        return rate * self.user_count if self.premium_basis == "per_user" else rate

    def insurance(self, claim_intensity, premium_rate=None):
        return InsuranceConfig(
            initial_reserve=self.initial_reserve,
            premium_rate=self.aggregate_premium(premium_rate),
            claim_intensity=claim_intensity,
            claims=self.claims,
            horizon=self.horizon,
        )

    def replace(self, **changes):
        return replace(self, **changes)

    def with_overrides(self, seed=None, trials=None, paths=None):
        changes = {}
        if seed is not None:
            changes["seed"] = int(seed)
        if trials is not None:
            if int(trials) < 1:
                raise ConfigError("simulation.trials", "must be a positive integer")
            changes["trials"] = int(trials)
        if paths is not None:
            if int(paths) < 1:
                raise ConfigError("simulation.paths", "must be a positive integer")
            changes["paths"] = int(paths)
        return self.replace(**changes) if changes else self

    def to_dict(self):
        net = self.network

        def transmitter(t):
            return {
                "power_dbm": t.power_dbm,
                "density": t.density,
                "alpha": t.alpha,
                "pathloss_exponent": t.pathloss_exponent,
            }

        return {
            "schema_version": SCHEMA_VERSION,
            "network": {
                "tiers": [transmitter(t) for t in net.tiers],
                "jammers": None if net.jammers is None else transmitter(net.jammers),
                "reuse_factor": net.reuse_factor,
                "noise_dbm": net.noise_dbm,
                "sinr_threshold_db": net.sinr_threshold_db,
                "window_radius": net.window.radius,
                "user_count": net.user_count,
            },
            "insurance": {
                "initial_reserve": self.initial_reserve,
                "premium_rate": self.premium_rate,
                "premium_basis": self.premium_basis,
                "claims": {"kind": self.claims.kind, "value": self.claims.value},
                "horizon": self.horizon,
            },
            "simulation": {
                "trials": self.trials,
                "paths": self.paths,
                "seed": self.seed,
                "outage_method": self.outage_method,
                "outage_override": self.outage_override,
                "calibration_target": self.calibration_target,
                "calibration_resolution": self.calibration_resolution,
            },
            "sweep": {k: list(v) for k, v in sorted(self.sweep.items())},
        }

    def digest(self):
        return config_digest(self.to_dict())


def canonical_json(data):
    return json.dumps(data, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_digest(data):
    return hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()


def _number(block, key, path, *, lo=None, hi=None, lo_open=False, integer=False, optional=False):
    where = f"{path}.{key}"
    if key not in block:
        raise ConfigError(where, "missing")
    v = block[key]
    if v is None and optional:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(where, f"expected a number, got {v!r}")
    if not math.isfinite(v):
        raise ConfigError(where, "must be finite")
    if integer and int(v) != v:
        raise ConfigError(where, f"expected an integer, got {v!r}")
    if lo is not None and (v <= lo if lo_open else v < lo):
        raise ConfigError(where, f"must be {'>' if lo_open else '>='} {lo}, got {v}")
    if hi is not None and v > hi:
        raise ConfigError(where, f"must be <= {hi}, got {v}")
    return int(v) if integer else float(v)


def _alpha(block, path):
    v = block.get("alpha")
    if v is None or (isinstance(v, str) and v.upper() == "PPP"):
        return None
    a = _number(block, "alpha", path)
    if not 0 < a <= 1:
        raise ConfigError(f"{path}.alpha", f"must lie in (0, 1] or be \"PPP\", got {a}")
    return a


def _transmitter(block, path, cls):
    if not isinstance(block, dict):
        raise ConfigError(path, "expected an object")
    try:
        return cls(
            power_dbm=_number(block, "power_dbm", path),
            density=_number(block, "density", path, lo=0),
            alpha=_alpha(block, path),
            pathloss_exponent=_number(block, "pathloss_exponent", path, lo=2, lo_open=True),
        )
    except InvalidParameterError as exc:
        raise ConfigError(path, str(exc)) from None


def _merge(defaults, given):
    out = copy.deepcopy(defaults)
    for k, v in given.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def parse_config(data):
    """Validate a (possibly partial) scenario dict into a ScenarioConfig."""
    if not isinstance(data, dict):
        raise ConfigError("<root>", "expected a JSON object")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"unsupported version {version!r}, expected {SCHEMA_VERSION}")
    known = {"schema_version", "network", "insurance", "simulation", "sweep"}
    for k in data:
        if k not in known:
            raise ConfigError(k, "unknown section")

    preset = preset_dict()
    net_given = data.get("network", {})
    if not isinstance(net_given, dict):
        raise ConfigError("network", "expected an object")
    net = _merge({k: v for k, v in preset["network"].items() if k != "jammers"}, net_given)
    if "network" not in data:
        net["jammers"] = preset["network"]["jammers"]

    tiers_raw = net.get("tiers")
    if not isinstance(tiers_raw, list) or not tiers_raw:
        raise ConfigError("network.tiers", "expected a non-empty list")
    tiers = [_transmitter(t, f"network.tiers[{i}]", TierConfig) for i, t in enumerate(tiers_raw)]
    jammers = net.get("jammers")
    jammers = None if jammers is None else _transmitter(jammers, "network.jammers", JammerConfig)

    p = "network"
    reuse = _number(net, "reuse_factor", p, lo=0, hi=1, lo_open=True)
    noise = _number(net, "noise_dbm", p, optional=True) if "noise_dbm" in net else None
    tau = _number(net, "sinr_threshold_db", p)
    radius = _number(net, "window_radius", p, lo=0, lo_open=True)
    users = _number(net, "user_count", p, lo=1, integer=True)
    network = NetworkConfig(tiers, jammers, reuse, noise, tau, Window(radius), users)

    ins = _merge(preset["insurance"], data.get("insurance", {}))
    p = "insurance"
    basis = ins.get("premium_basis", "per_user")
    if basis not in PREMIUM_BASES:
        raise ConfigError("insurance.premium_basis", f"must be one of {PREMIUM_BASES}, got {basis!r}")
    claims_raw = ins.get("claims")
    if not isinstance(claims_raw, dict):
        raise ConfigError("insurance.claims", "expected an object")
    kind = claims_raw.get("kind")
    if kind not in ("deterministic", "exponential"):
        raise ConfigError("insurance.claims.kind", f"must be 'deterministic' or 'exponential', got {kind!r}")
    claims = ClaimDistribution(kind, _number(claims_raw, "value", "insurance.claims", lo=0, lo_open=True))

    sim = _merge(preset["simulation"], data.get("simulation", {}))
    s = "simulation"
    method = sim.get("outage_method", "bernoulli")
    if method not in METHODS:
        raise ConfigError("simulation.outage_method", f"must be one of {METHODS}, got {method!r}")

    sweep_raw = data.get("sweep", preset.get("sweep", {}))
    if not isinstance(sweep_raw, dict):
        raise ConfigError("sweep", "expected an object")
    sweep = {}
    for axis, values in sweep_raw.items():
        if axis not in SWEEP_AXES:
            raise ConfigError(f"sweep.{axis}", f"unknown axis; expected one of {SWEEP_AXES}")
        if not isinstance(values, list) or not values:
            raise ConfigError(f"sweep.{axis}", "expected a non-empty list")
        sweep[axis] = tuple(values)

    return ScenarioConfig(
        network=network,
        premium_rate=_number(ins, "premium_rate", p, lo=0),
        initial_reserve=_number(ins, "initial_reserve", p, lo=0),
        claims=claims,
        horizon=_number(ins, "horizon", p, lo=0, lo_open=True),
        premium_basis=basis,
        trials=_number(sim, "trials", s, lo=1, integer=True),
        paths=_number(sim, "paths", s, lo=1, integer=True),
        seed=_number(sim, "seed", s, lo=0, integer=True),
        outage_method=method,
        outage_override=_number(sim, "outage_override", s, lo=0, hi=1, optional=True)
        if "outage_override" in sim
        else None,
        calibration_target=_number(sim, "calibration_target", s, lo=0, hi=1, lo_open=True, optional=True)
        if "calibration_target" in sim
        else None,
        calibration_resolution=_number(sim, "calibration_resolution", s, lo=0, lo_open=True),
        sweep=sweep,
    )


def load_config(path):
    """Read and validate a scenario file; errors name the offending field."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read: {exc.strerror or exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_config(data)


def preset():
    return parse_config(preset_dict())
