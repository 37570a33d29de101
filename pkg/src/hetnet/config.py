"""Flat ``key = value`` configuration files.

Powers are given in dBm and path-loss intercepts as gains in dB; both are
converted to linear units on load.  Both tiers use the linear 3GPP LoS
profile with the configured ``d_los_km``.
"""

import hashlib
import math
from importlib import resources

from .channel import LoSProfile, NetworkConfig, PropagationModel, dbm_to_mw, mw_to_dbm
from .errors import ConfigError

__all__ = [
    "KEYS",
    "parse_config",
    "parse_config_text",
    "read_values",
    "parse_overrides",
    "build",
    "format_config",
    "config_hash",
    "default_config_path",
]

KEYS = (
    "lambda_m",
    "lambda_s",
    "lambda_u",
    "M_m",
    "M_s",
    "N",
    "P_m_dBm",
    "P_s_dBm",
    "B",
    "tau",
    "p_p_dBm",
    "sigma2_dBm",
    "d_los_km",
    "L_los_dB",
    "L_nlos_dB",
    "alpha_los",
    "alpha_nlos",
)
_INTEGER_KEYS = ("N", "tau")


def default_config_path():
    return resources.files("hetnet").joinpath("paper.cfg")


def _parse_value(key, text):
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as a number") from None
    if not math.isfinite(value):
        raise ConfigError(f"{key}: value must be finite (got {text!r})")
    if key in _INTEGER_KEYS:
        if value != int(value):
            raise ConfigError(f"{key} must be an integer (got {text!r})")
        return int(value)
    return value


def read_values(text, source="<config>"):
    """Parse config text into a ``{key: number}`` dict without validation of completeness."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, _, value = (part.strip() for part in line.partition("="))
        if key not in KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = _parse_value(key, value)
    return values


def parse_overrides(items):
    """``["a=1,b=2", "c=3"]`` -> ``{"a": 1.0, "b": 2.0, "c": 3.0}``."""
    values = {}
    for item in items or ():
        for part in item.split(","):
            part = part.strip()
            if not part:
                continue
            if "=" not in part:
                raise ConfigError(f"override {part!r} is not of the form key=value")
            key, _, value = (p.strip() for p in part.partition("="))
            if key not in KEYS:
                raise ConfigError(f"unknown key {key!r} in override")
            values[key] = _parse_value(key, value)
    return values


def build(values):
    """Validated ``(NetworkConfig, PropagationModel)`` from a complete value dict."""
    missing = [k for k in KEYS if k not in values]
    if missing:
        raise ConfigError("missing config keys: " + ", ".join(missing))
    unknown = sorted(set(values) - set(KEYS))
    if unknown:
        raise ConfigError("unknown config keys: " + ", ".join(unknown))
    v = values
    config = NetworkConfig(
        lambda_m=v["lambda_m"],
        lambda_s=v["lambda_s"],
        lambda_u=v["lambda_u"],
        M_m=v["M_m"],
        M_s=v["M_s"],
        N=v["N"],
        P_m=float(dbm_to_mw(v["P_m_dBm"])),
        P_s=float(dbm_to_mw(v["P_s_dBm"])),
        B=v["B"],
        tau=v["tau"],
        p_p=float(dbm_to_mw(v["p_p_dBm"])),
        sigma2=float(dbm_to_mw(v["sigma2_dBm"])),
    )
    profile = LoSProfile.linear_3gpp(v["d_los_km"])
    model = PropagationModel(
        L_los=10.0 ** (v["L_los_dB"] / 10.0),
        L_nlos=10.0 ** (v["L_nlos_dB"] / 10.0),
        alpha_los=v["alpha_los"],
        alpha_nlos=v["alpha_nlos"],
        los_profile_mbs=profile,
        los_profile_scb=profile,
    )
    return config, model


def parse_config_text(text, overrides=None, source="<config>"):
    values = read_values(text, source)
    values.update(overrides or {})
    return build(values)


def parse_config(path, overrides=None):
    """Load ``path`` and return ``(NetworkConfig, PropagationModel)``."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc.strerror}") from exc
    return parse_config_text(text, overrides, source=str(path))


def to_values(config, model):
    profile = model.los_profile_mbs
    if profile.kind != "linear3gpp" or model.los_profile_scb != profile:
        raise ConfigError("only a shared linear 3GPP LoS profile can be written to a config file")
    return {
        "lambda_m": config.lambda_m,
        "lambda_s": config.lambda_s,
        "lambda_u": config.lambda_u,
        "M_m": config.M_m,
        "M_s": config.M_s,
        "N": config.N,
        "P_m_dBm": float(mw_to_dbm(config.P_m)),
        "P_s_dBm": float(mw_to_dbm(config.P_s)),
        "B": config.B,
        "tau": config.tau,
        "p_p_dBm": float(mw_to_dbm(config.p_p)),
        "sigma2_dBm": float(mw_to_dbm(config.sigma2)),
        "d_los_km": profile.d_los,
        "L_los_dB": 10.0 * math.log10(model.L_los),
        "L_nlos_dB": 10.0 * math.log10(model.L_nlos),
        "alpha_los": model.alpha_los,
        "alpha_nlos": model.alpha_nlos,
    }


def format_config(config, model):
    """Config text that parses back to equal objects."""
    lines = []
    for key, value in to_values(config, model).items():
        text = str(value) if isinstance(value, int) else repr(float(value))
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


def config_hash(config, model):
    return hashlib.sha256(format_config(config, model).encode()).hexdigest()
