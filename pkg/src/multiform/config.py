import math
import os
from dataclasses import dataclass

from multiform.errors import MultiFormError

DEFAULTS = {
    "MULTIFORM_REL_TOL": "1e-9",
    "MULTIFORM_ABS_TOL": "1e-12",
    "MULTIFORM_TOL": "1e-8",
    "MULTIFORM_CLUSTER_TOL": "1e-6",
    "MULTIFORM_CONDITION_LIMIT": "1e12",
    "MULTIFORM_LOG_DIR": "logs",
    "MULTIFORM_LOG_LEVEL": "INFO",
}

_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


@dataclass(frozen=True)
class Config:
    rel_tol: float
    abs_tol: float
    residual_tol: float
    cluster_tol: float
    condition_limit: float
    log_dir: str
    log_level: str


def _read_float(environ, name):
    raw = environ.get(name, DEFAULTS[name])
    try:
        value = float(raw)
    except ValueError:
        raise MultiFormError(f"{name} must be a number, got {raw!r}", "INVALID_SPEC", variable=name)
    if not math.isfinite(value) or value < 0:
        raise MultiFormError(f"{name} must be finite and nonnegative, got {raw!r}", "INVALID_SPEC", variable=name)
    return value


def load_config(environ=None):
    """
    Read settings from the environment, falling back to DEFAULTS.

    Args:
        environ (Mapping, optional): Source of variables, os.environ by default

    Returns:
        Config: Parsed settings
    """
    environ = os.environ if environ is None else environ
    level = environ.get("MULTIFORM_LOG_LEVEL", DEFAULTS["MULTIFORM_LOG_LEVEL"]).upper()
    if level not in _LEVELS:
        raise MultiFormError(f"Unknown log level: {level}", "INVALID_SPEC", variable="MULTIFORM_LOG_LEVEL")
    return Config(
        rel_tol=_read_float(environ, "MULTIFORM_REL_TOL"),
        abs_tol=_read_float(environ, "MULTIFORM_ABS_TOL"),
        residual_tol=_read_float(environ, "MULTIFORM_TOL"),
        cluster_tol=_read_float(environ, "MULTIFORM_CLUSTER_TOL"),
        condition_limit=_read_float(environ, "MULTIFORM_CONDITION_LIMIT"),
        log_dir=environ.get("MULTIFORM_LOG_DIR", DEFAULTS["MULTIFORM_LOG_DIR"]),
        log_level=level,
    )
