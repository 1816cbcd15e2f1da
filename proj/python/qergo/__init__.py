"""Python bindings for the qergo library."""

import json as _json

from ._qergo import (
    CertificationError,
    ConfigError,
    DomainError,
    Environment,
    Error,
    Marginal,
    Model,
    ReferenceKind,
    Service,
    Stability,
    StabilityError,
    TheoremMode,
    __version__,
    certificate,
    fit_rate,
    lambda_fn,
    loynes,
    simulate,
    tv_decay,
    validate_config,
)
from ._qergo import run as _run


def run(config, seed=None, out=None, workers=0):
    """Run a TOML config or manifest.json; returns a dict with the parsed summary."""
    result = _run(str(config), seed=seed, out=None if out is None else str(out), workers=workers)
    result["summary"] = _json.loads(result["summary"]) if result["summary"] else {}
    return result
