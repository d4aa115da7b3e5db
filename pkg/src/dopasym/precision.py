"""Working-precision policy for the high-precision parts of the package."""

from __future__ import annotations

import os

import mpmath

DEFAULT_BITS = 256
ENV_VAR = "DOPASYM_PRECISION_BITS"


def default_bits() -> int:
    """Mantissa size used when a caller does not ask for one.

    Read from ``DOPASYM_PRECISION_BITS`` on every call so that the CLI and
    tests can change it without reloading modules.
    """
    raw = os.environ.get(ENV_VAR)
    if raw is None or raw.strip() == "":
        return DEFAULT_BITS
    bits = int(raw)
    if bits < 53:
        raise ValueError(f"{ENV_VAR} must be at least 53, got {bits}")
    return bits


def workprec(bits: int | None):
    """Context manager setting the mpmath mantissa to ``bits``."""
    return mpmath.workprec(default_bits() if bits is None else int(bits))
