"""CSV helpers shared by the modules and the CLI."""

from __future__ import annotations

import io
import json
from typing import Iterable, Sequence

import mpmath

from . import __version__


def fmt(value, digits: int = 17) -> str:
    """Format a number for CSV: mpmath values at ``digits`` significant digits."""
    if isinstance(value, (mpmath.mpf, mpmath.mpc)):
        return mpmath.nstr(value, digits)
    if isinstance(value, str):
        return value
    if isinstance(value, bool) or value is None:
        return str(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(float(f"{value:.{digits}g}")) if digits < 17 else repr(float(value))
    if isinstance(value, complex):
        return f"{fmt(value.real, digits)}{'+' if value.imag >= 0 else '-'}{fmt(abs(value.imag), digits)}j"
    try:
        return repr(float(value))
    except (TypeError, ValueError):
        return str(value)


def provenance(config: dict | None = None) -> str:
    cfg = json.dumps(config or {}, sort_keys=True, default=str)
    return f"# dopasym {__version__} config={cfg}"


def csv_text(header: Sequence[str], rows: Iterable[Sequence], config: dict | None = None,
             digits: int = 17, hp_digits: int = 30) -> str:
    """Render rows with a provenance line; mpmath columns use ``hp_digits``."""
    out = io.StringIO()
    out.write(provenance(config) + "\n")
    out.write(",".join(header) + "\n")
    for row in rows:
        cells = [fmt(v, hp_digits if isinstance(v, (mpmath.mpf, mpmath.mpc)) else digits) for v in row]
        out.write(",".join(cells) + "\n")
    return out.getvalue()


def write_text(path, text: str) -> None:
    if path is None or str(path) == "-":
        import sys

        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
