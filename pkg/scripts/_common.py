"""Shared plumbing for the experiment scripts: dataclass config from argv, CSV output."""

from __future__ import annotations

import argparse
import dataclasses
import json
from pathlib import Path

from dopasym._io import csv_text, write_text


def parse_config(cls, description: str):
    """Build a ``cls`` instance from ``--field value`` flags or ``--config file.json``."""
    ap = argparse.ArgumentParser(description=description)
    ap.add_argument("--config", help="JSON file with field overrides")
    for f in dataclasses.fields(cls):
        ap.add_argument(f"--{f.name}", default=None, help=f"default: {f.default!r}")
    ns = ap.parse_args()
    cfg = cls()
    updates = {}
    if ns.config:
        updates.update(json.loads(Path(ns.config).read_text()))
    for f in dataclasses.fields(cls):
        raw = getattr(ns, f.name)
        if raw is not None:
            updates[f.name] = json.loads(raw) if f.type not in ("str", str) else raw
    for k, v in updates.items():
        if isinstance(getattr(cfg, k), tuple):
            updates[k] = tuple(v)
    return dataclasses.replace(cfg, **updates)


def emit(cfg, name: str, header, rows) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    write_text(path, csv_text(header, rows, dataclasses.asdict(cfg)))
    print(f"wrote {path}")
    return path
