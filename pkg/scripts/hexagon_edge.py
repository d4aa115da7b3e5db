"""Edge fluctuations of random lozenge tilings against Tracy-Widom.

Samples the top hole of a column of the scaled hexagon and records the
Kolmogorov-Smirnov distance to F2 for increasing size.
"""

from __future__ import annotations

from dataclasses import dataclass

from _common import emit, parse_config
from dopasym.hexagon import edge_fluctuation_stats


@dataclass(frozen=True)
class EdgeConfig:
    A: int = 1
    B: int = 1
    C: int = 1
    tau: float = 0.25
    ns: tuple = (16, 32, 64)
    samples: int = 5000
    seed: int = 1
    out_dir: str = "results"


def main():
    cfg = parse_config(EdgeConfig, __doc__)
    rows = edge_fluctuation_stats(cfg.A, cfg.B, cfg.C, cfg.tau, cfg.ns, cfg.samples, seed=cfg.seed)
    for r in rows:
        print(f"n={r.n:4d}  KS={r.ks:.4f}  mean={r.values.mean():.4f}")
    emit(cfg, "edge_stats.csv", ["n", "ks", "mean"], [(r.n, r.ks, float(r.values.mean())) for r in rows])


if __name__ == "__main__":
    main()
