"""Arctic boundary of the hexagon from band endpoints, checked against the inscribed ellipse."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from _common import emit, parse_config
from dopasym.hexagon import arctic_boundary, ellipse_residual, inscribed_ellipse


@dataclass(frozen=True)
class ArcticConfig:
    A: float = 2.0
    B: float = 1.0
    C: float = 1.5
    points: int = 50
    out_dir: str = "results"


def main():
    cfg = parse_config(ArcticConfig, __doc__)
    E, _ = inscribed_ellipse(cfg.A, cfg.B, cfg.C)
    taus = np.linspace(0, cfg.A + cfg.B, cfg.points + 2)[1:-1]
    rows = []
    for p in arctic_boundary(cfg.A, cfg.B, cfg.C, taus):
        res = max(ellipse_residual(E, p.X, p.Y_alpha), ellipse_residual(E, p.X, p.Y_beta))
        rows.append((p.X, p.Y_alpha, p.Y_beta, res))
    print(f"max ellipse residual {max(r[3] for r in rows):.2e} over {len(rows)} points")
    emit(cfg, "arctic.csv", ["X", "Y_alpha", "Y_beta", "ellipse_residual"], rows)


if __name__ == "__main__":
    main()
