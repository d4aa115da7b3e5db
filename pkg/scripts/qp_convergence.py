"""Grid refinement study for the discretized equilibrium problem.

Compares the QP cell masses against the closed-form Hahn measure for a
ladder of grid sizes and reports the L1 error and observed order.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from _common import emit, parse_config
from dopasym.equilibrium import hahn_equilibrium, hahn_field, solve_equilibrium_qp
from dopasym.lattice import UniformDensity


@dataclass(frozen=True)
class QPConfig:
    A: float = 3.0
    B: float = 7.0
    cs: tuple = (0.15, 0.5, 0.85)
    Ms: tuple = (64, 128, 256, 512, 1024)
    out_dir: str = "results"


def main():
    cfg = parse_config(QPConfig, __doc__)
    fld = hahn_field(cfg.A, cfg.B)
    rows = []
    for c in cfg.cs:
        m = hahn_equilibrium(cfg.A, cfg.B, c)
        errs = []
        for M in cfg.Ms:
            t0 = time.time()
            qp = solve_equilibrium_qp(fld, UniformDensity(0, 1), c, M)
            edges, masses = qp.cells
            exact = -np.diff([m.mass_right(x) for x in edges])
            errs.append(float(np.abs(masses - exact).sum()))
            rows.append((c, m.configuration, M, errs[-1], time.time() - t0))
        order = -np.polyfit(np.log(cfg.Ms), np.log(errs), 1)[0]
        print(f"c={c:<5} {m.configuration}  L1 " + " ".join(f"{e:.2e}" for e in errs) + f"  order {order:.2f}")
    emit(cfg, "qp_convergence.csv", ["c", "configuration", "M", "L1_error", "seconds"], rows)


if __name__ == "__main__":
    main()
