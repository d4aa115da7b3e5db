"""Command-line front end: ``dopasym <command> [options]``.

Every command writes machine-readable output (CSV unless stated) to
``--out`` or standard output.  A JSON file given with ``--config`` supplies
options too; its values override the command-line flags.  Exit codes: 0 on
success, 2 for invalid input, 3 for numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from ._io import csv_text, provenance, write_text
from .errors import NumericalError, ValidationError

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3


def _family_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--family", choices=["krawtchouk", "hahn", "assoc_hahn"], default="hahn")
    p.add_argument("--p", type=float)
    p.add_argument("--q", type=float)
    p.add_argument("--A", type=float, help="Hahn parameter A = (P - 1)/N")
    p.add_argument("--B", type=float, help="Hahn parameter B = (Q - 1)/N")
    p.add_argument("--P", type=float)
    p.add_argument("--Q", type=float)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file whose keys override the flags")
    p.add_argument("--out", default="-", help="output path ('-' for stdout)")
    p.add_argument("--precision-bits", type=int, dest="precision_bits")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dopasym", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"dopasym {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("poly", help="recurrence table and zeros")
    _common(p)
    _family_args(p)
    p.add_argument("--N", type=int, required=False)
    p.add_argument("--kmax", type=int)
    p.add_argument("--zeros", type=int, metavar="K", help="list the zeros of pi_K instead")

    p = sub.add_parser("equilibrium", help="equilibrium measure and variational report")
    _common(p)
    _family_args(p)
    p.add_argument("--c", type=float)
    p.add_argument("--method", choices=["closed", "qp"], default="closed")
    p.add_argument("--M", type=int, default=512, help="QP grid size")
    p.add_argument("--report", help="write the variational report (JSON) here")

    p = sub.add_parser("asymptotics", help="regional error sweep")
    _common(p)
    _family_args(p)
    p.add_argument("--c", type=float)
    p.add_argument("--Ns", type=int, nargs="+", default=[40, 80, 160])

    p = sub.add_parser("kernel", help="kernel invariants and universality checks")
    _common(p)
    _family_args(p)
    p.add_argument("--N", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--sine", type=float, metavar="X", help="band point for the sine-kernel comparison")
    p.add_argument("--airy", choices=["alpha", "beta"], help="void edge for the Airy comparison")
    p.add_argument("--c", type=float, help="equilibrium c for the comparisons (default k/N)")
    p.add_argument("--window", type=float, default=3)
    p.add_argument("--matrix", action="store_true", help="dump the full kernel instead")

    p = sub.add_parser("tw", help="Tracy-Widom CDF table")
    _common(p)
    p.add_argument("--s-min", type=float, default=-6.0, dest="s_min")
    p.add_argument("--s-max", type=float, default=4.0, dest="s_max")
    p.add_argument("--step", type=float, default=0.05)
    p.add_argument("--quad-points", type=int, default=60, dest="quad_points")

    p = sub.add_parser("hexagon", help="abc-hexagon tilings")
    _common(p)
    p.add_argument("action", choices=["count", "enumerate", "sample", "arctic", "edge-stats"])
    p.add_argument("--a", type=int)
    p.add_argument("--b", type=int)
    p.add_argument("--c", type=int)
    p.add_argument("--m", type=int, help="column index")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--format", choices=["csv", "svg"], default="csv")
    p.add_argument("--index", type=int, default=0, help="which enumerated tiling to draw")
    p.add_argument("--shape", type=float, nargs=3, metavar=("A", "B", "C"), default=[1.0, 1.0, 1.0])
    p.add_argument("--taus", type=int, default=50, help="number of tau grid points")
    p.add_argument("--tau", type=float, default=0.25)
    p.add_argument("--ns", type=int, nargs="+", default=[16, 32, 64])
    return ap


# -- helpers --------------------------------------------------------------------------


def _family_spec(o) -> dict:
    spec = {"family": o.family}
    for k in ("p", "q", "A", "B", "P", "Q"):
        v = getattr(o, k, None)
        if v is not None:
            spec[k] = v
    return spec


def _need(o, *names):
    for n in names:
        if getattr(o, n, None) is None:
            raise ValidationError(f"--{n} is required")


def _weights(o, N):
    from .lattice import family_from_spec, uniform_node_set

    return family_from_spec(_family_spec(o), node_set=uniform_node_set(N, precision_bits=o.precision_bits))


def _measure(o):
    from .equilibrium import hahn_equilibrium, krawtchouk_equilibrium

    _need(o, "c")
    if o.family == "krawtchouk":
        _need(o, "p", "q")
        return krawtchouk_equilibrium(o.p, o.q, o.c)
    if o.family == "hahn":
        _need(o, "A", "B")
        return hahn_equilibrium(o.A, o.B, o.c)
    raise ValidationError("closed-form measures exist for krawtchouk and hahn only")


def _config_echo(o) -> dict:
    return {k: v for k, v in sorted(vars(o).items()) if k not in ("out", "config") and v is not None}


# -- commands -------------------------------------------------------------------------


def cmd_poly(o) -> str:
    from .orthopoly import stieltjes_recurrence, zeros

    _need(o, "N")
    w = _weights(o, o.N)
    kmax = o.N - 1 if o.kmax is None else o.kmax
    if o.zeros is not None:
        sysm = stieltjes_recurrence(w, max(kmax, o.zeros), precision_bits=o.precision_bits)
        zs = zeros(sysm, o.zeros)
        return csv_text(["j", "zero"], list(enumerate(zs)), _config_echo(o))
    sysm = stieltjes_recurrence(w, kmax, precision_bits=o.precision_bits)
    return sysm.to_csv(_config_echo(o))


def _field(o):
    from .equilibrium import hahn_field, krawtchouk_field

    if o.family == "krawtchouk":
        _need(o, "p", "q")
        return krawtchouk_field(o.p, o.q)
    if o.family == "hahn":
        _need(o, "A", "B")
        return hahn_field(o.A, o.B)
    raise ValidationError("equilibrium supports krawtchouk and hahn fields")


def cmd_equilibrium(o) -> str:
    from .equilibrium import solve_equilibrium_qp, verify_variational
    from .lattice import UniformDensity

    cfg = _config_echo(o)
    phi = _field(o)
    if o.method == "closed":
        m = _measure(o)
    else:
        _need(o, "c")
        m = solve_equilibrium_qp(phi, UniformDensity(0.0, 1.0), o.c, o.M)
    if o.report:
        rep = verify_variational(m, phi)
        write_text(o.report, json.dumps({"configuration": m.configuration, "band_residual": rep.band_residual,
                                         "void_margin": rep.void_margin, "sat_margin": rep.sat_margin,
                                         "ell_c": rep.ell_c, "ok": bool(rep.ok(1e-6 * max(1.0, abs(rep.ell_c))))},
                                        sort_keys=True) + "\n")
    cfg["configuration"] = m.configuration
    return m.to_csv(cfg)


def cmd_asymptotics(o) -> str:
    from .asymptotics import regional_sweep, sweep_csv

    m = _measure(o)
    rows = regional_sweep(_family_spec(o), m, o.Ns)
    return sweep_csv(rows, _config_echo(o))


def cmd_kernel(o) -> str:
    from .kernels import airy_compare, cd_kernel, sine_compare
    from .orthopoly import stieltjes_recurrence

    _need(o, "N", "k")
    w = _weights(o, o.N)
    K = cd_kernel(stieltjes_recurrence(w, min(o.k, o.N - 1), precision_bits=o.precision_bits), o.k)
    if o.matrix:
        return K.to_csv(_config_echo(o))
    rows = [(name, val) for name, val in sorted(K.invariants().items())]
    if o.sine is not None or o.airy is not None:
        if o.c is None:
            o.c = o.k / o.N
        m = _measure(o)
        if o.sine is not None:
            rows.append(("sine_deviation", sine_compare(K, o.sine, int(o.window), m)))
        if o.airy is not None:
            rows.append(("airy_deviation", airy_compare(K, m, o.airy, o.window)))
    return csv_text(["quantity", "value"], rows, _config_echo(o))


def cmd_tw(o) -> str:
    from .kernels import tracy_widom_table

    return tracy_widom_table(o.s_min, o.s_max, o.step, o.quad_points, _config_echo(o))


def cmd_hexagon(o) -> str:
    from . import hexagon as hx

    cfg = _config_echo(o)
    if o.action == "count":
        _need(o, "a", "b", "c")
        return f"{hx.count_tilings(o.a, o.b, o.c)}\n"
    if o.action == "enumerate":
        _need(o, "a", "b", "c")
        tilings = hx.enumerate_tilings(o.a, o.b, o.c)
        if o.format == "svg":
            if not 0 <= o.index < len(tilings):
                raise ValidationError(f"--index must lie in [0, {len(tilings) - 1}]")
            return hx.tiling_svg(tilings[o.index])
        rows = []
        for i, t in enumerate(tilings):
            for m in range(1, o.a + o.b):
                rows.append((i, m, " ".join(str(h) for h in t.holes(m))))
        return csv_text(["tiling", "column", "holes"], rows, cfg)
    if o.action == "sample":
        from .kernels import cd_kernel, sample_dpp
        from .orthopoly import stieltjes_recurrence

        _need(o, "a", "b", "c", "m")
        spec = hx.HexagonSpec(o.a, o.b, o.c, o.m)
        _, w, k = hx.hexagon_ensemble(spec)
        K = cd_kernel(stieltjes_recurrence(w, min(k, spec.N - 1)), k)
        children = np.random.SeedSequence(o.seed).spawn(o.samples)
        lines = [provenance(cfg)]
        for ch in children:
            lines.append(" ".join(str(i) for i in sample_dpp(K, np.random.default_rng(ch), check_rank=False)))
        return "\n".join(lines) + "\n"
    if o.action == "arctic":
        A, B, C = o.shape
        taus = np.linspace(0.0, A + B, o.taus + 2)[1:-1]
        return hx.arctic_csv(hx.arctic_boundary(A, B, C, taus), cfg)
    A, B, C = o.shape
    rows = hx.edge_fluctuation_stats(A, B, C, o.tau, o.ns, o.samples, o.seed)
    return hx.edge_stats_csv(rows, cfg)


COMMANDS = {
    "poly": cmd_poly,
    "equilibrium": cmd_equilibrium,
    "asymptotics": cmd_asymptotics,
    "kernel": cmd_kernel,
    "tw": cmd_tw,
    "hexagon": cmd_hexagon,
}


def _apply_config(o) -> None:
    if not getattr(o, "config", None):
        return
    try:
        with open(o.config, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read config {o.config}: {exc}") from exc
    if not isinstance(data, dict):
        raise ValidationError("config must be a JSON object")
    for k, v in data.items():
        key = k.replace("-", "_")
        if not hasattr(o, key):
            raise ValidationError(f"unknown config key {k!r}")
        setattr(o, key, v)


def run(argv=None) -> int:
    parser = build_parser()
    try:
        o = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_VALIDATION
    try:
        _apply_config(o)
        if o.precision_bits is not None and o.precision_bits < 53:
            raise ValidationError("--precision-bits must be at least 53")
        text = COMMANDS[o.command](o)
        write_text(o.out, text)
    except ValidationError as exc:
        print(f"dopasym: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericalError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"dopasym: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, TypeError) as exc:
        print(f"dopasym: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
