"""Rhombus tilings of the abc-hexagon and their column ensembles.

Geometry.  The hexagon has vertical sides of length ``c`` and the lattice
has vertical lines ``m = 0, ..., a + b``.  A tiling is encoded by ``c``
non-intersecting paths crossing the hexagon from left to right: on every
vertical line the unit segments that are edges of the tiling are the
*particles* (there are always ``c`` of them) and the remaining unit
segments, which are the vertical diagonals of the third rhombus type, are
the *holes*.  Between consecutive lines each path moves up or down by half
a unit; every path makes ``a`` up-steps and ``b`` down-steps.

On line ``m`` the segments are numbered ``0, ..., N - 1`` upward from the
lowest point ``Q_m`` and ``N = c + (a - a_m)/2 + (b - b_m)/2`` with
``a_m = |m - a|``, ``b_m = |m - b|``.  Under the uniform measure on
tilings the holes of line ``m`` form the Hahn ensemble with parameters
``P = b_m + 1``, ``Q = a_m + 1`` on the nodes ``(2 xi + 1)/(2N)`` and the
particles the associated Hahn ensemble with the same parameters.  (Counting
from the top of the line instead exchanges the roles of ``a_m`` and
``b_m``.)  The orientation is confirmed against exhaustive enumeration in
the test suite.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import stats

from ._io import csv_text
from .equilibrium import VOID, hahn_critical_c, hahn_endpoints, hahn_equilibrium
from .errors import BadSpec, ExceptionalC, TooLarge, ValidationError, WrongGapType
from .kernels import cd_kernel, edge_variable, sample_dpp, tracy_widom_cdf
from .lattice import NodeSet, WeightFamily, make_weights, uniform_node_set
from .orthopoly import stieltjes_recurrence

__all__ = [
    "HexagonSpec",
    "TilingSample",
    "hexagon_ensemble",
    "particle_ensemble",
    "count_tilings",
    "enumerate_tilings",
    "iter_tilings",
    "column_marginal",
    "arctic_boundary",
    "ArcticPoint",
    "inscribed_ellipse",
    "ellipse_residual",
    "hexagon_vertices",
    "edge_fluctuation_stats",
    "EdgeStats",
    "tiling_svg",
]

ENUM_CAP = 1_000_000
SQ3 = math.sqrt(3.0)


@dataclass(frozen=True)
class HexagonSpec:
    a: int
    b: int
    c: int
    m: int

    def __post_init__(self):
        for name in ("a", "b", "c"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise BadSpec(f"{name} must be a positive integer, got {v!r}")
        if not 1 <= self.m <= self.a + self.b - 1:
            raise BadSpec(f"column m must lie in [1, {self.a + self.b - 1}], got {self.m}")

    @property
    def a_m(self) -> int:
        return abs(self.m - self.a)

    @property
    def b_m(self) -> int:
        return abs(self.m - self.b)

    @property
    def N(self) -> int:
        return column_length(self.a, self.b, self.c, self.m)

    @property
    def L(self) -> int:
        """Number of holes on the column."""
        return self.N - self.c


def column_length(a: int, b: int, c: int, m: int) -> int:
    twice = 2 * c + (a - abs(m - a)) + (b - abs(m - b))
    return twice // 2


def _bottom2(b: int, m: int) -> int:
    """Twice the height of ``Q_m`` relative to the lower-left corner."""
    return abs(m - b) - b


def hexagon_ensemble(spec: HexagonSpec, *, precision_bits: int | None = None) -> tuple[NodeSet, WeightFamily, int]:
    """Hole ensemble of column ``m``: Hahn weights ``P = b_m + 1, Q = a_m + 1`` with ``L_m`` particles."""
    ns = uniform_node_set(spec.N, precision_bits=precision_bits)
    w = make_weights("hahn", ns, P=spec.b_m + 1, Q=spec.a_m + 1)
    return ns, w, spec.L


def particle_ensemble(spec: HexagonSpec, *, precision_bits: int | None = None) -> tuple[NodeSet, WeightFamily, int]:
    """Particle ensemble of column ``m``: associated Hahn weights with ``c`` particles."""
    ns = uniform_node_set(spec.N, precision_bits=precision_bits)
    w = make_weights("assoc_hahn", ns, P=spec.b_m + 1, Q=spec.a_m + 1)
    return ns, w, spec.c


def count_tilings(a: int, b: int, c: int) -> int:
    """MacMahon's box formula, evaluated in exact rationals."""
    if min(a, b, c) < 1:
        raise BadSpec("side lengths must be positive")
    val = Fraction(1)
    for i in range(1, a + 1):
        for j in range(1, b + 1):
            for k in range(1, c + 1):
                val *= Fraction(i + j + k - 1, i + j + k - 2)
    if val.denominator != 1:
        raise ArithmeticError("MacMahon product is not integral")
    return int(val)


@dataclass(frozen=True)
class TilingSample:
    """A tiling as the particle positions on every vertical line ``0..a+b``."""

    a: int
    b: int
    c: int
    particles: tuple  # particles[m] = sorted positions on line m
    seed: int | None = None

    def N(self, m: int) -> int:
        return column_length(self.a, self.b, self.c, m)

    def holes(self, m: int) -> tuple:
        occ = set(self.particles[m])
        return tuple(i for i in range(self.N(m)) if i not in occ)


def iter_tilings(a: int, b: int, c: int):
    """Yield every tiling (column-interlacing depth-first search)."""
    if min(a, b, c) < 1:
        raise BadSpec("side lengths must be positive")
    steps = a + b
    start = tuple(2 * j for j in range(c))  # twice the lower end of each particle segment
    moves = list(itertools.product((1, -1), repeat=c))

    def rec(m, h, ups, cols):
        if m == steps:
            yield tuple(cols)
            return
        for mv in moves:
            nh = tuple(x + d for x, d in zip(h, mv))
            if any(nh[i + 1] - nh[i] < 2 for i in range(c - 1)):
                continue
            nu = tuple(u + (d > 0) for u, d in zip(ups, mv))
            # each path needs exactly a ups and b downs in total
            if any(u > a or (m + 1 - u) > b for u in nu):
                continue
            bot = _bottom2(b, m + 1)
            cols.append(tuple((x - bot) // 2 for x in nh))
            yield from rec(m + 1, nh, nu, cols)
            cols.pop()

    first = tuple(range(c))
    for cols in rec(0, start, (0,) * c, [first]):
        yield TilingSample(a, b, c, cols)


def enumerate_tilings(a: int, b: int, c: int) -> list:
    n = count_tilings(a, b, c)
    if n > ENUM_CAP:
        raise TooLarge(f"{n} tilings exceed the enumeration cap {ENUM_CAP}")
    return list(iter_tilings(a, b, c))


def column_marginal(tilings, m: int) -> dict:
    """Empirical law of the hole configuration on line ``m`` over the given tilings."""
    counts: dict = {}
    for t in tilings:
        key = t.holes(m)
        counts[key] = counts.get(key, 0) + 1
    total = sum(counts.values())
    return {k: v / total for k, v in counts.items()}


# -- arctic boundary ------------------------------------------------------------------


def hexagon_vertices(A: float, B: float, C: float) -> np.ndarray:
    """Vertices ``P_1..P_6`` in the plane, counter-clockwise from the lower-left corner."""
    ur = np.array([SQ3 / 2, 0.5])
    dr = np.array([SQ3 / 2, -0.5])
    up = np.array([0.0, 1.0])
    P1 = np.zeros(2)
    P2 = P1 + B * dr
    P3 = P2 + A * ur
    P4 = P3 + C * up
    P5 = P4 - B * dr
    P6 = P1 + C * up
    return np.array([P1, P2, P3, P4, P5, P6])


def inscribed_ellipse(A: float, B: float, C: float) -> tuple[np.ndarray, float]:
    """Point-conic matrix of the ellipse tangent to five sides, and the sixth-side tangency defect.

    A conic tangent to the lines ``l_i`` satisfies ``l_i^T D l_i = 0`` for its
    dual matrix ``D``; five sides fix ``D`` up to scale and the point
    conic is its adjugate.
    """
    V = hexagon_vertices(A, B, C)
    lines = []
    for i in range(6):
        p = np.append(V[i], 1.0)
        q = np.append(V[(i + 1) % 6], 1.0)
        l = np.cross(p, q)
        lines.append(l / np.linalg.norm(l))
    rows = [[l[0] ** 2, l[1] ** 2, l[2] ** 2, 2 * l[0] * l[1], 2 * l[0] * l[2], 2 * l[1] * l[2]] for l in lines]
    M = np.array(rows[:5])
    _, _, vt = np.linalg.svd(M)
    d = vt[-1]
    D = np.array([[d[0], d[3], d[4]], [d[3], d[1], d[5]], [d[4], d[5], d[2]]])
    defect = float(abs(np.array(rows[5]) @ d) / np.linalg.norm(d))
    Cm = np.linalg.inv(D)
    return Cm / np.linalg.norm(Cm), defect


def ellipse_residual(conic: np.ndarray, X: float, Y: float) -> float:
    """Approximate Euclidean distance from ``(X, Y)`` to the conic (first-order)."""
    p = np.array([X, Y, 1.0])
    f = p @ conic @ p
    g = 2 * (conic @ p)[:2]
    return float(abs(f) / np.linalg.norm(g))


@dataclass(frozen=True)
class ArcticPoint:
    tau: float
    alpha: float
    beta: float
    c: float
    X: float
    Y_alpha: float
    Y_beta: float
    exceptional: bool = False


def arctic_boundary(A: float, B: float, C: float, tau_grid) -> list:
    """Band endpoints of the hole ensemble along the columns ``m = tau n``.

    For each ``tau`` the Hahn parameters of the hole ensemble are
    ``b_m/N = |tau - B|/Nn`` and ``a_m/N = |tau - A|/Nn`` (in that order) with ``Nn = C + (A - |tau - A|)/2 + (B - |tau - B|)/2``
    and the hole density is ``c = 1 - C/Nn``.  The endpoints are placed in
    the plane at ``X = tau sqrt(3)/2`` and height ``Y = bottom(tau) + Nn x``.
    """
    if min(A, B, C) <= 0:
        raise BadSpec("A, B, C must be positive")
    out = []
    for tau in tau_grid:
        tau = float(tau)
        if not 0 < tau < A + B:
            raise BadSpec(f"tau={tau} outside (0, A + B)")
        am, bm = abs(tau - A), abs(tau - B)
        Nn = C + (A - am) / 2 + (B - bm) / 2
        Ah, Bh, c = bm / Nn, am / Nn, (Nn - C) / Nn
        crit = hahn_critical_c(Ah, Bh)
        exc = any(abs(c - cc) < 1e-9 for cc in crit)
        al, be = hahn_endpoints(Ah, Bh, c)
        bottom = (bm - B) / 2
        out.append(ArcticPoint(tau, al, be, c, tau * SQ3 / 2, bottom + Nn * al, bottom + Nn * be, exc))
    return out


def arctic_csv(points, config: dict | None = None) -> str:
    rows = [(p.tau, p.alpha, p.beta, p.c, p.X, p.Y_alpha, p.Y_beta, int(p.exceptional)) for p in points]
    return csv_text(["tau", "alpha", "beta", "c", "X", "Y_alpha", "Y_beta", "exceptional"], rows, config)


# -- edge fluctuations ------------------------------------------------------------------


@dataclass(frozen=True)
class EdgeStats:
    n: int
    m: int
    N: int
    k: int
    beta: float
    scale: float
    ks: float
    values: np.ndarray  # sorted rescaled topmost-hole positions (one per sample)
    table: tuple  # (s, ecdf, F2) at the distinct values


def edge_fluctuation_stats(A: int, B: int, C: int, tau: float, ns, samples: int, seed: int,
                           quad_points: int = 60) -> list:
    """Topmost hole on column ``m = tau n`` versus the Tracy-Widom law.

    For each ``n`` the column DPP of holes is sampled ``samples`` times; the
    topmost hole ``x*`` (node coordinate in ``(0, 1)``) is rescaled to
    ``(N pi c B_R)^{2/3} (x* - beta)`` where ``B_R`` is the square-root
    coefficient of the equilibrium density at ``beta``.  Replica ``r`` uses
    the ``r``-th child of ``numpy.random.SeedSequence(seed)``.
    """
    out = []
    for n in ns:
        a, b, c = int(A * n), int(B * n), int(C * n)
        m = int(round(tau * n))
        spec = HexagonSpec(a, b, c, m)
        N, k = spec.N, spec.L
        meas = hahn_equilibrium(spec.b_m / N, spec.a_m / N, k / N)
        if meas.gap_types[-1] != VOID:
            raise WrongGapType("the top of the column is not a void for holes")
        _, w, _ = hexagon_ensemble(spec)
        K = cd_kernel(stieltjes_recurrence(w, k), k)
        children = np.random.SeedSequence(seed).spawn(samples)
        tops = np.array([sample_dpp(K, np.random.default_rng(ch), check_rank=(i == 0))[-1]
                         for i, ch in enumerate(children)])
        x = (2 * tops + 1) / (2.0 * N)
        vals = np.sort(edge_variable(meas, "beta", N, x))
        uniq = np.unique(vals)
        F = {float(v): tracy_widom_cdf(float(v), quad_points) for v in uniq}
        ks = stats.kstest(vals, lambda t: np.array([F[float(v)] for v in np.atleast_1d(t)])).statistic
        ecdf = np.searchsorted(vals, uniq, side="right") / len(vals)
        table = tuple((float(v), float(e), F[float(v)]) for v, e in zip(uniq, ecdf))
        scale = (N * math.pi * meas.c * meas.edge_coeffs["beta"]) ** (2 / 3)
        out.append(EdgeStats(n, m, N, k, meas.beta, scale, float(ks), vals, table))
    return out


def edge_stats_csv(rows, config: dict | None = None) -> str:
    body = []
    for r in rows:
        for s, e, f in r.table:
            body.append((r.n, r.N, r.k, r.ks, s, e, f))
    return csv_text(["n", "N", "k", "ks", "s", "ecdf", "F2"], body, config)


# -- drawing ----------------------------------------------------------------------------

_COLORS = {"up": "#f2d23c", "down": "#d2362b", "flat": "#2b6fd2"}


def tiling_svg(t: TilingSample, unit: float = 20.0) -> str:
    """SVG picture of a tiling; the three rhombus types are yellow, red and blue."""
    a, b, c = t.a, t.b, t.c
    polys = []

    def pt(m, y2):  # column index, twice the height
        return (m * SQ3 / 2 * unit, -y2 / 2 * unit)

    for m in range(a + b):
        bot0, bot1 = _bottom2(b, m), _bottom2(b, m + 1)
        for p0, p1 in zip(t.particles[m], t.particles[m + 1]):
            y0 = bot0 + 2 * p0
            y1 = bot1 + 2 * p1
            kind = "up" if y1 > y0 else "down"
            polys.append((kind, [pt(m, y0), pt(m + 1, y1), pt(m + 1, y1 + 2), pt(m, y0 + 2)]))
    for m in range(1, a + b):
        bot = _bottom2(b, m)
        for h in t.holes(m):
            y = bot + 2 * h
            polys.append(("flat", [pt(m, y), pt(m + 1, y + 1), pt(m, y + 2), pt(m - 1, y + 1)]))
    xs = [p[0] for _, ps in polys for p in ps] or [0.0]
    ys = [p[1] for _, ps in polys for p in ps] or [0.0]
    x0, y0 = min(xs) - unit, min(ys) - unit
    wdt, hgt = max(xs) - x0 + unit, max(ys) - y0 + unit
    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{x0:.3f} {y0:.3f} {wdt:.3f} {hgt:.3f}">']
    for kind, ps in polys:
        pts = " ".join(f"{x:.3f},{y:.3f}" for x, y in ps)
        lines.append(f'<polygon points="{pts}" fill="{_COLORS[kind]}" stroke="black" stroke-width="0.5"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
