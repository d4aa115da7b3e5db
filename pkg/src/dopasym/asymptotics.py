"""Leading-order asymptotic formulae for ``pi_{N,k}`` and their verification.

Each approximation is returned in *scaled* form ``(bracket, log_scale)``
with ``pi ~ exp(N * log_scale) * bracket``; :func:`approx_pi` multiplies
the two in high precision.  The scaled error used throughout the tests is
``|pi_exact * exp(-N log_scale) - bracket|``, which is how the error terms
of the theorems are normalised.

Regions (see :func:`classify_point`):

``outer``      ``e^{N L_c} W``
``void``       ``e^{N Lbar} A^void``, ``A^void = e^{N(L_c - Lbar)} W``
``saturated``  ``e^{N Lbar} A^sat cos(N theta0/2)``
``hard_edge``  gamma-function formula in ``zeta = N int rho0`` from the endpoint
``band``       ``e^{N Lbar} A_I cos(Phi_I + N pi c mu([x, b]))``
``airy``       uniform Airy formulae at band edges (``Ai``/``Ai'`` next to
               voids, ``Bi``/``Ai`` combinations next to saturated regions)
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import mpmath
import numpy as np
from scipy import optimize

from ._io import csv_text
from .equilibrium import BAND, SAT, VOID, EquilibriumMeasure
from .errors import PrecisionExhausted, RegionMismatch, ValidationError
from .outer_model import OuterModel, _tau_real, band_phase, edge_maps

__all__ = [
    "RegionTag",
    "classify_point",
    "approx_scaled",
    "approx_pi",
    "scaled_error",
    "predicted_band_zeros",
    "match_zeros",
    "SaturatedPairing",
    "saturated_zero_pairing",
    "predicted_recurrence",
    "SweepRow",
    "sweep_csv",
    "tau_point",
    "edge_radius",
    "default_test_points",
    "regional_sweep",
]

C34 = 0.75


@dataclass(frozen=True)
class RegionTag:
    """``kind`` is one of outer, void, band, saturated, hard_edge, airy.

    ``where`` names the gap side (``left``/``right``), the endpoint
    (``a``/``b``) or the band edge (``alpha``/``beta``); ``gap_type`` is
    set for Airy edges.
    """

    kind: str
    where: str | None = None
    gap_type: str | None = None

    def __str__(self) -> str:
        parts = [self.kind] + [p for p in (self.where, self.gap_type) if p]
        return ":".join(parts)


def edge_radius(m: EquilibriumMeasure, N: int) -> float:
    return min(0.05 * (m.beta - m.alpha), 2 * N ** (-2 / 3 + 0.1))


def classify_point(m: EquilibriumMeasure, z, N: int) -> RegionTag:
    z = complex(z)
    x, y = z.real, z.imag
    dist = abs(y) if m.a <= x <= m.b else math.hypot(min(abs(x - m.a), abs(x - m.b)), y)
    if dist > 0.02:
        return RegionTag("outer")
    r = edge_radius(m, N)
    al, be = m.alpha, m.beta
    for e, name, gt in ((al, "alpha", m.gap_types[0]), (be, "beta", m.gap_types[1])):
        if abs(z - e) <= r:
            return RegionTag("airy", name, gt)
    if m.gap_types[0] == SAT and abs(z - m.a) <= r:
        return RegionTag("hard_edge", "a")
    if m.gap_types[1] == SAT and abs(z - m.b) <= r:
        return RegionTag("hard_edge", "b")
    if x <= m.a or x >= m.b:
        side = "left" if x <= m.a else "right"
        return RegionTag("void" if m.gap_types[0 if side == "left" else 1] == VOID else "saturated", side)
    if al < x < be:
        return RegionTag("band")
    side = "left" if x <= al else "right"
    t = m.gap_types[0 if side == "left" else 1]
    return RegionTag("void" if t == VOID else "saturated", side)


def _real(z, what: str) -> float:
    z = complex(z)
    if z.imag != 0.0:
        raise ValidationError(f"the {what} formula is implemented for real arguments only")
    return z.real


def _gap_side(model: OuterModel, x: float) -> str:
    return "left" if x < model.alpha else "right"


def approx_scaled(model: OuterModel, tag: RegionTag, z) -> tuple[complex, complex]:
    """``(bracket, log_scale)`` of the leading-order formula for ``tag``."""
    m = model.measure
    N, c = model.N, model.c
    z = complex(z)
    kind = tag.kind
    if kind == "outer":
        return model.W(z), model.L(z)

    if kind in ("void", "saturated"):
        side = tag.where or _gap_side(model, z.real)
        expected = m.gap_types[0 if side == "left" else 1]
        if (kind == "void") != (expected == VOID):
            raise RegionMismatch(f"{side} gap is {expected}, not {kind}")
        if z.imag != 0.0:
            sg = 1 if z.imag > 0 else -1
            Lz = model.L(z)
            if kind == "void":
                return model.W(z), Lz
            th0 = model.theta0_complex(z)
            return 2 * cmath.exp(-1j * sg * N * th0 / 2) * model.W(z) * cmath.cos(N * th0 / 2), Lz
        x = z.real
        Lb = model.Lbar(x)
        phase = math.pi * N * c * model.mass_right(x)
        Wp = model.W(complex(x, 0.0), side=1)
        if kind == "void":
            return cmath.exp(1j * phase) * Wp, complex(Lb)
        th0 = model.theta0(x)
        Asat = 2 * cmath.exp(1j * (phase - N * th0 / 2)) * Wp
        return Asat * math.cos(N * th0 / 2), complex(Lb)

    if kind == "hard_edge":
        x = _real(z, "hard-edge")
        end = tag.where or ("a" if x - m.a < m.b - x else "b")
        if m.gap_types[0 if end == "a" else 1] != SAT:
            raise RegionMismatch(f"no hard edge at {end}")
        th0 = model.theta0(x)  # 2 pi int_x^b rho0
        if end == "a":
            zeta, sgn = N * (1 - th0 / (2 * math.pi)), 1
        else:
            zeta, sgn = N * th0 / (2 * math.pi), -1
        phase = math.pi * N * c * model.mass_right(x)
        Wp = model.W(complex(x, 0.0), side=1)
        Atil = 2 * cmath.exp(1j * (phase + sgn * math.pi * zeta)) * Wp
        zm = mpmath.mpf(zeta)
        if zeta > 0:
            ratio = mpmath.exp(mpmath.loggamma(zm + 0.5) + zm - zm * mpmath.log(zm) - 0.5 * mpmath.log(2 * mpmath.pi))
        else:
            ratio = mpmath.gamma(0.5) / mpmath.sqrt(2 * mpmath.pi)
        return Atil * float(ratio) * math.cos(math.pi * zeta), complex(model.Lbar(x))

    if kind == "band":
        x = _real(z, "band")
        A, Phi = band_phase(model, x, margin=0.0)
        return complex(A * math.cos(Phi + math.pi * N * c * model.mass_right(x))), complex(model.Lbar(x))

    if kind == "airy":
        x = _real(z, "Airy")
        return _airy_scaled(model, tag.where, x)

    raise ValidationError(f"unknown region kind {kind!r}")


def _airy_coefficients(model: OuterModel, name: str, gtype: str, x: float, tau: float):
    """``(A, B)`` coefficient functions at real ``x`` (off the edge)."""
    N = model.N
    left = name == "alpha"
    gap = "left" if left else "right"
    Hp, Hm = model.H(complex(x, 0.0), gap, side=1)
    e = math.exp((float(model.eta(x)) - model.gamma_const) / 2) * math.sqrt(2 * math.pi)
    # (-tau)^p for tau on the upper side: Im(tau) has the sign of Im(z) at the
    # left edge and the opposite sign at the right edge
    if tau < 0:
        q14, qm14 = (-tau) ** 0.25, (-tau) ** -0.25
    else:
        s = -1.0 if left else 1.0  # arg(-tau) = s * pi
        q14 = tau ** 0.25 * cmath.exp(1j * s * math.pi / 4)
        qm14 = tau ** -0.25 * cmath.exp(-1j * s * math.pi / 4)
    if gtype == VOID:
        HA, HB, sB = (Hm, Hp, -1.0) if left else (Hp, Hm, -1.0)
    else:
        HA, HB, sB = (Hm, Hp, 1.0) if left else (Hm, Hp, -1.0)
    A = C34 ** (1 / 6) * e * HA * N ** (-1 / 6) * q14
    B = sB * C34 ** (-1 / 6) * e * HB * N ** (1 / 6) * qm14
    return A, B


def _airy_scaled(model: OuterModel, name: str, x: float):
    m = model.measure
    N = model.N
    name = {"L": "alpha", "R": "beta"}.get(name, name)
    gtype = m.gap_types[0 if name == "alpha" else 1]
    e = model.alpha if name == "alpha" else model.beta
    tau = _tau_real(model, name, gtype, x)
    w = model.beta - model.alpha
    if abs(x - e) < 1e-7 * w:
        # the coefficient functions are analytic; average across the removable point
        h = 1e-6 * w
        Ap, Bp = _airy_coefficients(model, name, gtype, e + h, _tau_real(model, name, gtype, e + h))
        Am, Bm = _airy_coefficients(model, name, gtype, e - h, _tau_real(model, name, gtype, e - h))
        A, B = 0.5 * (Ap + Am), 0.5 * (Bp + Bm)
    else:
        A, B = _airy_coefficients(model, name, gtype, x, tau)
    arg = -(C34 ** (2 / 3)) * tau
    ai, aip, bi, bip = (float(mpmath.airyai(arg)), float(mpmath.airyai(arg, 1)),
                        float(mpmath.airybi(arg)), float(mpmath.airybi(arg, 1)))
    if gtype == VOID:
        FA, FB = ai, aip
    else:
        th = N * model.theta0(x) / 2
        sg = -1.0 if name == "alpha" else 1.0
        FA = math.cos(th) * bi + sg * math.sin(th) * ai
        FB = math.cos(th) * bip + sg * math.sin(th) * aip
    bracket = N ** (1 / 6) * A * FA + N ** (-1 / 6) * B * FB
    return complex(bracket), complex(model.Lbar_band(x))


def approx_pi(model: OuterModel, tag: RegionTag, z) -> mpmath.mpc:
    bracket, ls = approx_scaled(model, tag, z)
    return mpmath.mpc(bracket) * mpmath.exp(model.N * mpmath.mpc(ls))


def scaled_error(model: OuterModel, tag: RegionTag, z, exact) -> tuple[float, complex, complex]:
    """``(scaled error, scaled exact, bracket)`` for an exact value ``pi_{N,k}(z)``."""
    bracket, ls = approx_scaled(model, tag, z)
    ex = complex(mpmath.mpc(exact) * mpmath.exp(-model.N * mpmath.mpc(ls)))
    return abs(ex - bracket), ex, bracket


# -- zeros -------------------------------------------------------------------------


def _band_model_fn(model: OuterModel):
    N, c = model.N, model.c

    def f(x):
        A, Phi = band_phase(model, x, margin=0.0)
        return math.cos(Phi + math.pi * N * c * model.mass_right(x))

    return f


def predicted_band_zeros(model: OuterModel, *, margin: float = 0.02, per_zero: int = 12) -> list:
    """Zeros of ``cos(Phi_I(x) + N pi c mu([x, b]))`` inside the band."""
    al, be = model.alpha, model.beta
    w = be - al
    lo, hi = al + margin * w, be - margin * w
    f = _band_model_fn(model)
    n = int(per_zero * (model.k + 10)) + 50
    xs = np.linspace(lo, hi, n)
    vals = [f(float(x)) for x in xs]
    out = []
    for i in range(n - 1):
        if vals[i] == 0.0:
            out.append(float(xs[i]))
        elif vals[i] * vals[i + 1] < 0:
            out.append(optimize.brentq(f, float(xs[i]), float(xs[i + 1]), xtol=1e-15, rtol=1e-15))
    return out


def match_zeros(exact, predicted) -> list[tuple[float, float]]:
    """Pair each predicted zero with the nearest exact zero."""
    ex = np.asarray([float(z) for z in exact])
    pairs = []
    for p in predicted:
        j = int(np.argmin(np.abs(ex - p)))
        pairs.append((float(ex[j]), float(p)))
    return pairs


@dataclass(frozen=True)
class SaturatedPairing:
    side: str | None
    nodes: tuple = ()
    distances: tuple = ()  # signed: zero - node
    ordering_ok: bool = True

    @property
    def max_distance(self) -> float:
        return max((abs(d) for d in self.distances), default=0.0)

    @property
    def empty(self) -> bool:
        return not self.nodes


def saturated_zero_pairing(sys, m: EquilibriumMeasure, k: int, *, exclude: float = 0.1,
                           precision_bits: int | None = None) -> list[SaturatedPairing]:
    """Signed node-to-zero distances in the exterior saturated regions.

    Test intervals are the saturated gaps shortened by ``exclude`` on the
    band side.  ``precision_bits`` defaults to ``max(8N, system bits)``;
    distances below the working resolution raise :class:`PrecisionExhausted`.
    """
    from .orthopoly import zeros as _zeros

    N = sys.N
    bits = precision_bits or max(8 * N, sys.precision_bits)
    if bits > sys.precision_bits:
        from .lattice import rebuild_weights
        from .orthopoly import stieltjes_recurrence
        sys = stieltjes_recurrence(rebuild_weights(sys.weights, bits), k, precision_bits=bits)
    zs = _zeros(sys, k, precision_bits=bits)
    nodes = sys.weights.node_set.nodes
    out = []
    for idx, side in ((0, "left"), (1, "right")):
        if m.gap_types[idx] != SAT:
            continue
        if side == "left":
            lo, hi = m.a, m.alpha - exclude
        else:
            lo, hi = m.beta + exclude, m.b
        sel = [x for x in nodes if lo <= x <= hi]
        dists = []
        ok = True
        for x in sel:
            j = min(range(len(zs)), key=lambda i: abs(zs[i] - x))
            d = zs[j] - x
            if d == 0:
                raise PrecisionExhausted("zero and node coincide at working precision")
            dists.append(d)
            if (side == "left" and not d > 0) or (side == "right" and not d < 0):
                ok = False
        out.append(SaturatedPairing(side, tuple(sel), tuple(dists), ok))
    return out


# -- recurrence coefficients ---------------------------------------------------


def predicted_recurrence(model: OuterModel) -> dict:
    """One-band predictions for ``gamma_k^2, gamma_{k-1}^2, a_k, b_{k-1}``."""
    al, be = model.alpha, model.beta
    w = be - al
    e = mpmath.exp(model.N * mpmath.mpf(model.measure.ell_c) + model.gamma_const)
    return {"gamma2_k": 4 * e / w, "gamma2_km1": w * e / 4, "a_k": 0.5 * (al + be), "b_km1": w / 4}


# -- sweeps -----------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    theorem: str
    N: int
    test_point: complex
    exact: complex
    approx: complex
    scaled_error: float


def sweep_csv(rows, config: dict | None = None) -> str:
    def cz(v):
        v = complex(v)
        return f"{v.real!r}{v.imag:+.17g}j" if v.imag else repr(v.real)

    body = [(r.theorem, r.N, cz(r.test_point), cz(r.exact), cz(r.approx), r.scaled_error) for r in rows]
    return csv_text(["theorem", "N", "test_point", "exact", "approx", "scaled_error"], body, config)


def tau_point(model: OuterModel, edge: str, t: float) -> float:
    """Real ``x`` near ``edge`` with ``tau(x) = t``."""
    name = {"L": "alpha", "R": "beta"}.get(edge, edge)
    gtype = model.measure.gap_types[0 if name == "alpha" else 1]
    e = model.alpha if name == "alpha" else model.beta
    if t == 0:
        return e
    inward = 1.0 if name == "alpha" else -1.0
    direction = inward if t > 0 else -inward
    w = model.beta - model.alpha
    gap = (e - model.measure.a) if name == "alpha" else (model.measure.b - e)
    reach = 0.45 * w if t > 0 else 0.95 * gap
    f = lambda x: _tau_real(model, name, gtype, x) - t
    hi = e + direction * reach
    if f(hi) * f(e + direction * 1e-14) > 0:
        raise ValidationError(f"tau={t} not reached near {name}")
    return optimize.brentq(f, e + direction * 1e-14, hi, xtol=1e-15)


def default_test_points(m: EquilibriumMeasure) -> list[tuple[RegionTag, complex]]:
    """Fixed test points for every region present in a one-band measure."""
    al, be, a, b = m.alpha, m.beta, m.a, m.b
    pts = [(RegionTag("outer"), complex(b + 0.5 * (b - a))), (RegionTag("outer"), complex(0.5 * (a + b), 0.4 * (b - a)))]
    pts += [(RegionTag("band"), complex(al + f * (be - al))) for f in (0.2, 0.5, 0.8)]
    for side, (l, r), t in (("left", (a, al), m.gap_types[0]), ("right", (be, b), m.gap_types[1])):
        if r - l < 1e-9:
            continue
        kind = "void" if t == VOID else "saturated"
        pts += [(RegionTag(kind, side), complex(l + f * (r - l))) for f in (0.3, 0.7)]
        if t == SAT:
            end = l if side == "left" else r
            pts.append((RegionTag("hard_edge", "a" if side == "left" else "b"), complex(0.5 * (end + (r if side == "left" else l)))))
    return pts


def regional_sweep(family: dict, m: EquilibriumMeasure, Ns, *, airy_taus=(-2.0, 0.0, 2.0),
                   points=None) -> list:
    """Scaled errors of every regional formula at fixed points, for each ``N``.

    ``family`` is a :func:`~dopasym.lattice.family_from_spec` dictionary;
    the degree is ``k = round(c N)`` and the correction ``eta`` is the
    family's ``N``-independent limit.  Airy rows use points at fixed
    ``tau`` (the error there is reported unscaled by ``N``).
    """
    from .lattice import family_from_spec
    from .orthopoly import evaluate, stieltjes_recurrence
    from .outer_model import build_outer_model

    pts = default_test_points(m) if points is None else list(points)
    rows = []
    for N in Ns:
        N = int(N)
        k = int(round(m.c * N))
        w = family_from_spec(family, N=N)
        sy = stieltjes_recurrence(w, k)
        eta = w.eta_limit if w.eta_limit is not None else 0.0
        om = build_outer_model(m, eta, k - m.c * N, N)
        todo = [(tag, str(tag), z) for tag, z in pts]
        for edge, gt in (("alpha", m.gap_types[0]), ("beta", m.gap_types[1])):
            for t in airy_taus:
                try:
                    x = tau_point(om, edge, t)
                except ValidationError:
                    continue  # the gap is too short at this N to reach tau
                tag = RegionTag("airy", edge, gt)
                todo.append((tag, f"{tag}@tau={t:g}", complex(x)))
        for tag, label, z in todo:
            ex, _ = evaluate(sy, k, z)
            err, exs, br = scaled_error(om, tag, z, ex)
            rows.append(SweepRow(label, N, z, exs, br, err))
    return rows
