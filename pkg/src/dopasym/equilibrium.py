"""Constrained equilibrium measures.

The energy is ``c * I[mu] + int phi dmu`` with ``I`` the logarithmic
energy, minimised over probability measures squeezed between ``0`` and
``rho0/c``.  Three constructors are provided:

* :func:`hahn_equilibrium` -- the closed-form arctan densities for the
  Hahn field on ``(0, 1)`` with uniform node density;
* :func:`one_band_equilibrium` / :func:`krawtchouk_equilibrium` -- the
  one-band ansatz: the two moment conditions are solved for the endpoints
  and the density is recovered from a Cauchy-type integral;
* :func:`solve_equilibrium_qp` -- a discretised quadratic program that
  makes no structural assumption and serves as an independent oracle.

Band densities of one-band measures are stored as Chebyshev series in the
angle ``theta`` with ``x = s + d cos(theta)``; square-root edge behaviour
becomes analytic in that variable, so the series converge geometrically.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy import integrate, linalg, optimize

from ._io import csv_text
from .errors import (BadParams, DegenerateBandDetection, ExceptionalC, MultiBand, NoConvergence,
                     QuadratureFailure, ValidationError)
from .lattice import UniformDensity, WeightFamily, hahn_V

__all__ = [
    "ExternalField",
    "EquilibriumMeasure",
    "VariationalReport",
    "external_field",
    "hahn_field",
    "krawtchouk_field",
    "hahn_critical_c",
    "hahn_endpoints",
    "hahn_equilibrium",
    "krawtchouk_endpoints",
    "krawtchouk_equilibrium",
    "krawtchouk_guess",
    "one_band_equilibrium",
    "solve_equilibrium_qp",
    "verify_variational",
    "dual_measure",
    "log_potential",
]

EXCEPTIONAL_RADIUS = 1e-9
VOID, SAT, BAND = "void", "saturated", "band"


# ---------------------------------------------------------------------------
# external field
# ---------------------------------------------------------------------------


def _uniform_log_integral(x, a, b):
    """``int_a^b log|x-y| dy / (b-a)`` for real or complex ``x`` (principal logs)."""
    x = np.asarray(x)
    u = x - a
    v = b - x
    with np.errstate(divide="ignore", invalid="ignore"):
        tu = np.where(u == 0, 0.0, u * np.log(np.where(u == 0, 1.0, u)))
        tv = np.where(v == 0, 0.0, v * np.log(np.where(v == 0, 1.0, v)))
    return (tu + tv - (b - a)) / (b - a)


@dataclass(frozen=True)
class ExternalField:
    """``phi(x) = V(x) + int log|x-y| rho0(y) dy`` on ``(a, b)``."""

    V: Callable
    dV: Callable | None
    rho0: Callable
    a: float
    b: float
    uniform: bool
    label: str = ""

    def log_integral(self, x):
        if self.uniform:
            return _uniform_log_integral(np.asarray(x, dtype=float), self.a, self.b)
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty_like(xs)
        for i, t in enumerate(xs):
            pts = [t] if self.a < t < self.b else None
            val, err = integrate.quad(lambda y: math.log(abs(t - y)) * self.rho0(y) if y != t else 0.0,
                                      self.a, self.b, points=pts, limit=200, epsabs=1e-13, epsrel=1e-12)
            out[i] = val
        return out if np.ndim(x) else float(out[0])

    def __call__(self, x):
        return np.asarray(self.V(x), dtype=float) + self.log_integral(x)

    def complex(self, z):
        """Analytic continuation off the real axis (uniform node density only)."""
        if not self.uniform:
            raise NotImplementedError("complex continuation needs a uniform node density")
        z = np.asarray(z, dtype=complex)
        return self.V(z) + _uniform_log_integral(z, self.a, self.b)

    def _dV(self, x):
        if self.dV is not None:
            return np.asarray(self.dV(x), dtype=float)
        h = 1e-6 * (self.b - self.a)
        x = np.asarray(x, dtype=float)
        return (np.asarray(self.V(x + h)) - np.asarray(self.V(x - h))) / (2 * h)

    def d(self, x):
        """``phi'(x)``; the log part is a principal-value Cauchy integral."""
        x = np.asarray(x, dtype=float)
        if self.uniform:
            with np.errstate(divide="ignore"):
                lp = (np.log(x - self.a) - np.log(self.b - x)) / (self.b - self.a)
            return self._dV(x) + lp
        xs = np.atleast_1d(x)
        out = np.empty_like(xs)
        for i, t in enumerate(xs):
            val, _ = integrate.quad(self.rho0, self.a, self.b, weight="cauchy", wvar=t,
                                    limit=200, epsabs=1e-13, epsrel=1e-12)
            out[i] = -val
        out = out + self._dV(xs)
        return out if np.ndim(x) else float(out[0])

    def negated_V(self) -> "ExternalField":
        """Field of the dual problem: ``-V`` with the same node density."""
        V, dV = self.V, self.dV
        return ExternalField(lambda x: -np.asarray(V(x)), None if dV is None else (lambda x: -np.asarray(dV(x))),
                             self.rho0, self.a, self.b, self.uniform, self.label + "~")


def external_field(w: WeightFamily) -> ExternalField:
    ns = w.node_set
    uniform = isinstance(ns.rho0, UniformDensity)
    dV = w.V.d if w.V.deriv is not None else None
    return ExternalField(w.V, dV, ns.rho0, ns.a, ns.b, uniform, w.family)


def hahn_field(A: float, B: float) -> ExternalField:
    V, dV = hahn_V(A, B)
    return ExternalField(V, dV, UniformDensity(0.0, 1.0), 0.0, 1.0, True, f"hahn({A},{B})")


def assoc_hahn_field(A: float, B: float) -> ExternalField:
    return hahn_field(A, B).negated_V()


def krawtchouk_field(p: float, q: float) -> ExternalField:
    ell = math.log(q / p)
    return ExternalField(lambda x: ell * np.asarray(x), lambda x: ell + 0.0 * np.asarray(x, dtype=float),
                         UniformDensity(0.0, 1.0), 0.0, 1.0, True, f"krawtchouk({p},{q})")


# ---------------------------------------------------------------------------
# measure container
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BandSeries:
    """Band density on ``(alpha, beta)`` as a Chebyshev series in ``theta``.

    ``x = s + d cos(theta)``, so ``theta = 0`` is the right endpoint.  The
    cumulative series ``mass_from_right(theta) = int_{x(theta)}^beta psi``.
    """

    alpha: float
    beta: float
    psi: C.Chebyshev
    mass: C.Chebyshev

    @property
    def s(self) -> float:
        return 0.5 * (self.alpha + self.beta)

    @property
    def d(self) -> float:
        return 0.5 * (self.beta - self.alpha)

    def theta(self, x):
        return np.arccos(np.clip((np.asarray(x, dtype=float) - self.s) / self.d, -1.0, 1.0))

    def __call__(self, x):
        return self.psi(self.theta(x))

    def mass_right(self, x):
        return self.mass(self.theta(x))


def _build_band_series(psi_theta: Callable, alpha: float, beta: float, tol: float = 1e-13,
                       max_deg: int = 4096) -> BandSeries:
    """Adaptive Chebyshev interpolation of ``psi`` in the angle variable."""
    d = 0.5 * (beta - alpha)
    deg = 32
    while True:
        ser = C.Chebyshev.interpolate(psi_theta, deg, domain=[0.0, math.pi])
        tail = np.max(np.abs(ser.coef[-max(4, deg // 8):]))
        scale = max(1.0, np.max(np.abs(ser.coef)))
        if tail < tol * scale or deg >= max_deg:
            break
        deg *= 2
    # d(mass)/dtheta = psi(x(theta)) * d sin(theta)
    mser = C.Chebyshev.interpolate(lambda t: ser(t) * d * np.sin(t), deg + 2, domain=[0.0, math.pi])
    mass = mser.integ(lbnd=0.0)
    return BandSeries(alpha, beta, ser.trim(tol * 1e-3 * scale), mass)


@dataclass(frozen=True)
class EquilibriumMeasure:
    c: float
    a: float
    b: float
    bands: tuple  # ((alpha, beta), ...)
    gap_types: tuple  # one tag per gap, left to right (exterior gaps included)
    ell_c: float
    rho0: Callable
    source: str  # "HahnClosedForm" | "KrawtchoukEndpoint" | "OneBand" | "NumericalQP"
    grid_x: np.ndarray = field(repr=False)
    grid_density: np.ndarray = field(repr=False)
    band_series: BandSeries | None = field(default=None, repr=False)
    edge_coeffs: dict = field(default_factory=dict)  # {"alpha": B_L, "beta": B_R}
    field_: ExternalField | None = field(default=None, repr=False)
    params: dict = field(default_factory=dict)
    cells: tuple | None = field(default=None, repr=False)  # QP: (edges, masses)

    # -- geometry -----------------------------------------------------------
    @property
    def alpha(self) -> float:
        self._one_band()
        return self.bands[0][0]

    @property
    def beta(self) -> float:
        self._one_band()
        return self.bands[0][1]

    def _one_band(self):
        if len(self.bands) != 1:
            raise MultiBand(f"measure has {len(self.bands)} bands")

    @property
    def configuration(self) -> str:
        letters = {VOID: "V", SAT: "S"}
        parts = []
        gaps = list(self.gap_types)
        for i, _ in enumerate(self.bands):
            parts.append(letters[gaps[i]])
            parts.append("B")
        parts.append(letters[gaps[-1]])
        return "".join(parts)

    def gaps(self) -> list:
        """Gap intervals with their types, left to right."""
        ends = [self.a]
        for al, be in self.bands:
            ends += [al, be]
        ends.append(self.b)
        return [((ends[2 * i], ends[2 * i + 1]), self.gap_types[i]) for i in range(len(self.bands) + 1)]

    def region(self, x: float) -> str:
        for al, be in self.bands:
            if al < x < be:
                return BAND
        for (l, r), t in self.gaps():
            if l <= x <= r:
                return t
        raise ValidationError(f"{x} outside [{self.a}, {self.b}]")

    # -- density ------------------------------------------------------------
    def constraint_hi(self, x):
        return np.asarray(self.rho0(np.asarray(x, dtype=float)), dtype=float) / self.c

    def density(self, x):
        """Total density ``dmu/dx`` (band formula plus gap constants)."""
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros_like(xs)
        if self.cells is not None:
            edges, masses = self.cells
            idx = np.clip(np.searchsorted(edges, xs, side="right") - 1, 0, len(masses) - 1)
            out = masses[idx] / np.diff(edges)[idx]
            out = np.where((xs < self.a) | (xs > self.b), 0.0, out)
            return out if np.ndim(x) else float(out[0])
        for (l, r), t in self.gaps():
            if t == SAT:
                sel = (xs >= l) & (xs <= r)
                out[sel] = self.constraint_hi(xs[sel])
        al, be = self.bands[0]
        sel = (xs > al) & (xs < be)
        if np.any(sel):
            out[sel] = self.band_series(xs[sel])
        return out if np.ndim(x) else float(out[0])

    def band_density(self, x):
        """Band formula continued to the closed band (used near edges)."""
        return self.band_series(x)

    def mass_right(self, x: float) -> float:
        """``mu([x, b])``."""
        if self.cells is not None:
            edges, masses = self.cells
            j = int(np.clip(np.searchsorted(edges, x, side="right") - 1, 0, len(masses) - 1))
            frac = (edges[j + 1] - x) / (edges[j + 1] - edges[j])
            return float(masses[j] * np.clip(frac, 0, 1) + masses[j + 1:].sum()) if x >= self.a else 1.0
        total = 0.0
        al, be = self.bands[0]
        for (l, r), t in self.gaps():
            if t == SAT:
                lo = max(l, x)
                if r > lo:
                    total += self._sat_mass(lo, r)
        if x < be:
            total += float(self.band_series.mass_right(max(x, al)))
        return total

    def _sat_mass(self, l: float, r: float) -> float:
        if isinstance(self.rho0, UniformDensity):
            return (r - l) / (self.rho0.b - self.rho0.a) / self.c
        return integrate.quad(self.rho0, l, r, epsabs=1e-14, epsrel=1e-13)[0] / self.c

    def total_mass(self) -> float:
        return self.mass_right(self.a)

    # -- export -------------------------------------------------------------
    def to_csv(self, config: dict | None = None) -> str:
        rows = []
        for x, dens in zip(self.grid_x, self.grid_density):
            rows.append((float(x), float(dens), 0.0, float(self.constraint_hi(x)), self.region(float(x))))
        return csv_text(["x", "density", "constraint_lo", "constraint_hi", "region_tag"], rows, config)

    def summary(self) -> dict:
        out = {
            "c": self.c,
            "bands": [list(b) for b in self.bands],
            "gap_types": list(self.gap_types),
            "configuration": self.configuration,
            "ell_c": self.ell_c,
            "source": self.source,
        }
        if "c_A" in self.params:
            out["c_A"] = self.params["c_A"]
            out["c_B"] = self.params["c_B"]
        return out

    def to_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True)


def _grid(a, b, n=1001):
    return np.linspace(a, b, n)


# ---------------------------------------------------------------------------
# Hahn closed form
# ---------------------------------------------------------------------------


def hahn_critical_c(A: float, B: float) -> tuple[float, float]:
    s = A + B
    return (-s + math.sqrt(s * s + 4 * A)) / 2, (-s + math.sqrt(s * s + 4 * B)) / 2


def hahn_endpoints(A: float, B: float, c: float) -> tuple[float, float]:
    s = A + B
    D = c * (1 - c) * (A + c) * (B + c) * (s + c) * (s + c + 1)
    num = (B - A + 2) * c * c + s * (B - A + 2) * c + A * s
    den = (s + 2 * c) ** 2
    r = 2 * math.sqrt(max(D, 0.0))
    return (num - r) / den, (num + r) / den


def _xlogx(t: float) -> float:
    return 0.0 if t == 0 else t * math.log(t)


def hahn_equilibrium(A: float, B: float, c: float, *, grid_points: int = 1001) -> EquilibriumMeasure:
    """Closed-form equilibrium measure for the Hahn field on ``(0, 1)``.

    For ``A > B`` the problem is solved with ``A`` and ``B`` swapped and
    reflected through ``x -> 1 - x``; the field changes only by a constant,
    which shifts the Lagrange multiplier.
    """
    if not (0 < c < 1):
        raise BadParams("c must lie in (0, 1)")
    if A < 0 or B < 0 or A + B == 0:
        raise BadParams("need A, B >= 0, not both zero")
    cA, cB = hahn_critical_c(A, B)
    for cc in (cA, cB):
        if abs(c - cc) < EXCEPTIONAL_RADIUS:
            raise ExceptionalC(f"c={c} is within {EXCEPTIONAL_RADIUS} of a critical value {cc}")
    if A > B:
        m = hahn_equilibrium(B, A, c, grid_points=grid_points)
        return _reflect_hahn(m, A, B)

    alpha, beta = hahn_endpoints(A, B, c)
    k1 = math.sqrt((1 + B - alpha) / (1 + B - beta))
    k2 = math.sqrt((1 - alpha) / (1 - beta))
    k3 = math.sqrt((A + alpha) / (A + beta))
    k4 = math.sqrt(alpha / beta)
    ks = (k1, k2, k3, k4)
    if c < cA:
        config, gaps, base, signs = "VBV", (VOID, VOID), 0.0, (-1, 1, 1, -1)
    elif c < cB:
        config, gaps, base, signs = "SBV", (SAT, VOID), 0.0, (-1, 1, 1, 1)
    else:
        config, gaps, base, signs = "SBS", (SAT, SAT), 1.0, (-1, -1, 1, 1)

    def psi_theta(t):
        T = np.tan(np.asarray(t) / 2.0)
        acc = np.zeros_like(T)
        for s_, k in zip(signs, ks):
            acc = acc + s_ * np.arctan(k * T)
        return (base + acc / math.pi) / c

    series = _build_band_series(psi_theta, alpha, beta)

    # Lagrange multiplier: the K constants carry the opposite signs of the density terms
    K1 = sum(-s_ * k / (1 + k) for s_, k in zip(signs, ks))
    K2 = sum(-s_ * k / (1 - k * k) for s_, k in zip(signs, ks))
    K3 = sum(-s_ * math.log1p(k) / (1 - k * k) for s_, k in zip(signs, ks))
    fld = hahn_field(A, B)
    w = beta - alpha
    ell = w * ((math.log(w) - 1) * K1 - 2 * math.log(2) * K2 + 2 * K3) + float(fld(beta))
    if config == "SBV":
        ell += 2 * w * math.log(w) + 2 * alpha - 2 * _xlogx(beta)
    elif config == "SBS":
        ell += 2 - 2 * _xlogx(beta) - 2 * _xlogx(1 - beta)

    # square-root coefficients of the deviation from the active constraint
    sq = math.sqrt(w)
    BR = abs(sum(s_ * k for s_, k in zip(signs, ks))) / (math.pi * c * sq)
    BL = abs(sum(s_ / k for s_, k in zip(signs, ks))) / (math.pi * c * sq)

    m = EquilibriumMeasure(
        c=c, a=0.0, b=1.0, bands=((alpha, beta),), gap_types=gaps, ell_c=ell,
        rho0=UniformDensity(0.0, 1.0), source="HahnClosedForm", grid_x=np.empty(0),
        grid_density=np.empty(0), band_series=series, edge_coeffs={"alpha": BL, "beta": BR},
        field_=fld, params={"A": A, "B": B, "c_A": cA, "c_B": cB, "k": ks, "configuration": config},
    )
    gx = _grid(0.0, 1.0, grid_points)
    return replace(m, grid_x=gx, grid_density=m.density(gx))


def _reflect_hahn(m: EquilibriumMeasure, A: float, B: float) -> EquilibriumMeasure:
    alpha, beta = 1 - m.beta, 1 - m.alpha
    old = m.band_series
    # theta -> pi - theta under x -> 1 - x
    psi = C.Chebyshev.interpolate(lambda t: old.psi(math.pi - np.asarray(t)), len(old.psi.coef) + 1,
                                  domain=[0.0, math.pi])
    d = 0.5 * (beta - alpha)
    mser = C.Chebyshev.interpolate(lambda t: psi(t) * d * np.sin(t), len(psi.coef) + 3, domain=[0.0, math.pi])
    series = BandSeries(alpha, beta, psi, mser.integ(lbnd=0.0))
    delta = (_xlogx(A) + _xlogx(B + 1)) - (_xlogx(B) + _xlogx(A + 1))
    cA, cB = hahn_critical_c(A, B)
    flipped = {"VBV": "VBV", "SBV": "VBS", "SBS": "SBS"}[m.params["configuration"]]
    out = replace(m, bands=((alpha, beta),), gap_types=tuple(reversed(m.gap_types)),
                  ell_c=m.ell_c + delta, band_series=series,
                  edge_coeffs={"alpha": m.edge_coeffs["beta"], "beta": m.edge_coeffs["alpha"]},
                  field_=hahn_field(A, B),
                  params={"A": A, "B": B, "c_A": cA, "c_B": cB, "configuration": flipped})
    return replace(out, grid_density=out.density(out.grid_x))


# ---------------------------------------------------------------------------
# one-band ansatz for a general field
# ---------------------------------------------------------------------------


def _theta_quad(f):
    """``int_0^pi f(theta) dtheta`` by adaptive quadrature."""
    with warnings.catch_warnings():
        # roundoff warnings only mean the 1e-14 request was not fully met
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(f, 0.0, math.pi, limit=400, epsabs=1e-14, epsrel=1e-13)
    return val


def _sat_integrals(fld: ExternalField, alpha, beta, gaps, x=None, powers=(0, 1), eps=None):
    """``sum over saturated gaps of int y^j rho0(y) / R(y) [/(y - x)] dy``.

    ``R(y) = sqrt((y-alpha)(y-beta))`` is negative left of the band and
    positive right of it.  The substitutions ``y = alpha - t^2`` and
    ``y = beta + t^2`` remove the endpoint singularities.
    """
    out = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for j in powers:
            out.append(_sat_integral_one(fld, alpha, beta, gaps, x, j, eps))
    return out


def _sat_integral_one(fld, alpha, beta, gaps, x, j, eps_pair=None):
    """One term of :func:`_sat_integrals`.

    With ``x`` inside the band the integrand is nearly singular when ``x``
    approaches the saturated endpoint; after ``y = edge -+ t^2`` the kernel
    is ``1/(t^2 + eps)`` and its singular part is integrated exactly.
    ``eps_pair = (x - alpha, beta - x)`` may be supplied when the caller
    knows these distances more accurately than the subtraction gives.
    """
    if x is not None and eps_pair is None:
        eps_pair = (x - alpha, beta - x)
    tot = 0.0
    if gaps[0] == SAT and alpha > fld.a:
        L = math.sqrt(alpha - fld.a)

        def h(t):
            y = alpha - t * t
            return y ** j * float(fld.rho0(y)) / math.sqrt(beta - y)

        if x is None:
            tot += -2.0 * integrate.quad(h, 0.0, L, limit=200, epsabs=1e-14, epsrel=1e-12)[0]
        else:
            eps = eps_pair[0]  # y - x = -(t^2 + eps)
            h0 = h(0.0)
            reg = integrate.quad(lambda t: (h(t) - h0) / (t * t + eps), 0.0, L, limit=200,
                                 epsabs=1e-14, epsrel=1e-12)[0]
            tot += 2.0 * (reg + h0 * math.atan(L / math.sqrt(eps)) / math.sqrt(eps))
    if gaps[1] == SAT and beta < fld.b:
        L = math.sqrt(fld.b - beta)

        def g(t):
            y = beta + t * t
            return y ** j * float(fld.rho0(y)) / math.sqrt(y - alpha)

        if x is None:
            tot += 2.0 * integrate.quad(g, 0.0, L, limit=200, epsabs=1e-14, epsrel=1e-12)[0]
        else:
            eps = eps_pair[1]  # y - x = t^2 + eps
            g0 = g(0.0)
            reg = integrate.quad(lambda t: (g(t) - g0) / (t * t + eps), 0.0, L, limit=200,
                                 epsabs=1e-14, epsrel=1e-12)[0]
            tot += 2.0 * (reg + g0 * math.atan(L / math.sqrt(eps)) / math.sqrt(eps))
    return tot


def _moment_residual(fld: ExternalField, c: float, gaps, alpha: float, beta: float):
    s, d = 0.5 * (alpha + beta), 0.5 * (beta - alpha)
    S0, S1 = _sat_integrals(fld, alpha, beta, gaps)
    I0 = _theta_quad(lambda t: float(fld.d(s + d * math.cos(t))))
    I1 = _theta_quad(lambda t: (s + d * math.cos(t)) * float(fld.d(s + d * math.cos(t))))
    return np.array([S0 + I0 / (2 * math.pi), S1 + I1 / (2 * math.pi) - c])


def _one_band_density(fld: ExternalField, c: float, gaps, alpha: float, beta: float):
    s, d = 0.5 * (alpha + beta), 0.5 * (beta - alpha)
    nodes, wts = np.polynomial.legendre.leggauss(256)
    th = 0.5 * math.pi * (nodes + 1)
    wth = 0.5 * math.pi * wts
    ys = s + d * np.cos(th)
    dphi_y = fld.d(ys)

    def psi_theta(theta):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        out = np.empty_like(theta)
        for i, t in enumerate(theta):
            x = s + d * math.cos(t)
            r = d * math.sin(t)
            dx = float(fld.d(x))
            diff = ys - x
            with np.errstate(divide="ignore", invalid="ignore"):
                q = np.where(np.abs(diff) > 1e-12 * d, (dphi_y - dx) / diff, 0.0)
            P = float(np.dot(wth, q))
            if r == 0.0:
                out[i] = np.nan
                continue
            epsp = (2 * d * math.cos(t / 2) ** 2, 2 * d * math.sin(t / 2) ** 2)
            T = _sat_integrals(fld, alpha, beta, gaps, x=x, powers=(0,), eps=epsp)[0]
            out[i] = r * (2 * math.pi * T + P) / (2 * math.pi ** 2 * c)
        return out

    # endpoint values are limits; replace NaN by the constraint/zero value
    def psi_safe(theta):
        v = psi_theta(theta)
        theta = np.atleast_1d(theta)
        for i in range(len(v)):
            if not np.isfinite(v[i]):
                # theta = 0 -> right edge, theta = pi -> left edge
                gap = gaps[1] if theta[i] < 1 else gaps[0]
                x = beta if theta[i] < 1 else alpha
                v[i] = float(fld.rho0(x)) / c if gap == SAT else 0.0
        return v

    return psi_safe


def _edge_coefficients(series: BandSeries) -> dict:
    """Square-root coefficients ``lim |psi - limit| / sqrt(dist)`` at both edges.

    Near ``theta = 0`` we have ``sqrt(beta - x) = sqrt(2d) sin(theta/2)``,
    and near ``theta = pi`` ``sqrt(x - alpha) = sqrt(2d) cos(theta/2)``, so
    each coefficient is ``sqrt(2/d)`` times a derivative of the series.
    """
    dpsi = series.psi.deriv()
    k = math.sqrt(2.0 / series.d)
    return {"alpha": k * abs(float(dpsi(math.pi))), "beta": k * abs(float(dpsi(0.0)))}


def one_band_equilibrium(fld: ExternalField, c: float, gaps: Sequence[str], guess: tuple[float, float],
                         *, source: str = "OneBand", grid_points: int = 1001, params: dict | None = None,
                         ell_point: float | None = None) -> EquilibriumMeasure:
    """Solve the one-band moment conditions for the endpoints and build the measure.

    ``gaps`` gives the types of the two exterior gaps.  Newton (``hybr``)
    starts from ``guess``; if it fails, a small set of perturbed starts is
    tried before giving up.
    """
    gaps = tuple(gaps)
    if len(gaps) != 2 or any(g not in (VOID, SAT) for g in gaps):
        raise BadParams("gaps must be two of 'void'/'saturated'")
    a, b = fld.a, fld.b

    def F(v):
        al, be = v
        if not (a < al < be < b):
            return np.array([1e3, 1e3])
        return _moment_residual(fld, c, gaps, al, be)

    starts = [guess]
    g0, g1 = guess
    mid = 0.5 * (g0 + g1)
    for f in (0.5, 0.8, 1.2):
        half = 0.5 * (g1 - g0) * f
        starts.append((max(a + 1e-6, mid - half), min(b - 1e-6, mid + half)))
    sol = None
    for st in starts:
        res = optimize.root(F, np.array(st, dtype=float), method="hybr", tol=1e-14)
        if res.success and np.max(np.abs(F(res.x))) < 1e-11:
            sol = res.x
            break
    if sol is None:
        raise NoConvergence("one-band endpoint equations did not converge")
    alpha, beta = float(sol[0]), float(sol[1])
    psi_theta = _one_band_density(fld, c, gaps, alpha, beta)
    series = _build_band_series(psi_theta, alpha, beta, tol=1e-12, max_deg=512)
    m = EquilibriumMeasure(c=c, a=a, b=b, bands=((alpha, beta),), gap_types=gaps, ell_c=float("nan"),
                           rho0=fld.rho0, source=source, grid_x=np.empty(0), grid_density=np.empty(0),
                           band_series=series, field_=fld, params=dict(params or {}))
    w = beta - alpha
    x_mid = alpha + 0.5 * w if ell_point is None else ell_point
    ell = float(fld(x_mid)) - 2 * c * log_potential(m, x_mid)
    gx = _grid(a, b, grid_points)
    m = replace(m, ell_c=ell, edge_coeffs=_edge_coefficients(series))
    return replace(m, grid_x=gx, grid_density=m.density(gx))


def krawtchouk_endpoints(p: float, q: float, c: float):
    """Band endpoints and exterior gap types for the Krawtchouk field."""
    if not (p > 0 and q > 0):
        raise BadParams("need p, q > 0")
    if not 0 < c < 1:
        raise BadParams("c must lie in (0, 1)")
    pn, qn = p / (p + q), q / (p + q)
    lo, hi = min(pn, qn), max(pn, qn)
    for cc in (lo, hi):
        if abs(c - cc) < EXCEPTIONAL_RADIUS:
            raise ExceptionalC(f"c={c} is within {EXCEPTIONAL_RADIUS} of the critical value {cc}")
    if c < lo:
        gaps = (VOID, VOID)
    elif c > hi:
        gaps = (SAT, SAT)
    elif pn < qn:
        gaps = (SAT, VOID)
    else:
        gaps = (VOID, SAT)
    m = krawtchouk_equilibrium(p, q, c, grid_points=3)
    return m.alpha, m.beta, gaps


def krawtchouk_guess(pn: float, qn: float, c: float) -> tuple[float, float]:
    centre = pn + c * (qn - pn)
    half = 2 * math.sqrt(pn * qn * c * (1 - c))
    eps = 1e-3
    return max(eps, centre - half), min(1 - eps, centre + half)


def krawtchouk_equilibrium(p: float, q: float, c: float, *, grid_points: int = 1001) -> EquilibriumMeasure:
    if not (p > 0 and q > 0):
        raise BadParams("need p, q > 0")
    if not 0 < c < 1:
        raise BadParams("c must lie in (0, 1)")
    pn, qn = p / (p + q), q / (p + q)
    lo, hi = min(pn, qn), max(pn, qn)
    for cc in (lo, hi):
        if abs(c - cc) < EXCEPTIONAL_RADIUS:
            raise ExceptionalC(f"c={c} is within {EXCEPTIONAL_RADIUS} of the critical value {cc}")
    if c < lo:
        gaps = (VOID, VOID)
    elif c > hi:
        gaps = (SAT, SAT)
    elif pn < qn:
        gaps = (SAT, VOID)
    else:
        gaps = (VOID, SAT)
    fld = krawtchouk_field(pn, qn)
    return one_band_equilibrium(fld, c, gaps, krawtchouk_guess(pn, qn, c), source="KrawtchoukEndpoint",
                                grid_points=grid_points, params={"p": pn, "q": qn})


# ---------------------------------------------------------------------------
# logarithmic potential and variational derivative
# ---------------------------------------------------------------------------


def _uniform_cell_log(x: float, l: float, r: float) -> float:
    """``int_l^r log|x-y| dy``."""
    def H(y):
        u = x - y
        return -(u * math.log(abs(u)) if u != 0 else 0.0) + u
    return H(r) - H(l)


def log_potential(m: EquilibriumMeasure, x: float) -> float:
    """``U(x) = int log|x-y| dmu(y)`` for real ``x``."""
    x = float(x)
    if m.cells is not None:
        edges, masses = m.cells
        tot = 0.0
        for j in range(len(masses)):
            if masses[j] != 0.0:
                tot += masses[j] / (edges[j + 1] - edges[j]) * _uniform_cell_log(x, edges[j], edges[j + 1])
        return tot
    tot = 0.0
    uniform = isinstance(m.rho0, UniformDensity)
    for (l, r), t in m.gaps():
        if t != SAT or r <= l:
            continue
        if uniform:
            tot += _uniform_cell_log(x, l, r) / (m.rho0.b - m.rho0.a) / m.c
        else:
            pts = [x] if l < x < r else None
            tot += integrate.quad(lambda y: math.log(abs(x - y)) * float(m.rho0(y)) / m.c, l, r,
                                  points=pts, limit=200, epsabs=1e-13, epsrel=1e-12)[0]
    al, be = m.bands[0]
    ser = m.band_series
    d = 0.5 * (be - al)
    s = 0.5 * (al + be)
    # integrate in theta so the square-root edges are smooth; split at the log singularity
    g = lambda t: math.log(abs(x - (s + d * math.cos(t))) or 1e-300) * float(ser.psi(t)) * d * math.sin(t)
    pts = None
    if al < x < be:
        pts = [float(math.acos((x - s) / d))]
    val, err = integrate.quad(g, 0.0, math.pi, points=pts, limit=400, epsabs=1e-13, epsrel=1e-12)
    return tot + val


def variational_derivative(m: EquilibriumMeasure, phi: Callable, x: float) -> float:
    return float(phi(x)) - 2 * m.c * log_potential(m, x)


@dataclass(frozen=True)
class VariationalReport:
    band_residual: float
    void_margin: float
    sat_margin: float
    ell_c: float

    def ok(self, tol: float) -> bool:
        return self.band_residual <= tol and self.void_margin > 0 and self.sat_margin > 0


def verify_variational(m: EquilibriumMeasure, phi: Callable, c: float | None = None, *,
                       points: int = 41, edge_margin: float = 0.02) -> VariationalReport:
    """Evaluate ``deltaE/deltamu - ell_c`` on verification grids.

    Gap grids stay ``edge_margin`` (relative to each interval) away from
    the gap endpoints, where the margin degenerates like ``|x - edge|^{3/2}``.
    """
    if c is not None and abs(c - m.c) > 1e-15:
        raise ValidationError("c does not match the measure")
    band_res = 0.0
    for al, be in m.bands:
        w = be - al
        for x in np.linspace(al + edge_margin * w, be - edge_margin * w, points):
            band_res = max(band_res, abs(variational_derivative(m, phi, x) - m.ell_c))
    void_m, sat_m = math.inf, math.inf
    for (l, r), t in m.gaps():
        w = r - l
        if w <= 0:
            continue
        for x in np.linspace(l + edge_margin * w, r - edge_margin * w, max(5, points // 2)):
            v = variational_derivative(m, phi, x) - m.ell_c
            if t == VOID:
                void_m = min(void_m, v)
            else:
                sat_m = min(sat_m, -v)
    return VariationalReport(band_res, void_m, sat_m, m.ell_c)


# ---------------------------------------------------------------------------
# discretised quadratic program
# ---------------------------------------------------------------------------


def _cell_log_kernel(M: int, delta: float) -> np.ndarray:
    """Exact cell-averaged ``-log|x-y|`` for equal cells (Toeplitz first column)."""
    def F(u):
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(u == 0, 0.0, 0.5 * u * u * np.log(np.abs(u)) - 0.75 * u * u)
    k = np.arange(M, dtype=float)
    avg = (F((k + 1) * delta) - 2 * F(k * delta) + F((k - 1) * delta)) / delta ** 2
    return -avg


def _project_box_simplex(v: np.ndarray, ub: np.ndarray, total: float = 1.0) -> np.ndarray:
    """Euclidean projection onto ``{0 <= m <= ub, sum m = total}``."""
    lo = np.min(v - ub) - 1.0
    hi = np.max(v) + 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        s = np.clip(v - mid, 0.0, ub).sum()
        if s > total:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-16 * max(1.0, abs(mid)):
            break
    return np.clip(v - 0.5 * (lo + hi), 0.0, ub)


@dataclass(frozen=True)
class QPResult:
    masses: np.ndarray
    gradient: np.ndarray
    multiplier: float
    energy_history: np.ndarray
    iterations: int


def _qp_solve(Q: np.ndarray, f: np.ndarray, ub: np.ndarray, *, max_iter: int, tol: float) -> QPResult:
    M = len(f)
    L = float(linalg.eigh(Q, eigvals_only=True, subset_by_index=[M - 1, M - 1])[0])
    step = 1.0 / L

    def energy(m):
        return 0.5 * m @ (Q @ m) + f @ m

    m = _project_box_simplex(np.full(M, 1.0 / M), ub)
    y, t = m.copy(), 1.0
    e = energy(m)
    hist = [e]
    it = 0
    for it in range(1, max_iter + 1):
        z = _project_box_simplex(y - step * (Q @ y + f), ub)
        ez = energy(z)
        t_new = 0.5 * (1 + math.sqrt(1 + 4 * t * t))
        if ez <= e:
            m_new, e_new = z, ez
        else:  # monotone variant: keep the previous iterate
            m_new, e_new = m, e
        y = m_new + (t / t_new) * (z - m_new) + ((t - 1) / t_new) * (m_new - m)
        dm = np.max(np.abs(m_new - m))
        m, e, t = m_new, e_new, t_new
        hist.append(e)
        if dm < tol * step and it > 50:
            break
    m = _active_set_polish(Q, f, ub, m)
    e_final = energy(m)
    if e_final <= hist[-1]:
        hist.append(e_final)
    g = Q @ m + f
    free = (m > 1e-12 * ub) & (m < ub * (1 - 1e-12))
    lam = float(np.median(g[free])) if np.any(free) else float(np.median(g))
    return QPResult(m, g, lam, np.array(hist), it)


def _active_set_polish(Q, f, ub, m0, max_rounds: int = 50):
    """Primal-dual active-set iterations started from the first-order solution."""
    M = len(f)
    g = Q @ m0 + f
    lower = m0 <= 1e-9 * ub
    upper = m0 >= ub * (1 - 1e-9)
    best = m0
    best_e = 0.5 * m0 @ (Q @ m0) + f @ m0
    for _ in range(max_rounds):
        free = ~(lower | upper)
        if not np.any(free):
            break
        fixed = np.where(upper, ub, 0.0)
        Fi = np.where(free)[0]
        nF = len(Fi)
        K = np.zeros((nF + 1, nF + 1))
        K[:nF, :nF] = Q[np.ix_(Fi, Fi)]
        K[:nF, nF] = -1.0
        K[nF, :nF] = 1.0
        rhs = np.concatenate([-(f[Fi] + Q[Fi] @ fixed), [1.0 - fixed.sum()]])
        try:
            sol = linalg.solve(K, rhs)
        except linalg.LinAlgError:
            break
        m = fixed.copy()
        m[Fi] = sol[:nF]
        lam = sol[nF]
        g = Q @ m + f
        new_lower = (m < 0) | (lower & (g >= lam))
        new_upper = (m > ub) | (upper & (g <= lam))
        new_lower &= ~new_upper
        feasible = np.all(m >= -1e-14) and np.all(m <= ub + 1e-14)
        if feasible:
            mc = np.clip(m, 0, ub)
            e = 0.5 * mc @ (Q @ mc) + f @ mc
            if e <= best_e + 1e-15 * abs(best_e):
                best, best_e = mc, e
        if np.array_equal(new_lower, lower) and np.array_equal(new_upper, upper):
            break
        lower, upper = new_lower, new_upper
    return best


def solve_equilibrium_qp(phi: Callable, rho0: Callable, c: float, M: int = 512, *, a: float = 0.0,
                         b: float = 1.0, max_iter: int = 20000, tol: float = 1e-13,
                         margin: float = 1e-6, min_run: int = 3) -> EquilibriumMeasure:
    """Discretise the energy on ``M`` equal cells and solve the resulting QP.

    Cells carry masses ``m_i`` with ``0 <= m_i <= int_cell rho0 / c`` and
    ``sum m_i = 1``.  The interaction matrix is the exact cell average of
    ``-2c log|x-y|`` and the field term is the cell average of ``phi``.
    """
    if M < 64:
        raise ValidationError("M must be at least 64")
    if not 0 < c < 1:
        raise BadParams("c must lie in (0, 1)")
    edges = np.linspace(a, b, M + 1)
    delta = (b - a) / M
    gl, gw = np.polynomial.legendre.leggauss(6)
    xs = 0.5 * (edges[:-1] + edges[1:])
    pts = xs[:, None] + 0.5 * delta * gl[None, :]
    fvals = np.asarray(phi(pts.ravel()), dtype=float).reshape(pts.shape)
    rvals = np.asarray(rho0(pts.ravel()), dtype=float).reshape(pts.shape)
    favg = (fvals * gw[None, :]).sum(axis=1) / 2.0
    cell_rho = (rvals * gw[None, :]).sum(axis=1) / 2.0 * delta
    if not np.all(np.isfinite(favg)):
        raise ValidationError("phi must be finite on the open interval")
    ub = cell_rho / c
    Q = 2 * c * linalg.toeplitz(_cell_log_kernel(M, delta))
    res = _qp_solve(Q, favg, ub, max_iter=max_iter, tol=tol)
    m = res.masses
    if res.iterations >= max_iter and not np.all(np.isfinite(m)):
        raise NoConvergence("projected gradient did not converge")

    interior = (m > margin * ub) & (m < ub * (1 - margin))
    runs = []
    i = 0
    while i < M:
        if interior[i]:
            j = i
            while j + 1 < M and interior[j + 1]:
                j += 1
            if j - i + 1 >= min_run:
                runs.append((i, j))
            i = j + 1
        else:
            i += 1
    if not runs:
        raise DegenerateBandDetection("no interior run of cells found")
    bands = tuple((float(edges[i]), float(edges[j + 1])) for i, j in runs)

    def gap_tag(lo_idx, hi_idx):
        if hi_idx < lo_idx:
            return VOID
        seg = m[lo_idx:hi_idx + 1] / ub[lo_idx:hi_idx + 1]
        return SAT if np.mean(seg) > 0.5 else VOID

    gap_types = [gap_tag(0, runs[0][0] - 1)]
    for (i0, j0), (i1, j1) in zip(runs[:-1], runs[1:]):
        gap_types.append(gap_tag(j0 + 1, i1 - 1))
    gap_types.append(gap_tag(runs[-1][1] + 1, M - 1))

    band_idx = np.concatenate([np.arange(i, j + 1) for i, j in runs])
    trims = []
    for i, j in runs:
        n = j - i + 1
        cut = int(0.1 * n)
        trims.append(np.arange(i + cut, j + 1 - cut))
    trimmed = np.concatenate(trims)
    ell = float(np.mean(res.gradient[trimmed]))

    meas = EquilibriumMeasure(
        c=c, a=a, b=b, bands=bands, gap_types=tuple(gap_types), ell_c=ell, rho0=rho0,
        source="NumericalQP", grid_x=xs, grid_density=m / delta, cells=(edges, m),
        params={"M": M, "iterations": res.iterations, "energy_history": res.energy_history,
                "band_cells": band_idx, "gradient": res.gradient, "upper": ub},
    )
    return meas


# ---------------------------------------------------------------------------
# particle/hole duality
# ---------------------------------------------------------------------------


def dual_measure(m: EquilibriumMeasure) -> EquilibriumMeasure:
    """Equilibrium measure of the dual problem ``(1 - c, -V, rho0)``."""
    c = m.c
    cb = 1.0 - c
    swap = {VOID: SAT, SAT: VOID}
    gaps = tuple(swap[t] for t in m.gap_types)
    fld = m.field_.negated_V() if m.field_ is not None else None
    params = dict(m.params)
    if "configuration" in params:
        params["configuration"] = "".join({"V": "S", "S": "V"}.get(ch, ch) for ch in params["configuration"])
    params["dual_of"] = m.source
    edge = {k: v * c / cb for k, v in m.edge_coeffs.items()}
    if m.cells is not None:
        edges, masses = m.cells
        cell_rho = masses * 0 + np.diff(edges) * np.asarray(m.rho0(0.5 * (edges[:-1] + edges[1:])), dtype=float)
        if "upper" in m.params:
            cell_rho = m.params["upper"] * c
        new = (cell_rho - c * masses) / cb
        return replace(m, c=cb, gap_types=gaps, ell_c=-m.ell_c, grid_density=new / np.diff(edges),
                       cells=(edges, new), field_=fld, edge_coeffs=edge,
                       params={**params, "upper": cell_rho / cb})
    ser = m.band_series
    rho = m.rho0
    s_, d_ = ser.s, ser.d
    psi = C.Chebyshev.interpolate(
        lambda t: (np.asarray(rho(s_ + d_ * np.cos(t)), dtype=float) - c * ser.psi(t)) / cb,
        len(ser.psi.coef) + 1, domain=[0.0, math.pi])
    mser = C.Chebyshev.interpolate(lambda t: psi(t) * d_ * np.sin(t), len(psi.coef) + 3, domain=[0.0, math.pi])
    series = BandSeries(ser.alpha, ser.beta, psi, mser.integ(lbnd=0.0))
    out = replace(m, c=cb, gap_types=gaps, ell_c=-m.ell_c, band_series=series, field_=fld,
                  edge_coeffs=edge, params=params)
    return replace(out, grid_density=out.density(out.grid_x))
