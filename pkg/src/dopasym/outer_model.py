"""One-band analytic ingredients for the asymptotic formulae.

Everything here is built from a single-band equilibrium measure with
endpoints ``alpha < beta`` together with the correction ``eta`` and the
degree offset ``kappa = k - cN``.

Notation (all principal branches unless stated):

* ``R(z) = sqrt(z - alpha) sqrt(z - beta)``, cut on ``[alpha, beta]``;
* ``J(z) = (z - s - R(z)) / d`` with ``s, d`` the band centre and
  half-width.  ``J`` maps the slit plane onto the punctured unit disc and
  equals ``exp(-i theta)`` on the upper side of the band, where
  ``x = s + d cos(theta)``;
* ``h(z) = kappa log(d / (2 J)) + 1/2 sum_{n>=1} c_n J^n`` where ``c_n``
  are the Chebyshev coefficients of ``eta`` on the band.  This solves
  ``h_+ + h_- = eta - gamma`` on the band and behaves like
  ``kappa log z + o(1)`` at infinity;
* ``gamma = c_0 - 2 kappa log((beta - alpha)/4)``, which equals
  ``eta(beta) - 2 h(beta)``.

Real arguments are interpreted as boundary values; the ``side`` argument
(``+1`` from above, ``-1`` from below) selects which one.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy import integrate

from ._io import csv_text
from .equilibrium import BAND, SAT, VOID, EquilibriumMeasure, log_potential
from .errors import EdgeMismatch, MultiBand, QuadratureFailure, TooCloseToEdge, ValidationError
from .lattice import UniformDensity

__all__ = [
    "OuterModel",
    "build_outer_model",
    "eval_potentials",
    "edge_maps",
    "band_phase",
    "h_by_quadrature",
]


def _as_eta(eta) -> Callable:
    if eta is None:
        return lambda x: 0.0 * np.asarray(x, dtype=float)
    if callable(eta):
        return eta
    val = float(eta)
    return lambda x, v=val: v + 0.0 * np.asarray(x, dtype=float)


@dataclass(frozen=True)
class OuterModel:
    measure: EquilibriumMeasure
    eta: Callable
    kappa: float
    N: int
    c: float
    gamma_const: float
    eta_series: C.Chebyshev = field(repr=False)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def alpha(self) -> float:
        return self.measure.alpha

    @property
    def beta(self) -> float:
        return self.measure.beta

    @property
    def s(self) -> float:
        return 0.5 * (self.alpha + self.beta)

    @property
    def d(self) -> float:
        return 0.5 * (self.beta - self.alpha)

    @property
    def k(self) -> float:
        return self.c * self.N + self.kappa

    # -- elementary functions -------------------------------------------------
    def _real_branch(self, x: float, side: int):
        """``(R, J, log((x - s + R)/2))`` as boundary values at real ``x``."""
        al, be, s, d = self.alpha, self.beta, self.s, self.d
        if x >= be:
            R = math.sqrt((x - al) * (x - be))
            return complex(R), complex((x - s - R) / d), complex(math.log((x - s + R) / 2))
        if x <= al:
            R = -math.sqrt((al - x) * (be - x))
            return complex(R), complex((x - s - R) / d), complex(math.log(abs(x - s + R) / 2), side * math.pi)
        th = math.acos(max(-1.0, min(1.0, (x - s) / d)))
        R = 1j * side * math.sqrt((x - al) * (be - x))
        return R, cmath.exp(-1j * side * th), complex(math.log(d / 2), side * th)

    def _branch(self, z, side: int | None = None):
        z = complex(z)
        if z.imag == 0.0:
            sd = side if side is not None else (1 if math.copysign(1.0, z.imag) > 0 else -1)
            return (z.real, sd) + self._real_branch(z.real, sd)
        R = cmath.sqrt(z - self.alpha) * cmath.sqrt(z - self.beta)
        J = (z - self.s - R) / self.d
        return (z, 1 if z.imag > 0 else -1, R, J, cmath.log((z - self.s + R) / 2))

    def R(self, z, side: int | None = None) -> complex:
        return self._branch(z, side)[2]

    def lam(self, z, side: int | None = None) -> complex:
        """``lambda(z)`` with ``lambda^4 = (z - alpha)/(z - beta)``, ``lambda -> 1`` at infinity above."""
        z = complex(z)
        sd = side if (z.imag == 0.0 and side is not None) else (1 if math.copysign(1.0, z.imag) > 0 else -1)
        if z.imag == 0.0:
            x = z.real
            al, be = self.alpha, self.beta
            if x > be:
                val = complex(((x - al) / (x - be)) ** 0.25)
            elif x < al:
                val = complex(((al - x) / (be - x)) ** 0.25)
            else:
                val = ((x - al) / (be - x)) ** 0.25 * cmath.exp(-1j * sd * math.pi / 4)
        else:
            val = (z - self.alpha) ** 0.25 / (z - self.beta) ** 0.25
        return val if sd > 0 else -1j * val

    def uv(self, z, side: int | None = None) -> tuple[complex, complex]:
        l = self.lam(z, side)
        return 0.5 * (l + 1 / l), (l - 1 / l) / 2j

    def h(self, z, side: int | None = None) -> complex:
        _, _, _, J, logt = self._branch(z, side)
        cn = self.eta_series.coef
        acc = 0j
        Jn = 1.0 + 0j
        for n in range(1, len(cn)):
            Jn *= J
            acc += cn[n] * Jn
        return self.kappa * logt + 0.5 * acc

    def WZ(self, z, side: int | None = None) -> tuple[complex, complex]:
        z = complex(z)
        upper = (side if (z.imag == 0.0 and side is not None) else math.copysign(1.0, z.imag)) > 0
        u, v = self.uv(z, side)
        eh = cmath.exp(self.h(z, side))
        if upper:
            return u * eh, 1j * v / eh
        return -v * eh, 1j * u / eh

    def W(self, z, side: int | None = None) -> complex:
        return self.WZ(z, side)[0]

    def Z(self, z, side: int | None = None) -> complex:
        return self.WZ(z, side)[1]

    def theta_gap(self, gap: str) -> float:
        """``theta_Gamma`` for the exterior gaps: ``-2 pi c`` on the left, ``0`` on the right."""
        if gap == "left":
            return -2 * math.pi * self.c
        if gap == "right":
            return 0.0
        raise ValidationError("gap must be 'left' or 'right'")

    def H(self, z, gap: str, side: int | None = None) -> tuple[complex, complex]:
        """``(H^+, H^-)`` attached to the exterior gap ``gap``."""
        z = complex(z)
        sg = side if (z.imag == 0.0 and side is not None) else (1 if math.copysign(1.0, z.imag) > 0 else -1)
        W, Z = self.WZ(z, side)
        x = z.real
        e = (self.gamma_const - float(self.eta(x)) - 1j * self.N * sg * self.theta_gap(gap)) / 2
        a = W / math.sqrt(2) * cmath.exp(e)
        b = Z / math.sqrt(2) * cmath.exp(-e)
        return a + b, a - b

    # -- potentials -----------------------------------------------------------
    def mass_right(self, x: float) -> float:
        return self.measure.mass_right(x)

    def Lbar(self, x: float) -> float:
        """``c int log|x - y| dmu(y)`` at real ``x``."""
        x = float(x)
        m = self.measure
        if m.field_ is not None and self.alpha < x < self.beta:
            return 0.5 * (float(m.field_(x)) - m.ell_c)
        return self.c * log_potential(m, x)

    def Lbar_band(self, x: float) -> float:
        """Continuation of the band value ``(phi - ell)/2`` (valid near the band edges)."""
        m = self.measure
        if m.field_ is None:
            raise ValidationError("measure carries no external field")
        return 0.5 * (float(m.field_(x)) - m.ell_c)

    def L(self, z, side: int | None = None) -> complex:
        """``L_c(z) = c int log(z - y) dmu(y)``; boundary values on the real axis."""
        z = complex(z)
        if z.imag == 0.0:
            sd = side if side is not None else (1 if math.copysign(1.0, z.imag) > 0 else -1)
            x = z.real
            Mx = self.mass_right(x) if x >= self.measure.a else 1.0
            return complex(self.Lbar(x), sd * math.pi * self.c * Mx)
        return self.c * _complex_log_potential(self.measure, z)

    def theta0(self, x) -> float:
        """``2 pi int_x^b rho0``."""
        rho = self.measure.rho0
        if isinstance(rho, UniformDensity):
            return 2 * math.pi * (rho.b - x) / (rho.b - rho.a)
        val = integrate.quad(rho, float(x), self.measure.b, epsabs=1e-14, epsrel=1e-13)[0]
        return 2 * math.pi * val

    def theta0_complex(self, z) -> complex:
        rho = self.measure.rho0
        if isinstance(rho, UniformDensity):
            return 2 * math.pi * (rho.b - complex(z)) / (rho.b - rho.a)
        if complex(z).imag != 0:
            raise ValidationError("complex theta0 needs a uniform node density")
        return complex(self.theta0(complex(z).real))

    def xi(self, x: float) -> float:
        """Gap function: ``deltaE/deltamu - ell`` in voids, ``ell - deltaE/deltamu`` in saturated regions."""
        m = self.measure
        v = float(m.field_(x)) - 2 * self.c * log_potential(m, x) - m.ell_c
        reg = m.region(x)
        return -v if reg == SAT else v


def _complex_log_potential(m: EquilibriumMeasure, z: complex) -> complex:
    """``int log(z - y) dmu(y)`` for ``z`` off the real axis."""
    tot = 0j
    uniform = isinstance(m.rho0, UniformDensity)

    def prim(y):
        u = z - y
        return -u * cmath.log(u) + u

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for (l, r), t in m.gaps():
            if t != SAT or r <= l:
                continue
            if uniform:
                tot += (prim(r) - prim(l)) / (m.rho0.b - m.rho0.a) / m.c
            else:
                f = lambda y: cmath.log(z - y) * float(m.rho0(y)) / m.c
                tot += integrate.quad(lambda y: f(y).real, l, r, limit=200)[0]
                tot += 1j * integrate.quad(lambda y: f(y).imag, l, r, limit=200)[0]
        ser = m.band_series
        s, d = ser.s, ser.d
        g = lambda t: cmath.log(z - (s + d * math.cos(t))) * float(ser.psi(t)) * d * math.sin(t)
        re = integrate.quad(lambda t: g(t).real, 0.0, math.pi, limit=400, epsabs=1e-14, epsrel=1e-13)[0]
        im = integrate.quad(lambda t: g(t).imag, 0.0, math.pi, limit=400, epsabs=1e-14, epsrel=1e-13)[0]
    return tot + complex(re, im)


def build_outer_model(m: EquilibriumMeasure, eta=None, kappa: float = 0.0, N: int = 1, *,
                      eta_tol: float = 1e-14, max_deg: int = 256) -> OuterModel:
    """Assemble the one-band model.

    ``eta`` may be ``None`` (zero), a constant, or a callable on real
    arrays.  Its Chebyshev expansion on the band drives ``h`` and ``gamma``.
    """
    if len(m.bands) != 1:
        raise MultiBand(f"outer model needs exactly one band, got {len(m.bands)}")
    if m.band_series is None:
        raise ValidationError("outer model needs an analytic band density (not a QP measure)")
    if N < 1:
        raise ValidationError("N must be positive")
    fn = _as_eta(eta)
    al, be = m.bands[0]
    deg = 8
    while True:
        ser = C.Chebyshev.interpolate(lambda x: np.asarray(fn(x), dtype=float), deg, domain=[al, be])
        coef = ser.coef
        scale = max(1.0, float(np.max(np.abs(coef))))
        if np.max(np.abs(coef[-3:])) < eta_tol * scale or deg >= max_deg:
            break
        deg *= 2
    ser = ser.trim(eta_tol * scale * 1e-2)
    gamma = float(ser.coef[0]) - 2 * kappa * math.log((be - al) / 4)
    return OuterModel(m, fn, float(kappa), int(N), m.c, gamma, ser)


def h_by_quadrature(model: OuterModel, z: complex, *, eta_prime: Callable | None = None,
                    n_theta: int = 200) -> complex:
    """``h(z)`` from ``h'(z) = [(1/2 pi i) int eta' R_+ /(x - z) dx + kappa] / R(z)``.

    The derivative is integrated along the straight segment from ``z`` to
    ``X = beta + 10 (beta - alpha)`` and then along ``[X, inf)``, where the
    ``kappa`` part is handled through ``kappa log`` so that only the
    decaying remainder is integrated.  Independent of the series route
    used by :meth:`OuterModel.h`; intended for cross-checks away from the band.
    """
    al, be, s, d = model.alpha, model.beta, model.s, model.d
    kap = model.kappa
    if eta_prime is None:
        ser = model.eta_series.deriv()
        eta_prime = lambda x: ser(x)
    th, wt = np.polynomial.legendre.leggauss(n_theta)
    th = 0.5 * math.pi * (th + 1)
    wt = 0.5 * math.pi * wt
    xs = s + d * np.cos(th)
    base = np.asarray(eta_prime(xs), dtype=float) * (d * np.sin(th)) ** 2 * wt

    def R(t):
        return cmath.sqrt(t - al) * cmath.sqrt(t - be)

    def hp_eta(t):
        # (1/2 pi i) int eta' R_+ /(x - t) dx with R_+ = i sqrt(...), dx = d sin(theta) dtheta
        return complex(np.sum(base / (xs - t))) / (2 * math.pi) / R(t)

    X = be + 10 * (be - al)
    z = complex(z)
    # segment z -> X, parameter u in [0, 1]
    seg = lambda u: hp_eta(z + u * (X - z)) * (X - z)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        r1 = integrate.quad(lambda u: seg(u).real, 0, 1, limit=200, epsabs=1e-14)[0]
        i1 = integrate.quad(lambda u: seg(u).imag, 0, 1, limit=200, epsabs=1e-14)[0]
        # tail X -> inf with t = X / v
        tail = lambda v: hp_eta(X / v) * X / (v * v) if v > 0 else 0.0
        r2 = integrate.quad(lambda v: complex(tail(v)).real, 0, 1, limit=200, epsabs=1e-15)[0]
    # h_eta(z) = -int_z^inf h_eta'
    h_eta = -(complex(r1, i1) + r2)
    logt = cmath.log((z - s + R(z)) / 2)
    return kap * logt + h_eta


def eval_potentials(model: OuterModel, z, side: int = 1) -> dict:
    """Potentials and phases at ``z``.

    Keys: ``L_c`` (complex), ``Lbar`` (real, only for real ``z`` in
    ``[a, b]``), ``theta``, ``theta0``, ``dEdmu`` (real ``z`` only).
    """
    z = complex(z)
    m = model.measure
    out = {"L_c": model.L(z, side)}
    if z.imag == 0.0:
        x = z.real
        out["theta0"] = model.theta0(x)
        if m.a <= x <= m.b:
            out["Lbar"] = model.Lbar(x)
            if m.field_ is not None:
                out["dEdmu"] = float(m.field_(x)) - 2 * out["Lbar"]
            reg = m.region(x)
            if reg == BAND:
                out["theta"] = -2 * math.pi * model.c * model.mass_right(x)
            else:
                out["theta"] = model.theta_gap("left" if x <= model.alpha else "right")
    else:
        out["theta0"] = model.theta0_complex(z)
    return out


# -- edge maps ------------------------------------------------------------------

EDGES = ("alpha", "beta")


def _edge_info(model: OuterModel, edge: str):
    if edge in ("alpha", "L", "left", "aL"):
        return "alpha", model.measure.gap_types[0], "left"
    if edge in ("beta", "R", "right", "bR"):
        return "beta", model.measure.gap_types[1], "right"
    raise ValidationError(f"unknown edge {edge!r}")


def edge_maps(model: OuterModel, edge: str, z, kind: str | None = None) -> complex:
    """Conformal coordinate ``tau`` near a band edge.

    ``kind`` (``"void"`` or ``"saturated"``) may be given to assert the gap
    type; a mismatch raises :class:`EdgeMismatch`.  Real ``z`` uses the
    band mass inside the band and the gap function ``xi`` outside
    (``tau = -(N xi)^{2/3}``); complex ``z`` uses an analytic fit of
    ``tau/(z - edge)`` across the edge.
    """
    name, gtype, _ = _edge_info(model, edge)
    if kind is not None and kind != gtype:
        raise EdgeMismatch(f"edge {name} borders a {gtype} region, not {kind}")
    z = complex(z)
    if z.imag != 0.0:
        q = _tau_fit(model, name)
        e = model.alpha if name == "alpha" else model.beta
        sgn = 1.0 if name == "alpha" else -1.0
        return model.N ** (2 / 3) * sgn * (z - e) * q(z)
    return complex(_tau_real(model, name, gtype, z.real))


def _band_F(model: OuterModel, name: str, gtype: str, x: float) -> float:
    """``2 pi c int`` of psi (void side) or psibar (saturated side) from the edge to ``x``."""
    ser = model.measure.band_series
    c = model.c
    if name == "alpha":
        mass = float(ser.mass(math.pi)) - float(ser.mass_right(x))
        lo, hi = model.alpha, x
    else:
        mass = float(ser.mass_right(x))
        lo, hi = x, model.beta
    if gtype == VOID:
        return 2 * math.pi * c * mass
    rho_int = _rho_integral(model, lo, hi)
    return 2 * math.pi * (rho_int - c * mass)


def _rho_integral(model: OuterModel, lo: float, hi: float) -> float:
    rho = model.measure.rho0
    if isinstance(rho, UniformDensity):
        return (hi - lo) / (rho.b - rho.a)
    return integrate.quad(rho, lo, hi, epsabs=1e-15, epsrel=1e-13)[0]


def _tau_real(model: OuterModel, name: str, gtype: str, x: float) -> float:
    e = model.alpha if name == "alpha" else model.beta
    inside = (x > e) if name == "alpha" else (x < e)
    if x == e:
        return 0.0
    if inside:
        return (model.N * max(float(np.real(_band_F(model, name, gtype, x))), 0.0)) ** (2 / 3)
    xi = model.xi(x)
    return -(model.N * max(xi, 0.0)) ** (2 / 3)


def _tau_fit(model: OuterModel, name: str, deg: int = 24):
    key = ("taufit", name)
    if key in model._cache:
        return model._cache[key]
    gtype = model.measure.gap_types[0 if name == "alpha" else 1]
    e = model.alpha if name == "alpha" else model.beta
    w = model.beta - model.alpha
    gap = (e - model.measure.a) if name == "alpha" else (model.measure.b - e)
    r = min(0.1 * w, 0.8 * gap)
    sgn = 1.0 if name == "alpha" else -1.0

    def q(x):
        x = np.atleast_1d(x)
        out = []
        for t in x:
            if abs(t - e) < 1e-9 * w:
                t = e + sgn * 1e-9 * w
            out.append(_tau_real(model, name, gtype, float(t)) / model.N ** (2 / 3) / (sgn * (t - e)))
        return np.array(out)

    fit = C.Chebyshev.interpolate(q, deg, domain=[e - r, e + r])
    model._cache[key] = fit
    return fit


def edge_coefficient(model: OuterModel, edge: str) -> float:
    name, _, _ = _edge_info(model, edge)
    return float(model.measure.edge_coeffs[name])


# -- band phase -----------------------------------------------------------------


def band_phase(model: OuterModel, x: float, *, margin: float = 0.02) -> tuple[float, float]:
    """``(A_I, Phi_I)`` defined by ``W_+(x) = A_I e^{i Phi_I} / 2``."""
    al, be = model.alpha, model.beta
    w = be - al
    if not (al + margin * w < x < be - margin * w):
        raise TooCloseToEdge(f"x={x} is within {margin} band widths of an edge")
    Wp = model.W(complex(x, 0.0), side=1)
    return 2 * abs(Wp), cmath.phase(Wp)


def band_phase_csv(model: OuterModel, xs, config: dict | None = None) -> str:
    rows = []
    for x in xs:
        A, P = band_phase(model, float(x))
        rows.append((float(x), A, P))
    return csv_text(["x", "A_I", "Phi_I"], rows, config)
