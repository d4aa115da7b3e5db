"""Exact discrete orthogonal polynomials.

The recurrence coefficients are produced by the discrete Stieltjes (Lanczos)
procedure in multiprecision arithmetic.  The polynomials are never expanded
in monomials: every evaluation runs the three-term recurrence

    pi_{k+1}(z) = (z - a_k) pi_k(z) - b_{k-1}^2 pi_{k-1}(z),

and ``p_k = gamma_k pi_k`` gives the orthonormal family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import mpmath

from ._io import csv_text
from .errors import ConvergenceFailure, DegreeOutOfRange, PrecisionExhausted, ValidationError
from .lattice import WeightFamily, log_node_products, rebuild_weights
from .precision import workprec

__all__ = [
    "OrthoSystem",
    "stieltjes_recurrence",
    "evaluate",
    "evaluate_sequence",
    "zeros",
    "check_duality",
    "DualityReport",
    "confinement_ok",
]

MAX_BITS = 16384


@dataclass(frozen=True)
class OrthoSystem:
    weights: WeightFamily
    kmax: int
    a_coeffs: tuple
    b_coeffs: tuple  # b_0 .. b_{kmax-1}
    gamma: tuple  # gamma_0 .. gamma_kmax
    precision_bits: int
    residual: float  # max orthonormality defect measured at construction

    @property
    def N(self) -> int:
        return self.weights.N

    def to_csv(self, config: dict | None = None) -> str:
        rows = []
        for k in range(self.kmax + 1):
            b = self.b_coeffs[k] if k < self.kmax else ""
            rows.append((k, self.a_coeffs[k], b, self.gamma[k]))
        return csv_text(["k", "a_k", "b_k", "gamma_k"], rows, config, hp_digits=30)


def _lanczos(w: WeightFamily, kmax: int, bits: int, check: bool):
    N = w.N
    with workprec(bits):
        xs = list(w.node_set.nodes)
        lw = list(w.log_weights)
        shift = max(lw)  # rescale so the largest weight is 1; undone in gamma_0
        sw = [mpmath.exp((l - shift) / 2) for l in lw]
        S = mpmath.fsum(s * s for s in sw)
        inv = 1 / mpmath.sqrt(S)
        q = [s * inv for s in sw]
        q_prev = [mpmath.mpf(0)] * N
        a_list, b_list, basis = [], [], [q]
        b_prev = mpmath.mpf(0)
        floor = mpmath.mpf(2) ** (-(bits // 4))
        for k in range(kmax + 1):
            a_k = mpmath.fdot(xs, [t * t for t in q])
            a_list.append(a_k)
            if k == kmax:
                break
            r = [(x - a_k) * t - b_prev * tp for x, t, tp in zip(xs, q, q_prev)]
            b_k = mpmath.sqrt(mpmath.fdot(r, r))
            if not b_k > floor:
                raise PrecisionExhausted(f"b_{k} collapsed to {mpmath.nstr(b_k, 5)} at {bits} bits")
            q_prev, q = q, [t / b_k for t in r]
            b_list.append(b_k)
            b_prev = b_k
            if check:
                basis.append(q)
        g0 = mpmath.exp(-shift / 2) * inv
        gam = [g0]
        for b in b_list:
            gam.append(gam[-1] / b)
        resid = mpmath.mpf(0)
        if check:
            n = len(basis)
            if check == "sample":
                rows = sorted({round(i * (n - 1) / 15) for i in range(16)})
            else:
                rows = range(n)
            for j in rows:
                for k in (range(j, n) if check != "sample" else range(n)):
                    v = mpmath.fdot(basis[j], basis[k]) - (1 if j == k else 0)
                    if abs(v) > resid:
                        resid = abs(v)
        return tuple(a_list), tuple(b_list), tuple(gam), resid


def stieltjes_recurrence(w: WeightFamily, kmax: int | None = None, *, precision_bits: int | None = None,
                         check: bool | str = "auto", max_bits: int = MAX_BITS) -> OrthoSystem:
    """Recurrence coefficients ``a_0..a_kmax``, ``b_0..b_{kmax-1}`` and ``gamma_0..gamma_kmax``.

    The orthonormality defect of the computed family (evaluated at the nodes
    through the recurrence) must stay below ``10**(-bits/8)``; otherwise, or
    if some ``b_k`` collapses, the whole computation is redone with twice the
    mantissa.  ``check="auto"`` measures the defect when ``N * kmax**2`` is
    moderate and on 16 spread-out rows of the Gram matrix otherwise;
    ``check=False`` skips it.
    """
    N = w.N
    if kmax is None:
        kmax = N - 1
    if not 0 <= kmax <= N - 1:
        raise DegreeOutOfRange(f"kmax must lie in [0, {N - 1}], got {kmax}")
    if check == "auto":
        check = "full" if N * (kmax + 1) ** 2 <= 4_000_000 else "sample"
    bits = w.precision_bits if precision_bits is None else int(precision_bits)
    last_err = None
    while bits <= max_bits:
        ww = w if bits == w.precision_bits else rebuild_weights(w, bits)
        try:
            a, b, g, resid = _lanczos(ww, kmax, bits, check)
        except PrecisionExhausted as exc:
            last_err = exc
            bits *= 2
            continue
        if check and resid > mpmath.mpf(10) ** (-(bits / 8)):
            last_err = PrecisionExhausted(f"orthonormality defect {mpmath.nstr(resid, 5)} at {bits} bits")
            bits *= 2
            continue
        return OrthoSystem(ww, kmax, a, b, g, bits, float(resid))
    raise last_err or PrecisionExhausted("precision cap reached")


def evaluate_sequence(sys: OrthoSystem, k: int, z) -> list:
    """Monic values ``pi_0(z) .. pi_k(z)`` (mpmath numbers)."""
    if not 0 <= k <= sys.kmax:
        raise DegreeOutOfRange(f"degree {k} outside [0, {sys.kmax}]")
    with workprec(sys.precision_bits):
        z = mpmath.mpmathify(z)
        vals = [mpmath.mpf(1)]
        if k >= 1:
            vals.append(z - sys.a_coeffs[0])
        for j in range(1, k):
            vals.append((z - sys.a_coeffs[j]) * vals[j] - sys.b_coeffs[j - 1] ** 2 * vals[j - 1])
        return vals


def evaluate(sys: OrthoSystem, k: int, z):
    """Return ``(pi_k(z), p_k(z))`` as mpmath numbers."""
    vals = evaluate_sequence(sys, k, z)
    with workprec(sys.precision_bits):
        return vals[k], sys.gamma[k] * vals[k]


# --------------------------------------------------------------------------
# zeros
# --------------------------------------------------------------------------


def _sturm_count(a: Sequence, b2: Sequence, k: int, x) -> int:
    """Number of eigenvalues of the leading k x k Jacobi block below ``x``."""
    count = 0
    d = a[0] - x
    tiny = mpmath.eps * (abs(x) + 1)
    if d < 0:
        count += 1
    for i in range(1, k):
        if d == 0:
            d = tiny
        d = a[i] - x - b2[i - 1] / d
        if d < 0:
            count += 1
    return count


def _pi_value(a, b2, k, x):
    p0, p1 = mpmath.mpf(1), x - a[0]
    if k == 0:
        return p0
    for j in range(1, k):
        p0, p1 = p1, (x - a[j]) * p1 - b2[j - 1] * p0
    return p1


def zeros(sys: OrthoSystem, k: int, *, precision_bits: int | None = None) -> list:
    """Zeros of ``pi_k`` (eigenvalues of the k x k Jacobi matrix), sorted.

    Eigenvalues are isolated by Sturm-count bisection, then polished with a
    bracketed Illinois iteration on ``pi_k``; if the polish leaves the
    bracket, plain bisection finishes the job.
    """
    if not 1 <= k <= sys.kmax:
        raise DegreeOutOfRange(f"degree {k} outside [1, {sys.kmax}]")
    bits = sys.precision_bits if precision_bits is None else precision_bits
    with workprec(bits):
        a = sys.a_coeffs
        b2 = [b * b for b in sys.b_coeffs]
        bmax = max([abs(b) for b in sys.b_coeffs[:k - 1]] or [mpmath.mpf(0)])
        lo = min(a[:k]) - 2 * bmax - 1
        hi = max(a[:k]) + 2 * bmax + 1
        # isolate: stack of (lo, hi, count(lo), count(hi))
        stack = [(lo, hi, 0, k)]
        intervals = []
        min_width = mpmath.eps * 16 * (abs(lo) + abs(hi))
        while stack:
            l, h, cl, ch = stack.pop()
            if ch - cl == 0:
                continue
            if ch - cl == 1:
                intervals.append((l, h))
                continue
            if h - l < min_width:
                raise ConvergenceFailure("eigenvalues not separable at working precision")
            m = (l + h) / 2
            cm = _sturm_count(a, b2, k, m)
            stack.append((l, m, cl, cm))
            stack.append((m, h, cm, ch))
        intervals.sort()
        out = []
        tol = mpmath.eps * 8
        for l, h in intervals:
            out.append(_refine(lambda x: _pi_value(a, b2, k, x), l, h, tol))
        return out


def _refine(f, l, h, tol):
    fl, fh = f(l), f(h)
    if fl == 0:
        return l
    if fh == 0:
        return h
    if fl * fh > 0:
        # isolation bracket edge coincides with a root up to rounding
        return l if abs(fl) < abs(fh) else h
    side = 0
    for _ in range(400):
        scale = abs(l) + abs(h) + 1
        if h - l <= tol * scale:
            break
        m = (l * fh - h * fl) / (fh - fl)
        if not (l < m < h):
            m = (l + h) / 2
        fm = f(m)
        if fm == 0:
            return m
        if fm * fh < 0:
            l, fl = h, fh
            h, fh = m, fm
            if side == -1:
                fl /= 2
            side = -1
        else:
            h, fh = m, fm
            if side == 1:
                fl /= 2
            side = 1
        if l > h:
            l, h, fl, fh = h, l, fh, fl
    # finish with a few bisections so the bracket is genuinely tight
    for _ in range(8):
        if h - l <= tol * (abs(l) + abs(h) + 1):
            break
        m = (l + h) / 2
        fm = f(m)
        if fm == 0:
            return m
        if fm * fl < 0:
            h, fh = m, fm
        else:
            l, fl = m, fm
    return (l + h) / 2


def confinement_ok(zs: Sequence, nodes: Sequence) -> bool:
    """At most one zero in every closed interval ``[x_n, x_{n+1}]``."""
    j = 0
    for n in range(len(nodes) - 1):
        lo, hi = nodes[n], nodes[n + 1]
        cnt = sum(1 for z in zs if lo <= z <= hi)
        if cnt > 1:
            return False
    return all(nodes[0] < z < nodes[-1] for z in zs)


# --------------------------------------------------------------------------
# duality
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DualityReport:
    node_residual: dict  # k -> normwise relative residual of the node identity
    gamma_residual: dict  # k -> |gammabar_{N-k-1} gamma_k - 1|

    @property
    def max_node(self) -> float:
        return max(self.node_residual.values()) if self.node_residual else 0.0

    @property
    def max_gamma(self) -> float:
        return max(self.gamma_residual.values()) if self.gamma_residual else 0.0


def check_duality(sys: OrthoSystem, dual_sys: OrthoSystem, ks: Sequence[int] | None = None) -> DualityReport:
    """Residuals of the particle/hole identities relating the two systems.

    For each degree ``k`` with ``kbar = N - k``:
    ``pibar_{kbar}(x_l) = gamma_{k-1}^2 w_l prod_{n != l}(x_l - x_n) pi_{k-1}(x_l)``
    and ``gammabar_{kbar-1} gamma_k = 1``.
    """
    N = sys.N
    if dual_sys.N != N:
        raise ValidationError("systems live on different node sets")
    if ks is None:
        ks = range(1, N)
    bits = min(sys.precision_bits, dual_sys.precision_bits)
    node_res, gam_res = {}, {}
    with workprec(bits):
        xs = sys.weights.node_set.nodes
        ws = sys.weights.weights()
        signed = []
        for l in range(N):
            prod = mpmath.mpf(1)
            for n in range(N):
                if n != l:
                    prod *= xs[l] - xs[n]
            signed.append(prod)
        for k in ks:
            kb = N - k
            if not (1 <= k <= N - 1) or k - 1 > sys.kmax or kb > dual_sys.kmax:
                raise DegreeOutOfRange(f"degree pair ({k}, {kb}) not available")
            lhs, rhs = [], []
            for l in range(N):
                pib = evaluate(dual_sys, kb, xs[l])[0]
                pik = evaluate(sys, k - 1, xs[l])[0]
                lhs.append(pib)
                rhs.append(sys.gamma[k - 1] ** 2 * ws[l] * signed[l] * pik)
            scale = max(abs(v) for v in lhs)
            node_res[k] = float(max(abs(u - v) for u, v in zip(lhs, rhs)) / scale)
            if k <= sys.kmax and kb - 1 <= dual_sys.kmax:
                gam_res[k] = float(abs(dual_sys.gamma[kb - 1] * sys.gamma[k] - 1))
    return DualityReport(node_res, gam_res)
