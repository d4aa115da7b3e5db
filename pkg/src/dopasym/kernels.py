"""Reproducing kernels of discrete orthogonal polynomial ensembles.

The ensemble of ``k`` particles on the nodes ``x_0 < ... < x_{N-1}`` with
joint law proportional to ``prod (x_i - x_j)^2 prod w(x_i)`` is determinantal
with the Christoffel-Darboux kernel

    K(x, y) = sqrt(w(x) w(y)) sum_{j<k} p_j(x) p_j(y),

a rank-``k`` orthogonal projection on ``R^N``.  This module assembles it,
extracts correlation functions and occupation probabilities, compares it to
its bulk (discrete sine) and edge (Airy) limits, evaluates the Tracy-Widom
distribution as a Fredholm determinant and draws exact samples.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import mpmath
import numpy as np
from scipy import special

from ._io import csv_text
from .equilibrium import SAT, EquilibriumMeasure
from .errors import DegreeOutOfRange, EdgeTypeMismatch, PrecisionExhausted, RankDeficiency, ValidationError
from .lattice import NodeSet, UniformDensity
from .orthopoly import OrthoSystem
from .precision import workprec

__all__ = [
    "KernelMatrix",
    "cd_kernel",
    "kernel_from_basis",
    "correlation",
    "occupation_prob",
    "occupation_prob_minors",
    "hole_kernel",
    "sine_kernel",
    "sine_compare",
    "band_density_ratio",
    "airy_kernel",
    "airy_compare",
    "tracy_widom_cdf",
    "tracy_widom_table",
    "sample_dpp",
    "ensemble_probabilities",
]


@dataclass(frozen=True)
class KernelMatrix:
    N: int
    k: int
    entries: np.ndarray = field(repr=False)
    node_set: NodeSet = field(repr=False)

    @property
    def nodes(self) -> np.ndarray:
        return self.node_set.as_float()

    def diag(self) -> np.ndarray:
        return np.diag(self.entries).copy()

    def invariants(self) -> dict:
        K = self.entries
        d = np.diag(K)
        return {
            "symmetry": float(np.max(np.abs(K - K.T))) if self.N else 0.0,
            "projection": float(np.max(np.abs(K @ K - K))) if self.N else 0.0,
            "trace": float(abs(np.trace(K) - self.k)),
            "diag_low": float(max(0.0, -d.min())) if self.N else 0.0,
            "diag_high": float(max(0.0, d.max() - 1.0)) if self.N else 0.0,
        }

    def invariants_ok(self) -> bool:
        r = self.invariants()
        return (r["symmetry"] < 1e-12 and r["projection"] < 1e-8 and r["trace"] < 1e-8
                and r["diag_low"] < 1e-10 and r["diag_high"] < 1e-10)

    def to_csv(self, config: dict | None = None) -> str:
        x = self.nodes
        rows = [(i, j, float(x[i]), float(x[j]), float(self.entries[i, j]))
                for i in range(self.N) for j in range(self.N)]
        return csv_text(["i", "j", "x_i", "x_j", "K"], rows, config)


def _monic_and_derivative(a, b2, k, x):
    """``pi_{k-1}, pi_k`` and their derivatives at ``x`` (mpmath)."""
    p_prev, p = mpmath.mpf(0), mpmath.mpf(1)
    d_prev, d = mpmath.mpf(0), mpmath.mpf(0)
    for j in range(k):
        bj = b2[j - 1] if j >= 1 else 0
        p_next = (x - a[j]) * p - bj * p_prev
        d_next = p + (x - a[j]) * d - bj * d_prev
        p_prev, p = p, p_next
        d_prev, d = d, d_next
    return p_prev, p, d_prev, d


def cd_kernel(sys: OrthoSystem, k: int) -> KernelMatrix:
    """Christoffel-Darboux kernel of the first ``k`` orthonormal polynomials.

    Off the diagonal the telescoped two-term form
    ``gamma_{k-1}^2 (pi_k(x) pi_{k-1}(y) - pi_{k-1}(x) pi_k(y)) / (x - y)``
    is used, on the diagonal its confluent limit with derivatives; both in
    the working precision of ``sys``.  The rounded double matrix must pass
    the projection test, otherwise :class:`PrecisionExhausted` is raised.
    """
    N = sys.N
    ns = sys.weights.node_set
    if k == N:
        return KernelMatrix(N, N, np.eye(N), ns)
    if not 0 <= k <= sys.kmax:
        raise DegreeOutOfRange(f"k must lie in [0, {sys.kmax}] (or equal N), got {k}")
    if k == 0:
        return KernelMatrix(N, 0, np.zeros((N, N)), ns)
    with workprec(sys.precision_bits):
        a = sys.a_coeffs
        b2 = [b * b for b in sys.b_coeffs]
        g2 = sys.gamma[k - 1] ** 2
        xs = list(ns.nodes)
        sw = [mpmath.exp(lw / 2) for lw in sys.weights.log_weights]
        f, g, diag = [], [], []
        for x, s in zip(xs, sw):
            pkm1, pk, dkm1, dk = _monic_and_derivative(a, b2, k, x)
            f.append(s * pk)
            g.append(s * pkm1)
            diag.append(g2 * s * s * (dk * pkm1 - dkm1 * pk))
        K = np.empty((N, N))
        for i in range(N):
            K[i, i] = float(diag[i])
            fi, gi, xi = f[i], g[i], xs[i]
            for j in range(i + 1, N):
                v = float(g2 * (fi * g[j] - gi * f[j]) / (xi - xs[j]))
                K[i, j] = v
                K[j, i] = v
    out = KernelMatrix(N, k, K, ns)
    res = out.invariants()
    if res["projection"] > 1e-8 or res["trace"] > 1e-8:
        raise PrecisionExhausted(
            f"kernel fails the projection test (|K^2-K|={res['projection']:.2e}); raise the precision")
    return out


def kernel_from_basis(sys: OrthoSystem, k: int) -> KernelMatrix:
    """Same kernel as :func:`cd_kernel` from the explicit sum ``Phi^T Phi``.

    Independent of the Christoffel-Darboux identity; used as a cross-check.
    """
    N = sys.N
    ns = sys.weights.node_set
    with workprec(sys.precision_bits):
        a, b2 = sys.a_coeffs, [b * b for b in sys.b_coeffs]
        Phi = np.zeros((k, N))
        for n, (x, lw) in enumerate(zip(ns.nodes, sys.weights.log_weights)):
            s = mpmath.exp(lw / 2)
            p_prev, p = mpmath.mpf(0), mpmath.mpf(1)
            for j in range(k):
                Phi[j, n] = float(s * sys.gamma[j] * p)
                bj = b2[j - 1] if j >= 1 else 0
                p_prev, p = p, (x - a[j]) * p - bj * p_prev
    return KernelMatrix(N, k, Phi.T @ Phi, ns)


# -- correlations -----------------------------------------------------------------


def correlation(K: KernelMatrix, nodes) -> float:
    """``R_m(x_{i_1}, ..., x_{i_m}) = det K[I, I]``; zero if an index repeats."""
    idx = [int(i) for i in nodes]
    if len(set(idx)) != len(idx):
        return 0.0
    if not idx:
        return 1.0
    return float(np.linalg.det(K.entries[np.ix_(idx, idx)]))


def occupation_prob(K: KernelMatrix, B, m: int) -> float:
    """Probability that exactly ``m`` particles lie in the node set ``B``.

    With ``lambda_j`` the eigenvalues of ``K|_B``, the generating function
    ``E[s^#B] = prod_j (1 - lambda_j + lambda_j s)`` and the answer is its
    ``s^m`` coefficient, equivalently ``(1/m!)(-d/dt)^m det(1 - t K|_B)`` at
    ``t = 1``.
    """
    idx = sorted({int(i) for i in B})
    if not 0 <= m <= len(idx):
        raise ValidationError(f"m must lie in [0, {len(idx)}]")
    if not idx:
        return 1.0
    lam = np.clip(np.linalg.eigvalsh(K.entries[np.ix_(idx, idx)]), 0.0, 1.0)
    poly = np.array([1.0])
    for l in lam:
        poly = np.convolve(poly, [1.0 - l, l])
    return float(poly[m])


def occupation_prob_minors(K: KernelMatrix, B, m: int) -> float:
    """Same probability by inclusion-exclusion over principal minors (small ``B`` only)."""
    idx = sorted({int(i) for i in B})
    if len(idx) > 16:
        raise ValidationError("minor expansion limited to |B| <= 16")
    total = 0.0
    for j in range(m, len(idx) + 1):
        sj = sum(correlation(K, T) for T in itertools.combinations(idx, j))
        total += (-1) ** (j - m) * math.comb(j, m) * sj
    return total


def hole_kernel(K: KernelMatrix) -> KernelMatrix:
    """Kernel of the unoccupied nodes: ``(-1)^{m+n+1} K`` off the diagonal, ``1 - K`` on it."""
    n = np.arange(K.N)
    sign = -np.where((n[:, None] + n[None, :]) % 2 == 0, 1.0, -1.0)
    H = sign * K.entries
    np.fill_diagonal(H, 1.0 - np.diag(K.entries))
    return KernelMatrix(K.N, K.N - K.k, H, K.node_set)


def ensemble_probabilities(weights, k: int, xs) -> dict:
    """Exact law of the ``k``-point ensemble by enumeration (small ``N`` only).

    Returns ``{configuration (sorted index tuple): probability}`` with
    probabilities proportional to ``prod_{i<j} (x_i - x_j)^2 prod w(x_i)``.
    """
    N = len(xs)
    if math.comb(N, k) > 200_000:
        raise ValidationError("too many configurations to enumerate")
    raw = {}
    for S in itertools.combinations(range(N), k):
        v = mpmath.mpf(1)
        for i in S:
            v *= weights[i]
        for i, j in itertools.combinations(S, 2):
            v *= (xs[i] - xs[j]) ** 2
        raw[S] = v
    Z = mpmath.fsum(raw.values())
    return {S: float(v / Z) for S, v in raw.items()}


# -- bulk limit ---------------------------------------------------------------------


def sine_kernel(q: float, d):
    """``sin(pi q d) / (pi d)`` with value ``q`` at ``d = 0``."""
    d = np.asarray(d, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.sin(math.pi * q * d) / (math.pi * d)
    return np.where(d == 0, q, out)


def band_density_ratio(m: EquilibriumMeasure, x: float) -> float:
    """``q(x) = c mu'(x) / rho0(x)``: the expected fraction of occupied nodes near ``x``."""
    return float(m.c * m.density(x) / float(m.rho0(x)))


def sine_compare(K: KernelMatrix, x: float, window: int, m: EquilibriumMeasure) -> float:
    """Max deviation of ``K`` from the discrete sine kernel on a block of nodes around ``x``."""
    if m.region(x) != "band":
        raise ValidationError(f"x={x} is not in a band")
    q = band_density_ratio(m, x)
    xs = K.nodes
    i0 = int(np.argmin(np.abs(xs - x)))
    lo, hi = i0 - window, i0 + window
    if lo < 0 or hi >= K.N or m.region(xs[lo]) != "band" or m.region(xs[hi]) != "band":
        raise ValidationError("window leaves the band")
    idx = np.arange(lo, hi + 1)
    d = idx[:, None] - idx[None, :]
    return float(np.max(np.abs(K.entries[np.ix_(idx, idx)] - sine_kernel(q, d))))


# -- edge limit ---------------------------------------------------------------------


def airy_kernel(x, y):
    """Airy kernel ``(Ai(x)Ai'(y) - Ai'(x)Ai(y)) / (x - y)``; diagonal ``Ai'(x)^2 - x Ai(x)^2``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ax, apx, _, _ = special.airy(x)
    ay, apy, _, _ = special.airy(y)
    diff = x - y
    close = np.abs(diff) < 1e-10
    with np.errstate(invalid="ignore", divide="ignore"):
        off = (ax * apy - apx * ay) / np.where(close, 1.0, diff)
    on = apx * apx - x * ax * ax
    return np.where(close, on, off)


def _edge_scale(m: EquilibriumMeasure, edge: str, N: int):
    if edge not in ("alpha", "beta"):
        raise ValidationError("edge must be 'alpha' or 'beta'")
    gap = m.gap_types[0] if edge == "alpha" else m.gap_types[-1]
    if gap == SAT:
        raise EdgeTypeMismatch(f"edge {edge} borders a saturated region; use the hole kernel and dual measure")
    e = m.alpha if edge == "alpha" else m.beta
    Bc = float(m.edge_coeffs[edge])
    s = (N * math.pi * m.c * Bc) ** (2.0 / 3.0)
    sgn = -1.0 if edge == "alpha" else 1.0
    return e, s, sgn, Bc


def airy_compare(K: KernelMatrix, m: EquilibriumMeasure, edge: str, window: float) -> float:
    """Max deviation between the rescaled kernel and the Airy kernel near a void edge.

    Nodes with ``|xi| <= window`` where ``xi = -/+ (N pi c B)^{2/3} (x - edge)``
    (minus at the left edge) are compared through
    ``N^{1/3} rho0(edge) / (pi c B)^{2/3} K(x_i, x_j)`` against ``A(xi_i, xi_j)``.
    """
    N = K.N
    e, s, sgn, Bc = _edge_scale(m, edge, N)
    xs = K.nodes
    xi = sgn * s * (xs - e)
    idx = np.nonzero(np.abs(xi) <= window)[0]
    if idx.size == 0:
        raise ValidationError("no nodes inside the comparison window")
    scale = N ** (1.0 / 3.0) * float(m.rho0(e)) / (math.pi * m.c * Bc) ** (2.0 / 3.0)
    sub = scale * K.entries[np.ix_(idx, idx)]
    ref = airy_kernel(xi[idx][:, None], xi[idx][None, :])
    return float(np.max(np.abs(sub - ref)))


def edge_variable(m: EquilibriumMeasure, edge: str, N: int, x):
    """Scaled edge coordinate ``xi`` of the node positions ``x``."""
    e, s, sgn, _ = _edge_scale(m, edge, N)
    return sgn * s * (np.asarray(x, dtype=float) - e)


def tracy_widom_cdf(s: float, quad_points: int = 40) -> float:
    """``F_2(s) = det(1 - A|_[s, inf))`` by Nystrom discretisation.

    Gauss-Legendre nodes ``t`` on ``(-1, 1)`` are mapped to ``[s, inf)`` by
    ``x = s + 10 (1 + t) / (1 - t)``.
    """
    if quad_points < 20:
        raise ValidationError("quad_points must be at least 20")
    t, w = np.polynomial.legendre.leggauss(int(quad_points))
    x = s + 10.0 * (1.0 + t) / (1.0 - t)
    wx = w * 20.0 / (1.0 - t) ** 2
    r = np.sqrt(wx)
    M = r[:, None] * airy_kernel(x[:, None], x[None, :]) * r[None, :]
    val = float(np.linalg.det(np.eye(len(x)) - M))
    return min(1.0, max(0.0, val))


def tracy_widom_table(s_min: float = -6.0, s_max: float = 4.0, step: float = 0.05,
                      quad_points: int = 60, config: dict | None = None) -> str:
    n = int(round((s_max - s_min) / step))
    rows = []
    for i in range(n + 1):
        s = s_min + i * step
        rows.append((round(s, 12), tracy_widom_cdf(s, quad_points)))
    return csv_text(["s", "F2"], rows, config)


# -- sampling -----------------------------------------------------------------------


def sample_dpp(K: KernelMatrix, seed, *, check_rank: bool = True) -> np.ndarray:
    """One exact draw from the projection ensemble with kernel ``K``.

    Chain rule: the next point is drawn with probability proportional to the
    conditional diagonal ``K(x,x) - sum_s c_s(x)^2`` where the ``c_s`` are the
    Gram-Schmidt vectors of the kernel columns at the points already drawn.
    ``seed`` is an integer or a :class:`numpy.random.Generator`.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    M = K.entries
    if check_rank:
        ev = np.linalg.eigvalsh(M)
        if np.any((ev > 1e-6) & (ev < 1 - 1e-6)) or int(np.sum(ev > 0.5)) != K.k:
            raise RankDeficiency("kernel is not a rank-k projection within 1e-6")
    N, k = K.N, K.k
    resid = np.clip(np.diag(M).copy(), 0.0, None)
    vecs = np.zeros((k, N))
    picked = np.empty(k, dtype=int)
    for t in range(k):
        p = np.clip(resid, 0.0, None)
        p[picked[:t]] = 0.0
        tot = p.sum()
        if tot <= 0:
            raise RankDeficiency("conditional kernel vanished before k points were drawn")
        cdf = np.cumsum(p)
        i = min(int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right")), N - 1)
        while p[i] == 0.0:  # guard against landing on a zero-width cell at the top end
            i -= 1
        picked[t] = i
        v = M[:, i] - vecs[:t].T @ vecs[:t, i]
        v = v / math.sqrt(max(v[i], 1e-300))
        vecs[t] = v
        resid = resid - v * v
    return np.sort(picked)
