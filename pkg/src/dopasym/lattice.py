"""Node sets and weight families.

A node set is produced by the quantization rule: node ``n`` sits where the
cumulative node density reaches ``(2n+1)/(2N)``.  Weights are stored as
high-precision logarithms because ``exp(-N V)`` easily spans thousands of
decades.  Every weight family also carries the decomposition

    w_n = exp(-N V_N(x_n)) / prod_{m != n} |x_n - x_m|,   V_N = V + eta/N,

which is what the equilibrium and asymptotic modules consume.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import mpmath
import numpy as np
from scipy import integrate, optimize

from .errors import BadParams, NodeMismatch, NonPositiveDensity, Unnormalized, ValidationError
from .precision import default_bits, workprec

__all__ = [
    "UniformDensity",
    "NodeSet",
    "Field",
    "WeightFamily",
    "build_node_set",
    "uniform_node_set",
    "make_weights",
    "dual_weights",
    "log_node_products",
    "hahn_V",
    "family_from_spec",
    "rebuild_weights",
]


# ---------------------------------------------------------------------------
# node sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UniformDensity:
    """Constant density ``1/(b-a)`` on ``[a, b]``."""

    a: float = 0.0
    b: float = 1.0

    def __call__(self, x):
        x = np.asarray(x)
        return np.full(x.shape, 1.0 / (self.b - self.a)) if x.shape else 1.0 / (self.b - self.a)

    def cdf(self, x):
        return (np.asarray(x) - self.a) / (self.b - self.a)


@dataclass(frozen=True)
class NodeSet:
    N: int
    a: float
    b: float
    rho0: Callable[[Any], Any]
    nodes: tuple  # mpmath.mpf, strictly increasing
    uniform: bool = False
    precision_bits: int = field(default_factory=default_bits)

    def as_float(self) -> np.ndarray:
        return np.array([float(x) for x in self.nodes])

    def cdf(self, x: float) -> float:
        """Return ``int_a^x rho0``."""
        if isinstance(self.rho0, UniformDensity):
            return float(self.rho0.cdf(x))
        val, _ = integrate.quad(self.rho0, self.a, x, epsabs=1e-14, epsrel=1e-13, limit=200)
        return val

    def quantization_residual(self) -> float:
        """Largest ``|int_a^{x_n} rho0 - (2n+1)/(2N)|`` over the nodes."""
        return max(
            abs(self.cdf(float(x)) - (2 * n + 1) / (2 * self.N)) for n, x in enumerate(self.nodes)
        )


def _check_density(rho0, a: float, b: float, samples: int = 257) -> None:
    grid = np.linspace(a, b, samples)
    vals = np.array([float(rho0(t)) for t in grid])
    # endpoint zeros are tolerated (e.g. rho0(x) = 2x); interior ones are not
    if not np.all(np.isfinite(vals)) or np.any(vals < 0) or np.any(vals[1:-1] <= 0):
        raise NonPositiveDensity("node density must be positive on [a, b]")


def uniform_node_set(N: int, a: float = 0.0, b: float = 1.0, precision_bits: int | None = None) -> NodeSet:
    """Nodes ``a + (b-a)(2n+1)/(2N)`` computed exactly at working precision."""
    if N < 1:
        raise ValidationError("N must be at least 1")
    if not b > a:
        raise ValidationError("need a < b")
    bits = default_bits() if precision_bits is None else precision_bits
    with workprec(bits):
        aa, bb = mpmath.mpf(a), mpmath.mpf(b)
        nodes = tuple(aa + (bb - aa) * mpmath.mpf(2 * n + 1) / (2 * N) for n in range(N))
    return NodeSet(N=N, a=float(a), b=float(b), rho0=UniformDensity(a, b), nodes=nodes,
                   uniform=True, precision_bits=bits)


def build_node_set(rho0: Callable, a: float, b: float, N: int, *, tol: float = 1e-12,
                   precision_bits: int | None = None) -> NodeSet:
    """Place ``N`` nodes by the quantization rule for the density ``rho0``.

    Each node is the unique root of ``F(x) - (2n+1)/(2N)`` with ``F`` the
    cumulative integral; positivity of ``rho0`` makes ``F`` strictly
    increasing so a bracketing solver always succeeds.
    """
    if N < 1:
        raise ValidationError("N must be at least 1")
    if not b > a:
        raise ValidationError("need a < b")
    if isinstance(rho0, UniformDensity) and (rho0.a, rho0.b) == (a, b):
        return uniform_node_set(N, a, b, precision_bits)
    _check_density(rho0, a, b)
    total, _ = integrate.quad(rho0, a, b, epsabs=1e-14, epsrel=1e-13, limit=200)
    if abs(total - 1.0) > tol:
        raise Unnormalized(f"integral of rho0 is {total!r}, expected 1")

    # cumulative integral on a fine grid, refined locally by quad
    grid = np.linspace(a, b, 4 * N + 65)
    pieces = [integrate.quad(rho0, grid[i], grid[i + 1], epsabs=1e-15, epsrel=1e-14)[0]
              for i in range(len(grid) - 1)]
    cum = np.concatenate([[0.0], np.cumsum(pieces)])
    roots = []
    for n in range(N):
        target = (2 * n + 1) / (2 * N)
        j = int(np.clip(np.searchsorted(cum, target) - 1, 0, len(grid) - 2))
        lo, hi = grid[j], grid[j + 1]
        base = cum[j]

        def g(x, lo=lo, base=base, target=target):
            return base + integrate.quad(rho0, lo, x, epsabs=1e-15, epsrel=1e-14)[0] - target

        root = optimize.brentq(g, lo, hi, xtol=1e-15 * max(1.0, abs(b - a)), rtol=1e-15)
        roots.append(root)
    bits = default_bits() if precision_bits is None else precision_bits
    with workprec(bits):
        nodes = tuple(mpmath.mpf(r) for r in roots)
    if any(nodes[i + 1] <= nodes[i] for i in range(N - 1)):
        raise NonPositiveDensity("quantization produced non-increasing nodes")
    return NodeSet(N=N, a=float(a), b=float(b), rho0=rho0, nodes=nodes, uniform=False,
                   precision_bits=bits)


# ---------------------------------------------------------------------------
# fields V and eta
# ---------------------------------------------------------------------------


def _xlogx(z):
    z = np.asarray(z, dtype=complex if np.iscomplexobj(z) else float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(z == 0, 0.0, z * np.log(np.where(z == 0, 1.0, z)))
    return out


def hahn_V(A: float, B: float):
    """Limiting exponent for Hahn weights with ``P = NA+1, Q = NB+1``.

    ``V(x) = A log A + (B+1) log(B+1) - (A+x) log(A+x) - (B+1-x) log(B+1-x)``;
    it accepts complex arguments (principal logarithms).
    """
    const = float(_xlogx(A) + _xlogx(B + 1.0))

    def V(x):
        x = np.asarray(x)
        return const - _xlogx(A + x) - _xlogx(B + 1.0 - x)

    def dV(x):
        x = np.asarray(x)
        return -np.log(A + x) + np.log(B + 1.0 - x)

    return V, dV


@dataclass(frozen=True)
class Field:
    """A real-analytic function usable with numpy (float/complex) and mpmath.

    ``np_fn`` handles numpy input, ``mp_fn`` handles a single ``mpf``;
    ``deriv`` is an optional numpy derivative; ``sign`` lets duals flip the
    field without wrapping closures repeatedly.
    """

    np_fn: Callable
    mp_fn: Callable
    deriv: Callable | None = None
    sign: int = 1
    const: float | None = None  # set when the field is a constant

    def __call__(self, x):
        return self.sign * self.np_fn(x)

    def mp(self, x):
        return self.sign * self.mp_fn(x)

    def d(self, x):
        if self.deriv is None:
            raise NotImplementedError("field has no derivative handle")
        return self.sign * self.deriv(x)

    def negated(self) -> "Field":
        return Field(self.np_fn, self.mp_fn, self.deriv, -self.sign,
                     None if self.const is None else -self.const)


def _zero_field() -> Field:
    return Field(lambda x: np.zeros_like(np.asarray(x, dtype=float)) + 0.0 * np.asarray(x),
                 lambda x: mpmath.mpf(0), lambda x: np.zeros_like(np.asarray(x, dtype=float)),
                 const=0.0)


def _const_field(value: float) -> Field:
    return Field(lambda x: np.zeros_like(np.asarray(x, dtype=float)) + value + 0.0 * np.asarray(x),
                 lambda x: mpmath.mpf(value), lambda x: np.zeros_like(np.asarray(x, dtype=float)),
                 const=value)


# ---------------------------------------------------------------------------
# weight families
# ---------------------------------------------------------------------------


FAMILIES = ("krawtchouk", "hahn", "assoc_hahn", "custom")


@dataclass(frozen=True)
class WeightFamily:
    node_set: NodeSet
    family: str
    params: dict
    log_weights: tuple  # mpmath.mpf
    V: Field
    eta: Field
    VN_mp: Callable | None = None  # exact finite-N exponent at a single mpf
    eta_limit: Field | None = None  # N-independent part of eta used by asymptotics
    precision_bits: int = field(default_factory=default_bits)

    @property
    def N(self) -> int:
        return self.node_set.N

    def weights(self) -> list:
        with workprec(self.precision_bits):
            return [mpmath.exp(lw) for lw in self.log_weights]

    def reconstruct_log_weights(self) -> list:
        """Rebuild ``log w_n`` from ``V + eta/N`` and the node products."""
        N = self.N
        with workprec(self.precision_bits):
            lp = log_node_products(self.node_set)
            out = []
            for x, l in zip(self.node_set.nodes, lp):
                vn = self.V.mp(x) + self.eta.mp(x) / N
                out.append(-N * vn - l)
            return out

    def to_json(self) -> str:
        return json.dumps({
            "family": self.family,
            "params": self.params,
            "N": self.N,
            "a": self.node_set.a,
            "b": self.node_set.b,
            "log_weights": [mpmath.nstr(lw, 30) for lw in self.log_weights],
        })


def log_node_products(node_set: NodeSet, *, use_closed_form: bool | None = None) -> list:
    """``log prod_{m != n} |x_n - x_m|`` for every node.

    Uniform nodes admit the closed form ``((b-a)/N)^{N-1} n! (N-1-n)!``;
    otherwise the product is accumulated directly in high precision (no
    overflow since mpmath exponents are unbounded).
    """
    N = node_set.N
    if use_closed_form is None:
        use_closed_form = node_set.uniform
    with workprec(node_set.precision_bits):
        if use_closed_form:
            if not node_set.uniform:
                raise NodeMismatch("closed form requires uniform nodes")
            h = mpmath.log(mpmath.mpf(node_set.b) - mpmath.mpf(node_set.a)) - mpmath.log(N)
            return [(N - 1) * h + mpmath.loggamma(n + 1) + mpmath.loggamma(N - n) for n in range(N)]
        xs = node_set.nodes
        out = []
        for n in range(N):
            prod = mpmath.mpf(1)
            xn = xs[n]
            for m in range(N):
                if m != n:
                    prod *= abs(xn - xs[m])
            out.append(mpmath.log(prod))
        return out


def _require_unit_uniform(ns: NodeSet) -> None:
    if ns.a != 0.0 or ns.b != 1.0:
        raise NodeMismatch("family requires nodes on (0, 1)")
    N = ns.N
    for n, x in enumerate(ns.nodes):
        if abs(float(x) - (2 * n + 1) / (2 * N)) > 1e-12:
            raise NodeMismatch("family requires uniform nodes")


def _hahn_AB(N: int, P, Q):
    return (float(P) - 1.0) / N, (float(Q) - 1.0) / N


def _hahn_VN_mp(N: int, P, Q):
    P, Q = mpmath.mpf(P), mpmath.mpf(Q)

    def VN(x):
        x = mpmath.mpf(x)
        return (mpmath.loggamma(P) + mpmath.loggamma(N + Q - 1)
                - mpmath.loggamma(N * x + P - mpmath.mpf(1) / 2)
                - mpmath.loggamma(N * (1 - x) + Q - mpmath.mpf(1) / 2)) / N

    return VN


def _hahn_fields(N: int, P, Q):
    A, B = _hahn_AB(N, P, Q)
    Vnp, dV = hahn_V(A, B)
    VN = _hahn_VN_mp(N, P, Q)
    Amp, Bmp = mpmath.mpf(P - 1) / N, mpmath.mpf(Q - 1) / N

    def V_mp(x):
        x = mpmath.mpf(x)

        def xl(t):
            return mpmath.mpf(0) if t == 0 else t * mpmath.log(t)

        return xl(Amp) + xl(Bmp + 1) - xl(Amp + x) - xl(Bmp + 1 - x)

    def eta_mp(x):
        return N * (VN(x) - V_mp(x))

    def eta_np(x):
        x = np.asarray(x, dtype=float)
        flat = [float(eta_mp(t)) for t in x.ravel()]
        return np.array(flat).reshape(x.shape)

    V = Field(Vnp, V_mp, dV)
    eta = Field(eta_np, eta_mp, None)
    if A > 0:
        eta_lim = _const_field(0.5 * math.log(A / (B + 1.0)))
    else:
        eta_lim = None
    return V, eta, VN, eta_lim, A, B


def make_weights(family: str, node_set: NodeSet, *, p: float | None = None, q: float | None = None,
                 P: float | None = None, Q: float | None = None, A: float | None = None,
                 B: float | None = None, VN: Callable | None = None, V: Field | None = None,
                 eta: Field | None = None, precision_bits: int | None = None) -> WeightFamily:
    """Construct one of the supported weight families on ``node_set``.

    ``family`` is ``"krawtchouk"`` (``p, q``), ``"hahn"`` or ``"assoc_hahn"``
    (``P, Q`` or equivalently ``A, B`` with ``P = NA+1``), or ``"custom"``
    (``VN``: a callable on a single mpf giving the full exponent ``V_N``).
    """
    family = family.lower().replace("-", "_")
    if family not in FAMILIES:
        raise BadParams(f"unknown family {family!r}")
    N = node_set.N
    bits = node_set.precision_bits if precision_bits is None else precision_bits
    with workprec(bits):
        if family == "krawtchouk":
            if p is None or q is None or not (p > 0 and q > 0):
                raise BadParams("Krawtchouk needs p, q > 0")
            _require_unit_uniform(node_set)
            pm, qm = mpmath.mpf(p), mpmath.mpf(q)
            pref = ((N - 1) * mpmath.log(N) + (mpmath.log(pm) + mpmath.log(qm)) / 2
                    - N * mpmath.log(qm) - mpmath.loggamma(N))
            lw = tuple(pref + mpmath.loggamma(N) - mpmath.loggamma(n + 1) - mpmath.loggamma(N - n)
                       + n * mpmath.log(pm) + (N - 1 - n) * mpmath.log(qm) for n in range(N))
            ell = math.log(q / p)
            lm = mpmath.log(qm / pm)
            Vf = Field(lambda x, ell=ell: ell * np.asarray(x), lambda x, lm=lm: lm * x,
                       lambda x, ell=ell: ell + 0.0 * np.asarray(x))
            zf = _zero_field()
            return WeightFamily(node_set, "krawtchouk", {"p": float(p), "q": float(q)}, lw, Vf, zf,
                                VN_mp=lambda x, lm=lm: lm * x, eta_limit=zf, precision_bits=bits)

        if family in ("hahn", "assoc_hahn"):
            if P is None and A is not None:
                P = N * A + 1
            if Q is None and B is not None:
                Q = N * B + 1
            if P is None or Q is None or not (P > 0 and Q > 0):
                raise BadParams("Hahn families need P, Q > 0")
            _require_unit_uniform(node_set)
            Pm, Qm = mpmath.mpf(P), mpmath.mpf(Q)
            lg = mpmath.loggamma
            base = (N - 1) * mpmath.log(N) - lg(N)
            if family == "hahn":
                # C(n+P-1, n) C(N+Q-2-n, N-1-n) / C(N+Q-2, Q-1)
                lw = tuple(base + (lg(n + Pm) - lg(n + 1) - lg(Pm))
                           + (lg(N + Qm - 1 - n) - lg(N - n) - lg(Qm))
                           - (lg(N + Qm - 1) - lg(Qm) - lg(N)) for n in range(N))
            else:
                lw = tuple(base + lg(N) + lg(N + Qm - 1) + lg(Pm)
                           - lg(n + 1) - lg(Pm + n) - lg(N - n) - lg(N + Qm - 1 - n) for n in range(N))
            Vf, etaf, VNh, eta_lim, Aval, Bval = _hahn_fields(N, Pm, Qm)
            params = {"P": float(P), "Q": float(Q), "A": Aval, "B": Bval}
            if family == "hahn":
                return WeightFamily(node_set, "hahn", params, lw, Vf, etaf, VN_mp=VNh,
                                    eta_limit=eta_lim, precision_bits=bits)
            return WeightFamily(node_set, "assoc_hahn", params, lw, Vf.negated(), etaf.negated(),
                                VN_mp=lambda x, f=VNh: -f(x),
                                eta_limit=None if eta_lim is None else eta_lim.negated(),
                                precision_bits=bits)

        # custom
        if VN is None:
            raise BadParams("custom family needs a VN callable")
        lp = log_node_products(node_set)
        lw = tuple(-N * mpmath.mpf(VN(x)) - l for x, l in zip(node_set.nodes, lp))
        if V is None:
            V = Field(lambda x: np.vectorize(lambda t: float(VN(mpmath.mpf(t))))(np.asarray(x, dtype=float)),
                      lambda x: mpmath.mpf(VN(x)))
        if eta is None:
            eta = Field(lambda x, V=V: N * (np.vectorize(lambda t: float(VN(mpmath.mpf(t))))(np.asarray(x, dtype=float)) - V(x)),
                        lambda x, V=V: N * (mpmath.mpf(VN(x)) - V.mp(x)))
        return WeightFamily(node_set, "custom", {}, lw, V, eta, VN_mp=VN, eta_limit=None,
                            precision_bits=bits)


_DUAL_TAG = {"hahn": "assoc_hahn", "assoc_hahn": "hahn", "krawtchouk": "krawtchouk", "custom": "custom"}


def dual_weights(w: WeightFamily) -> WeightFamily:
    """Weights of the hole ensemble: ``w_n wbar_n prod_{m!=n} (x_n-x_m)^2 = 1``."""
    with workprec(w.precision_bits):
        lp = log_node_products(w.node_set)
        lw = tuple(-l - 2 * p for l, p in zip(w.log_weights, lp))
    params = dict(w.params)
    if w.family == "krawtchouk":
        params = {"p": w.params["q"], "q": w.params["p"]}
    VN = None if w.VN_mp is None else (lambda x, f=w.VN_mp: -f(x))
    return WeightFamily(w.node_set, _DUAL_TAG[w.family], params, lw, w.V.negated(), w.eta.negated(),
                        VN_mp=VN, eta_limit=None if w.eta_limit is None else w.eta_limit.negated(),
                        precision_bits=w.precision_bits)


def family_from_spec(spec: dict, node_set: NodeSet | None = None, N: int | None = None) -> WeightFamily:
    """Build a family from a JSON-style dict such as ``{"family": "hahn", "A": 3, "B": 7}``."""
    spec = dict(spec)
    fam = spec.pop("family")
    if node_set is None:
        if N is None:
            N = int(spec.pop("N"))
        else:
            spec.pop("N", None)
        node_set = uniform_node_set(N, precision_bits=spec.pop("precision_bits", None))
    keys = {k: spec[k] for k in ("p", "q", "P", "Q", "A", "B") if k in spec}
    return make_weights(fam, node_set, **keys)


def sequence_max_abs_diff(a: Sequence, b: Sequence) -> float:
    return float(max(abs(x - y) for x, y in zip(a, b)))


def rebuild_weights(w: WeightFamily, bits: int) -> WeightFamily:
    """Recompute ``w`` from its recipe at a different mantissa size."""
    ns = w.node_set
    if ns.uniform:
        ns2 = uniform_node_set(ns.N, ns.a, ns.b, bits)
    else:
        with workprec(bits):
            nodes = tuple(mpmath.mpf(x) for x in ns.nodes)
        ns2 = NodeSet(ns.N, ns.a, ns.b, ns.rho0, nodes, False, bits)
    if w.family == "krawtchouk":
        return make_weights("krawtchouk", ns2, p=w.params["p"], q=w.params["q"], precision_bits=bits)
    if w.family in ("hahn", "assoc_hahn"):
        return make_weights(w.family, ns2, P=w.params["P"], Q=w.params["Q"], precision_bits=bits)
    return make_weights("custom", ns2, VN=w.VN_mp, V=w.V, eta=w.eta, precision_bits=bits)
