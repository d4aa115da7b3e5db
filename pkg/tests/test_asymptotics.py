import math

import mpmath
import numpy as np
import pytest

from dopasym.asymptotics import (
    RegionTag,
    approx_pi,
    approx_scaled,
    classify_point,
    default_test_points,
    match_zeros,
    predicted_band_zeros,
    predicted_recurrence,
    regional_sweep,
    saturated_zero_pairing,
    scaled_error,
    sweep_csv,
    tau_point,
)
from dopasym.equilibrium import hahn_equilibrium, krawtchouk_equilibrium
from dopasym.errors import RegionMismatch, ValidationError
from dopasym.lattice import make_weights, uniform_node_set
from dopasym.orthopoly import evaluate, stieltjes_recurrence, zeros
from dopasym.outer_model import build_outer_model


def hahn_system(N, A, B, k):
    w = make_weights("hahn", uniform_node_set(N), A=A, B=B)
    return w, stieltjes_recurrence(w, k)


def test_classify():
    m = hahn_equilibrium(3, 7, 0.5)
    assert classify_point(m, m.alpha, 100) == RegionTag("airy", "alpha", "saturated")
    # the saturated gap (0, 0.043) is shorter than the Airy radius until N is large
    assert classify_point(m, 0.0, 100).kind == "airy"
    assert classify_point(m, 0.0, 10 ** 4) == RegionTag("hard_edge", "a")
    assert classify_point(m, 2.0, 100).kind == "outer"
    assert classify_point(m, 0.5, 100).kind == "band"
    assert classify_point(m, 0.99, 10 ** 6) == RegionTag("void", "right")


def test_region_mismatch():
    m = hahn_equilibrium(3, 7, 0.5)
    om = build_outer_model(m, None, 0.0, 40)
    with pytest.raises(RegionMismatch):
        approx_scaled(om, RegionTag("void", "left"), 0.02)
    with pytest.raises(RegionMismatch):
        approx_scaled(om, RegionTag("hard_edge", "b"), 0.99)
    with pytest.raises(ValidationError):
        approx_scaled(om, RegionTag("band"), 0.5 + 0.1j)


def test_outer_error_halves():
    # symmetric Krawtchouk; c = 0.3 keeps k = cN integral and avoids the exceptional c = 1/2
    m = krawtchouk_equilibrium(0.5, 0.5, 0.3)
    errs = []
    for N in (100, 200):
        k = round(0.3 * N)
        sy = stieltjes_recurrence(make_weights("krawtchouk", uniform_node_set(N), p=0.5, q=0.5), k)
        om = build_outer_model(m, 0.0, 0.0, N)
        errs.append(float(abs(evaluate(sy, k, 2)[0] / approx_pi(om, RegionTag("outer"), 2) - 1)))
    assert 0.35 < errs[1] / errs[0] < 0.65


def test_band_error_constant_stable():
    m = hahn_equilibrium(3, 7, 0.5)
    xs = [m.alpha + f * (m.beta - m.alpha) for f in np.linspace(0.2, 0.8, 7)]
    Cs = []
    for N in (50, 100, 200):
        k = N // 2
        w, sy = hahn_system(N, 3, 7, k)
        om = build_outer_model(m, w.eta_limit, 0.0, N)
        Cs.append(max(scaled_error(om, RegionTag("band"), x, evaluate(sy, k, x)[0])[0] * N for x in xs))
    # the measured constant must not grow as N doubles
    assert max(Cs[1:]) <= 1.5 * Cs[0]
    assert max(Cs) < 1


def test_hard_edge_reduces_to_saturated():
    m = hahn_equilibrium(1, 5, 0.7)
    gaps = []
    for N in (40, 160, 640):
        om = build_outer_model(m, 0.0, 0.0, N)
        h, _ = approx_scaled(om, RegionTag("hard_edge", "a"), 0.12)
        s, _ = approx_scaled(om, RegionTag("saturated", "left"), 0.12)
        gaps.append(abs(h - s) / abs(s))
    assert gaps[0] > gaps[1] > gaps[2]
    # Stirling: relative defect ~ 1/(24 zeta) with zeta = N x
    assert abs(gaps[2] * 24 * 640 * 0.12 - 1) < 0.05


def test_predicted_zero_count_and_distance():
    m = hahn_equilibrium(1, 1, 0.4)
    D = []
    for N in (60, 120):
        k = round(0.4 * N)
        w, sy = hahn_system(N, 1, 1, k)
        om = build_outer_model(m, w.eta_limit, k - 0.4 * N, N)
        pz = predicted_band_zeros(om)
        wd = m.beta - m.alpha
        frac = m.mass_right(m.alpha + 0.02 * wd) - m.mass_right(m.beta - 0.02 * wd)
        assert abs(len(pz) - k * frac) <= 2
        pairs = match_zeros(zeros(sy, k), pz)
        D.append(max(abs(a - b) for a, b in pairs) * N ** 2)
    assert max(D) < 2 * min(D)


def test_symmetric_model_zeros():
    m = krawtchouk_equilibrium(0.5, 0.5, 0.3)
    om = build_outer_model(m, 0.0, 0.0, 60)
    pz = np.array(predicted_band_zeros(om))
    assert np.allclose(pz + pz[::-1], 1.0, atol=1e-10)


def test_saturated_pairing():
    c = 0.7
    m = hahn_equilibrium(1, 5, c)
    logs = []
    Ns = (30, 40, 50, 60)
    for N in Ns:
        k = round(c * N)
        _, sy = hahn_system(N, 1, 5, k)
        rep = saturated_zero_pairing(sy, m, k)
        assert len(rep) == 1 and rep[0].side == "left" and rep[0].ordering_ok
        logs.append(float(mpmath.log(rep[0].max_distance)))
    slope = np.polyfit(Ns, logs, 1)[0]
    assert slope < -0.01


def test_saturated_pairing_empty_without_saturation():
    m = hahn_equilibrium(3, 7, 0.15)
    _, sy = hahn_system(20, 3, 7, 3)
    assert saturated_zero_pairing(sy, m, 3) == []


def test_predicted_recurrence():
    m = hahn_equilibrium(3, 7, 0.5)
    ca, cg = [], []
    for N in (60, 120):
        k = N // 2
        w, sy = hahn_system(N, 3, 7, k)
        pr = predicted_recurrence(build_outer_model(m, w.eta_limit, 0.0, N))
        ca.append(float(abs(sy.a_coeffs[k] - pr["a_k"])) * N)
        cg.append(float(abs(mpmath.log(sy.gamma[k] ** 2 / pr["gamma2_k"]))) * N)
    assert 0.5 < ca[1] / ca[0] < 1.5
    assert 0.5 < cg[1] / cg[0] < 1.5


def test_symmetric_recurrence_prediction():
    m = krawtchouk_equilibrium(0.5, 0.5, 0.3)
    assert predicted_recurrence(build_outer_model(m, 0.0, 0.0, 50))["a_k"] == pytest.approx(0.5, abs=1e-12)


def test_tau_point_inverts_edge_map():
    from dopasym.outer_model import edge_maps
    m = krawtchouk_equilibrium(0.1, 0.9, 0.5)
    om = build_outer_model(m, 0.0, 0.0, 80)
    for edge in ("alpha", "beta"):
        for t in (-1.5, 0.0, 2.0):
            assert abs(edge_maps(om, edge, tau_point(om, edge, t)).real - t) < 1e-9


def test_sweep_rows_and_csv():
    m = krawtchouk_equilibrium(0.1, 0.9, 0.5)
    rows = regional_sweep({"family": "krawtchouk", "p": 0.1, "q": 0.9}, m, [20], airy_taus=(0.0,))
    kinds = {r.theorem.split(":")[0] for r in rows}
    assert kinds == {"outer", "band", "void", "saturated", "hard_edge", "airy"}
    assert len(rows) == len(default_test_points(m)) + 2
    text = sweep_csv(rows)
    assert text.splitlines()[1] == "theorem,N,test_point,exact,approx,scaled_error"
