import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dopasym.equilibrium import hahn_equilibrium, krawtchouk_equilibrium
from dopasym.errors import EdgeMismatch, MultiBand, TooCloseToEdge
from dopasym.lattice import family_from_spec
from dopasym.outer_model import (
    band_phase,
    build_outer_model,
    edge_coefficient,
    edge_maps,
    eval_potentials,
    h_by_quadrature,
)


@pytest.fixture(scope="module")
def sbv():
    return hahn_equilibrium(3, 7, 0.5)


@pytest.fixture(scope="module")
def hahn_eta():
    return family_from_spec({"family": "hahn", "A": 2, "B": 2}, N=40).eta_limit


def test_trivial_corrections(sbv):
    om = build_outer_model(sbv, None, 0.0, 50)
    assert om.gamma_const == 0.0
    for z in (0.3 + 0.2j, 2.0 + 1e-3j, -1 + 5j):
        assert abs(om.h(z)) < 1e-15
        assert abs(om.W(z) - om.uv(z)[0]) < 1e-15


def test_lambda_at_infinity(sbv):
    om = build_outer_model(sbv)
    z = 1e6 * (om.beta - om.alpha) * 1j
    assert abs(om.lam(z) - 1) < 1e-5


@settings(max_examples=40, deadline=None)
@given(x=st.floats(-3, 4), y=st.floats(-3, 3))
def test_u_v_identity(x, y):
    om = build_outer_model(hahn_equilibrium(3, 7, 0.5))
    if abs(y) < 1e-6:
        y = 1e-3
    u, v = om.uv(complex(x, y))
    assert abs(u * u + v * v - 1) < 1e-12


@pytest.mark.parametrize("z", [0.4 + 0.1j, 1.5 + 2j, -0.3 + 0.01j])
def test_W_Z_product(sbv, hahn_eta, z):
    om = build_outer_model(sbv, hahn_eta, 0.3, 40)
    u, v = om.uv(z)
    assert abs(om.W(z) * om.Z(z) - 1j * u * v) < 1e-12


def test_analytic_across_real_axis_outside():
    # k = cN integer, kappa = 0: boundary values of e^{N L_c} W agree off [a, b]
    m = hahn_equilibrium(3, 7, 0.5)
    N = 40
    om = build_outer_model(m, family_from_spec({"family": "hahn", "A": 3, "B": 7}, N=N).eta_limit, 0.0, N)
    for x in (1.4, -0.6):
        up = cmath.exp(N * om.L(x, 1)) * om.W(x, 1)
        dn = cmath.exp(N * om.L(x, -1)) * om.W(x, -1)
        assert abs(up - dn) < 1e-10 * abs(up)


def test_gamma_equals_edge_identity(hahn_eta):
    m = hahn_equilibrium(2, 2, 0.3)
    for kappa in (0.0, 0.37):
        om = build_outer_model(m, hahn_eta, kappa, 40)
        h_b = om.h(om.beta, side=1)
        assert abs(om.gamma_const - (float(hahn_eta(om.beta)) - 2 * h_b.real)) < 1e-10


@pytest.mark.parametrize("z", [1.3 + 0.0j, 0.5 + 0.6j, -0.4 + 0.2j])
def test_h_series_vs_quadrature(hahn_eta, z):
    m = hahn_equilibrium(2, 2, 0.3)
    om = build_outer_model(m, hahn_eta, 0.25, 40)
    assert abs(om.h(z) - h_by_quadrature(om, z)) < 1e-10


def test_potential_asymptotics_and_phases(sbv):
    om = build_outer_model(sbv)
    z = 1e6
    assert abs(om.L(z) - om.c * math.log(z)) < 1e-5
    assert om.theta_gap("right") == 0.0
    assert abs(om.theta_gap("left") + 2 * math.pi * om.c) < 1e-15
    p_left = eval_potentials(om, 0.5 * om.alpha)
    assert abs(p_left["theta"] + 2 * math.pi * om.c) < 1e-15
    mid = 0.5 * (om.alpha + om.beta)
    p = eval_potentials(om, mid)
    assert abs(p["dEdmu"] - sbv.ell_c) < 1e-6 * abs(sbv.ell_c)
    assert -2 * math.pi * om.c < p["theta"] < 0


def test_tau_at_edge_and_sign():
    m = hahn_equilibrium(3, 7, 0.15)  # void on both sides
    om = build_outer_model(m, None, 0.0, 100)
    assert edge_maps(om, "alpha", om.alpha) == 0
    w = om.beta - om.alpha
    assert edge_maps(om, "alpha", om.alpha + 0.01 * w).real > 0
    assert edge_maps(om, "alpha", om.alpha - 0.01 * w).real < 0
    with pytest.raises(EdgeMismatch):
        edge_maps(om, "alpha", om.alpha, kind="saturated")


@pytest.mark.parametrize("c,edge", [(0.15, "alpha"), (0.5, "alpha"), (0.5, "beta")])
def test_tau_slope_matches_edge_coefficient(c, edge):
    # density ~ B sqrt(dist) gives tau ~ N^{2/3} (4 pi c B / 3)^{2/3} dist
    N = 64
    m = hahn_equilibrium(3, 7, c)
    om = build_outer_model(m, None, 0.0, N)
    B = edge_coefficient(om, edge)
    e = om.alpha if edge == "alpha" else om.beta
    sgn = 1 if edge == "alpha" else -1
    h = 1e-6 * (om.beta - om.alpha)
    slope = edge_maps(om, edge, e + sgn * h).real / h
    pred = N ** (2 / 3) * (4 * math.pi * c * B / 3) ** (2 / 3)
    assert abs(slope / pred - 1) < 1e-3


def test_complex_tau_continues_real():
    m = hahn_equilibrium(3, 7, 0.15)
    om = build_outer_model(m, None, 0.0, 64)
    x = om.alpha + 0.02 * (om.beta - om.alpha)
    assert abs(edge_maps(om, "alpha", complex(x, 1e-12)) - edge_maps(om, "alpha", x)) < 1e-6


def test_band_phase():
    m = krawtchouk_equilibrium(0.5, 0.5, 0.3)
    om = build_outer_model(m, None, 0.0, 80)
    for x in np.linspace(om.alpha + 0.03 * (om.beta - om.alpha), om.beta - 0.03 * (om.beta - om.alpha), 15):
        A, _ = band_phase(om, x)
        assert A > 0
    u_p = om.uv(0.5, side=1)[0]
    _, phi = band_phase(om, 0.5)
    assert abs(phi - cmath.phase(u_p)) < 1e-14
    with pytest.raises(TooCloseToEdge):
        band_phase(om, om.alpha + 1e-6)


def test_band_modulus_two_routes(sbv, hahn_eta):
    om = build_outer_model(sbv, hahn_eta, 0.2, 40)
    for x in (0.3, 0.6, 0.8):
        Wp = om.W(x, side=1)
        u = om.uv(x, side=1)[0]
        assert abs(abs(Wp) ** 2 - abs(u) ** 2 * math.exp(2 * om.h(x, side=1).real)) < 1e-12


def test_multiband_rejected(sbv):
    from dataclasses import replace
    with pytest.raises(MultiBand):
        build_outer_model(replace(sbv, bands=((0.1, 0.2), (0.5, 0.6)), gap_types=("void",) * 3))
