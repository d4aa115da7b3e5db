import itertools

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dopasym.errors import BadSpec, TooLarge
from dopasym.hexagon import (
    HexagonSpec,
    arctic_boundary,
    arctic_csv,
    column_marginal,
    count_tilings,
    edge_fluctuation_stats,
    edge_stats_csv,
    ellipse_residual,
    enumerate_tilings,
    hexagon_ensemble,
    hexagon_vertices,
    inscribed_ellipse,
    iter_tilings,
    particle_ensemble,
    tiling_svg,
)
from dopasym.kernels import ensemble_probabilities
from dopasym.lattice import dual_weights


def test_spec_geometry():
    sp = HexagonSpec(2, 2, 2, 2)
    assert (sp.a_m, sp.b_m, sp.N, sp.L) == (0, 0, 4, 2)
    with pytest.raises(BadSpec):
        HexagonSpec(2, 2, 2, 4)
    with pytest.raises(BadSpec):
        HexagonSpec(0, 2, 2, 1)


@pytest.mark.parametrize("a,b,c,m", [(2, 2, 2, 1), (3, 2, 4, 2), (4, 1, 2, 3)])
def test_hole_and_particle_ensembles(a, b, c, m):
    sp = HexagonSpec(a, b, c, m)
    _, wh, kh = hexagon_ensemble(sp)
    _, wp, kp = particle_ensemble(sp)
    assert kh + kp == sp.N
    d = dual_weights(wp)
    diffs = [x - y for x, y in zip(d.log_weights, wh.log_weights)]
    assert max(abs(u - diffs[0]) for u in diffs) < mpmath.mpf(10) ** -50


def test_counts():
    assert count_tilings(1, 1, 1) == 2
    assert count_tilings(2, 2, 2) == 20
    for p in itertools.permutations((2, 3, 4)):
        assert count_tilings(*p) == count_tilings(2, 3, 4)


@pytest.mark.parametrize("a,b,c", list(itertools.product(range(1, 4), repeat=3)))
def test_enumeration_matches_count(a, b, c):
    tilings = enumerate_tilings(a, b, c)
    assert len(tilings) == count_tilings(a, b, c)
    for t in tilings:
        assert len(t.particles) == a + b + 1
        assert all(len(col) == c for col in t.particles)
    assert len({t.particles for t in tilings}) == len(tilings)


def test_enumeration_cap():
    with pytest.raises(TooLarge):
        enumerate_tilings(6, 6, 6)


@pytest.mark.parametrize("a,b,c", [(2, 2, 2), (3, 2, 2), (2, 4, 3)])
def test_column_marginal_is_hahn(a, b, c):
    tilings = enumerate_tilings(a, b, c)
    for m in range(1, a + b):
        sp = HexagonSpec(a, b, c, m)
        ns, w, k = hexagon_ensemble(sp)
        emp = column_marginal(tilings, m)
        law = ensemble_probabilities(w.weights(), k, list(ns.nodes))
        assert set(emp) <= set(law)
        assert max(abs(emp.get(S, 0.0) - p) for S, p in law.items()) < 1e-10


def test_hexagon_vertices_closed():
    V = hexagon_vertices(1.0, 2.0, 1.5)
    sides = np.linalg.norm(np.diff(np.vstack([V, V[:1]]), axis=0), axis=1)
    assert np.allclose(sorted(sides), sorted([1, 1, 2, 2, 1.5, 1.5]))


def test_arctic_symmetry_and_ellipse():
    p = arctic_boundary(1, 1, 1, [1.0])[0]
    assert abs(p.alpha + p.beta - 1) < 1e-12
    for A, B, C in [(1, 1, 1), (2, 1, 1.5), (1, 3, 0.7)]:
        E, defect = inscribed_ellipse(A, B, C)
        assert defect < 1e-12
        taus = np.linspace(0, A + B, 52)[1:-1]
        pts = arctic_boundary(A, B, C, taus)
        worst = max(max(ellipse_residual(E, q.X, q.Y_alpha), ellipse_residual(E, q.X, q.Y_beta))
                    for q in pts if not q.exceptional)
        assert worst < 1e-8


@pytest.mark.parametrize("A,B,C", [(2, 1, 1.5), (1, 3, 0.7)])
def test_arctic_continuous_at_kinks(A, B, C):
    for kink in (A, B):
        eps = 1e-7
        lo, hi = arctic_boundary(A, B, C, [kink - eps, kink + eps])
        assert abs(lo.Y_alpha - hi.Y_alpha) < 1e-5 and abs(lo.Y_beta - hi.Y_beta) < 1e-5


def test_arctic_csv_and_validation():
    text = arctic_csv(arctic_boundary(1, 1, 1, [0.5, 1.0]))
    assert text.splitlines()[1] == "tau,alpha,beta,c,X,Y_alpha,Y_beta,exceptional"
    with pytest.raises(BadSpec):
        arctic_boundary(1, 1, 1, [2.5])


def test_edge_stats_small():
    rows = edge_fluctuation_stats(1, 1, 1, 0.25, [8], 200, seed=5, quad_points=40)
    again = edge_fluctuation_stats(1, 1, 1, 0.25, [8], 200, seed=5, quad_points=40)
    r = rows[0]
    assert np.array_equal(r.values, again[0].values)
    ecdf = np.array([e for _, e, _ in r.table])
    F = np.array([f for _, _, f in r.table])
    assert np.all(np.diff(ecdf) > 0) and ecdf[-1] == 1.0 and ecdf[0] > 0
    assert np.all((F >= 0) & (F <= 1)) and np.all(np.diff(F) >= 0)
    assert 0 <= r.ks <= 1
    assert edge_stats_csv(rows) == edge_stats_csv(again)


def test_svg():
    t = next(iter_tilings(2, 2, 2))
    svg = tiling_svg(t)
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
    assert svg.count("<polygon") == 2 * 2 + 2 * 2 + 2 * 2


@settings(max_examples=20, deadline=None)
@given(a=st.integers(1, 6), b=st.integers(1, 6), c=st.integers(1, 6), data=st.data())
def test_column_counts_property(a, b, c, data):
    m = data.draw(st.integers(1, a + b - 1))
    sp = HexagonSpec(a, b, c, m)
    assert sp.N == c + (a - sp.a_m + b - sp.b_m) // 2
    assert sp.L == sp.N - c >= 0
    assert count_tilings(a, b, c) == count_tilings(c, a, b)
