import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import erfinv

from buavc.cells import (
    BufferedFace,
    CellOptions,
    RobotSnapshot,
    buffer_chance,
    buffer_radius,
    buffer_stopping,
    build_buavc,
    build_bvc,
    bvc_cell,
)
from buavc.geometry import (
    HPolytope,
    Hyperplane,
    PointInsidePolytopeError,
    VPolytope,
    chebyshev_center,
    contains,
    max_margin_separator,
)
from buavc.mathkit import make_rng
from buavc.separators import CoincidentMeansError, GaussianPosition, UncertainObstacle, obstacle_separator
from buavc.sim import montecarlo as mc

EX = Hyperplane([1.0, 0.0], 1.0)
WS = HPolytope.box([-5, -5], [5, 5])


def snap(mean, cov, i=0, v=(0.0, 0.0), r_s=0.2, acc=None):
    return RobotSnapshot(i, GaussianPosition(mean, cov), np.asarray(v, float), r_s, acc)


def test_buffer_radius():
    assert buffer_radius(EX, 0.2) == 0.2
    assert buffer_radius(EX, 0.3) == 0.3
    with pytest.raises(ValueError):
        buffer_radius(Hyperplane([2.0, 0.0], 1.0), 0.2)


def test_buffer_chance_values():
    S = 0.04 ** 2 * np.eye(2)
    ref = 0.04 * math.sqrt(2) * erfinv(2 * math.sqrt(0.95) - 1)
    val = buffer_chance(EX, S, 0.05)
    assert abs(val - ref) < 1e-12
    assert abs(val - 0.0782) < 1e-4
    assert buffer_chance(EX, S, 0.75 - 1e-12) < 1e-9
    with pytest.raises(ValueError):
        buffer_chance(EX, S, 0.75)


def test_buffer_chance_monotone():
    S = np.diag([0.01, 0.02])
    vals = [buffer_chance(EX, S, d) for d in np.linspace(0.001, 0.749, 50)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))


def test_buffer_stopping():
    assert buffer_stopping(EX, [-1.0, 0.0], 1.0) == 0.0
    assert buffer_stopping(EX, [1.0, 0.0], 2.0) == 0.25
    assert buffer_stopping(EX, [0.0, 0.0], 1.0) == 0.0


def test_single_robot_is_shrunk_workspace():
    cell = build_buavc(snap([0, 0], 0.04 ** 2 * np.eye(2)), [], [], 0.05, CellOptions(WS))
    P = cell.polytope
    assert np.allclose(np.sort(P.b), 4.8)
    assert not cell.empty and abs(cell.chebyshev.radius - 4.8) < 1e-12


def test_two_robot_symmetric_gap():
    s = 0.06 ** 2 * np.eye(2)
    gi, gj = GaussianPosition([0, 0], s), GaussianPosition([2, 0], s)
    ci = build_buavc(snap([0, 0], s), [gj], [], 0.05, CellOptions(), [1])
    cj = build_buavc(snap([2, 0], s, 1), [gi], [], 0.05, CellOptions(), [0])
    fi, fj = ci.faces[0], cj.faces[0]
    beta = 0.06 * math.sqrt(2) * erfinv(2 * math.sqrt(0.95) - 1)
    assert np.allclose(fi.base.a, [1, 0]) and np.allclose(fj.base.a, [-1, 0])
    xi, xj = fi.b_eff, -fj.b_eff
    # t is bisected to 1e-12, which bounds how exactly the offsets come out
    assert abs((xi + xj) / 2 - 1.0) < 1e-10
    assert abs((xj - xi) - 2 * (0.2 + beta)) < 1e-10


def test_coincident_means_empty():
    s = np.eye(2) * 0.01
    ci = build_buavc(snap([1, 1], s), [GaussianPosition([1, 1], s)], [], 0.05, CellOptions(WS))
    cj = build_buavc(snap([1, 1], s, 1), [GaussianPosition([1, 1], s)], [], 0.05, CellOptions(WS))
    assert ci.empty and cj.empty


def test_inside_shadow_empty():
    obs = UncertainObstacle(VPolytope.box([0, 0], [1, 1]), 0.05 ** 2 * np.eye(2))
    cell = build_buavc(snap([0.5, 0.5], 0.01 * np.eye(2)), [], [obs], 0.05, CellOptions(WS))
    assert cell.empty and cell.reason == "inside-shadow"


def test_infeasible_cell_flag_matches_radius():
    # neighbors extremely close on both sides with a large radius force an empty cell
    s = 0.01 * np.eye(2)
    others = [GaussianPosition([0.3, 0], s), GaussianPosition([-0.3, 0], s)]
    cell = build_buavc(snap([0, 0], s, r_s=0.5), others, [], 0.05, CellOptions(WS))
    assert cell.empty and cell.chebyshev.radius < 0


def test_sensing_range_filter():
    s = 0.01 * np.eye(2)
    others = [GaussianPosition([2.0, 0], s), GaussianPosition([2.0001, 1.0], s), GaussianPosition([3, 0], s)]
    cell = build_buavc(snap([0, 0], s), others, [], 0.05, CellOptions(None, 2.0))
    assert [f.source for f in cell.faces] == [("robot", 0)]


def test_stopping_buffer_applied():
    s = 0.01 * np.eye(2)
    gj = GaussianPosition([2, 0], s)
    a = build_buavc(snap([0, 0], s, v=(1.0, 0.0), acc=2.0), [gj], [], 0.05, CellOptions(None, 5, True))
    b = build_buavc(snap([0, 0], s, v=(1.0, 0.0), acc=2.0), [gj], [], 0.05, CellOptions(None, 5, False))
    assert abs(a.faces[0].beta_s - 0.25) < 1e-12 and b.faces[0].beta_s == 0.0


def test_bvc_examples():
    P = build_bvc([0, 0], [[2, 0]], 0.2)
    assert np.allclose(P.A, [[1, 0]]) and abs(P.b[0] - 0.8) < 1e-12
    P0 = build_bvc([0, 0], [[2, 0]], 0.0)
    assert abs(P0.b[0] - 1.0) < 1e-12
    with pytest.raises(CoincidentMeansError):
        build_bvc([0, 0], [[0, 0]], 0.2)


def test_bvc_equilateral_symmetry():
    pts = [np.array([math.cos(a), math.sin(a)]) for a in (0, 2 * math.pi / 3, 4 * math.pi / 3)]
    R = np.array([[math.cos(2 * math.pi / 3), -math.sin(2 * math.pi / 3)],
                  [math.sin(2 * math.pi / 3), math.cos(2 * math.pi / 3)]])
    cells = [build_bvc(p, [q for q in pts if q is not p], 0.1) for p in pts]
    assert all(c.A.shape[0] == 2 for c in cells)
    for k in range(3):
        rot = {tuple(np.round(R @ a, 12)) for a in cells[k].A}
        nxt = {tuple(np.round(a, 12)) for a in cells[(k + 1) % 3].A}
        assert rot == nxt
        assert np.allclose(np.sort(cells[k].b), np.sort(cells[(k + 1) % 3].b))


def test_bvc_inflation_wrapper():
    s = 0.01 * np.eye(2)
    cell = bvc_cell(snap([0, 0], s), [GaussianPosition([2, 0], s)], CellOptions(None, 5), inflation=0.1)
    assert abs(cell.faces[0].b_eff - (1.0 - 0.22)) < 1e-12


def rand_spd(rng, d=2, lo=0.02, hi=0.2):
    return mc.random_spd(rng, d, lo, hi)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.floats(0.01, 0.7))
def test_cells_disjoint(seed, delta):
    rng = make_rng(seed)
    pi = rng.uniform(-2, 2, 2)
    pj = pi + rng.uniform(0.5, 2.0) * np.array([math.cos(t := rng.uniform(0, 6.3)), math.sin(t)])
    Si, Sj = rand_spd(rng), rand_spd(rng)
    gi, gj = GaussianPosition(pi, Si), GaussianPosition(pj, Sj)
    opts = CellOptions(WS, 10.0)
    ci = build_buavc(RobotSnapshot(0, gi, np.zeros(2), 0.2), [gj], [], delta, opts, [1])
    cj = build_buavc(RobotSnapshot(1, gj, np.zeros(2), 0.2), [gi], [], delta, opts, [0])
    if ci.empty or cj.empty:
        return
    both = ci.polytope.intersect(cj.polytope)
    assert chebyshev_center(both).radius < 0


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.floats(0.01, 0.7), st.floats(0.01, 0.7))
def test_shrinking_monotone_in_delta(seed, d1, d2):
    lo, hi = sorted((d1, d2))
    rng = make_rng(seed)
    me = RobotSnapshot(0, GaussianPosition([0, 0], rand_spd(rng)), np.zeros(2), 0.2)
    others = [GaussianPosition(rng.uniform(-1.5, 1.5, 2) + [0.5, 0.5], rand_spd(rng)) for _ in range(3)]
    obs = [UncertainObstacle(VPolytope.box([1.2, -0.5], [1.8, 0.5]), rand_spd(rng))]
    a = build_buavc(me, others, obs, lo, CellOptions(WS, 3.0))
    b = build_buavc(me, others, obs, hi, CellOptions(WS, 3.0))
    # robot and workspace planes keep their normal, so only the buffer moves
    for fa, fb in zip(a.faces, b.faces):
        assert fa.source == fb.source
        if fa.source[0] != "obstacle":
            assert np.allclose(fa.base.a, fb.base.a)
            assert fa.b_eff <= fb.b_eff + 1e-12
    # the obstacle plane may rotate with delta; its whitened clearance still grows
    try:
        clear = [max_margin_separator(np.zeros(2), obs[0].shadow_whitened(d)).b for d in (lo, hi)]
    except PointInsidePolytopeError:
        return
    assert clear[0] <= clear[1] + 1e-12


@settings(max_examples=60, deadline=None)
@given(st.floats(0.02, 0.3), st.floats(0.5, 2.0), st.floats(0.1, 1.0), st.floats(0.01, 0.7), st.floats(0.01, 0.7))
def test_obstacle_face_monotone_fixed_normal(sigma, gap, half, d1, d2):
    # isotropic translation noise with the box squarely across pins the normal to +x
    lo, hi = sorted((d1, d2))
    obs = UncertainObstacle(VPolytope.box([gap, -half], [gap + 1.0, half]), sigma ** 2 * np.eye(2))
    me = snap([0, 0], 0.04 ** 2 * np.eye(2))
    a = build_buavc(me, [], [obs], lo, CellOptions(WS, 10.0))
    b = build_buavc(me, [], [obs], hi, CellOptions(WS, 10.0))
    fa = [f for f in a.faces if f.source[0] == "obstacle"]
    fb = [f for f in b.faces if f.source[0] == "obstacle"]
    if a.empty or b.empty or not fa:
        return
    assert np.allclose(fa[0].base.a, [1, 0], atol=1e-9) and np.allclose(fb[0].base.a, [1, 0], atol=1e-9)
    assert fa[0].b_eff <= fb[0].b_eff + 1e-12


def test_obstacle_plane_rotation_can_shrink_offset():
    # a rotated plane can sit closer along its own normal at the larger delta
    rng = make_rng(14742)
    rand_spd(rng)
    for _ in range(3):
        rng.uniform(-1.5, 1.5, 2), rand_spd(rng)
    obs = UncertainObstacle(VPolytope.box([1.2, -0.5], [1.8, 0.5]), rand_spd(rng))
    h_lo, h_hi = (obstacle_separator([0, 0], obs, d) for d in (0.25, 0.5))
    assert not np.allclose(h_lo.a, h_hi.a, atol=1e-3)
    assert h_lo.b > h_hi.b


def _sample_inside(cell, around, rng, n=1):
    out = []
    while len(out) < n:
        q = around + rng.uniform(-1, 1, around.shape[0])
        if contains(cell.polytope, q, 0.0):
            out.append(q)
    return out


def test_theorem2_random_placements():
    rng = make_rng(404)
    for _ in range(5):
        s = rand_spd(rng)
        cfg = mc.PairConfig(GaussianPosition([0, 0], s), GaussianPosition(rng.uniform(1.0, 1.5, 2), rand_spd(rng)),
                            0.2, 0.1)
        pi, pj, ci, cj = mc.worst_case_pair(cfg)
        assert contains(ci.polytope, pi, 1e-9) and contains(cj.polytope, pj, 1e-9)
        res = mc.theorem2(cfg, 100_000, rng)
        assert res.passed, res.line()
        qi, qj = _sample_inside(ci, pi, rng)[0], _sample_inside(cj, pj, rng)[0]
        assert mc.theorem2(cfg, 100_000, rng, (qi, qj)).passed


def test_theorem3_worst_case():
    rng = make_rng(505)
    for d in (2, 3):
        obs = UncertainObstacle(VPolytope.box(np.zeros(d), np.ones(d)), rand_spd(rng, d))
        cfg = mc.ObstacleConfig(GaussianPosition(-np.ones(d), rand_spd(rng, d)), obs, 0.2, 0.1)
        res = mc.theorem3(cfg, 100_000, rng)
        assert res.passed, res.line()


def test_lemma2_sanity():
    rng = make_rng(606)
    g = GaussianPosition([0.2, -0.1], np.array([[0.05, 0.01], [0.01, 0.02]]))
    a = np.array([0.6, 0.8])
    for b in (-0.2, 0.0, 0.1, 0.3):
        assert mc.lemma2(a, b, g, 10 ** 6, rng).passed


def test_zero_covariance_limit():
    rng = make_rng(707)
    z = np.zeros((2, 2))
    res = mc.theorem2(mc.PairConfig(GaussianPosition([0, 0], z), GaussianPosition([2, 0], z), 0.2, 0.05),
                      10_000, rng, placement=(np.array([0.7, 0.0]), np.array([1.3, 0.0])))
    assert res.empirical == 0.0
