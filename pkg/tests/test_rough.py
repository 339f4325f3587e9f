import math

import numpy as np
import pytest

from roughfou.errors import DomainError, FlavorError, ShapeError
from roughfou.fbm import PathMatrix, SampleGrid, sample_fbm
from roughfou.fou import ModelSpec, euler_simulate
from roughfou.harness import PathFactory
from roughfou.rough import (CorrectionTable, LiftedPath, check_chen, correction_table, cross_areas,
                            default_p, ito_correction_phi, p_var_distance, p_var_levels,
                            phi_rate_limit, read_lift_csv, strat_lift, to_ito_cross, to_ito_lift,
                            to_strat_lift, write_lift_csv)

from oracles import phi_quadrature

G2 = np.array([[1.0, 2.0], [2.0, 5.0]])


def _fou(d, H, T, n, seed, gamma=None, substeps=1):
    gamma = G2[:d, :d] if gamma is None and d <= 2 else (np.diag(np.arange(1.0, d + 1)) if gamma is None else gamma)
    model = ModelSpec(gamma, 1.0, H)
    grid = SampleGrid(T, n * substeps)
    return euler_simulate(model, grid, sample_fbm(H, grid, d, seed)), model


# --- Stratonovich lift ------------------------------------------------------

@pytest.mark.parametrize("m", [1, 4])
def test_one_dimensional_area_telescopes(m):
    x, _ = _fou(1, 0.4, 10.0, 512, 3, substeps=m)
    lift = strat_lift(x, m)
    expected = 0.5 * (x.values[0, -1] - x.values[0, 0]) ** 2
    assert abs(lift.total_area()[0, 0] - expected) <= 1e-12 * expected
    if m == 1:
        assert np.array_equal(lift.areas[:, 0, 0], 0.5 * lift.increments[:, 0] ** 2)


def test_constant_and_linear_paths():
    g = SampleGrid(1.0, 8)
    lift = strat_lift(PathMatrix(g, np.full((2, 9), 3.0)))
    assert not lift.increments.any() and not lift.areas.any() and not lift.running.any()
    g1 = SampleGrid(1.0, 1)
    lin = strat_lift(PathMatrix(g1, [[0.0, 1.0], [0.0, 2.0]]))
    assert np.array_equal(lin.areas[0], 0.5 * np.array([[1.0, 2.0], [2.0, 4.0]]))
    # a linear path refined is still exactly 1/2 dX (x) dX
    g8 = SampleGrid(1.0, 8)
    t = g8.times()
    fine = strat_lift(PathMatrix(g8, np.vstack([t, 2 * t])), substeps=8)
    assert np.allclose(fine.areas[0], lin.areas[0], rtol=1e-14)


def test_lift_consistency():
    x, _ = _fou(2, 0.45, 5.0, 256, 1, substeps=4)
    lift = strat_lift(x, 4)
    assert lift.grid == SampleGrid(5.0, 256)
    assert np.allclose(lift.values(), x.values[:, ::4], atol=1e-13)
    assert np.allclose(lift.increments.sum(axis=0), x.values[:, -1] - x.values[:, 0], atol=1e-13)
    # second level over the whole horizon equals the running level
    assert np.allclose(lift.second_level(0, 256), lift.running[-1], atol=1e-13)
    # XX_{s,t} from the running level equals the composed per-interval areas
    s, t = 10, 13
    direct = lift.areas[10] + lift.areas[11] + lift.areas[12]
    p = lift.offsets()
    direct = direct + np.outer(p[11] - p[10], p[12] - p[11]) + np.outer(p[12] - p[10], p[13] - p[12])
    assert np.allclose(lift.second_level(s, t), direct, atol=1e-13)
    with pytest.raises(ShapeError):
        strat_lift(x, 3)


@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("n", [2, 1024, 2 ** 14])
def test_chen_defect(d, n):
    x, model = _fou(d, 0.4, 20.0, n, 7 + d)
    strat = strat_lift(x)
    ito = to_ito_lift(strat, correction_table(model.gamma, model.hurst, strat.grid), model.sigma)
    assert check_chen(strat, relative=True) <= 1e-12
    assert check_chen(ito, relative=True) <= 1e-12


def test_chen_detects_perturbation():
    x, _ = _fou(2, 0.4, 2.0, 64, 2)
    lift = strat_lift(x)
    areas = lift.areas.copy()
    eps = 1e-5
    areas[10, 0, 1] += eps
    bad = LiftedPath(lift.grid, lift.increments, areas, lift.flavor, lift.base_point, lift.running)
    assert check_chen(bad) == pytest.approx(eps, rel=1e-6)


def test_lift_validation():
    g = SampleGrid(1.0, 4)
    with pytest.raises(ShapeError):
        LiftedPath.from_areas(g, np.zeros((3, 1)), np.zeros((3, 1, 1)), "ito", [0.0])
    with pytest.raises(FlavorError):
        LiftedPath.from_areas(g, np.zeros((4, 1)), np.zeros((4, 1, 1)), "levy", [0.0])


# --- Ito correction ---------------------------------------------------------

def test_phi_special_values():
    assert not ito_correction_phi(G2, 0.4, 0.0).any()
    for t in (0.0, 0.3, 7.0):
        assert np.array_equal(ito_correction_phi(G2, 0.5, t), 0.5 * t * np.eye(2))
        assert np.array_equal(ito_correction_phi([[3.0]], 0.5, t), [[0.5 * t]])
    phi = ito_correction_phi(G2, 0.4, 1.3)
    assert np.array_equal(phi, phi.T)


def test_phi_quadrature_oracle():
    assert ito_correction_phi([[2.0]], 0.4, 1.0)[0, 0] == pytest.approx(phi_quadrature(0.4, 2.0, 1.0), abs=1e-8)
    # matrix case: oracle per eigenvalue, recombined with numpy's eigh
    lam, q = np.linalg.eigh(G2)
    for t in (0.2, 2.0):
        ref = (q * [phi_quadrature(0.45, lv, t) for lv in lam]) @ q.T
        assert np.allclose(ito_correction_phi(G2, 0.45, t), ref, rtol=0, atol=1e-8)


def test_phi_rate_limit():
    assert phi_rate_limit([[2.0]], 0.5)[0, 0] == pytest.approx(0.5, rel=1e-15)
    for H in (0.35, 0.45):
        t = 1e5
        assert np.allclose(ito_correction_phi(G2, H, t) / t, phi_rate_limit(G2, H), rtol=1e-3)
        lam, q = np.linalg.eigh(G2)
        ref = (q * (H * math.gamma(2 * H) * lam ** (1 - 2 * H))) @ q.T
        assert np.allclose(phi_rate_limit(G2, H), ref, rtol=1e-12)


def test_correction_table_additivity():
    g = SampleGrid(3.0, 30)
    table = correction_table(G2, 0.4, g)
    t = g.times()
    assert not table.phi[0].any()
    for i, j in [(0, 5), (3, 17), (29, 30)]:
        ref = ito_correction_phi(G2, 0.4, t[j]) - ito_correction_phi(G2, 0.4, t[i])
        assert np.allclose(table.phi[j] - table.phi[i], ref, rtol=0, atol=1e-12)
    assert np.array_equal(table.gamma_used, G2)
    with pytest.raises(DomainError):
        correction_table(np.zeros((2, 2)), 0.4, g)


def test_to_ito_lift_cases():
    x, model = _fou(2, 0.4, 4.0, 128, 4)
    strat = strat_lift(x)
    table = correction_table(model.gamma, model.hurst, strat.grid)
    zero = to_ito_lift(strat, table, 0.0)
    assert zero.flavor == "ito" and np.array_equal(zero.areas, strat.areas)
    ito = to_ito_lift(strat, table, 1.7)
    back = to_strat_lift(ito, table, 1.7)
    assert back.flavor == "stratonovich" and np.array_equal(back.areas, strat.areas)
    assert np.allclose(ito.areas, strat.areas - 1.7 ** 2 * table.increments(), rtol=0, atol=1e-15)
    with pytest.raises(FlavorError):
        to_ito_lift(ito, table, 1.0)
    with pytest.raises(ShapeError):
        to_ito_lift(strat, correction_table(G2, 0.4, SampleGrid(4.0, 64)), 1.0)


def test_brownian_ito_total_area():
    model = ModelSpec([[2.0]], 1.0, 0.5)
    sim = PathFactory(model, SampleGrid(10.0, 1000), 9).simulate(0)
    xT = sim.fou.values[0, -1]
    assert sim.ito.total_area()[0, 0] == pytest.approx(0.5 * xT ** 2 - 5.0, rel=1e-12, abs=1e-12)


def test_cross_areas_match_self_lift():
    # with Gamma = 0 and sigma = 1 the solution is the driver itself
    g = SampleGrid(2.0, 256)
    b = sample_fbm(0.4, g, 2, 0)
    x = euler_simulate(ModelSpec(np.zeros((2, 2)), 1.0, 0.4), g, b)
    cross = cross_areas(x, b, substeps=4)
    assert np.allclose(cross.areas, strat_lift(x, 4).areas, atol=1e-14)
    table = correction_table(G2, 0.4, cross.grid)
    ic = to_ito_cross(cross, table, 2.0)
    assert ic.flavor == "ito"
    assert np.allclose(ic.areas, cross.areas - 2.0 * table.increments())


@pytest.mark.parametrize("H", [0.4, 0.45])
def test_refinement_rate(H):
    """Coarse areas from m and 2m sub-steps differ like m^-(2H - 1/2) in L2.

    Each coarse interval sums m sub-step corrections of size (h/m)^2H with
    random signs, giving sqrt(m) (h/m)^2H.
    """
    n, top = 32, 256
    model = ModelSpec(G2, 1.0, H)
    ms = [4, 8, 16, 32, 64]
    diffs = np.zeros(len(ms))
    for seed in range(8):
        grid = SampleGrid(4.0, n * top)
        x = euler_simulate(model, grid, sample_fbm(H, grid, 2, seed))
        for k, m in enumerate(ms):
            a = strat_lift(x.subsample(top // m), m).areas
            b = strat_lift(x.subsample(top // (2 * m)), 2 * m).areas
            diffs[k] += np.mean((a - b)[:, 0, 1] ** 2)
    slope = -np.polyfit(np.log(ms), 0.5 * np.log(diffs), 1)[0]
    assert abs(slope - (2 * H - 0.5)) <= 0.15, slope


# --- p-variation ------------------------------------------------------------

def test_default_p():
    assert default_p(0.4) == pytest.approx(2.6)
    assert 2 < default_p(0.5) < 3
    assert default_p(0.34) < 3


def _pair(seed_a, seed_b, n=64, d=2):
    xa, _ = _fou(d, 0.4, 2.0, n, seed_a)
    xb, _ = _fou(d, 0.4, 2.0, n, seed_b)
    return strat_lift(xa), strat_lift(xb)


def test_p_var_zero_and_symmetry():
    a, b = _pair(1, 2)
    assert p_var_distance(a, a, hurst=0.4) == 0.0
    for s in range(5):
        a, b = _pair(10 + s, 20 + s)
        assert p_var_distance(a, b, 2.6) == pytest.approx(p_var_distance(b, a, 2.6), rel=1e-13)


def test_p_var_single_interval_shift():
    a, _ = _pair(3, 4)
    c = np.array([0.3, -0.4])
    inc = a.increments.copy()
    inc[17] += c
    b = LiftedPath.from_areas(a.grid, inc, a.areas, a.flavor, a.base_point)
    lvl1, _ = p_var_levels(a, b, 2.5)
    assert lvl1 == pytest.approx(0.5, rel=1e-12)


def test_p_var_brute_force_small():
    # exhaustive search over all partitions of a 7-point grid
    import itertools
    a, b = _pair(5, 6, n=6)
    p = 2.5
    xa, xb = a.values().T, b.values().T
    best1 = best2 = 0.0
    for r in range(0, 6):
        for inner in itertools.combinations(range(1, 6), r):
            pts = (0, *inner, 6)
            s1 = s2 = 0.0
            for i, j in zip(pts[:-1], pts[1:]):
                s1 += np.linalg.norm((xa[j] - xa[i]) - (xb[j] - xb[i])) ** p
                s2 += np.linalg.norm(a.second_level(i, j) - b.second_level(i, j)) ** (p / 2)
            best1, best2 = max(best1, s1), max(best2, s2)
    lvl1, lvl2 = p_var_levels(a, b, p)
    assert lvl1 == pytest.approx(best1 ** (1 / p), rel=1e-12)
    assert lvl2 == pytest.approx(best2 ** (2 / p), rel=1e-12)


def test_p_var_errors():
    a, _ = _pair(1, 2)
    c, _ = _pair(1, 2, n=32)
    with pytest.raises(ShapeError):
        p_var_distance(a, c)
    with pytest.raises(DomainError):
        p_var_distance(a, a, p=3.5)


# --- CSV --------------------------------------------------------------------

def test_lift_csv_roundtrip(tmp_path):
    x, model = _fou(2, 0.45, 3.0, 40, 5)
    strat = strat_lift(x)
    ito = to_ito_lift(strat, correction_table(model.gamma, model.hurst, strat.grid), 1.0)
    f = write_lift_csv(ito, tmp_path / "lift.csv")
    lines = f.read_text().splitlines()
    assert lines[0] == "l,t,dX1,dX2,A11,A12,A21,A22,flavor"
    assert len(lines) == 41 and lines[1].endswith(",ito")
    back = read_lift_csv(f, base_point=x.values[:, 0])
    assert back.grid == ito.grid and back.flavor == "ito"
    assert np.array_equal(back.increments, ito.increments)
    assert np.array_equal(back.areas, ito.areas)
    assert np.allclose(back.running, ito.running, atol=1e-14)
