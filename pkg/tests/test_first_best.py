import numpy as np
import pytest

from upkeep import (
    AgentType,
    TypeDistribution,
    check_feasible,
    fb_dual_value,
    fb_threshold_gap,
    primal_grid_welfare,
    solve_first_best,
    welfare,
)
from conftest import random_distribution


def test_threshold_gap_values(lmh):
    assert fb_threshold_gap(2.7, lmh, 5.5) == pytest.approx(0.0, abs=1e-12)
    assert fb_threshold_gap(0.0, lmh, 5.5) == pytest.approx(lmh.u_bar)
    single = TypeDistribution((AgentType("A", 1, 1, 1.0),))
    assert fb_threshold_gap(4.0 / 3.0, single, 0.5) == pytest.approx(0.0, abs=1e-12)


def test_threshold_gap_strictly_decreasing(lmh):
    ys = np.linspace(0.0, 4.0, 50)
    gaps = [fb_threshold_gap(float(y), lmh, 5.5) for y in ys]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))


def test_dual_value(lmh):
    assert fb_dual_value(2.7, lmh, 5.5) == pytest.approx(2.15, abs=1e-12)
    assert fb_dual_value(0.0, lmh, 5.5) == pytest.approx(17.0)
    assert fb_dual_value(3.0, lmh, 5.5) == pytest.approx(2.75, abs=1e-12)


def test_solve_three_types(lmh):
    sol = solve_first_best(lmh, 5.5)
    assert sol.y_fb == pytest.approx(2.7, abs=1e-9)
    assert sol.Q_fb == pytest.approx(4.0 / 15.0, abs=1e-9)
    assert sol.W_fb == pytest.approx(2.15, abs=1e-9)
    assert sol.mechanism.P["L"] == 0.0
    assert sol.mechanism.P["M"] == pytest.approx(11.0 / 15.0, abs=1e-9)
    assert sol.mechanism.P["H"] == pytest.approx(11.0 / 15.0, abs=1e-9)
    rep = check_feasible(sol.mechanism, lmh, 5.5, families={"balance", "simplex"})
    assert rep.ok
    assert welfare(sol.mechanism, lmh) == pytest.approx(sol.W_fb, abs=1e-9)


def test_solve_equal_costs(equal_cost):
    sol = solve_first_best(equal_cost, 1.0)
    assert sol.Q_fb == pytest.approx(0.5, abs=1e-9)
    for t in equal_cost.types:
        assert sol.mechanism.P[t.id] == pytest.approx(0.5, abs=1e-9)


def test_solve_singleton_idle():
    d = TypeDistribution((AgentType("A", 1.0, 2.0, 1.0),))
    sol = solve_first_best(d, 1.0)
    assert sol.y_fb == pytest.approx(1.0, abs=1e-9)
    assert sol.Q_fb == 0.0
    assert sol.W_fb == pytest.approx(0.0, abs=1e-12)
    assert sol.mechanism.P["A"] == 0.0


def test_root_sign_change(lmh):
    sol = solve_first_best(lmh, 5.5)
    eps = 1e-6
    assert fb_threshold_gap(sol.y_fb - eps, lmh, 5.5) > 0
    assert fb_threshold_gap(sol.y_fb + eps, lmh, 5.5) < 0


def test_dual_minimized_at_threshold(lmh):
    sol = solve_first_best(lmh, 5.5)
    assert fb_dual_value(sol.y_fb, lmh, 5.5) == pytest.approx(sol.W_fb, abs=1e-9)
    for y in np.linspace(0.0, 4.0, 41):
        assert fb_dual_value(float(y), lmh, 5.5) >= sol.W_fb - 1e-9


def test_monotone_in_breakage_rate():
    rng = np.random.default_rng(11)
    for _ in range(10):
        d = random_distribution(rng)
        rhos = np.geomspace(0.1, 20.0, 8)
        sols = [solve_first_best(d, float(r)) for r in rhos]
        for a, b in zip(sols, sols[1:]):
            assert a.y_fb > b.y_fb
            assert a.Q_fb >= b.Q_fb - 1e-12
            if a.Q_fb > 0:
                assert a.Q_fb > b.Q_fb - 1e-12 and (b.Q_fb == 0 or a.Q_fb > b.Q_fb)


def test_grid_oracle_agreement():
    rng = np.random.default_rng(12)
    for _ in range(10):
        d = random_distribution(rng)
        rho = float(rng.uniform(0.1, 10.0))
        sol = solve_first_best(d, rho)
        w, _, _ = primal_grid_welfare(d, rho, "first_best")
        assert abs(sol.W_fb - w) <= 1e-3


def test_singleton_aggregate_contributions_rise():
    # aggregate contributions rho * Q need not fall with the breakage
    # rate; for a homogeneous group at small rates they rise
    d = TypeDistribution((AgentType("A", 1.0, 1.0, 1.0),))
    values = [rho * solve_first_best(d, rho).Q_fb for rho in (0.1, 0.2)]
    assert values[1] > values[0]


def test_degenerate_tolerance_rejected(lmh):
    with pytest.raises(ValueError):
        solve_first_best(lmh, 5.5, tol=0.0)
    with pytest.raises(ValueError):
        solve_first_best(lmh, 0.0)
