import numpy as np
import pytest

from upkeep import (
    AgentType,
    GridSpec,
    TypeDistribution,
    bounded_monopoly_solve,
    check_feasible,
    ic_lagrangian,
    lp_screening_welfare,
    menu_grid_oracle,
    solve_participation,
    solve_screening,
    verify_structure,
)
from conftest import random_distribution


def test_bounded_monopoly_two_tier_menu():
    # valuations scaled for 0.3 uptime; the optimum splits the middle
    # type onto a cheaper partial tier and prices the top at the cap
    y = 2.4
    vals = [
        (0.3 / 7.0, 1.0 / 3.0, y / 3.0),
        (3.0 / 7.0, 1.0 / 3.0, y / 3.0),
        (15.0 / 7.0, 1.0 / 3.0, y / 3.0),
    ]
    sol = bounded_monopoly_solve(vals)
    assert sol.r == pytest.approx((0.0, 2.0 / 3.0, 1.0), abs=1e-9)
    assert sol.p == pytest.approx((0.0, 2.0 / 7.0, 1.0), abs=1e-9)


def test_bounded_monopoly_posted_price_at_cap():
    sol = bounded_monopoly_solve([(2.0, 0.0, 1.0)])
    assert sol.r == (1.0,)
    assert sol.p == (1.0,)
    assert sol.value == pytest.approx(1.0)


def test_bounded_monopoly_posted_price_below_cap():
    sol = bounded_monopoly_solve([(0.5, 0.0, 1.0)])
    assert sol.r == (1.0,)
    assert sol.p == pytest.approx((0.5,))
    assert sol.value == pytest.approx(0.5)


def test_bounded_monopoly_rejects_bad_input():
    with pytest.raises(ValueError):
        bounded_monopoly_solve([(-0.1, 1.0, 1.0)])
    with pytest.raises(ValueError):
        bounded_monopoly_solve([(2.0, 1.0, 0.0), (1.0, 1.0, 0.0)])


def test_bounded_monopoly_free_tier_with_negative_weights():
    # charging the cap to the top type requires excluding a middle type
    # whose payments the seller dislikes; a free partial tier does it
    vals = [(1.5, 0.1, -5.0), (3.0, 0.0, 1.0)]
    sol = bounded_monopoly_solve(vals)
    assert sol.value == pytest.approx(1.1, abs=1e-9)
    assert sol.p[0] == pytest.approx(0.0, abs=1e-12)
    assert sol.p[1] == pytest.approx(1.0, abs=1e-12)
    assert sol.r[0] == pytest.approx(2.0 / 3.0, abs=1e-9)


def test_ic_lagrangian_degenerate_uptimes(equal_cost):
    value, menu = ic_lagrangian(0.0, 3.0, equal_cost, 1.0)
    assert value == 0.0
    assert all(v == 0.0 for v in menu.p.values())
    value, _ = ic_lagrangian(1.0, 3.0, equal_cost, 1.0)
    assert value == pytest.approx(-3.0)


def test_ic_lagrangian_free_allocation_at_zero_threshold():
    d = TypeDistribution((AgentType("A", 1.0, 1.0, 1.0),))
    value, menu = ic_lagrangian(0.5, 0.0, d, 1.0)
    assert value == pytest.approx(0.5, abs=1e-12)
    assert menu.r["A"] == pytest.approx(1.0)
    assert menu.p["A"] == pytest.approx(0.0)


def test_ic_lagrangian_saddle_value(equal_cost):
    sol = solve_screening(equal_cost, 1.0)
    value, _ = ic_lagrangian(sol.Q_star, sol.y_star, equal_cost, 1.0)
    assert value == pytest.approx(sol.W_star, abs=1e-6)


def test_solve_screening_two_tier(equal_cost):
    sol = solve_screening(equal_cost, 1.0)
    assert sol.Q_star == pytest.approx(0.3, abs=1e-3)
    assert sol.W_star == pytest.approx(0.8 / 3.0, abs=1e-4)
    assert sol.mechanism.R["H"] == pytest.approx(0.3, abs=1e-6)
    assert sol.mechanism.R["M"] == pytest.approx(0.2, abs=1e-6)
    assert sol.mechanism.R["L"] == pytest.approx(0.0, abs=1e-9)
    assert sol.mechanism.P["H"] == pytest.approx(0.7, abs=1e-6)
    assert sol.mechanism.P["M"] == pytest.approx(0.2, abs=1e-6)
    assert sol.assignment["L"] is None
    assert check_feasible(sol.mechanism, equal_cost, 1.0, tol=1e-8).ok


def test_solve_screening_singleton_matches_participation():
    d = TypeDistribution((AgentType("A", 1.0, 1.0, 1.0),))
    ic = solve_screening(d, 0.5)
    part = solve_participation(d, 0.5)
    assert ic.Q_star == pytest.approx(part.Q_star, abs=1e-6)
    assert ic.W_star == pytest.approx(part.W_star, abs=1e-8)


def test_solve_screening_pools_equal_valuations():
    d = TypeDistribution(
        (AgentType("A", 2.0, 1.0, 0.7), AgentType("B", 6.0, 3.0, 0.5))
    )
    sol = solve_screening(d, 1.0)
    rep = check_feasible(sol.mechanism, d, 1.0, tol=1e-8)
    assert rep.ok
    assert sol.mechanism.R["A"] == pytest.approx(sol.mechanism.R["B"], abs=1e-9)
    assert sol.mechanism.P["A"] == pytest.approx(sol.mechanism.P["B"], abs=1e-9)


def test_verify_structure_golden(equal_cost):
    sol = solve_screening(equal_cost, 1.0)
    assert verify_structure(sol)


def test_verify_structure_rejects_three_bundles(equal_cost):
    from upkeep.screening import MenuTier, ScreeningSolution
    from upkeep import Mechanism

    sol = ScreeningSolution(
        y_star=1.0,
        Q_star=0.4,
        W_star=0.0,
        mechanism=Mechanism(
            Q=0.4,
            R={"H": 0.4, "M": 0.2, "L": 0.1},
            P={"H": 0.6, "M": 0.3, "L": 0.1},
        ),
        tiers=(MenuTier(1.0, 1.0), MenuTier(0.5, 0.5), MenuTier(0.25, 1.0 / 6.0)),
        assignment={"H": 0, "M": 1, "L": 2},
        iterations=0,
        rho=1.0,
        d=equal_cost,
    )
    assert not verify_structure(sol)


def test_verify_structure_zero_menu(equal_cost):
    sol = solve_screening(equal_cost, 100.0)
    assert sol.Q_star == pytest.approx(0.0, abs=1e-9)
    assert verify_structure(sol)


def test_screening_weakly_below_participation():
    rng = np.random.default_rng(41)
    for _ in range(15):
        d = random_distribution(rng, n_max=5)
        rho = float(rng.uniform(0.1, 10.0))
        ic = solve_screening(d, rho)
        part = solve_participation(d, rho)
        assert ic.W_star <= part.W_star + 1e-8
        assert check_feasible(ic.mechanism, d, rho, tol=1e-8).ok
        assert verify_structure(ic, 1e-8)


def test_menu_monotone_in_valuation():
    rng = np.random.default_rng(43)
    for _ in range(15):
        d = random_distribution(rng, n_max=5)
        rho = float(rng.uniform(0.1, 10.0))
        sol = solve_screening(d, rho)
        by_nu = sorted(d.types, key=lambda t: t.nu)
        for a, b in zip(by_nu, by_nu[1:]):
            assert sol.mechanism.R[b.id] >= sol.mechanism.R[a.id] - 1e-9
            assert sol.mechanism.P[b.id] >= sol.mechanism.P[a.id] - 1e-9


def test_lp_oracle_agreement():
    rng = np.random.default_rng(47)
    grid = GridSpec(q_points=61, refine_rounds=3)
    for _ in range(8):
        d = random_distribution(rng, n_max=5)
        rho = float(rng.uniform(0.1, 10.0))
        sol = solve_screening(d, rho)
        w, _ = lp_screening_welfare(d, rho, grid)
        assert abs(sol.W_star - w) <= 2e-3


def test_monopoly_matches_grid_oracle_random():
    rng = np.random.default_rng(53)
    for _ in range(6):
        nus = np.sort(rng.uniform(0.0, 3.0, size=4))
        sws = rng.uniform(0.0, 2.0, size=4)
        pws = rng.uniform(-2.0, 2.0, size=4)
        vals = [(float(a), float(b), float(c)) for a, b, c in zip(nus, sws, pws)]
        sol = bounded_monopoly_solve(vals)
        oracle = menu_grid_oracle(vals, 1.0, 1e-3)
        scale = sum(abs(b) + abs(c) for _, b, c in vals) * max(1.0, float(nus.max()))
        assert abs(sol.value - oracle) <= 1e-3 * max(scale, 1.0)
