"""Incentive-compatible mechanisms: two-tier membership menus.

Hidden types are screened through access levels.  For a fixed uptime the
problem reduces to a single-good sale with a hard payment cap, whose
optima are posted prices or two-atom menus saturating the payment
moment.  The outer problem is again a concave-convex saddle point over
uptime and the repair value, solved by golden-section inside a bisection
on the balance residual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .model import (
    DEFAULT_TOL,
    DegenerateDistributionError,
    Mechanism,
    TypeDistribution,
    welfare,
)

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_MAX_BISECT = 200


@dataclass(frozen=True)
class MenuTier:
    """One membership option in normalized units: allocation probability
    and payment as a fraction of the payment cap."""

    r: float
    p: float


@dataclass(frozen=True)
class MenuSolution:
    """Per-buyer allocation and payment plus the achieved objective."""

    r: tuple[float, ...]
    p: tuple[float, ...]
    value: float


@dataclass(frozen=True)
class InnerMenu:
    """Normalized menu keyed by type id."""

    r: Mapping[str, float]
    p: Mapping[str, float]


@dataclass(frozen=True)
class ScreeningSolution:
    """Saddle data, the induced mechanism, and its tier structure.

    tiers are ordered by descending access; assignment maps each type id
    to a tier index, or None for opting out.
    """

    y_star: float
    Q_star: float
    W_star: float
    mechanism: Mechanism
    tiers: tuple[MenuTier, ...]
    assignment: Mapping[str, int | None]
    iterations: int
    rho: float
    d: TypeDistribution


def _menu_candidates(
    nus: Sequence[float], cap: float
) -> list[tuple[tuple[float, float], ...]]:
    """Candidate bundle sets: the opt-out alone, posted prices, and
    moment-saturated two-atom menus over valuation and cap cutpoints."""
    out = (0.0, 0.0)
    candidates: list[tuple[tuple[float, float], ...]] = [(out,)]
    points = sorted(set(nus))
    for t in [0.0] + points + [cap]:
        candidates.append((out, (1.0, min(t, cap))))
    lows = sorted({0.0, cap} | {v for v in points if v <= cap})
    highs = sorted({cap} | {v for v in points if v >= cap})
    for lo in lows:
        for hi in highs:
            if hi <= lo:
                continue
            r0 = (hi - cap) / (hi - lo)
            if not (0.0 <= r0 <= 1.0):
                continue
            candidates.append((out, (r0, r0 * lo), (1.0, cap)))
    return candidates


def _score_menu(
    bundles: tuple[tuple[float, float], ...],
    vals: Sequence[tuple[float, float, float]],
    tie_eps: float,
) -> tuple[float, list[int]]:
    # Buyers self-select, so the menu is incentive compatible and
    # individually rational by construction; indifferent buyers are
    # steered to the seller-preferred bundle.
    total = 0.0
    choice: list[int] = []
    for nu, sw, pw in vals:
        best_u = -math.inf
        best_obj = -math.inf
        best_k = 0
        for k, (r, p) in enumerate(bundles):
            u = r * nu - p
            if u > best_u + tie_eps:
                best_u, best_obj, best_k = u, sw * u + pw * p, k
            elif u >= best_u - tie_eps:
                obj = sw * u + pw * p
                if obj > best_obj:
                    best_u = max(best_u, u)
                    best_obj, best_k = obj, k
        total += best_obj
        choice.append(best_k)
    return total, choice


def bounded_monopoly_solve(
    vals: Sequence[tuple[float, float, float]], cap: float = 1.0
) -> MenuSolution:
    """Single-good sale with payments capped, mixed seller objective.

    vals holds (valuation, surplus_weight, payment_weight) triples sorted
    ascending by valuation; surplus weights must be nonnegative, payment
    weights may have any sign.  The objective is
    sum(surplus_weight * (r * valuation - p)) + sum(payment_weight * p)
    over incentive-compatible, individually rational menus with p <= cap.
    The search enumerates posted prices and moment-saturated two-atom
    menus, which exhaust the extreme points of the feasible allocation
    set, and returns the best candidate.
    """
    if cap <= 0:
        raise ValueError("cap must be > 0")
    for nu, sw, _ in vals:
        if nu < 0:
            raise ValueError("valuations must be >= 0")
        if sw < 0:
            raise ValueError("surplus weights must be >= 0")
    nus = [v[0] for v in vals]
    if any(b < a for a, b in zip(nus, nus[1:])):
        raise ValueError("vals must be sorted ascending by valuation")
    if not vals:
        return MenuSolution(r=(), p=(), value=0.0)

    tie_eps = 1e-12 * max(1.0, cap, max(nus))
    best_value = -math.inf
    best_choice: list[int] = []
    best_bundles: tuple[tuple[float, float], ...] = ((0.0, 0.0),)
    for bundles in _menu_candidates(nus, cap):
        value, choice = _score_menu(bundles, vals, tie_eps)
        if value > best_value:
            best_value, best_choice, best_bundles = value, choice, bundles
    r = tuple(best_bundles[k][0] for k in best_choice)
    p = tuple(best_bundles[k][1] for k in best_choice)
    return MenuSolution(r=r, p=p, value=best_value)


def _rev_candidates(
    d: TypeDistribution, Q: float
) -> list[tuple[float, float, dict[str, float], dict[str, float]]]:
    """(revenue, welfare, r_by_id, p_by_id) for every candidate menu."""
    ratio = Q / (1.0 - Q)
    order = sorted(d.types, key=lambda t: t.nu)
    nus = [t.nu * ratio for t in order]
    tie_eps = 1e-12 * max(1.0, max(nus, default=0.0))
    results = []
    for bundles in _menu_candidates(nus, 1.0):
        _, choice = _score_menu(
            bundles, [(nu, 0.0, t.mass) for nu, t in zip(nus, order)], tie_eps
        )
        r_by = {t.id: bundles[k][0] for t, k in zip(order, choice)}
        p_by = {t.id: bundles[k][1] for t, k in zip(order, choice)}
        rev = sum(t.mass * (1.0 - Q) * p_by[t.id] for t in order)
        w = sum(
            t.mass * (Q * r_by[t.id] * t.u - (1.0 - Q) * p_by[t.id] * t.c)
            for t in order
        )
        results.append((rev, w, r_by, p_by))
    return results


def ic_lagrangian(
    Q: float, y: float, d: TypeDistribution, rho: float
) -> tuple[float, InnerMenu]:
    """Relaxed value of uptime Q at repair value y over screening menus.

    For interior Q the problem normalizes to a bounded-payment sale with
    valuations scaled by Q / (1 - Q), surplus weights mass * c, and a net
    payment coefficient of mass * (y - c).  At Q of 0 or 1 the trade
    surface degenerates and the all-zero menu value is returned.
    """
    zero = InnerMenu(
        r={t.id: 0.0 for t in d.types}, p={t.id: 0.0 for t in d.types}
    )
    if Q <= 0.0 or Q >= 1.0:
        return -rho * Q * y, zero
    ratio = Q / (1.0 - Q)
    order = sorted(d.types, key=lambda t: t.nu)
    vals = [(t.nu * ratio, t.mass * t.c, t.mass * y) for t in order]
    sol = bounded_monopoly_solve(vals, cap=1.0)
    value = (1.0 - Q) * sol.value - rho * Q * y
    menu = InnerMenu(
        r={t.id: ri for t, ri in zip(order, sol.r)},
        p={t.id: pi for t, pi in zip(order, sol.p)},
    )
    return value, menu


def _argmax_uptime(
    y: float, d: TypeDistribution, rho: float, width: float = 1e-12
) -> tuple[float, float]:
    """Golden-section maximum of the concave uptime map at fixed y."""
    lo, hi = 0.0, 1.0
    c = hi - _GOLDEN * (hi - lo)
    e = lo + _GOLDEN * (hi - lo)
    fc = ic_lagrangian(c, y, d, rho)[0]
    fe = ic_lagrangian(e, y, d, rho)[0]
    while hi - lo > width:
        if fc >= fe:
            hi, e, fe = e, c, fc
            c = hi - _GOLDEN * (hi - lo)
            fc = ic_lagrangian(c, y, d, rho)[0]
        else:
            lo, c, fc = c, e, fe
            e = lo + _GOLDEN * (hi - lo)
            fe = ic_lagrangian(e, y, d, rho)[0]
    q = c if fc >= fe else e
    val = max(fc, fe)
    for q_end in (0.0, 1.0):
        v_end = ic_lagrangian(q_end, y, d, rho)[0]
        if v_end > val:
            q, val = q_end, v_end
    return q, val


def _menu_residual(Q: float, menu: InnerMenu, d: TypeDistribution, rho: float) -> float:
    return sum(t.mass * (1.0 - Q) * menu.p[t.id] for t in d.types) - rho * Q


def _residual_at(y: float, d: TypeDistribution, rho: float) -> tuple[float, float, InnerMenu]:
    q, _ = _argmax_uptime(y, d, rho)
    _, menu = ic_lagrangian(q, y, d, rho)
    return _menu_residual(q, menu, d, rho), q, menu


def _balance_repair(
    y: float, d: TypeDistribution, rho: float, tol: float
) -> tuple[float, InnerMenu] | None:
    """Find an exactly balanced menu on the near-maximal uptime plateau.

    At the saddle the maximizer face carries a balanced menu; the face is
    located by value, then the residual sign change inside it is bisected.
    """
    q_hat, v_hat = _argmax_uptime(y, d, rho)
    scale = max(1.0, rho, d.total_mass)
    eps = tol * scale
    eps_tight = 1e-12 * scale

    def resid(q: float) -> float:
        _, menu = ic_lagrangian(q, y, d, rho)
        return _menu_residual(q, menu, d, rho)

    r_hat = resid(q_hat)
    if abs(r_hat) <= eps_tight:
        return q_hat, ic_lagrangian(q_hat, y, d, rho)[1]

    n = 257
    grid = sorted({i / (n - 1) for i in range(n)} | {q_hat})
    values = [ic_lagrangian(q, y, d, rho)[0] for q in grid]
    v_max = max(max(values), v_hat)
    idx_hat = grid.index(q_hat)

    for plateau_tol in (1e-9, 1e-7, 1e-5):
        thr = v_max - plateau_tol * max(1.0, abs(v_max))
        lo_i = idx_hat
        while lo_i > 0 and values[lo_i - 1] >= thr:
            lo_i -= 1
        hi_i = idx_hat
        while hi_i < len(grid) - 1 and values[hi_i + 1] >= thr:
            hi_i += 1
        rs = {i: resid(grid[i]) for i in range(lo_i, hi_i + 1)}
        for i in range(lo_i, hi_i + 1):
            if abs(rs[i]) <= eps_tight:
                return grid[i], ic_lagrangian(grid[i], y, d, rho)[1]
        for i in range(lo_i, hi_i):
            if rs[i] == 0.0 or rs[i + 1] == 0.0 or (rs[i] > 0) == (rs[i + 1] > 0):
                continue
            a, b = grid[i], grid[i + 1]
            ra = rs[i]
            for _ in range(200):
                mid = 0.5 * (a + b)
                rm = resid(mid)
                if abs(rm) <= eps_tight * 1e-1:
                    break
                if (rm > 0) == (ra > 0):
                    a, ra = mid, rm
                else:
                    b = mid
            q_bal = 0.5 * (a + b)
            rm = resid(q_bal)
            if abs(rm) <= eps:
                return q_bal, ic_lagrangian(q_bal, y, d, rho)[1]
            # Residual jumps across a menu switch: mix the two menus.
            _, menu_a = ic_lagrangian(a, y, d, rho)
            _, menu_b = ic_lagrangian(b, y, d, rho)
            ra_here = _menu_residual(q_bal, menu_a, d, rho)
            rb_here = _menu_residual(q_bal, menu_b, d, rho)
            if (ra_here > 0) == (rb_here > 0):
                continue
            alpha = rb_here / (rb_here - ra_here)
            mixed = InnerMenu(
                r={
                    tid: alpha * menu_a.r[tid] + (1 - alpha) * menu_b.r[tid]
                    for tid in menu_a.r
                },
                p={
                    tid: alpha * menu_a.p[tid] + (1 - alpha) * menu_b.p[tid]
                    for tid in menu_a.p
                },
            )
            return q_bal, mixed
    return None


def _extract_tiers(
    menu: InnerMenu, d: TypeDistribution
) -> tuple[tuple[MenuTier, ...], dict[str, int | None]]:
    key_of: dict[tuple[float, float], int] = {}
    tiers: list[tuple[float, float]] = []
    assignment: dict[str, int | None] = {}
    for t in d.types:
        r, p = menu.r[t.id], menu.p[t.id]
        if r <= 1e-12 and p <= 1e-12:
            assignment[t.id] = None
            continue
        key = (round(r, 9), round(p, 9))
        if key not in key_of:
            key_of[key] = len(tiers)
            tiers.append((r, p))
        assignment[t.id] = key_of[key]
    order = sorted(range(len(tiers)), key=lambda i: (-tiers[i][0], -tiers[i][1]))
    remap = {old: new for new, old in enumerate(order)}
    sorted_tiers = tuple(MenuTier(r=tiers[i][0], p=tiers[i][1]) for i in order)
    assignment = {
        tid: (remap[k] if k is not None else None) for tid, k in assignment.items()
    }
    return sorted_tiers, assignment


def _build_solution(
    y_star: float,
    Q: float,
    menu: InnerMenu,
    d: TypeDistribution,
    rho: float,
    iterations: int,
) -> ScreeningSolution:
    R = {t.id: Q * menu.r[t.id] for t in d.types}
    P = {t.id: (1.0 - Q) * menu.p[t.id] for t in d.types}
    mech = Mechanism(Q=Q, R=R, P=P)
    tiers, assignment = _extract_tiers(menu, d)
    return ScreeningSolution(
        y_star=y_star,
        Q_star=Q,
        W_star=welfare(mech, d),
        mechanism=mech,
        tiers=tiers,
        assignment=assignment,
        iterations=iterations,
        rho=rho,
        d=d,
    )


def _solve_infinite_branch(
    d: TypeDistribution, rho: float, tol: float
) -> ScreeningSolution:
    # No menu has strictly slack balance, so feasible menus are exactly
    # the balanced revenue maximizers; pick the welfare-best of those.
    eps = tol * max(1.0, rho, d.total_mass)
    eps_bal = 1e-12 * max(1.0, rho, d.total_mass)

    def rev_gap(q: float) -> float:
        if q <= 0.0 or q >= 1.0:
            return -rho * q
        best = max(r[0] for r in _rev_candidates(d, q))
        return best - rho * q

    lo, hi = 0.0, 1.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if rev_gap(mid) >= -eps:
            lo = mid
        else:
            hi = mid
    qbar = lo

    best: tuple[float, float, InnerMenu] | None = None
    steps = 33
    for i in range(steps + 1):
        q = qbar * i / steps
        if q <= 0.0:
            cands = [(0.0, 0.0, {t.id: 0.0 for t in d.types}, {t.id: 0.0 for t in d.types})]
        elif q >= 1.0:
            continue
        else:
            cands = _rev_candidates(d, q)
        rev_max = max(c[0] for c in cands)
        if abs(rev_max - rho * q) > eps_bal:
            continue
        for rev, w, r_by, p_by in cands:
            if rev < rev_max - eps_bal:
                continue
            if best is None or w > best[0] + eps_bal:
                best = (w, q, InnerMenu(r=r_by, p=p_by))
    if best is None:
        best = (0.0, 0.0, InnerMenu(r={t.id: 0.0 for t in d.types}, p={t.id: 0.0 for t in d.types}))
    _, q, menu = best
    return _build_solution(math.inf, q, menu, d, rho, 0)


def solve_screening(
    d: TypeDistribution, rho: float, tol: float = DEFAULT_TOL
) -> ScreeningSolution:
    """Solve the designer's problem under participation and truthful
    reporting.

    The repair value is bisected on the balance residual of the induced
    menu; at the optimum the balanced menu on the maximizer face is
    recovered exactly.  When no menu has slack balance the dual is
    unbounded and the welfare-best balanced revenue maximizer is
    returned instead.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    if rho <= 0:
        raise ValueError("rho must be > 0")
    if d.total_mass <= 0:
        raise DegenerateDistributionError("distribution has no mass")

    eps = tol * max(1.0, rho, d.total_mass)

    def slack_gap(q: float) -> float:
        if q <= 0.0 or q >= 1.0:
            return -rho * q
        return max(r[0] for r in _rev_candidates(d, q)) - rho * q

    grid = [i / 64 for i in range(65)]
    if max(slack_gap(q) for q in grid) <= eps:
        lo, hi = 0.0, 1.0
        best = -math.inf
        for _ in range(60):
            c = hi - _GOLDEN * (hi - lo)
            e = lo + _GOLDEN * (hi - lo)
            if slack_gap(c) >= slack_gap(e):
                hi = e
            else:
                lo = c
            best = max(best, slack_gap(0.5 * (lo + hi)))
        if best <= eps:
            return _solve_infinite_branch(d, rho, tol)

    resid0, q0, menu0 = _residual_at(0.0, d, rho)
    if resid0 >= 0.0:
        repaired = _balance_repair(0.0, d, rho, tol)
        if repaired is not None:
            return _build_solution(0.0, repaired[0], repaired[1], d, rho, 0)

    y_hi = (d.u_bar + d.c_bar) / rho + d.max_cost + 1.0
    for _ in range(64):
        if _residual_at(y_hi, d, rho)[0] >= 0.0:
            break
        y_hi *= 2.0
    else:
        raise RuntimeError("failed to bracket the screening dual")
    y_lo = 0.0

    iterations = 0
    while y_hi - y_lo > 1e-12 * max(1.0, y_hi) and iterations < _MAX_BISECT:
        mid = 0.5 * (y_lo + y_hi)
        if _residual_at(mid, d, rho)[0] >= 0.0:
            y_hi = mid
        else:
            y_lo = mid
        iterations += 1

    candidates: list[ScreeningSolution] = []
    for y_side in (y_hi, y_lo):
        repaired = _balance_repair(y_side, d, rho, tol)
        if repaired is not None:
            candidates.append(
                _build_solution(y_hi, repaired[0], repaired[1], d, rho, iterations)
            )
    if not candidates:
        raise RuntimeError("balance repair failed at the screening optimum")
    return max(candidates, key=lambda s: s.W_star)


def verify_structure(sol: ScreeningSolution, tol: float = DEFAULT_TOL) -> bool:
    """Check the qualitative shape of an optimal screening menu.

    True iff the assignment is monotone in valuation, at most two nonzero
    tiers are used, a two-tier menu's top tier charges the full downtime,
    and a single-tier menu grants full access.
    """
    used = sorted({k for k in sol.assignment.values() if k is not None})
    tiers = [sol.tiers[k] for k in used]
    if len(tiers) > 2:
        return False
    if len(tiers) == 2 and abs(tiers[0].p - 1.0) > tol:
        return False
    if len(tiers) == 1 and abs(tiers[0].r - 1.0) > tol:
        return False

    def rank(tid: str) -> float:
        k = sol.assignment[tid]
        return -1.0 if k is None else sol.tiers[k].r

    by_nu = sorted(sol.d.types, key=lambda t: t.nu)
    for a, b in zip(by_nu, by_nu[1:]):
        if b.nu > a.nu + 1e-12 * max(1.0, a.nu) and rank(b.id) < rank(a.id) - tol:
            return False
        if abs(b.nu - a.nu) <= 1e-12 * max(1.0, a.nu):
            ra, pa = sol.mechanism.R[a.id], sol.mechanism.P[a.id]
            rb, pb = sol.mechanism.R[b.id], sol.mechanism.P[b.id]
            if abs(ra - rb) > tol or abs(pa - pb) > tol:
                return False
    return True
