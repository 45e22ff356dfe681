"""Independent brute-force optimality checkers for the three solvers.

These deliberately avoid the solvers' machinery: welfare is maximized by
scanning an uptime grid with local refinement, filling contributions
greedily (exact for a fixed uptime since the objective is linear), or by
solving the full linear program with a small self-contained simplex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .model import TypeDistribution

_FEAS_EPS = 1e-12


class TooManyTypesError(ValueError):
    """The LP oracle enumerates densely and is capped at 8 types."""


@dataclass(frozen=True)
class GridSpec:
    """Uptime grid resolution and refinement schedule."""

    q_points: int = 2001
    refine_rounds: int = 3
    lp_tol: float = 1e-9

    def __post_init__(self) -> None:
        if self.q_points < 3:
            raise ValueError("q_points must be >= 3")
        if self.refine_rounds < 0:
            raise ValueError("refine_rounds must be >= 0")
        if self.lp_tol <= 0:
            raise ValueError("lp_tol must be > 0")


def _grid_eval(
    d: TypeDistribution,
    rho: float,
    mode: str,
    qs: np.ndarray,
) -> np.ndarray:
    """Welfare at each grid uptime, -inf where infeasible.

    For a fixed uptime the required contributions are filled greedily in
    ascending cost order, which is exactly optimal because the objective
    is linear in the fill.
    """
    order = sorted(d.types, key=lambda t: t.c)
    mass = np.array([t.mass for t in order])
    cost = np.array([t.c for t in order])
    nu = np.array([t.nu for t in order])
    one_minus = 1.0 - qs
    if mode == "first_best":
        caps = mass[:, None] * one_minus[None, :]
    else:
        caps = mass[:, None] * np.minimum(one_minus[None, :], qs[None, :] * nu[:, None])
    need = rho * qs
    total = caps.sum(axis=0)
    cum_before = np.cumsum(caps, axis=0) - caps
    fill = np.clip(need[None, :] - cum_before, 0.0, caps)
    w = qs * d.u_bar - (cost[:, None] * fill).sum(axis=0)
    w = np.where(total >= need - _FEAS_EPS * np.maximum(1.0, need), w, -np.inf)
    return w


def primal_grid_welfare(
    d: TypeDistribution,
    rho: float,
    mode: Literal["first_best", "participation"],
    g: GridSpec = GridSpec(),
) -> tuple[float, float, dict[str, float]]:
    """Grid-search welfare maximum with greedy cost-ordered filling.

    Returns (welfare, uptime, contribution level per type id).  Ties on
    the grid resolve to the lowest uptime.
    """
    if mode not in ("first_best", "participation"):
        raise ValueError("mode must be 'first_best' or 'participation'")
    lo, hi = 0.0, 1.0
    best_q = 0.0
    best_w = -math.inf
    for _ in range(g.refine_rounds + 1):
        qs = np.linspace(lo, hi, g.q_points)
        w = _grid_eval(d, rho, mode, qs)
        i = int(np.argmax(w))
        if w[i] > best_w:
            best_w, best_q = float(w[i]), float(qs[i])
        h = (hi - lo) / (g.q_points - 1)
        lo = max(0.0, best_q - 2.0 * h)
        hi = min(1.0, best_q + 2.0 * h)

    order = sorted(d.types, key=lambda t: t.c)
    q = best_q
    fills: dict[str, float] = {}
    need = rho * q
    for t in order:
        if mode == "first_best":
            cap = t.mass * (1.0 - q)
        else:
            cap = t.mass * min(1.0 - q, q * t.nu)
        take = min(cap, max(need, 0.0))
        fills[t.id] = take / t.mass if t.mass > 0 else 0.0
        need -= take
    return best_w, q, fills


def _simplex_max(
    obj: np.ndarray,
    A_ub: np.ndarray,
    b_ub: np.ndarray,
    A_eq: np.ndarray,
    b_eq: np.ndarray,
    tol: float,
) -> tuple[np.ndarray, float] | None:
    """Two-phase dense simplex with Bland's rule; None if infeasible.

    Maximizes obj @ x subject to A_ub x <= b_ub, A_eq x = b_eq, x >= 0.
    Inequality right-hand sides must be nonnegative.
    """
    n = obj.size
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq
    n_total = n + m_ub + m_eq  # structural + slacks + artificials

    T = np.zeros((m + 1, n_total + 1))
    T[:m_ub, :n] = A_ub
    T[:m_ub, n : n + m_ub] = np.eye(m_ub)
    T[:m_ub, -1] = b_ub
    T[m_ub:m, :n] = A_eq
    T[m_ub:m, n + m_ub :n_total] = np.eye(m_eq)
    T[m_ub:m, -1] = b_eq
    basis = list(range(n, n + m_ub)) + list(range(n + m_ub, n_total))

    def pivot(row: int, col: int) -> None:
        T[row] /= T[row, col]
        for r in range(m + 1):
            if r != row and abs(T[r, col]) > 0.0:
                T[r] -= T[r, col] * T[row]

    def run(allowed: int) -> bool:
        for _ in range(20000):
            col = -1
            for j in range(allowed):
                if T[m, j] < -tol:
                    col = j
                    break
            if col < 0:
                return True
            row, best_ratio = -1, math.inf
            for r in range(m):
                if T[r, col] > tol:
                    ratio = T[r, -1] / T[r, col]
                    if ratio < best_ratio - tol or (
                        abs(ratio - best_ratio) <= tol
                        and (row < 0 or basis[r] < basis[row])
                    ):
                        best_ratio, row = ratio, r
            if row < 0:
                raise RuntimeError("unbounded linear program")
            pivot(row, col)
            basis[row] = col
        raise RuntimeError("simplex iteration limit exceeded")

    # Phase 1: drive the artificials to zero.
    if m_eq > 0:
        T[m, :] = 0.0
        for r in range(m_ub, m):
            T[m, : n_total] -= T[r, : n_total]
            T[m, -1] -= T[r, -1]
        T[m, n + m_ub : n_total] = 0.0
        run(n + m_ub)
        if T[m, -1] < -1e3 * tol * max(1.0, float(np.abs(b_eq).max(initial=0.0))):
            return None
        for r in range(m):
            if basis[r] >= n + m_ub and T[r, -1] > tol:
                return None
            if basis[r] >= n + m_ub:
                for j in range(n + m_ub):
                    if abs(T[r, j]) > tol:
                        pivot(r, j)
                        basis[r] = j
                        break
        T[:, n + m_ub : n_total] = 0.0

    # Phase 2.
    T[m, :] = 0.0
    T[m, :n] = -obj
    for r in range(m):
        if basis[r] < n and abs(T[m, basis[r]]) > 0.0:
            T[m] -= T[m, basis[r]] * T[r]
    run(n + m_ub)

    x = np.zeros(n)
    for r in range(m):
        if basis[r] < n:
            x[basis[r]] = T[r, -1]
    return x, float(obj @ x)


def _screening_lp(
    d: TypeDistribution, rho: float, q: float, tol: float
) -> float | None:
    """Exact welfare at uptime q over the full constraint set, or None."""
    n = len(d.types)
    u = np.array([t.u for t in d.types])
    c = np.array([t.c for t in d.types])
    mass = np.array([t.mass for t in d.types])

    obj = np.concatenate([mass * u, -mass * c])
    rows: list[np.ndarray] = []
    rhs: list[float] = []
    for i in range(n):
        row = np.zeros(2 * n)
        row[i] = 1.0
        rows.append(row)
        rhs.append(q)
    for i in range(n):
        row = np.zeros(2 * n)
        row[n + i] = 1.0
        rows.append(row)
        rhs.append(1.0 - q)
    for i in range(n):
        row = np.zeros(2 * n)
        row[i] = -u[i]
        row[n + i] = c[i]
        rows.append(row)
        rhs.append(0.0)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            row = np.zeros(2 * n)
            row[i] -= u[i]
            row[n + i] += c[i]
            row[j] += u[i]
            row[n + j] -= c[i]
            rows.append(row)
            rhs.append(0.0)
    A_eq = np.zeros((1, 2 * n))
    A_eq[0, n:] = mass
    b_eq = np.array([rho * q])

    result = _simplex_max(
        obj, np.array(rows), np.array(rhs), A_eq, b_eq, tol
    )
    if result is None:
        return None
    return result[1]


def lp_screening_welfare(
    d: TypeDistribution, rho: float, g: GridSpec = GridSpec()
) -> tuple[float, float]:
    """Grid-plus-refinement maximum of the exact fixed-uptime LP.

    The LP value is concave piecewise linear in the uptime, so the
    refinement window around the grid argmax always brackets the true
    maximizer.
    """
    if len(d.types) > 8:
        raise TooManyTypesError("LP oracle supports at most 8 types")
    lo, hi = 0.0, 1.0
    best_q = 0.0
    best_w = -math.inf
    for _ in range(g.refine_rounds + 1):
        qs = np.linspace(lo, hi, g.q_points)
        for q in qs:
            w = _screening_lp(d, rho, float(q), g.lp_tol)
            if w is not None and w > best_w:
                best_w, best_q = w, float(q)
        h = (hi - lo) / (g.q_points - 1)
        lo = max(0.0, best_q - 2.0 * h)
        hi = min(1.0, best_q + 2.0 * h)
    return best_w, best_q


def menu_grid_oracle(
    vals: Sequence[tuple[float, float, float]],
    cap: float = 1.0,
    resolution: float = 1e-3,
) -> float:
    """Exhaustive menu grid for the bounded-payment sale problem.

    Scans posted prices and two-atom menus (low atom, high atom, with the
    low allocation implied by payment-moment saturation) at the given
    resolution, assigning buyers by self-selection with seller-preferred
    tie-breaking, which enforces incentive compatibility, individual
    rationality, and the payment cap directly.
    """
    if resolution <= 0:
        raise ValueError("resolution must be > 0")
    if not vals:
        return 0.0
    nu = np.array([v[0] for v in vals])
    sw = np.array([v[1] for v in vals])
    pw = np.array([v[2] for v in vals])

    eps = 1e-12 * max(1.0, float(np.max(nu)), cap)

    def best_over_bundles(r0: np.ndarray, p0: np.ndarray, r1: np.ndarray, p1: np.ndarray) -> float:
        # Per-type pick of the utility-best bundle along the candidate
        # axis, ties resolved toward the larger objective contribution.
        total = np.zeros_like(r0)
        for i in range(nu.size):
            u_lo = r0 * nu[i] - p0
            u_hi = r1 * nu[i] - p1
            u_best = np.maximum(0.0, np.maximum(u_lo, u_hi))
            contrib = np.where(u_best <= eps, 0.0, -np.inf)
            contrib = np.maximum(
                contrib, np.where(u_lo >= u_best - eps, sw[i] * u_lo + pw[i] * p0, -np.inf)
            )
            contrib = np.maximum(
                contrib, np.where(u_hi >= u_best - eps, sw[i] * u_hi + pw[i] * p1, -np.inf)
            )
            total += contrib
        return float(total.max()) if total.size else 0.0

    best = 0.0  # the empty menu

    prices = np.arange(0.0, cap + resolution / 2, resolution)
    zeros = np.zeros_like(prices)
    best = max(best, best_over_bundles(zeros, zeros, np.ones_like(prices), prices))

    nu_top = float(nu.max())
    lo_grid = np.arange(0.0, cap + resolution / 2, resolution)
    hi_top = max(cap, nu_top) + resolution
    hi_grid = np.arange(cap, hi_top + resolution / 2, resolution)
    # Evaluate the pair grid in blocks to bound peak memory.
    chunk = max(1, 400_000 // max(1, hi_grid.size))
    for start in range(0, lo_grid.size, chunk):
        L, H = np.meshgrid(lo_grid[start : start + chunk], hi_grid, indexing="ij")
        mask = H > L
        Lf, Hf = L[mask], H[mask]
        if not Lf.size:
            continue
        r0 = (Hf - cap) / (Hf - Lf)
        ok = (r0 >= 0.0) & (r0 <= 1.0)
        Lf, r0 = Lf[ok], r0[ok]
        if not Lf.size:
            continue
        p0 = r0 * Lf
        best = max(
            best,
            best_over_bundles(r0, p0, np.ones_like(r0), np.full_like(r0, cap)),
        )
    return best
