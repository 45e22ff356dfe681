"""Domain types, payoff evaluation, and feasibility checks.

The economy is a group of weighted agent types sharing a machine that
alternates between working and broken states.  A mechanism assigns each
type a usage level R, a contribution level P, and implies an uptime Q.
Everything here is immutable and side-effect free, so values can be
shared freely across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

DEFAULT_TOL = 1e-9

FAMILY_BALANCE = "balance"
FAMILY_SIMPLEX = "simplex"
FAMILY_PARTICIPATION = "participation"
FAMILY_IC = "ic"
ALL_FAMILIES = frozenset(
    {FAMILY_BALANCE, FAMILY_SIMPLEX, FAMILY_PARTICIPATION, FAMILY_IC}
)


class DegenerateDistributionError(ValueError):
    """Raised when a solver is handed a distribution with no mass."""


@dataclass(frozen=True)
class AgentType:
    """One agent type: usage benefit flow, contribution cost flow, weight.

    Weights are arbitrary nonnegative reals; they need not sum to one.
    """

    id: str
    u: float
    c: float
    mass: float

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("type id must be a nonempty string")
        for name in ("u", "c", "mass"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"type {self.id!r}: {name} must be finite")
        if self.u <= 0:
            raise ValueError(f"type {self.id!r}: u must be > 0")
        if self.c <= 0:
            raise ValueError(f"type {self.id!r}: c must be > 0")
        if self.mass < 0:
            raise ValueError(f"type {self.id!r}: mass must be >= 0")

    @property
    def nu(self) -> float:
        """Valuation: the rate of substitution between access and contributions."""
        return self.u / self.c


@dataclass(frozen=True)
class TypeDistribution:
    """An ordered collection of agent types with distinct ids."""

    types: tuple[AgentType, ...]

    def __post_init__(self) -> None:
        ids = [t.id for t in self.types]
        if len(set(ids)) != len(ids):
            raise ValueError("type ids must be distinct")
        if not self.types or self.total_mass <= 0:
            raise ValueError("distribution needs at least one type with mass > 0")

    @classmethod
    def of(cls, types: Iterable[AgentType]) -> "TypeDistribution":
        return cls(tuple(types))

    @property
    def total_mass(self) -> float:
        return sum(t.mass for t in self.types)

    @property
    def u_bar(self) -> float:
        """Aggregate usage benefit of a working machine."""
        return sum(t.mass * t.u for t in self.types)

    @property
    def c_bar(self) -> float:
        """Aggregate contribution cost of a fully contributing group."""
        return sum(t.mass * t.c for t in self.types)

    @property
    def max_cost(self) -> float:
        return max(t.c for t in self.types)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(t.id for t in self.types)

    def by_id(self, type_id: str) -> AgentType:
        for t in self.types:
            if t.id == type_id:
                return t
        raise KeyError(type_id)


@dataclass(frozen=True)
class PhysicalParams:
    """Breakage rate plus simulator distribution shapes.

    Lifespans always have mean 1/rho and contribution quanta mean 1; only
    the distribution shape is configurable, so the declared means hold by
    construction.
    """

    rho: float
    lifespan: str = "exponential"
    quantum: str = "exponential"

    _KINDS = ("exponential", "deterministic")

    def __post_init__(self) -> None:
        if not (math.isfinite(self.rho) and self.rho > 0):
            raise ValueError("rho must be a positive finite real")
        for name in ("lifespan", "quantum"):
            if getattr(self, name) not in self._KINDS:
                raise ValueError(f"{name} must be one of {self._KINDS}")

    @property
    def lifespan_mean(self) -> float:
        return 1.0 / self.rho

    @property
    def quantum_mean(self) -> float:
        return 1.0


@dataclass(frozen=True)
class Mechanism:
    """Reduced form of a system process: uptime plus per-type levels.

    R maps type id to a usage level in [0, 1] and P maps type id to a
    contribution level in [0, 1].  Feasibility against a distribution is
    checked by :func:`check_feasible`, not at construction.
    """

    Q: float
    R: Mapping[str, float]
    P: Mapping[str, float]

    _BOX_SLACK = 1e-9

    def __post_init__(self) -> None:
        s = self._BOX_SLACK
        if not (-s <= self.Q <= 1.0 + s):
            raise ValueError("Q must lie in [0, 1]")
        for label, levels in (("R", self.R), ("P", self.P)):
            for tid, x in levels.items():
                if not (-s <= x <= 1.0 + s):
                    raise ValueError(f"{label}[{tid!r}] must lie in [0, 1]")
        if set(self.R) != set(self.P):
            raise ValueError("R and P must cover the same type ids")

    @classmethod
    def zero(cls, d: TypeDistribution) -> "Mechanism":
        """The idle mechanism: no uptime, no usage, no contributions."""
        zeros = {t.id: 0.0 for t in d.types}
        return cls(Q=0.0, R=zeros, P=dict(zeros))


def agent_utility(t: AgentType, r: float, p: float) -> float:
    """Flow payoff of a type using the machine a fraction r of the time
    and contributing a fraction p."""
    return r * t.u - p * t.c


def valuation(t: AgentType) -> float:
    return t.nu


def welfare(m: Mechanism, d: TypeDistribution) -> float:
    """Mass-weighted sum of agent utilities under the mechanism."""
    return sum(t.mass * agent_utility(t, m.R[t.id], m.P[t.id]) for t in d.types)


def balance_residual(m: Mechanism, d: TypeDistribution, rho: float) -> float:
    """Breakage rate of the uptime minus the aggregate contribution rate.

    Zero iff the mechanism is balanced: the machine is fixed exactly as
    often as it breaks.
    """
    return rho * m.Q - sum(t.mass * m.P[t.id] for t in d.types)


@dataclass(frozen=True)
class FeasibilityReport:
    """Residuals and pass flags per requested constraint family.

    Violations are reported as nonnegative magnitudes; a family passes iff
    all its violations are at most tol.  Signed diagnostics (balance
    residual, per-type utilities, worst incentive slack) are kept so
    callers can see how close a failing mechanism is.
    """

    tol: float
    families: frozenset[str]
    balance: float | None = None
    simplex: Mapping[str, float] = field(default_factory=dict)
    participation_utility: Mapping[str, float] = field(default_factory=dict)
    ic_worst_slack: float | None = None
    ic_worst_pair: tuple[str, str] | None = None
    passed: Mapping[str, bool] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.passed[f] for f in self.families)


def check_feasible(
    m: Mechanism,
    d: TypeDistribution,
    rho: float,
    families: Iterable[str] = ALL_FAMILIES,
    tol: float = DEFAULT_TOL,
) -> FeasibilityReport:
    """Evaluate the requested constraint families on a mechanism.

    Violations are data, not errors: the report carries residuals for
    every family asked for.  Incentive compatibility is checked over all
    ordered type pairs, including zero-mass types.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    fams = frozenset(families)
    unknown = fams - ALL_FAMILIES
    if unknown:
        raise ValueError(f"unknown constraint families: {sorted(unknown)}")

    passed: dict[str, bool] = {}
    balance: float | None = None
    simplex: dict[str, float] = {}
    utilities: dict[str, float] = {}
    worst_slack: float | None = None
    worst_pair: tuple[str, str] | None = None

    if FAMILY_BALANCE in fams:
        balance = balance_residual(m, d, rho)
        passed[FAMILY_BALANCE] = abs(balance) <= tol

    if FAMILY_SIMPLEX in fams:
        for t in d.types:
            r, p = m.R[t.id], m.P[t.id]
            simplex[t.id] = max(r - m.Q, p - (1.0 - m.Q), -r, -p)
        passed[FAMILY_SIMPLEX] = all(v <= tol for v in simplex.values())

    if FAMILY_PARTICIPATION in fams:
        for t in d.types:
            utilities[t.id] = agent_utility(t, m.R[t.id], m.P[t.id])
        passed[FAMILY_PARTICIPATION] = all(u >= -tol for u in utilities.values())

    if FAMILY_IC in fams:
        worst_slack = math.inf
        for t in d.types:
            own = agent_utility(t, m.R[t.id], m.P[t.id])
            for other in d.types:
                if other.id == t.id:
                    continue
                slack = own - agent_utility(t, m.R[other.id], m.P[other.id])
                if slack < worst_slack:
                    worst_slack = slack
                    worst_pair = (t.id, other.id)
        if not math.isfinite(worst_slack):
            worst_slack = 0.0
            worst_pair = None
        passed[FAMILY_IC] = worst_slack >= -tol

    return FeasibilityReport(
        tol=tol,
        families=fams,
        balance=balance,
        simplex=simplex,
        participation_utility=utilities,
        ic_worst_slack=worst_slack,
        ic_worst_pair=worst_pair,
        passed=passed,
    )
