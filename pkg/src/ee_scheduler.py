#!/usr/bin/env python3
"""
Energy-efficient user scheduling and link adaptation.

Builds on the per-user link activation of ``ee_solver``: every user contributes
one real unit (its optimal active links) and one single-link virtual unit per
link it rejected. Units are merged in descending EE order and admitted into the
system-wide active set while the current system EE does not exceed the unit's
own EE; each admission re-solves the fixed-active-set program with the access
point's static power included.
"""
import logging
from concurrent.futures import Executor
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, List, Optional

from ee_solver import (ActiveLinkSet, AdmissionStep, EeSolution, SolveScope, SolverConfig,
                       UserEeResult, solve_active_set_ee, solve_user_ee)
from power_rate_model import (AccessPoint, DomainError, PowerAllocation, PowerBreakdown,
                              SystemParams, UserTerminal, check_disjoint_links, system_ee,
                              system_rate, total_power)

log = logging.getLogger(__name__)


class ScheduleConsistencyError(RuntimeError):
    """An admission violated a structural guarantee of the scheduling order."""


class UnitKind(Enum):
    REAL = 'real-user'
    VIRTUAL = 'virtual-user'


@dataclass(frozen=True)
class ScheduleUnit:
    kind: UnitKind
    source_user: str
    links: ActiveLinkSet
    ee: float
    static_charge: float

    @property
    def label(self) -> str:
        if self.kind is UnitKind.REAL:
            return f"{self.source_user}"
        link_id = next(iter(self.links))[1]
        return f"{self.source_user}/{link_id}"

    def sort_key(self):
        first_link = next(iter(self.links))[1]
        return (-self.ee, 0 if self.kind is UnitKind.REAL else 1, self.source_user, first_link)


@dataclass
class ScheduleResult:
    active_links: ActiveLinkSet
    scheduled_users: FrozenSet[str]
    allocation: PowerAllocation
    ee: float
    rate: float
    power: PowerBreakdown
    admissions: List[AdmissionStep]
    units: List[ScheduleUnit] = field(default_factory=list)
    user_results: Dict[str, UserEeResult] = field(default_factory=dict)
    # Ratio reached by the solver under the objective it was given.
    objective_ee: float = 0.0
    fixed_set_solves: int = 0
    clipped: tuple = ()
    # False if the final system solve or any user-level solve hit max_iter.
    converged: bool = True

    @property
    def num_scheduled(self) -> int:
        return len(self.scheduled_users)


def build_units(per_user_results: List[UserEeResult]) -> List[ScheduleUnit]:
    """
    Real and virtual scheduling units, sorted by EE descending.

    Ties put real units before virtual ones, then order by user and link id.
    """
    units: List[ScheduleUnit] = []
    for result in per_user_results:
        if len(result.active) == 0:
            continue
        units.append(ScheduleUnit(UnitKind.REAL, result.user_id, result.active, result.ee,
                                  result.static_power))
        for link in result.rejected:
            units.append(ScheduleUnit(UnitKind.VIRTUAL, result.user_id,
                                      ActiveLinkSet.of([(result.user_id, link.link_id)]),
                                      result.link_solutions[link.link_id].ee, 0.0))
    return sorted(units, key=ScheduleUnit.sort_key)


def solve_all_users(users: List[UserTerminal], ap: AccessPoint, params: SystemParams,
                    cfg: SolverConfig, executor: Optional[Executor] = None) -> List[UserEeResult]:
    if executor is None:
        return [solve_user_ee(user, ap, params, cfg) for user in users]
    return list(executor.map(lambda user: solve_user_ee(user, ap, params, cfg), users))


def schedule(users: List[UserTerminal], ap: AccessPoint, params: SystemParams,
             cfg: Optional[SolverConfig] = None,
             executor: Optional[Executor] = None) -> ScheduleResult:
    """
    Jointly schedule users, activate links and allocate power for maximal system EE.

    Args:
        users: Terminals with disjoint link sets.
        ap: Access point circuit powers.
        params: System constants.
        cfg: Solver configuration.
        executor: Optional executor for the independent per-user solves.

    Returns:
        ScheduleResult with the final allocation and the admission log.
    """
    cfg = cfg or SolverConfig()
    check_disjoint_links(users)
    per_user = solve_all_users(users, ap, params, cfg, executor)
    units = build_units(per_user)
    if not units:
        raise DomainError("no user has a link with positive gain and positive weight")

    fixed_set_solves = sum(result.fixed_set_solves for result in per_user)
    active = ActiveLinkSet()
    scheduled: set = set()
    current = EeSolution(ee=0.0, powers=PowerAllocation())
    admissions: List[AdmissionStep] = []

    for unit in units:
        if current.ee > unit.ee:
            log.info("stopping at %s %s: system ee %.6g > unit ee %.6g",
                     unit.kind.value, unit.label, current.ee, unit.ee)
            break
        if unit.kind is UnitKind.VIRTUAL and unit.source_user not in scheduled:
            raise ScheduleConsistencyError(
                f"virtual unit {unit.label} reached before its user {unit.source_user} was scheduled")
        active = active.union(unit.links)
        scheduled.add(unit.source_user)
        solution = solve_active_set_ee(active, users, ap, params, cfg, scope=SolveScope.SYSTEM)
        fixed_set_solves += 1
        admissions.append(AdmissionStep(unit, unit.ee, current.ee, solution.ee))
        log.info("admitted %s %s (unit ee %.6g): system ee %.6g -> %.6g",
                 unit.kind.value, unit.label, unit.ee, current.ee, solution.ee)
        if solution.clipped:
            log.warning("system solve left admitted links at zero power: %s", list(solution.clipped))
        current = solution

    allocation = current.powers
    return ScheduleResult(
        active_links=active,
        scheduled_users=frozenset(scheduled),
        allocation=allocation,
        ee=system_ee(allocation, users, ap, params),
        rate=system_rate(allocation, users, params),
        power=total_power(allocation, users, ap, params),
        admissions=admissions,
        units=units,
        user_results={result.user_id: result for result in per_user},
        objective_ee=current.ee,
        fixed_set_solves=fixed_set_solves,
        clipped=current.clipped,
        converged=current.converged and all(r.solution.converged for r in per_user),
    )
