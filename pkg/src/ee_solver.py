#!/usr/bin/env python3
"""
Energy-efficiency solvers at link, user and fixed-active-set level.

Every program solved here has the same single-ratio shape

    max_p  sum_j w_j * B * log2(1 + p_j * g_j / (Gamma sigma^2))
           ---------------------------------------------------------
           sum_j p_j / xi + C

over the box 0 <= p_j <= p_max_j, where C is the fixed circuit charge implied
by the set of links in scope. For a given ratio level the maximising power of
each link has a water-filling closed form, so the outer loop is a Dinkelbach
iteration on the ratio (or, as a cross-check, a bisection on the root of the
parametric objective).

The user-level procedure activates links greedily in descending order of their
individual link EE and stops at the first link whose EE falls below the
current user EE.
"""
import logging
from concurrent.futures import Executor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, FrozenSet, Iterable, Iterator, List, Optional, Tuple

import numpy as np
from scipy import optimize

from power_rate_model import (ACTIVITY_THRESHOLD_MW, LOG2, MW_PER_W, AccessPoint, DomainError,
                              LinkKey, PowerAllocation, RadioLink, SystemParams, UserTerminal)

log = logging.getLogger(__name__)

DINKELBACH = 'dinkelbach'
BISECTION = 'bisection'


class SolveScope(Enum):
    """Which static charges a fixed-active-set solve adds to the per-link ones."""
    USER = 'user'        # user static power of every user present
    SYSTEM = 'system'    # ... plus the access point's static power


@dataclass(frozen=True)
class SolverConfig:
    tol_ratio: float = 1e-9
    max_iter: int = 100
    method: str = DINKELBACH
    # Absolute bisection tolerance as a fraction of the initial upper bound.
    bisection_rel_tol: float = 1e-10
    activity_threshold: float = ACTIVITY_THRESHOLD_MW
    charge_transmit_power: bool = True

    def __post_init__(self):
        if self.tol_ratio <= 0:
            raise DomainError(f"tol_ratio must be positive, got {self.tol_ratio}")
        if self.max_iter < 1:
            raise DomainError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.method not in (DINKELBACH, BISECTION):
            raise DomainError(f"unknown solver method {self.method!r}")


@dataclass(frozen=True)
class ActiveLinkSet:
    """A set of (user_id, link_id) pairs."""
    entries: FrozenSet[LinkKey] = frozenset()

    @classmethod
    def of(cls, keys: Iterable[LinkKey]) -> 'ActiveLinkSet':
        return cls(frozenset(keys))

    def __iter__(self) -> Iterator[LinkKey]:
        return iter(sorted(self.entries))

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, key: object) -> bool:
        return key in self.entries

    def union(self, other: 'ActiveLinkSet') -> 'ActiveLinkSet':
        return ActiveLinkSet(self.entries | other.entries)

    def users(self) -> List[str]:
        return sorted({user_id for user_id, _ in self.entries})

    def by_user(self) -> Dict[str, List[str]]:
        """Partition into per-user link lists."""
        parts: Dict[str, List[str]] = {}
        for user_id, link_id in sorted(self.entries):
            parts.setdefault(user_id, []).append(link_id)
        return parts


@dataclass
class EeSolution:
    """Optimal ratio and the powers attaining it, for one solved scope."""
    ee: float
    powers: PowerAllocation
    iterations: int = 0
    converged: bool = True
    # Entries of the scope whose optimal power fell to (or below) the activity threshold.
    clipped: Tuple[LinkKey, ...] = ()
    # False when ee is a supremum approached as power goes to zero rather than a maximum.
    attained: bool = True


@dataclass(frozen=True)
class AdmissionStep:
    """One accepted step of a greedy admission loop."""
    candidate: Any
    candidate_ee: float
    ee_before: float
    ee_after: float

    def within_sandwich(self, rel_tol: float = 1e-8) -> bool:
        """ee_after lies between ee_before and the candidate EE, up to a relative tolerance."""
        low = min(self.ee_before, self.candidate_ee)
        high = max(self.ee_before, self.candidate_ee)
        slack = rel_tol * max(high, 1.0)
        return low - slack <= self.ee_after <= high + slack


@dataclass
class UserEeResult:
    """Outcome of the per-user link activation procedure."""
    user_id: str
    solution: EeSolution
    active: ActiveLinkSet
    rejected: List[RadioLink]
    link_solutions: Dict[str, EeSolution]
    admissions: List[AdmissionStep] = field(default_factory=list)
    excluded: List[RadioLink] = field(default_factory=list)
    fixed_set_solves: int = 0
    static_power: float = 0.0

    @property
    def ee(self) -> float:
        return self.solution.ee


class FractionalProgram:
    """
    Vectorised single-ratio program over a fixed list of links.

    Powers are in mW; ratios are in bit/joule.
    """

    def __init__(self, keys: List[LinkKey], weights: np.ndarray, gains: np.ndarray,
                 p_max: np.ndarray, circuit_power: float, params: SystemParams,
                 charge_transmit: bool = True):
        if circuit_power <= 0:
            raise DomainError(
                f"fixed circuit power of a link set must be positive, got {circuit_power} mW; "
                "the ratio supremum is not attained without it")
        if np.any(gains <= 0):
            raise DomainError("every link in a fractional program needs a positive gain")
        self.keys = keys
        self.weights = weights
        self.inv_cnr = params.effective_noise / gains
        self.p_max = p_max
        self.circuit_power = circuit_power
        self.bandwidth = params.bandwidth_per_link
        self.xi = params.amplifier_efficiency
        self.charge_transmit = charge_transmit

    def powers(self, level: float) -> np.ndarray:
        """Maximiser of numerator - level * denominator, link by link."""
        if not self.charge_transmit or level <= 0:
            return self.p_max.copy()
        water = MW_PER_W * self.bandwidth * self.xi * self.weights / (level * LOG2)
        return np.clip(water - self.inv_cnr, 0.0, self.p_max)

    def numerator(self, p: np.ndarray) -> float:
        return float(np.sum(self.weights * self.bandwidth * np.log2(1.0 + p / self.inv_cnr)))

    def denominator_w(self, p: np.ndarray) -> float:
        transmit = float(np.sum(p)) / self.xi if self.charge_transmit else 0.0
        return (transmit + self.circuit_power) / MW_PER_W

    def ratio(self, p: np.ndarray) -> float:
        return self.numerator(p) / self.denominator_w(p)

    def parametric_value(self, level: float) -> float:
        """max_p [numerator - level * denominator]; strictly decreasing in level."""
        p = self.powers(level)
        return self.numerator(p) - level * self.denominator_w(p)

    def upper_bound(self) -> float:
        bounds = [self.numerator(self.p_max) / (self.circuit_power / MW_PER_W)]
        if self.charge_transmit:
            bounds.append(float(np.max(MW_PER_W * self.weights * self.bandwidth * self.xi
                                       / (self.inv_cnr * LOG2))))
        return min(bounds)


def _solve_program(program: FractionalProgram, cfg: SolverConfig) -> EeSolution:
    if cfg.method == BISECTION:
        p, iterations, converged = _bisection(program, cfg)
    else:
        p, iterations, converged = _dinkelbach(program, cfg)

    clipped = tuple(key for key, value in zip(program.keys, p) if value <= cfg.activity_threshold)
    p = np.where(p > cfg.activity_threshold, p, 0.0)
    if not converged:
        log.warning("%s did not converge in %d iterations over %d links",
                    cfg.method, iterations, len(program.keys))
    return EeSolution(
        ee=program.ratio(p),
        powers=PowerAllocation({key: float(value) for key, value in zip(program.keys, p)}),
        iterations=iterations,
        converged=converged,
        clipped=clipped,
    )


def _dinkelbach(program: FractionalProgram, cfg: SolverConfig) -> Tuple[np.ndarray, int, bool]:
    p = program.p_max.copy()
    level = program.ratio(p)
    for iteration in range(1, cfg.max_iter + 1):
        p = program.powers(level)
        updated = program.ratio(p)
        log.debug("dinkelbach iteration %d: ee %.12g -> %.12g", iteration, level, updated)
        if abs(updated - level) <= cfg.tol_ratio * max(abs(updated), np.finfo(float).tiny):
            return p, iteration, True
        level = updated
    return p, cfg.max_iter, False


def _bisection(program: FractionalProgram, cfg: SolverConfig) -> Tuple[np.ndarray, int, bool]:
    upper = program.upper_bound()
    if program.parametric_value(upper) > 0:
        # Numerical slack at a tight bound; widen once.
        upper *= 1.0 + 1e-6
    root, info = optimize.bisect(program.parametric_value, 0.0, upper,
                                 xtol=cfg.bisection_rel_tol * upper, rtol=4 * np.finfo(float).eps,
                                 maxiter=max(cfg.max_iter, 200), full_output=True, disp=False)
    return program.powers(root), info.iterations, info.converged


def power_for_ee(ee_guess: float, link: RadioLink, weight: float, params: SystemParams) -> float:
    """
    Closed-form link power (mW) that maximises weighted rate minus ``ee_guess`` times power.

    Args:
        ee_guess: Ratio level in bit/joule, must be positive.
        link: The radio link (its gain must be positive).
        weight: Priority weight of the link's user.
        params: System constants.

    Returns:
        The water-filling level minus the inverse channel-to-noise ratio, clipped to [0, p_max].
    """
    if ee_guess <= 0:
        raise DomainError(f"ee_guess must be positive, got {ee_guess}")
    if link.gain <= 0:
        raise DomainError(f"link {link.link_id} needs a positive gain, got {link.gain}")
    water = MW_PER_W * params.bandwidth_per_link * params.amplifier_efficiency * weight / (ee_guess * LOG2)
    return float(min(max(water - params.effective_noise / link.gain, 0.0), link.p_max))


def link_ee_supremum(link: RadioLink, weight: float, params: SystemParams) -> float:
    """Limit of a link's EE (bit/joule) as its power goes to zero with no circuit power charged."""
    return (MW_PER_W * weight * params.bandwidth_per_link * params.amplifier_efficiency * link.gain
            / (params.effective_noise * LOG2))


def fixed_circuit_power(active: ActiveLinkSet, users: List[UserTerminal], ap: AccessPoint,
                        scope: SolveScope) -> float:
    """Circuit charge (mW) implied by activating exactly ``active``."""
    by_id = {user.user_id: user for user in users}
    parts = active.by_user()
    charge = 0.0
    for user_id, link_ids in parts.items():
        user = by_id[user_id]
        charge += len(link_ids) * (user.p_dyn + ap.p_dyn_rx) + user.p_sta
    if scope is SolveScope.SYSTEM:
        charge += ap.p_sta_rx
    return charge


def _build_program(active: ActiveLinkSet, users: List[UserTerminal], params: SystemParams,
                   circuit_power: float, cfg: SolverConfig) -> FractionalProgram:
    by_id = {user.user_id: user for user in users}
    keys = list(active)
    weights, gains, p_max = [], [], []
    for user_id, link_id in keys:
        if user_id not in by_id:
            raise DomainError(f"active set references unknown user {user_id!r}")
        user = by_id[user_id]
        link = user.link(link_id)
        weights.append(user.weight)
        gains.append(link.gain)
        p_max.append(link.p_max)
    return FractionalProgram(keys, np.array(weights), np.array(gains), np.array(p_max),
                             circuit_power, params, cfg.charge_transmit_power)


def solve_link_ee(link: RadioLink, user: UserTerminal, ap: AccessPoint, params: SystemParams,
                  cfg: Optional[SolverConfig] = None) -> EeSolution:
    """Optimal link EE: the link's own rate over its transmit and per-link circuit power."""
    cfg = cfg or SolverConfig()
    key = (user.user_id, link.link_id)
    if link.gain == 0 or user.weight == 0:
        return EeSolution(ee=0.0, powers=PowerAllocation({key: 0.0}), clipped=(key,))
    circuit_power = user.p_dyn + ap.p_dyn_rx
    if circuit_power <= 0:
        if not cfg.charge_transmit_power:
            raise DomainError(f"link {link.link_id} has neither transmit nor circuit power charged; "
                              "its EE is unbounded")
        ee = link_ee_supremum(link, user.weight, params)
        log.debug("link %s has no circuit power; ee supremum %.9g at vanishing power", link.link_id, ee)
        return EeSolution(ee=ee, powers=PowerAllocation({key: 0.0}), clipped=(key,), attained=False)
    program = FractionalProgram([key], np.array([user.weight]), np.array([link.gain]),
                                np.array([link.p_max]), circuit_power, params,
                                cfg.charge_transmit_power)
    return _solve_program(program, cfg)


def solve_active_set_ee(active: ActiveLinkSet, users: List[UserTerminal], ap: AccessPoint,
                        params: SystemParams, cfg: Optional[SolverConfig] = None,
                        scope: SolveScope = SolveScope.SYSTEM,
                        circuit_power: Optional[float] = None) -> EeSolution:
    """
    Optimal EE with the set of active links held fixed.

    The fixed charge defaults to the one implied by ``active`` at ``scope``;
    pass ``circuit_power`` to override it.
    """
    cfg = cfg or SolverConfig()
    if len(active) == 0:
        raise DomainError("cannot solve an empty active set")
    if circuit_power is None:
        circuit_power = fixed_circuit_power(active, users, ap, scope)
    program = _build_program(active, users, params, circuit_power, cfg)
    return _solve_program(program, cfg)


def _solve_links(user: UserTerminal, links: List[RadioLink], ap: AccessPoint, params: SystemParams,
                 cfg: SolverConfig, executor: Optional[Executor]) -> Dict[str, EeSolution]:
    if executor is None:
        solutions = [solve_link_ee(link, user, ap, params, cfg) for link in links]
    else:
        solutions = list(executor.map(lambda link: solve_link_ee(link, user, ap, params, cfg), links))
    return {link.link_id: solution for link, solution in zip(links, solutions)}


def solve_user_ee(user: UserTerminal, ap: AccessPoint, params: SystemParams,
                  cfg: Optional[SolverConfig] = None,
                  executor: Optional[Executor] = None) -> UserEeResult:
    """
    Optimal user EE via greedy link activation.

    Links are sorted by their own optimal EE (descending, ties by link id) and
    admitted while the current user EE does not exceed the candidate's link EE.
    The first rejected link and every link after it are returned as rejected.
    Zero-gain links, and all links of a zero-weight user, are excluded up front.
    """
    cfg = cfg or SolverConfig()
    if not user.links:
        raise DomainError(f"user {user.user_id} has no links")

    if user.weight == 0:
        usable, excluded = [], list(user.links)
    else:
        usable = [link for link in user.links if link.gain > 0]
        excluded = [link for link in user.links if link.gain == 0]

    link_solutions = _solve_links(user, usable, ap, params, cfg, executor)
    order = sorted(usable, key=lambda link: (-link_solutions[link.link_id].ee, link.link_id))

    current = EeSolution(ee=0.0, powers=PowerAllocation())
    admitted: List[LinkKey] = []
    admissions: List[AdmissionStep] = []
    rejected: List[RadioLink] = []
    for position, link in enumerate(order):
        link_ee = link_solutions[link.link_id].ee
        if current.ee > link_ee:
            rejected = order[position:]
            break
        key = (user.user_id, link.link_id)
        admitted.append(key)
        solution = solve_active_set_ee(ActiveLinkSet.of(admitted), [user], ap, params, cfg,
                                       scope=SolveScope.USER)
        if solution.clipped:
            log.warning("user %s: admitted links left at zero power: %s", user.user_id, list(solution.clipped))
        admissions.append(AdmissionStep(key, link_ee, current.ee, solution.ee))
        log.debug("user %s admits link %s (link ee %.6g): user ee %.6g -> %.6g",
                  user.user_id, link.link_id, link_ee, current.ee, solution.ee)
        current = solution

    return UserEeResult(
        user_id=user.user_id,
        solution=current,
        active=ActiveLinkSet.of(admitted),
        rejected=rejected,
        link_solutions=link_solutions,
        admissions=admissions,
        excluded=excluded,
        fixed_set_solves=len(admissions),
        static_power=user.p_sta,
    )
