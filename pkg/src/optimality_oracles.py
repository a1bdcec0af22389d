#!/usr/bin/env python3
"""
Brute-force ground truth for the energy-efficient scheduler.

``global_oracle`` enumerates every subset of links, charges the circuit power
that subset implies, solves the fixed-set ratio program and keeps the best
subset whose solved powers are all strictly positive. ``grid_oracle_1d`` scans
a single link's EE over a dense power grid and refines the best cell with a
golden-section search. Both exist to certify the fast solvers on small
instances.
"""
import logging
from concurrent.futures import Executor
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy import optimize

from ee_scheduler import schedule
from ee_solver import ActiveLinkSet, SolveScope, SolverConfig, link_ee_supremum, solve_active_set_ee
from power_rate_model import (MW_PER_W, AccessPoint, DomainError, PowerAllocation, RadioLink,
                              SystemParams, UserTerminal, dbm_to_mw, system_ee)

log = logging.getLogger(__name__)

MAX_ORACLE_LINKS = 16


class OracleLimitError(ValueError):
    """The instance is too large for exhaustive enumeration."""


@dataclass
class OracleResult:
    ee: float
    allocation: PowerAllocation
    active_set: ActiveLinkSet
    subsets_examined: int
    subsets_rejected: int = 0


@dataclass
class OracleComparison:
    """Scheduler versus exhaustive oracle on one instance."""
    schedule_ee: float
    oracle_ee: float
    sandwich_violations: int
    fixed_set_solves: int
    solve_budget: int

    @property
    def relative_gap(self) -> float:
        return abs(self.schedule_ee - self.oracle_ee) / max(abs(self.oracle_ee), 1e-300)


def _solve_subset(mask: int, pairs, usable, users, ap, params, cfg) -> Optional[Tuple[float, PowerAllocation]]:
    chosen = [pairs[j] for j in range(len(pairs)) if mask >> j & 1]
    if not all(usable[j] for j in range(len(pairs)) if mask >> j & 1):
        return None
    solution = solve_active_set_ee(ActiveLinkSet.of(chosen), users, ap, params, cfg,
                                   scope=SolveScope.SYSTEM)
    if solution.clipped:
        return None
    return solution.ee, solution.powers


def global_oracle(users: List[UserTerminal], ap: AccessPoint, params: SystemParams,
                  cfg: Optional[SolverConfig] = None,
                  executor: Optional[Executor] = None) -> OracleResult:
    """
    Exact system EE optimum by enumerating all link subsets.

    Subsets are encoded as bit masks over the (user, link) pairs in user order;
    ties keep the smallest mask. Subsets containing a zero-gain link or a link
    of a zero-weight user can only add charge without rate and are rejected
    without a solve.
    """
    cfg = cfg or SolverConfig()
    pairs = [(user.user_id, link.link_id) for user in users for link in user.links]
    if len(pairs) > MAX_ORACLE_LINKS:
        raise OracleLimitError(
            f"global oracle limited to {MAX_ORACLE_LINKS} links, instance has {len(pairs)}")
    usable = [link.gain > 0 and user.weight > 0 for user in users for link in user.links]

    masks = range(1, 2 ** len(pairs))
    if executor is None:
        outcomes = [_solve_subset(mask, pairs, usable, users, ap, params, cfg) for mask in masks]
    else:
        outcomes = list(executor.map(
            lambda mask: _solve_subset(mask, pairs, usable, users, ap, params, cfg), masks))

    best_ee = system_ee(PowerAllocation(), users, ap, params)
    best_alloc = PowerAllocation()
    rejected = 0
    for outcome in outcomes:
        if outcome is None:
            rejected += 1
            continue
        ee, alloc = outcome
        if ee > best_ee:
            best_ee, best_alloc = ee, alloc

    log.debug("global oracle: %d subsets, %d rejected, best ee %.9g", len(masks) + 1, rejected, best_ee)
    return OracleResult(
        ee=best_ee,
        allocation=best_alloc,
        active_set=ActiveLinkSet.of(best_alloc.active_keys()),
        subsets_examined=len(masks) + 1,
        subsets_rejected=rejected,
    )


def link_ee_curve(p: np.ndarray, link: RadioLink, user: UserTerminal, ap: AccessPoint,
                  params: SystemParams) -> np.ndarray:
    """Link EE (bit/joule) at each transmit power in ``p`` (mW)."""
    rate = user.weight * params.bandwidth_per_link * np.log2(1.0 + p * link.gain / params.effective_noise)
    power_w = (p / params.amplifier_efficiency + user.p_dyn + ap.p_dyn_rx) / MW_PER_W
    return rate / power_w


def grid_oracle_1d(link: RadioLink, user: UserTerminal, ap: AccessPoint, params: SystemParams,
                   steps: int = 10000) -> Tuple[float, float]:
    """
    Maximise one link's EE over a uniform power grid, then refine the best cell.

    Returns:
        (ee in bit/joule, power in mW)
    """
    if steps < 1000:
        raise DomainError(f"grid oracle needs at least 1000 steps, got {steps}")
    if link.gain == 0 or user.weight == 0:
        return 0.0, 0.0
    if user.p_dyn + ap.p_dyn_rx <= 0:
        # EE decreases in power without a circuit charge; report its limit at zero.
        return link_ee_supremum(link, user.weight, params), 0.0

    grid = np.linspace(0.0, link.p_max, steps + 1)
    values = link_ee_curve(grid, link, user, ap, params)
    best = int(np.argmax(values))
    best_p, best_ee = float(grid[best]), float(values[best])

    def negative_ee(p: float) -> float:
        return -float(link_ee_curve(np.array([p]), link, user, ap, params)[0])

    lo, hi = grid[max(best - 1, 0)], grid[min(best + 1, steps)]
    if 0 < best < steps and values[best] > values[best - 1] and values[best] > values[best + 1]:
        refined = optimize.minimize_scalar(negative_ee, bracket=(lo, best_p, hi), method='golden')
    else:
        refined = optimize.minimize_scalar(negative_ee, bounds=(lo, hi), method='bounded',
                                           options={'xatol': 1e-12 * link.p_max})
    if lo <= refined.x <= hi and -refined.fun > best_ee:
        best_p, best_ee = float(refined.x), float(-refined.fun)
    return best_ee, best_p


def reference_params() -> Tuple[SystemParams, AccessPoint]:
    """System constants and access point of the reference parameter table."""
    bandwidth = 15000.0
    params = SystemParams(bandwidth_per_link=bandwidth,
                          noise_variance=dbm_to_mw(-174.0) * bandwidth,
                          snr_gap=1.0, amplifier_efficiency=0.38)
    return params, AccessPoint(p_dyn_rx=45.0, p_sta_rx=5000.0)


def random_instance(rng: np.random.Generator, num_users: int, links_per_user: List[int],
                    params: SystemParams, p_max: float = dbm_to_mw(25.0),
                    cnr_range: Tuple[float, float] = (1e-4, 1e2),
                    random_weights: bool = False) -> List[UserTerminal]:
    """
    Small random instance with log-uniform channel-to-noise ratios.

    ``cnr_range`` is g / (Gamma sigma^2) in 1/mW; the default spans six decades
    so that both interior and clipped optimal powers occur at a 25 dBm cap.
    """
    users = []
    log_lo, log_hi = np.log10(cnr_range[0]), np.log10(cnr_range[1])
    for k in range(num_users):
        cnr = 10.0 ** rng.uniform(log_lo, log_hi, size=links_per_user[k])
        links = tuple(RadioLink(f"l{k}_{i}", float(c * params.effective_noise), p_max)
                      for i, c in enumerate(cnr))
        users.append(UserTerminal(
            user_id=f"u{k}",
            links=links,
            p_dyn=float(rng.uniform(5.0, 30.0)),
            p_sta=100.0,
            weight=float(rng.uniform(0.5, 2.0)) if random_weights else 1.0,
        ))
    return users


def compare_with_scheduler(users: List[UserTerminal], ap: AccessPoint, params: SystemParams,
                           cfg: Optional[SolverConfig] = None,
                           sandwich_tol: float = 1e-8) -> OracleComparison:
    """Run the scheduler and the exhaustive oracle on the same instance."""
    cfg = cfg or SolverConfig()
    result = schedule(users, ap, params, cfg)
    oracle = global_oracle(users, ap, params, cfg)
    steps = list(result.admissions)
    for user_result in result.user_results.values():
        steps.extend(user_result.admissions)
    violations = sum(1 for step in steps if not step.within_sandwich(sandwich_tol))
    total_links = sum(len(user.links) for user in users)
    return OracleComparison(
        schedule_ee=result.ee,
        oracle_ee=oracle.ee,
        sandwich_violations=violations,
        fixed_set_solves=result.fixed_set_solves,
        solve_budget=total_links + len(result.units),
    )
