#!/usr/bin/env python3
"""
Monte-Carlo sweeps over the per-link power cap or the access point's static
power, comparing the energy-efficient scheduler against four reference schemes.

Each (axis value, trial) pair draws the scenario for seed ``base_seed + trial``
and evaluates every requested scheme on it. The Tx-side and Rx-side baselines
solve a restricted objective and are then re-evaluated under the full power
model.
"""
import dataclasses
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from channel_scenario import ScenarioConfig, generate
from ee_scheduler import schedule
from ee_solver import SolveScope, SolverConfig, solve_active_set_ee
from optimality_oracles import MAX_ORACLE_LINKS, global_oracle
from power_rate_model import (AccessPoint, DomainError, PowerAllocation, SystemParams, UserTerminal,
                              active_link_count, full_power_allocation, system_ee, system_rate)

log = logging.getLogger(__name__)

AXIS_PMAX = 'p_max_dbm'
AXIS_PSTA0 = 'p_sta_0_mw'
AXES = {AXIS_PMAX: 'p_max', AXIS_PSTA0: 'p_sta_0'}

EE_OPTIMAL = 'ee-optimal'
DINKELBACH_GLOBAL = 'dinkelbach-global'
EE_TRANSMITTER = 'ee-transmitter'
EE_RECEIVER = 'ee-receiver'
THROUGHPUT_OPTIMAL = 'throughput-optimal'
SCHEMES = (EE_OPTIMAL, DINKELBACH_GLOBAL, EE_TRANSMITTER, EE_RECEIVER, THROUGHPUT_OPTIMAL)

DEFAULT_PMAX_GRID = tuple(float(v) for v in range(0, 50, 5))
DEFAULT_PSTA0_GRID = (0.0, 10.0, 100.0, 1000.0, 5000.0, 1e5, 1e6, 1e7, 1e8)


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: Tuple[float, ...]
    trials: int
    schemes: Tuple[str, ...] = SCHEMES

    def __post_init__(self):
        object.__setattr__(self, 'values', tuple(float(v) for v in self.values))
        object.__setattr__(self, 'schemes', tuple(self.schemes))
        if self.axis not in AXES:
            raise DomainError(f"unknown sweep axis {self.axis!r}, expected one of {sorted(AXES)}")
        if not self.values:
            raise DomainError("a sweep needs at least one axis value")
        if list(self.values) != sorted(self.values):
            raise DomainError(f"axis values must be sorted ascending, got {list(self.values)}")
        if self.trials < 1:
            raise DomainError(f"trials must be >= 1, got {self.trials}")
        unknown = [s for s in self.schemes if s not in SCHEMES]
        if unknown or not self.schemes:
            raise DomainError(f"unknown schemes {unknown}, expected a subset of {list(SCHEMES)}")

    @classmethod
    def default(cls, axis: str, trials: int, schemes: Sequence[str] = SCHEMES) -> 'SweepSpec':
        values = DEFAULT_PMAX_GRID if axis == AXIS_PMAX else DEFAULT_PSTA0_GRID
        return cls(axis, values, trials, tuple(schemes))


@dataclass(frozen=True)
class SchemeOutcome:
    ee: float
    rate: float
    users: int
    surrogate: bool = False


@dataclass
class SweepRow:
    axis: str
    axis_value: float
    scheme: str
    mean_ee: float
    mean_rate: float
    mean_scheduled_users: float
    trials: int
    surrogate: bool = False
    per_trial_users: List[int] = field(default_factory=list)


def scheduled_user_count(alloc: PowerAllocation, users: List[UserTerminal]) -> int:
    alloc = alloc.snapped()
    return sum(1 for user in users if active_link_count(alloc, user) > 0)


def _evaluate(alloc: PowerAllocation, users: List[UserTerminal], ap: AccessPoint,
              params: SystemParams, surrogate: bool = False) -> SchemeOutcome:
    return SchemeOutcome(
        ee=system_ee(alloc, users, ap, params),
        rate=system_rate(alloc.snapped(), users, params),
        users=scheduled_user_count(alloc, users),
        surrogate=surrogate,
    )


def run_ee_optimal(users, ap, params, cfg: SolverConfig) -> SchemeOutcome:
    return _evaluate(schedule(users, ap, params, cfg).allocation, users, ap, params)


def run_dinkelbach_global(users, ap, params, cfg: SolverConfig) -> SchemeOutcome:
    total_links = sum(len(user.links) for user in users)
    if total_links <= MAX_ORACLE_LINKS:
        return _evaluate(global_oracle(users, ap, params, cfg).allocation, users, ap, params)
    support = schedule(users, ap, params, cfg).active_links
    solution = solve_active_set_ee(support, users, ap, params, cfg, scope=SolveScope.SYSTEM)
    return _evaluate(solution.powers, users, ap, params, surrogate=True)


def run_ee_transmitter(users, ap, params, cfg: SolverConfig) -> SchemeOutcome:
    """Scheduler blind to receiver power, judged under the full model."""
    tx_only = AccessPoint(p_dyn_rx=0.0, p_sta_rx=0.0)
    return _evaluate(schedule(users, tx_only, params, cfg).allocation, users, ap, params)


def run_ee_receiver(users, ap, params, cfg: SolverConfig) -> SchemeOutcome:
    """Scheduler blind to terminal power; admitted links transmit at p_max."""
    rx_users = [dataclasses.replace(user, p_dyn=0.0, p_sta=0.0) for user in users]
    rx_cfg = dataclasses.replace(cfg, charge_transmit_power=False)
    return _evaluate(schedule(rx_users, ap, params, rx_cfg).allocation, users, ap, params)


def run_throughput_optimal(users, ap, params, cfg: SolverConfig) -> SchemeOutcome:
    return _evaluate(full_power_allocation(users), users, ap, params)


SCHEME_RUNNERS: Dict[str, Callable[..., SchemeOutcome]] = {
    EE_OPTIMAL: run_ee_optimal,
    DINKELBACH_GLOBAL: run_dinkelbach_global,
    EE_TRANSMITTER: run_ee_transmitter,
    EE_RECEIVER: run_ee_receiver,
    THROUGHPUT_OPTIMAL: run_throughput_optimal,
}


def point_config(cfg: ScenarioConfig, axis: str, value: float, trial: int) -> ScenarioConfig:
    return cfg.replace(**{AXES[axis]: value, 'seed': cfg.seed + trial})


def run_trial(spec: SweepSpec, cfg: ScenarioConfig, value: float, trial: int,
              solver_cfg: SolverConfig) -> Dict[str, SchemeOutcome]:
    users, ap, params = generate(point_config(cfg, spec.axis, value, trial))
    return {scheme: SCHEME_RUNNERS[scheme](users, ap, params, solver_cfg) for scheme in spec.schemes}


def run_sweep(spec: SweepSpec, cfg: ScenarioConfig, solver_cfg: Optional[SolverConfig] = None,
              workers: int = 1, progress: bool = True) -> List[SweepRow]:
    """
    Evaluate every scheme at every axis value over ``spec.trials`` seeds.

    Args:
        spec: Axis, grid, trial count and schemes.
        cfg: Base scenario; its seed is the base seed.
        solver_cfg: Solver configuration shared by all schemes.
        workers: Thread count; results do not depend on it.
        progress: Show a tqdm bar over the (value, trial) tasks.

    Returns:
        One SweepRow per (value, scheme), values outer and schemes in spec order.
    """
    solver_cfg = solver_cfg or SolverConfig()
    tasks = [(value, trial) for value in spec.values for trial in range(spec.trials)]
    log.info("sweep over %s: %d values x %d trials, schemes %s",
             spec.axis, len(spec.values), spec.trials, ', '.join(spec.schemes))

    def task(item):
        return run_trial(spec, cfg, item[0], item[1], solver_cfg)

    bar = tqdm(total=len(tasks), desc=f"sweep {spec.axis}", unit="trial", disable=not progress)
    outcomes: List[Dict[str, SchemeOutcome]] = []
    if workers <= 1:
        for item in tasks:
            outcomes.append(task(item))
            bar.update(1)
    else:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            for outcome in executor.map(task, tasks):
                outcomes.append(outcome)
                bar.update(1)
    bar.close()

    rows: List[SweepRow] = []
    for v_index, value in enumerate(spec.values):
        block = outcomes[v_index * spec.trials:(v_index + 1) * spec.trials]
        for scheme in spec.schemes:
            per_trial = [trial_outcome[scheme] for trial_outcome in block]
            surrogate = any(o.surrogate for o in per_trial)
            if surrogate:
                log.warning("%s at %s=%g ran on the scheduler's support instead of the exhaustive oracle",
                            scheme, spec.axis, value)
            rows.append(SweepRow(
                axis=spec.axis,
                axis_value=value,
                scheme=scheme,
                mean_ee=float(np.mean([o.ee for o in per_trial])),
                mean_rate=float(np.mean([o.rate for o in per_trial])),
                mean_scheduled_users=float(np.mean([o.users for o in per_trial])),
                trials=spec.trials,
                surrogate=surrogate,
                per_trial_users=[o.users for o in per_trial],
            ))
    return rows


def rows_for(rows: List[SweepRow], scheme: str) -> List[SweepRow]:
    return [row for row in rows if row.scheme == scheme]
