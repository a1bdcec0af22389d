#!/usr/bin/env python3
"""
Command-line harness for the energy-efficient scheduler.

Subcommands:
    sweep          Monte-Carlo sweep over p_max or the AP static power
    solve          schedule one scenario and print the admission log
    oracle-check   scheduler vs. exhaustive oracle on small random instances
    gen-scenario   dump one scenario's link gains to CSV
"""
import argparse
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd
from dotenv import load_dotenv

from channel_scenario import ScenarioConfig, dump_scenario_csv, generate_scenario, user_summary_frame
from ee_scheduler import ScheduleConsistencyError, ScheduleResult, schedule
from ee_solver import BISECTION, DINKELBACH, SolverConfig
from optimality_oracles import OracleComparison, compare_with_scheduler, random_instance, reference_params
from power_rate_model import link_rate
from scenario_config_loader import ScenarioConfigLoader, env_int
from sweep_report import METRICS, emit, summary_table
from sweep_runner import AXIS_PMAX, AXIS_PSTA0, SCHEMES, SweepSpec, run_sweep

log = logging.getLogger(__name__)

AXIS_FLAGS = {'pmax': AXIS_PMAX, 'psta0': AXIS_PSTA0}
ORACLE_GAP_TOL = 1e-6
EXIT_CONSISTENCY = 2


def load_config(path: Optional[str], seed: Optional[int] = None) -> ScenarioConfig:
    cfg = ScenarioConfigLoader(path).get_config() if path else ScenarioConfig()
    return cfg.replace(seed=seed) if seed is not None else cfg


def parse_schemes(text: Optional[str]) -> List[str]:
    if not text:
        return list(SCHEMES)
    schemes = [s.strip() for s in text.split(',') if s.strip()]
    unknown = [s for s in schemes if s not in SCHEMES]
    if unknown:
        raise ValueError(f"unknown schemes {unknown}; choose from {', '.join(SCHEMES)}")
    return schemes


def cmd_sweep(args) -> int:
    cfg = load_config(args.config, args.seed)
    spec = SweepSpec.default(AXIS_FLAGS[args.axis], args.trials, parse_schemes(args.schemes))

    print(f"\n{'='*80}")
    print(f"SWEEP: {spec.axis} ({len(spec.values)} values x {spec.trials} trials)")
    print(f"{'='*80}")
    print(f"Scenario: {cfg.num_users} users x {cfg.links_per_user} links, base seed {cfg.seed}")

    rows = run_sweep(spec, cfg, SolverConfig(method=args.method), workers=args.workers,
                     progress=not args.quiet)
    paths = emit(rows, args.format, args.out, metric=args.metric)

    print(f"\n📊 RESULTS:")
    print(summary_table(rows))
    if any(row.surrogate for row in rows):
        print("\n⚠️  dinkelbach-global ran on the scheduler's support (instance too large for the oracle)")
    for path in paths:
        print(f"\nResults saved to: {path}")
    return 0


def admission_frame(result: ScheduleResult) -> pd.DataFrame:
    return pd.DataFrame([
        {
            'step': i + 1,
            'kind': step.candidate.kind.value,
            'user': step.candidate.source_user,
            'links': ' '.join(link_id for _, link_id in step.candidate.links),
            'unit_ee': step.candidate_ee,
            'ee_before': step.ee_before,
            'ee_after': step.ee_after,
        }
        for i, step in enumerate(result.admissions)
    ])


def schedule_frame(result: ScheduleResult, scenario) -> pd.DataFrame:
    users = {user.user_id: user for user in scenario.users}
    rows = []
    for (user_id, link_id), power in result.allocation.snapped().items():
        if power <= 0:
            continue
        link = users[user_id].link(link_id)
        rows.append({'user_id': user_id, 'link_id': link_id, 'power_mw': power,
                     'rate_bps': link_rate(power, link, scenario.params)})
    return pd.DataFrame(rows, columns=['user_id', 'link_id', 'power_mw', 'rate_bps'])


def cmd_solve(args) -> int:
    cfg = load_config(args.config, args.seed)
    scenario = generate_scenario(cfg)
    result = schedule(scenario.users, scenario.ap, scenario.params, SolverConfig(method=args.method))

    print(f"\n{'='*80}")
    print(f"SCHEDULE: seed {cfg.seed}, {cfg.num_users} users x {cfg.links_per_user} links")
    print(f"{'='*80}")
    print(f"\n📋 ADMISSION LOG:")
    print(admission_frame(result).to_string(index=False, float_format=lambda v: f"{v:.6g}"))

    print(f"\n⚡ POWER BREAKDOWN (mW):")
    for name, value in result.power.as_dict().items():
        print(f"   {name:<13}: {value:>14.6g}")

    print(f"\n🎯 RESULT:")
    print(f"   Scheduled users: {result.num_scheduled} ({', '.join(sorted(result.scheduled_users))})")
    print(f"   Active links: {len(result.active_links)}")
    print(f"   System rate: {result.rate:.6g} bit/s")
    print(f"   Energy efficiency: {result.ee:.6g} bit/J")
    print(f"   Fixed-set solves: {result.fixed_set_solves}")

    output_path = Path(args.out) / 'schedule.csv'
    try:
        output_path.parent.mkdir(parents=True, exist_ok=True)
        schedule_frame(result, scenario).to_csv(output_path, index=False, float_format='%.12g',
                                                lineterminator='\n')
    except OSError as e:
        raise OSError(f"could not write schedule to {output_path}: {e}") from e
    print(f"\nSchedule saved to: {output_path}")

    if result.clipped or not result.converged:
        print(f"\n❌ Solver consistency failure: clipped links {list(result.clipped)}, "
              f"converged={result.converged}")
        return EXIT_CONSISTENCY
    return 0


def oracle_instance(index: int, base_seed: int):
    """Instance ``index``: 1-3 users with 1-3 links each, log-uniform gains."""
    rng = np.random.default_rng(base_seed + index)
    params, ap = reference_params()
    num_users = int(rng.integers(1, 4))
    links = [int(n) for n in rng.integers(1, 4, size=num_users)]
    return random_instance(rng, num_users, links, params), ap, params


def cmd_oracle_check(args) -> int:
    solver_cfg = SolverConfig(method=args.method)

    def check(index: int) -> OracleComparison:
        users, ap, params = oracle_instance(index, args.seed)
        return compare_with_scheduler(users, ap, params, solver_cfg)

    indices = range(args.instances)
    if args.workers > 1:
        with ThreadPoolExecutor(max_workers=args.workers) as executor:
            comparisons = list(executor.map(check, indices))
    else:
        comparisons = [check(i) for i in indices]

    worst = max(comparisons, key=lambda c: c.relative_gap)
    gap_failures = sum(1 for c in comparisons if c.relative_gap > ORACLE_GAP_TOL)
    violations = sum(c.sandwich_violations for c in comparisons)
    over_budget = sum(1 for c in comparisons if c.fixed_set_solves > c.solve_budget)

    print(f"\n{'='*80}")
    print(f"ORACLE CHECK: {args.instances} instances, base seed {args.seed}")
    print(f"{'='*80}")
    print(f"   Worst relative gap: {worst.relative_gap:.3e}")
    print(f"   Instances over gap tolerance ({ORACLE_GAP_TOL:g}): {gap_failures}")
    print(f"   Sandwich violations: {violations}")
    print(f"   Instances over solve budget: {over_budget}")

    if gap_failures or violations or over_budget:
        print("\n❌ Oracle check FAILED")
        return EXIT_CONSISTENCY
    print("\n✅ Oracle check passed")
    return 0


def cmd_gen_scenario(args) -> int:
    cfg = load_config(args.config, args.seed)
    scenario = generate_scenario(cfg)
    path = dump_scenario_csv(scenario, str(Path(args.out) / f"scenario_seed{cfg.seed}.csv"))
    print(f"\n👥 USERS (seed {cfg.seed}):")
    print(user_summary_frame(scenario).to_string(index=False, float_format=lambda v: f"{v:.4g}"))
    print(f"\nScenario written to: {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    workers = env_int('EE_SCHED_WORKERS', 1)
    out_dir = os.environ.get('EE_SCHED_OUT_DIR', 'results')

    parser = argparse.ArgumentParser(
        description="Energy-efficient joint Tx/Rx scheduling for multi-radio uplinks"
    )
    parser.add_argument("--verbose", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed_default=None):
        p.add_argument("--config", help="Scenario file (KEY=value)")
        p.add_argument("--seed", type=int, default=seed_default, help="Base seed (overrides the file)")
        p.add_argument("--out", default=out_dir, help=f"Output directory (default: {out_dir})")
        p.add_argument("--method", choices=[DINKELBACH, BISECTION], default=DINKELBACH,
                       help="Fixed-set solver")

    p_sweep = sub.add_parser("sweep", help="Monte-Carlo sweep over p_max or P_sta,0")
    common(p_sweep)
    p_sweep.add_argument("--axis", choices=sorted(AXIS_FLAGS), default="pmax")
    p_sweep.add_argument("--trials", type=int, default=50, help="Scenarios per axis value (default: 50)")
    p_sweep.add_argument("--schemes", help=f"Comma-separated subset of {','.join(SCHEMES)}")
    p_sweep.add_argument("--format", choices=["csv", "chart"], default="csv")
    p_sweep.add_argument("--metric", choices=sorted(METRICS),
                         help="Chart metric (default: ee for pmax, users for psta0)")
    p_sweep.add_argument("--workers", type=int, default=workers,
                         help=f"Worker threads (default: EE_SCHED_WORKERS or {workers})")
    p_sweep.add_argument("--quiet", action="store_true", help="No progress bar")
    p_sweep.set_defaults(handler=cmd_sweep)

    p_solve = sub.add_parser("solve", help="Schedule one scenario")
    common(p_solve)
    p_solve.set_defaults(handler=cmd_solve)

    p_oracle = sub.add_parser("oracle-check", help="Compare the scheduler with the exhaustive oracle")
    common(p_oracle, seed_default=0)
    p_oracle.add_argument("--instances", type=int, default=200, help="Random instances (default: 200)")
    p_oracle.add_argument("--workers", type=int, default=workers)
    p_oracle.set_defaults(handler=cmd_oracle_check)

    p_gen = sub.add_parser("gen-scenario", help="Write one scenario's link gains to CSV")
    common(p_gen)
    p_gen.set_defaults(handler=cmd_gen_scenario)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    try:
        args = build_parser().parse_args(argv)
    except ValueError as e:
        print(f"Error: {e}")
        return 1
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    try:
        return args.handler(args)
    except ScheduleConsistencyError as e:
        print(f"Consistency failure: {e}")
        return EXIT_CONSISTENCY
    except Exception as e:
        print(f"Error: {e}")
        import traceback
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    exit(main())
