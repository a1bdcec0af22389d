#!/usr/bin/env python3
"""
Reproducible single-cell uplink scenarios.

Users are dropped uniformly over an annulus around the access point. Each
radio link gets a linear power gain built from COST-231 Hata path loss, a
fixed penetration loss, per-user lognormal shadowing and per-link Rayleigh
(unit-mean exponential) power fading.

Draw order for a seed, user by user: distance, shadowing, dynamic circuit
power, then one fading sample per link. Adding users only appends draws.
"""
import argparse
import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Tuple

import numpy as np
import pandas as pd

from power_rate_model import (AccessPoint, DomainError, RadioLink, SystemParams, UserTerminal,
                              dbm_to_mw)


@dataclass(frozen=True)
class ScenarioConfig:
    num_users: int = 8
    links_per_user: int = 20
    cell_radius: float = 1000.0            # m
    carrier_freq: float = 2.0              # GHz
    bandwidth: float = 15000.0             # Hz per link
    noise_density: float = -174.0          # dBm/Hz
    p_max: float = 25.0                    # dBm per link
    xi: float = 0.38
    p_sta_0: float = 5000.0                # mW
    p_dyn_0: float = 45.0                  # mW
    p_sta_k: float = 100.0                 # mW
    p_dyn_k_range: Tuple[float, float] = (5.0, 30.0)  # mW
    penetration_loss: float = 20.0         # dB
    shadowing_std: float = 8.0             # dB
    snr_gap: float = 1.0
    seed: int = 0
    d_min: float = 50.0                    # m
    bs_height: float = 30.0                # m
    ut_height: float = 1.5                 # m

    def __post_init__(self):
        if self.num_users < 1 or self.links_per_user < 1:
            raise DomainError("a scenario needs at least one user with one link")
        positive = ('cell_radius', 'carrier_freq', 'bandwidth', 'xi', 'd_min', 'bs_height', 'ut_height')
        for name in positive:
            if getattr(self, name) <= 0:
                raise DomainError(f"{name} must be positive, got {getattr(self, name)}")
        if self.d_min >= self.cell_radius:
            raise DomainError(f"d_min ({self.d_min} m) must be below cell_radius ({self.cell_radius} m)")
        if min(self.p_sta_0, self.p_dyn_0, self.p_sta_k, self.penetration_loss, self.shadowing_std) < 0:
            raise DomainError("circuit powers, penetration loss and shadowing std must be >= 0")
        low, high = self.p_dyn_k_range
        if low < 0 or high < low:
            raise DomainError(f"p_dyn_k_range must satisfy 0 <= low <= high, got {self.p_dyn_k_range}")
        if self.xi > 1 or self.snr_gap < 1:
            raise DomainError("xi must be in (0, 1] and snr_gap >= 1")

    def replace(self, **changes) -> 'ScenarioConfig':
        return dataclasses.replace(self, **changes)

    @property
    def noise_variance(self) -> float:
        """Thermal noise power per link in mW."""
        return dbm_to_mw(self.noise_density) * self.bandwidth

    @property
    def p_max_mw(self) -> float:
        return dbm_to_mw(self.p_max)


class CostHataPathLoss:
    """
    COST-231 extension of the Okumura-Hata urban model, valid 1500-2000 MHz.

    L = 46.3 + 33.9 log10(f) - 13.82 log10(h_BS) - a(h_UT)
        + (44.9 - 6.55 log10(h_BS)) log10(d) + C_m

    with f in MHz, d in km and the medium-city terminal correction a(h_UT).
    """

    def __init__(self, fc_GHz: float = 2.0, h_BS: float = 30.0, h_UT: float = 1.5,
                 metropolitan: bool = False):
        f_mhz = fc_GHz * 1000.0
        log_f = math.log10(f_mhz)
        log_hb = math.log10(h_BS)
        a_hm = (1.1 * log_f - 0.7) * h_UT - (1.56 * log_f - 0.8)
        self.intercept = 46.3 + 33.9 * log_f - 13.82 * log_hb - a_hm + (3.0 if metropolitan else 0.0)
        self.slope = 44.9 - 6.55 * log_hb

    def __call__(self, d_m):
        """Path loss in dB at distance ``d_m`` (metres, scalar or array)."""
        return self.intercept + self.slope * np.log10(np.asarray(d_m, dtype=float) / 1000.0)


@dataclass
class Scenario:
    users: List[UserTerminal]
    ap: AccessPoint
    params: SystemParams
    distances: np.ndarray
    shadowing_db: np.ndarray
    config: ScenarioConfig


def build_system(cfg: ScenarioConfig) -> Tuple[AccessPoint, SystemParams]:
    params = SystemParams(bandwidth_per_link=cfg.bandwidth, noise_variance=cfg.noise_variance,
                          snr_gap=cfg.snr_gap, amplifier_efficiency=cfg.xi)
    return AccessPoint(p_dyn_rx=cfg.p_dyn_0, p_sta_rx=cfg.p_sta_0), params


def generate_scenario(cfg: ScenarioConfig) -> Scenario:
    """Draw one scenario; identical configs give bit-identical scenarios."""
    rng = np.random.default_rng(cfg.seed)
    path_loss = CostHataPathLoss(cfg.carrier_freq, cfg.bs_height, cfg.ut_height)
    p_max = cfg.p_max_mw
    r_min2, r_max2 = cfg.d_min ** 2, cfg.cell_radius ** 2

    users, distances, shadows = [], [], []
    for k in range(cfg.num_users):
        distance = math.sqrt(rng.random() * (r_max2 - r_min2) + r_min2)
        shadow_db = rng.normal(0.0, cfg.shadowing_std)
        p_dyn = rng.uniform(*cfg.p_dyn_k_range)
        fading = rng.exponential(1.0, size=cfg.links_per_user)

        loss_db = float(path_loss(distance)) + cfg.penetration_loss + shadow_db
        gains = 10.0 ** (-loss_db / 10.0) * fading
        links = tuple(RadioLink(f"u{k}-l{i}", float(g), p_max) for i, g in enumerate(gains))
        users.append(UserTerminal(user_id=f"u{k}", links=links, p_dyn=float(p_dyn), p_sta=cfg.p_sta_k))
        distances.append(distance)
        shadows.append(shadow_db)

    ap, params = build_system(cfg)
    return Scenario(users, ap, params, np.array(distances), np.array(shadows), cfg)


def generate(cfg: ScenarioConfig) -> Tuple[List[UserTerminal], AccessPoint, SystemParams]:
    scenario = generate_scenario(cfg)
    return scenario.users, scenario.ap, scenario.params


def scenario_frame(scenario: Scenario) -> pd.DataFrame:
    """One row per link: user_id, link_id, gain, p_dyn_k."""
    rows = [
        {'user_id': user.user_id, 'link_id': link.link_id, 'gain': link.gain, 'p_dyn_k': user.p_dyn}
        for user in scenario.users for link in user.links
    ]
    return pd.DataFrame(rows, columns=['user_id', 'link_id', 'gain', 'p_dyn_k'])


def user_summary_frame(scenario: Scenario) -> pd.DataFrame:
    return pd.DataFrame({
        'user_id': [user.user_id for user in scenario.users],
        'distance_m': scenario.distances,
        'shadowing_db': scenario.shadowing_db,
        'p_dyn_k': [user.p_dyn for user in scenario.users],
        'mean_gain_db': [10.0 * np.log10(np.mean([l.gain for l in user.links])) for user in scenario.users],
    })


def dump_scenario_csv(scenario: Scenario, output_file: str) -> Path:
    output_path = Path(output_file)
    try:
        output_path.parent.mkdir(parents=True, exist_ok=True)
        scenario_frame(scenario).to_csv(output_path, index=False, float_format='%.10e')
    except OSError as e:
        raise OSError(f"could not write scenario dump to {output_path}: {e}") from e
    return output_path


def main():
    """Generate one scenario and print its per-user summary."""
    parser = argparse.ArgumentParser(description="Generate a reproducible multi-radio uplink scenario")
    parser.add_argument("--seed", type=int, default=0, help="Scenario seed (default: 0)")
    parser.add_argument("--users", type=int, default=8, help="Number of users (default: 8)")
    parser.add_argument("--links", type=int, default=20, help="Links per user (default: 20)")
    parser.add_argument("--csv", help="Optional path for the per-link CSV dump")
    args = parser.parse_args()

    try:
        scenario = generate_scenario(ScenarioConfig(num_users=args.users, links_per_user=args.links,
                                                    seed=args.seed))
        print(user_summary_frame(scenario).to_string(index=False))
        if args.csv:
            print(f"Scenario written to: {dump_scenario_csv(scenario, args.csv)}")
    except Exception as e:
        print(f"Error: {e}")
        import traceback
        traceback.print_exc()
        return 1
    return 0


if __name__ == "__main__":
    exit(main())
