import itertools
import math

import numpy as np
import pytest

from ee_scheduler import schedule
from ee_solver import (BISECTION, ActiveLinkSet, AdmissionStep, FractionalProgram, SolveScope, SolverConfig,
                       fixed_circuit_power, power_for_ee, solve_active_set_ee, solve_link_ee,
                       solve_user_ee)
from optimality_oracles import random_instance
from power_rate_model import (AccessPoint, DomainError, PowerAllocation, RadioLink, SystemParams,
                              UserTerminal, link_rate, system_ee)


def test_solver_config_rejects_unknown_method():
    with pytest.raises(DomainError):
        SolverConfig(method="newton")


class TestPowerForEe:
    def test_lower_clip(self, unit_params):
        # water level 5700/(ee ln2) is below 1/g = 1e4 mW
        assert power_for_ee(1000.0, RadioLink("l", 1e-4, 1e6), 1.0, unit_params) == 0.0

    def test_upper_clip(self, unit_params):
        assert power_for_ee(1000.0, RadioLink("l", 1.0, 50.0), 1.0, unit_params) == 50.0

    def test_interior_is_stationary(self, unit_params):
        link = RadioLink("l", 1.0, 1e5)
        ee = 1000.0
        p = power_for_ee(ee, link, 1.0, unit_params)
        assert 0.0 < p < link.p_max

        def objective(x):
            return link_rate(x, link, unit_params) - ee * x / unit_params.amplifier_efficiency / 1000.0

        h = 1e-3 * p
        slope = (objective(p + h) - objective(p - h)) / (2 * h)
        scale = ee / unit_params.amplifier_efficiency / 1000.0
        assert abs(slope) / scale < 1e-6

    def test_rejects_nonpositive_guess(self, unit_params):
        with pytest.raises(DomainError):
            power_for_ee(0.0, RadioLink("l", 1.0, 1.0), 1.0, unit_params)


class TestSolveLinkEe:
    def test_zero_gain(self, unit_params, make_user, reference_ap):
        user = make_user("u", [0.0])
        solution = solve_link_ee(user.links[0], user, reference_ap, unit_params)
        assert solution.ee == 0.0
        assert solution.powers.get("u", "u-l0") == 0.0

    def test_zero_circuit_power_gives_supremum(self, unit_params, make_user):
        user = make_user("u", [1.0], p_dyn=0.0)
        solution = solve_link_ee(user.links[0], user, AccessPoint(0.0, 5000.0), unit_params)
        # 1000 * 15000 * 0.38 / ln 2
        assert solution.ee == pytest.approx(5.7e6 / math.log(2), rel=1e-12)
        assert not solution.attained
        assert solution.powers.get("u", "u-l0") == 0.0

        p = 1e-6
        near_zero = link_rate(p, user.links[0], unit_params) / (p / 0.38 / 1000)
        assert near_zero < solution.ee
        assert near_zero == pytest.approx(solution.ee, rel=1e-5)

    def test_zero_circuit_power_without_transmit_charge_rejected(self, unit_params, make_user):
        user = make_user("u", [1.0], p_dyn=0.0)
        with pytest.raises(DomainError):
            solve_link_ee(user.links[0], user, AccessPoint(0.0, 0.0), unit_params,
                          SolverConfig(charge_transmit_power=False))

    def test_zero_set_charge_rejected(self, unit_params, make_user):
        user = make_user("u", [1.0], p_dyn=0.0, p_sta=0.0)
        with pytest.raises(DomainError):
            solve_active_set_ee(ActiveLinkSet.of([("u", "u-l0")]), [user], AccessPoint(0.0, 0.0),
                                unit_params, scope=SolveScope.USER)

    def test_positive_gain_gives_positive_power(self, reference):
        params, ap = reference
        rng = np.random.default_rng(7)
        for user in random_instance(rng, 20, [3] * 20, params, cnr_range=(1e-6, 1e4)):
            for link in user.links:
                solution = solve_link_ee(link, user, ap, params)
                assert solution.ee > 0
                assert solution.powers.get(user.user_id, link.link_id) > 0
                assert solution.converged
                assert solution.attained

    def test_ratio_reproduces_reported_ee(self, reference):
        params, ap = reference
        user = random_instance(np.random.default_rng(3), 1, [1], params)[0]
        link = user.links[0]
        solution = solve_link_ee(link, user, ap, params)
        p = solution.powers.get(user.user_id, link.link_id)
        reported = link_rate(p, link, params) / ((p / params.amplifier_efficiency + user.p_dyn + ap.p_dyn_rx) / 1000)
        assert solution.ee == pytest.approx(reported, rel=1e-9)

    def test_dinkelbach_and_bisection_agree(self, reference):
        params, ap = reference
        rng = np.random.default_rng(11)
        users = random_instance(rng, 100, [10] * 100, params)
        bisection = SolverConfig(method=BISECTION)
        for user in users:
            for link in user.links:
                fast = solve_link_ee(link, user, ap, params).ee
                slow = solve_link_ee(link, user, ap, params, bisection).ee
                assert fast == pytest.approx(slow, rel=1e-7)

    def test_non_convergence_is_flagged_not_raised(self, unit_params, make_user, reference_ap):
        user = make_user("u", [1.0], p_max=1e4)
        solution = solve_link_ee(user.links[0], user, reference_ap, unit_params, SolverConfig(max_iter=1))
        assert not solution.converged
        assert solution.ee > 0


class TestSolveActiveSetEe:
    def test_singleton_matches_link_solve(self, reference):
        params, ap = reference
        user = random_instance(np.random.default_rng(5), 1, [1], params)[0]
        link = user.links[0]
        key = (user.user_id, link.link_id)
        as_set = solve_active_set_ee(ActiveLinkSet.of([key]), [user], ap, params, scope=SolveScope.USER,
                                     circuit_power=user.p_dyn + ap.p_dyn_rx)
        assert as_set.ee == pytest.approx(solve_link_ee(link, user, ap, params).ee, rel=1e-12)

    def test_empty_set_rejected(self, reference):
        params, ap = reference
        with pytest.raises(DomainError):
            solve_active_set_ee(ActiveLinkSet(), [], ap, params)

    def test_two_links_match_grid_search(self, unit_params, make_user, reference_ap):
        user = make_user("u", [0.05, 0.5], p_max=316.2)
        active = ActiveLinkSet.of([("u", "u-l0"), ("u", "u-l1")])
        solution = solve_active_set_ee(active, [user], reference_ap, unit_params, scope=SolveScope.USER)

        grid = np.linspace(0.0, 316.2, 1001)
        p0, p1 = np.meshgrid(grid, grid, indexing="ij")
        rate = 15000.0 * (np.log2(1 + 0.05 * p0) + np.log2(1 + 0.5 * p1))
        power_w = ((p0 + p1) / 0.38 + 2 * (30.0 + 45.0) + 100.0) / 1000.0
        best = float(np.max(rate / power_w))
        assert best <= solution.ee * (1 + 1e-9)
        assert best == pytest.approx(solution.ee, rel=1e-4)

    def test_scaling_gains_and_noise_is_invariant(self, reference):
        params, ap = reference
        users = random_instance(np.random.default_rng(9), 2, [2, 2], params)
        active = ActiveLinkSet.of([(u.user_id, l.link_id) for u in users for l in u.links])
        base = solve_active_set_ee(active, users, ap, params)

        factor = 1e3
        scaled_params = SystemParams(params.bandwidth_per_link, params.noise_variance * factor,
                                     params.snr_gap, params.amplifier_efficiency)
        scaled_users = [UserTerminal(u.user_id, tuple(RadioLink(l.link_id, l.gain * factor, l.p_max)
                                                       for l in u.links), u.p_dyn, u.p_sta)
                        for u in users]
        scaled = solve_active_set_ee(active, scaled_users, ap, scaled_params)
        assert scaled.ee == pytest.approx(base.ee, rel=1e-9)
        for key, p in base.powers.items():
            assert scaled.powers.powers[key] == pytest.approx(p, rel=1e-6, abs=1e-9)

    def test_fixed_circuit_power_by_scope(self, make_user, reference_ap):
        a = make_user("a", [1.0, 1.0], p_dyn=10.0, p_sta=100.0)
        b = make_user("b", [1.0], p_dyn=20.0, p_sta=50.0)
        active = ActiveLinkSet.of([("a", "a-l0"), ("a", "a-l1"), ("b", "b-l0")])
        user_scope = fixed_circuit_power(active, [a, b], reference_ap, SolveScope.USER)
        assert user_scope == 2 * (10 + 45) + 100 + (20 + 45) + 50
        assert fixed_circuit_power(active, [a, b], reference_ap, SolveScope.SYSTEM) == user_scope + 5000


class TestSolveUserEe:
    def test_single_link_user(self, reference):
        params, ap = reference
        user = random_instance(np.random.default_rng(2), 1, [1], params)[0]
        result = solve_user_ee(user, ap, params)
        assert len(result.active) == 1
        assert result.rejected == []
        p = result.solution.powers.get(user.user_id, user.links[0].link_id)
        expected = link_rate(p, user.links[0], params) / (
            (p / params.amplifier_efficiency + user.p_dyn + ap.p_dyn_rx + user.p_sta) / 1000)
        assert result.ee == pytest.approx(expected, rel=1e-9)

    def test_three_links_match_subset_search(self, reference):
        params, ap = reference
        rng = np.random.default_rng(21)
        for _ in range(50):
            user = random_instance(rng, 1, [3], params)[0]
            result = solve_user_ee(user, ap, params)
            keys = [(user.user_id, l.link_id) for l in user.links]
            best = max(
                solve_active_set_ee(ActiveLinkSet.of(subset), [user], ap, params, scope=SolveScope.USER).ee
                for size in range(1, 4) for subset in itertools.combinations(keys, size)
            )
            assert result.ee == pytest.approx(best, rel=1e-6)

    def test_duplicate_gains_stay_in_sandwich(self, make_user, unit_params, reference_ap):
        user = make_user("u", [0.3, 0.3])
        result = solve_user_ee(user, reference_ap, unit_params)
        assert all(step.within_sandwich() for step in result.admissions)

    def test_rejected_links_follow_admitted_ones(self, reference):
        params, ap = reference
        user = random_instance(np.random.default_rng(4), 1, [12], params, cnr_range=(1e-6, 1e4))[0]
        result = solve_user_ee(user, ap, params)
        admitted = {link_id for _, link_id in result.active}
        assert admitted.isdisjoint(link.link_id for link in result.rejected)
        assert len(admitted) + len(result.rejected) == 12
        worst_admitted = min(result.link_solutions[i].ee for i in admitted)
        for link in result.rejected:
            assert result.link_solutions[link.link_id].ee <= worst_admitted
        assert result.fixed_set_solves == len(admitted)

    def test_zero_gain_links_excluded(self, make_user, unit_params, reference_ap):
        user = make_user("u", [0.0, 0.2])
        result = solve_user_ee(user, reference_ap, unit_params)
        assert [l.link_id for l in result.excluded] == ["u-l0"]
        assert ("u", "u-l0") not in result.active

    def test_zero_weight_user_has_no_active_links(self, make_user, unit_params, reference_ap):
        result = solve_user_ee(make_user("u", [0.2, 0.3], weight=0.0), reference_ap, unit_params)
        assert len(result.active) == 0
        assert result.ee == 0.0


def test_admission_step_sandwich():
    assert AdmissionStep("x", 10.0, 0.0, 5.0).within_sandwich()
    assert AdmissionStep("x", 10.0, 12.0, 11.0).within_sandwich()
    assert not AdmissionStep("x", 10.0, 0.0, 10.5).within_sandwich()


def _central_slope(alloc, key, users, ap, params, h):
    up = PowerAllocation(dict(alloc.powers))
    down = PowerAllocation(dict(alloc.powers))
    up.powers[key] += h
    down.powers[key] -= h
    return (system_ee(up, users, ap, params) - system_ee(down, users, ap, params)) / (2 * h)


def test_optimal_powers_are_stationary(small_instances):
    for users, ap, params in small_instances:
        result = schedule(users, ap, params)
        p_max = {(u.user_id, l.link_id): l.p_max for u in users for l in u.links}
        for key, p in result.allocation.items():
            if p <= 0:
                continue
            if p < p_max[key] * (1 - 1e-6):
                h = 1e-4 * min(p, p_max[key] - p)
                slope = _central_slope(result.allocation, key, users, ap, params, h)
                assert abs(slope) * p / result.ee < 1e-6
            else:
                h = 1e-6 * p
                lowered = PowerAllocation(dict(result.allocation.powers))
                lowered.powers[key] -= h
                assert system_ee(lowered, users, ap, params) <= result.ee * (1 + 1e-12)


def test_zero_power_keeps_charges_consistent(unit_params, make_user):
    user = make_user("u", [1.0])
    alloc = PowerAllocation({("u", "u-l0"): 0.0})
    assert system_ee(alloc, [user], AccessPoint(45.0, 0.0), unit_params) == 0.0
    assert not math.isnan(system_ee(alloc, [user], AccessPoint(0.0, 0.0), unit_params))


def _program_for(active, users, ap, params):
    by_id = {user.user_id: user for user in users}
    keys = list(active)
    links = [by_id[user_id].link(link_id) for user_id, link_id in keys]
    return FractionalProgram(keys, np.array([by_id[user_id].weight for user_id, _ in keys]),
                             np.array([link.gain for link in links]),
                             np.array([link.p_max for link in links]),
                             fixed_circuit_power(active, users, ap, SolveScope.SYSTEM), params)


def test_parametric_value_decreases_through_zero(small_instances):
    for users, ap, params in small_instances[:100]:
        active = schedule(users, ap, params).active_links
        solution = solve_active_set_ee(active, users, ap, params)
        program = _program_for(active, users, ap, params)
        levels = solution.ee * np.array([0.25, 0.5, 0.9, 1.0, 1.1, 2.0, 4.0])
        values = [program.parametric_value(level) for level in levels]
        assert all(a > b for a, b in zip(values, values[1:]))
        p = np.array([solution.powers.powers[key] for key in program.keys])
        assert abs(values[3]) <= 1e-6 * program.numerator(p)


def test_ratio_is_unimodal_along_each_coordinate(small_instances):
    for users, ap, params in small_instances[:40]:
        active = schedule(users, ap, params).active_links
        solution = solve_active_set_ee(active, users, ap, params)
        program = _program_for(active, users, ap, params)
        base = np.array([solution.powers.powers[key] for key in program.keys])
        for j in range(len(base)):
            ratios = []
            for x in np.linspace(0.0, program.p_max[j], 201):
                p = base.copy()
                p[j] = x
                ratios.append(program.ratio(p))
            slope = np.diff(ratios)
            slack = 1e-12 * max(ratios)
            peak = int(np.argmax(ratios))
            assert np.all(slope[:peak] >= -slack)
            assert np.all(slope[peak:] <= slack)


def test_adding_a_link_helps_exactly_when_its_ee_beats_the_set(reference):
    params, ap = reference
    rng = np.random.default_rng(31)
    checked = 0
    for _ in range(30):
        user = random_instance(rng, 1, [4], params, cnr_range=(1e-6, 1e4))[0]
        link_ee = {l.link_id: solve_link_ee(l, user, ap, params).ee for l in user.links}
        keys = [(user.user_id, l.link_id) for l in user.links]
        for size in range(1, 4):
            for subset in itertools.combinations(keys, size):
                base = solve_active_set_ee(ActiveLinkSet.of(subset), [user], ap, params,
                                           scope=SolveScope.USER).ee
                for key in set(keys) - set(subset):
                    if abs(link_ee[key[1]] - base) <= 1e-4 * base:
                        continue
                    grown = solve_active_set_ee(ActiveLinkSet.of(subset + (key,)), [user], ap, params,
                                                scope=SolveScope.USER).ee
                    assert (grown > base) == (link_ee[key[1]] > base)
                    checked += 1
    assert checked > 0
