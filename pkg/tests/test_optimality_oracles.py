import numpy as np
import pytest

from ee_scheduler import schedule
from ee_solver import solve_link_ee
from optimality_oracles import (MAX_ORACLE_LINKS, OracleLimitError, compare_with_scheduler,
                                global_oracle, grid_oracle_1d, random_instance)
from power_rate_model import AccessPoint, DomainError


class TestGlobalOracle:
    def test_single_link_equals_scheduler(self, reference):
        params, ap = reference
        users = random_instance(np.random.default_rng(0), 1, [1], params)
        oracle = global_oracle(users, ap, params)
        assert oracle.subsets_examined == 2
        assert oracle.ee == pytest.approx(schedule(users, ap, params).ee, rel=1e-12)

    def test_two_by_two_matches_scheduler(self, reference):
        params, ap = reference
        users = random_instance(np.random.default_rng(42), 2, [2, 2], params)
        assert global_oracle(users, ap, params).ee == pytest.approx(schedule(users, ap, params).ee, rel=1e-6)

    def test_no_usable_link_keeps_empty_allocation(self, make_user, reference_ap, unit_params):
        oracle = global_oracle([make_user("u", [0.0, 0.0])], reference_ap, unit_params)
        assert oracle.ee == 0.0
        assert len(oracle.allocation) == 0
        assert oracle.subsets_rejected == 3

    def test_empty_subset_never_wins_with_positive_gain(self, reference):
        params, ap = reference
        users = random_instance(np.random.default_rng(5), 2, [1, 2], params)
        oracle = global_oracle(users, ap, params)
        assert oracle.ee > 0
        assert len(oracle.active_set) >= 1

    def test_refuses_large_instances(self, reference):
        params, ap = reference
        users = random_instance(np.random.default_rng(1), 3, [6, 6, 5], params)
        assert sum(len(u.links) for u in users) > MAX_ORACLE_LINKS
        with pytest.raises(OracleLimitError):
            global_oracle(users, ap, params)

    def test_random_instances_agree_with_scheduler(self, small_instances):
        for users, ap, params in small_instances:
            comparison = compare_with_scheduler(users, ap, params)
            assert comparison.relative_gap <= 1e-6
            assert comparison.sandwich_violations == 0
            assert comparison.fixed_set_solves <= comparison.solve_budget

    def test_weighted_instances_agree_with_scheduler(self, reference):
        params, ap = reference
        rng = np.random.default_rng(77)
        for _ in range(30):
            users = random_instance(rng, 3, [2, 1, 2], params, random_weights=True)
            assert compare_with_scheduler(users, ap, params).relative_gap <= 1e-6


class TestGridOracle:
    def test_zero_gain(self, make_user, reference_ap, unit_params):
        user = make_user("u", [0.0])
        assert grid_oracle_1d(user.links[0], user, reference_ap, unit_params) == (0.0, 0.0)

    def test_zero_circuit_power_matches_link_solve(self, make_user, unit_params):
        user = make_user("u", [1.0], p_dyn=0.0)
        ap = AccessPoint(0.0, 5000.0)
        ee, power = grid_oracle_1d(user.links[0], user, ap, unit_params)
        assert power == 0.0
        assert ee == pytest.approx(solve_link_ee(user.links[0], user, ap, unit_params).ee, rel=1e-12)

    def test_too_few_steps(self, make_user, reference_ap, unit_params):
        user = make_user("u", [1.0])
        with pytest.raises(DomainError):
            grid_oracle_1d(user.links[0], user, reference_ap, unit_params, steps=10)

    def test_agrees_with_closed_form_solver(self, reference):
        params, ap = reference
        users = random_instance(np.random.default_rng(100), 100, [1] * 100, params)
        for user in users:
            link = user.links[0]
            grid_ee, grid_p = grid_oracle_1d(link, user, ap, params, steps=100000)
            solved = solve_link_ee(link, user, ap, params).ee
            assert grid_ee <= solved * (1 + 1e-9)
            assert grid_ee == pytest.approx(solved, rel=1e-5)
            assert 0.0 < grid_p <= link.p_max

    def test_refinement_is_monotone_in_steps(self, reference):
        params, ap = reference
        users = random_instance(np.random.default_rng(101), 10, [1] * 10, params)
        for user in users:
            link = user.links[0]
            coarse, _ = grid_oracle_1d(link, user, ap, params, steps=1000)
            fine, _ = grid_oracle_1d(link, user, ap, params, steps=2000)
            assert fine >= coarse * (1 - 1e-12)
