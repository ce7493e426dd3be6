"""Acceptance criteria, one test each.

Every test prints its one-line report, and the lines are repeated in the
terminal summary so they show up without ``-s``.
"""
import pytest

from timing_eq import verify

REPORT: list[str] = []

CRITERIA = [
    ("lambert_identities", verify.check_lambert),
    ("border_u_of_k", verify.check_u_of_k),
    ("worked_examples", verify.check_examples),
    ("example_welfare", verify.check_example1_welfare),
    ("region_maps", verify.check_region_maps),
    ("closed_forms_vs_oracle", verify.check_closed_forms),
    ("aggregate_rate_decreasing", verify.check_aggregate_rate),
    ("optimal_price", verify.check_optimal_price),
    ("profit_ordering_and_constants", verify.check_orderings),
    ("zero_welfare_unbounded", verify.check_zero_welfare),
    ("single_period_dominance", verify.check_single_period),
    ("monte_carlo_certification", verify.check_certification),
]


@pytest.mark.parametrize("check", [fn for _, fn in CRITERIA], ids=[name for name, _ in CRITERIA])
def test_criterion(check):
    res = check()
    line = res.line()
    REPORT.append(line)
    print(line)
    assert res.passed, line


def test_criteria_numbered_in_order():
    assert [fn for _, fn in CRITERIA] == list(verify.ALL_CHECKS)
