import json
import logging
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conic import SolveStatus, kkt_report, solve
from constraints import FrequencyVariables, nadir_constraints
from errors import AssemblyError, InfeasibleClearingError
from market import (
    ClearingProblem,
    DualBundle,
    assemble_ed,
    assemble_uc,
    clear_and_price,
    closed_form_prices,
    compose_prices,
    dispatch_frame,
    finished_service_price,
    generic_prices,
    loss_payment,
    price_frame,
    ramping_service_price,
    results_frame,
    settle,
    settlement_frame,
)
from model import FrequencyLimits, FrServiceSpec, parse_scenario

LIMITS = FrequencyLimits(f0=50.0, rocof_max=1.0, delta_f_max=0.8)
DELAYED = (FrServiceSpec("FR1", 7.0, 0.4), FrServiceSpec("FR2", 10.0))


@pytest.fixture(scope="module")
def low_demand(ed_single):
    return clear_and_price(ed_single)


@pytest.fixture(scope="module")
def high_demand(ed_single):
    return clear_and_price(ed_single.with_overrides(demand=400))


def _profits(result):
    return {line.generator: line.profit for line in result.settlement}


def test_low_demand_dispatch(low_demand):
    v = low_demand.variables
    assert v.power == pytest.approx({"nuclear": 100.0, "type1": 150.0, "type2": 0.0}, abs=1e-4)
    assert v.fr == pytest.approx({"type1": 197.0, "type2": 175.0}, abs=0.05)
    assert v.inertia == pytest.approx(4200.0)
    assert v.loss == pytest.approx(100.0)
    assert low_demand.prices.energy_price == pytest.approx(17.0, abs=1e-4)
    assert low_demand.prices.fr_prices["PFR"] == pytest.approx(0.0, abs=1e-4)


def test_high_demand_prices_and_profits(high_demand):
    p = high_demand.prices
    assert p.energy_price == pytest.approx(18.0, abs=1e-4)
    assert p.fr_prices["PFR"] == pytest.approx(1.0, abs=1e-4)
    assert high_demand.variables.power == pytest.approx({"nuclear": 100.0, "type1": 203.0, "type2": 97.0},
                                                        abs=0.05)
    assert _profits(high_demand) == pytest.approx({"nuclear": 300.0, "type1": 400.0, "type2": 175.0}, abs=0.1)


def test_clearing_is_frequency_secure(low_demand, high_demand):
    for result in (low_demand, high_demand):
        assert result.security.all_ok
        assert result.security.nadir_dev <= 0.8 + 1e-6
        assert result.duals.is_dual_feasible(tol=1e-6)


def test_pricing_solve_satisfies_kkt(high_demand):
    program, _ = ClearingProblem(high_demand.scenario).step_two(high_demand.choice)
    report = kkt_report(program, high_demand.pricing)
    assert report.stationarity <= 1e-6
    assert report.primal_residual <= 1e-6


def test_price_computations_agree(high_demand):
    sc = high_demand.scenario
    generic = generic_prices(high_demand.duals, high_demand.enforced, sc.services, sc.limits)
    closed = closed_form_prices(high_demand.duals, high_demand.enforced, sc.services, sc.limits)
    assert generic.inertia_price == pytest.approx(closed.inertia_price, abs=1e-9)
    assert generic.loss_price == pytest.approx(closed.loss_price, abs=1e-9)
    assert generic.fr_prices == pytest.approx(closed.fr_prices, abs=1e-9)


def test_ed_pays_no_inertia_or_loss(high_demand):
    assert all(line.inertia_revenue == 0.0 for line in high_demand.settlement)
    assert all(line.loss_payment == 0.0 for line in high_demand.settlement)
    assert high_demand.pricing_commitment == {}


def test_reduced_loss_payment_capped_and_uncapped(library):
    scenario = library.load("ed_reduced_loss_msg95.json")
    capped = clear_and_price(scenario)
    uncapped = clear_and_price(scenario, uncapped_loss_payment=True)

    assert capped.loss_is_decision
    assert capped.variables.power["nuclear"] == pytest.approx(95.0, abs=1e-4)
    assert capped.variables.loss == pytest.approx(95.0, abs=1e-4)
    value = capped.prices.reduced_loss_value
    assert value == pytest.approx(7.07, abs=0.05)

    nuclear = {line.generator: line for line in capped.settlement}["nuclear"]
    assert nuclear.loss_payment == pytest.approx((capped.prices.energy_price - 15.0) * 5.0, abs=1e-3)
    assert nuclear.loss_payment == pytest.approx(20.0, abs=0.01)
    nuclear = {line.generator: line for line in uncapped.settlement}["nuclear"]
    assert nuclear.loss_payment == pytest.approx(value * 5.0, abs=1e-3)


def test_capped_payment_gives_no_gain_from_a_higher_minimum_output(library):
    declared_90 = clear_and_price(library.load("ed_reduced_loss_msg90.json"))
    declared_95 = clear_and_price(library.load("ed_reduced_loss_msg95.json"))
    assert _profits(declared_95)["nuclear"] <= _profits(declared_90)["nuclear"] + 1e-3


def test_stalled_disjunct_relaxation_is_infeasible(library):
    problem = ClearingProblem(library.load("ed_reduced_loss_msg90.json"))
    assert solve(problem.step_one().disjuncts[1].program).status is SolveStatus.INFEASIBLE


def test_settle_reuses_a_result(high_demand):
    lines = settle(high_demand, high_demand.scenario)
    assert [line.generator for line in lines] == ["nuclear", "type1", "type2"]
    assert lines == high_demand.settlement


def test_loss_payment_rates():
    assert loss_payment(7.07, 19.0, 15.0, 5.0) == pytest.approx(20.0)
    assert loss_payment(7.07, 19.0, 15.0, 5.0, capped=False) == pytest.approx(35.35)
    assert loss_payment(3.0, 19.0, 15.0, 5.0) == pytest.approx(15.0)
    assert loss_payment(7.07, 14.0, 15.0, 5.0) == 0.0
    assert loss_payment(7.07, 19.0, 15.0, -1.0) == 0.0


def test_assembly_checks_mode_and_demand(ed_single, library):
    assembled = assemble_ed(ed_single)
    assert len(assembled.disjuncts) == 1
    assert assembled.program.integer_marks == frozenset()
    with pytest.raises(AssemblyError, match="UC scenario"):
        assemble_uc(ed_single)
    with pytest.raises(AssemblyError, match="exceeds available capacity"):
        assemble_ed(ed_single.with_overrides(demand=1000))

    uc = library.load("uc_thermal_fleet.json")
    with pytest.raises(AssemblyError, match="ED scenario"):
        assemble_ed(uc)
    assembled = assemble_uc(uc)
    assert len(assembled.program.integer_marks) == 3
    assert len(assembled.disjuncts) == 2
    assert set(assembled.priorities.values()) == {1800.0, 500.0, 150.0}


def test_assembly_logs_frequency_constraints(ed_single, caplog):
    with caplog.at_level(logging.DEBUG, logger="market"):
        assemble_ed(ed_single)
    assert "Frequency constraints:" in caplog.text
    assert "rocof" in caplog.text.lower()


def test_insufficient_frequency_response(scenario_data):
    for gen in scenario_data["fleet"][1:]:
        gen["fr_capacity"] = 40.0
    with pytest.raises(InfeasibleClearingError):
        clear_and_price(parse_scenario(json.dumps(scenario_data)))


def test_result_frames(high_demand):
    dispatch = dispatch_frame(high_demand)
    assert list(dispatch["generator"]) == ["nuclear", "type1", "type2"]
    prices = price_frame(high_demand, decimals=2)
    assert list(prices["quantity"]) == ["energy_price", "inertia_price", "fr_price", "reduced_loss_price"]
    assert prices.loc[prices["item"] == "PFR", "value"].item() == 1.0
    assert settlement_frame(high_demand)["profit"].sum() == pytest.approx(875.0, abs=0.3)
    combined = results_frame(high_demand)
    assert list(combined.columns) == ["section", "item", "quantity", "value"]
    assert set(combined["section"]) == {"dispatch", "system", "prices", "settlement"}


def _duals(mu=0.0, lambda1=0.0, lambda2=0.0, lambda_qss=0.0, lambda_rocof=0.0):
    return DualBundle(energy_dual=18.0, lambda_rocof=lambda_rocof, lambda_qss=lambda_qss,
                      mu=mu, lambda1=lambda1, lambda2=lambda2)


def test_ramping_price_grows_with_cone_dual(limits):
    service = FrServiceSpec("FR1", 7.0, 0.4)
    prices = [ramping_service_price(_duals(mu=mu), service, limits) for mu in (0.0, 1.0, 2.0)]
    assert prices[0] < prices[1] < prices[2]


def test_finished_price_falls_with_delivery_time(limits):
    duals = _duals(mu=1.0, lambda_qss=2.0)
    fast = finished_service_price(duals, FrServiceSpec("FR1", 5.0), limits)
    slow = finished_service_price(duals, FrServiceSpec("FR1", 10.0), limits)
    late = finished_service_price(duals, FrServiceSpec("FR1", 5.0, 0.5), limits)
    assert slow < fast
    assert late < fast
    assert fast == pytest.approx(2.0 - 5.0 / 3.2)


class TestPriceAgreement:

    @settings(max_examples=50, deadline=None)
    @given(mu=st.floats(0.0, 10.0), angle=st.floats(0.0, 2 * math.pi), ratio=st.floats(0.0, 1.0),
           lambda_qss=st.floats(0.0, 5.0), lambda_rocof=st.floats(0.0, 5.0), segment=st.integers(0, 2))
    def test_generic_and_closed_form_match(self, mu, angle, ratio, lambda_qss, lambda_rocof, segment):
        duals = _duals(mu=mu, lambda1=mu * ratio * math.cos(angle), lambda2=mu * ratio * math.sin(angle),
                       lambda_qss=lambda_qss, lambda_rocof=lambda_rocof)
        fv = FrequencyVariables.for_services(DELAYED)
        enforced = nadir_constraints(fv, DELAYED, LIMITS)[segment]
        prices = compose_prices(duals, enforced, DELAYED, LIMITS)
        assert prices.energy_price == 18.0
        assert prices.inertia_price == pytest.approx((duals.mu - duals.lambda1) / 50.0 + 2 * lambda_rocof)
