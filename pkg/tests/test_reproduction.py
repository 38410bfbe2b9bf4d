import pytest

from branch import enumerate_oracle, solve_misocp
from components.reproduction_report import cell_value, reproduce_table, run_case, supported_tables
from config.reproduction import REPRODUCTION_TABLES
from market import assemble_uc

ED_TABLES = [t for t in supported_tables() if "res" not in REPRODUCTION_TABLES[t]]
UC_TABLES = [t for t in supported_tables() if "res" in REPRODUCTION_TABLES[t]]


@pytest.fixture(scope="module")
def cache():
    return {}


def _assert_all_cells_pass(report):
    failed = report[~report["passed"]]
    assert failed.empty, failed.to_string(index=False)


@pytest.mark.parametrize("table_id", ED_TABLES)
def test_economic_dispatch_tables(table_id, cache):
    report = reproduce_table(table_id, cache=cache)
    assert len(report) == len(REPRODUCTION_TABLES[table_id]["cells"])
    _assert_all_cells_pass(report)


@pytest.mark.slow
@pytest.mark.parametrize("table_id", UC_TABLES)
def test_unit_commitment_tables(table_id, cache):
    _assert_all_cells_pass(reproduce_table(table_id, cache=cache))


@pytest.mark.slow
def test_high_res_commitment_matches_enumeration(library):
    scenario = library.load("uc_thermal_fleet.json").with_overrides(res_available=18000.0)
    assembled = assemble_uc(scenario)
    searched = solve_misocp(assembled.program, assembled.disjuncts)
    enumerated = enumerate_oracle(assembled.program, assembled.disjuncts)
    assert searched.objective == pytest.approx(enumerated.objective, rel=1e-6)
    assert searched.assignment == enumerated.assignment


def test_case_results_are_cached(cache):
    first = run_case(4, cache=cache)
    assert run_case(4, cache=cache) is first


def test_cell_lookups(cache):
    result = run_case(4, cache=cache)
    assert cell_value(result, "energy_price", "") == pytest.approx(18.0, abs=1e-4)
    assert cell_value(result, "fr_mw", "nuclear") == 0.0
    assert cell_value(result, "online_units", "type1") == 5.0
    with pytest.raises(ValueError, match="unknown reproduction quantity"):
        cell_value(result, "heat_rate", "type1")
    with pytest.raises(ValueError, match="reference"):
        cell_value(result, "profit_ratio", "type2")
    with pytest.raises(KeyError):
        cell_value(result, "profit", "wind")


def test_unknown_table():
    with pytest.raises(KeyError):
        reproduce_table(5)
