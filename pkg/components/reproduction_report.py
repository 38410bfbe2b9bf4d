"""
Reproduction report component

Runs the registered cases and compares computed cells with published values.
"""

import logging

import pandas as pd

from config.reproduction import REPRODUCTION_TABLES
from market import clear_and_price
from model import ScenarioLibrary

logger = logging.getLogger(__name__)


def supported_tables():
    return sorted(REPRODUCTION_TABLES)


def run_case(table_id, library=None, cache=None):
    """
    Clear the scenario registered for a table

    Args:
        table_id: key of REPRODUCTION_TABLES
        library: ScenarioLibrary (bundled scenarios by default)
        cache: optional dict of table id to ClearingResult, filled as cases run

    Returns:
        ClearingResult
    """
    if cache is not None and table_id in cache:
        return cache[table_id]
    case = REPRODUCTION_TABLES[table_id]
    library = library or ScenarioLibrary()
    scenario = library.load(case["scenario"]).with_overrides(
        demand=case.get("demand"), res_available=case.get("res"))
    logger.info("Reproducing table %s: %s", table_id, case["description"])
    result = clear_and_price(scenario, uncapped_loss_payment=case.get("uncapped_loss_payment", False))
    if cache is not None:
        cache[table_id] = result
    return result


def _settlement_line(result, generator):
    for line in result.settlement:
        if line.generator == generator:
            return line
    raise KeyError(generator)


def cell_value(result, quantity, item, reference=None):
    """Computed value of one reproduction cell"""
    v = result.variables
    p = result.prices
    if quantity == "power_mw":
        return v.power[item]
    if quantity == "fr_mw":
        return v.fr.get(item, 0.0)
    if quantity == "online_units":
        return result.commitment[item]
    if quantity == "energy_price":
        return p.energy_price
    if quantity == "inertia_price":
        return p.inertia_price
    if quantity == "fr_price":
        return p.fr_prices[item]
    if quantity == "reduced_loss_price":
        return p.reduced_loss_value
    if quantity == "curtailment_mw":
        return v.curtailment
    if quantity in ("profit", "loss_payment"):
        return getattr(_settlement_line(result, item), quantity)
    if quantity == "profit_ratio":
        if reference is None:
            raise ValueError("profit_ratio needs a reference result")
        return _settlement_line(result, item).profit / _settlement_line(reference, item).profit
    raise ValueError(f"unknown reproduction quantity '{quantity}'")


def reproduce_table(table_id, library=None, cache=None):
    """
    Compare one table's cells

    Returns:
        DataFrame with columns quantity, item, published, computed, tolerance, passed
    """
    if table_id not in REPRODUCTION_TABLES:
        raise KeyError(table_id)
    case = REPRODUCTION_TABLES[table_id]
    cache = {} if cache is None else cache
    result = run_case(table_id, library, cache)
    reference = None
    if "reference" in case:
        reference = run_case(case["reference"], library, cache)

    rows = []
    for quantity, item, published, tolerance in case["cells"]:
        computed = cell_value(result, quantity, item, reference)
        rows.append({
            "quantity": quantity,
            "item": item,
            "published": published,
            "computed": computed,
            "tolerance": tolerance,
            "passed": abs(computed - published) <= tolerance,
        })
    report = pd.DataFrame(rows, columns=["quantity", "item", "published", "computed", "tolerance", "passed"])
    failed = (~report["passed"]).sum()
    if failed:
        logger.warning("Table %s: %d of %d cells out of tolerance", table_id, failed, len(report))
    return report
