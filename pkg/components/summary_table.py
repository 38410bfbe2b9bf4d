"""
Summary table component for clearing results
"""

import logging
from pathlib import Path

import pandas as pd

from config.settings import CSV_FLOAT_FORMAT, PRICE_DECIMALS
from market import dispatch_frame, price_frame, results_frame, settlement_frame

logger = logging.getLogger(__name__)

PRICE_LABELS = {
    "energy_price": "Energy price (GBP/MWh)",
    "inertia_price": "Inertia price (GBP/MWs)",
    "reduced_loss_price": "Reduced-loss price (GBP/MW)",
}


def write_frame(frame, filepath):
    """Write a DataFrame as CSV with fixed formatting so reruns are byte-identical"""
    filepath = Path(filepath)
    frame.to_csv(filepath, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    logger.info("Wrote %s", filepath)
    return filepath


def build_summary_table(result):
    """
    Per-generator summary with one row per reported quantity

    Args:
        result: ClearingResult

    Returns:
        DataFrame indexed by row label with one column per generator type
    """
    dispatch = dispatch_frame(result).set_index("generator")
    settlement = settlement_frame(result).set_index("generator")
    rows = {
        "Online units": dispatch["online_units"],
        "Power produced (MW)": dispatch["power_mw"],
        "FR provided (MW)": dispatch["fr_mw"],
        "Operating cost (GBP)": settlement["operating_cost"],
        "Revenue from energy (GBP)": settlement["energy_revenue"],
        "Revenue from FR (GBP)": settlement["fr_revenue"],
        "Revenue from inertia (GBP)": settlement["inertia_revenue"],
        "Revenue from reduced loss (GBP)": settlement["loss_payment"],
        "Total revenue (GBP)": settlement["total_revenue"],
        "Profit (GBP)": settlement["profit"],
        "Make-whole payment (GBP)": settlement["make_whole"],
    }
    table = pd.DataFrame(rows).T
    table.columns.name = None
    return table


def format_summary(result, decimals=PRICE_DECIMALS):
    """Text summary: the per-generator table followed by prices and system lines"""
    table = build_summary_table(result).round(decimals)
    lines = [f"Scenario: {result.scenario.name or '(unnamed)'} [{result.scenario.mode.value}]",
             table.to_string(), ""]
    for _, row in price_frame(result, decimals=decimals).iterrows():
        label = PRICE_LABELS.get(row["quantity"], f"{row['item']} price (GBP/MW)")
        lines.append(f"{label}: {row['value']:.{decimals}f}")
    v = result.variables
    lines.append(f"RES accommodated (MW): {result.scenario.res_available - v.curtailment:.1f} "
                 f"({v.curtailment:.1f} curtailed)")
    lines.append(f"Inertia (MWs): {v.inertia:.1f}   Largest loss (MW): {v.loss:.2f}")
    lines.append(f"Enforced nadir segment: {result.enforced.interval_id} "
                 f"(t in ({result.enforced.start:g}, {result.enforced.end:g}] s)")
    return "\n".join(lines)


def write_results(result, out_dir, node_log=None):
    """
    Write the CSV exports of one clearing run

    Args:
        result: ClearingResult
        out_dir: output directory (created if missing)
        node_log: optional branch-and-bound node log DataFrame

    Returns:
        dict of export name to path
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "dispatch": write_frame(dispatch_frame(result), out_dir / "dispatch.csv"),
        "prices": write_frame(price_frame(result), out_dir / "prices.csv"),
        "settlement": write_frame(settlement_frame(result), out_dir / "settlement.csv"),
        "results": write_frame(results_frame(result), out_dir / "results.csv"),
    }
    if node_log is not None:
        paths["nodes"] = write_frame(node_log, out_dir / "nodes.csv")
    return paths
