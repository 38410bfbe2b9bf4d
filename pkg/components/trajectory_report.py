"""
Security report component for simulated frequency trajectories
"""

import pandas as pd

from config.settings import SECURITY_TOL


def security_frame(report, limits):
    """
    One row per frequency limit

    Args:
        report: SecurityReport
        limits: FrequencyLimits

    Returns:
        DataFrame with columns check, value, limit, ok
    """
    nadir_ok = report.nadir_dev is not None and report.nadir_dev <= limits.delta_f_max + SECURITY_TOL
    rows = [
        {"check": "rocof_hz_per_s", "value": report.rocof_at_0, "limit": limits.rocof_max,
         "ok": abs(report.rocof_at_0) <= limits.rocof_max + SECURITY_TOL},
        {"check": "nadir_dev_hz", "value": report.nadir_dev, "limit": limits.delta_f_max, "ok": nadir_ok},
        {"check": "t_nadir_s", "value": report.t_nadir, "limit": None, "ok": report.t_nadir is not None},
        {"check": "qss", "value": None, "limit": None, "ok": report.qss_ok},
    ]
    return pd.DataFrame(rows, columns=["check", "value", "limit", "ok"])


def format_security(report, limits):
    lines = [f"RoCoF at t=0: {report.rocof_at_0:.4f} Hz/s (limit {limits.rocof_max:g})"]
    if report.nadir_dev is None:
        lines.append("Nadir: frequency collapse (total FR below the lost infeed)")
    else:
        lines.append(f"Nadir: {report.nadir_dev:.4f} Hz at t = {report.t_nadir:.3f} s "
                     f"(limit {limits.delta_f_max:g})")
    lines.append(f"Quasi-steady state: {'ok' if report.qss_ok else 'violated'}")
    lines.append(f"Secure: {'yes' if report.all_ok else 'no'}")
    return "\n".join(lines)
