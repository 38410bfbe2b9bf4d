"""
Command-line entry point for the frequency-secured market clearing engine

    python cli.py clear --scenario ed_single_fr.json --demand 400
    python cli.py simulate --scenario ed_single_fr.json --inertia 4200 --loss 100 --fr PFR=372
    python cli.py reproduce 4

Exit codes: 0 optimal / all cells pass, 1 usage or input error,
2 infeasible or insecure, 3 reproduction mismatch.
"""

import argparse
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional

from branch import node_log_frame
from components.reproduction_report import reproduce_table, supported_tables
from components.summary_table import format_summary, write_frame, write_results
from components.trajectory_report import format_security, security_frame
from config.settings import (
    DEFAULT_TRAJECTORY_STEP,
    EXIT_ERROR,
    EXIT_INFEASIBLE,
    EXIT_MISMATCH,
    EXIT_OK,
    LOG_FORMAT,
)
from errors import AssemblyError, FrequencyMarketError, InfeasibleClearingError, InsecureStateError
from market import clear_and_price
from model import ScenarioLibrary, SystemState, full_commitment, system_inertia
from swing import FrTrajectory, check_security, trajectory_frame

logger = logging.getLogger(__name__)


@dataclass
class RunConfig:
    scenario: Optional[str] = None
    mode: Optional[str] = None
    demand: Optional[float] = None
    res_available: Optional[float] = None
    out_dir: Path = Path("results")
    verbose: bool = False
    uncapped_loss_payment: bool = False
    node_log: bool = False
    step: float = DEFAULT_TRAJECTORY_STEP
    horizon: Optional[float] = None

    @classmethod
    def from_args(cls, args):
        return cls(
            scenario=getattr(args, "scenario", None),
            mode=getattr(args, "mode", None),
            demand=getattr(args, "demand", None),
            res_available=getattr(args, "res", None),
            out_dir=Path(getattr(args, "out", None) or "results"),
            verbose=args.verbose,
            uncapped_loss_payment=getattr(args, "uncapped_loss_payment", False),
            node_log=getattr(args, "node_log", False),
            step=getattr(args, "step", DEFAULT_TRAJECTORY_STEP),
            horizon=getattr(args, "horizon", None),
        )

    def validate(self):
        if self.step <= 0:
            raise ValueError("--step must be positive")
        if self.horizon is not None and self.horizon <= 0:
            raise ValueError("--horizon must be positive")

    def prepare_output(self):
        """Create the output directory and check that it is writable"""
        self.out_dir.mkdir(parents=True, exist_ok=True)
        if not os.access(self.out_dir, os.W_OK):
            raise PermissionError(f"output directory {self.out_dir} is not writable")
        return self.out_dir

    def load_scenario(self):
        scenario = ScenarioLibrary().load(self.scenario)
        return scenario.with_overrides(demand=self.demand, res_available=self.res_available, mode=self.mode)


@dataclass
class StateOverrides:
    inertia: Optional[float] = None
    loss: Optional[float] = None
    fr: Dict[str, float] = field(default_factory=dict)

    @property
    def given(self):
        return self.inertia is not None or self.loss is not None or bool(self.fr)


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with EXIT_ERROR"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _fr_amount(text):
    name, sep, value = text.partition("=")
    if not sep or not name:
        raise argparse.ArgumentTypeError(f"expected NAME=MW, got '{text}'")
    try:
        return name, float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid MW value in '{text}'") from None


def build_parser():
    parser = _Parser(prog="cli.py", description="Frequency-secured energy and frequency-service market clearing")
    parser.add_argument("--verbose", "-v", action="store_true", help="log solver progress")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def scenario_flags(p):
        p.add_argument("--scenario", required=True, help="scenario JSON path or bundled file name")
        p.add_argument("--demand", type=float, help="override demand (MW)")
        p.add_argument("--res", type=float, help="override available RES (MW)")
        p.add_argument("--mode", choices=["ED", "UC"], help="override clearing mode")
        p.add_argument("--out", help="output directory (default: results)")
        p.add_argument("--verbose", "-v", action="store_true", default=argparse.SUPPRESS)

    clear = sub.add_parser("clear", help="clear a scenario and write dispatch, prices and settlement")
    scenario_flags(clear)
    clear.add_argument("--uncapped-loss-payment", action="store_true",
                       help="pay the full marginal value of a reduced largest loss")
    clear.add_argument("--node-log", action="store_true", help="also write the branch-and-bound node log")

    simulate = sub.add_parser("simulate", help="simulate the post-fault frequency trajectory")
    scenario_flags(simulate)
    simulate.add_argument("--step", type=float, default=DEFAULT_TRAJECTORY_STEP, help="sampling step (s)")
    simulate.add_argument("--horizon", type=float, help="last sample time (s)")
    simulate.add_argument("--inertia", type=float, help="post-fault inertia H (MWs)")
    simulate.add_argument("--loss", type=float, help="lost infeed P_L (MW)")
    simulate.add_argument("--fr", type=_fr_amount, action="append", default=[], metavar="NAME=MW",
                          help="FR amount of a service (repeatable)")

    reproduce = sub.add_parser("reproduce", help="reproduce a published results table")
    reproduce.add_argument("table", help=f"table id ({', '.join(map(str, supported_tables()))}) or 'all'")
    reproduce.add_argument("--out", help="also write the comparison as CSV into this directory")
    reproduce.add_argument("--verbose", "-v", action="store_true", default=argparse.SUPPRESS)
    return parser


def _fail(message, code=EXIT_ERROR):
    print(f"error: {message}", file=sys.stderr)
    return code


def cmd_clear(config):
    """Clear a scenario, print the summary and write the CSV exports"""
    try:
        config.validate()
        scenario = config.load_scenario()
        result = clear_and_price(scenario, uncapped_loss_payment=config.uncapped_loss_payment)
        node_log = node_log_frame(result.step_one) if config.node_log else None
        write_results(result, config.prepare_output(), node_log=node_log)
    except (AssemblyError, InfeasibleClearingError) as e:
        return _fail(f"infeasible: {e}", EXIT_INFEASIBLE)
    except (FrequencyMarketError, OSError, ValueError) as e:
        return _fail(str(e))
    print(format_summary(result))
    return EXIT_OK


def _state_from_overrides(scenario, overrides):
    known = {s.name for s in scenario.services}
    for name in overrides.fr:
        if name not in known:
            raise ValueError(f"unknown FR service '{name}'")
    inertia = overrides.inertia
    if inertia is None:
        inertia = system_inertia(full_commitment(scenario), scenario)
    loss = overrides.loss if overrides.loss is not None else scenario.loss.p_loss_max
    return SystemState(inertia=inertia, loss_size=loss, fr_amounts=dict(overrides.fr))


def cmd_simulate(config, overrides=None):
    """
    Simulate the frequency trajectory of a system state

    Without overrides the scenario is cleared first and its Step-1 state is simulated.
    """
    overrides = overrides or StateOverrides()
    try:
        config.validate()
        scenario = config.load_scenario()
        if overrides.given:
            state = _state_from_overrides(scenario, overrides)
        else:
            state = clear_and_price(scenario).variables.system_state()
        traj = FrTrajectory.from_state(state, scenario.services)
        report = check_security(state, scenario.limits, traj)
        out_dir = config.prepare_output()
        write_frame(trajectory_frame(state, scenario.limits, traj, step=config.step, horizon=config.horizon),
                    out_dir / "trajectory.csv")
        write_frame(security_frame(report, scenario.limits), out_dir / "security.csv")
    except (InsecureStateError, AssemblyError, InfeasibleClearingError) as e:
        return _fail(str(e), EXIT_INFEASIBLE)
    except (FrequencyMarketError, OSError, ValueError) as e:
        return _fail(str(e))
    print(format_security(report, scenario.limits))
    if report.nadir_dev is None:
        print("frequency collapse", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK if report.all_ok else EXIT_INFEASIBLE


def cmd_reproduce(table, out_dir=None):
    """Reproduce one table (or all); exit 3 listing the cells out of tolerance"""
    if table == "all":
        tables = supported_tables()
    else:
        try:
            tables = [int(table)]
        except ValueError:
            tables = []
        if not tables or tables[0] not in supported_tables():
            return _fail(f"unknown table '{table}'; supported: {', '.join(map(str, supported_tables()))}")

    cache = {}
    mismatched = False
    for table_id in tables:
        try:
            report = reproduce_table(table_id, cache=cache)
            if out_dir is not None:
                Path(out_dir).mkdir(parents=True, exist_ok=True)
                write_frame(report, Path(out_dir) / f"reproduction_{table_id}.csv")
        except (AssemblyError, InfeasibleClearingError) as e:
            return _fail(f"table {table_id} infeasible: {e}", EXIT_INFEASIBLE)
        except (FrequencyMarketError, OSError) as e:
            return _fail(f"table {table_id}: {e}")
        print(f"Table {table_id}")
        print(report.to_string(index=False))
        failed = report[~report["passed"]]
        if len(failed):
            mismatched = True
            print(f"Table {table_id}: {len(failed)} cell(s) out of tolerance", file=sys.stderr)
            print(failed.to_string(index=False), file=sys.stderr)
    return EXIT_MISMATCH if mismatched else EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format=LOG_FORMAT)
    if args.command == "reproduce":
        return cmd_reproduce(args.table, args.out)
    config = RunConfig.from_args(args)
    if args.command == "clear":
        return cmd_clear(config)
    overrides = StateOverrides(inertia=args.inertia, loss=args.loss, fr=dict(args.fr))
    return cmd_simulate(config, overrides)


if __name__ == "__main__":
    sys.exit(main())
