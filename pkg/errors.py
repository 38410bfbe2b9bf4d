"""
Exception hierarchy

Solver outcomes (infeasible, unbounded, numerical failure) are reported
through status values; the classes here are for invalid input and broken
invariants.
"""


class FrequencyMarketError(Exception):
    """Base class for all errors raised by this package"""


class ScenarioError(FrequencyMarketError):
    """Invalid scenario content, reported with the offending field path"""

    def __init__(self, path, message):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)


class InsecureStateError(FrequencyMarketError):
    """The system state cannot be screened, e.g. no post-fault inertia"""


class FrequencyCollapseError(FrequencyMarketError):
    """Total frequency response is below the lost infeed; no nadir exists"""


class ConstraintError(FrequencyMarketError):
    """Frequency constraints cannot be generated for the given services"""


class ConicError(FrequencyMarketError):
    """Malformed conic program"""


class BranchError(FrequencyMarketError):
    """Branch-and-bound invariant violated or enumeration too large"""


class AssemblyError(FrequencyMarketError):
    """Clearing problem cannot be assembled from the scenario"""


class ClearingError(FrequencyMarketError):
    """The two-step clearing procedure could not complete"""


class InfeasibleClearingError(ClearingError):
    """No frequency-secure dispatch exists for the scenario"""


class PricingMismatchError(FrequencyMarketError):
    """Generic and closed-form price computations disagree"""
