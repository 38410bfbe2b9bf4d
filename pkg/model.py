"""
Scenario model

Domain types for a frequency-secured clearing run, the JSON scenario
schema, and derived system quantities such as post-fault inertia.
Scenario files use snake_case keys named exactly like the dataclass fields
below; units are MW, s, Hz, GBP/MWh and GBP/h.
"""

import json
import logging
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Mapping, Optional

from config.settings import SCENARIO_DIR
from errors import ScenarioError

logger = logging.getLogger(__name__)


class ClearingMode(str, Enum):
    ED = "ED"
    UC = "UC"


@dataclass(frozen=True)
class FrequencyLimits:
    f0: float
    rocof_max: float
    delta_f_max: float


@dataclass(frozen=True)
class FrServiceSpec:
    name: str
    delivery_time: float
    delay: float = 0.0

    @property
    def completion(self):
        """Time at which the service is fully delivered"""
        return self.delay + self.delivery_time


@dataclass(frozen=True)
class GeneratorType:
    name: str
    unit_count: int
    p_min: float
    p_max: float
    fr_capacity: float = 0.0
    fr_service: Optional[str] = None
    inertia_const: float = 0.0
    marginal_cost: float = 0.0
    no_load_cost: float = 0.0
    is_largest_infeed: bool = False
    must_run: bool = False

    @property
    def provides_fr(self):
        return self.fr_service is not None and self.fr_capacity > 0

    @property
    def unit_fr_capacity(self):
        return self.fr_capacity / self.unit_count


@dataclass(frozen=True)
class LossSpec:
    p_loss_max: float
    inertia_const_loss: float
    tracks_unit: bool = True


@dataclass(frozen=True)
class Scenario:
    limits: FrequencyLimits
    fleet: tuple
    services: tuple
    demand: float
    res_available: float
    loss: LossSpec
    mode: ClearingMode = ClearingMode.ED
    name: str = ""

    def generator(self, name):
        for gen in self.fleet:
            if gen.name == name:
                return gen
        raise KeyError(name)

    def service(self, name):
        for svc in self.services:
            if svc.name == name:
                return svc
        raise KeyError(name)

    def providers(self, service_name):
        """Generator types that deliver the named FR service"""
        return tuple(g for g in self.fleet if g.provides_fr and g.fr_service == service_name)

    @property
    def largest_infeed(self):
        for gen in self.fleet:
            if gen.is_largest_infeed:
                return gen
        return None

    def with_overrides(self, demand=None, res_available=None, mode=None):
        """Return a copy with command-line overrides applied"""
        changes = {}
        if demand is not None:
            if demand < 0:
                raise ScenarioError("demand", "must be non-negative")
            changes["demand"] = float(demand)
        if res_available is not None:
            if res_available < 0:
                raise ScenarioError("res_available", "must be non-negative")
            changes["res_available"] = float(res_available)
        if mode is not None:
            changes["mode"] = ClearingMode(mode)
        return replace(self, **changes)


@dataclass(frozen=True)
class SystemState:
    inertia: float
    loss_size: float
    fr_amounts: Mapping[str, float] = field(default_factory=dict)

    def total_fr(self):
        return float(sum(self.fr_amounts.values()))


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

def _require(data, key, path):
    if not isinstance(data, dict):
        raise ScenarioError(path, "expected an object")
    if key not in data:
        raise ScenarioError(_join(path, key), "missing field")
    return data[key]


def _join(path, key):
    return f"{path}.{key}" if path else key


def _number(value, path, positive=False, non_negative=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(path, "expected a number")
    value = float(value)
    if value != value or value in (float("inf"), float("-inf")):
        raise ScenarioError(path, "must be finite")
    name = path.rsplit(".", 1)[-1]
    if positive and value <= 0:
        raise ScenarioError(path, f"{name} must be positive")
    if non_negative and value < 0:
        raise ScenarioError(path, f"{name} must be non-negative")
    return value


def _flag(value, path):
    if not isinstance(value, bool):
        raise ScenarioError(path, "expected true or false")
    return value


def _text(value, path):
    if not isinstance(value, str) or not value:
        raise ScenarioError(path, "expected a non-empty string")
    return value


def _parse_limits(data, path):
    return FrequencyLimits(
        f0=_number(_require(data, "f0", path), _join(path, "f0"), positive=True),
        rocof_max=_number(_require(data, "rocof_max", path), _join(path, "rocof_max"), positive=True),
        delta_f_max=_number(_require(data, "delta_f_max", path), _join(path, "delta_f_max"), positive=True),
    )


def _parse_services(items, path):
    if not isinstance(items, list):
        raise ScenarioError(path, "expected a list")
    services = []
    seen = set()
    for i, item in enumerate(items):
        here = f"{path}[{i}]"
        name = _text(_require(item, "name", here), _join(here, "name"))
        if name in seen:
            raise ScenarioError(_join(here, "name"), f"duplicate service name '{name}'")
        seen.add(name)
        services.append(FrServiceSpec(
            name=name,
            delivery_time=_number(_require(item, "delivery_time", here), _join(here, "delivery_time"),
                                  positive=True),
            delay=_number(item.get("delay", 0.0), _join(here, "delay"), non_negative=True),
        ))
    return tuple(services)


def _parse_generator(item, here, service_names):
    name = _text(_require(item, "name", here), _join(here, "name"))
    count = _require(item, "unit_count", here)
    if isinstance(count, bool) or not isinstance(count, int) or count < 1:
        raise ScenarioError(_join(here, "unit_count"), "unit_count must be an integer >= 1")
    p_min = _number(_require(item, "p_min", here), _join(here, "p_min"), non_negative=True)
    p_max = _number(_require(item, "p_max", here), _join(here, "p_max"), non_negative=True)
    if p_min > p_max:
        raise ScenarioError(_join(here, "p_min"), "p_min must not exceed p_max")
    fr_service = item.get("fr_service")
    if fr_service is not None:
        fr_service = _text(fr_service, _join(here, "fr_service"))
        if fr_service not in service_names:
            raise ScenarioError(_join(here, "fr_service"), f"unknown service '{fr_service}'")
    fr_capacity = _number(item.get("fr_capacity", 0.0), _join(here, "fr_capacity"), non_negative=True)
    if fr_capacity > 0 and fr_service is None:
        raise ScenarioError(_join(here, "fr_service"), "fr_capacity requires an fr_service")
    return GeneratorType(
        name=name,
        unit_count=count,
        p_min=p_min,
        p_max=p_max,
        fr_capacity=fr_capacity,
        fr_service=fr_service,
        inertia_const=_number(item.get("inertia_const", 0.0), _join(here, "inertia_const"),
                              non_negative=True),
        marginal_cost=_number(item.get("marginal_cost", 0.0), _join(here, "marginal_cost")),
        no_load_cost=_number(item.get("no_load_cost", 0.0), _join(here, "no_load_cost")),
        is_largest_infeed=_flag(item.get("is_largest_infeed", False), _join(here, "is_largest_infeed")),
        must_run=_flag(item.get("must_run", False), _join(here, "must_run")),
    )


def scenario_from_dict(data):
    """
    Build a validated Scenario from decoded JSON

    Args:
        data: dict decoded from a scenario file

    Returns:
        Scenario
    """
    if not isinstance(data, dict):
        raise ScenarioError("", "scenario must be a JSON object")
    limits = _parse_limits(_require(data, "limits", ""), "limits")
    services = _parse_services(_require(data, "services", ""), "services")
    service_names = {s.name for s in services}

    items = _require(data, "fleet", "")
    if not isinstance(items, list) or not items:
        raise ScenarioError("fleet", "expected a non-empty list")
    fleet = []
    seen = set()
    for i, item in enumerate(items):
        gen = _parse_generator(item, f"fleet[{i}]", service_names)
        if gen.name in seen:
            raise ScenarioError(f"fleet[{i}].name", f"duplicate generator name '{gen.name}'")
        seen.add(gen.name)
        fleet.append(gen)

    loss_data = _require(data, "loss", "")
    loss = LossSpec(
        p_loss_max=_number(_require(loss_data, "p_loss_max", "loss"), "loss.p_loss_max", non_negative=True),
        inertia_const_loss=_number(_require(loss_data, "inertia_const_loss", "loss"),
                                   "loss.inertia_const_loss", non_negative=True),
        tracks_unit=_flag(loss_data.get("tracks_unit", True), "loss.tracks_unit"),
    )
    flagged = [g.name for g in fleet if g.is_largest_infeed]
    if loss.tracks_unit and len(flagged) != 1:
        raise ScenarioError("fleet", "exactly one generator type must set is_largest_infeed "
                                     f"when the loss tracks a unit (found {len(flagged)})")
    if not loss.tracks_unit and flagged:
        raise ScenarioError("loss.tracks_unit", "is_largest_infeed is set but the loss tracks no unit")

    mode = _require(data, "mode", "")
    try:
        mode = ClearingMode(mode)
    except ValueError:
        raise ScenarioError("mode", "mode must be 'ED' or 'UC'") from None

    name = data.get("name", "")
    if not isinstance(name, str):
        raise ScenarioError("name", "expected a string")

    return Scenario(
        limits=limits,
        fleet=tuple(fleet),
        services=services,
        demand=_number(_require(data, "demand", ""), "demand", non_negative=True),
        res_available=_number(data.get("res_available", 0.0), "res_available", non_negative=True),
        loss=loss,
        mode=mode,
        name=name,
    )


def parse_scenario(text):
    """Parse scenario-file content (JSON text) into a validated Scenario"""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError("", f"invalid JSON at line {e.lineno} column {e.colno}: {e.msg}") from None
    return scenario_from_dict(data)


def serialize_scenario(scenario):
    """Serialize a Scenario back to scenario-file JSON"""
    data = asdict(scenario)
    data["mode"] = scenario.mode.value
    return json.dumps(data, indent=2)


def load_scenario(filepath):
    """Load and validate a scenario file"""
    filepath = Path(filepath)
    try:
        text = filepath.read_text(encoding="utf-8")
    except OSError as e:
        raise ScenarioError("", f"cannot read {filepath}: {e.strerror}") from None
    scenario = parse_scenario(text)
    logger.info("Loaded scenario %s from %s", scenario.name or filepath.stem, filepath)
    return scenario


class ScenarioLibrary:

    def __init__(self, directory=None):
        """
        Bundled scenario files

        Args:
            directory: Optional directory to search instead of the bundled one
        """
        self.directory = Path(directory) if directory else SCENARIO_DIR

    def names(self):
        """Return the file names of all scenarios in the library"""
        return sorted(p.name for p in self.directory.glob("*.json"))

    def resolve(self, path_or_name):
        """Return an existing path, falling back to the library directory"""
        candidate = Path(path_or_name)
        if candidate.exists():
            return candidate
        bundled = self.directory / candidate.name
        if bundled.exists():
            return bundled
        if not candidate.suffix:
            bundled = self.directory / f"{candidate.name}.json"
            if bundled.exists():
                return bundled
        raise ScenarioError("", f"scenario file not found: {path_or_name}")

    def load(self, path_or_name):
        return load_scenario(self.resolve(path_or_name))

    def save(self, scenario, filepath):
        """Save a scenario as JSON"""
        filepath = Path(filepath)
        filepath.write_text(serialize_scenario(scenario) + "\n", encoding="utf-8")
        logger.info("Saved scenario to %s", filepath)
        return filepath


# ---------------------------------------------------------------------------
# Derived quantities
# ---------------------------------------------------------------------------

def full_commitment(scenario):
    """Every unit of every type online"""
    return {g.name: float(g.unit_count) for g in scenario.fleet}


def system_inertia(commitment, scenario):
    """
    Post-fault system inertia

    The largest infeed is lost, so its kinetic energy is removed:
    H = sum_g H_g * P_g^max * y_g - P_L^max * H_L.

    Args:
        commitment: mapping of generator type name to online count (may be fractional)
        scenario: Scenario

    Returns:
        Inertia in MW*s
    """
    known = {g.name: g for g in scenario.fleet}
    for name in commitment:
        if name not in known:
            raise ScenarioError(f"commitment[{name}]", "unknown generator type")
    total = 0.0
    for gen in scenario.fleet:
        online = float(commitment.get(gen.name, 0.0))
        if online < -1e-9 or online > gen.unit_count + 1e-9:
            raise ScenarioError(f"commitment[{gen.name}]",
                                f"online count must lie in [0, {gen.unit_count}]")
        total += gen.inertia_const * gen.p_max * online
    total -= scenario.loss.p_loss_max * scenario.loss.inertia_const_loss
    if total <= 0:
        logger.warning("insecure: no post-fault inertia (H=%.6g MWs)", total)
    return total
