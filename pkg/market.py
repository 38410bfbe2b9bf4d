"""
Market clearing module

Assembles the frequency-secured Economic Dispatch (ED) and Unit Commitment
(UC) problems, runs the two-step clearing procedure and turns the duals of
the pricing step into energy, inertia, Frequency Response and reduced-loss
prices, then settles each generator type.

Step 1 solves the mixed-integer problem (branch module) for the physical
dispatch and the nadir segment that holds. Step 2 re-solves with only that
segment's cone, commitment relaxed to continuous, so that duals exist.
Dispatch is reported from Step 1, prices from Step 2.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, Tuple

import pandas as pd

from branch import BranchSettings, Disjunct, MisocpResult, solve_misocp
from config.settings import CONE_CHECK_TOL, FR_TIE_BREAK_COST, PRICE_AGREEMENT_TOL
from conic import ConicProgram, ConicSolution, rotated_dual_components, solve
from constraints import (
    AffineExpr,
    FrequencyVariables,
    LinearConstraint,
    NadirConstraint,
    ProgramBuilder,
    ProgramIndex,
    Sense,
    format_constraints,
    nadir_constraints,
    qss_constraint,
    rocof_constraint,
    to_standard_soc,
)
from errors import AssemblyError, ClearingError, InfeasibleClearingError, PricingMismatchError
from model import ClearingMode, SystemState, full_commitment
from swing import FrTrajectory, SecurityReport, check_security

logger = logging.getLogger(__name__)

CURTAILMENT = "P_curt"


def _power(gen):
    return f"P[{gen.name}]"


def _fr(gen):
    return f"R[{gen.name}]"


def _online(gen):
    return f"y[{gen.name}]"


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClearingVariables:
    power: Mapping[str, float]
    fr: Mapping[str, float]
    online: Mapping[str, float]
    loss: float
    curtailment: float
    inertia: float
    fr_by_service: Mapping[str, float]

    @classmethod
    def from_values(cls, scenario, values, online):
        """
        Read named solution values

        Args:
            scenario: Scenario
            values: mapping of structural variable name to value
            online: mapping of generator type name to online count

        Returns:
            ClearingVariables
        """
        variables = FrequencyVariables.for_services(scenario.services)
        return cls(
            power={g.name: values[_power(g)] for g in scenario.fleet},
            fr={g.name: values[_fr(g)] for g in scenario.fleet if g.provides_fr},
            online=dict(online),
            loss=values[variables.loss],
            curtailment=values.get(CURTAILMENT, 0.0),
            inertia=values[variables.inertia],
            fr_by_service={s.name: values[variables.services[s.name]] for s in scenario.services},
        )

    def system_state(self):
        return SystemState(inertia=self.inertia, loss_size=self.loss, fr_amounts=dict(self.fr_by_service))


@dataclass(frozen=True)
class DualBundle:
    energy_dual: float
    lambda_rocof: float
    lambda_qss: float
    mu: float
    lambda1: float
    lambda2: float
    row_duals: Mapping[str, float] = field(default_factory=dict)

    @classmethod
    def from_solution(cls, index, solution, enforced):
        """Collect the pricing duals of a Step-2 solve"""
        mu, lambda1, lambda2 = rotated_dual_components(index.cone_dual(solution.z, enforced.soc.name))
        return cls(
            energy_dual=index.linear_dual(solution.y, "balance"),
            lambda_rocof=index.linear_dual(solution.y, "rocof"),
            lambda_qss=index.linear_dual(solution.y, "qss"),
            mu=mu,
            lambda1=lambda1,
            lambda2=lambda2,
            row_duals={name: index.linear_dual(solution.y, name) for name in index.linear},
        )

    def is_dual_feasible(self, tol=1e-8):
        return (self.lambda_rocof >= -tol and self.lambda_qss >= -tol
                and math.hypot(self.lambda1, self.lambda2) <= self.mu + tol)


@dataclass(frozen=True)
class PriceReport:
    energy_price: float
    inertia_price: float
    fr_prices: Mapping[str, float]
    loss_price: float

    @property
    def reduced_loss_value(self):
        """Marginal value of reducing the largest loss, reported positive"""
        return -self.loss_price


@dataclass(frozen=True)
class SettlementLine:
    generator: str
    energy_revenue: float
    fr_revenue: float
    inertia_revenue: float
    loss_payment: float
    operating_cost: float

    @property
    def total_revenue(self):
        return self.energy_revenue + self.fr_revenue + self.inertia_revenue + self.loss_payment

    @property
    def energy_profit(self):
        return self.energy_revenue - self.operating_cost

    @property
    def profit(self):
        return self.total_revenue - self.operating_cost

    @property
    def make_whole(self):
        return max(0.0, -self.profit)


@dataclass
class AssembledProblem:
    """Step-1 program with one disjunct per nadir segment"""
    program: ConicProgram
    index: ProgramIndex
    disjuncts: Tuple[Disjunct, ...]
    alternatives: Tuple[NadirConstraint, ...]
    alternative_indices: Tuple[ProgramIndex, ...]
    priorities: Dict[int, float]


@dataclass
class ClearingResult:
    scenario: object
    commitment: Dict[str, float]
    variables: ClearingVariables
    enforced: NadirConstraint
    choice: int
    security: SecurityReport
    duals: DualBundle
    prices: PriceReport
    step_one: MisocpResult
    pricing: ConicSolution
    pricing_values: Dict[str, float]
    loss_is_decision: bool
    uncapped_loss_payment: bool = False
    settlement: List[SettlementLine] = field(default_factory=list)

    @property
    def operating_cost(self):
        return float(sum(line.operating_cost for line in self.settlement))

    @property
    def pricing_commitment(self):
        """Continuous commitment of the pricing step (UC only)"""
        return {g.name: self.pricing_values[_online(g)] for g in self.scenario.fleet
                if _online(g) in self.pricing_values}


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------

def _holds_at(index, constraint):
    def holds(x):
        return constraint.holds(index.values(x), tol=CONE_CHECK_TOL)
    return holds


class ClearingProblem:

    def __init__(self, scenario):
        """
        Frequency-secured clearing problem for one scenario

        Args:
            scenario: Scenario in ED or UC mode
        """
        if not scenario.services:
            raise AssemblyError("scenario defines no Frequency Response services")
        self.scenario = scenario
        self.is_uc = scenario.mode is ClearingMode.UC
        self.variables = FrequencyVariables.for_services(scenario.services)
        self.alternatives = tuple(nadir_constraints(self.variables, scenario.services, scenario.limits))
        self._check_demand()

    def _committed(self, gen):
        return not self.is_uc or gen.must_run

    @property
    def loss_is_decision(self):
        """P_L follows the largest unit's output (its commitment must be fixed)"""
        gen = self.scenario.largest_infeed
        return self.scenario.loss.tracks_unit and gen is not None and self._committed(gen)

    def _check_demand(self):
        sc = self.scenario
        highest = sum(g.unit_count * g.p_max for g in sc.fleet) + sc.res_available
        lowest = sum(g.unit_count * g.p_min for g in sc.fleet if self._committed(g)) - sc.res_available
        if sc.demand > highest + 1e-9:
            raise AssemblyError(f"demand {sc.demand:g} MW exceeds available capacity {highest:g} MW")
        if sc.demand < lowest - 1e-9:
            raise AssemblyError(f"demand {sc.demand:g} MW is below the minimum output {lowest:g} MW "
                                "of committed units")

    def _tie_break_costs(self):
        providers = [g for g in self.scenario.fleet if g.provides_fr]
        return {
            g.name: FR_TIE_BREAK_COST * (1 + sum(1 for o in providers if o.marginal_cost > g.marginal_cost))
            for g in providers
        }

    def _base_builder(self, tie_break):
        sc = self.scenario
        fv = self.variables
        builder = ProgramBuilder()
        online = {}
        for gen in sc.fleet:
            builder.add_variable(_power(gen))
            if gen.provides_fr:
                builder.add_variable(_fr(gen))
            if self.is_uc:
                count = float(gen.unit_count)
                builder.add_variable(_online(gen), integer=True,
                                     lower=count if gen.must_run else 0.0, upper=count)
                online[gen.name] = AffineExpr.var(_online(gen))
            else:
                online[gen.name] = AffineExpr.const(gen.unit_count)
        for name in fv.services.values():
            builder.add_variable(name, free=True)
        builder.add_variable(fv.inertia, free=True)
        builder.add_variable(fv.loss, free=True)
        if sc.res_available > 0:
            builder.add_variable(CURTAILMENT, upper=sc.res_available)

        for gen in sc.fleet:
            builder.add_objective(_power(gen), gen.marginal_cost)
            if self.is_uc and gen.no_load_cost:
                builder.add_objective(_online(gen), gen.no_load_cost)
        if tie_break:
            for name, cost in self._tie_break_costs().items():
                builder.add_objective(f"R[{name}]", cost)

        balance = {_power(g): 1.0 for g in sc.fleet}
        if sc.res_available > 0:
            balance[CURTAILMENT] = -1.0
        builder.add_linear(LinearConstraint(balance, Sense.EQ, sc.demand - sc.res_available, "balance"))

        for gen in sc.fleet:
            power = AffineExpr.var(_power(gen))
            if gen.p_min == gen.p_max:
                builder.add_linear(LinearConstraint.from_expr(
                    power - online[gen.name] * gen.p_max, Sense.EQ, f"output[{gen.name}]"))
            else:
                builder.add_linear(LinearConstraint.from_expr(
                    power - online[gen.name] * gen.p_max, Sense.LE, f"p_max[{gen.name}]"))
                if gen.p_min > 0:
                    builder.add_linear(LinearConstraint.from_expr(
                        power - online[gen.name] * gen.p_min, Sense.GE, f"p_min[{gen.name}]"))
            if gen.provides_fr:
                fr = AffineExpr.var(_fr(gen))
                builder.add_linear(LinearConstraint.from_expr(
                    fr - online[gen.name] * gen.unit_fr_capacity, Sense.LE, f"fr_cap[{gen.name}]"))
                builder.add_linear(LinearConstraint.from_expr(
                    fr + power - online[gen.name] * gen.p_max, Sense.LE, f"headroom[{gen.name}]"))

        for svc in sc.services:
            link = AffineExpr.var(fv.services[svc.name]) - AffineExpr.total(
                (_fr(g), 1.0) for g in sc.providers(svc.name))
            builder.add_linear(LinearConstraint.from_expr(link, Sense.EQ, f"fr_link[{svc.name}]"))

        inertia = AffineExpr.var(fv.inertia)
        for gen in sc.fleet:
            inertia = inertia - online[gen.name] * (gen.inertia_const * gen.p_max)
        inertia = inertia + sc.loss.p_loss_max * sc.loss.inertia_const_loss
        builder.add_linear(LinearConstraint.from_expr(inertia, Sense.EQ, "inertia"))

        if self.loss_is_decision:
            gen = sc.largest_infeed
            loss = AffineExpr.var(fv.loss) - AffineExpr.var(_power(gen), 1.0 / gen.unit_count)
        else:
            loss = AffineExpr.var(fv.loss) - sc.loss.p_loss_max
        builder.add_linear(LinearConstraint.from_expr(loss, Sense.EQ, "loss_link"))

        builder.add_linear(rocof_constraint(fv, sc.limits))
        builder.add_linear(qss_constraint(fv, sc.services))
        return builder

    def step_one(self, tie_break=True):
        """
        Mixed-integer program and its nadir-segment disjuncts

        Returns:
            AssembledProblem
        """
        builder = self._base_builder(tie_break)
        program, index = builder.build()
        disjuncts = []
        indices = []
        for con in self.alternatives:
            alternative = builder.copy()
            alternative.add_rotated_soc(con.soc)
            for guard in con.guard:
                alternative.add_linear(guard)
            alt_program, alt_index = alternative.build()
            disjuncts.append(Disjunct(con.soc.name, alt_program, _holds_at(index, con)))
            indices.append(alt_index)
        priorities = {index.variables[_online(g)]: g.p_max for g in self.scenario.fleet
                      if _online(g) in index.variables}
        logger.debug("Assembled %s problem: %d variables, %d rows, %d nadir segments",
                     self.scenario.mode.value, program.n_vars, program.n_rows, len(disjuncts))
        if logger.isEnabledFor(logging.DEBUG):
            fv = self.variables
            frequency = [rocof_constraint(fv, self.scenario.limits), qss_constraint(fv, self.scenario.services)]
            logger.debug("Frequency constraints:\n%s", format_constraints(frequency + list(self.alternatives)))
        return AssembledProblem(program, index, tuple(disjuncts), self.alternatives, tuple(indices), priorities)

    def step_two(self, choice):
        """
        Convex pricing program: chosen cone only, commitment continuous

        Returns:
            (ConicProgram, ProgramIndex)
        """
        builder = self._base_builder(tie_break=False)
        builder.add_rotated_soc(self.alternatives[choice].soc)
        program, index = builder.build()
        return program.relaxed(), index


def assemble_ed(scenario, tie_break=True):
    """Step-1 Economic Dispatch program with nadir alternatives"""
    if scenario.mode is not ClearingMode.ED:
        raise AssemblyError(f"assemble_ed needs an ED scenario, got {scenario.mode.value}")
    return ClearingProblem(scenario).step_one(tie_break)


def assemble_uc(scenario, tie_break=True):
    """Step-1 Unit Commitment program with integer commitment counts and nadir alternatives"""
    if scenario.mode is not ClearingMode.UC:
        raise AssemblyError(f"assemble_uc needs a UC scenario, got {scenario.mode.value}")
    return ClearingProblem(scenario).step_one(tie_break)


# ---------------------------------------------------------------------------
# Pricing
# ---------------------------------------------------------------------------

def finished_service_price(duals, service, limits):
    """Price of a service fully delivered before the nadir"""
    df = limits.delta_f_max
    return (duals.lambda_qss
            - (duals.mu - duals.lambda1) * (service.delivery_time + 2.0 * service.delay) / (4.0 * df)
            + duals.lambda2 / math.sqrt(df))


def ramping_service_price(duals, service, limits):
    """Price of a service still ramping at the nadir"""
    df = limits.delta_f_max
    T, Td = service.delivery_time, service.delay
    lag = Td * Td / (4.0 * df * T)
    return (duals.lambda_qss
            + duals.mu * (lag + 1.0 / T)
            - duals.lambda1 * (lag - 1.0 / T)
            - duals.lambda2 * Td / (T * math.sqrt(df)))


def closed_form_prices(duals, enforced, services, limits):
    """Frequency-service prices from the explicit formulas for the enforced segment"""
    fr_prices = {}
    for svc in services:
        if svc.name in enforced.finished:
            fr_prices[svc.name] = finished_service_price(duals, svc, limits)
        elif svc.name in enforced.active:
            fr_prices[svc.name] = ramping_service_price(duals, svc, limits)
        else:
            fr_prices[svc.name] = duals.lambda_qss
    return PriceReport(
        energy_price=duals.energy_dual,
        inertia_price=(duals.mu - duals.lambda1) / limits.f0 + 2.0 * duals.lambda_rocof,
        fr_prices=fr_prices,
        loss_price=(-duals.lambda_rocof * limits.f0 / limits.rocof_max
                    - duals.lambda_qss
                    - duals.lambda2 / math.sqrt(limits.delta_f_max)),
    )


def generic_prices(duals, enforced, services, limits):
    """
    Frequency-service prices as dual-weighted constraint coefficients

    Each price sums, over the RoCoF row, the q-s-s row and the enforced cone
    in standard form, the dual times the coefficient of the priced variable.
    """
    fv = FrequencyVariables.for_services(services)
    rows = [(duals.lambda_rocof, rocof_constraint(fv, limits).normalized()[0]),
            (duals.lambda_qss, qss_constraint(fv, services).normalized()[0])]
    cone = to_standard_soc(enforced.soc)

    def price(name):
        total = sum(dual * coefs.get(name, 0.0) for dual, coefs in rows)
        return (total
                + duals.mu * cone.bound.coefficient(name)
                - duals.lambda1 * cone.rows[0].coefficient(name)
                - duals.lambda2 * cone.rows[1].coefficient(name))

    return PriceReport(
        energy_price=duals.energy_dual,
        inertia_price=price(fv.inertia),
        fr_prices={s.name: price(fv.services[s.name]) for s in services},
        loss_price=price(fv.loss),
    )


def compose_prices(duals, enforced, services, limits, tol=PRICE_AGREEMENT_TOL):
    """
    Compose prices from the pricing-step duals

    Both the generic and the closed-form computation are evaluated; the
    generic one is returned after checking that they agree.

    Args:
        duals: DualBundle
        enforced: NadirConstraint chosen in Step 1
        services: sequence of FrServiceSpec
        limits: FrequencyLimits
        tol: agreement tolerance, relative to max(1, |price|)

    Returns:
        PriceReport
    """
    generic = generic_prices(duals, enforced, services, limits)
    closed = closed_form_prices(duals, enforced, services, limits)
    pairs = [("inertia", generic.inertia_price, closed.inertia_price),
             ("loss", generic.loss_price, closed.loss_price)]
    pairs += [(f"FR[{name}]", generic.fr_prices[name], closed.fr_prices[name]) for name in generic.fr_prices]
    for label, a, b in pairs:
        if abs(a - b) > tol * max(1.0, abs(a)):
            raise PricingMismatchError(f"{label} price: generic {a:.12g} vs closed form {b:.12g}")
    return generic


# ---------------------------------------------------------------------------
# Settlement
# ---------------------------------------------------------------------------

def loss_payment(loss_value, energy_price, marginal_cost, reduction, capped=True):
    """
    Payment to the largest unit for part-loading below its rating

    Args:
        loss_value: marginal value of a reduced loss (GBP/MW, positive)
        energy_price: GBP/MWh
        marginal_cost: the unit's energy bid (GBP/MWh)
        reduction: MW below rating
        capped: limit the rate to the energy-market opportunity cost

    Returns:
        GBP
    """
    rate = loss_value
    if capped:
        rate = min(loss_value, max(0.0, energy_price - marginal_cost))
    return rate * max(0.0, reduction)


def settle(clearing, scenario, capped=True):
    """
    Revenues, costs and profit per generator type

    Inertia is only paid when it is a decision (UC); the reduced-loss
    payment goes to the largest-infeed type when P_L follows its output.

    Returns:
        list of SettlementLine in fleet order
    """
    prices = clearing.prices
    v = clearing.variables
    pays_inertia = scenario.mode is ClearingMode.UC
    lines = []
    for gen in scenario.fleet:
        power = v.power[gen.name]
        online = clearing.commitment[gen.name]
        fr_revenue = 0.0
        if gen.provides_fr:
            fr_revenue = prices.fr_prices.get(gen.fr_service, 0.0) * v.fr[gen.name]
        inertia_revenue = 0.0
        if pays_inertia:
            inertia_revenue = prices.inertia_price * gen.inertia_const * gen.p_max * online
        payment = 0.0
        if gen.is_largest_infeed and clearing.loss_is_decision:
            payment = loss_payment(prices.reduced_loss_value, prices.energy_price, gen.marginal_cost,
                                   gen.p_max - v.loss, capped)
        lines.append(SettlementLine(
            generator=gen.name,
            energy_revenue=prices.energy_price * power,
            fr_revenue=fr_revenue,
            inertia_revenue=inertia_revenue,
            loss_payment=payment,
            operating_cost=gen.marginal_cost * power + gen.no_load_cost * online,
        ))
    return lines


# ---------------------------------------------------------------------------
# Two-step clearing
# ---------------------------------------------------------------------------

def clear_and_price(scenario, uncapped_loss_payment=False, settings=None):
    """
    Clear a scenario and price its frequency services

    Args:
        scenario: Scenario
        uncapped_loss_payment: pay the full marginal value of a reduced loss
        settings: BranchSettings for Step 1 (its solver settings are reused in Step 2)

    Returns:
        ClearingResult
    """
    settings = settings or BranchSettings()
    problem = ClearingProblem(scenario)
    assembled = problem.step_one()
    outcome = solve_misocp(assembled.program, assembled.disjuncts,
                           replace(settings, priorities={**assembled.priorities, **settings.priorities}))
    if not outcome.solution.is_optimal or outcome.choice is None:
        raise InfeasibleClearingError(
            f"no frequency-secure dispatch: {outcome.solution.message or outcome.status.value}")
    if not outcome.certified:
        logger.warning("Step 1 optimality not certified: open nodes reach down to %.10g", outcome.open_bound)

    values = assembled.index.values(outcome.solution.x)
    if problem.is_uc:
        commitment = {g.name: outcome.assignment.get(assembled.index.variables[_online(g)], float(g.unit_count))
                      for g in scenario.fleet}
    else:
        commitment = full_commitment(scenario)
    variables = ClearingVariables.from_values(scenario, values, commitment)
    enforced = problem.alternatives[outcome.choice]
    logger.info("Step 1: objective %.10g, nadir segment %d (%s)",
                outcome.objective, enforced.interval_id, enforced.soc.name)

    state = variables.system_state()
    security = check_security(state, scenario.limits, FrTrajectory.from_state(state, scenario.services))
    if not security.all_ok:
        logger.warning("Step-1 dispatch fails the security screen: %s", security)

    program, index = problem.step_two(outcome.choice)
    pricing = solve(program, settings.solver)
    if not pricing.is_optimal:
        raise ClearingError(f"pricing step ended {pricing.status.value}: {pricing.message}")
    pricing_values = index.values(pricing.x)
    if not enforced.guard_holds(pricing_values, tol=CONE_CHECK_TOL):
        logger.warning("pricing solution leaves nadir segment %d; prices use its cone regardless",
                       enforced.interval_id)

    duals = DualBundle.from_solution(index, pricing, enforced)
    if not duals.is_dual_feasible(tol=1e-6):
        logger.warning("pricing duals outside their cones: %s", duals)
    prices = compose_prices(duals, enforced, scenario.services, scenario.limits)

    result = ClearingResult(
        scenario=scenario,
        commitment=commitment,
        variables=variables,
        enforced=enforced,
        choice=outcome.choice,
        security=security,
        duals=duals,
        prices=prices,
        step_one=outcome,
        pricing=pricing,
        pricing_values=pricing_values,
        loss_is_decision=problem.loss_is_decision,
        uncapped_loss_payment=uncapped_loss_payment,
    )
    result.settlement = settle(result, scenario, capped=not uncapped_loss_payment)
    return result


# ---------------------------------------------------------------------------
# Tables
# ---------------------------------------------------------------------------

def dispatch_frame(result):
    rows = []
    for gen in result.scenario.fleet:
        rows.append({
            "generator": gen.name,
            "online_units": result.commitment[gen.name],
            "power_mw": result.variables.power[gen.name],
            "fr_mw": result.variables.fr.get(gen.name, 0.0),
            "fr_service": gen.fr_service or "",
        })
    return pd.DataFrame(rows, columns=["generator", "online_units", "power_mw", "fr_mw", "fr_service"])


def price_frame(result, decimals=None):
    """
    Prices as (quantity, item, value) rows

    Args:
        result: ClearingResult
        decimals: round for display; None keeps full precision
    """
    p = result.prices
    rows = [("energy_price", "", p.energy_price), ("inertia_price", "", p.inertia_price)]
    rows += [("fr_price", name, value) for name, value in p.fr_prices.items()]
    rows.append(("reduced_loss_price", "", p.reduced_loss_value))
    frame = pd.DataFrame(rows, columns=["quantity", "item", "value"])
    if decimals is not None:
        frame["value"] = frame["value"].round(decimals)
    return frame


def settlement_frame(result):
    rows = [{
        "generator": line.generator,
        "energy_revenue": line.energy_revenue,
        "fr_revenue": line.fr_revenue,
        "inertia_revenue": line.inertia_revenue,
        "loss_payment": line.loss_payment,
        "total_revenue": line.total_revenue,
        "operating_cost": line.operating_cost,
        "energy_profit": line.energy_profit,
        "profit": line.profit,
        "make_whole": line.make_whole,
    } for line in result.settlement]
    return pd.DataFrame(rows)


def system_frame(result):
    v = result.variables
    sc = result.scenario
    rows = [
        ("inertia_mws", v.inertia),
        ("loss_mw", v.loss),
        ("res_accommodated_mw", sc.res_available - v.curtailment),
        ("curtailment_mw", v.curtailment),
        ("operating_cost", result.operating_cost),
        ("nadir_segment", float(result.enforced.interval_id)),
    ]
    if result.security.nadir_dev is not None:
        rows.append(("nadir_dev_hz", result.security.nadir_dev))
        rows.append(("t_nadir_s", result.security.t_nadir))
    rows.append(("rocof_hz_per_s", result.security.rocof_at_0))
    return pd.DataFrame(rows, columns=["quantity", "value"])


def results_frame(result):
    """All sections of a run in one long table (section, item, quantity, value)"""
    parts = []
    dispatch = dispatch_frame(result).drop(columns="fr_service")
    parts.append(dispatch.melt(id_vars="generator", var_name="quantity", value_name="value")
                 .rename(columns={"generator": "item"}).assign(section="dispatch"))
    parts.append(system_frame(result).assign(section="system", item=""))
    parts.append(price_frame(result).assign(section="prices"))
    parts.append(settlement_frame(result).melt(id_vars="generator", var_name="quantity", value_name="value")
                 .rename(columns={"generator": "item"}).assign(section="settlement"))
    frame = pd.concat(parts, ignore_index=True)
    return frame[["section", "item", "quantity", "value"]]
