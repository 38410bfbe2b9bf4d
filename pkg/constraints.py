"""
Frequency-security constraints

Builds the RoCoF and quasi-steady-state linear constraints and one rotated
second-order cone nadir constraint per FR(t) segment, each with the linear
guard that places the nadir inside its segment. ProgramBuilder compiles the
named constraints into a standard-form ConicProgram.
"""

import copy
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from conic import ConeBlock, ConeKind, ConicProgram
from errors import ConstraintError

logger = logging.getLogger(__name__)

_SQRT2 = math.sqrt(2.0)


def _fmt(value):
    return f"{value:.6g}"


@dataclass(frozen=True)
class AffineExpr:
    coefficients: Mapping[str, float] = field(default_factory=dict)
    constant: float = 0.0

    @classmethod
    def var(cls, name, coef=1.0):
        return cls({name: float(coef)}, 0.0)

    @classmethod
    def const(cls, value):
        return cls({}, float(value))

    @classmethod
    def total(cls, terms, constant=0.0):
        """Sum of (name, coef) pairs, merging repeated names and dropping zero terms"""
        coefs = {}
        for name, coef in terms:
            coefs[name] = coefs.get(name, 0.0) + float(coef)
        return cls({k: v for k, v in coefs.items() if v != 0}, float(constant))

    def __add__(self, other):
        if isinstance(other, (int, float)):
            return AffineExpr(dict(self.coefficients), self.constant + other)
        coefs = dict(self.coefficients)
        for name, coef in other.coefficients.items():
            coefs[name] = coefs.get(name, 0.0) + coef
        return AffineExpr(coefs, self.constant + other.constant)

    __radd__ = __add__

    def __mul__(self, scalar):
        return AffineExpr({k: v * scalar for k, v in self.coefficients.items()}, self.constant * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)

    def coefficient(self, name):
        return self.coefficients.get(name, 0.0)

    def is_constant(self):
        return all(c == 0 for c in self.coefficients.values())

    def evaluate(self, values):
        return self.constant + sum(c * values[name] for name, c in self.coefficients.items() if c != 0)

    def __str__(self):
        parts = [f"{_fmt(c)}*{name}" for name, c in self.coefficients.items() if c != 0]
        if self.constant != 0 or not parts:
            parts.append(_fmt(self.constant))
        return " + ".join(parts).replace("+ -", "- ")


class Sense(str, Enum):
    LE = "<="
    GE = ">="
    EQ = "="


@dataclass(frozen=True)
class LinearConstraint:
    coefficients: Mapping[str, float]
    sense: Sense
    rhs: float
    name: str = ""
    strict: bool = False

    def __post_init__(self):
        for var, coef in self.coefficients.items():
            if not math.isfinite(coef):
                raise ConstraintError(f"{self.name}: non-finite coefficient on {var}")
        if not math.isfinite(self.rhs):
            raise ConstraintError(f"{self.name}: non-finite right-hand side")

    @classmethod
    def from_expr(cls, expr, sense, name="", strict=False):
        """Constraint expr (sense) 0"""
        return cls(dict(expr.coefficients), Sense(sense), -expr.constant, name, strict)

    def lhs(self, values):
        return sum(c * values[var] for var, c in self.coefficients.items() if c != 0)

    def margin(self, values):
        """Signed satisfaction margin; negative when violated"""
        lhs = self.lhs(values)
        if self.sense is Sense.GE:
            return lhs - self.rhs
        if self.sense is Sense.LE:
            return self.rhs - lhs
        return -abs(lhs - self.rhs)

    def is_satisfied(self, values, tol=0.0):
        margin = self.margin(values)
        if self.strict and tol == 0.0:
            return margin > 0
        return margin >= -tol

    def normalized(self):
        """Coefficients and rhs rewritten in '>=' (or '=') form"""
        if self.sense is Sense.LE:
            return {k: -v for k, v in self.coefficients.items()}, -self.rhs
        return dict(self.coefficients), self.rhs

    def __str__(self):
        expr = AffineExpr(self.coefficients)
        op = ">" if self.strict else self.sense.value
        return f"{self.name}: {expr} {op} {_fmt(self.rhs)}"


@dataclass(frozen=True)
class RotatedSocConstraint:
    """u * v >= w^2 with u, v >= 0"""
    u: AffineExpr
    v: AffineExpr
    w: AffineExpr
    name: str = ""

    def margin(self, values):
        return self.u.evaluate(values) * self.v.evaluate(values) - self.w.evaluate(values) ** 2

    def is_satisfied(self, values, tol=0.0):
        u, v, w = (e.evaluate(values) for e in (self.u, self.v, self.w))
        return u >= -tol and v >= -tol and u * v - w * w >= -tol * max(1.0, w * w)

    def __str__(self):
        return f"{self.name}: ({self.u}) * ({self.v}) >= ({self.w})^2"


@dataclass(frozen=True)
class StandardSocConstraint:
    """||rows|| <= bound"""
    rows: Tuple[AffineExpr, ...]
    bound: AffineExpr
    name: str = ""

    def is_satisfied(self, values, tol=0.0):
        norm = math.sqrt(sum(r.evaluate(values) ** 2 for r in self.rows))
        return norm <= self.bound.evaluate(values) + tol

    def __str__(self):
        inner = "; ".join(str(r) for r in self.rows)
        return f"{self.name}: ||[{inner}]|| <= {self.bound}"


@dataclass(frozen=True)
class FrequencyVariables:
    """Variable names used by the frequency constraints"""
    services: Mapping[str, str]
    inertia: str = "H"
    loss: str = "P_L"

    @classmethod
    def for_services(cls, services):
        return cls({s.name: f"FR[{s.name}]" for s in services})


@dataclass(frozen=True)
class NadirConstraint:
    interval_id: int
    start: float
    end: float
    finished: Tuple[str, ...]
    active: Tuple[str, ...]
    soc: RotatedSocConstraint
    guard: Tuple[LinearConstraint, ...]

    def guard_holds(self, values, tol=0.0):
        return all(g.is_satisfied(values, tol) for g in self.guard)

    def soc_holds(self, values, tol=0.0):
        return self.soc.is_satisfied(values, tol)

    def holds(self, values, tol=0.0):
        return self.guard_holds(values, tol) and self.soc_holds(values, tol)

    def __str__(self):
        guards = " and ".join(str(g).split(": ", 1)[1] for g in self.guard)
        return f"{self.soc} | t in ({_fmt(self.start)}, {_fmt(self.end)}] if {guards}"


def rocof_constraint(variables, limits):
    """2H >= P_L * f0 / RoCoF_max"""
    return LinearConstraint(
        {variables.inertia: 2.0, variables.loss: -limits.f0 / limits.rocof_max},
        Sense.GE, 0.0, "rocof",
    )


def qss_constraint(variables, services):
    """sum_i R_i >= P_L"""
    coefs = {variables.services[s.name]: 1.0 for s in services}
    coefs[variables.loss] = -1.0
    return LinearConstraint(coefs, Sense.GE, 0.0, "qss")


def _fr_at(variables, services, t):
    """FR(t) as an affine expression in the service amounts"""
    return AffineExpr.total(
        (variables.services[s.name], min(max((t - s.delay) / s.delivery_time, 0.0), 1.0))
        for s in services
    )


def nadir_constraints(variables, services, limits):
    """
    One rotated-SOC nadir constraint per FR(t) segment with positive slope

    For a segment with finished services F and ramping services A:

        u = H/f0 - sum_F R_i (T_i + 2 Td_i) / (4 df) + sum_A R_i Td_i^2 / (T_i 4 df)
        v = sum_A R_i / T_i
        w = (P_L - sum_F R_i + sum_A R_i Td_i / T_i) / (2 sqrt(df))

    and u * v >= w^2 holds iff the nadir deviation is within df, provided
    the guard FR(end) > P_L >= FR(start) places the nadir in the segment.

    Args:
        variables: FrequencyVariables
        services: sequence of FrServiceSpec
        limits: FrequencyLimits

    Returns:
        list of NadirConstraint in time order
    """
    if not services:
        raise ConstraintError("nadir constraints need at least one FR service")
    f0 = limits.f0
    df4 = 4.0 * limits.delta_f_max
    root = 2.0 * math.sqrt(limits.delta_f_max)
    H, PL = variables.inertia, variables.loss

    points = sorted({0.0} | {s.delay for s in services} | {s.completion for s in services})
    out = []
    for start, end in zip(points[:-1], points[1:]):
        active = [s for s in services if s.delay <= start and s.completion >= end]
        if not active:
            continue
        finished = [s for s in services if s.completion <= start]
        R = variables.services

        u = AffineExpr.total(
            [(H, 1.0 / f0)]
            + [(R[s.name], -(s.delivery_time + 2.0 * s.delay) / df4) for s in finished]
            + [(R[s.name], s.delay ** 2 / (s.delivery_time * df4)) for s in active]
        )
        v = AffineExpr.total((R[s.name], 1.0 / s.delivery_time) for s in active)
        w = AffineExpr.total(
            [(PL, 1.0 / root)]
            + [(R[s.name], -1.0 / root) for s in finished]
            + [(R[s.name], s.delay / (s.delivery_time * root)) for s in active]
        )
        interval_id = len(out) + 1
        name = f"nadir[{interval_id}]"

        guard = [LinearConstraint.from_expr(_fr_at(variables, services, end) - AffineExpr.var(PL),
                                            Sense.GE, f"{name}:upper", strict=True)]
        fr_start = _fr_at(variables, services, start)
        if not fr_start.is_constant():
            guard.append(LinearConstraint.from_expr(AffineExpr.var(PL) - fr_start, Sense.GE,
                                                    f"{name}:lower"))
        out.append(NadirConstraint(
            interval_id=interval_id,
            start=start,
            end=end,
            finished=tuple(s.name for s in finished),
            active=tuple(s.name for s in active),
            soc=RotatedSocConstraint(u, v, w, name),
            guard=tuple(guard),
        ))
    logger.debug("Generated %d nadir constraints for %d services", len(out), len(services))
    return out


def select_nadir_constraint(constraints, values, tol=0.0):
    """
    The nadir constraint whose segment contains the nadir at the given values

    Falls back to the earliest segment whose guard holds within tol when an
    exact boundary tie leaves no guard satisfied.
    """
    for con in constraints:
        if con.guard_holds(values):
            return con
    for con in constraints:
        if all(g.margin(values) >= -max(tol, 1e-12) for g in con.guard):
            return con
    return None


def to_standard_soc(rsoc):
    """
    Rewrite u*v >= w^2 as ||[u - v; 2w]|| <= u + v

    The first row carries the 1/f0 inertia coefficient, the second the
    1/sqrt(df) loss coefficient.
    """
    bound = rsoc.u + rsoc.v
    if bound.is_constant() and bound.constant == 0:
        raise ConstraintError(f"{rsoc.name}: u + v is identically zero")
    return StandardSocConstraint((rsoc.u - rsoc.v, 2.0 * rsoc.w), bound, rsoc.name)


def format_constraints(constraints):
    """Human-readable dump, one constraint per line"""
    return "\n".join(str(c) for c in constraints)


# ---------------------------------------------------------------------------
# Compilation to standard form
# ---------------------------------------------------------------------------

@dataclass
class ProgramIndex:
    variables: Dict[str, int]
    structural: Tuple[str, ...]
    linear: Dict[str, Tuple[int, Optional[int], Sense]]
    cones: Dict[str, Tuple[ConeKind, Tuple[int, ...]]]

    @property
    def n_vars(self):
        return len(self.variables)

    def value(self, x, name):
        return float(x[self.variables[name]])

    def values(self, x):
        """Structural variable values by name"""
        return {name: float(x[self.variables[name]]) for name in self.structural}

    def linear_dual(self, y, name):
        """Row dual in '>=' form: non-negative for inequalities"""
        return float(y[self.linear[name][0]])

    def cone_dual(self, z, name):
        return np.asarray([z[i] for i in self.cones[name][1]])

    def cone_primal(self, x, name):
        return np.asarray([x[i] for i in self.cones[name][1]])


class ProgramBuilder:

    def __init__(self):
        """Incrementally build a named conic program"""
        self._names = []
        self._index = {}
        self._structural = []
        self._blocks = []
        self._integer = set()
        self._lower = {}
        self._upper = {}
        self._rows = []
        self._linear = {}
        self._cones = {}
        self._objective = {}

    def copy(self):
        return copy.deepcopy(self)

    def has_variable(self, name):
        return name in self._index

    def _new_var(self, name, kind):
        if name in self._index:
            raise ConstraintError(f"duplicate variable '{name}'")
        idx = len(self._names)
        self._names.append(name)
        self._index[name] = idx
        scalar = kind in (ConeKind.NONNEGATIVE, ConeKind.FREE)
        if scalar and self._blocks and self._blocks[-1][0] is kind:
            self._blocks[-1][1].append(idx)
        else:
            self._blocks.append((kind, [idx]))
        return idx

    def _new_cone(self, names, kind):
        idx = [len(self._names) + i for i in range(len(names))]
        for name in names:
            if name in self._index:
                raise ConstraintError(f"duplicate variable '{name}'")
        for i, name in zip(idx, names):
            self._names.append(name)
            self._index[name] = i
        self._blocks.append((kind, idx))
        return idx

    def add_variable(self, name, integer=False, lower=None, upper=None, free=False):
        """Add a structural variable (non-negative unless free)"""
        idx = self._new_var(name, ConeKind.FREE if free else ConeKind.NONNEGATIVE)
        self._structural.append(name)
        if integer:
            self._integer.add(idx)
        if lower is not None:
            self._lower[idx] = float(lower)
        if upper is not None:
            self._upper[idx] = float(upper)
        return idx

    def set_bounds(self, name, lower=None, upper=None):
        idx = self._index[name]
        if lower is not None:
            self._lower[idx] = float(lower)
        if upper is not None:
            self._upper[idx] = float(upper)

    def set_objective(self, coefficients):
        for name in coefficients:
            if name not in self._index:
                raise ConstraintError(f"objective references unknown variable '{name}'")
        self._objective = {k: float(v) for k, v in coefficients.items()}

    def add_objective(self, name, coef):
        if name not in self._index:
            raise ConstraintError(f"objective references unknown variable '{name}'")
        self._objective[name] = self._objective.get(name, 0.0) + float(coef)

    def _row(self, expr_coefs, scale=1.0):
        row = {}
        for name, coef in expr_coefs.items():
            if coef == 0:
                continue
            if name not in self._index:
                raise ConstraintError(f"constraint references unknown variable '{name}'")
            idx = self._index[name]
            row[idx] = row.get(idx, 0.0) + coef * scale
        return row

    def add_linear(self, con):
        """Add a linear constraint; inequalities get a non-negative slack"""
        name = con.name or f"row{len(self._rows)}"
        if name in self._linear:
            raise ConstraintError(f"duplicate constraint '{name}'")
        coefs, rhs = con.normalized()
        row = self._row(coefs)
        slack = None
        if con.sense is not Sense.EQ:
            slack = self._new_var(f"s[{name}]", ConeKind.NONNEGATIVE)
            row[slack] = -1.0
        self._rows.append((row, rhs))
        self._linear[name] = (len(self._rows) - 1, slack, con.sense)
        return name

    def _link(self, target, expr, scale=1.0):
        row = {k: -v for k, v in self._row(expr.coefficients, scale).items()}
        row[target] = row.get(target, 0.0) + 1.0
        self._rows.append((row, expr.constant * scale))

    def add_rotated_soc(self, con):
        """Add u*v >= w^2 as a native rotated cone (2 u v >= w_s^2, w_s = sqrt(2) w)"""
        name = con.name or f"cone{len(self._cones)}"
        if name in self._cones:
            raise ConstraintError(f"duplicate cone '{name}'")
        iu, iv, iw = self._new_cone([f"{name}.u", f"{name}.v", f"{name}.w"], ConeKind.ROTATED_SOC)
        self._link(iu, con.u)
        self._link(iv, con.v)
        self._link(iw, con.w, _SQRT2)
        self._cones[name] = (ConeKind.ROTATED_SOC, (iu, iv, iw))
        return name

    def add_standard_soc(self, con):
        """Add ||rows|| <= bound as a second-order cone"""
        name = con.name or f"cone{len(self._cones)}"
        if name in self._cones:
            raise ConstraintError(f"duplicate cone '{name}'")
        labels = [f"{name}.t"] + [f"{name}.s{i}" for i in range(len(con.rows))]
        idx = self._new_cone(labels, ConeKind.SOC)
        self._link(idx[0], con.bound)
        for i, row in zip(idx[1:], con.rows):
            self._link(i, row)
        self._cones[name] = (ConeKind.SOC, tuple(idx))
        return name

    def build(self, names=True):
        """
        Compile to a ConicProgram

        Returns:
            (ConicProgram, ProgramIndex)
        """
        n = len(self._names)
        m = len(self._rows)
        c = np.zeros(n)
        for name, coef in self._objective.items():
            c[self._index[name]] = coef
        A = np.zeros((m, n))
        b = np.zeros(m)
        for r, (row, rhs) in enumerate(self._rows):
            for j, coef in row.items():
                A[r, j] = coef
            b[r] = rhs
        cones = tuple(ConeBlock(kind, idx[0], len(idx)) for kind, idx in self._blocks)
        lower = upper = None
        if self._lower or self._upper:
            lower = np.full(n, -np.inf)
            upper = np.full(n, np.inf)
            for j, v in self._lower.items():
                lower[j] = v
            for j, v in self._upper.items():
                upper[j] = v
        row_names = [""] * m
        for name, (r, _, _) in self._linear.items():
            row_names[r] = name
        program = ConicProgram(
            c=c, A=A, b=b, cones=cones,
            integer_marks=frozenset(self._integer),
            lower=lower, upper=upper,
            var_names=tuple(self._names) if names else None,
            row_names=tuple(row_names) if names else None,
        )
        index = ProgramIndex(
            variables=dict(self._index),
            structural=tuple(self._structural),
            linear=dict(self._linear),
            cones=dict(self._cones),
        )
        return program, index
