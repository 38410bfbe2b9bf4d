"""
Conic optimisation module

Standard-form conic programs and a primal-dual interior-point solver with
Nesterov-Todd scaling and Mehrotra predictor-corrector steps:

    min  c'x   s.t.  A x = b,  x in K = K_1 x ... x K_p

    max  b'y   s.t.  A'y + z = c,  z in K*

Each K_j is the free cone, the non-negative orthant, the second-order cone
{(t, s): t >= ||s||} or the rotated cone {(u, v, w): 2uv >= ||w||^2,
u, v >= 0}. All cones used here are self-dual (the free cone's dual is {0}).

Before the interior-point loop, optional variable bounds are lowered into
rows, variables pinned by bounds or by singleton / forcing rows are removed,
and the remaining problem is equilibrated. Solutions are mapped back with
consistent duals for the removed rows.
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import FrozenSet, Optional, Tuple

import numpy as np
import scipy.linalg

from config.settings import (
    DIVERGENCE_LIMIT,
    EQUILIBRATION_PASSES,
    FEAS_TOL,
    GAP_TOL,
    INFEASIBILITY_TOL,
    KKT_REGULARIZATION,
    MAX_ITERATIONS,
    MIN_STEP,
    PHASE_ONE_TOL,
    PHASE_ONE_WEIGHT,
    PRESOLVE_TOL,
    REFINEMENT_STEPS,
    STEP_FRACTION,
)
from errors import ConicError

logger = logging.getLogger(__name__)

_SQRT2 = np.sqrt(2.0)


class ConeKind(str, Enum):
    FREE = "free"
    NONNEGATIVE = "nonnegative"
    SOC = "soc"
    ROTATED_SOC = "rotated-soc"


_MIN_SIZE = {ConeKind.FREE: 1, ConeKind.NONNEGATIVE: 1, ConeKind.SOC: 2, ConeKind.ROTATED_SOC: 3}


@dataclass(frozen=True)
class ConeBlock:
    kind: ConeKind
    start: int
    size: int

    @property
    def stop(self):
        return self.start + self.size

    @property
    def indices(self):
        return np.arange(self.start, self.stop)


class SolveStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERICAL_FAILURE = "numerical-failure"


TERMINATION_MESSAGES = {
    SolveStatus.OPTIMAL: "Optimal solution found.",
    SolveStatus.INFEASIBLE: "Problem is primal infeasible.",
    SolveStatus.UNBOUNDED: "Problem is unbounded (dual infeasible).",
    SolveStatus.NUMERICAL_FAILURE: "Iteration stopped before convergence.",
}


@dataclass
class ConicProgram:
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    cones: Tuple[ConeBlock, ...]
    integer_marks: FrozenSet[int] = frozenset()
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    var_names: Optional[Tuple[str, ...]] = None
    row_names: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        self.b = np.asarray(self.b, dtype=float).ravel()
        self.A = np.asarray(self.A, dtype=float).reshape(len(self.b), len(self.c))
        self.cones = tuple(self.cones)
        self.integer_marks = frozenset(int(j) for j in self.integer_marks)
        if self.lower is not None:
            self.lower = np.asarray(self.lower, dtype=float).ravel()
        if self.upper is not None:
            self.upper = np.asarray(self.upper, dtype=float).ravel()
        self.validate()

    @property
    def n_vars(self):
        return len(self.c)

    @property
    def n_rows(self):
        return len(self.b)

    def validate(self):
        """Check shapes, finiteness and that the cones partition the variables"""
        n = self.n_vars
        if not (np.all(np.isfinite(self.c)) and np.all(np.isfinite(self.A)) and np.all(np.isfinite(self.b))):
            raise ConicError("program data must be finite")
        position = 0
        for block in sorted(self.cones, key=lambda blk: blk.start):
            if block.start != position:
                raise ConicError(f"cone blocks do not partition the variables at index {position}")
            if block.size < _MIN_SIZE[block.kind]:
                raise ConicError(f"{block.kind.value} block at {block.start} is too small ({block.size})")
            position = block.stop
        if position != n:
            raise ConicError(f"cone blocks cover {position} of {n} variables")
        kinds = self.variable_kinds()
        for j in self.integer_marks:
            if not 0 <= j < n:
                raise ConicError(f"integer mark {j} out of range")
        for bounds in (self.lower, self.upper):
            if bounds is None:
                continue
            if bounds.shape != (n,):
                raise ConicError("bounds must have one entry per variable")
            finite = np.isfinite(bounds)
            for j in np.flatnonzero(finite):
                if kinds[j] not in (ConeKind.FREE, ConeKind.NONNEGATIVE):
                    raise ConicError(f"bounds on cone variable {j} are not supported")
        if self.var_names is not None and len(self.var_names) != n:
            raise ConicError("var_names length mismatch")

    def variable_kinds(self):
        kinds = [None] * self.n_vars
        for block in self.cones:
            for j in range(block.start, block.stop):
                kinds[j] = block.kind
        return kinds

    def bounds(self):
        n = self.n_vars
        lower = self.lower.copy() if self.lower is not None else np.full(n, -np.inf)
        upper = self.upper.copy() if self.upper is not None else np.full(n, np.inf)
        return lower, upper

    def with_bounds(self, changes):
        """Copy with some variable bounds replaced: {index: (lower, upper)}"""
        lower, upper = self.bounds()
        for j, (lo, hi) in changes.items():
            lower[j] = lo
            upper[j] = hi
        return replace(self, lower=lower, upper=upper)

    def relaxed(self):
        """Continuous relaxation (integrality marks dropped)"""
        return replace(self, integer_marks=frozenset())


@dataclass
class SolverSettings:
    gap_tol: float = GAP_TOL
    feas_tol: float = FEAS_TOL
    infeasibility_tol: float = INFEASIBILITY_TOL
    max_iterations: int = MAX_ITERATIONS
    regularization: float = KKT_REGULARIZATION
    step_fraction: float = STEP_FRACTION
    refinement_steps: int = REFINEMENT_STEPS
    equilibrate: bool = True
    verbose: bool = False


@dataclass
class ConicSolution:
    status: SolveStatus
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    objective_value: float
    gap: float
    kkt_residual: float
    iterations: int = 0
    dual_objective: float = np.nan
    bound_duals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    message: str = ""

    @property
    def is_optimal(self):
        return self.status is SolveStatus.OPTIMAL


@dataclass
class KktReport:
    stationarity: float
    primal_residual: float
    complementarity: float
    primal_cone_margin: float
    dual_cone_margin: float


# ---------------------------------------------------------------------------
# Cone algebra
# ---------------------------------------------------------------------------

def _soc_det(x):
    norm = np.linalg.norm(x[1:])
    return (x[0] - norm) * (x[0] + norm)


def _soc_product(a, b):
    out = np.empty_like(a)
    out[0] = a @ b
    out[1:] = a[0] * b[1:] + b[0] * a[1:]
    return out


def _soc_divide(lam, r):
    """Solve lam o u = r for u"""
    det = _soc_det(lam)
    u = np.empty_like(r)
    u[0] = (lam[0] * r[0] - lam[1:] @ r[1:]) / det
    u[1:] = (r[1:] - u[0] * lam[1:]) / lam[0]
    return u


def _soc_max_step(x, d):
    """Largest alpha with x + alpha d in the second-order cone"""
    a = d[0] * d[0] - d[1:] @ d[1:]
    b = 2.0 * (x[0] * d[0] - x[1:] @ d[1:])
    c = _soc_det(x)
    roots = []
    if d[0] < 0:
        roots.append(-x[0] / d[0])
    scale = d @ d
    if abs(a) <= 1e-14 * scale:
        if b < 0:
            roots.append(-c / b)
    else:
        disc = b * b - 4.0 * a * c
        if disc >= 0:
            q = -0.5 * (b + np.copysign(np.sqrt(disc), b))
            if a != 0:
                roots.append(q / a)
            if q != 0:
                roots.append(c / q)
    positive = [r for r in roots if r > 0]
    return min(positive) if positive else np.inf


def _soc_scaling(x, z):
    """Nesterov-Todd scaling W (symmetric), its inverse and lambda = W z"""
    xn = np.sqrt(_soc_det(x))
    zn = np.sqrt(_soc_det(z))
    xb = x / xn
    zb = z / zn
    gamma = np.sqrt((1.0 + xb @ zb) / 2.0)
    jz = zb.copy()
    jz[1:] = -jz[1:]
    wb = (xb + jz) / (2.0 * gamma)
    beta = np.sqrt(xn / zn)
    v = wb.copy()
    v[0] += 1.0
    v /= np.sqrt(2.0 * (wb[0] + 1.0))
    J = np.eye(len(x))
    J[1:, 1:] *= -1.0
    jv = J @ v
    W = beta * (2.0 * np.outer(v, v) - J)
    Winv = (2.0 * np.outer(jv, jv) - J) / beta
    return W, Winv, W @ z


def _reflect(x):
    """Orthogonal map between rotated and plain second-order coordinates"""
    y = np.array(x, dtype=float)
    y[0] = (x[0] + x[1]) / _SQRT2
    y[1] = (x[0] - x[1]) / _SQRT2
    return y


class _Orthant:
    def __init__(self, idx):
        self.idx = idx
        self.degree = len(idx)

    def identity(self):
        return np.ones(len(self.idx))

    def scaling(self, x, z):
        d = np.sqrt(x / z)
        return np.diag(d), np.diag(1.0 / d), np.sqrt(x * z)

    def product(self, a, b):
        return a * b

    def divide(self, lam, r):
        return r / lam

    def max_step(self, x, d):
        neg = d < 0
        if not np.any(neg):
            return np.inf
        return float(np.min(-x[neg] / d[neg]))

    def margin(self, x):
        return float(np.min(x))


class _SecondOrder:
    def __init__(self, idx):
        self.idx = idx
        self.degree = 1

    def identity(self):
        e = np.zeros(len(self.idx))
        e[0] = 1.0
        return e

    def scaling(self, x, z):
        return _soc_scaling(x, z)

    def product(self, a, b):
        return _soc_product(a, b)

    def divide(self, lam, r):
        return _soc_divide(lam, r)

    def max_step(self, x, d):
        return _soc_max_step(x, d)

    def margin(self, x):
        return float(x[0] - np.linalg.norm(x[1:]))


class _RotatedSecondOrder(_SecondOrder):
    """2uv >= ||w||^2 handled through the reflection onto the plain cone"""

    def identity(self):
        return _reflect(super().identity())

    def scaling(self, x, z):
        W, Winv, lam = _soc_scaling(_reflect(x), _reflect(z))
        Q = np.eye(len(x))
        Q[:2, :2] = np.array([[1.0, 1.0], [1.0, -1.0]]) / _SQRT2
        return Q @ W @ Q, Q @ Winv @ Q, _reflect(lam)

    def product(self, a, b):
        return _reflect(_soc_product(_reflect(a), _reflect(b)))

    def divide(self, lam, r):
        return _reflect(_soc_divide(_reflect(lam), _reflect(r)))

    def max_step(self, x, d):
        return _soc_max_step(_reflect(x), _reflect(d))

    def margin(self, x):
        return super().margin(_reflect(x))


_CONE_CLASSES = {
    ConeKind.NONNEGATIVE: _Orthant,
    ConeKind.SOC: _SecondOrder,
    ConeKind.ROTATED_SOC: _RotatedSecondOrder,
}


# ---------------------------------------------------------------------------
# Bounds, fixed-variable removal and scaling
# ---------------------------------------------------------------------------

@dataclass
class _Expanded:
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    kinds: list
    blocks: list                 # (kind, index array) per non-free cone block
    fixed: dict                  # variables pinned by equal bounds
    bound_rows: list             # (row, variable) pairs for bound rows
    n_orig: int
    m_orig: int
    infeasible: bool = False


def _expand_bounds(p, tol):
    n, m = p.n_vars, p.n_rows
    kinds = p.variable_kinds()
    lower, upper = p.bounds()
    fixed = {}
    rows = []
    infeasible = False
    for j in range(n):
        lo, hi = lower[j], upper[j]
        if lo > hi + tol * (1.0 + abs(hi)):
            infeasible = True
            continue
        nonneg = kinds[j] is ConeKind.NONNEGATIVE
        if nonneg and hi < -tol:
            infeasible = True
            continue
        if np.isfinite(lo) and np.isfinite(hi) and hi - lo <= tol * (1.0 + abs(lo)):
            fixed[j] = max(lo, 0.0) if nonneg else lo
            continue
        if np.isfinite(lo) and (not nonneg or lo > 0):
            rows.append((j, lo, -1.0))
        if np.isfinite(hi):
            rows.append((j, hi, 1.0))

    k = len(rows)
    A = np.zeros((m + k, n + k))
    A[:m, :n] = p.A
    b = np.concatenate([p.b, np.zeros(k)])
    bound_rows = []
    for r, (j, value, slack_sign) in enumerate(rows):
        A[m + r, j] = 1.0
        A[m + r, n + r] = slack_sign
        b[m + r] = value
        bound_rows.append((m + r, j))
    c = np.concatenate([p.c, np.zeros(k)])
    kinds = list(kinds) + [ConeKind.NONNEGATIVE] * k
    blocks = [(blk.kind, blk.indices) for blk in p.cones if blk.kind is not ConeKind.FREE]
    if k:
        blocks.append((ConeKind.NONNEGATIVE, np.arange(n, n + k)))
    return _Expanded(c, A, b, kinds, blocks, fixed, bound_rows, n, m, infeasible)


@dataclass
class _Reduced:
    cols: np.ndarray
    rows: np.ndarray
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    cones: list
    free: np.ndarray
    fixed: dict
    removed: list                # (row, rule, columns) in removal order
    unconstrained: list = field(default_factory=list)
    status: Optional[SolveStatus] = None


def _presolve(ex, tol):
    """Remove variables pinned by bounds, singleton rows and forcing rows"""
    A, b, kinds = ex.A, ex.b, ex.kinds
    n = A.shape[1]
    fixed = dict(ex.fixed)
    active = list(range(A.shape[0]))
    removed = []
    scalar = (ConeKind.FREE, ConeKind.NONNEGATIVE)

    changed = True
    while changed:
        changed = False
        for r in list(active):
            nz = np.flatnonzero(A[r])
            rhs = b[r] - sum(A[r, j] * fixed[j] for j in nz if j in fixed)
            cols = [j for j in nz if j not in fixed]
            scale = tol * (1.0 + abs(b[r]) + sum(abs(A[r, j] * fixed[j]) for j in nz if j in fixed))
            if not cols:
                if abs(rhs) > scale:
                    return None
                removed.append((r, "empty", []))
                active.remove(r)
                changed = True
            elif len(cols) == 1 and kinds[cols[0]] in scalar:
                j = cols[0]
                value = rhs / A[r, j]
                if kinds[j] is ConeKind.NONNEGATIVE:
                    if value < -scale / abs(A[r, j]):
                        return None
                    value = max(value, 0.0)
                fixed[j] = value
                removed.append((r, "singleton", [j]))
                active.remove(r)
                changed = True
            elif all(kinds[j] is ConeKind.NONNEGATIVE for j in cols):
                signs = np.sign(A[r, cols])
                if np.all(signs == signs[0]):
                    if signs[0] * rhs < -scale:
                        return None
                    if abs(rhs) <= scale:
                        for j in cols:
                            fixed[j] = 0.0
                        removed.append((r, "forcing", cols))
                        active.remove(r)
                        changed = True

    rows = np.array(sorted(active), dtype=int)
    keep = np.array([j for j in range(n) if j not in fixed], dtype=int)
    fixed_vec = np.zeros(n)
    for j, value in fixed.items():
        fixed_vec[j] = value
    b_red = b[rows] - A[np.ix_(rows, np.arange(n))] @ fixed_vec if len(rows) else np.zeros(0)

    status = None
    unconstrained = []
    # columns left without rows
    for j in list(keep):
        if len(rows) and np.any(A[rows, j] != 0):
            continue
        if kinds[j] is ConeKind.FREE:
            if ex.c[j] != 0:
                status = SolveStatus.UNBOUNDED
            fixed[j] = 0.0
        elif kinds[j] is ConeKind.NONNEGATIVE:
            if ex.c[j] < 0:
                status = SolveStatus.UNBOUNDED
            fixed[j] = 0.0
        if j in fixed:
            unconstrained.append(j)
    keep = np.array([j for j in range(n) if j not in fixed], dtype=int)

    position = {j: i for i, j in enumerate(keep)}
    cones = []
    for kind, idx in ex.blocks:
        kept = [position[j] for j in idx if j in position]
        if not kept:
            continue
        if kind is ConeKind.NONNEGATIVE:
            cones.append(_Orthant(np.array(kept)))
        else:
            if len(kept) != len(idx):
                raise ConicError("cone block partially fixed")
            cones.append(_CONE_CLASSES[kind](np.array(kept)))
    free = np.array([position[j] for j in keep if kinds[j] is ConeKind.FREE], dtype=int)
    A_red = A[np.ix_(rows, keep)] if len(rows) else np.zeros((0, len(keep)))
    return _Reduced(keep, rows, ex.c[keep], A_red, b_red, cones, free, fixed, removed,
                    unconstrained, status)


class _Scaling:
    """Ruiz equilibration D_r A D_c plus scalar cost and right-hand-side scaling"""

    def __init__(self, red, passes):
        m, n = red.A.shape
        self.dr = np.ones(m)
        self.dc = np.ones(n)
        A = red.A.copy()
        groups = [cone.idx for cone in red.cones if not isinstance(cone, _Orthant)]
        for _ in range(passes if m and n else 0):
            row = np.max(np.abs(A), axis=1)
            row[row == 0] = 1.0
            col = np.max(np.abs(A), axis=0)
            col[col == 0] = 1.0
            for idx in groups:
                col[idx] = np.max(col[idx])
            r = 1.0 / np.sqrt(row)
            s = 1.0 / np.sqrt(col)
            A = r[:, None] * A * s[None, :]
            self.dr *= r
            self.dc *= s
        self.A = A
        c = self.dc * red.c
        self.sc = max(1.0, float(np.max(np.abs(c)))) if n else 1.0
        self.c = c / self.sc
        bb = self.dr * red.b
        self.sb = max(1.0, float(np.max(np.abs(bb)))) if m else 1.0
        self.b = bb / self.sb

    def unscale(self, x, y, z):
        return self.sb * self.dc * x, self.sc * self.dr * y, self.sc * z / self.dc


# ---------------------------------------------------------------------------
# Interior-point iteration
# ---------------------------------------------------------------------------

class _KktFactor:
    """LDL' factorisation of the regularised quasi-definite KKT matrix"""

    def __init__(self, K):
        lu, d, perm = scipy.linalg.ldl(K, lower=True)
        self._tri = lu[perm]
        self._perm = perm
        self._dinv = _block_inverse(d)

    def solve(self, rhs):
        u = scipy.linalg.solve_triangular(self._tri, rhs[self._perm], lower=True)
        v = self._dinv @ u
        w = scipy.linalg.solve_triangular(self._tri, v, lower=True, trans="T")
        out = np.empty_like(w)
        out[self._perm] = w
        return out


def _block_inverse(d):
    """Inverse of the 1x1 / 2x2 block-diagonal pivot matrix from ldl"""
    size = d.shape[0]
    dinv = np.zeros_like(d)
    i = 0
    while i < size:
        if i + 1 < size and d[i + 1, i] != 0.0:
            a, b, c, e = d[i, i], d[i, i + 1], d[i + 1, i], d[i + 1, i + 1]
            det = a * e - b * c
            if det == 0.0 or not np.isfinite(det):
                raise np.linalg.LinAlgError(f"singular 2x2 pivot at {i}")
            dinv[i:i + 2, i:i + 2] = np.array([[e, -b], [-c, a]]) / det
            i += 2
        else:
            if d[i, i] == 0.0:
                raise np.linalg.LinAlgError(f"zero pivot at {i}")
            dinv[i, i] = 1.0 / d[i, i]
            i += 1
    return dinv


def _max_step(cones, v, dv):
    step = np.inf
    for cone in cones:
        step = min(step, cone.max_step(v[cone.idx], dv[cone.idx]))
    return step


@dataclass
class _IpmResult:
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    status: SolveStatus
    iterations: int
    gap: float


def _interior_point(red, sc, settings):
    A, b, c = sc.A, sc.b, sc.c
    m, n = A.shape
    cones = red.cones
    x = np.zeros(n)
    z = np.zeros(n)
    for cone in cones:
        x[cone.idx] = cone.identity()
        z[cone.idx] = cone.identity()
    y = np.zeros(m)
    nu = max(1, sum(cone.degree for cone in cones))
    delta = settings.regularization

    b_orig = np.abs(red.b).max() if m else 0.0
    c_orig = np.abs(red.c).max() if n else 0.0
    status = SolveStatus.NUMERICAL_FAILURE
    gap = np.inf
    it = 0
    log = logger.info if settings.verbose else logger.debug

    for it in range(settings.max_iterations + 1):
        rp = b - A @ x
        rd = c - A.T @ y - z
        xz = float(x @ z)
        pobj = float(c @ x)

        # termination tests on unscaled quantities
        pres = float(np.max(np.abs(sc.sb * rp / sc.dr))) / (1.0 + b_orig) if m else 0.0
        dres = float(np.max(np.abs(sc.sc * rd / sc.dc))) / (1.0 + c_orig) if n else 0.0
        gap = sc.sb * sc.sc * abs(xz) / max(1.0, abs(sc.sb * sc.sc * pobj))
        log("%3d  pobj=% .8e  dobj=% .8e  gap=%.2e  pres=%.2e  dres=%.2e",
            it, sc.sb * sc.sc * pobj, sc.sb * sc.sc * float(b @ y), gap, pres, dres)
        if pres <= settings.feas_tol and dres <= settings.feas_tol and gap <= settings.gap_tol:
            status = SolveStatus.OPTIMAL
            break
        certificate = _certificate(A, b, c, x, y, z, settings.infeasibility_tol)
        if it > 0 and certificate is not None:
            status = certificate
            break
        if it == settings.max_iterations:
            break
        if max(np.max(np.abs(x), initial=0), np.max(np.abs(z), initial=0),
               np.max(np.abs(y), initial=0)) > DIVERGENCE_LIMIT:
            status = _certificate(A, b, c, x, y, z, 1e-5) or SolveStatus.NUMERICAL_FAILURE
            break

        mu = xz / nu
        try:
            scal = [cone.scaling(x[cone.idx], z[cone.idx]) for cone in cones]
            H = np.zeros((n, n))
            for cone, (W, Winv, lam) in zip(cones, scal):
                H[np.ix_(cone.idx, cone.idx)] = Winv @ Winv
            K0 = np.block([[-H, A.T], [A, np.zeros((m, m))]])
            K = K0 + np.diag(np.concatenate([-delta * np.ones(n), delta * np.ones(m)]))
            factor = _KktFactor(K)

            def newton(rcs):
                winv_xi = np.zeros(n)
                for cone, (W, Winv, lam), rc in zip(cones, scal, rcs):
                    winv_xi[cone.idx] = Winv @ cone.divide(lam, rc)
                rhs = np.concatenate([rd - winv_xi, rp])
                sol = factor.solve(rhs)
                for _ in range(settings.refinement_steps):
                    res = rhs - K0 @ sol
                    if np.max(np.abs(res)) <= 1e-14 * (1.0 + np.max(np.abs(rhs))):
                        break
                    sol = sol + factor.solve(res)
                dx, dy = sol[:n], sol[n:]
                dz = winv_xi - H @ dx
                if len(red.free):
                    dz[red.free] = 0.0
                return dx, dy, dz

            # predictor
            dxa, dya, dza = newton([-cone.product(lam, lam) for cone, (_, _, lam) in zip(cones, scal)])
            alpha_a = min(1.0, _max_step(cones, x, dxa), _max_step(cones, z, dza))
            sigma = (max(0.0, float((x + alpha_a * dxa) @ (z + alpha_a * dza))) / xz) ** 3 if xz > 0 else 0.0
            sigma = min(1.0, sigma)

            # corrector
            rcs = []
            for cone, (W, Winv, lam) in zip(cones, scal):
                corr = cone.product(Winv @ dxa[cone.idx], W @ dza[cone.idx])
                rcs.append(-cone.product(lam, lam) + sigma * mu * cone.identity() - corr)
            dx, dy, dz = newton(rcs)
            alpha = min(1.0, settings.step_fraction * min(_max_step(cones, x, dx), _max_step(cones, z, dz)))
        except (np.linalg.LinAlgError, FloatingPointError, ValueError) as e:
            logger.debug("KKT solve failed at iteration %d: %s", it, e)
            break
        if not np.isfinite(alpha) or not (np.all(np.isfinite(dx)) and np.all(np.isfinite(dz))):
            break
        if alpha < MIN_STEP:
            status = _certificate(A, b, c, x, y, z, 1e-5) or SolveStatus.NUMERICAL_FAILURE
            break
        x = x + alpha * dx
        y = y + alpha * dy
        z = z + alpha * dz

    return _IpmResult(x, y, z, status, it, gap)


def _certificate(A, b, c, x, y, z, tol):
    """Farkas-type certificates from the current iterate"""
    by = float(b @ y)
    if by > 0 and np.max(np.abs(A.T @ y + z), initial=0.0) <= tol * by:
        return SolveStatus.INFEASIBLE
    cx = float(c @ x)
    if cx < 0 and np.max(np.abs(A @ x), initial=0.0) <= tol * abs(cx):
        return SolveStatus.UNBOUNDED
    return None


def _phase_one(red, sc, settings):
    """
    Feasibility check for a stalled solve

    Solves min s + eta * e'x  s.t.  A x + s r0 = b,  x in K,  s >= 0 on the
    equilibrated data, where r0 = b - A e and e is the cone identity. The start
    (e, 1) is strictly feasible and y = 0 is strictly dual feasible, so the
    iteration is well posed even when the original problem is not. An optimal
    s clearly above zero proves that no x in K satisfies A x = b.

    Returns:
        SolveStatus.INFEASIBLE, or None when infeasibility is not shown
    """
    A, b = sc.A, sc.b
    m, n = A.shape
    e = np.zeros(n)
    for cone in red.cones:
        e[cone.idx] = cone.identity()
    r0 = b - A @ e
    spread = float(np.max(np.abs(r0), initial=0.0))
    if spread <= settings.feas_tol:
        return None
    c = np.append(PHASE_ONE_WEIGHT * e, 1.0)
    cones = list(red.cones) + [_Orthant(np.array([n]))]
    phase = _Reduced(np.arange(n + 1), np.arange(m), c, np.hstack([A, r0[:, None]]), b.copy(),
                     cones, red.free, {}, [])
    run = _interior_point(phase, _Scaling(phase, 0),
                          replace(settings, max_iterations=max(settings.max_iterations, MAX_ITERATIONS)))
    if run.status is not SolveStatus.OPTIMAL:
        logger.debug("phase-one check ended %s", run.status.value)
        return None
    shortfall = float(run.x[n]) * spread
    logger.debug("phase-one residual %.3e", shortfall)
    return SolveStatus.INFEASIBLE if shortfall > PHASE_ONE_TOL else None


# ---------------------------------------------------------------------------
# Postsolve and public entry points
# ---------------------------------------------------------------------------

def _postsolve(ex, red, x_red, y_red, z_red):
    n_ex, m_ex = ex.A.shape[1], ex.A.shape[0]
    x = np.zeros(n_ex)
    y = np.zeros(m_ex)
    z = np.zeros(n_ex)
    for j, value in red.fixed.items():
        x[j] = value
    x[red.cols] = x_red
    y[red.rows] = y_red
    z[red.cols] = z_red

    for r, rule, cols in reversed(red.removed):
        if rule == "empty":
            y[r] = 0.0
            continue
        rest = {j: ex.c[j] - ex.A[:, j] @ y + ex.A[r, j] * y[r] for j in cols}
        if rule == "singleton":
            j = cols[0]
            y[r] = rest[j] / ex.A[r, j]
        else:
            ratios = [rest[j] / ex.A[r, j] for j in cols]
            y[r] = min(ratios) if ex.A[r, cols[0]] > 0 else max(ratios)
        for j in cols:
            z[j] = rest[j] - ex.A[r, j] * y[r]
    for j in red.unconstrained:
        z[j] = ex.c[j] - ex.A[:, j] @ y

    bound_fixed = set(ex.fixed)
    bound_duals = np.zeros(ex.n_orig)
    for j in bound_fixed:
        bound_duals[j] = ex.c[j] - ex.A[:, j] @ y
        z[j] = 0.0
    for r, j in ex.bound_rows:
        bound_duals[j] += y[r]
    kinds = ex.kinds
    for j in range(n_ex):
        if kinds[j] is ConeKind.FREE:
            z[j] = 0.0
    return x[:ex.n_orig], y[:ex.m_orig], z[:ex.n_orig], bound_duals


def _residuals(p, x, y, z, bound_duals):
    lower, upper = p.bounds()
    pres = np.max(np.abs(p.A @ x - p.b), initial=0.0)
    viol = np.max(np.concatenate([lower - x, x - upper, [0.0]]))
    dres = np.max(np.abs(p.c - p.A.T @ y - z - bound_duals), initial=0.0)
    scale_p = 1.0 + np.max(np.abs(p.b), initial=0.0)
    scale_d = 1.0 + np.max(np.abs(p.c), initial=0.0)
    return max(pres / scale_p, max(viol, 0.0) / scale_p, dres / scale_d)


def _empty_solution(p, status, message=""):
    n, m = p.n_vars, p.n_rows
    return ConicSolution(
        status=status, x=np.full(n, np.nan), y=np.full(m, np.nan), z=np.full(n, np.nan),
        objective_value=np.inf if status is SolveStatus.INFEASIBLE else -np.inf,
        gap=np.inf, kkt_residual=np.inf, bound_duals=np.zeros(n),
        message=message or TERMINATION_MESSAGES[status],
    )


def solve(p, settings=None):
    """
    Solve a conic program with the primal-dual interior-point method

    Integrality marks are ignored (continuous relaxation). When the iteration
    stalls, a phase-one solve decides whether the program is infeasible.

    Args:
        p: ConicProgram
        settings: SolverSettings (defaults from config.settings)

    Returns:
        ConicSolution with status, primal x, row duals y, cone duals z, bound
        multipliers and convergence measures. Non-optimal outcomes carry the
        last iterate.
    """
    settings = settings or SolverSettings()
    ex = _expand_bounds(p, PRESOLVE_TOL)
    if ex.infeasible:
        return _empty_solution(p, SolveStatus.INFEASIBLE, "Inconsistent variable bounds.")
    red = _presolve(ex, PRESOLVE_TOL)
    if red is None:
        return _empty_solution(p, SolveStatus.INFEASIBLE, "Infeasible row found during presolve.")
    if red.status is not None:
        return _empty_solution(p, red.status)
    logger.debug("presolve: %d of %d variables and %d of %d rows remain",
                 len(red.cols), ex.A.shape[1], len(red.rows), ex.A.shape[0])

    if len(red.cols):
        sc = _Scaling(red, EQUILIBRATION_PASSES if settings.equilibrate else 0)
        ipm = _interior_point(red, sc, settings)
        x_red, y_red, z_red = sc.unscale(ipm.x, ipm.y, ipm.z)
        status, iterations, gap = ipm.status, ipm.iterations, ipm.gap
        if status is SolveStatus.NUMERICAL_FAILURE and len(red.rows):
            status = _phase_one(red, sc, settings) or status
    else:
        x_red, y_red, z_red = np.zeros(0), np.zeros(len(red.rows)), np.zeros(0)
        status, iterations, gap = SolveStatus.OPTIMAL, 0, 0.0

    if status in (SolveStatus.INFEASIBLE, SolveStatus.UNBOUNDED):
        return _empty_solution(p, status)

    x, y, z, bound_duals = _postsolve(ex, red, x_red, y_red, z_red)
    objective = float(p.c @ x)
    complementarity = float(x @ z)
    solution = ConicSolution(
        status=status,
        x=x, y=y, z=z,
        objective_value=objective,
        gap=gap,
        kkt_residual=_residuals(p, x, y, z, bound_duals),
        iterations=iterations,
        dual_objective=objective - complementarity,
        bound_duals=bound_duals,
        message=TERMINATION_MESSAGES[status],
    )
    if status is not SolveStatus.OPTIMAL:
        logger.debug("solve stopped after %d iterations: %s", iterations, solution.message)
    return solution


def kkt_report(p, sol):
    """
    Optimality residuals of a solution

    Returns:
        KktReport with the max-norm stationarity residual |c - A'y - z - bound duals|,
        the primal residual |Ax - b|, the complementarity x'z, and the worst
        primal / dual cone margins (negative when outside the cone).
    """
    bound_duals = sol.bound_duals if len(sol.bound_duals) == p.n_vars else np.zeros(p.n_vars)
    stationarity = float(np.max(np.abs(p.c - p.A.T @ sol.y - sol.z - bound_duals), initial=0.0))
    primal = float(np.max(np.abs(p.A @ sol.x - p.b), initial=0.0))
    complementarity = 0.0
    primal_margin = np.inf
    dual_margin = np.inf
    for block in p.cones:
        xs, zs = sol.x[block.indices], sol.z[block.indices]
        if block.kind is ConeKind.FREE:
            dual_margin = min(dual_margin, -float(np.max(np.abs(zs))))
            continue
        cone = _CONE_CLASSES[block.kind](block.indices)
        complementarity += abs(float(xs @ zs))
        primal_margin = min(primal_margin, cone.margin(xs))
        dual_margin = min(dual_margin, cone.margin(zs))
    return KktReport(
        stationarity=stationarity,
        primal_residual=primal,
        complementarity=complementarity,
        primal_cone_margin=float(primal_margin),
        dual_cone_margin=float(dual_margin),
    )


def rotated_dual_components(z_block):
    """
    Map a rotated-cone dual block (z_u, z_v, z_w) of u*v >= w^2 to (mu, lambda1, lambda2)

    The components are those of the standard form ||[u - v; 2w]|| <= u + v,
    so that ||(lambda1, lambda2)|| <= mu is the dual cone condition.
    """
    zu, zv, zw = float(z_block[0]), float(z_block[1]), float(z_block[2])
    return (zu + zv) / 2.0, (zv - zu) / 2.0, -zw / _SQRT2
