"""
Swing-equation module

Closed-form post-fault frequency dynamics for an outage of size P_L
supported by inertia H and a set of ramped Frequency Response services:

    2H/f0 * d(delta f)/dt = P_L - FR(t)

Each service ramps linearly over (delay, delay + delivery_time] and holds
its amount afterwards, so FR(t) is piecewise linear and the deviation is
piecewise quadratic. Deviations are returned positive below nominal.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp

from config.settings import DEFAULT_TRAJECTORY_STEP, SECURITY_TOL, TRAJECTORY_HORIZON_FACTOR
from errors import FrequencyCollapseError, InsecureStateError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FrRamp:
    name: str
    amount: float
    delivery_time: float
    delay: float = 0.0

    @property
    def completion(self):
        return self.delay + self.delivery_time


@dataclass(frozen=True)
class FrTrajectory:
    ramps: tuple

    @classmethod
    def from_amounts(cls, services, amounts):
        """
        Bind FR amounts to service specs

        Args:
            services: sequence of FrServiceSpec
            amounts: mapping of service name to R_i (MW); missing services deliver 0

        Returns:
            FrTrajectory
        """
        return cls(tuple(
            FrRamp(s.name, float(amounts.get(s.name, 0.0)), s.delivery_time, s.delay)
            for s in services
        ))

    @classmethod
    def from_state(cls, state, services):
        return cls.from_amounts(services, state.fr_amounts)

    @property
    def breakpoints(self):
        """Sorted times where the FR slope can change, starting at 0"""
        times = {0.0}
        for ramp in self.ramps:
            times.add(ramp.delay)
            times.add(ramp.completion)
        return tuple(sorted(times))

    @property
    def total(self):
        return float(sum(r.amount for r in self.ramps))

    @property
    def final_time(self):
        return max((r.completion for r in self.ramps), default=0.0)


@dataclass(frozen=True)
class SecurityReport:
    rocof_at_0: float
    t_nadir: Optional[float]
    nadir_dev: Optional[float]
    qss_ok: bool
    all_ok: bool


def _scalar_or_array(t, values):
    return float(values) if np.ndim(t) == 0 else values


def fr_profile(traj, t):
    """
    Aggregate Frequency Response delivered at time t

    Args:
        traj: FrTrajectory
        t: time after the outage (s), scalar or array

    Returns:
        FR(t) in MW
    """
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    for ramp in traj.ramps:
        out = out + ramp.amount * np.clip((t - ramp.delay) / ramp.delivery_time, 0.0, 1.0)
    return _scalar_or_array(t, out)


def fr_energy(traj, t):
    """Closed-form integral of FR from 0 to t (MW*s)"""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    for ramp in traj.ramps:
        s = np.maximum(t - ramp.delay, 0.0)
        ramping = ramp.amount * s * s / (2.0 * ramp.delivery_time)
        delivered = ramp.amount * (s - ramp.delivery_time / 2.0)
        out = out + np.where(s <= ramp.delivery_time, ramping, delivered)
    return _scalar_or_array(t, out)


def _check_inertia(state):
    if state.inertia <= 0:
        raise InsecureStateError(f"insecure: no post-fault inertia (H={state.inertia:g} MWs)")


def frequency_deviation(state, limits, traj, t):
    """
    Frequency deviation below nominal at time t

    Args:
        state: SystemState (inertia and loss size are used)
        limits: FrequencyLimits
        traj: FrTrajectory
        t: time after the outage (s), scalar or array

    Returns:
        (f0 / 2H) * (P_L * t - integral of FR), in Hz
    """
    _check_inertia(state)
    t = np.asarray(t, dtype=float)
    dev = limits.f0 / (2.0 * state.inertia) * (state.loss_size * t - fr_energy(traj, t))
    return _scalar_or_array(t, dev)


def nadir(state, limits, traj, tol=0.0):
    """
    Time and depth of the frequency nadir

    The nadir is the first instant at which FR(t) reaches P_L; when FR
    equals P_L along a flat stretch the left end of the stretch is used.

    Args:
        state: SystemState
        limits: FrequencyLimits
        traj: FrTrajectory
        tol: shortfall of total FR below P_L still treated as balanced (MW)

    Returns:
        (t_nadir in s, deviation in Hz)
    """
    loss = state.loss_size
    if traj.total < loss - tol:
        raise FrequencyCollapseError(
            f"frequency collapse: total FR {traj.total:.6g} MW below loss {loss:.6g} MW")
    if loss <= 0:
        return 0.0, 0.0

    t_nadir = traj.final_time
    points = traj.breakpoints
    for start, end in zip(points[:-1], points[1:]):
        fr_start = fr_profile(traj, start)
        fr_end = fr_profile(traj, end)
        if fr_end >= loss:
            if fr_end > fr_start:
                t_nadir = start + (loss - fr_start) / (fr_end - fr_start) * (end - start)
                t_nadir = min(max(t_nadir, start), end)
            else:
                t_nadir = start
            break
    return t_nadir, frequency_deviation(state, limits, traj, t_nadir)


def check_security(state, limits, traj, tol=SECURITY_TOL):
    """
    Screen a system state against the RoCoF, nadir and q-s-s limits

    Args:
        state: SystemState
        limits: FrequencyLimits
        traj: FrTrajectory
        tol: absolute slack on every comparison

    Returns:
        SecurityReport; nadir fields are None when frequency collapses
    """
    _check_inertia(state)
    rocof = state.loss_size * limits.f0 / (2.0 * state.inertia)
    qss_ok = traj.total >= state.loss_size - tol
    try:
        t_nadir, dev = nadir(state, limits, traj, tol=tol)
    except FrequencyCollapseError as e:
        logger.info("%s", e)
        t_nadir, dev = None, None
    all_ok = (
        abs(rocof) <= limits.rocof_max + tol
        and qss_ok
        and dev is not None
        and abs(dev) <= limits.delta_f_max + tol
    )
    return SecurityReport(rocof_at_0=rocof, t_nadir=t_nadir, nadir_dev=dev, qss_ok=qss_ok, all_ok=all_ok)


def integrate_deviation(state, limits, traj, times):
    """
    Numerically integrate the swing equation at the given sample times

    Used to cross-check the closed form; the right-hand side depends on t
    only, so a tight-tolerance explicit integrator is exact to round-off.
    """
    _check_inertia(state)
    times = np.asarray(times, dtype=float)
    coef = limits.f0 / (2.0 * state.inertia)
    shortest = min((r.delivery_time for r in traj.ramps), default=1.0)

    def rhs(t, y):
        return [coef * (state.loss_size - fr_profile(traj, t))]

    sol = solve_ivp(rhs, (0.0, float(times[-1])), [0.0], t_eval=times, method="DOP853",
                    rtol=1e-11, atol=1e-12, max_step=shortest / 20.0)
    if not sol.success:
        raise RuntimeError(f"swing integration failed: {sol.message}")
    return sol.y[0]


def trajectory_frame(state, limits, traj, step=DEFAULT_TRAJECTORY_STEP, horizon=None):
    """
    Sampled frequency trajectory

    Args:
        state: SystemState
        limits: FrequencyLimits
        traj: FrTrajectory
        step: sampling step (s)
        horizon: last sample time (s); defaults past the last breakpoint

    Returns:
        DataFrame with columns t_s, freq_dev_hz, fr_mw
    """
    if step <= 0:
        raise ValueError("sampling step must be positive")
    if horizon is None:
        horizon = max(traj.final_time * TRAJECTORY_HORIZON_FACTOR, 1.0)
    count = int(np.ceil(horizon / step - 1e-9))
    times = np.arange(count + 1) * step
    return pd.DataFrame({
        "t_s": times,
        "freq_dev_hz": frequency_deviation(state, limits, traj, times),
        "fr_mw": fr_profile(traj, times),
    })
