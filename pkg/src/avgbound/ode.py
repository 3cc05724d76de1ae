"""Explicit Runge-Kutta integration with dense output and domain guards.

Two methods are available: classical RK4 with a fixed step and the
Runge-Kutta-Fehlberg 4(5) pair with adaptive steps.  Both store the state
and its derivative at every node, and dense output between nodes is cubic
Hermite interpolation.

A ``guard(t, y) -> bool`` marks the admissible region.  When an accepted
step lands outside it (or a stage evaluation fails) the crossing is
bracketed by bisection on the step length and the trajectory stops at the
last admissible point with ``status == "domain_violation"``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import StiffnessError

__all__ = ["IntegratorConfig", "Trajectory", "integrate", "integrate_linear_matrix", "OPEN_END", "DET_FLOOR"]

#: relative shrink applied to open right endpoints ``[t0, t1)``
OPEN_END = 1e-12
DET_FLOOR = 1e-12
BISECT_REL_WIDTH = 1e-10


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "rkf45"
    step: Optional[float] = None
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    initial_step: Optional[float] = None
    max_step: Optional[float] = None
    max_steps: int = 10_000_000

    def __post_init__(self):
        if self.method not in ("rk4", "rkf45"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.method == "rk4" and (self.step is None or not self.step > 0):
            raise ValueError("rk4 needs a positive step")
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        for name in ("initial_step", "max_step"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise ValueError(f"{name} must be positive")


class Trajectory:
    """Nodes ``(t_k, y_k, y'_k)`` with cubic Hermite dense output.

    Calling the trajectory with a scalar returns a state of shape
    ``state_shape``; with an array of times it returns ``(n,) + state_shape``.
    """

    def __init__(self, t, y, dy, state_shape=None, status="completed", t_event=None,
                 y_event=None, message="", warnings=()):
        self.t = np.asarray(t, dtype=float)
        n = len(self.t)
        self.state_shape = tuple(state_shape) if state_shape is not None else np.shape(y)[1:]
        self.y = np.asarray(y, dtype=float).reshape((n,) + self.state_shape)
        self.dy = np.asarray(dy, dtype=float).reshape((n,) + self.state_shape)
        self.status = status
        self.t_event = t_event
        self.y_event = y_event
        self.message = message
        self.warnings = list(warnings)

    @property
    def t0(self):
        return float(self.t[0])

    @property
    def t_end(self):
        return float(self.t[-1])

    def __len__(self):
        return len(self.t)

    def __call__(self, tq):
        scalar = np.ndim(tq) == 0
        tq = np.atleast_1d(np.asarray(tq, dtype=float))
        t = self.t
        span = t[-1] - t[0]
        slack = 1e-12 * max(span, 1.0)
        if np.any(tq < t[0] - slack) or np.any(tq > t[-1] + slack):
            raise ValueError(f"time outside trajectory range [{t[0]}, {t[-1]}]")
        if len(t) == 1:
            out = np.broadcast_to(self.y[0], tq.shape + self.state_shape).copy()
            return out[0] if scalar else out
        k = np.clip(np.searchsorted(t, tq, side="right") - 1, 0, len(t) - 2)
        h = t[k + 1] - t[k]
        s = (tq - t[k]) / h
        s2, s3 = s * s, s * s * s
        h00 = 2 * s3 - 3 * s2 + 1
        h10 = s3 - 2 * s2 + s
        h01 = -2 * s3 + 3 * s2
        h11 = s3 - s2
        ex = (slice(None),) + (None,) * len(self.state_shape)
        out = (h00[ex] * self.y[k] + (h10 * h)[ex] * self.dy[k]
               + h01[ex] * self.y[k + 1] + (h11 * h)[ex] * self.dy[k + 1])
        exact = s == 0.0
        if exact.any():
            out[exact] = self.y[k[exact]]
        return out[0] if scalar else out


# Fehlberg 4(5) tableau
_C = np.array([0.0, 1 / 4, 3 / 8, 12 / 13, 1.0, 1 / 2])
_A = [
    [],
    [1 / 4],
    [3 / 32, 9 / 32],
    [1932 / 2197, -7200 / 2197, 7296 / 2197],
    [439 / 216, -8.0, 3680 / 513, -845 / 4104],
    [-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40],
]
_B5 = np.array([16 / 135, 0.0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55])
_B4 = np.array([25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0])
_E = _B5 - _B4


def _rk4_step(f, t, y, k1, h):
    k2 = f(t + 0.5 * h, y + (0.5 * h) * k1)
    k3 = f(t + 0.5 * h, y + (0.5 * h) * k2)
    k4 = f(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _rkf45_step(f, t, y, k1, h):
    ks = [k1]
    for i in range(1, 6):
        acc = y.copy()
        for j, a in enumerate(_A[i]):
            if a:
                acc += (h * a) * ks[j]
        ks.append(f(t + _C[i] * h, acc))
    K = np.array(ks)
    y5 = y + h * (_B5 @ K)
    err = h * (_E @ K)
    return y5, err


class _Failed(Exception):
    pass


def _safe(f, guard):
    """Wrap rhs/guard so any failure or non-finite value becomes ``_Failed``."""

    def rhs(t, y):
        try:
            val = np.asarray(f(t, y), dtype=float)
        except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            raise _Failed(str(exc)) from exc
        if not np.all(np.isfinite(val)):
            raise _Failed("non-finite derivative")
        return val

    def ok(t, y):
        if not np.all(np.isfinite(y)):
            return False
        if guard is None:
            return True
        try:
            return bool(guard(t, y))
        except (ArithmeticError, ValueError):
            return False

    return rhs, ok


def integrate(rhs: Callable, y0, t_span, cfg: IntegratorConfig = IntegratorConfig(),
              guard: Optional[Callable] = None, open_end: bool = True) -> Trajectory:
    """Integrate ``y' = rhs(t, y)`` from ``t_span[0]`` towards ``t_span[1]``.

    With ``open_end`` the target is ``t1 - 1e-12 (t1 - t0)`` so that a
    half-open interval is never evaluated at its right end.  ``y0`` may have
    any shape; ``rhs`` receives and returns arrays of that shape.
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t1 > t0:
        raise ValueError("t_span must satisfy t1 > t0")
    y0 = np.asarray(y0, dtype=float)
    shape = y0.shape
    y0 = y0.ravel().copy()
    span = t1 - t0
    T = t1 - OPEN_END * span if open_end else t1

    def flat_rhs(t, y):
        return np.asarray(rhs(t, y.reshape(shape)), dtype=float).ravel()

    def flat_guard(t, y):
        return guard(t, y.reshape(shape))

    f, ok = _safe(flat_rhs, flat_guard if guard is not None else None)
    if not ok(t0, y0):
        return Trajectory([t0], [y0], [np.zeros_like(y0)], shape, status="domain_violation",
                          t_event=t0, y_event=y0.reshape(shape), message="initial state violates guard")
    try:
        k0 = f(t0, y0)
    except _Failed as exc:
        return Trajectory([t0], [y0], [np.zeros_like(y0)], shape, status="domain_violation",
                          t_event=t0, message=f"rhs failed at initial state: {exc}")
    if cfg.method == "rk4":
        return _integrate_rk4(f, ok, t0, T, y0, k0, cfg, span, shape)
    return _integrate_rkf45(f, ok, t0, T, y0, k0, cfg, span, shape)


def _bisect(step, ok, t, y, h, width):
    """Largest admissible sub-step in ``[0, h]``; returns (lo, hi, y_lo, y_hi)."""
    lo, hi = 0.0, h
    y_lo, y_hi = y, None
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        try:
            ym = step(mid)
            good = ok(t + mid, ym)
        except _Failed:
            ym, good = None, False
        if good:
            lo, y_lo = mid, ym
        else:
            hi, y_hi = mid, ym
    return lo, hi, y_lo, y_hi


def _finish_violation(ts, ys, dys, f, t, y, lo, hi, y_lo, y_hi, shape, msg):
    if lo > 0.0:
        try:
            ts.append(t + lo)
            ys.append(y_lo)
            dys.append(f(t + lo, y_lo))
        except _Failed:
            ts.pop()
            ys.pop()
    return Trajectory(ts, ys, dys, shape, status="domain_violation", t_event=t + hi,
                      y_event=None if y_hi is None else y_hi.reshape(shape), message=msg)


def _integrate_rk4(f, ok, t0, T, y0, k0, cfg, span, shape):
    n = max(1, math.ceil((T - t0) / cfg.step - 1e-9))
    if n > cfg.max_steps:
        n_run, status = cfg.max_steps, "step_limit"
    else:
        n_run, status = n, "completed"
    h = (T - t0) / n
    ts = np.empty(n_run + 1)
    ys = np.empty((n_run + 1, y0.size))
    dys = np.empty_like(ys)
    ts[0], ys[0], dys[0] = t0, y0, k0
    y, k1 = y0, k0
    width = BISECT_REL_WIDTH * span
    for i in range(n_run):
        t = t0 + i * h
        t_next = t0 + (i + 1) * h if i + 1 < n else T
        hh = t_next - t
        try:
            y_new = _rk4_step(f, t, y, k1, hh)
            good = ok(t_next, y_new)
            k_new = f(t_next, y_new) if good else None
        except _Failed:
            good = False
        if not good:
            lo, hi, y_lo, y_hi = _bisect(lambda s: _rk4_step(f, t, y, k1, s), ok, t, y, hh, width)
            return _finish_violation(list(ts[:i + 1]), list(ys[:i + 1]), list(dys[:i + 1]), f, t, y,
                                     lo, hi, y_lo, y_hi, shape, "guard violated")
        y, k1 = y_new, k_new
        ts[i + 1], ys[i + 1], dys[i + 1] = t_next, y, k1
    return Trajectory(ts, ys, dys, shape, status=status)


def _integrate_rkf45(f, ok, t0, T, y0, k0, cfg, span, shape):
    atol, rtol = cfg.abs_tol, cfg.rel_tol
    max_step = cfg.max_step if cfg.max_step is not None else (T - t0)
    if cfg.initial_step is not None:
        h = cfg.initial_step
    else:
        scale = atol + rtol * np.abs(y0)
        d0 = np.max(np.abs(y0) / scale)
        d1 = np.max(np.abs(k0) / scale)
        h = 0.01 * d0 / d1 if d0 > 1e-5 and d1 > 1e-5 else 1e-6 * span
        h = min(h, max_step, T - t0)
    ts, ys, dys = [t0], [y0], [k0]
    t, y, k1 = t0, y0, k0
    width = BISECT_REL_WIDTH * span
    retries = 0
    while t < T:
        if len(ts) > cfg.max_steps:
            return Trajectory(ts, ys, dys, shape, status="step_limit", message="max_steps reached")
        h = min(h, max_step, T - t)
        last = t + h >= T
        if h <= 16 * np.finfo(float).eps * max(abs(t), 1.0):
            partial = Trajectory(ts, ys, dys, shape, status="step_limit", message="step underflow")
            raise StiffnessError(f"step size underflow at t={t!r}", t_last=t, partial=partial)
        try:
            y_new, err = _rkf45_step(f, t, y, k1, h)
            stage_ok = True
        except _Failed:
            stage_ok = False
        if not stage_ok:
            # stage left the domain: shrink a few times before localizing
            if retries < 3:
                retries += 1
                h *= 0.25
                continue
            lo, hi, y_lo, y_hi = _bisect(lambda s: _rkf45_step(f, t, y, k1, s)[0], ok, t, y, h, width)
            return _finish_violation(ts, ys, dys, f, t, y, lo, hi, y_lo, y_hi, shape,
                                     "rhs undefined ahead of trajectory")
        sc = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        en = float(np.max(np.abs(err) / sc))
        if en > 1.0:
            h *= max(0.2, 0.9 * en ** -0.2)
            continue
        t_new = T if last else t + h
        good = ok(t_new, y_new)
        if good:
            try:
                k_new = f(t_new, y_new)
            except _Failed:
                good = False
        if not good:
            lo, hi, y_lo, y_hi = _bisect(lambda s: _rkf45_step(f, t, y, k1, s)[0], ok, t, y, h, width)
            return _finish_violation(ts, ys, dys, f, t, y, lo, hi, y_lo, y_hi, shape, "guard violated")
        retries = 0
        t, y, k1 = t_new, y_new, k_new
        ts.append(t)
        ys.append(y)
        dys.append(k1)
        h *= min(5.0, 0.9 * en ** -0.2) if en > 0 else 5.0
    return Trajectory(ts, ys, dys, shape, status="completed")


def integrate_linear_matrix(A_of_tau: Callable, t_span, cfg: IntegratorConfig = IntegratorConfig(),
                            d: Optional[int] = None, det_floor: float = DET_FLOOR,
                            open_end: bool = True) -> Trajectory:
    """Fundamental matrix of ``R' = A(t) R`` with ``R(t0) = 1``.

    Invertibility is monitored through ``|det R|`` at the nodes; if it drops
    below ``det_floor`` a near-singular warning is attached to the result.
    """
    if d is None:
        d = np.shape(A_of_tau(float(t_span[0])))[0]
    traj = integrate(lambda t, R: A_of_tau(t) @ R, np.eye(d), t_span, cfg, open_end=open_end)
    dets = np.abs(np.linalg.det(traj.y))
    if np.any(dets <= det_floor):
        k = int(np.argmax(dets <= det_floor))
        traj.warnings.append(f"near-singular fundamental matrix: |det R| <= {det_floor:g} at t={traj.t[k]:.6g}")
    return traj
