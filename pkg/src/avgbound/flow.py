"""Averaged trajectory J, fundamental matrix R and drift K on [0, U).

    dJ/dtau = fbar(J),                 J(0) = I0
    dR/dtau = dfbar/dI(J) R,           R(0) = 1
    dK/dtau = dfbar/dI(J) K + pbar(J), K(0) = 0

``R^{-1}`` is integrated from the adjoint equation rather than inverted
pointwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import AveragedBlowupError
from .ode import IntegratorConfig, Trajectory, integrate, integrate_linear_matrix, OPEN_END

__all__ = ["AveragedFlow", "solve_averaged", "closed_form_flow", "default_flow_config"]


@dataclass(frozen=True)
class AveragedFlow:
    """Evaluable ``J, R, R_inv, K`` on ``[0, U)``.

    Each of the four callables accepts a scalar ``tau`` or an array of them.
    ``U`` is the achieved horizon: when the averaged solution leaves the
    domain at ``exit_time`` it is truncated there.
    """
    U: float
    J: Callable
    R: Callable
    R_inv: Callable
    K: Callable
    source: str = "numeric"
    exit_time: Optional[float] = None
    warnings: tuple = field(default=())

    @property
    def tau_end(self):
        """Largest sampled tau (the open end is never evaluated)."""
        return self.U * (1.0 - OPEN_END)


def default_flow_config(U: float) -> IntegratorConfig:
    return IntegratorConfig(method="rkf45", abs_tol=1e-12, rel_tol=1e-12, max_step=U / 256)


def solve_averaged(sys, U: float, cfg: Optional[IntegratorConfig] = None, strict: bool = True) -> AveragedFlow:
    """Numerically integrate the averaged system and its linearization.

    J is integrated first with the domain guard.  If it leaves the domain
    before ``U``, an :class:`AveragedBlowupError` carrying the exit time and
    the truncated flow is raised (``strict``) or the truncated flow is
    returned.
    """
    if not U > 0:
        raise ValueError("U must be positive")
    if cfg is None:
        cfg = default_flow_config(U)
    d = sys.d
    J = integrate(lambda t, y: sys.f_bar(y), sys.I0, (0.0, U), cfg, guard=lambda t, y: sys.in_domain(y))
    exit_time = None
    U_eff = U
    if J.status == "domain_violation":
        exit_time = J.t_event
        U_eff = J.t_end
    elif J.status != "completed":
        raise RuntimeError(f"averaged integration stopped: {J.status} {J.message}")

    A = lambda tau: np.asarray(sys.df_bar(J(tau)), dtype=float)
    R = integrate_linear_matrix(A, (0.0, U_eff), cfg, d=d, open_end=exit_time is None)

    def adj_rhs(tau, y):
        Jt = J(tau)
        At = np.asarray(sys.df_bar(Jt), dtype=float)
        Rinv = y[: d * d].reshape(d, d)
        K = y[d * d:]
        return np.concatenate([(-Rinv @ At).ravel(), At @ K + np.asarray(sys.p_bar(Jt), dtype=float)])

    y0 = np.concatenate([np.eye(d).ravel(), np.zeros(d)])
    RK = integrate(adj_rhs, y0, (0.0, U_eff), cfg, open_end=exit_time is None)
    R_inv = _slice_traj(RK, slice(0, d * d), (d, d))
    K = _slice_traj(RK, slice(d * d, d * d + d), (d,))
    flow = AveragedFlow(U=U_eff, J=J, R=R, R_inv=R_inv, K=K, source="numeric", exit_time=exit_time,
                        warnings=tuple(R.warnings))
    if exit_time is not None and strict:
        raise AveragedBlowupError(f"averaged solution leaves the domain at tau={exit_time:.12g} < U={U}",
                                  exit_time=exit_time, partial=flow)
    return flow


def _slice_traj(traj: Trajectory, sl, shape):
    return Trajectory(traj.t, traj.y[:, sl], traj.dy[:, sl], shape, status=traj.status)


def closed_form_flow(example_id: str, params, U: Optional[float] = None) -> AveragedFlow:
    """Exact flow of a registered example (see :mod:`avgbound.registry`)."""
    from .registry import get_example

    return get_example(example_id).closed_form_flow(params, U)
