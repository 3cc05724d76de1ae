"""Damped rigid body rotating about an axis, in action-angle form.

Actions ``I = (I1, I2)`` on ``(0, inf)^2``, angle ``theta`` with frequency
``omega(I) = I1 I2``::

    f(I, theta) = (-I1 (lambda1 + mu cos 2theta), -I2 (lambda2 - mu cos 2theta))
    g(I, theta) = mu sin 2theta

Admissible parameters satisfy ``lambda1 > 0``, ``-lambda1 < mu < lambda1``
and ``lambda2 > -lambda1``.  The averaged flow is linear,
``J(tau) = (I1_0 e^{-lambda1 tau}, I2_0 e^{-lambda2 tau})``, and every
auxiliary function and estimator has a closed form.  All formulas assume
``theta0 = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, ParameterError
from .flow import AveragedFlow
from .n_operation import EstimatorBundle
from .system import SystemModel

__all__ = [
    "RigidBodyParams",
    "build_system",
    "build_bundle",
    "closed_form_flow",
    "figure_config",
    "FIGURES",
]

FIGURES = {
    "a": dict(mu=1.0, lambda1=2.0, lambda2=-1.0, I0=(4.0, 4.0), epsilon=1e-2, U=1.0),
    "c": dict(mu=1.0, lambda1=1.1, lambda2=-1.0, I0=(4.0, 4.0), epsilon=1e-3, U=3.0),
}
FIGURES["b"] = FIGURES["a"]
FIGURES["d"] = FIGURES["c"]


@dataclass(frozen=True)
class RigidBodyParams:
    mu: float
    lambda1: float
    lambda2: float
    I0: tuple
    epsilon: float
    U: float
    theta0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "I0", tuple(float(x) for x in self.I0))

    def validate(self) -> "RigidBodyParams":
        """Raise :class:`ParameterError` naming the first violated condition."""
        mu, l1, l2 = self.mu, self.lambda1, self.lambda2
        checks = [
            (all(math.isfinite(x) for x in (mu, l1, l2, self.epsilon, self.U, *self.I0)), "finite parameters"),
            (len(self.I0) == 2, "I0 has two entries"),
            (l1 > 0, "lambda1 > 0"),
            (-l1 < mu < l1, "-lambda1 < mu < lambda1"),
            (l2 > -l1, "lambda2 > -lambda1"),
            (all(x > 0 for x in self.I0), "I0 > 0"),
            (self.epsilon > 0, "epsilon > 0"),
            (self.U > 0, "U > 0"),
            (self.theta0 == 0.0, "theta0 = 0"),
        ]
        for ok, cond in checks:
            if not ok:
                raise ParameterError(f"inadmissible rigid body parameters: {cond} fails for {self}", cond)
        return self

    def to_dict(self):
        return {"mu": self.mu, "lambda1": self.lambda1, "lambda2": self.lambda2, "I0": list(self.I0),
                "epsilon": self.epsilon, "U": self.U}


def figure_config(which: str) -> RigidBodyParams:
    """Built-in parameter presets: ``a`` and ``b`` share one run, as do ``c`` and ``d``."""
    try:
        return RigidBodyParams(**FIGURES[which])
    except KeyError:
        raise ConfigError(f"unknown figure {which!r}; expected one of a, b, c, d") from None


def build_system(params: RigidBodyParams) -> SystemModel:
    params.validate()
    mu, l1, l2 = float(params.mu), float(params.lambda1), float(params.lambda2)
    sin, cos = math.sin, math.cos
    zero2 = np.zeros((2, 2))
    zero3 = np.zeros((2, 2, 2))

    def in_domain(I):
        return bool(I[0] > 0 and I[1] > 0)

    def f(I, th):
        c = cos(2 * th)
        return np.array([-I[0] * (l1 + mu * c), -I[1] * (l2 - mu * c)])

    def g(I, th):
        return mu * sin(2 * th)

    def omega(I):
        return I[0] * I[1]

    def f_bar(I):
        return np.array([-l1 * I[0], -l2 * I[1]])

    def df_bar(I):
        return np.array([[-l1, 0.0], [0.0, -l2]])

    def s(I, th):
        k = 0.5 * mu * sin(2 * th)
        return np.array([-k / I[1], k / I[0]])

    def v(I, th):
        k = mu * sin(th) ** 2 / (2 * I[0] * I[1])
        return np.array([-k / I[1], k / I[0]])

    def p(I, th):
        c = cos(2 * th)
        k = 0.5 * mu * sin(2 * th)
        return np.array([-k * (l2 + mu * c) / I[1], k * (l1 + 3 * mu * c) / I[0]])

    def q(I, th):
        c = cos(2 * th)
        k = mu * sin(th) ** 2 / (2 * I[0] * I[1])
        return np.array([-k * (2 * l2 + 2 * mu + l1 + mu * c) / I[1],
                         k * (l2 + 2 * mu + 2 * l1 + 3 * mu * c) / I[0]])

    def w(I, th):
        c2 = cos(th) ** 2
        k = mu * sin(th) ** 2 / (2 * I[0] * I[1])
        return np.array([-k * (l2 + mu * c2) / I[1], k * (l1 + 3 * mu * c2) / I[0]])

    def u(I, th):
        c = cos(2 * th)
        k = mu * sin(th) ** 2 / (4 * I[0] * I[1])
        n1 = (4 * l2**2 + 6 * l2 * mu + 2 * l2 * l1 + mu * l1
              + mu * (4 * l2 + 3 * mu + l1) * c + 3 * mu**2 * c**2)
        n2 = (3 * l2 * mu + 2 * l2 * l1 + 10 * mu * l1 + 4 * l1**2
              + 3 * mu * (l2 + 5 * mu + 4 * l1) * c + 15 * mu**2 * c**2)
        return np.array([-k * n1 / I[1], k * n2 / I[0]])

    def p_bar(I):
        return np.zeros(2)

    def M_fun(I):
        return np.array([[-l1**2, 0.0], [0.0, -l2**2]])

    return SystemModel(
        d=2, in_domain=in_domain, f=f, g=g, omega=omega, f_bar=f_bar, df_bar=df_bar,
        d2f_bar=lambda I: zero3, s=s, v=v, p=p, q=q, w=w, u=u, p_bar=p_bar, M_fun=M_fun,
        I0=np.array(params.I0), epsilon=float(params.epsilon), theta0=0.0,
        G_fun=lambda I, dI: zero2, H_fun=lambda I, dI: zero3, dp_bar=lambda I: zero2,
        sample_box=((0.5, 0.5), (10.0, 10.0)), name="rigid_body",
    )


def _check_vanishing(sys: SystemModel):
    # the a-estimators bound |s| alone, which needs K = 0 and s(I0, theta0) = 0
    if np.any(np.asarray(sys.s(sys.I0, sys.theta0)) != 0.0) or np.any(np.asarray(sys.p_bar(sys.I0)) != 0.0):
        raise ParameterError("s(I0, theta0) and pbar must vanish for the closed-form estimators", "theta0 = 0")


def build_bundle(params: RigidBodyParams, family: str = "component") -> EstimatorBundle:
    """Closed-form estimator bundle for the component seminorms, with analytic partials."""
    params.validate()
    if family != "component":
        raise ConfigError(f"the rigid body estimators are derived for the component family, not {family!r}")
    _check_vanishing(build_system(params))
    am = abs(float(params.mu))
    l1, l2 = float(params.lambda1), float(params.lambda2)
    B1 = am * (4 * l1 + 4 * l2 + am) / 8
    B2 = am * (4 * l1 + 4 * l2 + 3 * am) / 8
    S = l1 + l2
    C1 = am * (16 * S**2 + 16 * am * S + 3 * am**2) / 16
    C2 = am * (16 * S**2 + 16 * am * S + 15 * am**2) / 16

    I01, I02 = params.I0
    exp = math.exp

    def J(tau):
        return np.array([I01 * exp(-l1 * tau), I02 * exp(-l2 * tau)])

    def gaps(tau, r):
        J1, J2 = I01 * exp(-l1 * tau), I02 * exp(-l2 * tau)
        return (J1, J2), J1 - r[0], J2 - r[1]

    def a(tau, r):
        _, D1, D2 = gaps(tau, r)
        return np.array([am / (2 * D2), am / (2 * D1)])

    def b(tau, r):
        _, D1, D2 = gaps(tau, r)
        return np.array([B1 / (D1 * D2**2), B2 / (D1**2 * D2)])

    def c(tau, r):
        _, D1, D2 = gaps(tau, r)
        return np.array([C1 / (D1 * D2**2), C2 / (D1**2 * D2)])

    def da_dr(tau, r):
        _, D1, D2 = gaps(tau, r)
        return np.array([[0.0, am / (2 * D2**2)], [am / (2 * D1**2), 0.0]])

    def da_dtau(tau, r):
        Jt, D1, D2 = gaps(tau, r)
        return np.array([am * l2 * Jt[1] / (2 * D2**2), am * l1 * Jt[0] / (2 * D1**2)])

    def db_dr(tau, r):
        _, D1, D2 = gaps(tau, r)
        return np.array([[B1 / (D1**2 * D2**2), 2 * B1 / (D1 * D2**3)],
                         [2 * B2 / (D1**3 * D2), B2 / (D1**2 * D2**2)]])

    def db_dtau(tau, r):
        Jt, D1, D2 = gaps(tau, r)
        x1, x2 = l1 * Jt[0], l2 * Jt[1]
        return np.array([B1 * (x1 / (D1**2 * D2**2) + 2 * x2 / (D1 * D2**3)),
                         B2 * (2 * x1 / (D1**3 * D2) + x2 / (D1**2 * D2**2))])

    return EstimatorBundle(
        m=2, rho=J, a=a, b=b, c=c,
        R_hat=lambda tau: np.array([[exp(-l1 * tau), 0.0], [0.0, exp(-l2 * tau)]]),
        P_hat=lambda tau: np.array([[exp(l1 * tau), 0.0], [0.0, exp(l2 * tau)]]),
        dR_hat=lambda tau: np.array([[-l1 * exp(-l1 * tau), 0.0], [0.0, -l2 * exp(-l2 * tau)]]),
        da_dtau=da_dtau, db_dtau=db_dtau, da_dr=da_dr, db_dr=db_dr,
    )


def closed_form_flow(params: RigidBodyParams, U: Optional[float] = None) -> AveragedFlow:
    """Exact ``J, R, R^{-1}, K = 0`` (vectorized over ``tau``)."""
    params.validate()
    lam = np.array([params.lambda1, params.lambda2], dtype=float)
    I0 = np.array(params.I0, dtype=float)

    def diag_exp(sign):
        def R(tau):
            tau = np.asarray(tau, dtype=float)
            e = np.exp(sign * np.multiply.outer(tau, lam))
            return e[..., :, None] * np.eye(2)
        return R

    def J(tau):
        return I0 * np.exp(-np.multiply.outer(np.asarray(tau, dtype=float), lam))

    def K(tau):
        return np.zeros(np.shape(tau) + (2,))

    return AveragedFlow(U=float(params.U if U is None else U), J=J, R=diag_exp(-1.0), R_inv=diag_exp(1.0),
                        K=K, source="closed_form")
