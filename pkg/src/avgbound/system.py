"""One-frequency systems and their auxiliary-function chain.

A :class:`SystemModel` bundles the perturbed vector field ``(f, g, omega)``
on ``Lambda x T`` with the closed-form chain used by the error estimate:

    f = fbar + omega ds/dtheta,        mean(s) = 0
    s = omega dv/dtheta,               v(I, theta0) = 0
    p = (ds/dI) f + (ds/dtheta) g
    p = pbar + omega dw/dtheta,        w(I, theta0) = 0
    q = (dv/dI) f + (dv/dtheta) g
    u = (dw/dI) f + (dw/dtheta) g
    M = (d2fbar/dI2) fbar - (dfbar/dI)^2
    pbar(I + dI) = pbar(I) + G(I, dI) dI
    fbar(I + dI) = fbar(I) + dfbar(I) dI + 1/2 H(I, dI) dI dI

The handles are trusted as given; :func:`check_identities` samples every
relation above with finite differences and angle averages.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError

__all__ = [
    "SystemModel",
    "IdentityReport",
    "IDENTITY_NAMES",
    "average_over_angle",
    "segment_in_domain",
    "taylor_G",
    "taylor_H",
    "check_identities",
    "corrupt",
]

TWO_PI = 2.0 * np.pi
SEGMENT_POINTS = 65
DEFAULT_NODES = 256


@dataclass(frozen=True)
class SystemModel:
    d: int
    in_domain: Callable
    f: Callable
    g: Callable
    omega: Callable
    f_bar: Callable
    df_bar: Callable
    d2f_bar: Callable
    s: Callable
    v: Callable
    p: Callable
    q: Callable
    w: Callable
    u: Callable
    p_bar: Callable
    M_fun: Callable
    I0: np.ndarray
    epsilon: float
    theta0: float = 0.0
    G_fun: Optional[Callable] = None
    H_fun: Optional[Callable] = None
    dp_bar: Optional[Callable] = None
    sample_box: Optional[tuple] = None
    name: str = "custom"

    def __post_init__(self):
        I0 = np.asarray(self.I0, dtype=float)
        object.__setattr__(self, "I0", I0)
        if I0.shape != (self.d,):
            raise ValueError(f"I0 must have shape ({self.d},)")
        if not np.all(np.isfinite(I0)):
            raise ValueError("I0 must be finite")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.in_domain(I0):
            raise DomainError("I0 is outside the action domain", point=I0)
        if self.omega(I0) == 0:
            raise DomainError("omega vanishes at I0", point=I0)

    def G(self, I, dI):
        if self.G_fun is not None:
            return np.asarray(self.G_fun(I, dI), dtype=float)
        return taylor_G(self, I, dI)

    def H(self, I, dI):
        if self.H_fun is not None:
            H = np.asarray(self.H_fun(I, dI), dtype=float)
        else:
            H = taylor_H(self, I, dI)
        return 0.5 * (H + np.swapaxes(H, -1, -2))


def corrupt(sys: SystemModel, name: str, factor: float = 2.0) -> SystemModel:
    """Copy of ``sys`` with handle ``name`` multiplied by ``factor`` (fault injection)."""
    orig = getattr(sys, name)
    return dataclasses.replace(sys, **{name: lambda *a: factor * np.asarray(orig(*a))})


def _angle_grid(n_nodes):
    return TWO_PI * np.arange(n_nodes) / n_nodes


def average_over_angle(h: Callable, I, n_nodes: int = DEFAULT_NODES, in_domain: Optional[Callable] = None):
    """Uniform trapezoid average of ``h(I, theta)`` over one period."""
    if n_nodes < 8:
        raise ValueError("n_nodes must be >= 8")
    I = np.asarray(I, dtype=float)
    if in_domain is not None and not in_domain(I):
        raise DomainError("averaging point outside domain", point=I)
    vals = np.array([np.asarray(h(I, th), dtype=float) for th in _angle_grid(n_nodes)])
    return vals.mean(axis=0)


def segment_in_domain(in_domain: Callable, I, dI, n_points: int = SEGMENT_POINTS) -> bool:
    """Sampled test that the closed segment ``[I, I + dI]`` lies in the domain."""
    I = np.asarray(I, dtype=float)
    dI = np.asarray(dI, dtype=float)
    return all(in_domain(I + x * dI) for x in np.linspace(0.0, 1.0, n_points))


def _jacobian_fd(fun, I, step=1e-6):
    I = np.asarray(I, dtype=float)
    cols = []
    for j in range(I.size):
        h = step * max(1.0, abs(I[j]))
        e = np.zeros_like(I)
        e[j] = h
        cols.append((np.asarray(fun(I + e)) - np.asarray(fun(I - e))) / (2 * h))
    return np.stack(cols, axis=-1)


def taylor_G(sys: SystemModel, I, dI, quad_order: int = 8):
    """``G(I, dI) = int_0^1 dpbar/dI(I + x dI) dx`` by Gauss-Legendre quadrature."""
    I = np.asarray(I, dtype=float)
    dI = np.asarray(dI, dtype=float)
    if not segment_in_domain(sys.in_domain, I, dI):
        raise DomainError("segment [I, I+dI] leaves the domain", point=(I, dI))
    jac = sys.dp_bar if sys.dp_bar is not None else (lambda X: _jacobian_fd(sys.p_bar, X))
    x, wts = np.polynomial.legendre.leggauss(quad_order)
    x = 0.5 * (x + 1.0)
    wts = 0.5 * wts
    return sum(wk * np.asarray(jac(I + xk * dI), dtype=float) for xk, wk in zip(x, wts))


def taylor_H(sys: SystemModel, I, dI, quad_order: int = 8):
    """``H(I, dI) = 2 int_0^1 (1 - x) d2fbar/dI2(I + x dI) dx``, symmetrized."""
    I = np.asarray(I, dtype=float)
    dI = np.asarray(dI, dtype=float)
    if not segment_in_domain(sys.in_domain, I, dI):
        raise DomainError("segment [I, I+dI] leaves the domain", point=(I, dI))
    x, wts = np.polynomial.legendre.leggauss(quad_order)
    x = 0.5 * (x + 1.0)
    wts = 0.5 * wts
    H = 2.0 * sum(wk * (1.0 - xk) * np.asarray(sys.d2f_bar(I + xk * dI), dtype=float)
                  for xk, wk in zip(x, wts))
    return 0.5 * (H + np.swapaxes(H, -1, -2))


IDENTITY_NAMES = {
    "a": "f = fbar + omega ds/dtheta",
    "b": "mean_theta s = 0",
    "c": "s = omega dv/dtheta, v(I, theta0) = 0",
    "d": "p = (ds/dI) f + (ds/dtheta) g",
    "e": "p = pbar + omega dw/dtheta, w(I, theta0) = 0, pbar = mean_theta p",
    "f": "q = (dv/dI) f + (dv/dtheta) g, u = (dw/dI) f + (dw/dtheta) g",
    "g": "M = (d2fbar/dI2) fbar - (dfbar/dI)^2",
    "h": "pbar(I + dI) = pbar(I) + G(I, dI) dI",
    "i": "fbar Taylor identity with H(I, dI), H symmetric",
}


@dataclass
class IdentityReport:
    """Worst scaled residual per identity, with the sample where it occurred.

    Residuals are ``max|lhs - rhs| / max(1, max|lhs|, max|rhs|)``.
    """
    residuals: dict = field(default_factory=lambda: {k: 0.0 for k in IDENTITY_NAMES})
    locations: dict = field(default_factory=dict)
    samples: int = 0

    def record(self, key, lhs, rhs, where):
        lhs = np.asarray(lhs, dtype=float)
        rhs = np.asarray(rhs, dtype=float)
        diff = np.max(np.abs(lhs - rhs)) if lhs.size else 0.0
        if diff == 0.0:
            res = 0.0
        else:
            res = float(diff / max(1.0, np.max(np.abs(lhs)), np.max(np.abs(rhs))))
        if not np.isfinite(res):
            res = float("inf")
        if key not in self.locations or res > self.residuals[key]:
            self.residuals[key] = res
            self.locations[key] = where

    def failures(self, tol=1e-6):
        return [k for k, r in self.residuals.items() if not r < tol]

    def passed(self, tol=1e-6):
        return not self.failures(tol)

    def to_dict(self, tol=1e-6):
        return {
            k: {"identity": IDENTITY_NAMES[k], "residual": self.residuals[k],
                "location": self.locations.get(k), "passed": bool(self.residuals[k] < tol)}
            for k in IDENTITY_NAMES
        }


def _d_theta(fun, I, th, h):
    h = h * max(1.0, abs(th))
    return (np.asarray(fun(I, th + h)) - np.asarray(fun(I, th - h))) / (2 * h)


def _d_I(fun, I, th, h):
    return _jacobian_fd(lambda X: fun(X, th), I, h)


def _sample_point(sys, rng, box, max_tries=1000):
    lo, hi = (np.asarray(b, dtype=float) for b in box)
    for _ in range(max_tries):
        I = rng.uniform(lo, hi)
        if sys.in_domain(I):
            return I
    raise DomainError(f"no in-domain sample found in box {box!r} after {max_tries} tries")


def _sample_increment(sys, rng, I, max_tries=100):
    for _ in range(max_tries):
        dI = rng.uniform(-0.5, 0.5, size=I.shape) * np.maximum(np.abs(I), 1e-3)
        if segment_in_domain(sys.in_domain, I, dI):
            return dI
    raise DomainError("no admissible increment found", point=I)


def check_identities(sys: SystemModel, samples: int = 1000, rng_seed: int = 0, fd_step: float = 1e-6,
                     box=None, n_nodes: int = DEFAULT_NODES) -> IdentityReport:
    """Sample the nine defining identities of the auxiliary chain.

    Derivatives use central differences with step ``fd_step * max(1, |x|)``;
    angle means use the uniform trapezoid with ``n_nodes`` nodes.  Points are
    drawn uniformly from ``box`` (default ``sys.sample_box``), resampling
    points outside the domain.
    """
    if box is None:
        box = sys.sample_box if sys.sample_box is not None else (sys.I0 * 0.5, sys.I0 * 1.5)
    rng = np.random.default_rng(rng_seed)
    rep = IdentityReport(samples=samples)
    nodes = _angle_grid(n_nodes)
    th0 = sys.theta0
    for _ in range(samples):
        I = _sample_point(sys, rng, box)
        th = rng.uniform(0.0, TWO_PI)
        where = {"I": I.tolist(), "theta": float(th)}
        f = np.asarray(sys.f(I, th))
        g = float(sys.g(I, th))
        om = float(sys.omega(I))

        rep.record("a", f, sys.f_bar(I) + om * _d_theta(sys.s, I, th, fd_step), where)

        s_nodes = np.array([sys.s(I, t) for t in nodes])
        rep.record("b", s_nodes.mean(axis=0) / max(1.0, np.max(np.abs(s_nodes))), 0.0 * f, where)

        ds_dth = _d_theta(sys.s, I, th, fd_step)
        rep.record("c", sys.s(I, th), om * _d_theta(sys.v, I, th, fd_step), where)
        rep.record("c", sys.v(I, th0), 0.0 * f, where)

        p = np.asarray(sys.p(I, th))
        rep.record("d", p, _d_I(sys.s, I, th, fd_step) @ f + ds_dth * g, where)

        pb = np.asarray(sys.p_bar(I))
        rep.record("e", p, pb + om * _d_theta(sys.w, I, th, fd_step), where)
        rep.record("e", sys.w(I, th0), 0.0 * f, where)
        p_nodes = np.array([sys.p(I, t) for t in nodes])
        rep.record("e", pb, p_nodes.mean(axis=0), where)

        rep.record("f", sys.q(I, th), _d_I(sys.v, I, th, fd_step) @ f + _d_theta(sys.v, I, th, fd_step) * g, where)
        rep.record("f", sys.u(I, th), _d_I(sys.w, I, th, fd_step) @ f + _d_theta(sys.w, I, th, fd_step) * g, where)

        fb = np.asarray(sys.f_bar(I))
        D = np.asarray(sys.df_bar(I))
        D2 = np.asarray(sys.d2f_bar(I))
        rep.record("g", sys.M_fun(I), np.einsum("ijk,j->ik", D2, fb) - D @ D, where)

        dI = _sample_increment(sys, rng, I)
        wd = dict(where, dI=dI.tolist())
        rep.record("h", sys.p_bar(I + dI), pb + sys.G(I, dI) @ dI, wd)
        Hraw = np.asarray(sys.H_fun(I, dI) if sys.H_fun is not None else taylor_H(sys, I, dI))
        rep.record("i", sys.f_bar(I + dI), fb + D @ dI + 0.5 * np.einsum("ijk,j,k->i", Hraw, dI, dI), wd)
        rep.record("i", Hraw, np.swapaxes(Hraw, -1, -2), wd)
    return rep
