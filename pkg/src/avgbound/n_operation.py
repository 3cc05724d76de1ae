"""Seminorm error estimators for the averaging method: the N-operation.

Given an estimator bundle (majorants ``a, b, c, d, e`` of the auxiliary
functions along the averaged trajectory, the radius ``rho`` and the
matrix majorants ``R_hat >= |R|``, ``P_hat >= |R^{-1}|``) this module

1. builds ``alpha = a + eps b`` and the quadratic form ``gamma``,
2. finds the fixed point ``ell0 = alpha(0, eps ell0)`` by contraction,
3. integrates the coupled system for ``(m, n)``::

       m' = P_hat gamma(., eps n, n),                                 m(0) = 0
       n' = (1 - eps dalpha/dr)^{-1} (dalpha/dtau + eps R_hat P_hat gamma
                                      + eps R_hat' m),                n(0) = ell0

   under the domain conditions ``0 < n < rho/eps`` and
   ``det(1 - eps dalpha/dr) > 0``,
4. audits ``n`` against the integral inequality it is built to satisfy.

The result bounds the rescaled averaging error: ``|L(t)|^mu <= n^mu(eps t)``.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import cumulative_simpson

from .errors import DomainError, HypothesisViolation, IterationError, StiffnessError
from .ode import DET_FLOOR, IntegratorConfig, Trajectory, integrate

__all__ = [
    "EstimatorBundle",
    "FixedPointSpec",
    "FixedPointDiagnostics",
    "BoundResult",
    "AuditReport",
    "BundleReport",
    "alpha",
    "gamma",
    "dalpha_dr",
    "dalpha_dtau",
    "auto_fixed_point_spec",
    "verify_fixed_point_spec",
    "find_fixed_point",
    "integrate_mn",
    "run_n_operation",
    "audit_integral_inequality",
    "check_bundle",
    "default_n_config",
]

FD_STEP = 1e-6


@dataclass(frozen=True)
class EstimatorBundle:
    """Majorant functions, all vectorized over the seminorm index.

    Shapes: ``rho(tau)``, ``a/b/c(tau, r)`` -> ``(m,)``; ``d_est(tau, r)``,
    ``R_hat(tau)``, ``P_hat(tau)`` -> ``(m, m)``; ``e_est(tau, r)`` ->
    ``(m, m, m)``.  Optional partials (``da_dr`` is ``[mu, nu]``) replace
    finite differences when given; ``d_est``/``e_est`` default to zero.
    """
    m: int
    rho: Callable
    a: Callable
    b: Callable
    c: Callable
    R_hat: Callable
    P_hat: Callable
    d_est: Optional[Callable] = None
    e_est: Optional[Callable] = None
    dR_hat: Optional[Callable] = None
    da_dtau: Optional[Callable] = None
    db_dtau: Optional[Callable] = None
    da_dr: Optional[Callable] = None
    db_dr: Optional[Callable] = None


def _check_r(bundle, tau, r):
    r = np.asarray(r, dtype=float)
    rho = np.asarray(bundle.rho(tau), dtype=float)
    if (r < 0).any() or (r >= rho).any():
        raise DomainError(f"r={r} outside [0, rho(tau)={rho}) at tau={tau}", point=(tau, r))
    return r


def _alpha(bundle, eps, tau, r):
    return np.asarray(bundle.a(tau, r), dtype=float) + eps * np.asarray(bundle.b(tau, r), dtype=float)


def _gamma(bundle, tau, r, ell):
    val = np.array(bundle.c(tau, r), dtype=float)
    if bundle.d_est is not None:
        val = val + np.asarray(bundle.d_est(tau, r)) @ ell
    if bundle.e_est is not None:
        val = val + 0.5 * np.einsum("mab,a,b->m", np.asarray(bundle.e_est(tau, r)), ell, ell)
    return val


def alpha(bundle: EstimatorBundle, eps: float, tau: float, r, mu: Optional[int] = None):
    """``alpha(tau, r) = a(tau, r) + eps b(tau, r)``."""
    r = _check_r(bundle, tau, r)
    val = _alpha(bundle, eps, tau, r)
    return val if mu is None else float(val[mu])


def gamma(bundle: EstimatorBundle, tau: float, r, ell, mu: Optional[int] = None):
    """``gamma = c + d ell + 1/2 e ell ell`` (Einstein sums over the seminorm index)."""
    r = _check_r(bundle, tau, r)
    val = _gamma(bundle, tau, r, np.asarray(ell, dtype=float))
    return val if mu is None else float(val[mu])


def _fd(fun, x, lower=0.0):
    """Derivative of ``fun`` at scalar ``x``; one-sided near ``lower`` or a domain edge."""
    h = FD_STEP * max(1.0, abs(x))
    if x - h >= lower:
        try:
            return (fun(x + h) - fun(x - h)) / (2 * h)
        except DomainError:
            return (3 * fun(x) - 4 * fun(x - h) + fun(x - 2 * h)) / (2 * h)
    return (-3 * fun(x) + 4 * fun(x + h) - fun(x + 2 * h)) / (2 * h)


def _dalpha_dr(bundle, eps, tau, r):
    if bundle.da_dr is not None and bundle.db_dr is not None:
        return np.asarray(bundle.da_dr(tau, r), dtype=float) + eps * np.asarray(bundle.db_dr(tau, r), dtype=float)
    cols = []
    for nu in range(bundle.m):
        def along(x, nu=nu):
            rr = r.copy()
            rr[nu] = x
            return alpha(bundle, eps, tau, rr)
        cols.append(_fd(along, r[nu]))
    return np.stack(cols, axis=-1)


def _dalpha_dtau(bundle, eps, tau, r):
    if bundle.da_dtau is not None and bundle.db_dtau is not None:
        return np.asarray(bundle.da_dtau(tau, r), dtype=float) + eps * np.asarray(bundle.db_dtau(tau, r), dtype=float)
    return _fd(lambda t: alpha(bundle, eps, t, r), tau)


def dalpha_dr(bundle: EstimatorBundle, eps: float, tau: float, r):
    """Matrix ``[mu, nu] = d alpha^mu / d r^nu``."""
    return _dalpha_dr(bundle, eps, tau, _check_r(bundle, tau, r))


def dalpha_dtau(bundle: EstimatorBundle, eps: float, tau: float, r):
    return _dalpha_dtau(bundle, eps, tau, _check_r(bundle, tau, r))


def _dR_hat(bundle, tau):
    if bundle.dR_hat is not None:
        return np.asarray(bundle.dR_hat(tau), dtype=float)
    return _fd(lambda t: np.asarray(bundle.R_hat(t), dtype=float), tau)


# -- fixed point --------------------------------------------------------------

@dataclass(frozen=True)
class FixedPointSpec:
    """Box ``Sigma = prod [ell_star - sigma, ell_star + sigma]`` and derivative bound ``A``."""
    ell_star: np.ndarray
    sigma: np.ndarray
    A_bound: np.ndarray
    max_iter: int = 200
    tol: float = 1e-13

    def __post_init__(self):
        for name in ("ell_star", "sigma", "A_bound"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))

    @property
    def A_norm(self) -> float:
        """Largest row sum of ``A_bound``."""
        return float(np.max(np.sum(self.A_bound, axis=1)))


@dataclass
class FixedPointDiagnostics:
    iterations: int
    contraction_margin: float
    error_bound: float
    residual: float
    degenerate: bool = False
    spec: Optional[FixedPointSpec] = None
    history: list = field(default_factory=list)

    def to_dict(self):
        out = {
            "iterations": self.iterations,
            "contraction_margin": self.contraction_margin,
            "error_bound": self.error_bound,
            "residual": self.residual,
            "degenerate": self.degenerate,
        }
        if self.spec is not None:
            out["spec"] = {"ell_star": self.spec.ell_star.tolist(), "sigma": self.spec.sigma.tolist(),
                           "A_bound": self.spec.A_bound.tolist()}
        return out


def _box_grid(spec, n=5):
    axes = [np.linspace(c - s, c + s, n) for c, s in zip(spec.ell_star, spec.sigma)]
    return [np.array(p) for p in itertools.product(*axes)]


def _alpha_zero_identically(bundle, eps, probes=5):
    m = bundle.m
    if np.any(alpha(bundle, eps, 0.0, np.zeros(m)) != 0.0):
        return False
    rho0 = np.asarray(bundle.rho(0.0), dtype=float)
    top = np.where(np.isfinite(rho0), 0.5 * rho0, 1.0)
    axes = [np.linspace(0.0, t, probes) for t in top]
    return all(np.all(alpha(bundle, eps, 0.0, np.array(p)) == 0.0) for p in itertools.product(*axes))


def _check_box(bundle, eps, spec):
    rho0 = np.asarray(bundle.rho(0.0), dtype=float)
    lo = spec.ell_star - spec.sigma
    hi = spec.ell_star + spec.sigma
    if np.any(spec.sigma <= 0) or np.any(lo <= 0) or np.any(hi >= rho0 / eps):
        raise HypothesisViolation(
            f"box [ell_star - sigma, ell_star + sigma] = [{lo}, {hi}] is not inside (0, rho(0)/eps) = (0, {rho0 / eps})",
            "box_in_domain")


def auto_fixed_point_spec(bundle: EstimatorBundle, eps: float, margin: float = 0.1,
                          grid: int = 5) -> FixedPointSpec:
    """Default box around the zeroth iterate ``alpha(0, 0)``.

    ``sigma = ell_star / 2`` keeps the box strictly positive; ``A`` is the
    sampled maximum of ``|dalpha/dr|`` over a ``grid^m`` lattice of the box,
    inflated by ``1 + margin``.
    """
    ell_star = alpha(bundle, eps, 0.0, np.zeros(bundle.m))
    sigma = np.where(ell_star > 0, 0.5 * ell_star, 1e-3)
    probe = FixedPointSpec(ell_star, sigma, np.zeros((bundle.m, bundle.m)))
    _check_box(bundle, eps, probe)
    A = np.zeros((bundle.m, bundle.m))
    for ell in _box_grid(probe, grid):
        A = np.maximum(A, np.abs(dalpha_dr(bundle, eps, 0.0, eps * ell)))
    return FixedPointSpec(ell_star, sigma, (1.0 + margin) * A)


def verify_fixed_point_spec(bundle: EstimatorBundle, eps: float, spec: FixedPointSpec, grid: int = 5):
    """Raise :class:`HypothesisViolation` naming the first failed precondition."""
    _check_box(bundle, eps, spec)
    if not eps * spec.A_norm < 1.0:
        raise HypothesisViolation(f"contraction constant eps*A = {eps * spec.A_norm:.6g} is not < 1", "contraction")
    for ell in _box_grid(spec, grid):
        D = np.abs(dalpha_dr(bundle, eps, 0.0, eps * ell))
        if np.any(D > spec.A_bound * (1 + 1e-12)):
            raise HypothesisViolation(f"|dalpha/dr(0, eps ell)| = {D.tolist()} exceeds A at ell={ell.tolist()}",
                                      "derivative_bound")
    lhs = np.abs(alpha(bundle, eps, 0.0, eps * spec.ell_star) - spec.ell_star) + eps * spec.A_bound @ spec.sigma
    if not np.all(lhs < spec.sigma):
        raise HypothesisViolation(f"|alpha(0, eps ell_star) - ell_star| + eps A sigma = {lhs} is not < sigma",
                                  "self_map")


def find_fixed_point(bundle: EstimatorBundle, eps: float, spec: Optional[FixedPointSpec] = None,
                     tol: Optional[float] = None, max_iter: Optional[int] = None):
    """Fixed point of ``ell -> alpha(0, eps ell)`` by Picard iteration.

    Returns ``(ell0, diagnostics)``.  When ``alpha(0, .)`` vanishes
    identically the fixed point is 0 and the box hypothesis is vacuous
    (``diagnostics.degenerate``).
    """
    m = bundle.m
    if spec is None and _alpha_zero_identically(bundle, eps):
        return np.zeros(m), FixedPointDiagnostics(1, 0.0, 0.0, 0.0, degenerate=True)
    if spec is None:
        spec = auto_fixed_point_spec(bundle, eps)
    verify_fixed_point_spec(bundle, eps, spec)
    tol = spec.tol if tol is None else tol
    max_iter = spec.max_iter if max_iter is None else max_iter
    q = eps * spec.A_norm

    l1 = spec.ell_star.copy()
    ell = l1
    history = [l1]
    first_step = None
    for n in range(2, max_iter + 2):
        nxt = alpha(bundle, eps, 0.0, eps * ell)
        change = float(np.max(np.abs(nxt - ell)))
        if first_step is None:
            first_step = change
        history.append(nxt)
        ell = nxt
        if change < tol * max(1.0, float(np.max(np.abs(ell)))):
            break
    else:
        raise IterationError(f"fixed point iteration did not converge in {max_iter} iterations")
    residual = float(np.max(np.abs(alpha(bundle, eps, 0.0, eps * ell) - ell)))
    if np.any(np.abs(ell - spec.ell_star) > spec.sigma):
        raise IterationError(f"iterate {ell} left the box around {spec.ell_star}")
    bound = q ** (n - 1) * first_step / (1.0 - q)
    return ell, FixedPointDiagnostics(n - 1, q, bound, residual, spec=spec, history=history)


# -- (m, n) system ------------------------------------------------------------------

@dataclass
class BoundResult:
    """Estimator curves ``m, n`` on ``[0, U_eff)`` with fixed point data.

    ``status`` is ``"full_horizon"`` or ``"domain_violation"``; in the latter
    case ``violation`` holds the localized ``tau`` and the failed condition
    (``n_positive``, ``n_below_rho``, ``det_positive`` or ``rhs_domain``).
    """
    ell0: np.ndarray
    iterations: int
    contraction_margin: float
    traj: Trajectory
    U: float
    U_eff: float
    status: str
    violation: Optional[dict] = None
    fixed_point: Optional[FixedPointDiagnostics] = None
    wall_time: Optional[float] = None
    epsilon: float = 0.0

    @property
    def m_dim(self):
        return len(self.ell0)

    @property
    def tau(self):
        return self.traj.t

    def m(self, tau):
        return self.traj(tau)[..., : self.m_dim]

    def n(self, tau):
        return self.traj(tau)[..., self.m_dim:]

    @property
    def m_traj(self):
        k = self.m_dim
        return Trajectory(self.traj.t, self.traj.y[:, :k], self.traj.dy[:, :k], (k,))

    @property
    def n_traj(self):
        k = self.m_dim
        return Trajectory(self.traj.t, self.traj.y[:, k:], self.traj.dy[:, k:], (k,))

    @property
    def tau_end(self):
        return self.traj.t_end


def default_n_config(U: float) -> IntegratorConfig:
    return IntegratorConfig(method="rkf45", abs_tol=1e-10, rel_tol=1e-10)


def _conditions(bundle, eps, tau, n, degenerate, det_floor):
    rho = np.asarray(bundle.rho(tau), dtype=float)
    if degenerate:
        if np.any(n < 0):
            return "n_positive"
    elif np.any(n <= 0):
        return "n_positive"
    if np.any(n >= rho / eps):
        return "n_below_rho"
    D = dalpha_dr(bundle, eps, tau, eps * n)
    if not np.linalg.det(np.eye(len(n)) - eps * D) > det_floor:
        return "det_positive"
    return None


def integrate_mn(bundle: EstimatorBundle, eps: float, ell0, flow, cfg: Optional[IntegratorConfig] = None,
                 degenerate: Optional[bool] = None, det_floor: float = DET_FLOOR) -> BoundResult:
    """Integrate the ``(m, n)`` Cauchy problem on ``[0, flow.U)``.

    ``flow`` may be an :class:`~avgbound.flow.AveragedFlow` or a plain
    horizon ``U``.  The linear solve with ``1 - eps dalpha/dr`` uses LU with
    partial pivoting.  ``degenerate`` (default: ``ell0 == 0``) relaxes the
    lower domain condition to ``n >= 0``.
    """
    U = float(getattr(flow, "U", flow))
    ell0 = np.asarray(ell0, dtype=float)
    k = bundle.m
    if degenerate is None:
        degenerate = bool(np.all(ell0 == 0.0))
    if cfg is None:
        cfg = default_n_config(U)
    eye = np.eye(k)

    def rhs(tau, y):
        m, n = y[:k], y[k:]
        r = _check_r(bundle, tau, eps * n)
        Pg = np.asarray(bundle.P_hat(tau), dtype=float) @ _gamma(bundle, tau, r, n)
        Rh = np.asarray(bundle.R_hat(tau), dtype=float)
        src = _dalpha_dtau(bundle, eps, tau, r) + eps * (Rh @ Pg) + eps * (_dR_hat(bundle, tau) @ m)
        dn = np.linalg.solve(eye - eps * _dalpha_dr(bundle, eps, tau, r), src)
        return np.concatenate([Pg, dn])

    def guard(tau, y):
        return _conditions(bundle, eps, tau, y[k:], degenerate, det_floor) is None

    y0 = np.concatenate([np.zeros(k), ell0])
    try:
        traj = integrate(rhs, y0, (0.0, U), cfg, guard=guard)
    except StiffnessError as exc:
        # typically n' ~ 1/det blowing up before det reaches det_floor
        tr = exc.partial
        n_last = tr.y[-1][k:]
        det = float(np.linalg.det(eye - eps * dalpha_dr(bundle, eps, tr.t_end, eps * n_last)))
        partial = BoundResult(ell0=ell0, iterations=0, contraction_margin=0.0, traj=tr, U=U, U_eff=float(tr.t_end),
                              status="step_underflow", epsilon=eps,
                              violation={"tau": float(tr.t_end), "condition": "step_underflow", "det": det})
        raise StiffnessError(str(exc), t_last=exc.t_last, partial=partial) from None
    violation = None
    if traj.status == "domain_violation":
        cond = "rhs_domain"
        probe = traj.y_event
        if probe is None:
            # rhs failed before the guard could see the state: extrapolate the last node
            probe = traj.y[-1] + (traj.t_event - traj.t_end) * traj.dy[-1]
        try:
            cond = _conditions(bundle, eps, traj.t_event, probe[k:], degenerate, det_floor) or cond
        except DomainError:
            pass
        violation = {"tau": float(traj.t_event), "condition": cond}
        status, U_eff = "domain_violation", float(traj.t_event)
    elif traj.status == "completed":
        status, U_eff = "full_horizon", U
    else:
        status, U_eff = traj.status, traj.t_end
    return BoundResult(ell0=ell0, iterations=0, contraction_margin=0.0, traj=traj, U=U, U_eff=U_eff,
                       status=status, violation=violation, epsilon=eps)


def run_n_operation(bundle: EstimatorBundle, eps: float, flow, spec: Optional[FixedPointSpec] = None,
                    cfg: Optional[IntegratorConfig] = None) -> BoundResult:
    """Fixed point plus ``(m, n)`` integration, timed with a monotonic clock.

    Raises
    ------
    StiffnessError
        Step size underflow; ``partial`` is a :class:`BoundResult` with
        status ``'step_underflow'`` truncated at the last accepted step.
    """
    start = time.perf_counter()
    ell0, diag = find_fixed_point(bundle, eps, spec)
    try:
        res = integrate_mn(bundle, eps, ell0, flow, cfg, degenerate=diag.degenerate)
    except StiffnessError as exc:
        res = exc.partial
        _finish(res, diag, time.perf_counter() - start)
        raise
    _finish(res, diag, time.perf_counter() - start)
    return res


def _finish(res, diag, wall_time):
    res.wall_time = wall_time
    res.iterations = diag.iterations
    res.contraction_margin = diag.contraction_margin
    res.fixed_point = diag


# -- audits -----------------------------------------------------------------------

@dataclass
class AuditReport:
    tau: np.ndarray
    margins: np.ndarray
    rho_margin: np.ndarray
    tol: float

    @property
    def min_margin(self):
        return float(np.min(self.margins)) if self.margins.size else 0.0

    @property
    def max_abs_margin(self):
        return float(np.max(np.abs(self.margins))) if self.margins.size else 0.0

    @property
    def violations(self):
        return np.argwhere(self.margins < -self.tol)

    @property
    def rho_ok(self):
        return bool(np.all(self.rho_margin > 0))

    @property
    def passed(self):
        return len(self.violations) == 0 and self.rho_ok


def audit_integral_inequality(bundle: EstimatorBundle, eps: float, result: BoundResult, flow=None,
                              n_quad_nodes: int = 10001, tol: float = 1e-6) -> AuditReport:
    """Margins ``n - alpha(., eps n) - eps R_hat int_0^tau P_hat gamma`` on a uniform grid.

    The integral uses cumulative composite Simpson over the dense ``n``
    trajectory.  The differential construction makes the margin vanish up
    to integration and quadrature error, so only margins below ``-tol`` are
    flagged.
    """
    if n_quad_nodes < 3:
        raise ValueError("n_quad_nodes must be >= 3")
    if n_quad_nodes % 2 == 0:
        n_quad_nodes += 1
    tau = np.linspace(0.0, result.tau_end, n_quad_nodes)
    N = result.n(tau)
    k = bundle.m
    integrand = np.empty((len(tau), k))
    alph = np.empty((len(tau), k))
    rho = np.empty((len(tau), k))
    for i, (t, n) in enumerate(zip(tau, N)):
        r = eps * n
        integrand[i] = np.asarray(bundle.P_hat(t)) @ gamma(bundle, t, r, n)
        alph[i] = alpha(bundle, eps, t, r)
        rho[i] = np.asarray(bundle.rho(t), dtype=float)
    if len(tau) > 1 and tau[-1] > tau[0]:
        integral = cumulative_simpson(integrand, x=tau, axis=0, initial=0.0)
    else:
        integral = np.zeros_like(integrand)
    Rh = np.array([np.asarray(bundle.R_hat(t)) for t in tau])
    rhs = alph + eps * np.einsum("nij,nj->ni", Rh, integral)
    return AuditReport(tau=tau, margins=N - rhs, rho_margin=rho / eps - N, tol=tol)


@dataclass
class BundleReport:
    samples: int
    worst: dict = field(default_factory=dict)
    violations: dict = field(default_factory=dict)

    def add(self, key, lhs, rhs, where=None):
        lhs = np.asarray(lhs, dtype=float)
        rhs = np.asarray(rhs, dtype=float)
        excess = float(np.max(lhs - rhs)) if lhs.size else -np.inf
        self.worst[key] = max(self.worst.get(key, -np.inf), excess)
        if np.any(lhs > rhs * (1 + 1e-12) + 1e-14):
            self.violations.setdefault(key, []).append(where)

    @property
    def passed(self):
        return not self.violations

    def to_dict(self):
        return {"samples": self.samples, "passed": self.passed,
                "worst_excess": {k: v for k, v in self.worst.items()},
                "violations": {k: len(v) for k, v in self.violations.items()},
                "first_violation": {k: v[0] for k, v in self.violations.items()}}


def check_bundle(bundle: EstimatorBundle, sys, flow, fam, samples: int = 1000, rng_seed: int = 0) -> BundleReport:
    """Sample the majorant inequalities behind ``a, b, c, d, e, R_hat, P_hat``.

    Also probes monotonicity of ``c, d, e`` in ``r`` and finiteness of the
    second differences of ``a, b, R_hat`` in ``tau``.
    """
    rng = np.random.default_rng(rng_seed)
    rep = BundleReport(samples=samples)
    k = bundle.m
    s0 = np.asarray(sys.s(sys.I0, sys.theta0), dtype=float)
    zero_mm = np.zeros((k, k))
    zero_mmm = np.zeros((k, k, k))
    for _ in range(samples):
        tau = rng.uniform(0.0, flow.tau_end)
        J = np.asarray(flow.J(tau))
        rho = np.asarray(bundle.rho(tau), dtype=float)
        X = rng.standard_normal(sys.d) * np.maximum(np.abs(J), 1e-3)
        nX = np.asarray(fam.vec(X))
        lim = np.where(np.isfinite(rho), 0.9 * rho, np.inf)
        with np.errstate(divide="ignore"):
            ratio = np.where(nX > 0, lim / nX, np.inf)
        scale = min(1.0, float(np.min(ratio))) * rng.uniform(0.0, 1.0)
        dJ = scale * X
        r = np.asarray(fam.vec(dJ))
        th = rng.uniform(0.0, 2 * np.pi)
        I = J + dJ
        where = {"tau": float(tau), "dJ": dJ.tolist(), "theta": float(th)}
        if not sys.in_domain(I):
            rep.violations.setdefault("rho_ball", []).append(where)
            continue
        R = np.asarray(flow.R(tau))
        K = np.asarray(flow.K(tau))
        A = np.asarray(sys.df_bar(J))
        v = np.asarray(sys.v(I, th))
        w = np.asarray(sys.w(I, th))
        rep.add("a", fam.vec(np.asarray(sys.s(I, th)) - R @ s0 - K), bundle.a(tau, r), where)
        rep.add("b", fam.vec(w - A @ v), bundle.b(tau, r), where)
        rep.add("c", fam.vec(np.asarray(sys.u(I, th)) - A @ (w + np.asarray(sys.q(I, th)))
                             - np.asarray(sys.M_fun(J)) @ v), bundle.c(tau, r), where)
        d_val = bundle.d_est(tau, r) if bundle.d_est is not None else zero_mm
        e_val = bundle.e_est(tau, r) if bundle.e_est is not None else zero_mmm
        rep.add("d", fam.mat(sys.G(J, dJ)), d_val, where)
        rep.add("e", fam.tens(sys.H(J, dJ)), e_val, where)
        rep.add("R_hat", fam.mat(R), bundle.R_hat(tau), where)
        rep.add("P_hat", fam.mat(np.asarray(flow.R_inv(tau))), bundle.P_hat(tau), where)

        r2 = r + rng.uniform(0.0, 1.0, size=k) * (np.where(np.isfinite(rho), rho, r + 1.0) - r) * 0.5
        rep.add("c_monotone", bundle.c(tau, r), bundle.c(tau, r2), where)
        if bundle.d_est is not None:
            rep.add("d_monotone", bundle.d_est(tau, r), bundle.d_est(tau, r2), where)
        if bundle.e_est is not None:
            rep.add("e_monotone", bundle.e_est(tau, r), bundle.e_est(tau, r2), where)

        h = 1e-4 * max(1.0, tau)
        if tau - h >= 0 and tau + h <= flow.tau_end:
            for name, fun in (("a", lambda t: bundle.a(t, r)), ("b", lambda t: bundle.b(t, r)),
                              ("R_hat", bundle.R_hat)):
                try:
                    second = (np.asarray(fun(tau + h)) - 2 * np.asarray(fun(tau)) + np.asarray(fun(tau - h))) / h**2
                except DomainError:
                    continue
                if not np.all(np.isfinite(second)):
                    rep.violations.setdefault(f"{name}_smooth", []).append(where)
    return rep
