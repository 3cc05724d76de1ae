import math

import numpy as np
import pytest

from avgbound import rigid_body as rb
from avgbound.errors import ConfigError, ParameterError
from avgbound.n_operation import check_bundle
from avgbound.seminorms import component_family
from avgbound.system import check_identities
from oracles import A_FIG_A, B_FIG_A, DA1_DR2_FIG_A


@pytest.mark.parametrize("kw,cond", [
    (dict(lambda1=0.0), "lambda1 > 0"),
    (dict(mu=2.0), "-lambda1 < mu < lambda1"),
    (dict(mu=-2.0), "-lambda1 < mu < lambda1"),
    (dict(lambda2=-2.5), "lambda2 > -lambda1"),
    (dict(I0=(4.0, -1.0)), "I0 > 0"),
    (dict(epsilon=0.0), "epsilon > 0"),
    (dict(U=-1.0), "U > 0"),
    (dict(theta0=0.3), "theta0 = 0"),
])
def test_inadmissible_parameters_name_condition(kw, cond):
    p = rb.RigidBodyParams(**{**rb.FIGURES["a"], **kw})
    with pytest.raises(ParameterError) as exc:
        rb.build_system(p)
    assert exc.value.condition == cond


def test_figure_configs():
    a = rb.figure_config("a")
    assert (a.mu, a.lambda1, a.lambda2, a.I0, a.epsilon, a.U) == (1, 2, -1, (4, 4), 1e-2, 1)
    c = rb.figure_config("c")
    assert (c.mu, c.lambda1, c.lambda2, c.I0, c.epsilon, c.U) == (1, 1.1, -1, (4, 4), 1e-3, 3)
    assert rb.figure_config("b") == a
    assert rb.figure_config("d") == c
    with pytest.raises(ConfigError):
        rb.figure_config("e")


def test_system_values(fig_a_params):
    sys = rb.build_system(fig_a_params)
    I = np.array([2.0, 3.0])
    np.testing.assert_allclose(sys.f_bar(I), [-4.0, 3.0])
    np.testing.assert_array_equal(sys.s(I, 0.0), [0.0, 0.0])
    th = 0.3
    np.testing.assert_allclose(sys.s(I, th), 0.5 * math.sin(0.6) * np.array([-1 / 3, 1 / 2]))
    np.testing.assert_array_equal(sys.M_fun(I), np.diag([-4.0, -1.0]))
    assert sys.omega(I) == 6.0


def test_identities_below_threshold(fig_a_params):
    rep = check_identities(rb.build_system(fig_a_params), samples=1000, rng_seed=7)
    assert rep.passed(1e-6), rep.to_dict()


@pytest.mark.parametrize("mu,l1,l2", [(0.5, 1.0, 3.0), (-0.9, 1.0, -0.5), (0.0, 2.0, 1.0)])
def test_identities_other_parameters(mu, l1, l2):
    p = rb.RigidBodyParams(mu=mu, lambda1=l1, lambda2=l2, I0=(2.0, 3.0), epsilon=0.01, U=1.0)
    assert check_identities(rb.build_system(p), samples=200).passed(1e-6)


def test_bundle_hand_values(fig_a_params):
    B = rb.build_bundle(fig_a_params)
    r0 = np.zeros(2)
    np.testing.assert_allclose(B.a(0.0, r0), A_FIG_A, rtol=1e-15)
    np.testing.assert_allclose(B.b(0.0, r0), B_FIG_A, rtol=1e-15)
    assert B.da_dr(0.0, r0)[0, 1] == pytest.approx(DA1_DR2_FIG_A, rel=1e-15)
    np.testing.assert_array_equal(B.rho(0.0), [4.0, 4.0])


def test_mu_zero_bundle_vanishes():
    p = rb.RigidBodyParams(mu=0.0, lambda1=2.0, lambda2=-1.0, I0=(4.0, 4.0), epsilon=0.01, U=1.0)
    B = rb.build_bundle(p)
    r = np.array([0.5, 1.0])
    for fn in (B.a, B.b, B.c):
        np.testing.assert_array_equal(fn(0.3, r), [0.0, 0.0])


def _central(fun, x, h=1e-6):
    return (fun(x + h) - fun(x - h)) / (2 * h)


@pytest.mark.parametrize("tau,r", [(0.0, (0.0, 0.0)), (0.4, (0.3, 0.9)), (0.9, (0.1, 2.0))])
def test_analytic_partials_match_central_differences(fig_a_params, tau, r):
    B = rb.build_bundle(fig_a_params)
    r = np.array(r)
    for name, d_tau, d_r in (("a", B.da_dtau, B.da_dr), ("b", B.db_dtau, B.db_dr)):
        fn = getattr(B, name)
        np.testing.assert_allclose(d_tau(tau, r), _central(lambda t: fn(t, r), tau), rtol=1e-7, atol=1e-10)
        for nu in range(2):
            e = np.eye(2)[nu]
            np.testing.assert_allclose(d_r(tau, r)[:, nu], _central(lambda x: fn(tau, r + (x - r[nu]) * e), r[nu]),
                                       rtol=1e-7, atol=1e-10)
    np.testing.assert_allclose(B.dR_hat(tau), _central(B.R_hat, tau), rtol=1e-7, atol=1e-12)


def test_partition_family_refused(fig_a_params):
    with pytest.raises(ConfigError):
        rb.build_bundle(fig_a_params, family="partition")


def test_bundle_bounds_hold_on_samples(fig_a_params):
    rep = check_bundle(rb.build_bundle(fig_a_params), rb.build_system(fig_a_params),
                       rb.closed_form_flow(fig_a_params), component_family(2), samples=1000, rng_seed=11)
    assert rep.passed, rep.to_dict()


def test_domain_ball_inside_domain(fig_a_params):
    B = rb.build_bundle(fig_a_params)
    sys = rb.build_system(fig_a_params)
    flow = rb.closed_form_flow(fig_a_params)
    rng = np.random.default_rng(5)
    for tau in np.linspace(0.0, 0.99, 20):
        J, rho = flow.J(tau), B.rho(tau)
        np.testing.assert_allclose(rho, J, rtol=1e-15)
        for _ in range(50):
            assert sys.in_domain(J + rng.uniform(-0.999, 0.999, 2) * rho)
