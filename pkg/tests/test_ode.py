import numpy as np
import pytest
from scipy.linalg import expm

from avgbound.errors import StiffnessError
from avgbound.ode import IntegratorConfig, Trajectory, integrate, integrate_linear_matrix


def test_rkf45_exponential():
    traj = integrate(lambda t, y: -y, np.array([1.0]), (0.0, 2.0), IntegratorConfig(abs_tol=1e-12, rel_tol=1e-12))
    assert traj.status == "completed"
    t = np.linspace(0, traj.t_end, 101)
    np.testing.assert_allclose(traj(t)[:, 0], np.exp(-t), atol=1e-9)


def test_rk4_fourth_order():
    errs = []
    for h in (0.1, 0.05):
        traj = integrate(lambda t, y: np.cos(t) * y, np.array([1.0]), (0.0, 3.0), IntegratorConfig("rk4", step=h),
                         open_end=False)
        errs.append(abs(traj.y[-1, 0] - np.exp(np.sin(3.0))))
    assert 12 < errs[0] / errs[1] < 20


def test_dense_output_exact_at_nodes():
    traj = integrate(lambda t, y: np.array([y[1], -y[0]]), np.array([0.0, 1.0]), (0.0, 5.0))
    np.testing.assert_array_equal(traj(traj.t), traj.y)


def test_open_end_is_not_reached():
    traj = integrate(lambda t, y: np.ones(1), np.zeros(1), (0.0, 1.0))
    assert traj.t_end < 1.0
    assert traj.t_end == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(ValueError):
        traj(1.5)


def test_guard_localizes_violation():
    traj = integrate(lambda t, y: np.ones(1), np.zeros(1), (0.0, 2.0), guard=lambda t, y: y[0] < 0.5)
    assert traj.status == "domain_violation"
    assert traj.t_event == pytest.approx(0.5, abs=1e-8)
    assert traj.t_end <= 0.5


def test_rhs_failure_is_treated_as_violation():
    def rhs(t, y):
        if y[0] > 0.7:
            raise ValueError("outside")
        return np.ones(1)

    traj = integrate(rhs, np.zeros(1), (0.0, 2.0))
    assert traj.status == "domain_violation"
    assert traj.t_event == pytest.approx(0.7, abs=1e-6)


def test_blowup_raises_stiffness_with_partial():
    with pytest.raises(StiffnessError) as exc:
        integrate(lambda t, y: y**2, np.ones(1), (0.0, 2.0), IntegratorConfig(max_steps=100_000))
    assert exc.value.partial is not None
    assert exc.value.t_last < 1.0


def test_matrix_state_shape():
    traj = integrate(lambda t, Y: -Y, np.eye(2), (0.0, 1.0))
    assert traj(0.5).shape == (2, 2)
    assert traj(np.array([0.1, 0.2])).shape == (2, 2, 2)


def test_linear_matrix_matches_expm():
    A = np.array([[0.0, 1.0], [-2.0, -0.3]])
    R = integrate_linear_matrix(lambda t: A, (0.0, 2.0), IntegratorConfig(abs_tol=1e-12, rel_tol=1e-12))
    np.testing.assert_allclose(R(1.3), expm(1.3 * A), atol=1e-9)


@pytest.mark.parametrize("kw", [dict(method="euler"), dict(method="rk4"), dict(abs_tol=0.0), dict(max_step=-1.0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        IntegratorConfig(**kw)


def test_trajectory_single_node():
    tr = Trajectory([0.0], [[1.0, 2.0]], [[0.0, 0.0]])
    np.testing.assert_array_equal(tr(0.0), [1.0, 2.0])
