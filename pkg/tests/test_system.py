import dataclasses

import numpy as np
import pytest

from avgbound.errors import DomainError
from avgbound.system import (IDENTITY_NAMES, SystemModel, average_over_angle, check_identities, corrupt,
                             segment_in_domain, taylor_G, taylor_H)
from oracles import toy_system


def trivial_system():
    """Constant ``f``, ``g = 0``: every auxiliary function vanishes identically."""
    c = np.array([0.3, -0.2])
    z = lambda *a: np.zeros(2)  # noqa: E731
    return SystemModel(
        d=2, in_domain=lambda I: True, f=lambda I, th: c, g=lambda I, th: 0.0, omega=lambda I: 2.0,
        f_bar=lambda I: c, df_bar=lambda I: np.zeros((2, 2)), d2f_bar=lambda I: np.zeros((2, 2, 2)),
        s=z, v=z, p=z, q=z, w=z, u=z, p_bar=z, M_fun=lambda I: np.zeros((2, 2)),
        I0=np.array([1.0, 1.0]), epsilon=0.1,
    )


def test_trivial_system_has_zero_residuals():
    rep = check_identities(trivial_system(), samples=50)
    assert all(r == 0.0 for r in rep.residuals.values())
    assert set(rep.residuals) == set(IDENTITY_NAMES)


def test_toy_system_passes():
    rep = check_identities(toy_system(), samples=300, rng_seed=1)
    assert rep.passed(1e-6), rep.to_dict()


@pytest.mark.parametrize("handle,identity", [("s", "a"), ("p", "d"), ("w", "e"), ("q", "f"), ("M_fun", "g"),
                                             ("p_bar", "e")])
def test_corruption_is_detected(handle, identity):
    rep = check_identities(corrupt(toy_system(), handle, 2.0), samples=50)
    assert identity in rep.failures(1e-6)


def test_wrong_taylor_remainder_detected():
    sys = dataclasses.replace(toy_system(), H_fun=lambda I, dI: np.array([[[-1.0]]]))
    assert "i" in check_identities(sys, samples=30).failures()
    sys = dataclasses.replace(toy_system(), G_fun=lambda I, dI: np.array([[0.4]]))
    assert "h" in check_identities(sys, samples=30).failures()


def test_taylor_fallbacks_match_toy():
    sys = toy_system()
    I, dI = np.array([1.2]), np.array([-0.5])
    np.testing.assert_allclose(taylor_G(sys, I, dI), [[0.5]], atol=1e-8)
    np.testing.assert_allclose(taylor_H(sys, I, dI), [[[-2.0]]], atol=1e-12)


def test_taylor_rejects_segment_leaving_domain():
    with pytest.raises(DomainError):
        taylor_G(toy_system(), np.array([1.0]), np.array([-2.0]))


def test_average_over_angle():
    sys = toy_system()
    np.testing.assert_allclose(average_over_angle(sys.p, np.array([0.8])), [0.4], atol=1e-14)
    np.testing.assert_allclose(average_over_angle(sys.s, np.array([0.8])), [0.0], atol=1e-14)
    with pytest.raises(DomainError):
        average_over_angle(sys.p, np.array([-1.0]), in_domain=sys.in_domain)


def test_segment_in_domain():
    inside = lambda I: bool(np.all(np.asarray(I) > 0))  # noqa: E731
    assert segment_in_domain(inside, np.array([1.0]), np.array([-0.5]))
    assert not segment_in_domain(inside, np.array([1.0]), np.array([-1.5]))


def test_model_validation():
    with pytest.raises(DomainError):
        toy_system(I0=-1.0)
    with pytest.raises(ValueError):
        toy_system(eps=0.0)
    with pytest.raises(DomainError):
        toy_system(omega=lambda I: 0.0)


def test_report_records_location():
    rep = check_identities(corrupt(toy_system(), "s", 3.0), samples=20)
    loc = rep.to_dict()["a"]["location"]
    assert "I" in loc and "theta" in loc
    assert rep.to_dict()["a"]["passed"] is False
