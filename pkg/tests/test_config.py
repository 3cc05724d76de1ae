import numpy as np
import pytest

from avgbound.config import load_config, parse_config
from avgbound.errors import ConfigError, ParameterError


def test_defaults_are_figure_a_ready():
    cfg = parse_config("example.figure = a\n")
    p = cfg.params
    assert (p.mu, p.lambda1, p.lambda2, p.epsilon, p.U) == (1.0, 2.0, -1.0, 0.01, 1.0)
    assert cfg.family_kind == "component"
    assert cfg.n_samples == 100_000 and cfg.n_windows == 20
    assert cfg.steps_per_period == 50


def test_override_after_figure_preset():
    cfg = parse_config("example.figure = c\nexample.epsilon = 2e-3  # comment\nexample.I0 = 3, 5\n")
    assert cfg.params.epsilon == 2e-3
    assert tuple(cfg.params.I0) == (3.0, 5.0)
    assert cfg.params.lambda1 == 1.1


def test_sections_parsed():
    cfg = parse_config("""
example.figure = a
family.kind = partition
family.blocks = 1; 2
n_op.abs_tol = 1e-9
n_op.method = rkf45
fixed_point.ell_star = 0.1, 0.1
fixed_point.sigma = 0.05, 0.05
fixed_point.A = 0.1, 0.2; 0.3, 0.4
l_op.steps_per_period = 80
samples.verify = 500
audit.nodes = 201
sweep.epsilon = 1e-2, 1e-3
sweep.workers = 2
seed = 9
""")
    assert cfg.blocks == ((0,), (1,))
    assert cfg.n_cfg.abs_tol == 1e-9
    np.testing.assert_array_equal(cfg.fixed_point["A"], [[0.1, 0.2], [0.3, 0.4]])
    assert cfg.steps_per_period == 80 and cfg.n_samples == 500 and cfg.audit_nodes == 201
    assert cfg.sweep == {"epsilon": [1e-2, 1e-3]} and cfg.workers == 2 and cfg.seed == 9


@pytest.mark.parametrize("text", [
    "example.figure = a\nexample.bogus = 1\n",
    "example.figure = a\nnosuch.key = 1\n",
    "example.figure = z\n",
    "example.figure = a\nexample.mu = one\n",
    "example.figure = a\nfamily.kind = partition\n",
    "example.figure = a\nfamily.blocks = 0, 1\n",
    "example.figure = a\nfixed_point.ell_star = 0.1, 0.1\n",
    "example.figure = a\nflow.source = guess\n",
    "example.figure = a\nsamples.verify = 2.5\n",
    "example.figure = a\nn_op.method = euler\n",
    "example.figure = a\nfixed_point.A = 1, 2; 3\n",
])
def test_invalid_configuration_rejected(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_inadmissible_parameters_become_config_error():
    with pytest.raises(ConfigError, match="lambda1 > 0"):
        parse_config("example.figure = a\nexample.lambda1 = 0\n")


def test_with_params_revalidates():
    cfg = parse_config("example.figure = a\n")
    assert cfg.with_params(epsilon=1e-3).params.epsilon == 1e-3
    with pytest.raises(ParameterError):
        cfg.with_params(lambda1=0.0)


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.cfg")
