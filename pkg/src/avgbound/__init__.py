"""Seminorm error estimators for the averaging method on one-frequency systems.

The N-operation (:func:`run_n_operation`) produces curves ``n(tau)`` that
bound the rescaled averaging error ``L(t) = (I(t) - J(eps t)) / eps`` in
every seminorm of a separating family; the L-operation
(:func:`run_l_operation`) integrates ``L`` directly to test them.
"""

from .errors import (AvgBoundError, AveragedBlowupError, ConfigError, DimensionError, DomainError,
                     HypothesisViolation, IterationError, ParameterError, PartitionError, StiffnessError)
from .flow import AveragedFlow, closed_form_flow, solve_averaged
from .l_operation import DirectResult, VerificationReport, run_l_operation, verify_bounds
from .n_operation import (BoundResult, EstimatorBundle, FixedPointSpec, alpha, audit_integral_inequality,
                          check_bundle, find_fixed_point, gamma, integrate_mn, run_n_operation)
from .ode import IntegratorConfig, Trajectory, integrate, integrate_linear_matrix
from .seminorms import SeminormFamily, check_family, component_family, partition_family
from .system import SystemModel, check_identities

__version__ = "0.1.0"
