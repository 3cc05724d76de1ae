"""Lookup table of built-in and user-registered examples."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from .errors import ConfigError

__all__ = ["Example", "register_example", "get_example", "list_examples"]


@dataclass(frozen=True)
class Example:
    """Factory functions for one example.

    ``make_params(dict)`` builds a validated parameter object from a config
    block; ``build_bundle(params, family)`` may raise :class:`ConfigError`
    for families it does not support; ``closed_form_flow`` is optional.
    """
    name: str
    make_params: Callable
    build_system: Callable
    build_bundle: Callable
    closed_form_flow: Optional[Callable] = None


_REGISTRY: dict = {}


def register_example(example: Example, overwrite: bool = False):
    if example.name in _REGISTRY and not overwrite:
        raise ConfigError(f"example {example.name!r} already registered")
    _REGISTRY[example.name] = example


def get_example(name: str) -> Example:
    _register_builtins()
    try:
        return _REGISTRY[name]
    except KeyError:
        raise ConfigError(f"unknown example {name!r}; known: {sorted(_REGISTRY)}") from None


def list_examples():
    _register_builtins()
    return sorted(_REGISTRY)


def _rigid_params(block: dict):
    from .rigid_body import RigidBodyParams

    try:
        params = RigidBodyParams(
            mu=float(block["mu"]), lambda1=float(block["lambda1"]), lambda2=float(block["lambda2"]),
            I0=tuple(block["I0"]), epsilon=float(block["epsilon"]), U=float(block["U"]),
            theta0=float(block.get("theta0", 0.0)),
        )
    except KeyError as exc:
        raise ConfigError(f"missing rigid body parameter {exc.args[0]!r}") from None
    return params.validate()


def _register_builtins():
    from . import rigid_body

    _REGISTRY.setdefault("rigid_body", Example(
        name="rigid_body", make_params=_rigid_params, build_system=rigid_body.build_system,
        build_bundle=rigid_body.build_bundle, closed_form_flow=rigid_body.closed_form_flow))
