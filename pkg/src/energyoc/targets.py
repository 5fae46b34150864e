"""Analytic targets, their exact controls, and the preset barrier / bound functions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

Field = Callable[[np.ndarray, np.ndarray], np.ndarray]

TARGET_KINDS = ("u1", "u2", "u3")
PRESETS = ("g1", "g2", "f1", "f2", "f3", "f4", "f5")


def _logistic(t):
    # numerically stable 1 / (1 + exp(-t))
    return 0.5 * (1.0 + np.tanh(0.5 * t))


def plateau(s, k: float):
    """Difference of two logistic steps at 0.25 and 0.75 with steepness ``k``."""
    return _logistic(k * (s - 0.25)) - _logistic(k * (s - 0.75))


def plateau_d1(s, k: float):
    a = _logistic(k * (s - 0.25))
    b = _logistic(k * (s - 0.75))
    return k * (a * (1 - a) - b * (1 - b))


def plateau_d2(s, k: float):
    a = _logistic(k * (s - 0.25))
    b = _logistic(k * (s - 0.75))
    return k * k * (a * (1 - a) * (1 - 2 * a) - b * (1 - b) * (1 - 2 * b))


@dataclass(frozen=True)
class TargetSpec:
    """One of the desired states ``u1``, ``u2`` (steepness ``k``) or the indicator ``u3``."""

    kind: str
    k: float = 40.0

    def __post_init__(self):
        if self.kind not in TARGET_KINDS:
            raise ValueError(f"unknown target {self.kind!r}; expected one of {TARGET_KINDS}")

    def __call__(self, x, y):
        return eval_target(self, x, y)

    @property
    def has_exact_control(self) -> bool:
        return self.kind != "u3"

    @property
    def quadrature_subdivisions(self) -> int:
        return 1 if self.kind == "u1" else 4

    def control(self, x, y):
        return eval_exact_control("z" + self.kind[1], x, y, self.k)

    def gradient(self, x, y):
        """Exact gradient as a pair of arrays; ``None`` for the discontinuous target."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "u1":
            return (
                np.pi * np.cos(np.pi * x) * np.sin(np.pi * y),
                np.pi * np.sin(np.pi * x) * np.cos(np.pi * y),
            )
        if self.kind == "u2":
            return (
                plateau_d1(x, self.k) * plateau(y, self.k),
                plateau(x, self.k) * plateau_d1(y, self.k),
            )
        return None


def eval_target(spec: TargetSpec, x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if spec.kind == "u1":
        return np.sin(np.pi * x) * np.sin(np.pi * y)
    if spec.kind == "u2":
        return plateau(x, spec.k) * plateau(y, spec.k)
    inside = (x >= 0.25) & (x <= 0.75) & (y >= 0.25) & (y <= 0.75)
    return inside.astype(float)


class UnsupportedOperation(ValueError):
    pass


def eval_exact_control(kind: str, x, y, k: float = 40.0):
    """``z = -Laplace(u)`` for the smooth targets."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if kind == "z1":
        return 2.0 * np.pi**2 * np.sin(np.pi * x) * np.sin(np.pi * y)
    if kind == "z2":
        return -(plateau_d2(x, k) * plateau(y, k) + plateau(x, k) * plateau_d2(y, k))
    if kind == "z3":
        raise UnsupportedOperation("the indicator target has no function-valued control")
    raise ValueError(f"unknown control {kind!r}")


@dataclass(frozen=True)
class ConstraintSpec:
    """``mode`` is ``none``, ``state`` (barriers on u) or ``control`` (weak bounds on -Laplace u)."""

    mode: str = "none"
    lower: Field | None = None
    upper: Field | None = None
    name: str = "none"

    def __post_init__(self):
        if self.mode not in ("none", "state", "control"):
            raise ValueError(f"unknown constraint mode {self.mode!r}")
        if self.mode != "none" and (self.lower is None or self.upper is None):
            raise ValueError("constrained modes need both a lower and an upper function")


NO_CONSTRAINTS = ConstraintSpec()


def preset_constraints(name: str, k: float = 40.0) -> ConstraintSpec:
    """Barrier pairs ``g1, g2`` and control bound pairs ``f1`` .. ``f5``."""
    u1 = TargetSpec("u1")
    u2 = TargetSpec("u2", k)

    def z1(x, y):
        return eval_exact_control("z1", x, y)

    def z2(x, y):
        return eval_exact_control("z2", x, y, k)

    def zero(x, y):
        return np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)

    if name == "none":
        return NO_CONSTRAINTS
    if name == "g1":
        return ConstraintSpec("state", zero, lambda x, y: 0.5 * u1(x, y), name)
    if name == "g2":
        return ConstraintSpec("state", zero, lambda x, y: 0.5 * u2(x, y), name)
    if name == "f1":
        return ConstraintSpec("control", zero, lambda x, y: 0.5 * z1(x, y), name)
    if name == "f2":
        return ConstraintSpec("control", zero, lambda x, y: np.minimum(z1(x, y), 10.0), name)
    if name == "f3":
        return ConstraintSpec(
            "control",
            lambda x, y: np.maximum(np.minimum(z2(x, y), 0.0), -500.0),
            lambda x, y: np.minimum(np.maximum(z2(x, y), 0.0), 500.0),
            name,
        )
    if name == "f4":
        return ConstraintSpec(
            "control", zero, lambda x, y: np.minimum(np.maximum(z2(x, y), 0.0), 1000.0), name
        )
    if name == "f5":
        return ConstraintSpec(
            "control",
            zero,
            lambda x, y: 4.0 * np.minimum(np.maximum(z2(x, y), 0.0), 250.0),
            name,
        )
    raise ValueError(f"unknown constraint preset {name!r}; expected one of {PRESETS} or 'none'")


def constant(value: float) -> Field:
    def f(x, y):
        return np.full(np.broadcast(np.asarray(x), np.asarray(y)).shape, float(value))

    return f
