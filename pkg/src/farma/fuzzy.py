"""Takagi-Sugeno blending of ARMA controllers.

Ramp membership functions grade a measured decision variable, rule
weights come from the product T-norm over its components, and the
blended request is the weight-normalized average of the member
controllers' saturated outputs. Every member steps at every sample so
its history stays synchronized with the loop even while its weight is
zero, letting a rule take over mid-run.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Literal, Sequence

import numpy as np

from farma.arma import ArmaController
from farma.plants import SaturationLimits, wrap_pi

__all__ = [
    "MembershipFunction",
    "ramp_up",
    "ramp_down",
    "FuzzyRule",
    "rule_weights",
    "blend_outputs",
    "FarmaController",
    "abs_tracking_error",
    "abs_wrapped_angle",
    "DECISION_VARIABLES",
]


@dataclass(frozen=True)
class MembershipFunction:
    """Piecewise-linear ramp on [a, b]; constant 0/1 outside.

    ramp_up rises from 0 at a to 1 at b; ramp_down falls from 1 to 0.
    """

    kind: Literal["ramp_up", "ramp_down"]
    a: float
    b: float

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError("breakpoints must satisfy a < b")
        if self.kind not in ("ramp_up", "ramp_down"):
            raise ValueError(f"unknown membership kind {self.kind!r}")

    def __call__(self, gamma: float) -> float:
        t = (float(gamma) - self.a) / (self.b - self.a)
        t = min(max(t, 0.0), 1.0)
        return t if self.kind == "ramp_up" else 1.0 - t


def ramp_up(a: float, b: float) -> MembershipFunction:
    return MembershipFunction("ramp_up", a, b)


def ramp_down(a: float, b: float) -> MembershipFunction:
    return MembershipFunction("ramp_down", a, b)


@dataclass(frozen=True)
class FuzzyRule:
    """One membership per decision-variable component, firing one controller."""

    memberships: tuple[MembershipFunction, ...]
    controller_index: int


def rule_weights(rules: Sequence[FuzzyRule], gamma) -> np.ndarray:
    """Product-T-norm firing strength of each rule at gamma."""
    gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
    weights = np.empty(len(rules))
    for i, rule in enumerate(rules):
        if len(rule.memberships) != gamma.size:
            raise ValueError("rule arity does not match the decision variable")
        w = 1.0
        for mf, g in zip(rule.memberships, gamma):
            w *= mf(g)
        weights[i] = w
    return weights


def blend_outputs(weights: np.ndarray, outputs: Sequence[np.ndarray]) -> np.ndarray:
    """Weighted average of member outputs; equal weights if all are zero.

    The all-zero fallback keeps the blender total; shipped partitions of
    unity never reach it.
    """
    total = float(np.sum(weights))
    stacked = np.stack(outputs)
    if total <= 0.0:
        return stacked.mean(axis=0)
    return (np.asarray(weights)[:, None] * stacked).sum(axis=0) / total


def abs_tracking_error(r, y) -> np.ndarray:
    """|r - y| collapsed to a scalar decision variable."""
    return np.array([np.abs(np.subtract(r, y)).max()])


def abs_wrapped_angle(r, y) -> np.ndarray:
    """|wrapped angle| of the second output component [p, phi]."""
    return np.array([abs(wrap_pi(y[1]))])


DECISION_VARIABLES: dict[str, Callable] = {
    "abs_tracking_error": abs_tracking_error,
    "abs_wrapped_angle": abs_wrapped_angle,
}


class FarmaController:
    """Fuzzy blend of ARMA controllers (one rule per controller)."""

    def __init__(
        self,
        controllers: Sequence[ArmaController],
        rules: Sequence[FuzzyRule],
        gamma: Callable[[np.ndarray, np.ndarray], np.ndarray],
        limits: SaturationLimits,
    ):
        if len(controllers) < 1:
            raise ValueError("need at least one controller")
        if len(rules) != len(controllers):
            raise ValueError("need exactly one rule per controller")
        for rule in rules:
            if not 0 <= rule.controller_index < len(controllers):
                raise ValueError("rule fires a controller that does not exist")
        self.controllers = list(controllers)
        self.rules = list(rules)
        self.gamma = gamma
        self.limits = limits

    def reset(self):
        for ctrl in self.controllers:
            ctrl.reset()

    def step(self, r, y) -> np.ndarray:
        gamma_k = self.gamma(r, y)
        # Every member advances with its own saturated output, whatever
        # its current weight.
        saturated = [
            np.clip(ctrl.step(r, y), ctrl.limits.u_min, ctrl.limits.u_max)
            for ctrl in self.controllers
        ]
        total = 0.0
        mix = 0.0
        for rule in self.rules:
            w = 1.0
            for mf, g in zip(rule.memberships, gamma_k):
                w *= mf(g)
            total += w
            mix = mix + w * saturated[rule.controller_index]
        if total <= 0.0:
            out = saturated[self.rules[0].controller_index].copy()
            for rule in self.rules[1:]:
                out += saturated[rule.controller_index]
            return out / len(self.rules)
        return mix / total

    def __call__(self, k, r_k, y_k, x_k, x_ref_k):
        return self.step(r_k, y_k)
