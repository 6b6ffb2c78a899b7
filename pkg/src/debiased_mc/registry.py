"""Named built-ins selectable from the CLI.

Integrands and root problems are module-level functions (picklable, no
expression parsing); Heston parameter presets live in the heston module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .heston import HESTON_PRESETS

__all__ = ["INTEGRANDS", "ROOT_PROBLEMS", "HESTON_PRESETS", "Integrand", "RootProblem"]


@dataclass(frozen=True)
class Integrand:
    f: Callable[[float], float]
    lo: float
    hi: float
    exact: float | None  # known integral, for reporting only


@dataclass(frozen=True)
class RootProblem:
    h: Callable[[float], float]
    h_prime: Callable[[float], float]
    target: float
    start_low: float
    start_high: float
    root: float | None  # known root, for reporting only


def _sin_pi_x(x: float) -> float:
    return math.sin(math.pi * x)


def _identity(x: float) -> float:
    return x


def _exp_x(x: float) -> float:
    return math.exp(x)


def _cube(x: float) -> float:
    return x**3


def _cube_prime(x: float) -> float:
    return 3.0 * x * x


INTEGRANDS = {
    "sin_pi_x": Integrand(_sin_pi_x, 0.0, 1.0, 2.0 / math.pi),
    "linear": Integrand(_identity, 0.0, 1.0, 0.5),
    "exp_x": Integrand(_exp_x, 0.0, 1.0, math.e - 1.0),
}

ROOT_PROBLEMS = {
    "cubic_root": RootProblem(_cube, _cube_prime, target=1.0, start_low=-2.0, start_high=3.0, root=1.0),
}
