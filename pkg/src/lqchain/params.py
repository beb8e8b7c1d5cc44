"""Game parameters, boundary conditions, time grids and shared errors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ValidationError(ValueError):
    """Raised when inputs violate a documented precondition."""


class BlowUpError(ArithmeticError):
    """Raised when an integration produces nonfinite values.

    Attributes
    ----------
    time : float
        Grid time at which the first nonfinite value appeared.
    """

    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = time


@dataclass(frozen=True)
class GameParams:
    """Model constants shared by every solver.

    Parameters
    ----------
    epsilon : float
        Running-cost weight, strictly positive.
    c : float
        Terminal-cost weight, nonnegative.
    sigma : float
        Diffusion coefficient, strictly positive.
    horizon : float
        Terminal time T, strictly positive.
    u : float
        Mean-field mixing weight in [0, 1]; 1 is the pure nearest-neighbor
        game, 0 the pure mean-field game.
    branching : int
        Number of descendants per node in the tree game, at least 1.
    """

    epsilon: float = 1.0
    c: float = 1.0
    sigma: float = 1.0
    horizon: float = 1.0
    u: float = 1.0
    branching: int = 1

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValidationError(f"epsilon must be > 0, got {self.epsilon}")
        if self.c < 0:
            raise ValidationError(f"c must be >= 0, got {self.c}")
        if not self.sigma > 0:
            raise ValidationError(f"sigma must be > 0, got {self.sigma}")
        if not self.horizon > 0:
            raise ValidationError(f"horizon must be > 0, got {self.horizon}")
        if not 0.0 <= self.u <= 1.0:
            raise ValidationError(f"u must lie in [0, 1], got {self.u}")
        if int(self.branching) != self.branching or self.branching < 1:
            raise ValidationError(f"branching must be an integer >= 1, got {self.branching}")


@dataclass(frozen=True)
class BoundaryCondition:
    """Self-contained control problem assigned to the last chain player.

    ``attracted_to_zero`` and ``no_control`` are the two special cases;
    ``general`` carries the quadratic-attraction constants (a1, a2, m, c1, c2)
    with a1 > 0 and c1 > 0.
    """

    kind: str
    a1: float = 0.0
    a2: float = 0.0
    m: float = 0.0
    c1: float = 0.0
    c2: float = 0.0

    _KINDS = ("attracted-to-zero", "no-control", "general")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValidationError(f"unknown boundary condition {self.kind!r}")
        if self.kind == "general":
            if not self.a1 > 0:
                raise ValidationError(f"general boundary condition needs a1 > 0, got {self.a1}")
            if not self.c1 > 0:
                raise ValidationError(f"general boundary condition needs c1 > 0, got {self.c1}")

    @classmethod
    def attracted_to_zero(cls) -> "BoundaryCondition":
        return cls(kind="attracted-to-zero")

    @classmethod
    def no_control(cls) -> "BoundaryCondition":
        return cls(kind="no-control")

    @classmethod
    def general(cls, a1: float, m: float, c1: float, a2: float = 0.0, c2: float = 0.0) -> "BoundaryCondition":
        return cls(kind="general", a1=a1, a2=a2, m=m, c1=c1, c2=c2)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on [0, t_end] with spacing ``step``."""

    step: float
    t_end: float
    nodes: np.ndarray = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        if not self.step > 0:
            raise ValidationError(f"grid step must be > 0, got {self.step}")
        if not self.t_end > 0:
            raise ValidationError(f"grid end must be > 0, got {self.t_end}")
        if self.step > self.t_end * (1 + 1e-12):
            raise ValidationError("grid step exceeds the horizon")
        n = self.t_end / self.step
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise ValidationError("step must divide the horizon evenly")
        if self.nodes is None:
            object.__setattr__(self, "nodes", np.linspace(0.0, self.t_end, int(round(n)) + 1))

    @classmethod
    def uniform(cls, t_end: float, step: float = 1e-3) -> "TimeGrid":
        return cls(step=step, t_end=t_end)

    @property
    def n_steps(self) -> int:
        return len(self.nodes) - 1

    def index_of(self, t: float) -> int:
        """Nearest-node index for ``t``; rejects points off the grid."""
        i = int(round(t / self.step))
        if i < 0 or i > self.n_steps or abs(i * self.step - t) > 1e-9 * max(1.0, self.t_end):
            raise ValidationError(f"t={t} is not a node of the grid")
        return i
