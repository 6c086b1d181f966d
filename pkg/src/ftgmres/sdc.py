"""Hessenberg-bound SDC detector and the single transient fault injector.

Every Arnoldi coefficient satisfies ``|h_ij| <= ||A||_2 <= ||A||_F`` because
it is a projection of ``A q_j`` with unit ``q_j``. Anything larger, or
non-finite, cannot come from correct arithmetic.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Union

import numpy as np

UNIT_ROUNDOFF = np.finfo(np.float64).eps / 2
# rounding slack on the Frobenius bound for fault-free runs
BOUND_SLACK = 64 * UNIT_ROUNDOFF

NORM = "norm"


class Location(NamedTuple):
    """Where a Hessenberg entry was produced.

    ``mgs_index`` is the 1-based MGS step ``i`` for ``h_{i,j}``, or ``"norm"``
    for the subdiagonal ``h_{j+1,j}``.
    """

    outer_iter: int
    inner_iter: int
    mgs_index: Union[int, str]


class DetectorAction(enum.Enum):
    REPORT_ONLY = "report"
    ABORT_INNER = "abort"
    HALT = "halt"


@dataclass(frozen=True)
class DetectorConfig:
    bound: float
    action: DetectorAction = DetectorAction.ABORT_INNER

    def __post_init__(self):
        if not (math.isfinite(self.bound) and self.bound > 0):
            raise ValueError("detector bound must be finite and positive")

    @classmethod
    def for_matrix(cls, A, action: DetectorAction = DetectorAction.ABORT_INNER) -> "DetectorConfig":
        """Bound ``||A||_F`` of the outermost matrix, widened by rounding slack."""
        from .sparse import frobenius_norm
        return cls(float(frobenius_norm(A) * (1 + BOUND_SLACK)), action)


@dataclass(frozen=True)
class DetectorEvent:
    location: Location
    observed: float
    bound: float


class SDCDetected(RuntimeError):
    """Raised by the HALT action."""

    def __init__(self, event: DetectorEvent):
        super().__init__(
            f"|h| = {abs(event.observed):.6g} exceeds bound {event.bound:.6g} at {tuple(event.location)}")
        self.event = event


def check(cfg: DetectorConfig, value: float, location: Location) -> DetectorEvent | None:
    """``None`` if ``value`` passes, otherwise the event describing the violation."""
    if math.isfinite(value) and abs(value) <= cfg.bound:
        return None
    return DetectorEvent(location, float(value), cfg.bound)


class MgsPosition(enum.Enum):
    FIRST = "first"
    LAST = "last"


class FaultClass(enum.IntEnum):
    LARGE = 1
    SLIGHTLY_SMALLER = 2
    NEARLY_ZERO = 3

    @property
    def multiplier(self) -> float:
        return _MULTIPLIERS[self]


_MULTIPLIERS = {
    FaultClass.LARGE: 1e150,
    FaultClass.SLIGHTLY_SMALLER: 10.0 ** -0.5,
    FaultClass.NEARLY_ZERO: 1e-300,
}


@dataclass(frozen=True)
class FaultSpec:
    target_inner_solve: int
    target_inner_iteration: int
    mgs_position: MgsPosition = MgsPosition.FIRST
    fault_class: FaultClass = FaultClass.SLIGHTLY_SMALLER

    def __post_init__(self):
        if self.target_inner_solve < 1 or self.target_inner_iteration < 1:
            raise ValueError("fault targets are 1-based")

    def matches(self, loc: Location) -> bool:
        if loc.mgs_index == NORM:
            return False
        if loc.outer_iter != self.target_inner_solve or loc.inner_iter != self.target_inner_iteration:
            return False
        want = 1 if self.mgs_position is MgsPosition.FIRST else loc.inner_iter
        return loc.mgs_index == want


@dataclass(frozen=True)
class FiredFault:
    location: Location
    original: float
    injected: float


@dataclass
class FaultInjector:
    """Transient single-shot fault: fires on the first matching location, then disarms."""

    spec: FaultSpec
    fired: FiredFault | None = field(default=None)

    @property
    def armed(self) -> bool:
        return self.fired is None

    def maybe_inject(self, h: float, location: Location) -> float:
        if self.fired is not None or not self.spec.matches(location):
            return h
        with np.errstate(over="ignore", under="ignore"):
            injected = float(np.float64(h) * self.spec.fault_class.multiplier)
        self.fired = FiredFault(location, float(h), injected)
        return injected
