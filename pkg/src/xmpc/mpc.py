"""Two-hour setpoint optimization over the trained surrogates.

Each control interval the controller picks cooling setpoints (u1, u2) for
the coming two hours from the 1 K grid 22..26 degC by exhaustively costing
all 25 pairs.  A candidate's cost is the predicted cooling power plus a
quadratic penalty for exceeding each hour's demand-response power limit:

    J(u1, u2) = y1 + V(y1, L1) + y2 + V(y2, L2)
    V(y, L)   = (y - L)^2  if y > L  else  0

The rollout chains the surrogates hour by hour.  Both models read the same
per-hour feature vector (the hour's setpoint, the zone temperature entering
the hour, and that hour's boundary conditions): the temperature model
returns the zone temperature an hour later, the cooling model that hour's
average power.  Predicted cooling rates are clamped at zero from below
before costing, since a slightly negative network output is a model
artifact, not a real power.

Cost ties prefer the larger u1 and then the larger u2, so the controller
only moves off the comfort ceiling for a strict cost advantage.  With the
untightened 5000 W limits this makes (26, 26) the resting choice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InvalidInputError, OptimizationFailedError
from .testbed import Disturbance

Predictor = Callable[[np.ndarray], float]


@dataclass
class MpcProblem:
    """One control interval: measured state, two-hour forecast, limits, models.

    ``fx`` and ``fy`` map the five-feature vector
    (setpoint, zone_temp, oa_temp, oa_radiation, occupancy) to the next zone
    temperature and the hour's cooling rate respectively.
    """

    zone_temp_c: float
    d1: Disturbance
    d2: Disturbance
    p_limit_t1_w: float
    p_limit_t2_w: float
    fx: Predictor
    fy: Predictor
    setpoint_min_c: float = 22.0
    setpoint_max_c: float = 26.0
    setpoint_step_c: float = 1.0

    def __post_init__(self):
        if not math.isfinite(self.zone_temp_c):
            raise InvalidInputError(f"zone temperature {self.zone_temp_c!r} is not finite")
        for name in ("p_limit_t1_w", "p_limit_t2_w"):
            limit = getattr(self, name)
            if not math.isfinite(limit) or limit <= 0.0:
                raise InvalidInputError(f"{name} must be positive and finite, got {limit!r}")
        if self.setpoint_step_c <= 0.0 or self.setpoint_min_c > self.setpoint_max_c:
            raise InvalidInputError("setpoint grid is empty or has non-positive step")


@dataclass
class RolloutResult:
    """Predicted trajectory and cost terms for one setpoint pair."""

    x1_c: float
    y1_w: float
    v1: float
    x2_c: float
    y2_w: float
    v2: float
    cost: float


@dataclass
class MpcDecision:
    """The chosen pair plus its predictions and the full candidate table."""

    u1_c: float
    u2_c: float
    x1_c: float
    x2_c: float
    y1_w: float
    y2_w: float
    v1: float
    v2: float
    cost: float
    candidates: list[tuple[float, float, float]] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "u1_c": self.u1_c,
            "u2_c": self.u2_c,
            "x1_c": self.x1_c,
            "x2_c": self.x2_c,
            "y1_w": self.y1_w,
            "y2_w": self.y2_w,
            "v1": self.v1,
            "v2": self.v2,
            "cost": self.cost,
            "candidates": [
                {"u1": u1, "u2": u2, "cost": cost if math.isfinite(cost) else None}
                for u1, u2, cost in self.candidates
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "MpcDecision":
        return cls(
            u1_c=data["u1_c"],
            u2_c=data["u2_c"],
            x1_c=data["x1_c"],
            x2_c=data["x2_c"],
            y1_w=data["y1_w"],
            y2_w=data["y2_w"],
            v1=data["v1"],
            v2=data["v2"],
            cost=data["cost"],
            candidates=[
                (c["u1"], c["u2"], math.inf if c["cost"] is None else c["cost"])
                for c in data["candidates"]
            ],
        )

    def candidate_cost(self, u1: float, u2: float) -> float:
        for cu1, cu2, cost in self.candidates:
            if cu1 == u1 and cu2 == u2:
                return cost
        raise KeyError(f"pair ({u1}, {u2}) not in candidate table")


def penalty(power_w: float, p_limit_w: float) -> float:
    """Quadratic overshoot penalty in W^2; zero at or below the limit."""
    if not math.isfinite(p_limit_w) or p_limit_w <= 0.0:
        raise InvalidInputError(f"power limit must be positive and finite, got {p_limit_w!r}")
    if power_w > p_limit_w:
        return (power_w - p_limit_w) ** 2
    return 0.0


def setpoint_grid(problem: MpcProblem) -> list[float]:
    """Candidate setpoints, ascending."""
    grid = []
    value = problem.setpoint_min_c
    while value <= problem.setpoint_max_c + 1e-9:
        grid.append(round(value, 9))
        value += problem.setpoint_step_c
    return grid


def _features(setpoint: float, zone_temp: float, d: Disturbance) -> np.ndarray:
    return np.array([setpoint, zone_temp, d.oa_temp_c, d.oa_radiation_wm2, d.occupancy])


def _clamp_power(value: float) -> float:
    # max() would silently swallow a NaN prediction; keep it visible so the
    # candidate's cost stays non-finite and optimize() can skip or refuse it.
    if math.isnan(value):
        return math.nan
    return max(0.0, value)


def rollout(problem: MpcProblem, u1: float, u2: float) -> RolloutResult:
    """Chain the surrogates over the two horizon hours for one setpoint pair."""
    f1 = _features(u1, problem.zone_temp_c, problem.d1)
    x1 = float(problem.fx(f1))
    y1 = _clamp_power(float(problem.fy(f1)))
    if not (math.isfinite(x1) and math.isfinite(y1)):
        return RolloutResult(x1, y1, math.nan, math.nan, math.nan, math.nan, math.nan)
    f2 = _features(u2, x1, problem.d2)
    x2 = float(problem.fx(f2))
    y2 = _clamp_power(float(problem.fy(f2)))
    v1 = penalty(y1, problem.p_limit_t1_w)
    if not (math.isfinite(x2) and math.isfinite(y2)):
        return RolloutResult(x1, y1, v1, x2, y2, math.nan, math.nan)
    v2 = penalty(y2, problem.p_limit_t2_w)
    return RolloutResult(x1, y1, v1, x2, y2, v2, cost=y1 + v1 + y2 + v2)


def optimize(problem: MpcProblem) -> MpcDecision:
    """Exhaustively cost every setpoint pair and return the argmin.

    Iteration runs from large setpoints down and a candidate replaces the
    incumbent only on strictly lower cost, which implements the tie-break
    (prefer larger u1, then larger u2) without a separate comparison pass.
    The returned candidate table lists all pairs in that evaluation order.
    """
    grid = setpoint_grid(problem)
    best: tuple[float, float, RolloutResult] | None = None
    candidates: list[tuple[float, float, float]] = []
    for u1 in reversed(grid):
        for u2 in reversed(grid):
            result = rollout(problem, u1, u2)
            candidates.append((u1, u2, result.cost))
            if not math.isfinite(result.cost):
                continue
            if best is None or result.cost < best[2].cost:
                best = (u1, u2, result)
    if best is None:
        raise OptimizationFailedError(
            f"all {len(candidates)} setpoint candidates evaluated to non-finite cost"
        )
    u1, u2, r = best
    return MpcDecision(
        u1_c=u1,
        u2_c=u2,
        x1_c=r.x1_c,
        x2_c=r.x2_c,
        y1_w=r.y1_w,
        y2_w=r.y2_w,
        v1=r.v1,
        v2=r.v2,
        cost=r.cost,
        candidates=candidates,
    )
