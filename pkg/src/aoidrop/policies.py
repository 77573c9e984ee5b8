"""Drop policies: which packet is discarded when a new update arrives.

A policy is consulted once per renewal cycle, at the successful-delivery
epoch, with the age reached at that epoch; the chosen scheme (DNP or DOP)
is then held for the entire cycle.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass, field

from .errors import InvalidPolicy

DNP_SCHEME = "dnp"
DOP_SCHEME = "dop"


@dataclass(frozen=True)
class Dnp:
    """Always drop the new packet: the in-service transfer is never interrupted."""

    def dnp_probability(self, age: float) -> float:
        return 1.0


@dataclass(frozen=True)
class Dop:
    """Always drop the old packet: a new arrival preempts service."""

    def dnp_probability(self, age: float) -> float:
        return 0.0


@dataclass(frozen=True)
class Threshold:
    """DNP when the age at the decision epoch exceeds theta, DOP otherwise.

    theta = inf designates pure DOP; theta = 0 collapses to pure DNP.
    """

    theta: float

    def __post_init__(self):
        if self.theta < 0 or math.isnan(self.theta):
            raise ValueError("theta must be in [0, inf]")

    def dnp_probability(self, age: float) -> float:
        return 1.0 if age > self.theta else 0.0


@dataclass(frozen=True)
class Randomized:
    """Stationary Markov randomized policy.

    alpha(g) is the probability of choosing DNP at age g, represented as a
    piecewise-constant table: value[i] applies on the age interval
    (edges[i-1], edges[i]], value[0] left of the first edge and value[-1]
    beyond the last edge.  Threshold(theta) embeds as edges=(theta,),
    values=(0, 1).
    """

    edges: tuple = field(default=())
    values: tuple = field(default=(0.0,))

    def __post_init__(self):
        edges = tuple(float(e) for e in self.edges)
        values = tuple(float(v) for v in self.values)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "values", values)
        if len(values) != len(edges) + 1:
            raise ValueError("need exactly len(edges) + 1 values")
        if any(edges[i] >= edges[i + 1] for i in range(len(edges) - 1)):
            raise ValueError("edges must be strictly increasing")
        if any(not (0.0 <= v <= 1.0) for v in values):
            raise InvalidPolicy(f"alpha values outside [0, 1]: {values}")

    def dnp_probability(self, age: float) -> float:
        return self.values[bisect_left(self.edges, age)]


DropPolicy = Dnp | Dop | Threshold | Randomized


def policy_from_spec(spec) -> DropPolicy:
    """Parse a policy from a config record ('dnp', 'dop', {threshold: x}, ...)."""
    if isinstance(spec, str):
        name = spec.lower()
        if name == "dnp":
            return Dnp()
        if name == "dop":
            return Dop()
        raise ValueError(f"unknown policy {spec!r}")
    spec = dict(spec)
    if "threshold" in spec:
        raw = spec["threshold"]
        theta = math.inf if str(raw).lower() == "inf" else float(raw)
        return Threshold(theta=theta)
    if "edges" in spec or "values" in spec:
        return Randomized(edges=tuple(spec.get("edges", ())),
                          values=tuple(spec["values"]))
    raise ValueError(f"cannot parse policy spec {spec!r}")
