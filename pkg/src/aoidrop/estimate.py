"""Common result record for analytic and simulated AAoI values."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class AaoiEstimate:
    """AAoI point value; simulation results carry a 95% CI and provenance."""

    value: float
    half_width: float = 0.0
    replications: int = 1
    seed: int | None = None

    def __post_init__(self):
        if self.value <= 0:
            raise ValueError(f"AAoI must be positive, got {self.value}")
        if self.half_width < 0:
            raise ValueError("CI half-width must be nonnegative")

    def agrees_with(self, other: "AaoiEstimate", rel_floor: float = 1e-3) -> bool:
        """True when the two values differ by at most max(3*CI, rel_floor*value)."""
        tol = max(3.0 * (self.half_width + other.half_width),
                  rel_floor * abs(other.value))
        return abs(self.value - other.value) <= tol
