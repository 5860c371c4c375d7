"""Energy buffer dynamics and the grid purchase rule."""
from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction

from .traces import SystemParams


@dataclass(frozen=True)
class BatteryState:
    B: float
    B_low: float
    B_up: float
    B_max: float
    cumulative_grid: float = 0.0
    cumulative_curtailed: float = 0.0
    deficits: int = 0

    @classmethod
    def from_params(cls, params: SystemParams, B: float | None = None) -> "BatteryState":
        return cls(B=params.B_up if B is None else float(B), B_low=params.B_low,
                   B_up=params.B_up, B_max=params.B_max)


def plan_purchase(B: float, H_hat: float, B_up: float) -> float:
    """Grid energy to buy at slot start.

    Nothing is bought when the forecast harvest alone lifts the buffer to
    ``B_up``; otherwise the gap ``B_up - B`` is bought, regardless of the
    forecast amount.
    """
    if H_hat < 0:
        raise ValueError("forecast harvest must be nonnegative")
    if B + H_hat >= B_up:
        return 0.0
    return B_up - B


def step(B: float, H: float, theta: float, E: float, B_max: float) -> tuple[float, float, bool]:
    """Advance the buffer by one slot.

    Returns ``(B_next, curtailed, deficit)``. ``deficit`` is True when the
    unclamped level went negative (the slot could not be paid for).
    """
    raw = B + H - theta + E
    curtailed = raw - B_max if raw > B_max else 0.0
    if raw < 0:
        return 0.0, 0.0, True
    return min(raw, B_max), curtailed, False


def advance(state: BatteryState, H: float, H_hat: float, theta: float) -> tuple[BatteryState, float, float]:
    """Purchase, then apply one slot. Returns (new state, E, curtailed)."""
    E = plan_purchase(state.B, H_hat, state.B_up)
    B_next, curtailed, deficit = step(state.B, H, theta, E, state.B_max)
    new = replace(
        state,
        B=B_next,
        cumulative_grid=state.cumulative_grid + E,
        cumulative_curtailed=state.cumulative_curtailed + curtailed,
        deficits=state.deficits + int(deficit),
    )
    return new, E, curtailed


class ExactLedger:
    """Battery bookkeeping in exact rational arithmetic.

    Float updates of a ~1e5 J level lose ~1e-11 J per slot; over a day of
    slots that drifts past 1e-9 J. The ledger keeps the level and every flow
    as fractions so run-level conservation can be checked exactly, while
    ``B`` exposes the float value the controller sees.
    """

    def __init__(self, B0: float, B_max: float):
        self.B0 = Fraction(B0)
        self._B = Fraction(B0)
        self.B_max = Fraction(B_max)
        self.harvested = Fraction(0)
        self.purchased = Fraction(0)
        self.consumed = Fraction(0)
        self.curtailed = Fraction(0)
        self.unserved = Fraction(0)

    @property
    def B(self) -> float:
        return float(self._B)

    def apply(self, H: float, theta: float, E: float) -> tuple[float, float, bool]:
        H_, th, E_ = Fraction(H), Fraction(theta), Fraction(E)
        self.harvested += H_
        self.consumed += th
        self.purchased += E_
        raw = self._B + H_ - th + E_
        curtailed = Fraction(0)
        deficit = raw < 0
        if raw > self.B_max:
            curtailed = raw - self.B_max
            self._B = self.B_max
        elif deficit:
            self.unserved += -raw
            self._B = Fraction(0)
        else:
            self._B = raw
        self.curtailed += curtailed
        return float(self._B), float(curtailed), deficit

    def conservation_error(self) -> float:
        flows = self.harvested + self.purchased - self.consumed - self.curtailed + self.unserved
        return float(abs(self._B - self.B0 - flows))
