"""Per-slot energy terms of the edge server.

Every function is pure. Sums are accumulated left to right in VM order so
that the vectorised paths in :mod:`mecsim.controller` reproduce the scalar
results bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .traces import SystemParams

C_CODES = ("C1", "C2", "C3", "C4", "C5", "C6", "C7")
_TIGHT = 1e-9  # slack for constraints that fixed_rate makes tight


class InfeasibleControl(ValueError):
    """A control input that breaks the model's consistency rules."""


@dataclass(frozen=True)
class VmAllocation:
    lam: float  # Mbit
    f: float  # Mbit/s
    r: float  # Mbit/s
    P: float  # W

    @property
    def chi(self) -> float:
        if self.f > 0:
            return self.lam / self.f
        return 0.0 if self.lam == 0 else math.inf


@dataclass(frozen=True)
class ControlInput:
    M: int
    allocs: tuple[VmAllocation, ...]
    zeta: int
    Y: int
    mode: str = "fill_first"

    @property
    def freqs(self) -> tuple[float, ...]:
        return tuple(a.f for a in self.allocs)

    @property
    def loads(self) -> tuple[float, ...]:
        return tuple(a.lam for a in self.allocs)

    @property
    def served(self) -> float:
        return math.fsum(self.loads)

    def alphas(self, params: SystemParams) -> tuple[float, ...]:
        return tuple((a.f / params.f_max) ** 2 for a in self.allocs)


@dataclass(frozen=True)
class EnergyBreakdown:
    cpu: float
    sc: float
    toe: float
    vlan: float
    wcom: float
    total: float

    @property
    def comp(self) -> float:
        return self.cpu + self.sc + self.toe

    @property
    def comm(self) -> float:
        return self.vlan + self.wcom


def _pad(a: Sequence[float], b: Sequence[float]) -> tuple[list[float], list[float]]:
    n = max(len(a), len(b))
    return list(a) + [0.0] * (n - len(a)), list(b) + [0.0] * (n - len(b))


def cpu_energy(allocs: Sequence[VmAllocation], params: SystemParams) -> float:
    span = params.theta_max_vm - params.theta_idle_vm
    total = 0.0
    for a in allocs:
        u = a.f / params.f_max
        total += params.theta_idle_vm + u * u * span
    return total


def switching_energy(prev_freqs: Sequence[float], next_freqs: Sequence[float],
                     kappa_e: float) -> float:
    """Reconfiguration cost; VMs that appear or vanish move from/to rate 0."""
    a, b = _pad(prev_freqs, next_freqs)
    acc = 0.0
    for f1, f2 in zip(a, b):
        gap = f2 - f1
        acc += gap * gap
    return kappa_e * acc


def toe_energy(zeta: int, L_in: float, params: SystemParams) -> float:
    if zeta not in (0, 1):
        raise InfeasibleControl(f"zeta must be 0 or 1, got {zeta!r}")
    if zeta == 0:
        if L_in > 0:
            raise InfeasibleControl("NIC is off but the slot carries workload")
        return 0.0
    return params.theta_idle_toe + L_in / params.eta_mbit_per_j


def fixed_rate(lam: float, params: SystemParams) -> float:
    if lam < 0:
        raise ValueError("load must be nonnegative")
    return 2.0 * lam / (params.tau_max - params.Delta)


def link_power(r: float, params: SystemParams) -> float:
    if r < 0:
        raise ValueError("rate must be nonnegative")
    return params.Gamma * (2.0 ** (r / params.W) - 1.0)


def vlan_energy(allocs: Sequence[VmAllocation], params: SystemParams | None = None) -> float:
    if params is not None:
        rate_sum = math.fsum(a.r for a in allocs)
        if rate_sum > params.r_max * (1 + _TIGHT):
            raise InfeasibleControl(f"aggregate VLAN rate {rate_sum:.6g} exceeds r_max")
    acc = 0.0
    for a in allocs:
        if a.lam == 0:
            continue
        if a.r <= 0:
            raise InfeasibleControl("loaded VM has no link rate")
        acc += a.P * (a.lam / a.r)
    return 2.0 * acc


def linearized_link_power(lam: float, mu: float, nu: float, params: SystemParams) -> float:
    """Log-domain link power after rate fixing, for a chosen (mu, nu) pair."""
    if mu == 0:
        raise ValueError("mu must be nonzero")
    rate = 2.0 * lam / (params.tau_max - params.Delta)
    return ((rate - nu * params.W) * math.log(2.0)) / (mu * params.W) + math.log(params.Gamma / params.W)


def driver_count(n_bs: int, params: SystemParams) -> int:
    if n_bs < 1:
        raise ValueError("n_bs must be >= 1")
    omega = math.sqrt(params.Upsilon / (params.sigma * n_bs))
    value = (1.0 / params.alpha_delay) * ((omega + 1.0) / omega) ** 2
    return max(1, min(params.Y_max, math.ceil(value)))


def wcom_energy(L_out: float, Y: int, params: SystemParams) -> float:
    if L_out <= 0:
        return 0.0
    if Y < 1:
        raise InfeasibleControl("batch to transmit but no drivers active")
    share = L_out / Y
    acc = 0.0
    for _ in range(Y):
        acc += params.O_opt * share / params.r0
    return acc


def is_batch_slot(slot: int, params: SystemParams) -> bool:
    return (slot + 1) % params.Upsilon == 0


def total_energy(control: ControlInput, prev_control: ControlInput | Sequence[float] | None,
                 L_in: float, L_out_batch: float, params: SystemParams) -> EnergyBreakdown:
    """All five terms for one slot.

    ``prev_control`` may be a ControlInput, a bare frequency vector or None
    (everything starts at rate 0). ``L_out_batch`` is zero on slots where no
    batch leaves the output buffer.
    """
    if prev_control is None:
        prev = ()
    elif isinstance(prev_control, ControlInput):
        prev = prev_control.freqs
    else:
        prev = tuple(prev_control)
    cpu = cpu_energy(control.allocs, params)
    sc = switching_energy(prev, control.freqs, params.kappa_e)
    toe = toe_energy(control.zeta, L_in, params)
    vlan = vlan_energy(control.allocs, params)
    wcom = wcom_energy(L_out_batch, control.Y, params)
    return EnergyBreakdown(cpu, sc, toe, vlan, wcom, cpu + sc + toe + vlan + wcom)


@dataclass(frozen=True)
class Verdict:
    violated: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violated

    def __bool__(self) -> bool:
        return self.ok


def check_constraints(control: ControlInput, B: float | None, params: SystemParams,
                      load: float | None = None) -> Verdict:
    """Evaluate C1..C7 on one control input and battery level.

    ``load`` (optional) adds a ``LOAD`` entry when the allocation does not sum
    to it within 1e-9 relative.
    """
    bad: list[str] = []
    if not (params.d <= control.M <= params.M_max) or len(control.allocs) != control.M:
        bad.append("C1")
    if B is not None and not (params.B_low * (1 - _TIGHT) <= B <= params.B_max * (1 + _TIGHT)):
        bad.append("C2")
    if any(not (0.0 <= a.f <= params.f_max) for a in control.allocs):
        bad.append("C3")
    if any(not (0.0 <= a.lam <= params.lambda_max * (1 + _TIGHT)) for a in control.allocs):
        bad.append("C4")
    if any(a.chi > params.Delta * (1 + _TIGHT) for a in control.allocs):
        bad.append("C5")
    if math.fsum(a.r for a in control.allocs) > params.r_max * (1 + _TIGHT):
        bad.append("C6")
    delays = [2.0 * a.lam / a.r if a.r > 0 else (0.0 if a.lam == 0 else math.inf)
              for a in control.allocs]
    if delays and max(delays) + params.Delta > params.tau_max * (1 + _TIGHT):
        bad.append("C7")
    if load is not None and abs(control.served - load) > 1e-9 * max(1.0, load):
        bad.append("LOAD")
    return Verdict(tuple(bad))
