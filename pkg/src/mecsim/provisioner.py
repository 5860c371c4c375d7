"""Turn a workload figure into concrete control inputs."""
from __future__ import annotations

import bisect
import math

from .energy import ControlInput, VmAllocation, driver_count, fixed_rate, link_power
from .traces import SystemParams


class OverloadError(ValueError):
    """Workload exceeds what M_max VMs can hold."""


def vm_count(L_hat: float, params: SystemParams) -> int:
    if L_hat < 0:
        raise ValueError("workload must be nonnegative")
    if L_hat > params.capacity:
        raise OverloadError(f"workload {L_hat:g} Mbit exceeds capacity {params.capacity:g} Mbit")
    return min(params.M_max, max(params.d, math.ceil(L_hat / params.lambda_max)))


def distribute_load(L_hat: float, M: int, mode: str, params: SystemParams) -> list[float]:
    """Split ``L_hat`` over ``M`` VMs.

    ``fill_first`` gives lambda_max to VMs in order and the remainder to the
    next one (zeros after that); ``even`` divides equally. The parts always
    sum to ``L_hat``.
    """
    if M < 1 or M * params.lambda_max < L_hat * (1 - 1e-12):
        raise ValueError(f"{M} VMs cannot hold {L_hat:g} Mbit")
    if mode == "even":
        share = L_hat / M
        return [share] * M
    if mode != "fill_first":
        raise ValueError(f"unknown split mode {mode!r}")
    full = min(M - 1, int(L_hat // params.lambda_max))
    loads = [params.lambda_max] * full
    loads.append(L_hat - full * params.lambda_max)
    loads.extend([0.0] * (M - len(loads)))
    return loads


def select_frequency(lam: float, params: SystemParams) -> float:
    """Smallest set rate that finishes ``lam`` within Delta (0 when idle)."""
    if lam <= 0:
        return 0.0
    need = lam / params.Delta
    fs = params.freq_set
    i = bisect.bisect_left(fs, need)
    if i >= len(fs):
        raise OverloadError(f"load {lam:g} needs rate {need:g} above f_max")
    f = fs[i]
    if f == 0.0:
        f = fs[1]
    return f


def make_alloc(lam: float, f: float, params: SystemParams) -> VmAllocation:
    r = fixed_rate(lam, params)
    return VmAllocation(lam=lam, f=f, r=r, P=link_power(r, params))


def build_control(L_hat: float, M: int, n_bs: int, mode: str, params: SystemParams,
                  pin_f_max: bool = False) -> ControlInput:
    loads = distribute_load(L_hat, M, mode, params)
    allocs = []
    for lam in loads:
        f = params.f_max if pin_f_max else select_frequency(lam, params)
        allocs.append(make_alloc(lam, f, params))
    rate_sum = math.fsum(a.r for a in allocs)
    if rate_sum > params.r_max * (1 + 1e-9):
        raise ValueError(f"aggregate VLAN rate {rate_sum:.6g} exceeds r_max")
    zeta = 1 if L_hat > 0 else 0
    return ControlInput(M=M, allocs=tuple(allocs), zeta=zeta, Y=driver_count(n_bs, params),
                        mode="f_max" if pin_f_max else mode)


def sentinel_control(L_hat: float, n_bs: int, params: SystemParams) -> ControlInput:
    """Full provisioning: M_max VMs at f_max with an even split."""
    return build_control(L_hat, params.M_max, n_bs, "even", params, pin_f_max=True)


def candidate_set(L_hat: float, n_bs: int, params: SystemParams,
                  with_sentinel: bool = False) -> list[ControlInput]:
    """Reachable controls for one slot, ordered by ascending M.

    The minimum count uses the fill-first split, larger counts an even one.
    """
    m0 = vm_count(L_hat, params)
    out = []
    for M in range(m0, params.M_max + 1):
        try:
            out.append(build_control(L_hat, M, n_bs, "fill_first" if M == m0 else "even", params))
        except ValueError:
            continue
    if with_sentinel:
        out.append(sentinel_control(L_hat, n_bs, params))
    return out


def control_for_load(L: float, M: int, mode: str, n_bs: int, params: SystemParams) -> tuple[ControlInput, bool]:
    """Re-apply a chosen configuration (M and split style) to a realised load.

    Returns the executed control and whether it overflowed: a load larger than
    ``M * lambda_max`` is still served by the same VMs at raised rates.
    """
    pin = mode == "f_max"
    if L > M * params.lambda_max:
        share = L / M
        allocs = []
        for _ in range(M):
            f = params.f_max if pin else _raise_rate(share, params)
            allocs.append(make_alloc(share, f, params))
        zeta = 1 if L > 0 else 0
        return ControlInput(M=M, allocs=tuple(allocs), zeta=zeta, Y=driver_count(n_bs, params),
                            mode="overflow"), True
    if pin:
        return build_control(L, M, n_bs, "even", params, pin_f_max=True), False
    split = "fill_first" if M == vm_count(L, params) else "even"
    return build_control(L, M, n_bs, split, params), False


def _raise_rate(lam: float, params: SystemParams) -> float:
    need = lam / params.Delta
    for f in params.freq_set:
        if f >= need and f > 0:
            return f
    return params.f_max
