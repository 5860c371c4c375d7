"""Lookahead controller, its exhaustive oracle, and the two baselines."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import kernels
from .battery import plan_purchase, step
from .energy import (ControlInput, EnergyBreakdown, cpu_energy, driver_count, is_batch_slot,
                     toe_energy, total_energy, vlan_energy, wcom_energy)
from .provisioner import (build_control, candidate_set, distribute_load, make_alloc,
                          select_frequency, vm_count)
from .traces import SystemParams

ORACLE_PATH_LIMIT = 10 ** 6


class ControllerFailure(RuntimeError):
    """No feasible control sequence at depth 1."""


@dataclass(frozen=True)
class SystemState:
    M: int
    Y: int
    B: float
    freqs: tuple[float, ...] = ()
    loads: tuple[float, ...] = ()

    @classmethod
    def initial(cls, params: SystemParams, B: float | None = None) -> "SystemState":
        return cls(M=params.d, Y=1, B=params.B_up if B is None else float(B),
                   freqs=(0.0,) * params.d, loads=(0.0,) * params.d)

    def after(self, control: ControlInput, B: float) -> "SystemState":
        return SystemState(control.M, control.Y, B, control.freqs, control.loads)


@dataclass(frozen=True)
class Plan:
    control: ControlInput
    cost: float
    path: tuple[int, ...]
    candidates: tuple[tuple[ControlInput, ...], ...] = field(repr=False, default=())


# -- horizon bookkeeping --------------------------------------------------------

def batch_loads(L_hat: Sequence[float], slot: int, pending: float, params: SystemParams) -> list[float]:
    """Output batch leaving at each horizon slot (0 where none leaves).

    ``pending`` is the workload already accumulated in the current batch.
    """
    out = []
    acc = pending
    for n, L in enumerate(L_hat):
        acc += L
        if is_batch_slot(slot + n, params):
            out.append(acc)
            acc = 0.0
        else:
            out.append(0.0)
    return out


def horizon_candidates(L_hat, n_bs, params: SystemParams) -> list[list[ControlInput]]:
    cap = params.capacity
    return [candidate_set(min(max(L, 0.0), cap), int(n), params, with_sentinel=True)
            for L, n in zip(L_hat, n_bs)]


def stage_matrices(state: SystemState, cands: list[list[ControlInput]], L_hat, batches,
                   params: SystemParams) -> list[np.ndarray]:
    """Per-slot energy of every (parent, child) candidate pair.

    Built column-wise from the scalar energy functions so each entry equals
    ``total_energy(child, parent, ...).total`` bit for bit.
    """
    width = max([params.M_max, len(state.freqs)] + [c.M for cs in cands for c in cs])
    prev = np.zeros((1, width))
    prev[0, :len(state.freqs)] = state.freqs
    mats = []
    cap = params.capacity
    for n, cs in enumerate(cands):
        L = min(max(L_hat[n], 0.0), cap)
        F = np.zeros((len(cs), width))
        for j, c in enumerate(cs):
            F[j, :c.M] = c.freqs
        acc = np.zeros((prev.shape[0], len(cs)))
        for m in range(width):
            gap = F[None, :, m] - prev[:, None, m]
            acc = acc + gap * gap
        sc = params.kappa_e * acc
        cpu = np.array([cpu_energy(c.allocs, params) for c in cs])
        toe = np.array([toe_energy(c.zeta, L, params) for c in cs])
        vlan = np.array([vlan_energy(c.allocs, params) for c in cs])
        wcom = np.array([wcom_energy(batches[n], c.Y, params) for c in cs])
        mats.append(cpu[None, :] + sc + toe[None, :] + vlan[None, :] + wcom[None, :])
        prev = F
    return mats


def dp_certificate(mats: list[np.ndarray], params: SystemParams) -> bool:
    """True when no node can breach B_low, so merged-state search is exact."""
    worst = max(float(m.max()) for m in mats)
    return worst <= params.B_up - params.B_low and params.B_max >= params.B_up


# -- transition model -----------------------------------------------------------

def predict_transition(state: SystemState, control: ControlInput, L_hat: float, H_hat: float,
                       params: SystemParams, L_out_batch: float = 0.0
                       ) -> tuple[SystemState, EnergyBreakdown, float, bool]:
    """One step of the behavioural model.

    Returns ``(next_state, energy, purchase, feasible)``; ``feasible`` is False
    when the buffer would fall below B_low.
    """
    energy = total_energy(control, state.freqs, L_hat, L_out_batch, params)
    E = plan_purchase(state.B, H_hat, params.B_up)
    B_next, _, deficit = step(state.B, H_hat, energy.total, E, params.B_max)
    feasible = not deficit and B_next >= params.B_low
    return state.after(control, B_next), energy, E, feasible


# -- lookahead controller ---------------------------------------------------------

def plan(state: SystemState, L_hat: Sequence[float], H_hat: Sequence[float],
         n_bs: Sequence[int], params: SystemParams, slot: int = 0, pending: float = 0.0,
         prune: bool = False, backend: str | None = None) -> Plan:
    """Pick the first control of the cheapest feasible sequence over the horizon."""
    T = len(L_hat)
    if T < 1 or len(H_hat) != T or len(n_bs) != T:
        raise ValueError("forecast sequences must share a length >= 1")
    cands = horizon_candidates(L_hat, n_bs, params)
    batches = batch_loads([min(max(L, 0.0), params.capacity) for L in L_hat], slot, pending, params)
    mats = stage_matrices(state, cands, L_hat, batches, params)
    if prune and dp_certificate(mats, params):
        first, cost = kernels.dp_search(mats, H_hat, state.B, params.B_low, params.B_up, params.B_max)
        path = (first,)
    else:
        first, cost, path = kernels.tree_search(mats, H_hat, state.B, params.B_low, params.B_up,
                                                params.B_max, backend=backend)
        path = tuple(path)
    if first < 0:
        raise ControllerFailure("no feasible control sequence")
    return Plan(cands[0][first], cost, path, tuple(tuple(c) for c in cands))


@dataclass
class Forecaster:
    """Pair of trained models plus the bounds used to normalise their data."""

    workload: object
    harvest: object
    workload_bounds: tuple[float, float]
    harvest_bounds: tuple[float, float]

    def forecast(self, workload_hist, harvest_hist, T: int) -> tuple[np.ndarray, np.ndarray]:
        from .forecast import predict_horizon

        def one(model, hist, bounds):
            lo, hi = bounds
            span = hi - lo
            h = (np.asarray(hist, dtype=float) - lo) / span if span > 0 else np.zeros(len(hist))
            pred = predict_horizon(model, np.clip(h, 0.0, 1.0), T, strict=False)
            return pred * span + lo

        return one(self.workload, workload_hist, self.workload_bounds), \
            one(self.harvest, harvest_hist, self.harvest_bounds)


def arces_step(state: SystemState, histories, forecaster: Forecaster, params: SystemParams,
               T: int = 3, n_bs: int = 1, slot: int = 0, pending: float = 0.0) -> ControlInput:
    """Forecast T slots ahead from ``histories`` and return the chosen control."""
    if T < 1:
        raise ValueError("horizon must be >= 1")
    work_hist, harv_hist = histories
    L_hat, H_hat = forecaster.forecast(work_hist, harv_hist, T)
    return plan(state, list(L_hat), list(H_hat), [n_bs] * T, params, slot=slot,
                pending=pending).control


# -- exhaustive oracle ----------------------------------------------------------------

def brute_force_oracle(state: SystemState, L_hat, H_hat, n_bs, params: SystemParams,
                       slot: int = 0, pending: float = 0.0) -> tuple[float, ControlInput | None, int]:
    """Enumerate every control sequence independently of the search code.

    Returns ``(min_cost, first_control, first_index)``; ties go to the lower
    first index. ``first_control`` is None when no sequence is feasible.
    """
    T = len(L_hat)
    cands = horizon_candidates(L_hat, n_bs, params)
    total_paths = math.prod(len(c) for c in cands)
    if total_paths > ORACLE_PATH_LIMIT:
        raise ValueError(f"{total_paths} paths exceed the oracle bound {ORACLE_PATH_LIMIT}")
    loads = [min(max(L, 0.0), params.capacity) for L in L_hat]
    batches = batch_loads(loads, slot, pending, params)
    best_cost, best_first = math.inf, -1
    for path in itertools.product(*(range(len(c)) for c in cands)):
        s = state
        cost = 0.0
        ok = True
        for n in range(T):
            s, energy, _, feasible = predict_transition(s, cands[n][path[n]], loads[n], H_hat[n],
                                                        params, batches[n])
            if not feasible:
                ok = False
                break
            cost = cost + energy.total
        if not ok:
            continue
        if cost < best_cost or (cost == best_cost and path[0] < best_first):
            best_cost, best_first = cost, path[0]
    if best_first < 0:
        return math.inf, None, -1
    return best_cost, cands[0][best_first], best_first


@dataclass(frozen=True)
class OracleInstance:
    state: SystemState
    L_hat: tuple[float, ...]
    H_hat: tuple[float, ...]
    n_bs: tuple[int, ...]
    params: SystemParams
    slot: int
    pending: float


def random_instance(rng: np.random.Generator, T: int = 3,
                    params: SystemParams | None = None) -> OracleInstance:
    """Small random planning problem for oracle comparisons.

    Forecast loads lie in (10, 50] so each slot has at most nine candidates.
    About a third of the instances shrink the buffer so that low-battery
    pruning actually fires.
    """
    base = params or SystemParams()
    if params is None and rng.random() < 1 / 3:
        base = replace(base, B_max=float(rng.uniform(300.0, 2000.0)))
    L_hat = tuple(float(x) for x in 50.0 - rng.uniform(0.0, 40.0, T))
    # half the instances see little sun, so purchases and pruning both occur
    H_top = 0.5 * base.B_max if rng.random() < 0.5 else 300.0
    H_hat = tuple(float(x) for x in rng.uniform(0.0, H_top, T))
    n_bs = tuple(int(x) for x in rng.integers(1, 400, T))
    L_prev = float(rng.uniform(0.0, base.capacity))
    prev = rng.choice(np.array(candidate_set(L_prev, int(n_bs[0]), base, with_sentinel=True), dtype=object))
    B = float(rng.uniform(base.B_low, base.B_max))
    state = SystemState(prev.M, prev.Y, B, prev.freqs, prev.loads)
    return OracleInstance(state, L_hat, H_hat, n_bs, base, int(rng.integers(0, base.Upsilon)),
                          float(rng.uniform(0.0, 100.0)))


def oracle_equivalence(seed: int = 0, T: int = 3, n_instances: int = 100,
                       backend: str | None = None) -> list[dict]:
    """Run the search and the oracle on random instances; return mismatches.

    A match needs the same first control (or both infeasible) and the
    same minimal cost, compared exactly.
    """
    rng = np.random.default_rng(seed)
    bad = []
    for k in range(n_instances):
        inst = random_instance(rng, T)
        cost, _, first = brute_force_oracle(inst.state, inst.L_hat, inst.H_hat, inst.n_bs,
                                            inst.params, inst.slot, inst.pending)
        try:
            got = plan(inst.state, inst.L_hat, inst.H_hat, inst.n_bs, inst.params, inst.slot,
                       inst.pending, backend=backend)
            got_first, got_cost = got.path[0], got.cost
        except ControllerFailure:
            got_first, got_cost = -1, math.inf
        if got_first != first or got_cost != cost:
            bad.append({"instance": k, "oracle": (first, cost), "search": (got_first, got_cost)})
    return bad


# -- baselines --------------------------------------------------------------------------

@dataclass(frozen=True)
class IrsResult:
    control: ControlInput
    iterations: int
    converged: bool


def irs_step(prev_loads: Sequence[float], L_in: float, n_bs: int, params: SystemParams,
             epsilon: float = 0.01, max_iter: int = 100, relax: float = 0.5,
             M: int | None = None) -> IrsResult:
    """Myopic iterative scheduler on the realised workload.

    Starting from the previous slot's per-VM loads, each iteration moves every
    load ``relax`` of the way towards the even split over ``M`` VMs and
    re-selects rates. Stops once the allocation accuracy and aggregate rate
    conditions both hold.
    """
    M = vm_count(L_in, params) if M is None else M
    Y = driver_count(n_bs, params)
    if L_in <= 0:
        ctrl = build_control(0.0, M, n_bs, "even", params)
        return IrsResult(ctrl, 0, True)
    target = distribute_load(L_in, M, "even", params)
    lam = list(prev_loads[:M]) + [0.0] * max(0, M - len(prev_loads))
    for it in range(1, max_iter + 1):
        lam = [x + relax * (t - x) for x, t in zip(lam, target)]
        freqs = [select_frequency(x, params) for x in lam]
        accurate = abs(math.fsum(lam) - L_in) / L_in <= epsilon
        fast_enough = L_in <= math.fsum(freqs) * params.Delta
        if accurate and fast_enough:
            break
    else:
        it = max_iter
    allocs = tuple(make_alloc(x, f, params) for x, f in zip(lam, freqs))
    ctrl = ControlInput(M=M, allocs=allocs, zeta=1, Y=Y, mode="irs")
    return IrsResult(ctrl, it, accurate and fast_enough)


def no_management_step(L_in: float, params: SystemParams) -> ControlInput:
    """Provision for the worst case: every VM on at f_max, NIC always on."""
    share = L_in / params.M_max
    allocs = tuple(make_alloc(share, params.f_max, params) for _ in range(params.M_max))
    return ControlInput(M=params.M_max, allocs=allocs, zeta=1, Y=params.Y_max, mode="f_max")
