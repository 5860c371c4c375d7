"""System constants and the three per-slot input series.

Units used throughout the package: Mbit, Mbit/s, seconds, joules, watts.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

KINDS = ("workload", "solar", "bs_count")


class TraceError(ValueError):
    """Raised for unreadable, malformed or inconsistent trace files."""


@dataclass(frozen=True)
class SystemParams:
    M_max: int = 10
    d: int = 1
    tau: float = 60.0
    theta_idle_vm: float = 10.0
    theta_max_vm: float = 60.0
    kappa_e: float = 0.005
    theta_idle_toe: float = 13.1
    eta: float = 1.4  # Gbit/J
    Delta: float = 0.8
    freq_set: tuple[float, ...] = (0.0, 50.0, 70.0, 90.0, 105.0)
    W: float = 1.0  # MHz
    Gamma: float = 0.5e-3
    Y_max: int = 6
    tau_max: float = 2.0
    lambda_max: float = 5.0
    O_opt: float = 1.0
    r0: float = 1.0
    alpha_delay: float = 0.96
    sigma: float = 0.02  # seconds, not ms
    Upsilon: int = 3
    B_max: float = 490e3
    B_low_frac: float = 0.3
    B_up_frac: float = 0.7
    r_max: float = 100.0

    def __post_init__(self):
        object.__setattr__(self, "freq_set", tuple(float(f) for f in self.freq_set))
        self.validate()

    def validate(self) -> None:
        fs = self.freq_set
        problems = []
        if not (0 < self.d <= self.M_max):
            problems.append("need 0 < d <= M_max")
        if not (0 < self.Delta < self.tau_max):
            problems.append("need 0 < Delta < tau_max")
        if list(fs) != sorted(fs) or len(set(fs)) != len(fs):
            problems.append("freq_set must be strictly ascending")
        if not fs or fs[0] != 0.0:
            problems.append("freq_set must contain 0")
        if not (0 < self.B_low_frac < self.B_up_frac < 1):
            problems.append("need 0 < B_low_frac < B_up_frac < 1")
        if fs and self.lambda_max / self.Delta > fs[-1]:
            problems.append("lambda_max/Delta exceeds f_max")
        if self.Y_max < 1 or self.Upsilon < 1:
            problems.append("Y_max and Upsilon must be >= 1")
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, (int, float)) and v < 0:
                problems.append(f"{f.name} must be nonnegative")
        for name in ("W", "Gamma", "eta", "r0", "sigma", "alpha_delay"):
            if getattr(self, name) <= 0:
                problems.append(f"{name} must be positive")
        if problems:
            raise ValueError("invalid SystemParams: " + "; ".join(problems))

    @property
    def f_max(self) -> float:
        return self.freq_set[-1]

    @property
    def B_low(self) -> float:
        return self.B_low_frac * self.B_max

    @property
    def B_up(self) -> float:
        return self.B_up_frac * self.B_max

    @property
    def eta_mbit_per_j(self) -> float:
        return self.eta * 1000.0

    @property
    def capacity(self) -> float:
        """Largest per-slot workload the server can absorb [Mbit]."""
        return self.M_max * self.lambda_max


@dataclass(frozen=True)
class Trace:
    workload: np.ndarray
    harvest: np.ndarray
    bs_count: np.ndarray
    name: str = field(default="trace", compare=False)

    def __post_init__(self):
        w = np.asarray(self.workload, dtype=float)
        h = np.asarray(self.harvest, dtype=float)
        n = np.asarray(self.bs_count)
        if not (len(w) == len(h) == len(n)):
            raise TraceError(
                f"series lengths differ: workload={len(w)} harvest={len(h)} bs_count={len(n)}"
            )
        if len(w) == 0:
            raise TraceError("empty trace")
        if (w < 0).any() or (h < 0).any():
            raise TraceError("workload and harvest must be nonnegative")
        if (n < 1).any() or not np.all(np.asarray(n, dtype=float) == np.round(n)):
            raise TraceError("bs_count must be integers >= 1")
        for arr in (w, h):
            arr.setflags(write=False)
        n = n.astype(np.int64)
        n.setflags(write=False)
        object.__setattr__(self, "workload", w)
        object.__setattr__(self, "harvest", h)
        object.__setattr__(self, "bs_count", n)

    @property
    def slots(self) -> int:
        return len(self.workload)


def load_trace_csv(path, kind: str) -> np.ndarray:
    """Read a ``slot,value`` CSV into a dense per-slot array.

    Slots must start at 0 and increase by exactly one; a gap is an error.
    """
    if kind not in KINDS:
        raise TraceError(f"unknown trace kind {kind!r}")
    path = Path(path)
    if not path.is_file():
        raise TraceError(f"missing trace file: {path}")
    values: list[float] = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["slot", "value"]:
            raise TraceError(f"{path}: header must be 'slot,value'")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise TraceError(f"{path}:{lineno}: malformed row {row!r}")
            try:
                slot = int(row[0])
                value = float(row[1])
            except ValueError:
                raise TraceError(f"{path}:{lineno}: malformed row {row!r}") from None
            expected = len(values)
            if slot != expected:
                if slot > expected:
                    raise TraceError(f"{path}: gap at slot {expected}")
                raise TraceError(f"{path}:{lineno}: slots must be strictly increasing")
            if not math.isfinite(value) or value < 0:
                raise TraceError(f"{path}:{lineno}: negative or non-finite value {value}")
            if kind == "bs_count":
                if value != round(value):
                    raise TraceError(f"{path}:{lineno}: non-integer bs_count {value}")
                if value < 1:
                    raise TraceError(f"{path}:{lineno}: bs_count must be >= 1")
            values.append(value)
    if not values:
        raise TraceError(f"{path}: no data rows")
    if kind == "bs_count":
        return np.array(values, dtype=np.int64)
    return np.array(values, dtype=float)


def write_trace_csv(series: Sequence[float], path, integer: bool = False) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["slot", "value"])
        for i, v in enumerate(series):
            w.writerow([i, int(v) if integer else repr(float(v))])


def load_trace(workload_path, solar_path, bs_count_path, params: SystemParams | None = None,
               scale_solar: bool = True) -> Trace:
    params = params or SystemParams()
    work = load_trace_csv(workload_path, "workload")
    solar = load_trace_csv(solar_path, "solar")
    bs = load_trace_csv(bs_count_path, "bs_count")
    if scale_solar:
        solar = scale_solar_to_battery(solar, params)
    return Trace(work, solar, bs, name=Path(workload_path).stem)


def scale_solar_to_battery(raw, params: SystemParams) -> np.ndarray:
    raw = np.asarray(raw, dtype=float)
    if raw.size == 0 or (raw < 0).any():
        raise ValueError("solar series must be nonempty and nonnegative")
    peak = raw.max()
    if peak == 0:
        return np.zeros_like(raw)
    out = raw * (params.B_max / peak)
    # the scaled maximum must land on B_max exactly, not one ulp away
    out[raw == peak] = params.B_max
    return out


def synthesize_diurnal(slots: int, peak: float, trough: float, period: int,
                       noise_std: float = 0.0, seed: int = 0, phase: float = 0.0) -> np.ndarray:
    """Sinusoid between ``trough`` and ``peak`` plus clipped Gaussian noise.

    The noiseless curve starts at the trough (slot 0) and peaks half a period
    later. Noise is clipped to three standard deviations, then the result is
    floored at zero.
    """
    if slots <= 0 or period <= 0 or not (peak >= trough >= 0):
        raise ValueError("need slots > 0, period > 0 and peak >= trough >= 0")
    t = np.arange(slots, dtype=float)
    mid = (peak + trough) / 2.0
    amp = (peak - trough) / 2.0
    base = mid - amp * np.cos(2.0 * np.pi * t / period + phase)
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, 1.0, slots)
    noise = np.clip(noise, -3.0, 3.0) * noise_std
    return np.maximum(base + noise, 0.0)


def synthesize_solar(slots: int, period: int = 1440, sunrise: float = 0.25,
                     sunset: float = 0.8, noise_std: float = 0.0, seed: int = 0) -> np.ndarray:
    """Daylight bell (zero at night) in arbitrary units with peak 1."""
    t = (np.arange(slots) % period) / period
    day = (t >= sunrise) & (t <= sunset)
    x = np.where(day, np.sin(np.pi * (t - sunrise) / (sunset - sunrise)), 0.0)
    rng = np.random.default_rng(seed)
    noise = np.clip(rng.normal(0.0, 1.0, slots), -3.0, 3.0) * noise_std
    return np.where(day, np.maximum(x + noise * x, 0.0), 0.0)


def synthesize_bs_count(slots: int, low: int, high: int, period: int, seed: int = 0) -> np.ndarray:
    series = synthesize_diurnal(slots, float(high), float(low), period, noise_std=1.0, seed=seed)
    return np.clip(np.rint(series), max(low, 1), high).astype(np.int64)


def normalize_minmax(series) -> tuple[np.ndarray, float, float]:
    x = np.asarray(series, dtype=float)
    if x.size == 0:
        raise ValueError("cannot normalize an empty series")
    lo, hi = float(x.min()), float(x.max())
    if hi == lo:
        return np.zeros_like(x), lo, hi
    return (x - lo) / (hi - lo), lo, hi


def denormalize(series, lo: float, hi: float) -> np.ndarray:
    return np.asarray(series, dtype=float) * (hi - lo) + lo


# bundled synthetic traces: (workload kwargs, solar kwargs, bs kwargs)
BUNDLED = {
    "diurnal": dict(
        workload=dict(peak=45.0, trough=3.0, period=1440, noise_std=1.0, seed=11),
        solar=dict(period=1440, noise_std=0.05, seed=12),
        bs=dict(low=2, high=40, period=1440, seed=13),
    ),
    "flat": dict(
        workload=dict(peak=12.0, trough=12.0, period=1440, noise_std=0.5, seed=21),
        solar=dict(period=1440, noise_std=0.05, seed=22),
        bs=dict(low=4, high=4, period=1440, seed=23),
    ),
}
BUNDLED_SLOTS = 1440
DATA_DIR = Path(__file__).parent / "data"


def generate_bundled(name: str, slots: int = BUNDLED_SLOTS) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    kw = BUNDLED[name]
    work = synthesize_diurnal(slots, **kw["workload"])
    solar = synthesize_solar(slots, **kw["solar"])
    bs = synthesize_bs_count(slots, **kw["bs"])
    return work, solar, bs


def bundled_paths(name: str) -> tuple[Path, Path, Path]:
    return (DATA_DIR / f"{name}_workload.csv", DATA_DIR / f"{name}_solar.csv",
            DATA_DIR / f"{name}_bs_count.csv")


def bundled_trace(name: str = "diurnal", params: SystemParams | None = None) -> Trace:
    """Load one of the synthetic traces shipped with the package."""
    return load_trace(*bundled_paths(name), params=params)
