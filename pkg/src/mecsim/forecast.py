"""Short-term forecasting of normalised series.

Three model kinds share one interface: ``persistence``, ``seasonal_naive``
and ``recurrent`` (a single-layer LSTM with a linear read-out, trained by
full-batch gradient descent on the mean squared one-step error).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

KINDS = ("persistence", "seasonal_naive", "recurrent")
TRAIN_FRACTION = 0.67


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 600
    step_size: float = 0.5
    seed: int = 0
    lookback: int = 4
    hidden: int = 4
    period: int = 1440


@dataclass
class ForecastModel:
    kind: str
    lookback: int = 1
    period: int = 1
    hidden: int = 0
    params: dict[str, np.ndarray] = field(default_factory=dict)
    loss_history: list[float] = field(default_factory=list, repr=False)

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params.values())

    @property
    def min_history(self) -> int:
        if self.kind == "seasonal_naive":
            return self.period
        return self.lookback


@dataclass(frozen=True)
class ForecastReport:
    rmse_per_step: tuple[float, ...]
    split: tuple[float, float] = (TRAIN_FRACTION, 1 - TRAIN_FRACTION)


# -- LSTM core ---------------------------------------------------------------

_PARAM_ORDER = ("Wx", "Wh", "b", "w_out", "b_out")


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def init_recurrent(hidden: int, seed: int) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    scale = 1.0 / np.sqrt(hidden)
    p = {
        "Wx": rng.uniform(-scale, scale, 4 * hidden),
        "Wh": rng.uniform(-scale, scale, (4 * hidden, hidden)),
        "b": np.zeros(4 * hidden),
        "w_out": rng.uniform(-scale, scale, hidden),
        "b_out": np.zeros(1),
    }
    p["b"][hidden:2 * hidden] = 1.0  # forget gate starts open
    return p


def _forward(p, X):
    """Run the cell over windows ``X`` (N, lookback). Returns (y, cache)."""
    H = p["Wh"].shape[1]
    N, steps = X.shape
    h = np.zeros((N, H))
    c = np.zeros((N, H))
    cache = []
    for t in range(steps):
        z = X[:, t:t + 1] * p["Wx"] + h @ p["Wh"].T + p["b"]
        i = _sigmoid(z[:, :H])
        f = _sigmoid(z[:, H:2 * H])
        g = np.tanh(z[:, 2 * H:3 * H])
        o = _sigmoid(z[:, 3 * H:])
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        h_new = o * tc
        cache.append((X[:, t], h, c, i, f, g, o, tc))
        h, c = h_new, c_new
    y = h @ p["w_out"] + p["b_out"][0]
    return y, (cache, h)


def loss_and_grad(p, X, target):
    y, (cache, h_last) = _forward(p, X)
    N = len(target)
    err = y - target
    loss = float(np.mean(err * err))
    dy = 2.0 * err / N
    g = {k: np.zeros_like(v) for k, v in p.items()}
    g["w_out"] = h_last.T @ dy
    g["b_out"] = np.array([dy.sum()])
    dh = dy[:, None] * p["w_out"]
    dc = np.zeros_like(dh)
    for x, h_prev, c_prev, i, f, gg, o, tc in reversed(cache):
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc * tc)
        dz = np.concatenate([
            dc * gg * i * (1.0 - i),
            dc * c_prev * f * (1.0 - f),
            dc * i * (1.0 - gg * gg),
            do * o * (1.0 - o),
        ], axis=1)
        g["Wx"] += x @ dz
        g["Wh"] += dz.T @ h_prev
        g["b"] += dz.sum(axis=0)
        dh = dz @ p["Wh"]
        dc = dc * f
    return loss, g


def windows(series: np.ndarray, lookback: int) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(series, dtype=float)
    n = len(s) - lookback
    X = np.lib.stride_tricks.sliding_window_view(s[:-1], lookback)[:n]
    return np.ascontiguousarray(X), s[lookback:]


def _check_normalized(series: np.ndarray) -> None:
    if series.size and (series.min() < -1e-12 or series.max() > 1 + 1e-12):
        raise ValueError("series must be normalised to [0, 1]")


# -- public API ----------------------------------------------------------------

def train(kind: str, series, config: TrainConfig = TrainConfig()) -> ForecastModel:
    if kind not in KINDS:
        raise ValueError(f"unknown model kind {kind!r}")
    s = np.asarray(series, dtype=float)
    _check_normalized(s)
    if kind == "persistence":
        return ForecastModel("persistence")
    if kind == "seasonal_naive":
        return ForecastModel("seasonal_naive", period=config.period)
    if len(s) <= config.lookback + 1:
        raise ValueError(f"series of length {len(s)} too short for lookback {config.lookback}")
    p = init_recurrent(config.hidden, config.seed)
    X, y = windows(s, config.lookback)
    history = []
    for _ in range(config.epochs):
        loss, g = loss_and_grad(p, X, y)
        history.append(loss)
        for k in p:
            p[k] -= config.step_size * g[k]
    return ForecastModel("recurrent", lookback=config.lookback, hidden=config.hidden,
                         params=p, loss_history=history)


def _pad_history(history: np.ndarray, need: int) -> np.ndarray:
    if len(history) >= need:
        return history[len(history) - need:]
    if len(history) == 0:
        return np.zeros(need)
    return np.concatenate([np.full(need - len(history), history[0]), history])


def predict_horizon(model: ForecastModel, history, T: int, strict: bool = True) -> np.ndarray:
    """Recursive T-step forecast; each prediction feeds the next step.

    With ``strict=False`` a short history is left-padded with its first value
    (or zeros when empty) instead of raising.
    """
    h = np.asarray(history, dtype=float)
    if strict and len(h) < max(model.min_history, 1):
        raise ValueError(f"need at least {model.min_history} history values, got {len(h)}")
    return predict_horizons(model, h, T, starts=np.array([len(h)]))[0]


def predict_horizons(model: ForecastModel, series, T: int, starts=None) -> np.ndarray:
    """Forecast rows ``series[s:s+T]`` from ``series[:s]`` for every start ``s``.

    Vectorised across starts; used by the simulator to precompute forecasts
    for a whole trace. Short histories are padded as in :func:`predict_horizon`.
    """
    s = np.asarray(series, dtype=float)
    if starts is None:
        starts = np.arange(len(s))
    starts = np.asarray(starts)
    need = model.period if model.kind == "seasonal_naive" else max(model.lookback, 1)
    ctx = np.stack([_pad_history(s[:k], need) for k in starts]) if len(starts) else np.zeros((0, need))
    has_hist = starts > 0
    out = np.empty((len(starts), T))
    for step in range(T):
        if model.kind == "persistence":
            nxt = ctx[:, -1]
        elif model.kind == "seasonal_naive":
            short = starts < model.period
            nxt = np.where(short, ctx[:, -1], ctx[:, 0])
        else:
            nxt, _ = _forward(model.params, ctx[:, -model.lookback:])
        nxt = np.where(has_hist, np.clip(nxt, 0.0, 1.0), 0.0)
        out[:, step] = nxt
        ctx = np.concatenate([ctx[:, 1:], nxt[:, None]], axis=1)
    return out


def rmse(predictions, actuals) -> float:
    p = np.asarray(predictions, dtype=float)
    a = np.asarray(actuals, dtype=float)
    if p.shape != a.shape or p.size == 0:
        raise ValueError("predictions and actuals must have equal nonzero length")
    return float(np.sqrt(np.mean((p - a) ** 2)))


def evaluate(model: ForecastModel, series, T: int = 3) -> ForecastReport:
    """Per-step RMSE on the held-out tail (last 33%) of ``series``."""
    s = np.asarray(series, dtype=float)
    split = int(round(TRAIN_FRACTION * len(s)))
    starts = np.arange(max(split, model.min_history), len(s) - T + 1)
    if len(starts) == 0:
        raise ValueError("test segment too short")
    preds = predict_horizons(model, s, T, starts)
    actual = np.stack([s[k:k + T] for k in starts])
    return ForecastReport(tuple(rmse(preds[:, j], actual[:, j]) for j in range(T)))


def train_split(kind: str, series, config: TrainConfig = TrainConfig()) -> ForecastModel:
    s = np.asarray(series, dtype=float)
    return train(kind, s[:int(round(TRAIN_FRACTION * len(s)))], config)


# -- gradient verification -----------------------------------------------------

def flatten(params: dict[str, np.ndarray]) -> np.ndarray:
    return np.concatenate([params[k].ravel() for k in _PARAM_ORDER])


def unflatten(vec: np.ndarray, like: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    out, i = {}, 0
    for k in _PARAM_ORDER:
        n = like[k].size
        out[k] = vec[i:i + n].reshape(like[k].shape).copy()
        i += n
    return out


def gradient_check(model: ForecastModel, series, epsilon: float = 1e-5,
                   n_check: int = 20, seed: int = 0) -> float:
    """Worst relative error between analytic and central-difference gradients."""
    if model.kind != "recurrent":
        raise ValueError("gradient check needs a recurrent model")
    if not (1e-7 <= epsilon <= 1e-3):
        raise ValueError("epsilon must lie in [1e-7, 1e-3]")
    if n_check < 1:
        raise ValueError("parameter selection is empty")
    X, y = windows(np.asarray(series, dtype=float), model.lookback)
    base = flatten(model.params)
    _, g = loss_and_grad(model.params, X, y)
    analytic = flatten(g)
    rng = np.random.default_rng(seed)
    idx = rng.choice(base.size, size=min(n_check, base.size), replace=False)
    worst = 0.0
    for j in idx:
        up, dn = base.copy(), base.copy()
        up[j] += epsilon
        dn[j] -= epsilon
        lu, _ = loss_and_grad(unflatten(up, model.params), X, y)
        ld, _ = loss_and_grad(unflatten(dn, model.params), X, y)
        numeric = (lu - ld) / (2 * epsilon)
        denom = max(abs(numeric), abs(analytic[j]), 1e-8)
        worst = max(worst, abs(numeric - analytic[j]) / denom)
    return worst


# -- persistence of trained parameters -----------------------------------------

def dump_model(model: ForecastModel, path) -> None:
    rows = [("kind", model.kind), ("lookback", model.lookback), ("period", model.period),
            ("hidden", model.hidden)]
    for k in _PARAM_ORDER:
        if k in model.params:
            for i, v in enumerate(model.params[k].ravel()):
                rows.append((f"{k}[{i}]", repr(float(v))))
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["name", "value"])
        w.writerows(rows)


def load_model(path) -> ForecastModel:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    meta = {name: value for name, value in rows if "[" not in name}
    model = ForecastModel(meta["kind"], lookback=int(meta["lookback"]),
                          period=int(meta["period"]), hidden=int(meta["hidden"]))
    if model.kind == "recurrent":
        like = init_recurrent(model.hidden, 0)
        vals = [float(v) for name, v in rows if "[" in name]
        model.params = unflatten(np.array(vals), like)
    return model
