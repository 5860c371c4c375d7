"""Command-line front end.

Exit codes: 0 success, 1 configuration error, 2 trace error,
3 infeasible controls or constraint violations detected.
"""
from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

from . import forecast as fc
from . import simulator as sim
from .controller import oracle_equivalence
from .traces import (BUNDLED, SystemParams, Trace, TraceError, bundled_trace, load_trace,
                     normalize_minmax)

EXIT_OK, EXIT_CONFIG, EXIT_TRACE, EXIT_INFEASIBLE = 0, 1, 2, 3

log = logging.getLogger("mecsim")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    params: SystemParams = field(default_factory=SystemParams)
    workload: str | None = None
    solar: str | None = None
    bs_count: str | None = None
    trace: str | None = None
    controller: str = "arces"
    forecaster: str = "recurrent"
    horizon: int = 3
    seed: int = 0
    out: str | None = None

    def validate(self) -> None:
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if self.controller not in sim.CONTROLLERS:
            raise ConfigError(f"unknown controller {self.controller!r}")
        if self.forecaster not in fc.KINDS:
            raise ConfigError(f"unknown forecaster {self.forecaster!r}")
        paths = [self.workload, self.solar, self.bs_count]
        if any(paths) and self.trace:
            raise ConfigError("give either trace files or a bundled trace name, not both")
        if any(paths) and not all(paths):
            raise ConfigError("workload, solar and bs_count files must be given together")
        if self.trace and self.trace not in BUNDLED:
            raise ConfigError(f"unknown bundled trace {self.trace!r}")

    def load(self) -> Trace:
        if self.workload:
            return load_trace(self.workload, self.solar, self.bs_count, self.params)
        return bundled_trace(self.trace or "diurnal", self.params)


_PARAM_FIELDS = {f.name: f for f in fields(SystemParams)}
_RUN_KEYS = {"workload": str, "solar": str, "bs_count": str, "trace": str, "controller": str,
             "forecaster": str, "horizon": int, "seed": int, "out": str}


def _convert(key: str, raw: str):
    if key in _RUN_KEYS:
        return _RUN_KEYS[key](raw)
    default = getattr(SystemParams(), key)
    if isinstance(default, tuple):
        return tuple(float(x) for x in raw.replace(";", ",").split(",") if x.strip())
    if isinstance(default, int):
        return int(raw)
    return float(raw)


def parse_config(path) -> RunConfig:
    """Read a flat ``key = value`` file; ``#`` starts a comment."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    overrides, run_opts = {}, {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, raw = (x.strip() for x in line.split("=", 1))
        if key not in _PARAM_FIELDS and key not in _RUN_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            value = _convert(key, raw)
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: cannot parse value {raw!r} for key {key!r}") from None
        (run_opts if key in _RUN_KEYS else overrides)[key] = value
    try:
        params = SystemParams(**overrides)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    cfg = RunConfig(params=params, **run_opts)
    cfg.validate()
    return cfg


def _resolve(args) -> RunConfig:
    cfg = parse_config(args.config) if args.config else RunConfig()
    for name in ("workload", "solar", "bs_count", "trace", "controller", "forecaster", "seed", "out"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    if getattr(args, "horizon", None) is not None:
        cfg.horizon = args.horizon
    if cfg.workload and args.trace is None:
        cfg.trace = None
    cfg.validate()
    return cfg


def cmd_simulate(args) -> int:
    cfg = _resolve(args)
    trace = cfg.load()
    records = sim.run(trace, cfg.controller, cfg.forecaster, cfg.params, seed=cfg.seed, T=cfg.horizon)
    m = sim.metrics(records, params=cfg.params)
    if cfg.out:
        sim.export_csv(records, cfg.out)
    print(f"controller={cfg.controller} slots={trace.slots} total_energy_J={m.total_energy:.6f} "
          f"baseline_J={m.baseline_energy:.6f} mean_savings_pct={m.mean_savings:.4f} "
          f"grid_J={m.grid_energy:.6f} violations={m.violations}")
    bad = m.constraint_violations + m.violations.get("fallback", 0) + m.violations.get("deficit", 0)
    return EXIT_INFEASIBLE if bad else EXIT_OK


def cmd_forecast_eval(args) -> int:
    cfg = _resolve(args)
    trace = cfg.load()
    # the seasonal period cannot exceed the training segment
    period = max(1, min(args.period, int(round(fc.TRAIN_FRACTION * trace.slots))))
    config = fc.TrainConfig(seed=cfg.seed, period=period)
    lines = ["series,model," + ",".join(f"rmse_t{k + 1}" for k in range(cfg.horizon))]
    for label, series in (("workload", trace.workload), ("solar", trace.harvest)):
        norm, _, _ = normalize_minmax(series)
        for kind in fc.KINDS:
            try:
                rep = fc.evaluate(fc.train_split(kind, norm, config), norm, cfg.horizon)
            except ValueError as exc:
                raise TraceError(f"{label} series: {exc}") from None
            lines.append(f"{label},{kind}," + ",".join(f"{v:.6f}" for v in rep.rmse_per_step))
    _emit(lines, cfg.out)
    return EXIT_OK


def _sweep_point(job):
    trace, controller, params, kappa = job
    return sim.per_task_energy_curve(trace, controller, params, [kappa])


def cmd_sweep_kappa(args) -> int:
    cfg = _resolve(args)
    trace = cfg.load()
    try:
        kappas = [float(k) for k in args.kappa.split(",")]
    except ValueError:
        raise ConfigError(f"cannot parse --kappa list {args.kappa!r}") from None
    if any(k < 0 for k in kappas) or args.jobs < 1:
        raise ConfigError("kappa values must be nonnegative and --jobs at least 1")
    jobs = [(trace, cfg.controller, cfg.params, k) for k in kappas]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            parts = list(pool.map(_sweep_point, jobs))
    else:
        parts = [_sweep_point(j) for j in jobs]
    table = {}
    for part in parts:
        table.update(part)
    lines = ["M,kappa_e,per_task_energy"]
    for (M, kappa), value in sorted(table.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        lines.append(f"{M},{kappa},{'' if value is None else f'{value:.6f}'}")
    _emit(lines, cfg.out)
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    cfg = _resolve(args)
    mismatches = oracle_equivalence(cfg.seed, cfg.horizon, args.instances)
    print(f"instances={args.instances} horizon={cfg.horizon} mismatches={len(mismatches)}")
    for m in mismatches[:10]:
        print("  mismatch:", m, file=sys.stderr)
    return EXIT_OK if not mismatches else EXIT_INFEASIBLE


def _emit(lines, out) -> None:
    text = "\n".join(lines) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mecsim", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config")
        p.add_argument("--workload")
        p.add_argument("--solar")
        p.add_argument("--bs-count", dest="bs_count")
        p.add_argument("--trace", choices=sorted(BUNDLED), help="bundled synthetic trace")
        p.add_argument("--controller", choices=sim.CONTROLLERS)
        p.add_argument("--forecaster", choices=fc.KINDS)
        p.add_argument("--horizon", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--out")

    p = sub.add_parser("simulate", help="run one controller over a trace")
    common(p)
    p.set_defaults(func=cmd_simulate)
    p = sub.add_parser("forecast-eval", help="per-step RMSE of each forecasting model")
    common(p)
    p.add_argument("--period", type=int, default=1440, help="seasonal-naive period in slots")
    p.set_defaults(func=cmd_forecast_eval)
    p = sub.add_parser("sweep-kappa", help="per-task energy versus forced VM count")
    common(p)
    p.add_argument("--kappa", default="0.001,0.005")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep_kappa)
    p = sub.add_parser("oracle-check", help="compare the lookahead search with exhaustive enumeration")
    common(p)
    p.add_argument("--instances", type=int, default=100)
    p.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TraceError as exc:
        print(f"trace error: {exc}", file=sys.stderr)
        return EXIT_TRACE


if __name__ == "__main__":
    sys.exit(main())
