import numpy as np
import pytest

from mecsim.cli import ConfigError, main, parse_config
from mecsim.traces import SystemParams, synthesize_diurnal, write_trace_csv


@pytest.fixture
def small_trace(tmp_path):
    n = 120
    work = synthesize_diurnal(n, 30.0, 2.0, 60, noise_std=0.5, seed=1)
    sun = np.clip(np.sin(np.arange(n) / 60 * np.pi), 0, None)
    write_trace_csv(work, tmp_path / "w.csv")
    write_trace_csv(sun, tmp_path / "s.csv")
    write_trace_csv(np.full(n, 7), tmp_path / "b.csv", integer=True)
    return ["--workload", str(tmp_path / "w.csv"), "--solar", str(tmp_path / "s.csv"),
            "--bs-count", str(tmp_path / "b.csv")]


def cfg(tmp_path, text, name="c.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestParseConfig:
    def test_empty_is_defaults(self, tmp_path):
        c = parse_config(cfg(tmp_path, ""))
        assert c.params == SystemParams()
        assert (c.controller, c.horizon, c.seed) == ("arces", 3, 0)

    def test_single_override(self, tmp_path):
        c = parse_config(cfg(tmp_path, "# sweep point\nkappa_e = 0.001  # lower\n"))
        assert c.params == SystemParams(kappa_e=0.001)

    def test_types(self, tmp_path):
        c = parse_config(cfg(tmp_path, "freq_set = 0, 60, 105\nM_max = 8\nhorizon = 2\ncontroller = irs\n"))
        assert c.params.freq_set == (0.0, 60.0, 105.0) and c.params.M_max == 8
        assert (c.horizon, c.controller) == (2, "irs")

    def test_bad_value_names_key(self, tmp_path):
        with pytest.raises(ConfigError, match="kappa_e"):
            parse_config(cfg(tmp_path, "kappa_e = fast\n"))

    @pytest.mark.parametrize("text", ["bogus = 1\n", "d = 0\n", "horizon = 0\n", "just words\n",
                                      "controller = greedy\n", "workload = w.csv\n"])
    def test_rejected(self, tmp_path, text):
        with pytest.raises(ConfigError):
            parse_config(cfg(tmp_path, text))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            parse_config(tmp_path / "none.cfg")


class TestExitCodes:
    def test_simulate_ok(self, tmp_path, small_trace, capsys):
        out = tmp_path / "r.csv"
        c = cfg(tmp_path, "kappa_e = 0.005\n")
        code = main(["simulate", "--config", str(c), "--controller", "arces", "--forecaster",
                     "persistence", "--out", str(out)] + small_trace)
        assert code == 0
        assert len(out.read_text().splitlines()) == 121
        assert "mean_savings_pct" in capsys.readouterr().out

    def test_config_error(self, tmp_path, small_trace, capsys):
        code = main(["simulate", "--config", str(cfg(tmp_path, "bogus = 1\n"))] + small_trace)
        assert code == 1
        assert "bogus" in capsys.readouterr().err

    def test_partial_trace_paths(self, small_trace):
        assert main(["simulate"] + small_trace[:2]) == 1

    def test_missing_trace(self, tmp_path, capsys):
        code = main(["simulate", "--workload", str(tmp_path / "x.csv"), "--solar", str(tmp_path / "y.csv"),
                     "--bs-count", str(tmp_path / "z.csv")])
        assert code == 2
        assert "trace error" in capsys.readouterr().err

    def test_gap_in_trace(self, tmp_path, small_trace):
        (tmp_path / "w.csv").write_text("slot,value\n0,1.0\n2,1.0\n")
        assert main(["simulate"] + small_trace) == 2

    def test_infeasible(self, tmp_path, small_trace):
        c = cfg(tmp_path, "B_max = 300\n")
        assert main(["simulate", "--config", str(c), "--controller", "nomgmt",
                     "--forecaster", "persistence"] + small_trace) == 3

    def test_oracle_check(self, capsys):
        assert main(["oracle-check", "--seed", "7", "--horizon", "3"]) == 0
        assert "mismatches=0" in capsys.readouterr().out


class TestOtherCommands:
    def test_forecast_eval(self, tmp_path, small_trace):
        out = tmp_path / "f.csv"
        assert main(["forecast-eval", "--horizon", "2", "--period", "60", "--out", str(out)]
                    + small_trace) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "series,model,rmse_t1,rmse_t2"
        assert len(lines) == 1 + 2 * 3

    def test_forecast_eval_short_trace(self, tmp_path):
        for kind, vals in (("w", [0.1] * 6), ("s", [0.0] * 6), ("b", [1] * 6)):
            write_trace_csv(vals, tmp_path / f"{kind}.csv", integer=kind == "b")
        args = ["--workload", str(tmp_path / "w.csv"), "--solar", str(tmp_path / "s.csv"),
                "--bs-count", str(tmp_path / "b.csv")]
        assert main(["forecast-eval"] + args) == 2

    def test_sweep_kappa(self, tmp_path, small_trace):
        out1, out2 = tmp_path / "k1.csv", tmp_path / "k2.csv"
        assert main(["sweep-kappa", "--kappa", "0.001,0.005", "--out", str(out1)] + small_trace) == 0
        assert main(["sweep-kappa", "--kappa", "0.001,0.005", "--jobs", "2", "--out", str(out2)]
                    + small_trace) == 0
        assert out1.read_bytes() == out2.read_bytes()
        assert len(out1.read_text().splitlines()) == 1 + 2 * 10

    def test_sweep_bad_kappa(self, small_trace):
        assert main(["sweep-kappa", "--kappa", "0.1,fast"] + small_trace) == 1

    def test_bad_subcommand(self):
        with pytest.raises(SystemExit):
            main(["dance"])
