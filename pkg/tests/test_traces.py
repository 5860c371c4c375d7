import numpy as np
import pytest

from mecsim.traces import (BUNDLED, SystemParams, Trace, TraceError, bundled_paths, denormalize,
                           generate_bundled, load_trace, load_trace_csv, normalize_minmax,
                           scale_solar_to_battery, synthesize_diurnal, write_trace_csv)


def write(path, rows, header="slot,value"):
    path.write_text(header + "\n" + "".join(f"{a},{b}\n" for a, b in rows))
    return path


class TestSystemParams:
    def test_defaults(self):
        p = SystemParams()
        assert p.f_max == 105.0
        assert p.B_low == pytest.approx(147e3)
        assert p.B_up == pytest.approx(343e3)
        assert p.capacity == 50.0

    @pytest.mark.parametrize("bad", [
        dict(d=0), dict(d=11), dict(Delta=2.5), dict(freq_set=(50.0, 105.0)),
        dict(freq_set=(0.0, 70.0, 50.0)), dict(B_low_frac=0.8), dict(lambda_max=100.0),
        dict(kappa_e=-1.0), dict(Gamma=0.0),
    ])
    def test_invalid(self, bad):
        with pytest.raises(ValueError):
            SystemParams(**bad)


class TestLoadCsv:
    def test_parse(self, tmp_path):
        f = write(tmp_path / "w.csv", [(0, 1.0), (1, 2.0)])
        np.testing.assert_array_equal(load_trace_csv(f, "workload"), [1.0, 2.0])

    def test_gap(self, tmp_path):
        f = write(tmp_path / "w.csv", [(0, 1.0), (2, 3.0)])
        with pytest.raises(TraceError, match="gap at slot 1"):
            load_trace_csv(f, "workload")

    def test_non_integer_bs(self, tmp_path):
        f = write(tmp_path / "b.csv", [(0, 2.5)])
        with pytest.raises(TraceError, match="non-integer"):
            load_trace_csv(f, "bs_count")

    def test_negative(self, tmp_path):
        f = write(tmp_path / "w.csv", [(0, -1.0)])
        with pytest.raises(TraceError, match="negative"):
            load_trace_csv(f, "workload")

    def test_malformed(self, tmp_path):
        f = tmp_path / "w.csv"
        f.write_text("slot,value\n0,abc\n")
        with pytest.raises(TraceError):
            load_trace_csv(f, "workload")

    def test_bad_header(self, tmp_path):
        f = write(tmp_path / "w.csv", [(0, 1.0)], header="t,x")
        with pytest.raises(TraceError):
            load_trace_csv(f, "workload")

    def test_missing(self, tmp_path):
        with pytest.raises(TraceError, match="missing"):
            load_trace_csv(tmp_path / "nope.csv", "workload")

    def test_round_trip(self, tmp_path):
        x = np.random.default_rng(0).uniform(0, 50, 30)
        write_trace_csv(x, tmp_path / "x.csv")
        np.testing.assert_array_equal(load_trace_csv(tmp_path / "x.csv", "workload"), x)


class TestTrace:
    def test_length_mismatch(self):
        with pytest.raises(TraceError):
            Trace(np.zeros(3), np.zeros(2), np.ones(3))

    def test_bs_floor(self):
        with pytest.raises(TraceError):
            Trace(np.zeros(2), np.zeros(2), np.array([1, 0]))

    def test_load_scales_solar(self, tmp_path):
        w = write(tmp_path / "w.csv", [(0, 1.0), (1, 2.0)])
        s = write(tmp_path / "s.csv", [(0, 0.5), (1, 1.0)])
        b = write(tmp_path / "b.csv", [(0, 3), (1, 4)])
        tr = load_trace(w, s, b)
        np.testing.assert_array_equal(tr.harvest, [245e3, 490e3])
        assert tr.slots == 2


class TestScaleSolar:
    def test_examples(self, params):
        np.testing.assert_allclose(scale_solar_to_battery([0, 0.5, 1.0], params), [0, 245e3, 490e3])
        np.testing.assert_array_equal(scale_solar_to_battery([0, 0], params), [0, 0])
        np.testing.assert_array_equal(scale_solar_to_battery([2, 2], params), [490e3, 490e3])

    def test_max_is_exact(self, params):
        raw = np.random.default_rng(3).uniform(0, 0.37, 500)
        assert scale_solar_to_battery(raw, params).max() == params.B_max


class TestSynthesis:
    def test_noiseless_cycle(self):
        x = synthesize_diurnal(4, peak=2.0, trough=0.0, period=4, noise_std=0.0)
        assert x.min() == pytest.approx(0.0, abs=1e-12)
        assert x.max() == pytest.approx(2.0)

    def test_deterministic(self):
        a = synthesize_diurnal(100, 10, 1, 50, noise_std=0.3, seed=5)
        b = synthesize_diurnal(100, 10, 1, 50, noise_std=0.3, seed=5)
        assert a.tobytes() == b.tobytes()

    def test_seed_changes_series(self):
        a = synthesize_diurnal(50, 10, 1, 25, noise_std=0.1, seed=1)
        b = synthesize_diurnal(50, 10, 1, 25, noise_std=0.1, seed=2)
        assert not np.array_equal(a, b)

    def test_floored(self):
        assert synthesize_diurnal(500, 1.0, 0.0, 100, noise_std=2.0, seed=0).min() >= 0.0

    @pytest.mark.parametrize("name", sorted(BUNDLED))
    def test_bundled_files_match_generator(self, name, params):
        work, solar, bs = generate_bundled(name)
        w_path, s_path, b_path = bundled_paths(name)
        np.testing.assert_array_equal(load_trace_csv(w_path, "workload"), work)
        np.testing.assert_array_equal(load_trace_csv(s_path, "solar"), solar)
        np.testing.assert_array_equal(load_trace_csv(b_path, "bs_count"), bs)
        assert work.max() <= params.capacity


class TestNormalize:
    def test_affine(self):
        x, lo, hi = normalize_minmax([2, 4, 6])
        np.testing.assert_array_equal(x, [0, 0.5, 1])
        assert (lo, hi) == (2, 6)

    def test_constant(self):
        x, lo, hi = normalize_minmax([5, 5])
        np.testing.assert_array_equal(x, [0, 0])
        assert lo == hi == 5

    def test_round_trip(self):
        s = np.random.default_rng(9).uniform(-3, 40, 200)
        x, lo, hi = normalize_minmax(s)
        np.testing.assert_allclose(denormalize(x, lo, hi), s, rtol=1e-12)

    def test_empty(self):
        with pytest.raises(ValueError):
            normalize_minmax([])
