import math

import numpy as np
import pytest

from mecsim.energy import (ControlInput, InfeasibleControl, VmAllocation, check_constraints,
                           cpu_energy, driver_count, fixed_rate, is_batch_slot,
                           linearized_link_power, link_power, switching_energy, toe_energy,
                           total_energy, vlan_energy, wcom_energy)
from mecsim.provisioner import build_control, make_alloc

# reference values evaluated independently at 40 significant digits
CPU_105_50 = 81.33786848072562358
RATE_5 = 8.333333333333333333
P_RATE_5 = 0.1607698943865437651
VLAN_5 = 0.1929238732638525181


def alloc(lam, f, params):
    return make_alloc(lam, f, params)


class TestCpu:
    def test_extremes(self, params):
        assert cpu_energy([alloc(0, 105, params)], params) == 60.0
        assert cpu_energy([alloc(0, 0, params)], params) == 10.0

    def test_two_vms(self, params):
        e = cpu_energy([alloc(5, 105, params), alloc(5, 50, params)], params)
        assert e == pytest.approx(CPU_105_50, rel=1e-12)

    def test_monotone_in_f(self, params):
        vals = [cpu_energy([alloc(0, f, params)], params) for f in params.freq_set]
        assert vals == sorted(vals)


class TestSwitching:
    def test_examples(self):
        assert switching_energy([50], [50], 0.005) == 0.0
        assert switching_energy([50], [70], 0.005) == pytest.approx(2.0)
        assert switching_energy([50, 0], [70, 105], 0.005) == pytest.approx(57.125)

    def test_padding(self):
        assert switching_energy([50], [50, 70], 0.005) == switching_energy([50, 0], [50, 70], 0.005)

    def test_symmetric(self):
        a, b = [50, 70, 0], [105, 0]
        assert switching_energy(a, b, 0.005) == switching_energy(b, a, 0.005)


class TestToe:
    def test_examples(self, params):
        assert toe_energy(0, 0, params) == 0.0
        assert toe_energy(1, 1400, params) == pytest.approx(14.1)
        assert toe_energy(1, 0, params) == pytest.approx(13.1)

    def test_off_with_traffic(self, params):
        with pytest.raises(InfeasibleControl):
            toe_energy(0, 1.0, params)


class TestRateAndPower:
    def test_fixed_rate(self, params):
        assert fixed_rate(5, params) == pytest.approx(RATE_5, rel=1e-14)
        assert fixed_rate(0, params) == 0.0

    @pytest.mark.parametrize("lam", [0.01, 1.0, 2.5, 4.99, 5.0])
    def test_delay_tight(self, lam, params):
        r = fixed_rate(lam, params)
        assert 2 * lam / r + params.Delta == pytest.approx(params.tau_max, abs=1e-12)

    def test_link_power(self, params):
        assert link_power(0, params) == 0.0
        assert link_power(1, params) == pytest.approx(0.5e-3, rel=1e-14)
        assert link_power(RATE_5, params) == pytest.approx(P_RATE_5, rel=1e-12)

    def test_vlan(self, params):
        a = alloc(5, 50, params)
        assert vlan_energy([a], params) == pytest.approx(VLAN_5, rel=1e-12)
        assert vlan_energy([alloc(0, 0, params)], params) == 0.0
        assert vlan_energy([a, a], params) == 2 * vlan_energy([a], params)

    def test_vlan_rate_cap(self, params):
        fast = VmAllocation(lam=5.0, f=50.0, r=60.0, P=link_power(60.0, params))
        with pytest.raises(InfeasibleControl):
            vlan_energy([fast, fast], params)

    def test_linearized_zero_load(self, params):
        assert linearized_link_power(0.0, 1.0, 0.0, params) == pytest.approx(math.log(params.Gamma / params.W))

    def test_linearized_calibration(self, params):
        # with mu = 1 the calibration equation is linear in nu
        target = link_power(fixed_rate(5.0, params), params)
        nu = fixed_rate(5.0, params) - (math.log(target) - math.log(params.Gamma)) / math.log(2.0)
        assert nu == pytest.approx(0.004479869414985539, rel=1e-9)
        assert math.exp(linearized_link_power(5.0, 1.0, nu, params)) == pytest.approx(target, rel=1e-9)

    def test_linearized_monotone(self, params):
        vals = [linearized_link_power(x, 1.0, 0.0, params) for x in np.linspace(0, 5, 200)]
        assert np.all(np.diff(vals) > 0)

    def test_linearized_mu_zero(self, params):
        with pytest.raises(ValueError):
            linearized_link_power(1.0, 0.0, 0.0, params)


class TestDrivers:
    @pytest.mark.parametrize("n_bs,expected", [(4, 2), (100, 4), (300, 6), (1, 2)])
    def test_examples(self, n_bs, expected, params):
        assert driver_count(n_bs, params) == expected

    def test_monotone_and_clamped(self, params):
        ys = [driver_count(n, params) for n in range(1, 2000)]
        assert ys == sorted(ys)
        assert min(ys) >= 1 and max(ys) == params.Y_max

    def test_wcom(self, params):
        assert wcom_energy(10, 2, params) == pytest.approx(10.0)
        assert wcom_energy(0, 2, params) == 0.0
        assert wcom_energy(10, 5, params) == pytest.approx(10.0)
        with pytest.raises(InfeasibleControl):
            wcom_energy(10, 0, params)

    def test_batch_slots(self, params):
        assert [t for t in range(9) if is_batch_slot(t, params)] == [2, 5, 8]


class TestTotal:
    def test_idle(self, params):
        idle = build_control(0.0, 1, 1, "fill_first", params)
        e = total_energy(idle, [0.0], 0.0, 0.0, params)
        assert e.total == 10.0
        assert (e.sc, e.toe, e.vlan, e.wcom) == (0, 0, 0, 0)

    def test_no_management_idle(self, params):
        from mecsim.controller import no_management_step
        c = no_management_step(0.0, params)
        e = total_energy(c, c, 0.0, 0.0, params)
        assert e.total == pytest.approx(613.1)

    def test_decomposition(self, params):
        c = build_control(23.7, 6, 50, "even", params)
        e = total_energy(c, [50.0, 70.0], 23.7, 41.0, params)
        assert e.total == e.cpu + e.sc + e.toe + e.vlan + e.wcom
        assert e.comp + e.comm == pytest.approx(e.total)
        assert e.cpu == cpu_energy(c.allocs, params)
        assert e.sc == switching_energy([50.0, 70.0], c.freqs, params.kappa_e)
        assert e.wcom == wcom_energy(41.0, c.Y, params)

    def test_prev_forms_agree(self, params):
        a = build_control(12.0, 3, 4, "fill_first", params)
        b = build_control(20.0, 5, 4, "even", params)
        assert total_energy(b, a, 20, 0, params) == total_energy(b, a.freqs, 20, 0, params)
        assert total_energy(b, None, 20, 0, params) == total_energy(b, [], 20, 0, params)


class TestConstraints:
    def test_feasible_candidate(self, params):
        c = build_control(12.0, 3, 4, "fill_first", params)
        assert check_constraints(c, params.B_up, params, load=12.0).ok

    def test_c1(self, params):
        c = ControlInput(M=0, allocs=(), zeta=0, Y=1)
        assert "C1" in check_constraints(c, params.B_up, params).violated

    def test_c2(self, params):
        c = build_control(0.0, 1, 1, "fill_first", params)
        assert "C2" in check_constraints(c, params.B_low * 0.9, params).violated
        assert "C2" not in check_constraints(c, None, params).violated

    def test_c3_c4_c5(self, params):
        bad = ControlInput(M=1, allocs=(make_alloc(6.0, 120.0, params),), zeta=1, Y=1)
        assert {"C3", "C4"} <= set(check_constraints(bad, None, params).violated)
        slow = ControlInput(M=1, allocs=(VmAllocation(5.0, 5.0, fixed_rate(5.0, params), 0.1),), zeta=1, Y=1)
        assert "C5" in check_constraints(slow, None, params).violated

    def test_c5_holds_at_50(self, params):
        a = make_alloc(5.0, 50.0, params)
        assert a.chi == pytest.approx(0.1)
        assert check_constraints(ControlInput(1, (a,), 1, 1), None, params).ok

    def test_c6_c7(self, params):
        slow_link = VmAllocation(5.0, 50.0, 4.0, link_power(4.0, params))
        v = check_constraints(ControlInput(1, (slow_link,), 1, 1), None, params)
        assert "C7" in v.violated
        wide = tuple(VmAllocation(5.0, 50.0, 30.0, link_power(30.0, params)) for _ in range(4))
        assert "C6" in check_constraints(ControlInput(4, wide, 1, 1), None, params).violated

    def test_load_mismatch(self, params):
        c = build_control(12.0, 3, 4, "fill_first", params)
        assert check_constraints(c, None, params, load=13.0).violated == ("LOAD",)
