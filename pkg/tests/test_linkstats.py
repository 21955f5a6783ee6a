import pytest

from taburpl.errors import TaburplError
from taburpl.linkstats import (
    ENERGY_FLOOR_J,
    EnergyState,
    LinkStats,
    dequantize_ls,
    ls_for_cost,
    quantize_ls,
    safe_residual,
    update_etx,
    update_ls_packet,
    update_ls_windowed,
)


class TestPerPacketEwma:
    def test_ack_from_initial(self):
        assert update_ls_packet(0.5, True) == pytest.approx(0.625)

    def test_perfect_link_fixed_point(self):
        assert update_ls_packet(1.0, True) == pytest.approx(1.0)

    def test_nack_from_initial(self):
        assert update_ls_packet(0.5, False) == pytest.approx(0.375)

    def test_rejects_out_of_range(self):
        with pytest.raises(TaburplError):
            update_ls_packet(1.5, True)


class TestWindowedEwma:
    def test_full_window_of_acks(self):
        assert update_ls_windowed(0.5, 32, 32) == pytest.approx(0.625)

    def test_all_losses(self):
        assert update_ls_windowed(0.8, 0, 32) == pytest.approx(0.6)

    def test_no_update_when_no_traffic(self):
        assert update_ls_windowed(0.37, 0, 0) == 0.37

    def test_converges_to_one(self):
        ls = 0.1
        for i in range(50):
            ls = update_ls_windowed(ls, 16, 16)
            if abs(ls - 1.0) < 1e-6:
                break
        assert abs(ls - 1.0) < 1e-6
        assert i < 50

    def test_rejects_more_acks_than_txs(self):
        with pytest.raises(TaburplError):
            update_ls_windowed(0.5, 5, 4)


class TestQuantization:
    def test_zero(self):
        assert quantize_ls(0.0) == 0

    def test_half(self):
        assert quantize_ls(0.5) == 128

    def test_one_clamps_to_byte(self):
        assert quantize_ls(1.0) == 255

    def test_round_trip_error_bounded(self):
        for i in range(0, 1001):
            ls = i / 1000.0
            assert abs(dequantize_ls(quantize_ls(ls)) - ls) <= 1 / 256.0


class TestLsForCost:
    def test_dequantizes_byte(self):
        assert ls_for_cost(LinkStats(ls=0.5, ls_byte=128)) == pytest.approx(0.5)

    def test_floor_applied(self):
        assert ls_for_cost(LinkStats(ls=0.0, ls_byte=0)) == pytest.approx(0.05)

    def test_etx_fallback_when_metric_absent(self):
        assert ls_for_cost(LinkStats(ls_byte=None, etx=4.0)) == pytest.approx(0.25)


class TestEtx:
    def test_perfect_link_fixed_point(self):
        assert update_etx(1.0, 1) == pytest.approx(1.0)

    def test_five_attempts(self):
        assert update_etx(1.0, 5) == pytest.approx(2.0)

    def test_converges_to_steady_attempts(self):
        etx = 1.0
        for _ in range(100):
            etx = update_etx(etx, 2)
        assert etx == pytest.approx(2.0, abs=1e-6)

    def test_estimate_prefers_measured_value(self):
        st = LinkStats()
        st.record_delivery(3)
        assert st.etx_estimate() == st.etx

    def test_estimate_falls_back_to_inverse_stability(self):
        st = LinkStats(ls=0.5, ls_byte=128)
        assert st.etx_estimate() == pytest.approx(2.0)


class TestSafeResidual:
    def test_zero_floors(self):
        assert safe_residual(0.0) == pytest.approx(ENERGY_FLOOR_J)

    def test_above_floor_unchanged(self):
        assert safe_residual(100.0) == 100.0

    def test_just_below_floor(self):
        assert safe_residual(0.049) == pytest.approx(0.05)

    def test_negative_rejected(self):
        with pytest.raises(TaburplError):
            safe_residual(-1.0)


class TestLinkStatsUpdates:
    def test_attempt_updates_window_and_counters(self):
        st = LinkStats()
        st.record_attempt(True)
        st.record_attempt(False)
        assert st.tx_count == 2
        assert st.ack_count == 1
        assert list(st.tx_window) == [True, False]
        assert st.ls_byte == quantize_ls(st.ls)

    def test_window_bounded(self):
        st = LinkStats()
        for _ in range(100):
            st.record_attempt(True)
        assert len(st.tx_window) == 32

    def test_windowed_refresh_uses_ring(self):
        st = LinkStats(ls=0.5, ls_byte=128)
        for _ in range(4):
            st.record_attempt(True)
        before = st.ls
        st.windowed_refresh()
        assert st.ls == pytest.approx(0.75 * before + 0.25)


class TestEnergyState:
    def test_debit_tracks_drawn(self):
        e = EnergyState(10.0, 10.0)
        e.debit(3.0)
        assert e.residual_j == pytest.approx(7.0)
        assert e.drawn_j == pytest.approx(3.0)

    def test_cannot_go_negative(self):
        e = EnergyState(1.0, 1.0)
        e.debit(5.0)
        assert e.residual_j == 0.0
        assert e.drawn_j == pytest.approx(1.0)

    def test_negative_debit_rejected(self):
        with pytest.raises(TaburplError):
            EnergyState().debit(-0.1)
