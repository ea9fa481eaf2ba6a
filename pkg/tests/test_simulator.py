import math

import numpy as np
import pytest

from qampnc.constellation import Kind, qam
from qampnc.simulator import (
    BerPoint,
    ChannelModel,
    Protocol,
    Scheme,
    SimConfig,
    bc_constellation,
    draw_fade,
    relay_ml_decode,
    run_protocol_trial,
    sweep,
    wilson_interval,
)


class TestChannel:
    def test_rayleigh_power(self):
        h = draw_fade(ChannelModel.rayleigh(), np.random.default_rng(0), 1_000_000)
        assert np.mean(np.abs(h) ** 2) == pytest.approx(1.0, abs=0.01)
        assert abs(np.mean(h)) < 0.01

    def test_rician_moments(self):
        K = 10 ** 0.5
        h = draw_fade(ChannelModel.rician_db(5), np.random.default_rng(1), 1_000_000)
        assert np.mean(h) == pytest.approx(math.sqrt(K / (K + 1)), abs=0.005)
        assert np.mean(np.abs(h) ** 2) == pytest.approx(1.0, abs=0.01)
        assert np.var(h) == pytest.approx(1 / (K + 1), abs=0.005)

    def test_rician_limits(self):
        rng = np.random.default_rng(2)
        h = ChannelModel.rician(math.inf).draw(rng, 100)
        assert np.allclose(h, 1.0)
        a = ChannelModel.rician(0.0).draw(np.random.default_rng(3), 10)
        b = ChannelModel.rayleigh().draw(np.random.default_rng(3), 10)
        assert np.allclose(a, b)

    def test_validation(self):
        with pytest.raises(ValueError):
            ChannelModel.rician(-1.0)
        with pytest.raises(ValueError):
            ChannelModel.rayleigh(variance=0.0)


class TestStatistics:
    def test_wilson_reference_value(self):
        lo, hi = wilson_interval(5, 100)
        assert lo == pytest.approx(0.02154, abs=1e-4)
        assert hi == pytest.approx(0.11175, abs=1e-4)

    def test_single_trial_point(self):
        p = BerPoint.from_counts(10.0, 1, 0, 8)
        assert p.ber == 0.0 and 0 < p.ci_halfwidth <= 0.5
        assert 0 <= p.ci[0] <= p.ci[1] <= 1


class TestRelay:
    def test_noiseless_recovery_off_singular_states(self):
        C = qam(16, "unit")
        rng = np.random.default_rng(4)
        k, l = rng.integers(0, 16, 500), rng.integers(0, 16, 500)
        hA = rng.normal(size=500) + 1j * rng.normal(size=500)
        hB = rng.normal(size=500) + 1j * rng.normal(size=500)
        kh, lh = relay_ml_decode(hA * C.points[k] + hB * C.points[l], hA, hB, C)
        assert np.array_equal(kh, k) and np.array_equal(lh, l)

    def test_tie_goes_to_smallest_pair(self):
        C = qam(16, "unit")
        # at z = 1 every pair with the same sum is an ML solution
        y = C.points[9] + C.points[2]
        ties = [(a, b) for a in range(16) for b in range(16) if abs(C.points[a] + C.points[b] - y) < 1e-12]
        assert len(ties) > 2
        kh, lh = relay_ml_decode(y, 1.0, 1.0, C)
        assert (int(kh), int(lh)) == min(ties)

    def test_bc_constellations(self):
        C = qam(16, "unit")
        for t in (16, 17, 18, 20, 32):
            pts = bc_constellation(C, t)
            assert len(pts) == t
            assert np.mean(np.abs(pts) ** 2) == pytest.approx(1.0)
            assert len(np.unique(np.round(pts, 9))) == t
        # the first 16 points of the larger set are the 16-QAM grid
        grid = bc_constellation(C, 17)[:16] * math.sqrt(np.mean(np.abs(bc_constellation(C, 17)) ** 2))
        assert np.allclose(np.sort_complex(grid / np.abs(grid).min()), np.sort_complex(C.points / np.abs(C.points).min()))
        assert np.allclose(np.abs(bc_constellation(C, 17, "psk")), 1)


class TestProtocol:
    def test_noiseless_trials(self, bank16):
        cfg = SimConfig(kind=Kind.QAM, M=16)
        proto = Protocol(cfg, bank=bank16)
        rng = np.random.default_rng(6)
        assert run_protocol_trial(cfg, rng, proto, noiseless=True) == (0, 0)
        assert proto.run(2000, rng, 0.0) == (0, 0)

    def test_xor_floor_at_unit_fade(self):
        proto = Protocol(SimConfig(scheme=Scheme.FIXED_XOR))
        e = proto.run(2000, np.random.default_rng(7), 0.0, h_A=0.6 + 0.6j, h_B=0.6 + 0.6j)
        assert sum(e) > 0

    def test_ci_fallback_uses_standard_square(self, bank16):
        proto = Protocol(SimConfig(), bank=bank16)
        z = np.array([5 + 0j, 0.05j, 2 + 1j])
        idx = proto.select(z)
        assert idx[0] == idx[1] == proto.fallback
        assert idx[2] == bank16.fades.index_of(2 + 1j)

    def test_bank_mismatch(self, bank16):
        with pytest.raises(ValueError):
            Protocol(SimConfig(kind=Kind.PSK, M=16), bank=bank16)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SimConfig(trials=0)
        with pytest.raises(ValueError):
            SimConfig(snr_db=(10, float("nan")))
        with pytest.raises(ValueError):
            SimConfig(bc_policy="cross")


class TestSweep:
    def test_seed_determinism_and_thread_independence(self):
        cfg = SimConfig(scheme=Scheme.FIXED_XOR, snr_db=(15, 25), trials=3000, seed=11, chunk=512)
        proto = Protocol(cfg)
        a = sweep(cfg, proto, threads=1)
        b = sweep(cfg, proto, threads=4)
        assert a == b
        c = sweep(SimConfig(scheme=Scheme.FIXED_XOR, snr_db=(15, 25), trials=3000, seed=12, chunk=512), proto)
        assert a != c

    def test_ber_decreases_with_snr(self, bank16):
        cfg = SimConfig(snr_db=(5, 15, 25, 35), trials=4000, seed=3)
        pts = sweep(cfg, Protocol(cfg, bank=bank16))
        for lo, hi in zip(pts, pts[1:]):
            sigma = math.sqrt(max(lo.ber * (1 - lo.ber), 1e-12) / lo.bits)
            assert hi.ber <= lo.ber + 3 * sigma
        assert all(0 <= p.ber <= 1 and p.trials == 4000 for p in pts)
