"""Closed-form model tests.

Expected values come from independent routes: exhaustive enumeration of flip
patterns for the repetition decoders, a small brute-force Monte Carlo for
the collision formula, and hand arithmetic for the timing examples.
"""

import itertools
import math

import numpy as np
import pytest

from tagdrop.model import (
    ERASURE,
    MAJORITY,
    ChannelModel,
    NetworkConfig,
    PacketSpec,
    approximation_valid,
    bit_erasure_failure,
    bit_majority_failure,
    config_from_occupancy,
    drop_rate_exact,
    occupancies,
    occupied_bandwidth,
    optimal_cycles,
    packet_duration,
    packet_error_rate,
    tdr_approx_cycle,
    tdr_approx_slot,
    tdr_exact,
)


def enumerate_majority_failure(n_rep: int, ber: float) -> float:
    """Oracle: walk all 2^n flip patterns, apply the tie-fails vote."""
    total = 0.0
    for pattern in itertools.product([0, 1], repeat=n_rep):
        wrong = sum(pattern)
        prob = math.prod(ber if b else 1.0 - ber for b in pattern)
        if wrong * 2 >= n_rep:  # strict majority wrong, or an even split
            total += prob
    return total


def enumerate_erasure_failure(n_rep: int, ber: float) -> float:
    """Oracle: a bit is lost only when every copy is corrupted."""
    total = 0.0
    for pattern in itertools.product([0, 1], repeat=n_rep):
        prob = math.prod(ber if b else 1.0 - ber for b in pattern)
        if all(pattern):
            total += prob
    return total


class TestPacketSpec:
    def test_duration_examples_exact(self):
        assert packet_duration(PacketSpec(n_rep=10, symbol_rate_baud=200e3)) == 1.0e-3
        assert packet_duration(PacketSpec(n_rep=4, symbol_rate_baud=2e6)) == 5.2e-5
        assert packet_duration(PacketSpec(n_rep=2, symbol_rate_baud=2e6)) == 3.6e-5

    def test_total_symbols(self):
        assert PacketSpec(n_rep=10, symbol_rate_baud=200e3).total_symbols == 200

    def test_bandwidth(self):
        assert occupied_bandwidth(PacketSpec(n_rep=4, symbol_rate_baud=2e6)) == 12e6
        assert occupied_bandwidth(PacketSpec(n_rep=10, symbol_rate_baud=200e3)) == 1.2e6
        # boundary of the 6*Rs <= B constraint
        b = 12e6
        assert occupied_bandwidth(PacketSpec(n_rep=1, symbol_rate_baud=b / 6.0)) == b

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n_rep": 0, "symbol_rate_baud": 1e6},
            {"n_rep": 1, "symbol_rate_baud": 0.0},
            {"n_rep": 1, "symbol_rate_baud": -5.0},
            {"n_rep": 1, "symbol_rate_baud": 1e6, "id_symbols": 0},
        ],
    )
    def test_invalid_spec(self, kwargs):
        with pytest.raises(ValueError):
            PacketSpec(**kwargs)


class TestNetworkConfig:
    def test_packet_must_fit_cycle(self):
        packet = PacketSpec(n_rep=10, symbol_rate_baud=200e3)  # 1 ms
        with pytest.raises(ValueError):
            NetworkConfig(k_tags=5, cycles=2000, inventory_period_s=1.0, packet=packet)
        # exactly fitting is allowed
        NetworkConfig(k_tags=5, cycles=1000, inventory_period_s=1.0, packet=packet)

    def test_t_cycle(self):
        cfg = NetworkConfig(
            k_tags=10,
            cycles=4,
            inventory_period_s=2.0,
            packet=PacketSpec(n_rep=1, symbol_rate_baud=1e6),
        )
        assert cfg.t_cycle_s == 0.5


class TestOccupancies:
    def test_design_point_values(self):
        # K=1000, L=12, T_R=1 s, T_p=0.052 ms, by hand:
        # d_inv = 5.2e-5, d_cycle = 12*d_inv, d_slot = 1000*d_inv
        cfg = NetworkConfig(
            k_tags=1000,
            cycles=12,
            inventory_period_s=1.0,
            packet=PacketSpec(n_rep=4, symbol_rate_baud=2e6),
        )
        occ = occupancies(cfg)
        assert occ.d_inv == pytest.approx(5.2e-5, rel=1e-12)
        assert occ.d_cycle == pytest.approx(6.24e-4, rel=1e-12)
        assert occ.d_slot == pytest.approx(0.052, rel=1e-12)

    def test_single_cycle_and_single_tag_degenerate(self):
        packet = PacketSpec(n_rep=1, symbol_rate_baud=1e6)
        one_cycle = occupancies(
            NetworkConfig(k_tags=7, cycles=1, inventory_period_s=0.1, packet=packet)
        )
        assert one_cycle.d_inv == one_cycle.d_cycle
        one_tag = occupancies(
            NetworkConfig(k_tags=1, cycles=3, inventory_period_s=0.1, packet=packet)
        )
        assert one_tag.d_slot == one_tag.d_inv

    @pytest.mark.parametrize("k,l,tr,nrep,rs", [
        (1000, 12, 1.0, 4, 2e6),
        (7, 3, 0.25, 10, 200e3),
        (31, 5, 1.75, 6, 1.1e6),
    ])
    def test_identity_k_dcycle_equals_l_dslot(self, k, l, tr, nrep, rs):
        cfg = NetworkConfig(
            k_tags=k, cycles=l, inventory_period_s=tr,
            packet=PacketSpec(n_rep=nrep, symbol_rate_baud=rs),
        )
        occ = occupancies(cfg)
        assert k * occ.d_cycle == l * occ.d_slot


class TestChannelModel:
    def test_beta(self):
        assert ChannelModel(alpha=0.37).beta == pytest.approx(0.63)

    @pytest.mark.parametrize("alpha,ber", [(-0.1, 0.0), (1.1, 0.0), (0.5, 0.6), (0.5, -0.1)])
    def test_invalid(self, alpha, ber):
        with pytest.raises(ValueError):
            ChannelModel(alpha=alpha, ber=ber)


class TestTdrExact:
    def test_single_tag_is_zero(self):
        for l in (1, 5, 12):
            cfg = config_from_occupancy(k_tags=1, cycles=l, d_cycle=0.3)
            assert tdr_exact(cfg, ChannelModel(alpha=0.2)) == 0.0

    def test_alpha_one_is_zero(self):
        cfg = config_from_occupancy(k_tags=200, cycles=3, d_cycle=0.4)
        assert tdr_exact(cfg, ChannelModel(alpha=1.0)) == 0.0

    def test_two_tags_handvalue(self):
        # 1 - (1 - 0.5*0.1)^2 = 0.0975
        cfg = config_from_occupancy(k_tags=2, cycles=1, d_cycle=0.1)
        assert tdr_exact(cfg, ChannelModel(alpha=0.5)) == pytest.approx(0.0975, rel=1e-12)

    def test_two_tags_against_brute_force_wakeups(self):
        # independent oracle: draw the two wakeups directly and count the
        # corrupting-overlap event |t1 - t2| < (1 - alpha) * t_p
        rng = np.random.default_rng(20240917)
        trials = 1_000_000
        t_cycle, t_p, alpha = 1.0, 0.1, 0.5
        t1 = rng.random(trials) * t_cycle
        t2 = rng.random(trials) * t_cycle
        hit = np.abs(t1 - t2) < (1.0 - alpha) * t_p
        mc = hit.mean()
        se = math.sqrt(mc * (1 - mc) / trials)
        assert abs(mc - 0.0975) < 4 * se

    def test_monotone_in_k_dcycle_and_alpha(self):
        base = dict(cycles=2, d_cycle=0.05, alpha=0.37)
        tdr_k = [
            drop_rate_exact(k, base["cycles"], base["d_cycle"], base["alpha"])
            for k in (2, 5, 10, 50, 200)
        ]
        assert tdr_k == sorted(tdr_k)
        tdr_d = [drop_rate_exact(20, 2, d, 0.37) for d in (0.01, 0.05, 0.1, 0.3)]
        assert tdr_d == sorted(tdr_d)
        tdr_a = [drop_rate_exact(20, 2, 0.1, a) for a in (0.0, 0.25, 0.5, 0.75, 1.0)]
        assert tdr_a == sorted(tdr_a, reverse=True)


class TestTdrApprox:
    def test_relative_error_small_inside_regime(self):
        # single-cycle form tracks the exact expression to 5% while
        # beta*K*d_cycle stays moderate
        for k in (50, 200, 1000):
            for a in (0.05, 0.1, 0.2, 0.25):
                d = a / (0.63 * k)
                cfg = config_from_occupancy(k_tags=k, cycles=1, d_cycle=d)
                ch = ChannelModel(alpha=0.37)
                exact = tdr_exact(cfg, ch)
                approx = tdr_approx_cycle(cfg, ch)
                assert abs(approx - exact) / exact < 0.05

    def test_absolute_error_bounded_to_validity_limit(self):
        # near the 0.35 validity limit the relative gap grows past 5%, but
        # the absolute gap stays below 0.05
        k = 1000
        for a in (0.3, 0.34, 0.349):
            d = a / (0.63 * k)
            cfg = config_from_occupancy(k_tags=k, cycles=1, d_cycle=d)
            ch = ChannelModel(alpha=0.37)
            assert abs(tdr_approx_cycle(cfg, ch) - tdr_exact(cfg, ch)) < 0.05

    def test_breaks_down_at_single_tag(self):
        cfg = config_from_occupancy(k_tags=1, cycles=1, d_cycle=0.2)
        ch = ChannelModel(alpha=0.37)
        assert tdr_exact(cfg, ch) == 0.0
        assert tdr_approx_cycle(cfg, ch) > 0.0

    def test_zero_beta_gives_zero(self):
        cfg = config_from_occupancy(k_tags=100, cycles=3, d_cycle=0.1)
        assert tdr_approx_cycle(cfg, ChannelModel(alpha=1.0)) == 0.0
        assert tdr_approx_slot(3, 0.5, 1.0) == 0.0

    def test_slot_form_handvalue(self):
        # L=1, beta*d_slot = 0.1 -> 2*0.1 - 2*0.01 = 0.18
        assert tdr_approx_slot(1, 0.2, 0.5) == pytest.approx(0.18, rel=1e-12)

    def test_slot_and_cycle_forms_agree_via_identity(self):
        # with L a power of two the substitution d_slot = k*d_cycle/L is
        # exact in floating point, so both forms see the same product
        k, l, d_cycle, alpha = 100, 4, 0.0123, 0.37
        cfg = config_from_occupancy(k_tags=k, cycles=l, d_cycle=d_cycle)
        ch = ChannelModel(alpha=alpha)
        d_slot = k * d_cycle / l
        assert tdr_approx_slot(l, d_slot, alpha) == tdr_approx_cycle(cfg, ch)

    def test_clamped_to_unit_interval(self):
        # far outside the validity range the raw polynomial is negative
        assert tdr_approx_slot(3, 0.9, 0.0) == 0.0
        for l in (1, 2, 7):
            for d in (0.01, 0.3, 0.7, 2.0):
                assert 0.0 <= tdr_approx_slot(l, d, 0.2) <= 1.0


class TestApproximationValid:
    def test_threshold_strict(self):
        # beta*K*d_cycle = 0.34 -> valid; exactly 0.35 -> not
        cfg = config_from_occupancy(k_tags=100, cycles=1, d_cycle=0.34 / (0.5 * 100))
        assert approximation_valid(cfg, ChannelModel(alpha=0.5))
        cfg = config_from_occupancy(k_tags=100, cycles=1, d_cycle=0.0035)
        assert not approximation_valid(cfg, ChannelModel(alpha=0.0))

    def test_design_point_is_outside(self):
        # K=1000, beta=0.63, d_cycle=6.24e-4 -> product 0.393
        cfg = NetworkConfig(
            k_tags=1000,
            cycles=12,
            inventory_period_s=1.0,
            packet=PacketSpec(n_rep=4, symbol_rate_baud=2e6),
        )
        assert not approximation_valid(cfg, ChannelModel(alpha=0.37))


class TestRepetitionDecoding:
    def test_majority_trivial(self):
        assert bit_majority_failure(5, 0.0) == 0.0
        assert bit_majority_failure(1, 0.23) == pytest.approx(0.23, rel=1e-12)

    def test_majority_handvalue(self):
        # 3*(0.1)^2*0.9 + (0.1)^3 = 0.028
        assert bit_majority_failure(3, 0.1) == pytest.approx(0.028, rel=1e-12)

    @pytest.mark.parametrize("n_rep", [1, 2, 3, 4, 5, 6])
    @pytest.mark.parametrize("ber", [0.0, 0.05, 0.2, 0.5])
    def test_majority_matches_enumeration(self, n_rep, ber):
        assert bit_majority_failure(n_rep, ber) == pytest.approx(
            enumerate_majority_failure(n_rep, ber), abs=1e-12
        )

    @pytest.mark.parametrize("n_rep", [1, 2, 4, 5])
    @pytest.mark.parametrize("ber", [0.0, 0.1, 0.4])
    def test_erasure_matches_enumeration(self, n_rep, ber):
        assert bit_erasure_failure(n_rep, ber) == pytest.approx(
            enumerate_erasure_failure(n_rep, ber), abs=1e-12
        )

    def test_even_split_counts_as_failure(self):
        # n=2: one flip is a tie, so failure needs only one wrong copy
        assert bit_majority_failure(2, 0.1) == pytest.approx(1 - 0.81, rel=1e-12)

    def test_monotone_in_ber(self):
        for n_rep in (1, 3, 4, 7):
            vals = [bit_majority_failure(n_rep, g) for g in np.linspace(0.0, 0.5, 26)]
            assert all(b >= a for a, b in zip(vals, vals[1:]))


class TestPacketErrorRate:
    def test_noiseless(self):
        assert packet_error_rate(PacketSpec(n_rep=3, symbol_rate_baud=1e6), 0.0) == 0.0

    def test_handvalue_matches_bitflip_monte_carlo(self):
        # oracle: flip bits of one million packets and majority-decode them
        spec = PacketSpec(n_rep=3, symbol_rate_baud=1e6)
        rng = np.random.default_rng(11)
        packets = 1_000_000
        flips = rng.random((packets, spec.id_symbols, spec.n_rep)) < 0.1
        bit_fail = flips.sum(axis=2) * 2 >= spec.n_rep
        mc = bit_fail.any(axis=1).mean()
        got = packet_error_rate(spec, 0.1)
        se = math.sqrt(mc * (1 - mc) / packets)
        assert got == pytest.approx(0.365, abs=0.001)
        assert abs(got - mc) < 4 * se

    def test_strictly_increasing_in_ber_for_odd_nrep(self):
        spec = PacketSpec(n_rep=3, symbol_rate_baud=1e6)
        grid = np.linspace(0.001, 0.5, 60)
        vals = [packet_error_rate(spec, g) for g in grid]
        assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_erasure_decoder_value(self):
        spec = PacketSpec(n_rep=4, symbol_rate_baud=1e6)
        got = packet_error_rate(spec, 0.2215, decoder=ERASURE)
        expect = 1.0 - (1.0 - 0.2215**4) ** 16
        assert got == pytest.approx(expect, rel=1e-12)
        # erasure decoding never does worse than the majority vote
        for g in (0.05, 0.2, 0.4):
            assert packet_error_rate(spec, g, decoder=ERASURE) <= packet_error_rate(
                spec, g, decoder=MAJORITY
            )

    def test_unknown_decoder(self):
        with pytest.raises(ValueError):
            packet_error_rate(PacketSpec(n_rep=1, symbol_rate_baud=1e6), 0.1, decoder="bogus")


class TestOptimalCycles:
    def test_matches_direct_minimum(self):
        for d_slot, alpha in ((0.02, 0.37), (0.05, 0.37), (0.12, 0.2)):
            l_max = 15
            best = optimal_cycles(d_slot, alpha, l_max)
            vals = [tdr_approx_slot(l, d_slot, alpha) for l in range(1, l_max + 1)]
            assert vals[best - 1] == min(vals)

    def test_tie_break_toward_smaller_l(self):
        # alpha=1 zeroes every candidate, so the tie resolves to L=1
        assert optimal_cycles(0.1, 1.0, 15) == 1

    def test_requires_positive_l_max(self):
        with pytest.raises(ValueError):
            optimal_cycles(0.1, 0.37, 0)
