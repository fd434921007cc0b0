"""Monte Carlo engine tests: oracle agreement, determinism, corner cases."""

import numpy as np
import pytest

from tagdrop.model import (
    ChannelModel,
    NetworkConfig,
    PacketSpec,
    config_from_occupancy,
    packet_error_rate,
    tdr_exact,
)
from tagdrop.simulator import (
    CONTINUOUS_TIMELINE,
    ERASED,
    PER_CYCLE,
    SimOptions,
    TrialBatch,
    estimate_tdr,
    overlap_fraction,
    simulate_inventory,
    _collisions_per_cycle,
)


class TestOverlapFraction:
    def test_full_overlap(self):
        assert overlap_fraction(0.4, 0.4, 1e-3) == 1.0

    def test_disjoint(self):
        assert overlap_fraction(0.0, 2e-3, 1e-3) == 0.0
        assert overlap_fraction(0.0, 1e-3, 1e-3) == 0.0

    def test_partial(self):
        assert overlap_fraction(0.0, 0.25, 1.0) == pytest.approx(0.75)

    def test_boundary_not_corrupting(self):
        # separation of exactly (1 - alpha) * t_p leaves overlap alpha,
        # which the strict rule does not corrupt; the engine compares in the
        # time domain, |dt| < (1 - alpha) * t_p
        t_p, alpha = 1.0, 0.37
        times = np.array([[[0.0, (1.0 - alpha) * t_p]]])
        corrupted, _, _ = _collisions_per_cycle(times.reshape(1, 1, 2), (1.0 - alpha) * t_p, False)
        assert not corrupted.any()
        assert overlap_fraction(0.0, (1.0 - alpha) * t_p, t_p) == pytest.approx(alpha, abs=1e-12)

    def test_invalid_duration(self):
        with pytest.raises(ValueError):
            overlap_fraction(0.0, 0.0, 0.0)


class TestCollisionKernel:
    def test_mutual_corruption(self):
        # packets at 0.10 and 0.15 collide; the one at 0.50 is clear
        times = np.array([0.10, 0.15, 0.50]).reshape(1, 1, 3)
        corrupted, _, _ = _collisions_per_cycle(times, window=0.1, want_overlaps=False)
        assert corrupted.reshape(-1).tolist() == [True, True, False]

    def test_chain_of_three(self):
        times = np.array([0.10, 0.15, 0.20]).reshape(1, 1, 3)
        corrupted, _, _ = _collisions_per_cycle(times, window=0.08, want_overlaps=False)
        assert corrupted.all()


class TestSimOptions:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"trials": 0},
            {"trials": 10, "collision_scope": "nope"},
            {"trials": 10, "subthreshold_overlap": "nope"},
            {"trials": 10, "decoder": "nope"},
        ],
    )
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            SimOptions(**kwargs)


class TestEstimateTdr:
    def test_alpha_one_noiseless_never_drops(self):
        cfg = config_from_occupancy(k_tags=40, cycles=2, d_cycle=0.6)
        est = estimate_tdr(cfg, ChannelModel(alpha=1.0, ber=0.0), SimOptions(trials=300, seed=5))
        assert est.tdr == 0.0
        assert est.dropped_tag_inventories == 0

    def test_single_trial_single_tag(self):
        cfg = config_from_occupancy(k_tags=1, cycles=1, d_cycle=0.5)
        est = estimate_tdr(cfg, ChannelModel(alpha=1.0, ber=0.0), SimOptions(trials=1, seed=9))
        assert est.tdr == 0.0
        assert est.std_error == 0.0
        assert est.total_tag_inventories == 1

    def test_estimator_identities(self):
        cfg = config_from_occupancy(k_tags=6, cycles=2, d_cycle=0.2)
        est = estimate_tdr(cfg, ChannelModel(alpha=0.37, ber=0.05), SimOptions(trials=700, seed=2))
        assert est.total_tag_inventories == 6 * 700
        assert est.tdr == est.dropped_tag_inventories / est.total_tag_inventories
        assert est.std_error == pytest.approx(
            np.sqrt(est.tdr * (1 - est.tdr) / est.total_tag_inventories)
        )

    def test_deterministic_and_parallel_identical(self):
        cfg = config_from_occupancy(k_tags=9, cycles=3, d_cycle=0.15)
        ch = ChannelModel(alpha=0.37, ber=0.08)
        opts = SimOptions(trials=1500, seed=77)
        a = estimate_tdr(cfg, ch, opts)
        b = estimate_tdr(cfg, ch, opts)
        c = estimate_tdr(cfg, ch, opts, workers=4)
        assert a == b == c

    def test_seed_changes_outcome(self):
        cfg = config_from_occupancy(k_tags=9, cycles=1, d_cycle=0.3)
        ch = ChannelModel(alpha=0.37)
        a = estimate_tdr(cfg, ch, SimOptions(trials=400, seed=1))
        b = estimate_tdr(cfg, ch, SimOptions(trials=400, seed=2))
        assert a.dropped_tag_inventories != b.dropped_tag_inventories

    def test_collision_limited_matches_exact_formula(self):
        # small-population regime, noiseless channel
        ch = ChannelModel(alpha=0.37, ber=0.0)
        for k, l, d in ((8, 1, 0.05), (8, 1, 0.12), (4, 2, 0.1)):
            cfg = config_from_occupancy(k_tags=k, cycles=l, d_cycle=d)
            est = estimate_tdr(cfg, ch, SimOptions(trials=20_000, seed=k * 10 + l))
            expect = tdr_exact(cfg, ch)
            assert abs(est.tdr - expect) < 3 * max(est.std_error, 1e-6)

    def test_noise_limited_matches_per(self):
        spec = PacketSpec(n_rep=3, symbol_rate_baud=2e6)
        cfg = NetworkConfig(k_tags=1, cycles=1, inventory_period_s=1.0, packet=spec)
        ch = ChannelModel(alpha=0.37, ber=0.1)
        est = estimate_tdr(cfg, ch, SimOptions(trials=30_000, seed=4))
        assert abs(est.tdr - packet_error_rate(spec, 0.1)) < 3 * est.std_error

    def test_noise_limited_multicycle_power(self):
        # with K=1 the drop rate is PER^L
        spec = PacketSpec(n_rep=1, symbol_rate_baud=2e6)
        cfg = NetworkConfig(k_tags=1, cycles=2, inventory_period_s=1.0, packet=spec)
        ch = ChannelModel(alpha=0.37, ber=0.2)
        est = estimate_tdr(cfg, ch, SimOptions(trials=40_000, seed=6))
        expect = packet_error_rate(spec, 0.2) ** 2
        assert abs(est.tdr - expect) < 3 * est.std_error

    def test_monotone_in_ber_paired_seed(self):
        cfg = config_from_occupancy(k_tags=6, cycles=2, d_cycle=0.1)
        opts = SimOptions(trials=4000, seed=13)
        low = estimate_tdr(cfg, ChannelModel(alpha=0.37, ber=0.02), opts)
        high = estimate_tdr(cfg, ChannelModel(alpha=0.37, ber=0.25), opts)
        assert high.tdr >= low.tdr - 3 * (low.std_error + high.std_error)

    def test_erasure_decoder_beats_majority(self):
        spec = PacketSpec(n_rep=4, symbol_rate_baud=2e6)
        cfg = NetworkConfig(k_tags=1, cycles=1, inventory_period_s=1.0, packet=spec)
        ch = ChannelModel(alpha=0.37, ber=0.2)
        maj = estimate_tdr(cfg, ch, SimOptions(trials=20_000, seed=3, decoder="majority"))
        era = estimate_tdr(cfg, ch, SimOptions(trials=20_000, seed=3, decoder="erasure"))
        assert era.tdr < maj.tdr
        assert abs(era.tdr - packet_error_rate(spec, 0.2, decoder="erasure")) < 4 * max(
            era.std_error, 1e-4
        )


class TestCollisionScopes:
    def test_own_packets_never_corrupt_each_other(self):
        # K=1 on the continuous timeline: consecutive wakeups can sit close
        # to the cycle boundary but a tag transmits serially
        cfg = config_from_occupancy(k_tags=1, cycles=8, d_cycle=0.9)
        opts = SimOptions(trials=2000, seed=21, collision_scope=CONTINUOUS_TIMELINE)
        est = estimate_tdr(cfg, ChannelModel(alpha=0.0, ber=0.0), opts)
        assert est.tdr == 0.0

    def test_timeline_sees_at_least_per_cycle_collisions(self):
        cfg = config_from_occupancy(k_tags=10, cycles=4, d_cycle=0.5)
        ch = ChannelModel(alpha=0.37, ber=0.0)
        per = estimate_tdr(cfg, ch, SimOptions(trials=3000, seed=8, collision_scope=PER_CYCLE))
        tl = estimate_tdr(
            cfg, ch, SimOptions(trials=3000, seed=8, collision_scope=CONTINUOUS_TIMELINE)
        )
        assert tl.tdr >= per.tdr - 3 * (per.std_error + tl.std_error)

    def test_timeline_cross_boundary_collisions_detected(self):
        # dense config: boundary spillover must corrupt packets that the
        # per-cycle scope treats as clear
        cfg = config_from_occupancy(k_tags=3, cycles=6, d_cycle=0.95)
        ch = ChannelModel(alpha=0.1, ber=0.0)
        per = estimate_tdr(cfg, ch, SimOptions(trials=6000, seed=31, collision_scope=PER_CYCLE))
        tl = estimate_tdr(
            cfg, ch, SimOptions(trials=6000, seed=31, collision_scope=CONTINUOUS_TIMELINE)
        )
        assert tl.tdr > per.tdr


class TestSubthresholdErased:
    def test_erased_mode_no_less_damaging(self):
        # alpha high: plenty of sub-threshold overlaps to erase
        cfg = config_from_occupancy(k_tags=10, cycles=2, d_cycle=0.4, n_rep=2)
        opts_h = SimOptions(trials=4000, seed=17, subthreshold_overlap="harmless")
        opts_e = SimOptions(trials=4000, seed=17, subthreshold_overlap=ERASED)
        ch = ChannelModel(alpha=0.9, ber=0.0)
        harmless = estimate_tdr(cfg, ch, opts_h)
        erased = estimate_tdr(cfg, ch, opts_e)
        assert erased.tdr >= harmless.tdr
        assert erased.tdr > 0.0

    def test_erased_mode_noop_without_overlaps(self):
        cfg = config_from_occupancy(k_tags=2, cycles=1, d_cycle=1e-6)
        opts = SimOptions(trials=3000, seed=19, subthreshold_overlap=ERASED)
        est = estimate_tdr(cfg, ChannelModel(alpha=0.9, ber=0.0), opts)
        assert est.tdr == 0.0


class TestSimulateInventory:
    def test_shape_and_determinism(self):
        cfg = config_from_occupancy(k_tags=12, cycles=3, d_cycle=0.2)
        ch = ChannelModel(alpha=0.37, ber=0.1)
        opts = SimOptions(trials=1, seed=0)
        a = simulate_inventory(cfg, ch, opts, np.random.default_rng(123))
        b = simulate_inventory(cfg, ch, opts, np.random.default_rng(123))
        assert a.shape == (12,)
        assert a.dtype == bool
        assert (a == b).all()

    def test_all_succeed_when_nothing_corrupts(self):
        cfg = config_from_occupancy(k_tags=5, cycles=2, d_cycle=0.3)
        ch = ChannelModel(alpha=1.0, ber=0.0)
        flags = simulate_inventory(cfg, ch, SimOptions(trials=1, seed=0), np.random.default_rng(1))
        assert flags.all()


class TestTrialBatch:
    def test_estimate_subsets_are_prefix_consistent(self):
        cfg = config_from_occupancy(k_tags=5, cycles=2, d_cycle=0.2)
        opts = SimOptions(trials=1000, seed=3)
        batch = TrialBatch(cfg, 0.37, opts)
        full = batch.estimate(0.0)
        again = batch.estimate(0.0)
        assert full == again
        part = batch.estimate(0.0, trials=300)
        assert part.trials == 300
        assert part.total_tag_inventories == 1500

    def test_rejects_oversized_request(self):
        cfg = config_from_occupancy(k_tags=5, cycles=2, d_cycle=0.2)
        batch = TrialBatch(cfg, 0.37, SimOptions(trials=100, seed=3))
        with pytest.raises(ValueError):
            batch.estimate(0.0, trials=200)
