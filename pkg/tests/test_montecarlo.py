import math
from dataclasses import replace

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

import analytic
import montecarlo
from errors import DomainError, EmptyWindowError
from model import DuplexMode, HdhnConfig, LinkQuery, TierParams
from montecarlo import (Approximation, Estimate, NetworkRealization, SimSettings, TierSnapshot,
                        associate, default_window_radius, realize_network, sample_ppp)


def snapshot(points, fd=None):
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    mask = np.zeros(len(pts), dtype=bool) if fd is None else np.asarray(fd, dtype=bool)
    return TierSnapshot(pts, mask, np.zeros_like(pts))


def network(*tiers):
    return NetworkRealization(tuple(tiers), 100.0, 0)


class TestEstimate:
    def test_from_samples(self):
        est = Estimate.from_samples([1.0, 0.0, 1.0, 0.0], seed=7)
        assert est.mean == 0.5
        assert_allclose(est.stderr, np.std([1, 0, 1, 0], ddof=1) / 2.0)
        assert est.n == 4 and est.seed == 7

    def test_within(self):
        est = Estimate(0.5, 0.01, 100, 1)
        assert est.within(0.52)
        assert not est.within(0.54)
        assert Estimate(1.0, 0.0, 10, 1).within(1.0)


class TestSamplePpp:
    def test_zero_density(self):
        rng = np.random.default_rng(1)
        assert sample_ppp(0.0, 100.0, rng).shape == (0, 2)

    def test_count_and_uniformity(self, seed):
        rng = np.random.default_rng(seed)
        radius = 500.0
        counts, r2 = [], []
        for _ in range(10_000):
            pts = sample_ppp(1e-3, radius, rng)
            counts.append(len(pts))
            r2.append(np.sum(pts ** 2, axis=1))
        assert Estimate.from_samples(counts, seed).within(1e-3 * math.pi * radius ** 2)
        assert Estimate.from_samples(np.concatenate(r2), seed).within(radius ** 2 / 2.0)

    def test_domain(self):
        rng = np.random.default_rng(1)
        with pytest.raises(DomainError):
            sample_ppp(-1.0, 100.0, rng)
        with pytest.raises(DomainError):
            sample_ppp(1e-3, 0.0, rng)


class TestWindow:
    def test_tail_fraction(self, single_tier):
        radius = default_window_radius(single_tier)
        a = 1.0 / (2.0 * math.sqrt(1e-3))
        assert_allclose((radius / a) ** (2.0 - 4.0), 1e-3, rtol=1e-12)

    def test_culled_window_uses_d_min(self, single_tier):
        assert_allclose(default_window_radius(single_tier, d_min=30.0), 30.0 * math.sqrt(1000.0), rtol=1e-12)

    def test_smallest_alpha_dominates(self, base_config):
        mixed = base_config.with_tier(1, pathloss_exp=3.0)
        assert default_window_radius(mixed) > default_window_radius(base_config)


class TestAssociate:
    def test_single_ap(self, base_config):
        a = associate(network(snapshot([(3.0, 4.0)]), snapshot([])), base_config)
        assert (a.tier, a.index, a.mode) == (0, 0, DuplexMode.HD)
        assert_allclose(a.distance, 5.0)

    def test_nearest_with_equal_bias(self, base_config):
        net = network(snapshot([(10.0, 0.0), (0.0, -20.0)]), snapshot([(5.0, 0.0)], fd=[True]))
        a = associate(net, base_config)
        assert (a.tier, a.index, a.mode) == (1, 0, DuplexMode.FD)
        assert_allclose(a.distance, 5.0)

    def test_bias_extends_range(self, base_config):
        cfg = base_config.with_tier(1, bias=16.0)
        net = network(snapshot([(5.0, 0.0)]), snapshot([(9.0, 0.0)]))
        assert associate(net, cfg).tier == 1

    def test_tie_goes_to_lowest_tier(self, base_config):
        net = network(snapshot([(10.0, 0.0)]), snapshot([(0.0, 10.0)]))
        assert associate(net, base_config).tier == 0

    def test_empty_window(self, base_config):
        with pytest.raises(EmptyWindowError):
            associate(network(snapshot([]), snapshot([])), base_config)


class TestRealization:
    def test_deterministic(self, base_config, seed):
        sim = SimSettings(realizations=1, seed=seed)
        first = realize_network(base_config, sim, 5)
        second = realize_network(base_config, sim, 5)
        for a, b in zip(first.tiers, second.tiers):
            assert_array_equal(a.positions, b.positions)
            assert_array_equal(a.fd_mask, b.fd_mask)
            assert_array_equal(a.user_positions, b.user_positions)

    def test_approximations_share_positions(self, base_config, seed):
        exact = realize_network(base_config, SimSettings(realizations=1, seed=seed), 3)
        coloc = realize_network(base_config, SimSettings(realizations=1, seed=seed,
                                                    approximation=Approximation.COLOCATED), 3)
        for a, b in zip(exact.tiers, coloc.tiers):
            assert_array_equal(a.positions, b.positions)
            assert_array_equal(b.user_positions, b.positions)
            if len(a.positions):
                assert not np.array_equal(a.user_positions, a.positions)

    def test_approximation_from_string(self):
        assert SimSettings(approximation="colocated").approximation is Approximation.COLOCATED
        assert SimSettings().approximation is Approximation.EXACT

    def test_counts_tags_and_user_distances(self, seed):
        cfg = HdhnConfig(tiers=(TierParams(density=1e-3, fd_portion=0.3),))
        sim = SimSettings(realizations=1, seed=seed)
        radius = 200.0
        counts, tags, d2 = [], [], []
        for index in range(300):
            snap = realize_network(cfg, sim, index, radius).tiers[0]
            counts.append(len(snap.positions))
            tags.append(snap.fd_mask)
            d2.append(np.sum(snap.user_offsets ** 2, axis=1))
        assert Estimate.from_samples(counts, seed).within(1e-3 * math.pi * radius ** 2)
        assert Estimate.from_samples(np.concatenate(tags), seed).within(0.3)
        assert Estimate.from_samples(np.concatenate(d2), seed).within(1.0 / (math.pi * 1e-3))

    def test_user_field_keeps_associated_users(self, base_config, seed):
        sim = SimSettings(realizations=1, seed=seed, user_density=1e-2)
        net = realize_network(base_config, sim, 0, 150.0)
        snap = net.tiers[0]
        assert snap.fd_mask.all()
        assert np.isfinite(snap.user_positions).all()

    def test_serving_cell_excluded(self, base_config, seed):
        net = network(snapshot([(10.0, 0.0)], fd=[True]), snapshot([]))
        assert montecarlo._interference_at_origin(base_config, net, seed, (0, 0)) == 0.0
        net = network(snapshot([(10.0, 0.0), (40.0, 0.0)]), snapshot([]))
        value = montecarlo._interference_at_origin(base_config, net, seed, (0, 0))
        assert 0.0 < value < math.inf


class TestEstimators:
    def test_laplace_zero_argument(self, seed):
        tier = TierParams(density=1e-3, fd_portion=1.0)
        est = montecarlo.estimate_laplace(tier, 0.0, 30.0, Approximation.EXACT, SimSettings(realizations=10, seed=seed))
        assert (est.mean, est.stderr) == (1.0, 0.0)

    def test_laplace_domain(self, seed):
        tier = TierParams(density=1e-3, fd_portion=1.0)
        with pytest.raises(DomainError):
            montecarlo.estimate_laplace(tier, 1.0, 0.0, Approximation.EXACT, SimSettings(realizations=10, seed=seed))

    def test_tiny_threshold_always_succeeds(self, single_tier, seed):
        sim = SimSettings(realizations=300, seed=seed, chunk=100, approximation=Approximation.COLOCATED)
        est = montecarlo.estimate_stp(single_tier, LinkQuery(0, "hd", target_sir=1e-12), sim)
        assert est.mean >= 1.0 - 1e-3

    def test_zero_density_throughput(self, base_config, seed):
        cfg = base_config.with_tier(0, density=0.0).with_tier(1, density=0.0)
        estimates = montecarlo.estimate_throughput(cfg, SimSettings(realizations=5, seed=seed))
        assert [e.mean for e in estimates] == [0.0, 0.0]

    def test_settings_validation(self):
        with pytest.raises(DomainError):
            SimSettings(realizations=0)
        with pytest.raises(DomainError):
            SimSettings(window_radius=-1.0)


@pytest.mark.slow
class TestAgreement:
    def test_worker_count_does_not_change_results(self, base_config, seed):
        q = LinkQuery(0, "fd", "downlink")
        one = montecarlo.estimate_stp(base_config, q, SimSettings(realizations=400, seed=seed, chunk=100, workers=1))
        two = montecarlo.estimate_stp(base_config, q, SimSettings(realizations=400, seed=seed, chunk=100, workers=2))
        assert one == two

    def test_single_tier_hd_stp(self, single_tier, seed):
        sim = SimSettings(realizations=100_000, seed=seed, approximation=Approximation.COLOCATED)
        est = montecarlo.estimate_stp(single_tier, LinkQuery(0, "hd"), sim)
        assert est.within(1.0 / (1.0 + math.pi / 4.0))

    def test_default_fd_downlink_stp(self, base_config, seed):
        q = LinkQuery(0, "fd", "downlink")
        sim = SimSettings(realizations=100_000, seed=seed, approximation=Approximation.COLOCATED)
        assert montecarlo.estimate_stp(base_config, q, sim).within(analytic.stp(base_config, q).value)

    def test_laplace_matches_closed_form(self, seed):
        tier = TierParams(density=1e-3, ap_power=30.0, user_power=3.0, fd_portion=1.0)
        sim = SimSettings(realizations=5_000, seed=seed)
        for s in (1e2, 1e3, 1e4):
            est = montecarlo.estimate_laplace(tier, s, 30.0, Approximation.COLOCATED, sim)
            assert est.within(analytic.laplace_fd(tier, s, 30.0))

    def test_displacement_gap_shrinks_with_density(self, seed):
        sim = SimSettings(realizations=3_000, seed=seed)
        gaps = []
        for lam in (1e-3, 2e-3):
            tier = TierParams(density=lam, ap_power=30.0, user_power=3.0, fd_portion=1.0)
            exact = montecarlo.estimate_laplace(tier, 1e4, 30.0, Approximation.EXACT, sim)
            coloc = montecarlo.estimate_laplace(tier, 1e4, 30.0, Approximation.COLOCATED, sim)
            gaps.append(abs(exact.mean - coloc.mean))
        assert gaps[1] < gaps[0]

    def test_association_frequencies(self, base_config, seed):
        cfg = base_config.with_fd_portions((0.5, 0.0))
        freq = montecarlo.estimate_association(cfg, SimSettings(realizations=100_000, seed=seed))
        for k, row in enumerate(analytic.association_probabilities(cfg)):
            for mode, p in zip(DuplexMode, row):
                assert freq[(k, mode)].within(p)

    def test_throughput_matches_analytic(self, base_config, seed):
        sim = SimSettings(realizations=100, seed=seed, chunk=25, approximation=Approximation.COLOCATED)
        estimates = montecarlo.estimate_throughput(base_config, sim)
        for est, value in zip(estimates, analytic.throughput(base_config).per_tier):
            assert est.within(value)

    @pytest.mark.parametrize("lam2,beta", [(1e-2, -50.0), (1e-2, -10.0), (0.0, -50.0)])
    def test_throughput_at_self_ic_crossover_points(self, base_config, seed, lam2, beta):
        cfg = base_config.with_tier(1, density=lam2).with_tier(0, self_ic_db=beta)
        sim = SimSettings(realizations=100, seed=seed, chunk=25, approximation=Approximation.COLOCATED)
        estimates = montecarlo.estimate_throughput(cfg, sim)
        for est, value in zip(estimates, analytic.throughput(cfg).per_tier):
            assert est.within(value)

    def test_window_doubling(self, single_tier, seed):
        q = LinkQuery(0, "hd")
        base = SimSettings(realizations=4_000, seed=seed, approximation=Approximation.COLOCATED)
        radius = default_window_radius(single_tier)
        small = montecarlo.estimate_stp(single_tier, q, base)
        large = montecarlo.estimate_stp(single_tier, q, replace(base, window_radius=2.0 * radius))
        assert abs(small.mean - large.mean) <= 3.0 * math.hypot(small.stderr, large.stderr)
