import numpy as np
import pytest

from conftest import mh_grid_eps
from network_simulator import Topology
from path_matching import (LinkRateTracker, Matching, MatchingError, NodeMatcher,
                           balancing_objectives, balancing_optima, brute_force_match,
                           decentralized_match, eta_max, global_path_rates, min_cut_capacity,
                           natural_match, route_topology)

FIRST_HOP_ORDER = [0, 3, 2, 1]


def test_example_matching_matrices(example_rates):
    matching = natural_match(example_rates, first_hop_order=FIRST_HOP_ORDER)
    L, G = matching.to_printed()
    assert L.tolist() == [[1, 2, 3], [2, 1, 1], [3, 4, 2], [4, 3, 4]]
    assert G.tolist() == [[1, 2, 1], [2, 1, 3], [3, 4, 4], [4, 3, 2]]


def test_example_throughputs(example_rates):
    natural = natural_match(example_rates, first_hop_order=FIRST_HOP_ORDER)
    naive = Matching.identity(4, 3)
    assert eta_max(naive, example_rates) == pytest.approx(1.5)
    assert eta_max(natural, example_rates) == pytest.approx(2.4)
    assert min_cut_capacity(example_rates) == pytest.approx(2.6)
    assert eta_max(brute_force_match(example_rates), example_rates) == pytest.approx(2.4)


def test_bottleneck_free_variant_reaches_min_cut(bottleneck_free_rates):
    matching = natural_match(bottleneck_free_rates)
    assert eta_max(matching, bottleneck_free_rates) == pytest.approx(2.6)
    assert min_cut_capacity(bottleneck_free_rates) == pytest.approx(2.6)


def test_global_path_rates_min_and_forwarding(example_rates):
    matching = natural_match(example_rates, first_hop_order=FIRST_HOP_ORDER)
    rates = global_path_rates(matching, example_rates)
    np.testing.assert_allclose(rates.r_G, [0.8, 0.2, 0.6, 0.8])
    forwarding = global_path_rates(matching, example_rates, forwarding=True)
    np.testing.assert_allclose(forwarding.r_G, [0.512, 0.2 * 0.4 * 0.3, 0.8 * 0.6 * 0.7, 0.512])
    assert rates.to_dict()['eta_max'] == pytest.approx(2.4)


def test_natural_match_equals_brute_force_on_random_networks():
    rng = np.random.default_rng(77)
    for _ in range(60):
        H = int(rng.integers(2, 4))
        P = int(rng.integers(2, 5))
        rates = np.round(rng.random((H, P)), 1)
        natural = eta_max(natural_match(rates), rates)
        exact = eta_max(brute_force_match(rates), rates)
        assert natural == pytest.approx(exact), rates
        assert natural <= min_cut_capacity(rates) + 1e-12


def test_decentralized_matching_equals_natural(example_rates):
    central = natural_match(example_rates, first_hop_order=FIRST_HOP_ORDER)
    distributed = decentralized_match(example_rates, first_hop_order=FIRST_HOP_ORDER)
    np.testing.assert_array_equal(central.L, distributed.L)
    np.testing.assert_array_equal(central.G, distributed.G)

    rates = 1.0 - mh_grid_eps(0.3, 0.7)
    assert eta_max(decentralized_match(rates), rates) == pytest.approx(eta_max(natural_match(rates), rates))


def test_sorted_local_match_optimizes_both_balancing_objectives():
    rng = np.random.default_rng(5)
    for _ in range(40):
        rates_in = np.round(rng.random(4), 2)
        rates_out = np.round(rng.random(4), 2)
        by_min, by_absdiff = balancing_optima(rates_in, rates_out)
        assert by_min == by_absdiff

        l = np.zeros(4, dtype=int)
        l[np.argsort(-rates_in, kind="stable")] = np.argsort(-rates_out, kind="stable")
        assert tuple(l.tolist()) in by_min


def test_balancing_objectives_for_one_permutation():
    objectives = balancing_objectives([0.9, 0.1], [0.2, 0.8], [1, 0])
    assert objectives.sum_min == pytest.approx(0.9)
    assert objectives.sum_absdiff == pytest.approx(0.2)
    with pytest.raises(MatchingError):
        balancing_objectives([0.9], [0.2, 0.8], [1, 0])


def test_inadmissible_matchings_are_rejected():
    with pytest.raises(MatchingError, match="permutação"):
        Matching(np.array([[0], [0]]), np.array([[0, 0], [1, 0]]))
    with pytest.raises(MatchingError, match="inconsistentes"):
        Matching(np.array([[1], [0]]), np.array([[0, 0], [1, 1]]))
    with pytest.raises(MatchingError):
        natural_match([[0.5, 1.5]])
    with pytest.raises(MatchingError, match="decrescente"):
        natural_match([[0.2, 0.8], [0.5, 0.5]], first_hop_order=[0, 1])


def test_from_global_rebuilds_local_matching(example_rates):
    matching = natural_match(example_rates)
    rebuilt = Matching.from_global(matching.G)
    np.testing.assert_array_equal(rebuilt.L, matching.L)


def test_brute_force_size_limit():
    with pytest.raises(MatchingError):
        brute_force_match(np.full((2, 7), 0.5))


def test_node_matcher_recomputes_only_on_reorder():
    node = NodeMatcher(1, [0.9, 0.5, 0.7])
    np.testing.assert_array_equal(node.match([2, 0, 1]), [2, 1, 0])
    assert not node.update_rates([0.8, 0.4, 0.6])
    assert node.update_rates([0.1, 0.5, 0.7])
    np.testing.assert_array_equal(node.local, [1, 0, 2])
    with pytest.raises(MatchingError):
        node.match([0, 1])


def test_link_rate_tracker_reports_reorder():
    tracker = LinkRateTracker(2, prior=0.5)
    tracker.observe(0, True)
    assert not tracker.reordered()
    tracker.observe(1, True)
    tracker.observe(0, False)
    tracker.observe(0, False)
    assert tracker.reordered()
    np.testing.assert_allclose(tracker.rates(), [1 / 3, 1.0])


def test_route_topology_follows_global_paths(example_rates):
    topology = Topology(1.0 - example_rates, 12)
    matching = natural_match(example_rates, first_hop_order=FIRST_HOP_ORDER)
    routed = route_topology(topology, matching)
    for p in range(4):
        for h in range(3):
            assert routed.eps[h, p] == pytest.approx(topology.eps[h, matching.G[p, h]])
    with pytest.raises(MatchingError):
        route_topology(Topology.single_hop([0.1] * 4, 12), matching)
