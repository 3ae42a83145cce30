import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sdperc.clustering import (
    ClusterStats,
    ReachCounter,
    bfs_oracle,
    box_crossing,
    cluster_radius,
    clusters_with_radius_at_least,
    crossing_exists,
    label_clusters,
    reaches_distance,
)
from sdperc.edgefield import Configuration, SeedKey, realize
from sdperc.geometry import (
    BoxRegion,
    Edge,
    ExtentError,
    slab_box,
)


def config_from_edges(region, open_edges):
    bits = np.zeros(region.edge_count, dtype=bool)
    for e in open_edges:
        bits[region.edge_index(e)] = True
    return Configuration(region, bits)


def assert_same_partition(a, b):
    assert np.array_equal(a.labels, b.labels)
    assert np.array_equal(a.roots, b.roots)
    assert np.array_equal(a.sizes, b.sizes)
    assert np.array_equal(a.mins, b.mins)
    assert np.array_equal(a.maxs, b.maxs)


class TestLabeling:
    def test_all_closed_singletons(self):
        region = BoxRegion((0, 0), 2)
        labeling = label_clusters(realize(SeedKey(1, 0), region, 0.0))
        assert labeling.n_clusters == region.site_count
        assert np.array_equal(labeling.labels,
                              np.arange(region.site_count))

    def test_all_open_single_cluster(self):
        region = BoxRegion((0, 0), 1)
        labeling = label_clusters(realize(SeedKey(1, 0), region, 1.0))
        assert labeling.n_clusters == 1
        assert labeling.stats(0) == ClusterStats(0, 9, 2)

    def test_random_config_matches_oracle(self):
        region = BoxRegion((0, 0), 2)
        for seed in range(20):
            config = realize(SeedKey(5, seed), region, 0.5)
            assert_same_partition(label_clusters(config), bfs_oracle(config))

    @given(seed=st.integers(0, 10 ** 6), d=st.integers(2, 4),
           radius=st.integers(1, 3), p=st.sampled_from([0.2, 0.5, 0.8]))
    @settings(max_examples=30)
    def test_oracle_equivalence_property(self, seed, d, radius, p):
        if d == 4 and radius == 3:
            radius = 2  # keep the BFS side quick
        config = realize(SeedKey(seed, 0), BoxRegion((0,) * d, radius), p)
        assert_same_partition(label_clusters(config), bfs_oracle(config))

    def test_idempotent(self):
        config = realize(SeedKey(9, 9), BoxRegion((0, 0), 3), 0.5)
        assert_same_partition(label_clusters(config), label_clusters(config))

    def test_opening_edge_monotonicity(self):
        region = BoxRegion((0, 0), 3)
        config = realize(SeedKey(4, 2), region, 0.4)
        labeling = label_clusters(config)
        closed_idx = np.flatnonzero(~config.open_bits)
        for k in closed_idx[:10]:
            bits = config.open_bits.copy()
            bits[k] = True
            bigger = label_clusters(Configuration(region, bits))
            assert bigger.n_clusters <= labeling.n_clusters
            # the merged cluster's extent covers both old extents
            edge = region.edge_at(int(k))
            root = bigger.root_of_site(edge.base)
            new_diam = bigger.stats(root).linf_diameter
            old_root = labeling.root_of_site(edge.base)
            assert new_diam >= labeling.stats(old_root).linf_diameter

    def test_labels_are_min_site_index(self):
        config = realize(SeedKey(8, 1), BoxRegion((0, 0), 2), 0.6)
        labeling = label_clusters(config)
        for root in labeling.roots:
            members = labeling.cluster_sites(int(root))
            assert members.min() == root

    def test_small_region_uses_int32(self):
        config = realize(SeedKey(0, 0), BoxRegion((0, 0), 2), 0.5)
        assert label_clusters(config).labels.dtype == np.int32


class TestReachesDistance:
    def test_full_and_empty(self):
        region = BoxRegion((0, 0), 2)
        assert reaches_distance(realize(SeedKey(0, 0), region, 1.0), (0, 0), 2)
        assert not reaches_distance(realize(SeedKey(0, 0), region, 0.0),
                                    (0, 0), 2)

    def test_single_edge_reaches_neighbour_shell(self):
        region = BoxRegion((0, 0), 1)
        config = config_from_edges(region, [Edge((0, 0), 0)])
        assert reaches_distance(config, (0, 0), 1)

    def test_requires_ball_coverage(self):
        region = BoxRegion((0, 0), 2)
        config = realize(SeedKey(0, 0), region, 1.0)
        with pytest.raises(ExtentError):
            reaches_distance(config, (1, 1), 2)

    def test_path_confined_to_ball(self):
        # open path leaves B_y(2) and comes back: must not count
        region = BoxRegion((0, 0), 5)
        path = [(0, 0), (0, 1), (0, 2), (0, 3), (1, 3), (1, 2), (1, 1),
                (2, 1), (2, 0), (3, 0)]
        edges = []
        for a, b in zip(path, path[1:]):
            axis = 0 if a[0] != b[0] else 1
            base = min(a, b)
            edges.append(Edge(base, axis))
        config = config_from_edges(region, edges)
        # within B_0(2) the open path reaches (0,2) at distance 2
        assert reaches_distance(config, (0, 0), 2)
        # remove the inside part; the detour through (0,3) is outside B_0(2)
        config2 = config_from_edges(region, edges[3:])
        assert not reaches_distance(config2, (0, 0), 2)

    def test_counter_counts_exactly(self):
        region = BoxRegion((0, 0), 3)
        sub = BoxRegion((0, 0), 1)
        config = realize(SeedKey(3, 3), region, 0.55)
        counter = ReachCounter(region, sub, 2)
        expected = sum(reaches_distance(config, y, 2) for y in sub.sites())
        assert counter.count(config) == expected


class TestCrossing:
    def test_shared_site_counts(self):
        region = BoxRegion((0, 0), 1)
        labeling = label_clusters(realize(SeedKey(0, 0), region, 0.0))
        assert crossing_exists(labeling, [(0, 0)], [(0, 0)])

    def test_empty_config_no_crossing(self):
        region = BoxRegion((0, 0), 1)
        labeling = label_clusters(realize(SeedKey(0, 0), region, 0.0))
        assert not crossing_exists(labeling, [(-1, -1)], [(1, 1)])

    def test_empty_set_warns_false(self, caplog):
        region = BoxRegion((0, 0), 1)
        labeling = label_clusters(realize(SeedKey(0, 0), region, 1.0))
        with caplog.at_level(logging.WARNING, logger="sdperc.clustering"):
            assert crossing_exists(labeling, [], [(0, 0)]) is False
        assert any("empty site set" in r.message for r in caplog.records)

    def test_box_crossing_axes(self):
        region = BoxRegion((0, 0), 2)
        # single horizontal line crosses axis 0 only after orienting:
        # axis 0 is the first coordinate
        line = [Edge((i, 0), 0) for i in range(-2, 2)]
        labeling = label_clusters(config_from_edges(region, line))
        assert box_crossing(labeling, axis=0)
        assert not box_crossing(labeling, axis=1)


class TestRadiusFilter:
    def test_full_slab_box_single_qualifier(self):
        region = slab_box((0, 0), 1, 2)
        labeling = label_clusters(realize(SeedKey(0, 0), region, 1.0))
        assert len(clusters_with_radius_at_least(labeling, 2)) == 1

    def test_empty_config_no_qualifiers(self):
        region = slab_box((0, 0), 1, 2)
        labeling = label_clusters(realize(SeedKey(0, 0), region, 0.0))
        assert clusters_with_radius_at_least(labeling, 1) == []

    def test_two_bars_qualify(self):
        # two disjoint bars of extent 2L+2, radius L+1 > L each
        L = 2
        region = BoxRegion((0, 0), 4)
        bar1 = [Edge((i, -2), 0) for i in range(-3, 3)]
        bar2 = [Edge((i, 2), 0) for i in range(-3, 3)]
        labeling = label_clusters(config_from_edges(region, bar1 + bar2))
        qualifying = clusters_with_radius_at_least(labeling, L)
        assert len(qualifying) == 2
        assert [q.root for q in qualifying] == sorted(q.root
                                                      for q in qualifying)
        for q in qualifying:
            assert q.linf_diameter == 2 * L + 2
            assert q.radius == L + 1

    def test_diameter_convention(self):
        L = 2
        region = BoxRegion((0, 0), 3)
        bar = [Edge((i, 0), 0) for i in range(-1, 2)]  # diameter 3
        labeling = label_clusters(config_from_edges(region, bar))
        assert clusters_with_radius_at_least(labeling, L) == []
        alt = clusters_with_radius_at_least(labeling, L,
                                            convention="diameter")
        assert len(alt) == 1
        assert cluster_radius(alt[0], "diameter") == 3

    def test_diameter_bounded_by_region(self):
        region = BoxRegion((0, 0), 3)
        labeling = label_clusters(realize(SeedKey(7, 7), region, 0.7))
        assert np.all(labeling.diameters() <= 2 * region.radius)
