import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sdperc.clustering import label_clusters
from sdperc.edgefield import (
    Configuration,
    SeedKey,
    close_adjacent,
    is_subconfiguration,
    noise_key,
    realize,
    union_configs,
)
from sdperc.geometry import BoxRegion, Edge, boundary_mask
from sdperc.sdp import (
    RadiusAtLeast,
    TouchesBoundary,
    deserialize_triple,
    destroy,
    infinite_cluster_proxy,
    proxy_rule_from_str,
    proxy_rule_to_str,
    recover,
    sdp_triple,
    serialize_triple,
    subtract_infinite_cluster,
)


def config_from_edges(region, open_edges, key=None, p=None):
    bits = np.zeros(region.edge_count, dtype=bool)
    for e in open_edges:
        bits[region.edge_index(e)] = True
    return Configuration(region, bits, key=key, p=p)


class TestProxy:
    def test_full_config_boundary_proxy_is_everything(self):
        region = BoxRegion((0, 0), 3)
        labeling = label_clusters(realize(SeedKey(0, 0), region, 1.0))
        proxy = infinite_cluster_proxy(labeling, TouchesBoundary())
        assert proxy.n_sites == region.site_count

    def test_empty_config_boundary_proxy_is_boundary(self):
        region = BoxRegion((0, 0), 3)
        labeling = label_clusters(realize(SeedKey(0, 0), region, 0.0))
        proxy = infinite_cluster_proxy(labeling, TouchesBoundary())
        assert np.array_equal(proxy.site_mask, boundary_mask(region))

    def test_empty_config_radius_proxy_is_empty(self):
        region = BoxRegion((0, 0), 3)
        labeling = label_clusters(realize(SeedKey(0, 0), region, 0.0))
        assert infinite_cluster_proxy(labeling, RadiusAtLeast(1)).n_sites == 0

    def test_radius_beyond_extent_warns_empty(self, caplog):
        region = BoxRegion((0, 0), 3)
        labeling = label_clusters(realize(SeedKey(0, 0), region, 1.0))
        with caplog.at_level(logging.WARNING, logger="sdperc.sdp"):
            proxy = infinite_cluster_proxy(labeling, RadiusAtLeast(10))
        assert proxy.n_sites == 0
        assert any("exceeds region extent" in r.message
                   for r in caplog.records)

    def test_proxy_is_union_of_full_clusters(self):
        region = BoxRegion((0, 0), 5)
        labeling = label_clusters(realize(SeedKey(6, 2), region, 0.5))
        proxy = infinite_cluster_proxy(labeling, TouchesBoundary())
        marked_roots = np.unique(labeling.labels[proxy.site_mask])
        assert np.array_equal(proxy.site_mask,
                              np.isin(labeling.labels, marked_roots))

    def test_supercritical_proxy_contains_largest_cluster(self):
        # d=2, p=0.7, B_0(30): boundary proxy catches the giant cluster
        region = BoxRegion((0, 0), 30)
        hits = 0
        runs = 1000
        for seed in range(runs):
            labeling = label_clusters(realize(SeedKey(seed, 0), region, 0.7))
            largest_root = labeling.roots[int(np.argmax(labeling.sizes))]
            proxy = infinite_cluster_proxy(labeling, TouchesBoundary())
            member = labeling.cluster_sites(int(largest_root))[0]
            hits += bool(proxy.site_mask[member])
        assert hits >= 0.99 * runs

    def test_rule_string_roundtrip(self):
        for rule in (TouchesBoundary(), RadiusAtLeast(4)):
            assert proxy_rule_from_str(proxy_rule_to_str(rule)) == rule


class TestDestroy:
    def test_empty_proxy_is_identity(self):
        region = BoxRegion((0, 0), 3)
        config = realize(SeedKey(1, 0), region, 0.5)
        labeling = label_clusters(config)
        proxy = infinite_cluster_proxy(labeling, RadiusAtLeast(10))
        assert np.array_equal(destroy(config, proxy).open_bits,
                              config.open_bits)

    def test_full_proxy_empties(self):
        region = BoxRegion((0, 0), 2)
        config = realize(SeedKey(1, 0), region, 1.0)
        proxy = infinite_cluster_proxy(label_clusters(config),
                                       TouchesBoundary())
        assert destroy(config, proxy).open_count == 0

    def test_boundary_cluster_removed_others_untouched(self):
        region = BoxRegion((0, 0), 3)
        touching = [Edge((i, 3), 0) for i in range(-3, 3)]  # on the boundary
        interior = [Edge((0, 0), 0), Edge((1, 0), 1)]
        config = config_from_edges(region, touching + interior)
        proxy = infinite_cluster_proxy(label_clusters(config),
                                       TouchesBoundary())
        burnt = destroy(config, proxy)
        for e in touching:
            assert not burnt.is_open(e)
        for e in interior:
            assert burnt.is_open(e)

    def test_destruction_only_closes(self):
        region = BoxRegion((0, 0), 4)
        for seed in range(10):
            config = realize(SeedKey(seed, 0), region, 0.55)
            proxy = infinite_cluster_proxy(label_clusters(config),
                                           TouchesBoundary())
            assert is_subconfiguration(destroy(config, proxy), config)

    def test_region_mismatch_rejected(self):
        config = realize(SeedKey(1, 0), BoxRegion((0, 0), 2), 0.5)
        other = realize(SeedKey(1, 0), BoxRegion((0, 0), 3), 0.5)
        proxy = infinite_cluster_proxy(label_clusters(other),
                                       TouchesBoundary())
        with pytest.raises(ValueError):
            destroy(config, proxy)


class TestRecover:
    def test_eps_zero_keeps_burnt(self):
        region = BoxRegion((0, 0), 3)
        key = SeedKey(2, 0)
        burnt = realize(key, region, 0.4)
        _, recovered = recover(burnt, key, 0.0)
        assert np.array_equal(recovered.open_bits, burnt.open_bits)

    def test_eps_one_opens_everything(self):
        region = BoxRegion((0, 0), 3)
        key = SeedKey(2, 0)
        burnt = realize(key, region, 0.0)
        _, recovered = recover(burnt, key, 1.0)
        assert recovered.open_count == region.edge_count

    def test_recovered_is_union(self):
        region = BoxRegion((0, 0), 4)
        key = SeedKey(3, 1)
        triple = sdp_triple(key, region, 0.55, 0.2)
        assert np.array_equal(
            triple.recovered.open_bits,
            triple.burnt.open_bits | triple.regrowth.open_bits)
        assert is_subconfiguration(triple.burnt, triple.initial)

    def test_interior_marginal_product_law(self):
        # far from the boundary at subcritical p the destroyed set almost
        # never reaches the probe edge, so the recovered density is the
        # independent-union value p + eps - p*eps
        region = BoxRegion((0, 0), 8)
        p, eps, replicas = 0.3, 0.2, 20_000
        probe = region.edge_index(Edge((0, 0), 0))
        hits = 0
        for r in range(replicas):
            triple = sdp_triple(SeedKey(404, r), region, p, eps)
            hits += bool(triple.recovered.open_bits[probe])
        expected = p + eps - p * eps
        sigma = math.sqrt(expected * (1 - expected) / replicas)
        assert abs(hits / replicas - expected) < 3 * sigma


class TestSubtract:
    def test_empty_proxy_identity(self):
        region = BoxRegion((0, 0), 3)
        key = SeedKey(5, 0)
        omega_q = realize(key, region, 0.6)
        labeling = label_clusters(realize(key, region, 0.2))
        proxy = infinite_cluster_proxy(labeling, RadiusAtLeast(5))
        if proxy.n_sites == 0:
            out = subtract_infinite_cluster(omega_q, proxy)
            assert np.array_equal(out.open_bits, omega_q.open_bits)

    def test_proxy_freeness(self):
        region = BoxRegion((0, 0), 5)
        key = SeedKey(6, 0)
        omega_p = realize(key, region, 0.55)
        proxy = infinite_cluster_proxy(label_clusters(omega_p),
                                       TouchesBoundary())
        out = subtract_infinite_cluster(realize(key, region, 0.55), proxy)
        for a in range(2):
            from sdperc.geometry import axis_edge_endpoints

            base, nbr = axis_edge_endpoints(region, a)
            lo = region.edge_layout.offsets[a]
            hi = region.edge_layout.offsets[a + 1]
            seg = out.open_bits[lo:hi]
            assert not np.any(seg & (proxy.site_mask[base]
                                     | proxy.site_mask[nbr]))

    def test_key_mismatch_rejected(self):
        region = BoxRegion((0, 0), 3)
        omega_q = realize(SeedKey(1, 0), region, 0.7)
        labeling = label_clusters(realize(SeedKey(2, 0), region, 0.5))
        proxy = infinite_cluster_proxy(labeling, TouchesBoundary())
        with pytest.raises(ValueError, match="coupling"):
            subtract_infinite_cluster(omega_q, proxy)


class TestPathwiseDomination:
    @given(seed=st.integers(0, 10 ** 6),
           plo=st.floats(0.1, 0.5), phi=st.floats(0.5, 0.9),
           eps=st.floats(0.0, 0.5))
    @settings(max_examples=25)
    def test_dominated_by_recovered(self, seed, plo, phi, eps):
        region = BoxRegion((0, 0), 6)
        key = SeedKey(seed, 0)
        triple = sdp_triple(key, region, phi, eps)
        lower = realize(key, region, plo)
        regrowth = realize(noise_key(key), region, eps)
        lhs = close_adjacent(union_configs(lower, regrowth),
                             triple.proxy.site_mask)
        assert is_subconfiguration(lhs, triple.recovered)


class TestTripleSerialization:
    def test_roundtrip(self):
        triple = sdp_triple(SeedKey(12, 1), BoxRegion((0, 0), 4), 0.5, 0.1)
        blob = serialize_triple(triple)
        back = deserialize_triple(blob)
        for name in ("initial", "burnt", "regrowth", "recovered"):
            assert np.array_equal(getattr(back, name).open_bits,
                                  getattr(triple, name).open_bits)
