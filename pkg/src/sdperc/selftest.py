"""Built-in oracle checks behind the ``selftest`` subcommand.

Each check compares a production code path against an independent
reference: closed-form arithmetic, exhaustive enumeration, or the BFS
labeling oracle.  The tiny masked crossing instance defined here is also
used by the test suite.
"""

from __future__ import annotations

import math

import numpy as np

from .clustering import bfs_oracle, label_clusters
from .edgefield import (
    Configuration,
    SeedKey,
    canonical_edge_id,
    close_adjacent,
    edge_value_u64,
    is_subconfiguration,
    noise_key,
    realize,
    replica_bit_blocks,
    serialize_configuration,
    deserialize_configuration,
    union_configs,
)
from .estimators import (
    BoundParams,
    markov_site_bound,
    one_arm_estimate,
    peierls_bound,
    removal_union_bound,
    wilson_interval,
)
from .events import CrossingEventEvaluator
from .geometry import (
    BoxRegion,
    Edge,
    Orthotope,
    boundary_sites,
    chebyshev_distance_array,
    region_edges,
    region_sites,
    slab_box,
)
from .sdp import TouchesBoundary, infinite_cluster_proxy


# ---------------------------------------------------------------------------
# tiny masked crossing instance: 11 random edges inside B_0(3), d=2, L=1

TINY_X = (0, 0)
TINY_ELL = 0
TINY_L = 1

TINY_ALLOWED_EDGES = (
    # horizontal bar through the origin row, (-2,0) .. (3,0)
    Edge((-2, 0), 0), Edge((-1, 0), 0), Edge((0, 0), 0),
    Edge((1, 0), 0), Edge((2, 0), 0),
    # second bar on row y=2, (-3,2) .. (1,2)
    Edge((-3, 2), 0), Edge((-2, 2), 0), Edge((-1, 2), 0), Edge((0, 2), 0),
    # connectors (0,0)-(0,1)-(0,2)
    Edge((0, 0), 1), Edge((0, 1), 1),
)


def tiny_instance():
    """Region, allowed-edge bit indices, and the production evaluator."""
    region = slab_box(TINY_X, TINY_ELL, TINY_L)
    idx = np.asarray([region.edge_index(e) for e in TINY_ALLOWED_EDGES],
                     dtype=np.int64)
    evaluator = CrossingEventEvaluator(TINY_X, TINY_ELL, TINY_L,
                                       region.dimension)
    return region, idx, evaluator


def oracle_crossing_clauses(region, bits):
    """(event, clause1) evaluated with the BFS oracle, independently of the
    production crossing machinery."""
    labeling = bfs_oracle(Configuration(region, bits))
    dist = chebyshev_distance_array(region, TINY_X)
    inner = labeling.labels[np.flatnonzero(dist == TINY_L)]
    outer = labeling.labels[np.flatnonzero(dist == 3 * TINY_L)]
    clause1 = bool(np.intersect1d(inner, outer).size > 0)
    n_big = int((labeling.diameters() // 2 > TINY_L).sum())
    return clause1 and n_big == 1, clause1


def tiny_exact_probabilities(p: float = 0.5):
    """Exact (event, clause1) probabilities by full enumeration of the
    2^11 masked configurations, weighted p^open (1-p)^closed."""
    region, idx, _ = tiny_instance()
    m = len(idx)
    p_event = 0.0
    p_clause1 = 0.0
    bits = np.zeros(region.edge_count, dtype=bool)
    for word in range(1 << m):
        bits[idx] = False
        k = 0
        for j in range(m):
            if word >> j & 1:
                bits[idx[j]] = True
                k += 1
        weight = p ** k * (1.0 - p) ** (m - k)
        event, clause1 = oracle_crossing_clauses(region, bits)
        if event:
            p_event += weight
        if clause1:
            p_clause1 += weight
    return p_event, p_clause1


def tiny_monte_carlo(experiment_seed: int, replicas: int, p: float = 0.5):
    """(event successes, clause1 successes) through the production sampling
    and event machinery, with non-instance edges forced closed."""
    region, idx, evaluator = tiny_instance()
    mask = np.zeros(region.edge_count, dtype=bool)
    mask[idx] = True
    hits_event = 0
    hits_clause1 = 0
    for _, bits in replica_bit_blocks(experiment_seed, region, p, replicas):
        masked = bits & mask
        report = evaluator.evaluate_config(Configuration(region, masked))
        hits_event += report.outcome
        hits_clause1 += report.witness["crossing"]
    return hits_event, hits_clause1


# ---------------------------------------------------------------------------
# individual checks

def check_region_counts():
    b1 = BoxRegion((0, 0), 1)
    sites = list(region_sites(b1))
    assert len(sites) == 9 and sites[0] == (-1, -1) and sites[-1] == (1, 1)
    assert len(list(region_edges(b1))) == 12
    assert len(boundary_sites(b1)) == 8
    b3 = BoxRegion((0, 0, 0), 1)
    assert len(list(region_sites(b3))) == 27
    assert len(list(region_edges(b3))) == 54
    assert len(boundary_sites(b3)) == 26
    assert BoxRegion((0,) * 7, 4).site_count == 9 ** 7
    assert slab_box((0, 0, 0, 0), 1, 1).site_count == 441


def check_edge_id_collisions():
    rng = np.random.default_rng(7)
    d = 4
    edges = {Edge(tuple(int(v) for v in rng.integers(-40, 41, size=d)),
                  int(rng.integers(0, d)))
             for _ in range(100_000)}
    ids = {canonical_edge_id(e) for e in edges}
    assert len(ids) == len(edges), "edge id collision"


def check_edge_value_uniformity():
    region = BoxRegion((0, 0), 180)
    key = SeedKey(2024, 0)
    total = 200_000
    vals = np.asarray([
        edge_value_u64(key, Edge((i % 300 - 150, i // 300 - 150), i % 2))
        for i in range(total)
    ], dtype=np.uint64)
    mean = float(vals.astype(np.float64).mean() / 2.0 ** 64)
    assert abs(mean - 0.5) < 0.004, f"uniform mean off: {mean}"


def check_monotone_coupling():
    region = BoxRegion((0, 0), 6)
    grid = [i / 10 for i in range(1, 10)]
    for seed in range(20):
        key = SeedKey(seed, 0)
        prev = realize(key, region, grid[0])
        for p in grid[1:]:
            cur = realize(key, region, p)
            assert is_subconfiguration(prev, cur), "coupling violation"
            prev = cur


def check_clustering_oracle():
    for seed in range(30):
        d = 2 + seed % 2
        region = BoxRegion((0,) * d, 2)
        config = realize(SeedKey(99, seed), region, (seed % 3 + 1) * 0.25)
        uf = label_clusters(config)
        ref = bfs_oracle(config)
        assert np.array_equal(uf.labels, ref.labels), "partition mismatch"


def check_pathwise_domination():
    region = BoxRegion((0, 0), 10)
    for seed in range(20):
        key = SeedKey(seed, 0)
        lower = realize(key, region, 0.45)
        upper = realize(key, region, 0.55)
        proxy = infinite_cluster_proxy(label_clusters(upper),
                                       TouchesBoundary())
        regrowth = realize(noise_key(key), region, 0.2)
        lhs = close_adjacent(union_configs(lower, regrowth), proxy.site_mask)
        burnt = close_adjacent(upper, proxy.site_mask)
        recovered = union_configs(burnt, regrowth)
        assert is_subconfiguration(lhs, recovered), "domination violated"


def check_bound_values():
    assert markov_site_bound(1, 1, 0.1, 7) == 119_071
    assert math.isclose(peierls_bound(1, 10), 0.37748736, rel_tol=1e-12)
    params = BoundParams(d=2, ell=1, L=10, M=1, eps=0.1, eta=0.1,
                         p_c_input=0.5)
    v = removal_union_bound(params).value
    assert math.isclose(v, 6.5996, rel_tol=1e-3), v


def check_chain_one_arm():
    p, n, replicas = 0.7, 5, 20_000
    region = Orthotope((-n, 0), (n, 0))
    est = one_arm_estimate(11, p, n, replicas, region=region)
    expected = 2 * p ** n - p ** (2 * n)
    sigma = math.sqrt(expected * (1 - expected) / replicas)
    assert abs(est.mean - expected) <= 3 * sigma, (est.mean, expected)


def check_crossing_enumeration():
    replicas = 20_000
    exact_event, exact_clause1 = tiny_exact_probabilities(0.5)
    hits_event, hits_clause1 = tiny_monte_carlo(5150, replicas, 0.5)
    for exact, hits in ((exact_event, hits_event),
                        (exact_clause1, hits_clause1)):
        lo, hi = wilson_interval(hits, replicas, z=3.0)
        assert lo <= exact <= hi, (exact, hits / replicas)


def check_serialization_roundtrip():
    region = slab_box((2, -1, 0), 1, 1)
    config = realize(SeedKey(5, 9), region, 0.37)
    blob = serialize_configuration(config, role=2)
    back, role, _ = deserialize_configuration(blob)
    assert role == 2
    assert back.region.same_extent(config.region)
    assert np.array_equal(back.open_bits, config.open_bits)
    assert back.key == config.key and back.p == config.p
    assert serialize_configuration(back, role=2) == blob


CHECKS = (
    ("region_counts", check_region_counts),
    ("edge_id_collisions", check_edge_id_collisions),
    ("edge_value_uniformity", check_edge_value_uniformity),
    ("monotone_coupling", check_monotone_coupling),
    ("clustering_oracle", check_clustering_oracle),
    ("pathwise_domination", check_pathwise_domination),
    ("bound_values", check_bound_values),
    ("chain_one_arm", check_chain_one_arm),
    ("crossing_enumeration", check_crossing_enumeration),
    ("serialization_roundtrip", check_serialization_roundtrip),
)
