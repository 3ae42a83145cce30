import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sdperc.clustering import bfs_oracle, box_crossing
from sdperc.edgefield import (
    Configuration,
    SeedKey,
    deserialize_configuration,
    realize,
    serialize_configuration,
)
from sdperc.events import (
    CoarseField,
    CoarseParams,
    EnumerationBudgetError,
    close_around,
    coarse_good_field,
    coarse_percolation_check,
    coarse_site_good,
    coarse_site_good_from_configs,
    crossing_event,
    good_box,
    reach_count_event,
    reach_count_event_from_config,
    robust_crossing_exhaustive,
    robust_crossing_witnessed,
)
from sdperc.geometry import BoxRegion, Edge, slab_box

class TestCloseAround:
    def test_empty_set_identity(self):
        config = realize(SeedKey(1, 0), BoxRegion((0, 0), 2), 0.6)
        out = close_around(config, [])
        assert np.array_equal(out.open_bits, config.open_bits)

    def test_all_sites_empties(self):
        region = BoxRegion((0, 0), 2)
        config = realize(SeedKey(1, 0), region, 1.0)
        assert close_around(config, list(region.sites())).open_count == 0

    def test_site_outside_region_rejected(self):
        config = realize(SeedKey(1, 0), BoxRegion((0, 0), 2), 0.5)
        with pytest.raises(Exception):
            close_around(config, [(5, 5)])

    @given(seed=st.integers(0, 10 ** 4), data=st.data())
    @settings(max_examples=25)
    def test_commutes_over_unions(self, seed, data):
        region = BoxRegion((0, 0), 2)
        sites = list(region.sites())
        s1 = data.draw(st.lists(st.sampled_from(sites), max_size=5))
        s2 = data.draw(st.lists(st.sampled_from(sites), max_size=5))
        config = realize(SeedKey(seed, 0), region, 0.7)
        joint = close_around(config, set(s1) | set(s2))
        nested = close_around(close_around(config, s1), s2)
        assert np.array_equal(joint.open_bits, nested.open_bits)
        again = close_around(joint, s1)
        assert np.array_equal(again.open_bits, joint.open_bits)


class TestReachCountEvent:
    def test_huge_m_always_true(self):
        box_sites = slab_box((0, 0), 1, 2).site_count
        rep = reach_count_event(SeedKey(0, 0), (0, 0), 1, 2, box_sites + 1, 1.0)
        assert rep.outcome
        assert rep.witness["count"] == box_sites

    def test_p_one_m_one_false(self):
        rep = reach_count_event(SeedKey(0, 0), (0, 0), 1, 2, 1, 1.0)
        assert not rep.outcome

    def test_count_decreasing_event_in_p(self):
        # coupling: the reach count never drops when p grows
        region = BoxRegion((0, 0), 8)
        for seed in range(10):
            key = SeedKey(seed, 0)
            counts = []
            for p in (0.2, 0.35, 0.5, 0.65, 0.8):
                config = realize(key, region, p)
                rep = reach_count_event_from_config(config, (0, 0), 1, 2, 50)
                counts.append(rep.witness["count"])
            assert counts == sorted(counts)


class TestCrossingEvent:
    def test_full_open_true(self):
        config = realize(SeedKey(0, 0), BoxRegion((0, 0), 6), 1.0)
        rep = crossing_event(config, (0, 0), 1, 2)
        assert rep.outcome and rep.witness["failed_clause"] == 0

    def test_empty_false_clause_one(self):
        config = realize(SeedKey(0, 0), BoxRegion((0, 0), 6), 0.0)
        rep = crossing_event(config, (0, 0), 1, 2)
        assert not rep.outcome and rep.witness["failed_clause"] == 1

    def test_crossing_clause_increasing_in_p(self):
        region = slab_box((0, 0), 1, 2)
        for seed in range(15):
            key = SeedKey(seed, 0)
            seen = False
            for p in (0.3, 0.45, 0.6, 0.75, 0.9):
                rep = crossing_event(realize(key, region, p), (0, 0), 1, 2)
                crossing = rep.witness["crossing"]
                assert crossing or not seen  # once true, stays true
                seen = seen or crossing


class TestRobustCrossing:
    def test_empty_s_equals_crossing_event(self):
        config = realize(SeedKey(2, 0), BoxRegion((0, 0), 8), 0.6)
        plain = crossing_event(config, (0, 0), 1, 2)
        witnessed = robust_crossing_witnessed(config, (0, 0), 1, 2, [])
        assert witnessed.outcome == plain.outcome

    def test_covering_s_breaks_crossing(self):
        # one radial path out of the inner ring; closing around a middle
        # site disconnects the two rings
        region = BoxRegion((0, 0), 6)
        bits = np.zeros(region.edge_count, dtype=bool)
        for i in range(2, 6):
            bits[region.edge_index(Edge((i, 0), 0))] = True
        config = Configuration(region, bits)
        assert crossing_event(config, (0, 0), 1, 2).witness["crossing"]
        rep = robust_crossing_witnessed(config, (0, 0), 1, 2, [(4, 0)])
        assert not rep.outcome and not rep.witness["crossing"]

    def test_m_zero_equals_crossing_event(self):
        config = realize(SeedKey(3, 0), BoxRegion((0, 0), 8), 0.55)
        plain = crossing_event(config, (0, 0), 1, 2)
        exhaustive = robust_crossing_exhaustive(config, (0, 0), 1, 2, 0)
        assert exhaustive.outcome == plain.outcome

    def test_full_open_single_removals_survive(self):
        # hand analysis: the full grid minus any one site stays connected,
        # keeps a diameter-6 cluster, and keeps the ring crossing
        config = realize(SeedKey(0, 0), BoxRegion((0, 0), 4), 1.0)
        rep = robust_crossing_exhaustive(config, (0, 0), 0, 1, 1)
        assert rep.outcome

    def test_budget_refusal(self):
        config = realize(SeedKey(0, 0), BoxRegion((0, 0), 4), 1.0)
        with pytest.raises(EnumerationBudgetError):
            robust_crossing_exhaustive(config, (0, 0), 0, 1, 3, budget=10)

    def test_exhaustive_implies_witnessed(self):
        region = BoxRegion((0, 0), 4)
        for seed in range(10):
            config = realize(SeedKey(seed, 0), region, 0.7)
            exhaustive = robust_crossing_exhaustive(config, (0, 0), 0, 1, 1)
            if not exhaustive.outcome:
                continue
            for s in [(0, 0), (1, 1), (-2, 0), (3, 3)]:
                rep = robust_crossing_witnessed(config, (0, 0), 0, 1, [s])
                assert rep.outcome

    def test_candidate_restriction_sound(self):
        # restricted candidates agree with the full slab-box candidate set
        region = BoxRegion((0, 0), 4)
        sb = slab_box((0, 0), 0, 1)
        full = list(sb.sites())
        for seed in range(50):
            config = realize(SeedKey(1000 + seed, 0), region, 0.55)
            restricted = robust_crossing_exhaustive(config, (0, 0), 0, 1, 1)
            everything = robust_crossing_exhaustive(config, (0, 0), 0, 1, 1,
                                                    candidates=full)
            assert restricted.outcome == everything.outcome

    def test_minimal_failing_witness(self):
        region = BoxRegion((0, 0), 6)
        bits = np.zeros(region.edge_count, dtype=bool)
        for i in range(-6, 6):
            bits[region.edge_index(Edge((i, 0), 0))] = True
        config = Configuration(region, bits)
        rep = robust_crossing_exhaustive(config, (0, 0), 1, 2, 2)
        assert not rep.outcome
        assert len(rep.witness["failing_S"]) <= 1  # one removal breaks it


class TestGoodBox:
    def test_full_open_good(self):
        config = realize(SeedKey(0, 0), BoxRegion((0, 0), 9), 1.0)
        assert good_box(config, (0, 0), 8)

    def test_empty_bad(self):
        config = realize(SeedKey(0, 0), BoxRegion((0, 0), 9), 0.0)
        assert not good_box(config, (0, 0), 8)

    def test_matches_oracle_reimplementation(self):
        # independent recomputation on the BFS labeling, per seed
        ell = 8
        region = BoxRegion((0, 0), ell)
        for seed in range(20):
            config = realize(SeedKey(seed, 0), region, 0.7)
            labeling = bfs_oracle(config)
            ok = True
            for a in range(2):
                if not box_crossing(labeling, axis=a):
                    ok = False
            big = int((4 * labeling.diameters() >= ell).sum())
            ok = ok and big <= 1
            assert good_box(config, (0, 0), ell) == ok


ALL_GOOD = CoarseParams(dimension=2, p=0.0, eps=0.5, p_c_input=0.5,
                        ell=0, L=1, M=1)
MID = CoarseParams(dimension=2, p=0.3, eps=0.25, p_c_input=0.5,
                   ell=1, L=2, M=83)


class TestCoarseField:
    def test_trivial_params_all_good(self):
        field = coarse_good_field(SeedKey(1, 0), ALL_GOOD, 1)
        assert field.bits.all()
        assert field.density == 1.0

    def test_p_one_m_one_all_bad(self):
        params = CoarseParams(dimension=2, p=1.0, eps=0.0, p_c_input=0.5,
                              ell=0, L=1, M=1)
        field = coarse_good_field(SeedKey(1, 0), params, 1)
        assert not field.bits.any()

    def test_density_monotone_in_m(self):
        key = SeedKey(77, 0)
        prev = None
        for M in (60, 83, 110):
            params = CoarseParams(dimension=2, p=0.3, eps=0.25,
                                  p_c_input=0.5, ell=1, L=2, M=M)
            field = coarse_good_field(key, params, 1)
            if prev is not None:
                assert np.all(prev.bits <= field.bits)
            prev = field

    def test_measurable_from_local_bits(self):
        # serialized B_x(4L) edge bits reproduce the coarse bit exactly
        key = SeedKey(55, 3)
        x = (MID.L * 1, MID.L * 0)
        region = BoxRegion(x, 4 * MID.L)
        config_p = realize(key, region, MID.p)
        config_q = realize(key, region, MID.q)
        direct, _ = coarse_site_good(key, (1, 0), MID)
        p_back, _, _ = deserialize_configuration(
            serialize_configuration(config_p))
        q_back, _, _ = deserialize_configuration(
            serialize_configuration(config_q))
        replayed, _ = coarse_site_good_from_configs(p_back, q_back, x, MID)
        assert replayed == direct

    def test_serialize_parse_roundtrip(self):
        field = coarse_good_field(SeedKey(9, 4), MID, 1)
        back = CoarseField.parse(field.serialize())
        assert back.params == CoarseParams(**{**MID.__dict__,
                                              "proxy_rule": "radius:2"})
        assert back.key == field.key
        assert np.array_equal(back.bits, field.bits)

    def test_site_details_recorded(self):
        field = coarse_good_field(SeedKey(9, 4), MID, 1)
        assert len(field.site_details) == 9
        for det in field.site_details:
            assert {"reach_count", "reach_ok", "removal_sites",
                    "crossing_ok", "good", "coarse_site"} <= det.keys()


class TestCoarsePercolationCheck:
    def test_all_good_crossing_and_chaining(self):
        field = coarse_good_field(SeedKey(1, 0), ALL_GOOD, 1)
        report = coarse_percolation_check(field)
        assert report.crossing
        assert report.largest_component_fraction == 1.0
        assert report.chain_links_checked >= 1
        assert report.chain_links_ok == report.chain_links_checked

    def test_all_bad_no_crossing(self):
        params = CoarseParams(dimension=2, p=1.0, eps=0.0, p_c_input=0.5,
                              ell=0, L=1, M=1)
        field = coarse_good_field(SeedKey(1, 0), params, 1)
        report = coarse_percolation_check(field)
        assert not report.crossing
        assert report.largest_component_fraction == 0.0
        assert report.chain_links_checked == 0

    def test_adjacent_good_boxes_share_a_site(self):
        # two neighbouring good cells on a crossing path: their unique
        # large clusters overlap
        field = coarse_good_field(SeedKey(2, 0), ALL_GOOD, 1)
        report = coarse_percolation_check(field)
        assert report.chain_links_ok == report.chain_links_checked >= 2
