"""Renormalization events on slab boxes and the coarse good-site field.

Three local events drive the coarse-graining:

* reach-count: fewer than M sites of the slab box around x connect to
  distance L of themselves (probed in the p-configuration);
* crossing: the q-configuration restricted to the slab box has a crossing
  from the inner to the outer box boundary and exactly one cluster of
  radius above L;
* robust crossing: the crossing event still holds after closing all edges
  adjacent to a removal set S.  Quantifying over every |S| <= M is
  combinatorially explosive, so the module offers the witnessed form (one
  designated S, in practice the infinite-cluster proxy restricted to the
  box) and a budgeted exhaustive form for small instances.

A coarse site x on the L-spaced planar grid is good when the reach-count
event holds for the p-layer and the witnessed robust crossing holds for
the q-layer with S taken from the p-layer's proxy.  All events at x read
edges of B_x(4L) only, so bits at coarse distance >= 9 are independent.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .clustering import (
    ClusterLabeling,
    ReachCounter,
    box_crossing,
    clusters_with_radius_at_least,
    crossing_exists_indices,
    label_clusters,
)
from .edgefield import (
    Configuration,
    SeedKey,
    close_adjacent,
    extract,
    realize,
)
from .geometry import (
    BoxRegion,
    ExtentError,
    Site,
    chebyshev_distance_array,
    membership_mask,
    slab_box,
)
from .sdp import (
    ProxyRule,
    RadiusAtLeast,
    infinite_cluster_proxy,
    proxy_rule_from_str,
    proxy_rule_to_str,
)

# Coarse sites at grid distance >= this use disjoint edge sets (events at x
# depend on B_x(4L) only, and 9L > 8L).
DEPENDENCY_RADIUS_COARSE = 9


class EnumerationBudgetError(RuntimeError):
    """Exhaustive enumeration would exceed the configured subset budget."""


@dataclass
class EventReport:
    kind: str
    params: dict
    outcome: bool
    witness: dict

    def to_record(self) -> dict:
        return {
            "kind": self.kind,
            "params": _jsonable(self.params),
            "outcome": bool(self.outcome),
            "witness": _jsonable(self.witness),
        }


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    return value


# ---------------------------------------------------------------------------
# reach-count event

def _validate_center(x: Site, dimension: int) -> tuple:
    x = tuple(x)
    if len(x) != dimension:
        raise ExtentError(f"center {x} has wrong dimension (want {dimension})")
    if any(c != 0 for c in x[2:]):
        raise ValueError(f"center {x} outside the Z^2 sublattice")
    return x


def reach_count_event_from_config(config: Configuration, x: Site, ell: int,
                                  L: int, M: int) -> EventReport:
    """Fewer than M slab-box sites connect to distance L of themselves."""
    x = _validate_center(x, config.region.dimension)
    sb = slab_box(x, ell, L)
    counter = ReachCounter(config.region, sb, L)
    count = counter.count(config)
    return EventReport(
        kind="reach_count",
        params={"x": x, "ell": ell, "L": L, "M": M, "p": config.p},
        outcome=count < M,
        witness={"count": count, "box_sites": sb.site_count},
    )


def reach_count_event(key: SeedKey, x: Site, ell: int, L: int, M: int,
                      p: float) -> EventReport:
    x = tuple(x)
    region = BoxRegion(x, 4 * L)
    config = realize(key, region, p)
    return reach_count_event_from_config(config, x, ell, L, M)


# ---------------------------------------------------------------------------
# omega^S

def close_around(config: Configuration, sites) -> Configuration:
    """The configuration with every edge adjacent to a listed site closed."""
    mask = np.zeros(config.region.site_count, dtype=bool)
    for s in sites:
        mask[config.region.site_index(s)] = True
    return close_adjacent(config, mask)


# ---------------------------------------------------------------------------
# crossing event

class CrossingEventEvaluator:
    """Precomputed clause machinery for one (x, ell, L) slab box.

    Clause 1: a cluster of the slab-box restriction touches both the inner
    shell (distance L from x) and the outer shell (distance 3L).
    Clause 2: exactly one cluster of the restriction has radius above L.
    """

    def __init__(self, x: Site, ell: int, L: int, dimension: int,
                 radius_convention: str = "half_diameter"):
        self.x = _validate_center(x, dimension)
        self.ell = ell
        self.L = L
        self.radius_convention = radius_convention
        self.sb = slab_box(self.x, ell, L)
        dist = chebyshev_distance_array(self.sb, self.x)
        self.inner_idx = np.flatnonzero(dist == L)
        self.outer_idx = np.flatnonzero(dist == 3 * L)

    @property
    def params(self) -> dict:
        return {"x": self.x, "ell": self.ell, "L": self.L}

    def evaluate_config(self, config: Configuration) -> EventReport:
        if not config.region.contains_region(self.sb):
            raise ExtentError("configuration does not cover the slab box")
        sub = extract(config, self.sb)
        labeling = label_clusters(sub)
        return self.evaluate_labeling(labeling)

    def evaluate_labeling(self, labeling: ClusterLabeling) -> EventReport:
        clause1 = crossing_exists_indices(labeling, self.inner_idx,
                                          self.outer_idx)
        qualifying = clusters_with_radius_at_least(labeling, self.L,
                                                   self.radius_convention)
        clause2 = len(qualifying) == 1
        failed = 0 if clause1 and clause2 else (1 if not clause1 else 2)
        return EventReport(
            kind="crossing",
            params=self.params,
            outcome=clause1 and clause2,
            witness={"failed_clause": failed,
                     "qualifying_clusters": len(qualifying),
                     "crossing": bool(clause1)},
        )


def crossing_event(config: Configuration, x: Site, ell: int,
                   L: int) -> EventReport:
    ev = CrossingEventEvaluator(x, ell, L, config.region.dimension)
    return ev.evaluate_config(config)


# ---------------------------------------------------------------------------
# robust crossing

def robust_crossing_witnessed(config: Configuration, x: Site, ell: int,
                              L: int, S) -> EventReport:
    """Crossing event after closing around one designated removal set S."""
    x = _validate_center(x, config.region.dimension)
    S = [tuple(s) for s in S]
    outer = BoxRegion(x, 3 * L)
    for s in S:
        if not outer.contains(s):
            raise ValueError(f"removal site {s} outside B_x(3L)")
    closed = close_around(config, S)
    inner = crossing_event(closed, x, ell, L)
    return EventReport(
        kind="robust_crossing_witnessed",
        params={"x": x, "ell": ell, "L": L, "S_size": len(S)},
        outcome=inner.outcome,
        witness=dict(inner.witness),
    )


def default_removal_candidates(config: Configuration, x: Site, ell: int,
                               L: int) -> list:
    """Sites on slab-box clusters of radius above L/2, as coordinate tuples.

    Removing a site of a smaller cluster can neither break the crossing nor
    change the set of radius-above-L clusters, so restricting candidates to
    these sites preserves the exhaustive event exactly.
    """
    sb = slab_box(tuple(x), ell, L)
    sub = extract(config, sb)
    labeling = label_clusters(sub)
    diams = labeling.diameters()
    big = labeling.roots[(diams // 2) > (L / 2)]
    idx = np.flatnonzero(np.isin(labeling.labels, big))
    return sorted(sb.site_at(int(i)) for i in idx)


def robust_crossing_exhaustive(config: Configuration, x: Site, ell: int,
                               L: int, M: int, candidates=None,
                               budget: int = 200_000) -> EventReport:
    """Crossing event after closing around every candidate subset of size
    at most M.  Refuses (never samples) when the subset count exceeds the
    budget.  On failure the witness carries a minimum-cardinality failing S.
    """
    x = _validate_center(x, config.region.dimension)
    if M < 0:
        raise ValueError("M must be non-negative")
    if candidates is None:
        candidates = default_removal_candidates(config, x, ell, L)
    else:
        candidates = sorted(tuple(s) for s in candidates)
    kmax = min(M, len(candidates))
    total = sum(math.comb(len(candidates), k) for k in range(kmax + 1))
    if total > budget:
        raise EnumerationBudgetError(
            f"{total} removal sets exceed the budget of {budget}")
    checked = 0
    for k in range(kmax + 1):
        for S in itertools.combinations(candidates, k):
            checked += 1
            rep = robust_crossing_witnessed(config, x, ell, L, S)
            if not rep.outcome:
                return EventReport(
                    kind="robust_crossing_exhaustive",
                    params={"x": x, "ell": ell, "L": L, "M": M,
                            "candidates": len(candidates)},
                    outcome=False,
                    witness={"failing_S": [list(s) for s in S],
                             "sets_checked": checked},
                )
    return EventReport(
        kind="robust_crossing_exhaustive",
        params={"x": x, "ell": ell, "L": L, "M": M,
                "candidates": len(candidates)},
        outcome=True,
        witness={"sets_checked": checked},
    )


# ---------------------------------------------------------------------------
# good boxes

def good_box(config: Configuration, center: Site, ell: int) -> bool:
    """Opposite-face crossings in all directions, and all clusters of
    diameter at least ell/4 merged into one."""
    center = tuple(center)
    box = BoxRegion(center, ell)
    if not config.region.contains_region(box):
        raise ExtentError("configuration does not cover the box")
    sub = extract(config, box)
    labeling = label_clusters(sub)
    for a in range(box.dimension):
        if not box_crossing(labeling, axis=a):
            return False
    big = np.count_nonzero(4 * labeling.diameters() >= ell)
    return big <= 1


# ---------------------------------------------------------------------------
# coarse good field

@dataclass(frozen=True)
class CoarseParams:
    """Parameters of the coarse-graining; q = p_c_input + eps is the
    density probed by the crossing events."""

    dimension: int
    p: float
    eps: float
    p_c_input: float
    ell: int
    L: int
    M: int
    proxy_rule: str = "auto"

    def __post_init__(self):
        if self.q > 1.0:
            raise ValueError("p_c_input + eps exceeds 1")
        if self.ell > 3 * self.L:
            raise ValueError("slab height exceeds 3L")

    @property
    def q(self) -> float:
        return self.p_c_input + self.eps

    def rule(self) -> ProxyRule:
        if self.proxy_rule == "auto":
            return RadiusAtLeast(self.L)
        return proxy_rule_from_str(self.proxy_rule)

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension, "p": self.p, "eps": self.eps,
            "p_c_input": self.p_c_input, "ell": self.ell, "L": self.L,
            "M": self.M, "proxy_rule": proxy_rule_to_str(self.rule()),
        }


def coarse_site_center(params: CoarseParams, coarse_xy) -> tuple:
    i, j = coarse_xy
    return (i * params.L, j * params.L) + (0,) * (params.dimension - 2)


def coarse_site_good_from_configs(config_p: Configuration,
                                  config_q: Configuration, x: Site,
                                  params: CoarseParams):
    """Good bit of one coarse site from the two local configurations.

    Depends only on the edge bits of B_x(4L): the removal set is the
    infinite-cluster proxy of the local p-layer restricted to the slab box.
    """
    if not config_p.region.same_extent(config_q.region):
        raise ValueError("coupled configurations cover different regions")
    rep_a = reach_count_event_from_config(config_p, x, params.ell, params.L,
                                          params.M)
    labeling = label_clusters(config_p)
    proxy = infinite_cluster_proxy(labeling, params.rule())
    sb = slab_box(tuple(x), params.ell, params.L)
    s_mask = proxy.site_mask & membership_mask(config_p.region, sb)
    S = [config_p.region.site_at(int(i)) for i in np.flatnonzero(s_mask)]
    rep_b = robust_crossing_witnessed(config_q, x, params.ell, params.L, S)
    good = rep_a.outcome and rep_b.outcome
    detail = {
        "reach_count": rep_a.witness["count"],
        "reach_ok": rep_a.outcome,
        "removal_sites": len(S),
        "crossing_ok": rep_b.outcome,
        "failed_clause": rep_b.witness["failed_clause"],
    }
    return good, detail


def coarse_site_good(key: SeedKey, coarse_xy, params: CoarseParams):
    """Good bit at one coarse grid point, realized locally from the key."""
    x = coarse_site_center(params, coarse_xy)
    region = BoxRegion(x, 4 * params.L)
    config_p = realize(key, region, params.p)
    config_q = realize(key, region, params.q)
    return coarse_site_good_from_configs(config_p, config_q, x, params)


@dataclass(eq=False)
class CoarseField:
    """Good/bad bits over the coarse planar grid (2g+1)^2 around the origin."""

    params: CoarseParams
    key: SeedKey
    grid_radius: int
    bits: np.ndarray
    site_details: list = field(default_factory=list)
    dependency_radius: int = DEPENDENCY_RADIUS_COARSE

    @property
    def density(self) -> float:
        return float(self.bits.mean()) if self.bits.size else 0.0

    def coarse_sites(self):
        g = self.grid_radius
        return [(i, j) for i in range(-g, g + 1) for j in range(-g, g + 1)]

    def bit(self, coarse_xy) -> bool:
        i, j = coarse_xy
        g = self.grid_radius
        return bool(self.bits[i + g, j + g])

    def serialize(self) -> str:
        lines = ["sdperc-coarse-field v1"]
        meta = dict(self.params.to_dict())
        meta["experiment_seed"] = self.key.experiment_seed
        meta["replica_index"] = self.key.replica_index
        meta["grid_radius"] = self.grid_radius
        meta["dependency_radius"] = self.dependency_radius
        for k in sorted(meta):
            lines.append(f"{k}={meta[k]}")
        lines.append("rows:")
        for row in self.bits:
            lines.append("".join("1" if b else "0" for b in row))
        return "\n".join(lines) + "\n"

    @staticmethod
    def parse(text: str) -> "CoarseField":
        lines = text.strip().splitlines()
        if lines[0] != "sdperc-coarse-field v1":
            raise ValueError("not a coarse-field file")
        meta = {}
        row_start = None
        for i, line in enumerate(lines[1:], start=1):
            if line == "rows:":
                row_start = i + 1
                break
            k, v = line.split("=", 1)
            meta[k] = v
        rows = [[c == "1" for c in line] for line in lines[row_start:]]
        params = CoarseParams(
            dimension=int(meta["dimension"]), p=float(meta["p"]),
            eps=float(meta["eps"]), p_c_input=float(meta["p_c_input"]),
            ell=int(meta["ell"]), L=int(meta["L"]), M=int(meta["M"]),
            proxy_rule=meta["proxy_rule"])
        key = SeedKey(int(meta["experiment_seed"]), int(meta["replica_index"]))
        return CoarseField(params, key, int(meta["grid_radius"]),
                           np.asarray(rows, dtype=bool),
                           dependency_radius=int(meta["dependency_radius"]))


def coarse_good_field(key: SeedKey, params: CoarseParams,
                      grid_radius: int) -> CoarseField:
    """Good bits for every coarse site (i, j) with |i|, |j| <= grid_radius."""
    g = grid_radius
    bits = np.zeros((2 * g + 1, 2 * g + 1), dtype=bool)
    details = []
    for i in range(-g, g + 1):
        for j in range(-g, g + 1):
            good, detail = coarse_site_good(key, (i, j), params)
            bits[i + g, j + g] = good
            detail = dict(detail)
            detail["coarse_site"] = (i, j)
            detail["good"] = good
            details.append(detail)
    return CoarseField(params, key, g, bits, site_details=details)


# ---------------------------------------------------------------------------
# coarse percolation check

@dataclass
class CoarsePercReport:
    crossing: bool
    largest_component_fraction: float
    good_density: float
    crossing_path: list
    chain_links_checked: int
    chain_links_ok: int

    def to_record(self) -> dict:
        return {
            "crossing": self.crossing,
            "largest_component_fraction": self.largest_component_fraction,
            "good_density": self.good_density,
            "crossing_path": [list(s) for s in self.crossing_path],
            "chain_links_checked": self.chain_links_checked,
            "chain_links_ok": self.chain_links_ok,
        }


def _coarse_components(bits: np.ndarray):
    """Connected components of good cells under 4-adjacency."""
    n0, n1 = bits.shape
    comp = -np.ones(bits.shape, dtype=np.int64)
    comps = []
    for a in range(n0):
        for b in range(n1):
            if not bits[a, b] or comp[a, b] >= 0:
                continue
            cid = len(comps)
            stack = [(a, b)]
            comp[a, b] = cid
            cells = []
            while stack:
                u, v = stack.pop()
                cells.append((u, v))
                for du, dv in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                    nu, nv = u + du, v + dv
                    if (0 <= nu < n0 and 0 <= nv < n1 and bits[nu, nv]
                            and comp[nu, nv] < 0):
                        comp[nu, nv] = cid
                        stack.append((nu, nv))
            comps.append(cells)
    return comp, comps


def _left_right_path(bits: np.ndarray):
    """A good path from the first to the last row of the bit grid (the first
    coarse coordinate is the crossing direction), or None."""
    n0, n1 = bits.shape
    prev = {}
    frontier = [(0, b) for b in range(n1) if bits[0, b]]
    seen = set(frontier)
    for cell in frontier:
        prev[cell] = None
    while frontier:
        nxt = []
        for u, v in frontier:
            if u == n0 - 1:
                path = [(u, v)]
                while prev[path[-1]] is not None:
                    path.append(prev[path[-1]])
                return list(reversed(path))
            for du, dv in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                nu, nv = u + du, v + dv
                if (0 <= nu < n0 and 0 <= nv < n1 and bits[nu, nv]
                        and (nu, nv) not in seen):
                    seen.add((nu, nv))
                    prev[(nu, nv)] = (u, v)
                    nxt.append((nu, nv))
        frontier = nxt
    return None


def _qualifying_cluster_sites(key: SeedKey, coarse_xy, params: CoarseParams):
    """Global coordinates of the unique radius-above-L cluster of the
    S-closed q-layer restricted to the coarse site's slab box, or None."""
    x = coarse_site_center(params, coarse_xy)
    region = BoxRegion(x, 4 * params.L)
    config_p = realize(key, region, params.p)
    config_q = realize(key, region, params.q)
    labeling_p = label_clusters(config_p)
    proxy = infinite_cluster_proxy(labeling_p, params.rule())
    sb = slab_box(x, params.ell, params.L)
    s_mask = proxy.site_mask & membership_mask(region, sb)
    closed = close_adjacent(config_q, s_mask)
    sub = extract(closed, sb)
    labeling = label_clusters(sub)
    qualifying = clusters_with_radius_at_least(labeling, params.L)
    if len(qualifying) != 1:
        return None
    idx = labeling.cluster_sites(qualifying[0].root)
    return {sb.site_at(int(i)) for i in idx}


def coarse_percolation_check(field: CoarseField) -> CoarsePercReport:
    """Left-right crossing of good coarse sites, the largest good-component
    fraction, and, along one crossing path, whether the unique large
    clusters of neighbouring boxes intersect."""
    bits = field.bits
    _, comps = _coarse_components(bits)
    total = bits.size
    largest = max((len(c) for c in comps), default=0)
    g = field.grid_radius
    path_cells = _left_right_path(bits)
    crossing = path_cells is not None
    path = []
    links_checked = 0
    links_ok = 0
    if crossing:
        path = [(a - g, b - g) for a, b in path_cells]
        clusters = [_qualifying_cluster_sites(field.key, s, field.params)
                    for s in path]
        for c1, c2 in zip(clusters, clusters[1:]):
            links_checked += 1
            if c1 is not None and c2 is not None and c1 & c2:
                links_ok += 1
    return CoarsePercReport(
        crossing=crossing,
        largest_component_fraction=largest / total if total else 0.0,
        good_density=field.density,
        crossing_path=path,
        chain_links_checked=links_checked,
        chain_links_ok=links_ok,
    )
