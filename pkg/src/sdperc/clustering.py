"""Cluster labeling of open-edge configurations.

``label_clusters`` is the production path (union-find, union by rank with
path halving, roots canonicalized to the minimum site index of each
cluster).  ``bfs_oracle`` is an intentionally independent breadth-first
reference used by the test suite to check the union-find partition.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .edgefield import Configuration
from .geometry import (
    BoxRegion,
    ExtentError,
    Region,
    Site,
    axis_coordinates,
)

log = logging.getLogger(__name__)

RADIUS_CONVENTIONS = ("half_diameter", "diameter")


@dataclass(frozen=True)
class ClusterStats:
    """Per-cluster summary; radius follows the configured convention."""

    root: int
    size: int
    linf_diameter: int

    @property
    def radius(self) -> int:
        return self.linf_diameter // 2


def cluster_radius(stats: ClusterStats, convention: str = "half_diameter") -> int:
    if convention == "half_diameter":
        return stats.linf_diameter // 2
    if convention == "diameter":
        return stats.linf_diameter
    raise ValueError(f"unknown radius convention {convention!r}")


class ClusterLabeling:
    """Partition of a region's sites under open-edge connectivity.

    ``labels[i]`` is the minimum site index of site i's cluster.  Aggregate
    arrays are aligned with ``roots`` (sorted ascending).
    """

    __slots__ = ("region", "labels", "rank", "roots", "sizes", "mins", "maxs",
                 "source_key", "source_p")

    def __init__(self, region, labels, rank, roots, sizes, mins, maxs,
                 source_key=None, source_p=None):
        self.region = region
        self.labels = labels
        self.rank = rank
        self.roots = roots
        self.sizes = sizes
        self.mins = mins
        self.maxs = maxs
        self.source_key = source_key
        self.source_p = source_p

    @property
    def parent(self) -> np.ndarray:
        return self.labels

    @property
    def n_clusters(self) -> int:
        return len(self.roots)

    def find(self, site_index: int) -> int:
        return int(self.labels[site_index])

    def root_of_site(self, site: Site) -> int:
        return self.find(self.region.site_index(site))

    def same_cluster(self, a: Site, b: Site) -> bool:
        return self.root_of_site(a) == self.root_of_site(b)

    def _root_slot(self, root: int) -> int:
        i = int(np.searchsorted(self.roots, root))
        if i >= len(self.roots) or self.roots[i] != root:
            raise KeyError(f"no cluster rooted at {root}")
        return i

    def stats(self, root: int) -> ClusterStats:
        i = self._root_slot(root)
        diam = int((self.maxs[i] - self.mins[i]).max())
        return ClusterStats(int(root), int(self.sizes[i]), diam)

    def clusters(self):
        for root in self.roots:
            yield self.stats(int(root))

    def cluster_sites(self, root: int) -> np.ndarray:
        return np.flatnonzero(self.labels == root)

    def diameters(self) -> np.ndarray:
        if len(self.roots) == 0:
            return np.zeros(0, dtype=np.int64)
        return (self.maxs - self.mins).max(axis=1)

    def partition(self) -> dict:
        """root -> frozenset of site indices (small regions only)."""
        out = {}
        order = np.argsort(self.labels, kind="stable")
        sorted_labels = self.labels[order]
        starts = np.flatnonzero(
            np.r_[True, sorted_labels[1:] != sorted_labels[:-1]])
        bounds = np.r_[starts, len(order)]
        for k in range(len(starts)):
            seg = order[bounds[k]:bounds[k + 1]]
            out[int(sorted_labels[starts[k]])] = frozenset(int(i) for i in seg)
        return out


def _index_dtype(n: int):
    return np.int32 if n < 2 ** 31 else np.int64


def _aggregate(region: Region, labels: np.ndarray):
    """roots (sorted), sizes, per-axis mins/maxs, all aligned."""
    n = region.site_count
    order = np.argsort(labels, kind="stable")
    sorted_labels = labels[order]
    starts = np.flatnonzero(np.r_[True, sorted_labels[1:] != sorted_labels[:-1]])
    roots = sorted_labels[starts].astype(np.int64)
    sizes = np.diff(np.r_[starts, n]).astype(np.int64)
    d = region.dimension
    mins = np.empty((len(roots), d), dtype=np.int64)
    maxs = np.empty((len(roots), d), dtype=np.int64)
    for j in range(d):
        cj = axis_coordinates(region, j)[order]
        mins[:, j] = np.minimum.reduceat(cj, starts)
        maxs[:, j] = np.maximum.reduceat(cj, starts)
    return roots, sizes, mins, maxs


def label_clusters(config: Configuration) -> ClusterLabeling:
    """Union-find partition of the configuration's open-edge graph."""
    region = config.region
    n = region.site_count
    dtype = _index_dtype(n)
    parent = np.arange(n, dtype=dtype)
    rank = np.zeros(n, dtype=np.int32)
    layout = region.edge_layout
    for a in range(region.dimension):
        lo, hi = layout.offsets[a], layout.offsets[a + 1]
        if lo == hi:
            continue
        open_ranks = np.flatnonzero(config.open_bits[lo:hi])
        if open_ranks.size == 0:
            continue
        base = np.zeros(open_ranks.size, dtype=np.int64)
        rem = open_ranks
        for j in range(region.dimension):
            s = layout.estrides[a][j]
            q = rem // s
            rem = rem - q * s
            base += q * region.site_strides[j]
        _kernels.union_pairs(parent, rank,
                             base.astype(dtype, copy=False),
                             (base + region.site_strides[a]).astype(dtype))
    _kernels.compress_all(parent)

    # canonicalize roots to the minimum site index of each cluster
    order = np.argsort(parent, kind="stable")
    sorted_parent = parent[order]
    starts = np.flatnonzero(np.r_[True, sorted_parent[1:] != sorted_parent[:-1]])
    sizes = np.diff(np.r_[starts, n])
    canon = order[starts]  # stable sort: first occurrence is the minimum index
    labels = np.empty(n, dtype=dtype)
    labels[order] = np.repeat(canon.astype(dtype), sizes)

    roots, sizes64, mins, maxs = _aggregate(region, labels)
    return ClusterLabeling(region, labels, rank, roots, sizes64, mins, maxs,
                           source_key=config.key, source_p=config.p)


def bfs_oracle(config: Configuration) -> ClusterLabeling:
    """Breadth-first reference labeling with the same output contract."""
    region = config.region
    n = region.site_count
    d = region.dimension
    lo, hi = region.lo, region.hi
    sstr = region.site_strides
    layout = region.edge_layout
    eoffsets = layout.offsets
    estrides = layout.estrides
    bits = config.open_bits

    labels = np.full(n, -1, dtype=np.int64)
    for start in range(n):
        if labels[start] >= 0:
            continue
        labels[start] = start
        stack = [start]
        while stack:
            i = stack.pop()
            coords = []
            rem = i
            for j in range(d):
                q, rem = divmod(rem, sstr[j])
                coords.append(lo[j] + q)
            for a in range(d):
                ca = coords[a]
                if ca < hi[a]:
                    er = eoffsets[a]
                    for j in range(d):
                        er += (coords[j] - lo[j]) * estrides[a][j]
                    if bits[er] and labels[i + sstr[a]] < 0:
                        labels[i + sstr[a]] = start
                        stack.append(i + sstr[a])
                if ca > lo[a]:
                    er = eoffsets[a]
                    for j in range(d):
                        off = coords[j] - lo[j] - (1 if j == a else 0)
                        er += off * estrides[a][j]
                    if bits[er] and labels[i - sstr[a]] < 0:
                        labels[i - sstr[a]] = start
                        stack.append(i - sstr[a])

    roots, sizes, mins, maxs = _aggregate(region, labels)
    return ClusterLabeling(region, labels, np.zeros(n, dtype=np.int32),
                           roots, sizes, mins, maxs,
                           source_key=config.key, source_p=config.p)


# ---------------------------------------------------------------------------
# connectivity queries

class ReachCounter:
    """Counts sites of a sub-box connected to distance L of themselves.

    Paths are confined to B_y(L); the ambient configuration must cover
    B_y(L) for every probed site y unless ``clip_to_region`` is set, in
    which case paths are additionally confined to the ambient region
    (used for degenerate fixtures such as chains).
    """

    def __init__(self, region: Region, sub: Region, L: int,
                 clip_to_region: bool = False):
        if L < 0:
            raise ValueError("distance must be non-negative")
        if not region.contains_region(sub):
            raise ExtentError("probed sub-box not contained in the region")
        if not clip_to_region:
            for j in range(region.dimension):
                if sub.lo[j] - L < region.lo[j] or sub.hi[j] + L > region.hi[j]:
                    raise ExtentError(
                        "configuration region does not contain B_y(L) for "
                        "every probed site")
        self.region = region
        self.sub = sub
        self.L = L
        layout = region.edge_layout
        self._args = (
            region.lo_arr, region.hi_arr, region.shape_arr, region.strides_arr,
            np.asarray(layout.offsets, dtype=np.int64),
            np.asarray(layout.estrides, dtype=np.int64),
            sub.lo_arr, sub.shape_arr,
            np.asarray(sub.site_strides, dtype=np.int64),
        )

    def count(self, config: Configuration) -> int:
        if not config.region.same_extent(self.region):
            raise ExtentError("configuration does not match counter region")
        return self.count_bits(config.open_bits)

    def count_bits(self, open_bits: np.ndarray) -> int:
        if self.L == 0:
            return self.sub.site_count
        return int(_kernels.count_reaching(open_bits, *self._args, self.L))


def reaches_distance(config: Configuration, y: Site, L: int) -> bool:
    """True iff y is connected to a site at distance exactly L, with the
    path confined to B_y(L).  The configuration must cover all of B_y(L)."""
    region = config.region
    region._check_site(y)
    counter = ReachCounter(region, BoxRegion(tuple(y), 0), L)
    return counter.count(config) == 1


def _reach_within_region(config: Configuration, y: Site, L: int) -> bool:
    """Like reaches_distance but paths clipped to the (possibly thin)
    ambient region; used for line graphs where B_y(L) sticks out."""
    counter = ReachCounter(config.region, BoxRegion(tuple(y), 0), L,
                           clip_to_region=True)
    return counter.count(config) == 1


def crossing_exists(labeling: ClusterLabeling, from_sites, to_sites) -> bool:
    """True iff one cluster intersects both site sets."""
    from_idx = [labeling.region.site_index(s) for s in from_sites]
    to_idx = [labeling.region.site_index(s) for s in to_sites]
    return crossing_exists_indices(labeling, np.asarray(from_idx, dtype=np.int64),
                                   np.asarray(to_idx, dtype=np.int64))


def crossing_exists_indices(labeling: ClusterLabeling, from_idx: np.ndarray,
                            to_idx: np.ndarray) -> bool:
    if len(from_idx) == 0 or len(to_idx) == 0:
        log.warning("crossing query with an empty site set")
        return False
    a = labeling.labels[from_idx]
    b = labeling.labels[to_idx]
    return bool(np.intersect1d(a, b).size > 0)


def box_crossing(labeling: ClusterLabeling, axis: int = 0) -> bool:
    """Crossing between the two opposite faces of the region along ``axis``."""
    region = labeling.region
    c = axis_coordinates(region, axis)
    return crossing_exists_indices(labeling,
                                   np.flatnonzero(c == region.lo[axis]),
                                   np.flatnonzero(c == region.hi[axis]))


def clusters_with_radius_at_least(labeling: ClusterLabeling, L: int,
                                  convention: str = "half_diameter"):
    """Clusters whose radius strictly exceeds L, sorted by root id.

    Radius is linf_diameter // 2 by default; pass convention="diameter" to
    compare the diameter itself against L instead.
    """
    if convention not in RADIUS_CONVENTIONS:
        raise ValueError(f"unknown radius convention {convention!r}")
    if labeling.n_clusters == 0:
        return []
    diams = labeling.diameters()
    measure = diams // 2 if convention == "half_diameter" else diams
    picked = np.flatnonzero(measure > L)
    return [ClusterStats(int(labeling.roots[i]), int(labeling.sizes[i]),
                         int(diams[i])) for i in picked]
