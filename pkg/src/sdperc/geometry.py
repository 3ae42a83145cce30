"""Finite lattice geometry: boxes, slab boxes, and site/edge enumeration.

Regions are axis-aligned products of integer intervals on Z^d.  Sites are
enumerated in lexicographic coordinate order and edges axis-major (all
axis-0 edges with bases in lexicographic order, then axis 1, ...).  Both
orders are the canonical orders used everywhere downstream: configuration
bit layouts, serialization, and cluster-root canonicalization all depend
on them.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, NamedTuple, Union

import numpy as np

# A site is a tuple of d signed integer coordinates.
Site = tuple

# Regions are kept small enough that site counts fit comfortably in int64.
MAX_SITE_COUNT = 1 << 62


class Edge(NamedTuple):
    """Nearest-neighbour edge in canonical form: joins base and base+e(axis)."""

    base: Site
    axis: int


class ExtentError(ValueError):
    """A region or coordinate falls outside the addressable extent."""


@dataclass(frozen=True)
class EdgeLayout:
    """Canonical bit layout of a region's internal edges, one segment per axis."""

    offsets: tuple       # (d+1,) segment start per axis; offsets[d] == total
    eshapes: tuple       # d tuples: shape of the axis-a edge base sub-box
    estrides: tuple      # d tuples: C-order strides of each edge sub-box

    @property
    def total(self) -> int:
        return self.offsets[-1]


def _c_strides(shape) -> tuple:
    strides = [1] * len(shape)
    for j in range(len(shape) - 2, -1, -1):
        strides[j] = strides[j + 1] * shape[j + 1]
    return tuple(strides)


class _RegionOps:
    """Enumeration and indexing shared by all region types (uses self.lo/self.hi)."""

    # -- basic shape -------------------------------------------------------

    @property
    def dimension(self) -> int:
        return len(self.lo)

    @cached_property
    def shape(self) -> tuple:
        return tuple(h - l + 1 for l, h in zip(self.lo, self.hi))

    @cached_property
    def site_count(self) -> int:
        n = math.prod(self.shape)
        if n > MAX_SITE_COUNT:
            raise ExtentError(f"region with {n} sites exceeds supported size")
        return n

    @cached_property
    def site_strides(self) -> tuple:
        return _c_strides(self.shape)

    # numpy views used by vectorized helpers and kernels
    @cached_property
    def lo_arr(self) -> np.ndarray:
        return np.asarray(self.lo, dtype=np.int64)

    @cached_property
    def hi_arr(self) -> np.ndarray:
        return np.asarray(self.hi, dtype=np.int64)

    @cached_property
    def shape_arr(self) -> np.ndarray:
        return np.asarray(self.shape, dtype=np.int64)

    @cached_property
    def strides_arr(self) -> np.ndarray:
        return np.asarray(self.site_strides, dtype=np.int64)

    # -- membership and indexing ------------------------------------------

    def _check_site(self, site) -> None:
        if len(site) != self.dimension:
            raise ExtentError(
                f"site of dimension {len(site)} used with {self.dimension}-d region"
            )

    def contains(self, site) -> bool:
        self._check_site(site)
        return all(l <= c <= h for c, l, h in zip(site, self.lo, self.hi))

    def site_index(self, site) -> int:
        self._check_site(site)
        idx = 0
        for c, l, h, s in zip(site, self.lo, self.hi, self.site_strides):
            if not l <= c <= h:
                raise ExtentError(f"site {tuple(site)} outside region")
            idx += (c - l) * s
        return idx

    def site_at(self, index: int) -> Site:
        if not 0 <= index < self.site_count:
            raise IndexError(index)
        coords = []
        for l, s in zip(self.lo, self.site_strides):
            q, index = divmod(index, s)
            coords.append(l + q)
        return tuple(coords)

    def sites(self) -> Iterator[Site]:
        """All member sites, lexicographic on coordinates."""
        return itertools.product(*(range(l, h + 1) for l, h in zip(self.lo, self.hi)))

    # -- edges --------------------------------------------------------------

    @cached_property
    def edge_layout(self) -> EdgeLayout:
        offsets = [0]
        eshapes = []
        estrides = []
        for a in range(self.dimension):
            esh = list(self.shape)
            esh[a] -= 1
            esh = tuple(esh)
            eshapes.append(esh)
            estrides.append(_c_strides(esh))
            count = math.prod(esh) if min(esh) > 0 else 0
            offsets.append(offsets[-1] + count)
        return EdgeLayout(tuple(offsets), tuple(eshapes), tuple(estrides))

    @property
    def edge_count(self) -> int:
        return self.edge_layout.total

    def edges(self) -> Iterator[Edge]:
        """All internal edges (both endpoints inside), canonical axis-major order."""
        for a in range(self.dimension):
            ranges = [range(l, h + 1) for l, h in zip(self.lo, self.hi)]
            ranges[a] = range(self.lo[a], self.hi[a])
            if any(len(r) == 0 for r in ranges):
                continue
            for base in itertools.product(*ranges):
                yield Edge(base, a)

    def edge_index(self, edge: Edge) -> int:
        base, a = edge
        self._check_site(base)
        if not 0 <= a < self.dimension:
            raise ExtentError(f"axis {a} out of range for d={self.dimension}")
        layout = self.edge_layout
        idx = layout.offsets[a]
        esh = layout.eshapes[a]
        for c, l, sh, s in zip(base, self.lo, esh, layout.estrides[a]):
            off = c - l
            if not 0 <= off < sh:
                raise ExtentError(f"edge {edge} not internal to region")
            idx += off * s
        return idx

    def edge_at(self, index: int) -> Edge:
        layout = self.edge_layout
        if not 0 <= index < layout.total:
            raise IndexError(index)
        for a in range(self.dimension):
            if index < layout.offsets[a + 1]:
                rank = index - layout.offsets[a]
                coords = []
                for l, s in zip(self.lo, layout.estrides[a]):
                    q, rank = divmod(rank, s)
                    coords.append(l + q)
                return Edge(tuple(coords), a)
        raise IndexError(index)

    # -- region/region relations --------------------------------------------

    def same_extent(self, other) -> bool:
        return self.lo == other.lo and self.hi == other.hi

    def contains_region(self, other) -> bool:
        if self.dimension != other.dimension:
            return False
        return all(sl <= ol and oh <= sh
                   for sl, ol, oh, sh in zip(self.lo, other.lo, other.hi, self.hi))


@dataclass(frozen=True)
class BoxRegion(_RegionOps):
    """Ball B_center(radius) in the infinity norm; (2L+1)^d sites."""

    center: Site
    radius: int

    def __post_init__(self):
        if len(self.center) < 2:
            raise ExtentError("dimension must be at least 2")
        if self.radius < 0:
            raise ValueError("radius must be non-negative")

    @cached_property
    def lo(self) -> tuple:
        return tuple(c - self.radius for c in self.center)

    @cached_property
    def hi(self) -> tuple:
        return tuple(c + self.radius for c in self.center)


@dataclass(frozen=True)
class SlabBoxRegion(_RegionOps):
    """Product of a square box (first two axes) and a slab (remaining axes).

    Membership: |y_i - center_i| <= box_radius for i in {0, 1} and
    |y_i| <= slab_height for i >= 2.  slab_height 0 means the height-1 slab.
    """

    center: Site
    slab_height: int
    box_radius: int

    def __post_init__(self):
        if len(self.center) < 2:
            raise ExtentError("dimension must be at least 2")
        if any(c != 0 for c in self.center[2:]):
            raise ValueError("slab box center must lie in the Z^2 sublattice")
        if self.slab_height < 0:
            raise ValueError("slab height must be non-negative")
        if self.box_radius < 0:
            raise ValueError("box radius must be non-negative")

    @cached_property
    def lo(self) -> tuple:
        return tuple(
            c - self.box_radius if i < 2 else -self.slab_height
            for i, c in enumerate(self.center)
        )

    @cached_property
    def hi(self) -> tuple:
        return tuple(
            c + self.box_radius if i < 2 else self.slab_height
            for i, c in enumerate(self.center)
        )


@dataclass(frozen=True)
class Orthotope(_RegionOps):
    """Generic product of integer intervals; used for degenerate fixtures
    such as width-1 chains."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise ExtentError("lo/hi dimension mismatch")
        if len(self.lo) < 2:
            raise ExtentError("dimension must be at least 2")
        if any(h < l for l, h in zip(self.lo, self.hi)):
            raise ValueError("empty interval in region")


Region = Union[BoxRegion, SlabBoxRegion, Orthotope]


def region_sites(region: Region) -> Iterator[Site]:
    """Member sites, each exactly once, lexicographic coordinate order."""
    return region.sites()


def region_edges(region: Region) -> Iterator[Edge]:
    """Internal edges, each exactly once, canonical (axis, base) order."""
    return region.edges()


def boundary_sites(region: BoxRegion) -> set:
    """Inner vertex boundary of a box: sites at distance exactly radius.

    Radius 0 returns the center itself (documented convention).
    """
    if region.radius == 0:
        return {region.center}
    c = region.center
    return {
        y for y in region.sites()
        if max(abs(yc - cc) for yc, cc in zip(y, c)) == region.radius
    }


def slab_box(x: Site, ell: int, L: int) -> SlabBoxRegion:
    """The slab/box intersection around x: square radius 3L, slab height ell.

    Requires ell <= 3L so that the product region equals the intersection of
    the slab with the full box of radius 3L.
    """
    if any(c != 0 for c in x[2:]):
        raise ValueError(f"center {x} outside the Z^2 sublattice")
    if L < 1:
        raise ValueError("L must be at least 1")
    if ell < 0:
        raise ValueError("slab height must be non-negative")
    if ell > 3 * L:
        raise ValueError(f"slab height {ell} exceeds box radius {3 * L}")
    return SlabBoxRegion(center=tuple(x), slab_height=ell, box_radius=3 * L)


# ---------------------------------------------------------------------------
# vectorized helpers over site indices

def axis_coordinates(region: Region, axis: int) -> np.ndarray:
    """Coordinate along one axis for every site index (int64, length n)."""
    idx = np.arange(region.site_count, dtype=np.int64)
    s = region.site_strides[axis]
    return (idx // s) % region.shape[axis] + region.lo[axis]


def chebyshev_distance_array(region: Region, center: Site) -> np.ndarray:
    """Infinity-norm distance to ``center`` for every site index."""
    region._check_site(center)
    out = np.zeros(region.site_count, dtype=np.int64)
    for j in range(region.dimension):
        np.maximum(out, np.abs(axis_coordinates(region, j) - center[j]), out=out)
    return out


def shell_indices(region: Region, center: Site, r: int) -> np.ndarray:
    """Site indices at infinity-norm distance exactly r from center."""
    return np.flatnonzero(chebyshev_distance_array(region, center) == r)


def boundary_mask(region: Region) -> np.ndarray:
    """Boolean mask of the region's inner boundary (any coordinate extremal)."""
    mask = np.zeros(region.site_count, dtype=bool)
    for j in range(region.dimension):
        c = axis_coordinates(region, j)
        mask |= (c == region.lo[j]) | (c == region.hi[j])
    return mask


def membership_mask(region: Region, sub: Region) -> np.ndarray:
    """Mask over region's site indices of membership in ``sub``."""
    if region.dimension != sub.dimension:
        raise ExtentError("dimension mismatch between regions")
    mask = np.ones(region.site_count, dtype=bool)
    for j in range(region.dimension):
        c = axis_coordinates(region, j)
        mask &= (c >= sub.lo[j]) & (c <= sub.hi[j])
    return mask


def axis_edge_endpoints(region: Region, axis: int):
    """Site indices (base, neighbour) for every axis-``axis`` edge, in edge order."""
    layout = region.edge_layout
    esh = layout.eshapes[axis]
    count = layout.offsets[axis + 1] - layout.offsets[axis]
    base = np.zeros(count, dtype=np.int64)
    if count == 0:
        return base, base
    ranks = np.arange(count, dtype=np.int64)
    rem = ranks
    for j in range(region.dimension):
        s = layout.estrides[axis][j]
        q = rem // s
        rem = rem - q * s
        base += q * region.site_strides[j]
    return base, base + region.site_strides[axis]


def subregion_edge_indices(region: Region, sub: Region) -> np.ndarray:
    """For each edge of ``sub`` (canonical order) the bit index in ``region``."""
    if not region.contains_region(sub):
        raise ExtentError("subregion not contained in region")
    parts = []
    for a in range(sub.dimension):
        esh = sub.edge_layout.eshapes[a]
        if min(esh) <= 0:
            continue
        acc = np.zeros(esh, dtype=np.int64)
        for j in range(sub.dimension):
            offs = np.arange(sub.lo[j], sub.lo[j] + esh[j], dtype=np.int64) - region.lo[j]
            contrib = offs * region.edge_layout.estrides[a][j]
            shape = [1] * sub.dimension
            shape[j] = esh[j]
            acc = acc + contrib.reshape(shape)
        parts.append(acc.ravel() + region.edge_layout.offsets[a])
    if not parts:
        return np.zeros(0, dtype=np.int64)
    return np.concatenate(parts)
