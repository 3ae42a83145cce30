"""Deterministic per-edge uniform values and the monotone coupling they induce.

Every edge of the lattice gets a 64-bit value computed by hashing
(experiment_seed, replica_index, canonical edge id) through the SplitMix64
finalizer chain.  No randomness is stored: configurations at any density p
are thresholdings of the same value field, which makes the coupling
omega_{p1} subset-of omega_{p2} (p1 <= p2) exact, edge by edge.

Openness uses the integer rule ``value < floor(p * 2^64)`` (p quantized to
the 2^-64 grid).  This makes p=0 all-closed and p=1 all-open exactly and
keeps the coupling an exact set inclusion rather than a float comparison.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .geometry import (
    BoxRegion,
    Edge,
    ExtentError,
    Orthotope,
    Region,
    SlabBoxRegion,
)

_MASK64 = (1 << 64) - 1
_MIX_M1 = 0xBF58476D1CE4E5B9
_MIX_M2 = 0x94D049BB133111EB

# Axis lives in the top 3 bits of an edge id, so at most 8 axes.
MAX_DIMENSION = 8
_COORD_BITS_TOTAL = 61

# Replica indices at or above this offset are reserved for the recovery
# noise stream, which keeps it independent of every primary configuration.
NOISE_REPLICA_OFFSET = 1 << 63


@dataclass(frozen=True)
class SeedKey:
    """Identifies one replica's edge-value field."""

    experiment_seed: int
    replica_index: int

    def __post_init__(self):
        for name in ("experiment_seed", "replica_index"):
            v = getattr(self, name)
            if not 0 <= v <= _MASK64:
                raise ValueError(f"{name} must be an unsigned 64-bit integer")


def noise_key(key: SeedKey) -> SeedKey:
    """Key of the recovery-noise field paired with ``key``."""
    return SeedKey(key.experiment_seed,
                   (key.replica_index + NOISE_REPLICA_OFFSET) & _MASK64)


def mix64(z: int) -> int:
    """SplitMix64 finalizer (scalar)."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MIX_M1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX_M2) & _MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = z.astype(np.uint64, copy=True)
    z ^= z >> np.uint64(30)
    z *= np.uint64(_MIX_M1)
    z ^= z >> np.uint64(27)
    z *= np.uint64(_MIX_M2)
    z ^= z >> np.uint64(31)
    return z


def _replica_hash(key: SeedKey) -> int:
    return mix64(mix64(key.experiment_seed) ^ key.replica_index)


# ---------------------------------------------------------------------------
# canonical edge ids

def coord_field_width(dimension: int) -> int:
    if not 2 <= dimension <= MAX_DIMENSION:
        raise ExtentError(f"dimension {dimension} outside supported range")
    return _COORD_BITS_TOTAL // dimension


def coord_bound(dimension: int) -> int:
    """Largest |coordinate| representable in an edge id at this dimension."""
    return (1 << (coord_field_width(dimension) - 1)) - 1


def _zigzag(c: int) -> int:
    return (c << 1) ^ (c >> 63) if c >= 0 else ((-c) << 1) - 1


def canonical_edge_id(edge: Edge) -> int:
    """Injective, platform-stable 64-bit id of a canonical edge.

    Layout: bits [61, 64) axis; coordinate j zig-zag encoded in a
    w = 61 // d bit field starting at bit w*j.
    """
    base, axis = edge
    d = len(base)
    w = coord_field_width(d)
    if not 0 <= axis < d:
        raise ExtentError(f"axis {axis} out of range for d={d}")
    bound = coord_bound(d)
    packed = axis << _COORD_BITS_TOTAL
    for j, c in enumerate(base):
        if abs(c) > bound:
            raise ExtentError(
                f"coordinate {c} exceeds extent bound {bound} at d={d}")
        packed |= _zigzag(c) << (w * j)
    return packed


def check_region_extent(region: Region) -> None:
    bound = coord_bound(region.dimension)
    for l, h in zip(region.lo, region.hi):
        if l < -bound or h > bound:
            raise ExtentError(
                f"region [{region.lo}, {region.hi}] exceeds extent bound {bound}")


@lru_cache(maxsize=8)
def _region_edge_ids(region: Region) -> np.ndarray:
    """uint64 edge ids for every edge of the region in canonical order."""
    check_region_extent(region)
    d = region.dimension
    w = coord_field_width(d)
    layout = region.edge_layout
    parts = []
    for a in range(d):
        esh = layout.eshapes[a]
        if min(esh) <= 0:
            continue
        acc = np.zeros(esh, dtype=np.uint64)
        for j in range(d):
            cvals = np.arange(region.lo[j], region.lo[j] + esh[j], dtype=np.int64)
            zz = ((cvals << 1) ^ (cvals >> 63)).astype(np.uint64)
            zz <<= np.uint64(w * j)
            shape = [1] * d
            shape[j] = esh[j]
            acc += zz.reshape(shape)
        acc |= np.uint64(a) << np.uint64(_COORD_BITS_TOTAL)
        parts.append(acc.ravel())
    if not parts:
        return np.zeros(0, dtype=np.uint64)
    out = np.concatenate(parts)
    out.flags.writeable = False
    return out


# ---------------------------------------------------------------------------
# edge values and thresholds

def open_threshold(p: float) -> int:
    """floor(p * 2^64), computed exactly from the float's binary value."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability {p} outside [0, 1]")
    f = Fraction(p)
    return (f.numerator << 64) // f.denominator


def edge_value_u64(key: SeedKey, edge: Edge) -> int:
    """The raw 64-bit value of an edge under this key (authoritative)."""
    return mix64(_replica_hash(key) ^ canonical_edge_id(edge))


def edge_value(key: SeedKey, edge: Edge) -> float:
    """The edge's uniform value in [0, 1).

    Float view of edge_value_u64 truncated to 53 bits so the result is
    exactly representable and strictly below 1; openness decisions always
    use the integer value, never this float.
    """
    return (edge_value_u64(key, edge) >> 11) * 2.0 ** -53


# ---------------------------------------------------------------------------
# configurations

class Configuration:
    """Openness bits for every canonical edge of a region.

    ``key``/``p`` record provenance when the configuration came straight
    from the edge field; derived configurations keep the key (coupling
    bookkeeping) but drop ``p``.
    """

    __slots__ = ("region", "open_bits", "key", "p")

    def __init__(self, region: Region, open_bits: np.ndarray,
                 key: SeedKey | None = None, p: float | None = None):
        open_bits = np.asarray(open_bits, dtype=bool)
        if open_bits.shape != (region.edge_count,):
            raise ValueError(
                f"expected {region.edge_count} edge bits, got {open_bits.shape}")
        if open_bits.flags.writeable:
            # never freeze (or alias) a caller-owned buffer
            open_bits = open_bits.copy()
            open_bits.flags.writeable = False
        self.region = region
        self.open_bits = open_bits
        self.key = key
        self.p = p

    @property
    def open_count(self) -> int:
        return int(self.open_bits.sum())

    def density(self) -> float:
        m = self.region.edge_count
        return self.open_count / m if m else 0.0

    def is_open(self, edge: Edge) -> bool:
        return bool(self.open_bits[self.region.edge_index(edge)])

    def __repr__(self):
        return (f"Configuration(region={self.region!r}, "
                f"open={self.open_count}/{self.region.edge_count})")


def _frozen(bits: np.ndarray) -> np.ndarray:
    bits.flags.writeable = False
    return bits


def realize(key: SeedKey, region: Region, p: float) -> Configuration:
    """Threshold the edge-value field: open iff value < floor(p * 2^64)."""
    t = open_threshold(p)
    m = region.edge_count
    if t <= 0:
        bits = np.zeros(m, dtype=bool)
    elif t >= 1 << 64:
        bits = np.ones(m, dtype=bool)
    else:
        ids = _region_edge_ids(region)
        vals = _mix64_array(np.uint64(_replica_hash(key)) ^ ids)
        bits = vals < np.uint64(t)
    return Configuration(region, _frozen(bits), key=key, p=p)


def replica_bit_blocks(experiment_seed: int, region: Region, p: float,
                       replicas: int, start: int = 0,
                       block_elems: int = 1 << 22):
    """Yield (replica_index, bits_row) for a run of replicas.

    Vectorizes the hash over (replica, edge) blocks; each yielded row is
    bit-identical to ``realize(SeedKey(seed, r), region, p).open_bits``.
    """
    t = open_threshold(p)
    m = region.edge_count
    if t <= 0 or t >= 1 << 64:
        row = np.full(m, t >= 1 << 64, dtype=bool)
        for r in range(start, start + replicas):
            yield r, row
        return
    ids = _region_edge_ids(region)
    h1 = mix64(experiment_seed)
    tail = np.uint64(t)
    chunk = max(1, block_elems // max(m, 1))
    r = start
    while r < start + replicas:
        n = min(chunk, start + replicas - r)
        reps = np.arange(r, r + n, dtype=np.uint64)
        h2 = _mix64_array(np.uint64(h1) ^ reps)
        vals = _mix64_array(h2[:, None] ^ ids[None, :])
        rows = vals < tail
        for i in range(n):
            yield r + i, rows[i]
        r += n


# ---------------------------------------------------------------------------
# configuration algebra

def _require_same_extent(a: Configuration, b) -> None:
    if not a.region.same_extent(b.region):
        raise ValueError("configurations/regions cover different extents")


def union_configs(a: Configuration, b: Configuration) -> Configuration:
    _require_same_extent(a, b)
    key = a.key if a.key == b.key else None
    return Configuration(a.region, _frozen(a.open_bits | b.open_bits), key=key)


def is_subconfiguration(a: Configuration, b: Configuration) -> bool:
    """True iff every open edge of ``a`` is open in ``b``."""
    _require_same_extent(a, b)
    return bool(np.all(b.open_bits | ~a.open_bits))


def close_adjacent(config: Configuration, site_mask: np.ndarray) -> Configuration:
    """Close every edge with an endpoint in the masked site set."""
    from .geometry import axis_edge_endpoints

    site_mask = np.asarray(site_mask, dtype=bool)
    if site_mask.shape != (config.region.site_count,):
        raise ValueError("site mask does not match region")
    bits = config.open_bits.copy()
    layout = config.region.edge_layout
    for a in range(config.region.dimension):
        lo, hi = layout.offsets[a], layout.offsets[a + 1]
        if lo == hi:
            continue
        base, nbr = axis_edge_endpoints(config.region, a)
        seg = bits[lo:hi]
        seg &= ~site_mask[base]
        seg &= ~site_mask[nbr]
    return Configuration(config.region, _frozen(bits), key=config.key)


def extract(config: Configuration, sub: Region) -> Configuration:
    """Restriction of a configuration to a contained subregion."""
    from .geometry import subregion_edge_indices

    if config.region.same_extent(sub):
        return Configuration(sub, config.open_bits, key=config.key, p=config.p)
    idx = subregion_edge_indices(config.region, sub)
    return Configuration(sub, _frozen(config.open_bits[idx]),
                         key=config.key, p=config.p)


# ---------------------------------------------------------------------------
# serialization: bit-packed with a fixed self-describing header

_MAGIC = b"SDPC"
_FMT_VERSION = 1
_KIND_BOX, _KIND_SLAB, _KIND_ORTHO = 0, 1, 2


def serialize_configuration(config: Configuration, role: int = 0) -> bytes:
    region = config.region
    d = region.dimension
    out = bytearray()
    if isinstance(region, BoxRegion):
        kind, params = _KIND_BOX, list(region.center) + [region.radius]
    elif isinstance(region, SlabBoxRegion):
        kind, params = _KIND_SLAB, list(region.center) + [region.slab_height,
                                                          region.box_radius]
    else:
        kind, params = _KIND_ORTHO, list(region.lo) + list(region.hi)
    has_key = config.key is not None
    has_p = config.p is not None
    out += struct.pack("<4sBBBBBB", _MAGIC, _FMT_VERSION, role, d, kind,
                       has_key, has_p)
    out += struct.pack(f"<{len(params)}q", *params)
    if has_key:
        out += struct.pack("<QQ", config.key.experiment_seed,
                           config.key.replica_index)
    if has_p:
        out += struct.pack("<d", config.p)
    out += struct.pack("<Q", region.edge_count)
    out += np.packbits(config.open_bits).tobytes()
    return bytes(out)


def deserialize_configuration(buf: bytes, offset: int = 0):
    """Returns (configuration, role, next_offset)."""
    magic, ver, role, d, kind, has_key, has_p = struct.unpack_from(
        "<4sBBBBBB", buf, offset)
    if magic != _MAGIC or ver != _FMT_VERSION:
        raise ValueError("not a configuration record")
    offset += struct.calcsize("<4sBBBBBB")
    if kind == _KIND_BOX:
        vals = struct.unpack_from(f"<{d + 1}q", buf, offset)
        offset += 8 * (d + 1)
        region: Region = BoxRegion(tuple(vals[:d]), vals[d])
    elif kind == _KIND_SLAB:
        vals = struct.unpack_from(f"<{d + 2}q", buf, offset)
        offset += 8 * (d + 2)
        region = SlabBoxRegion(tuple(vals[:d]), vals[d], vals[d + 1])
    elif kind == _KIND_ORTHO:
        vals = struct.unpack_from(f"<{2 * d}q", buf, offset)
        offset += 16 * d
        region = Orthotope(tuple(vals[:d]), tuple(vals[d:]))
    else:
        raise ValueError(f"unknown region kind {kind}")
    key = None
    if has_key:
        seed, rep = struct.unpack_from("<QQ", buf, offset)
        offset += 16
        key = SeedKey(seed, rep)
    p = None
    if has_p:
        (p,) = struct.unpack_from("<d", buf, offset)
        offset += 8
    (m,) = struct.unpack_from("<Q", buf, offset)
    offset += 8
    if m != region.edge_count:
        raise ValueError("edge count does not match region")
    nbytes = (m + 7) // 8
    raw = np.frombuffer(buf, dtype=np.uint8, count=nbytes, offset=offset)
    offset += nbytes
    bits = np.unpackbits(raw, count=m).astype(bool)
    return Configuration(region, _frozen(bits), key=key, p=p), role, offset
