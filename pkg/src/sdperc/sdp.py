"""The self-destructive percolation process on a finite region.

Three coupled layers built from one seed: the initial configuration at
density p, the burnt configuration (initial minus the clusters the
infinite-cluster proxy marks), and the recovered configuration (burnt plus
an independent density-eps regrowth field).  A fourth object, the
subtraction of the proxy from a coupled higher-density configuration,
supports the thin-minus-thinner scan.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Union

import numpy as np

from .clustering import ClusterLabeling, clusters_with_radius_at_least
from .edgefield import (
    Configuration,
    SeedKey,
    close_adjacent,
    noise_key,
    realize,
    serialize_configuration,
    deserialize_configuration,
)
from .geometry import Region, boundary_mask


@dataclass(frozen=True)
class TouchesBoundary:
    """Proxy rule: clusters intersecting the region's inner boundary."""


@dataclass(frozen=True)
class RadiusAtLeast:
    """Proxy rule: clusters of radius >= ``radius`` (half-diameter convention)."""

    radius: int


ProxyRule = Union[TouchesBoundary, RadiusAtLeast]


def proxy_rule_to_str(rule: ProxyRule) -> str:
    if isinstance(rule, TouchesBoundary):
        return "boundary"
    return f"radius:{rule.radius}"


def proxy_rule_from_str(text: str) -> ProxyRule:
    if text == "boundary":
        return TouchesBoundary()
    if text.startswith("radius:"):
        return RadiusAtLeast(int(text.split(":", 1)[1]))
    raise ValueError(f"unknown proxy rule {text!r}")


@dataclass(eq=False)
class InfiniteClusterProxy:
    """Finite-volume stand-in for the infinite cluster: a union of full
    clusters of the source configuration."""

    rule: ProxyRule
    region: Region
    site_mask: np.ndarray
    source_key: SeedKey | None = None
    source_p: float | None = None

    @property
    def n_sites(self) -> int:
        return int(self.site_mask.sum())

    @property
    def site_set(self) -> frozenset:
        """Member sites as coordinate tuples (intended for small regions)."""
        return frozenset(self.region.site_at(int(i))
                         for i in np.flatnonzero(self.site_mask))


def infinite_cluster_proxy(labeling: ClusterLabeling,
                           rule: ProxyRule) -> InfiniteClusterProxy:
    """Mark the clusters the rule deems infinite."""
    region = labeling.region
    if isinstance(rule, TouchesBoundary):
        roots = np.unique(labeling.labels[boundary_mask(region)])
    elif isinstance(rule, RadiusAtLeast):
        max_radius = (max(region.shape) - 1) // 2
        if rule.radius > max_radius:
            logging.getLogger(__name__).warning(
                "proxy radius %d exceeds region extent %d: proxy is empty",
                rule.radius, max_radius)
            roots = np.zeros(0, dtype=labeling.labels.dtype)
        else:
            qualifying = clusters_with_radius_at_least(labeling, rule.radius - 1)
            roots = np.asarray([s.root for s in qualifying],
                               dtype=labeling.labels.dtype)
    else:
        raise TypeError(f"unknown proxy rule {rule!r}")
    mask = np.isin(labeling.labels, roots)
    return InfiniteClusterProxy(rule, region, mask,
                                source_key=labeling.source_key,
                                source_p=labeling.source_p)


def _check_proxy_compat(config: Configuration, proxy: InfiniteClusterProxy,
                        require_key: bool = False) -> None:
    if not config.region.same_extent(proxy.region):
        raise ValueError("proxy and configuration cover different regions")
    if config.key is not None and proxy.source_key is not None:
        if config.key != proxy.source_key:
            raise ValueError(
                "coupling violation: configuration and proxy come from "
                "different seed keys")
    elif require_key:
        raise ValueError("coupled operation requires seed keys on both sides")


def destroy(omega_p: Configuration,
            proxy: InfiniteClusterProxy) -> Configuration:
    """Burnt layer: edges of the initial configuration not adjacent to any
    proxy site.  Because the proxy is a union of full clusters this removes
    exactly those clusters' edges."""
    _check_proxy_compat(omega_p, proxy)
    return close_adjacent(omega_p, proxy.site_mask)


def recover(omega_tilde_p: Configuration, key: SeedKey, eps: float):
    """Regrow with an independent density-eps field.

    Returns (regrowth, recovered); recovered is the edge-wise union of the
    burnt layer and the regrowth.
    """
    regrowth = realize(noise_key(key), omega_tilde_p.region, eps)
    merged = omega_tilde_p.open_bits | regrowth.open_bits
    merged.flags.writeable = False
    recovered = Configuration(omega_tilde_p.region, merged, key=key)
    return regrowth, recovered


@dataclass(eq=False)
class SdpTriple:
    """The coupled layers of one destroy/recover run."""

    initial: Configuration      # density p
    burnt: Configuration        # initial minus proxy clusters
    regrowth: Configuration     # independent density eps
    recovered: Configuration    # burnt union regrowth
    proxy: InfiniteClusterProxy | None = None


def sdp_triple(key: SeedKey, region: Region, p: float, eps: float,
               rule: ProxyRule = TouchesBoundary()) -> SdpTriple:
    from .clustering import label_clusters

    initial = realize(key, region, p)
    labeling = label_clusters(initial)
    proxy = infinite_cluster_proxy(labeling, rule)
    burnt = destroy(initial, proxy)
    regrowth, recovered = recover(burnt, key, eps)
    return SdpTriple(initial, burnt, regrowth, recovered, proxy)


def subtract_infinite_cluster(omega_q: Configuration,
                              proxy: InfiniteClusterProxy) -> Configuration:
    """Edges of omega_q with no endpoint in the proxy site set.

    omega_q must be realized from the same seed key as the proxy's source
    configuration (the coupled construction); differing keys are rejected.
    """
    _check_proxy_compat(omega_q, proxy, require_key=True)
    return close_adjacent(omega_q, proxy.site_mask)


# role tags used in the serialized triple
_ROLES = {"initial": 1, "burnt": 2, "regrowth": 3, "recovered": 4}


def serialize_triple(triple: SdpTriple) -> bytes:
    out = bytearray()
    for name, role in _ROLES.items():
        out += serialize_configuration(getattr(triple, name), role=role)
    return bytes(out)


def deserialize_triple(buf: bytes) -> SdpTriple:
    offset = 0
    layers = {}
    for name, role in _ROLES.items():
        config, got_role, offset = deserialize_configuration(buf, offset)
        if got_role != role:
            raise ValueError(f"unexpected role {got_role} for layer {name}")
        layers[name] = config
    return SdpTriple(**layers)
