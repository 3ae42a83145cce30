"""sdperc: a simulation lab for self-destructive bond percolation on Z^d."""

__version__ = "0.1.0"

from .geometry import (
    BoxRegion,
    Edge,
    ExtentError,
    Orthotope,
    SlabBoxRegion,
    boundary_sites,
    region_edges,
    region_sites,
    slab_box,
)
from .edgefield import (
    Configuration,
    SeedKey,
    canonical_edge_id,
    close_adjacent,
    edge_value,
    extract,
    is_subconfiguration,
    noise_key,
    realize,
    serialize_configuration,
    deserialize_configuration,
    union_configs,
)
from .clustering import (
    ClusterLabeling,
    ClusterStats,
    bfs_oracle,
    box_crossing,
    clusters_with_radius_at_least,
    crossing_exists,
    label_clusters,
    reaches_distance,
)
from .sdp import (
    InfiniteClusterProxy,
    RadiusAtLeast,
    SdpTriple,
    TouchesBoundary,
    destroy,
    infinite_cluster_proxy,
    recover,
    sdp_triple,
    serialize_triple,
    deserialize_triple,
    subtract_infinite_cluster,
)
from .events import (
    CoarseField,
    CoarseParams,
    EnumerationBudgetError,
    EventReport,
    close_around,
    coarse_good_field,
    coarse_percolation_check,
    crossing_event,
    good_box,
    reach_count_event,
    robust_crossing_exhaustive,
    robust_crossing_witnessed,
)
from .estimators import (
    BoundParams,
    Estimate,
    event_probability,
    exponent_fit,
    markov_consistency_check,
    markov_site_bound,
    merge_estimates,
    one_arm_estimate,
    peierls_bound,
    removal_union_bound,
    subtraction_scan,
    wilson_interval,
)
