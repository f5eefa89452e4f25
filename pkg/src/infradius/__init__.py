"""Information radii, Jensen-Shannon symmetrizations and exponential-family centroids."""

from .densities import (
    Aligned,
    DiscreteDensity,
    GridDensity,
    IncompatibleSupports,
    InvalidDensity,
    WeightedSet,
    align,
    make_grid,
    mixture,
    upper_envelope,
)
from .divergences import (
    DivergenceSpec,
    bhattacharyya_coefficient,
    cross_entropy,
    divergence,
    entropy,
    f_generator_jsd,
    jensen_bregman,
    js_diversity,
    jsd,
    kld,
    mn_jsd,
    renyi_divergence,
    renyi_entropy,
    reverse_kld,
    skew_jsd,
    total_variation,
)
from .expfam import EFMember, EFMixture, get_family
from .means import MeanSpec, evaluate_mean
from .radius import (
    RadiusResult,
    SearchConfig,
    bregman_information,
    decomposition_gap,
    generalized_bhattacharyya,
    generalized_radius,
    radius_upper_bound,
    sibson_radius,
    sibson_radius_ef_1_over_k,
    sibson_two_point,
)
from .relative import information_projection, relative_radius, relative_reverse_projection
from .clustering import ClusterState, assign, cluster, quantize_mixture, update_centers

__version__ = "0.1.0"
