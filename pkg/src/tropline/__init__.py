"""Tropical line segments between equidistant phylogenetic trees.

Exact (rational) tooling for ultrametrics under the max-plus semiring:
segment computation, turning-point classification, NNI move counting,
counting formulas, and Monte-Carlo expectation experiments.
"""

from .metric import (
    DimensionMismatch,
    ProjectivePoint,
    UltraVector,
    first_four_point_violation,
    first_three_point_violation,
    format_vector,
    four_point_check,
    normalize_projective,
    parse_vector,
    projective_equal,
    three_point_check,
    trop_add,
    trop_scale,
)
from .trees import (
    EquidistantTree,
    NewickError,
    NotUltrametricError,
    Topology,
    is_generic,
    is_generic_pair,
    nni_distance_exact,
    nni_neighbors,
    parse_newick,
    topology_equal_argmax,
    topology_equal_splits,
    topology_of,
    tree_to_ultrametric,
    ultrametric_to_tree,
    write_newick,
)
from .segment import (
    NonGenericPairError,
    SegmentAnalysis,
    TheoremViolation,
    TropicalSegment,
    TurningPoint,
    TurningPointClass,
    analyze_segment,
    classify_turning_point,
    comparison_graph,
    essential_pairs,
    has_odd_cycle,
    lambda_from_heights,
    segment_class_counts,
    segment_report_dict,
    tropical_interchange_number,
    tropical_nni_number,
    tropical_segment,
    turning_scalars,
)
from .ensembles import (
    ExperimentReport,
    SeededStream,
    assign_generic_heights,
    enumerate_labeled_topologies,
    enumerate_planar_trees,
    essential_pairs_experiment,
    essential_rate_bound,
    essential_rate_bound_geometric,
    essential_rate_exact,
    expected_essential_pairs_exact,
    marked_planar_tree_count,
    marked_planar_tree_count_by_split,
    overlap_probability,
    overlap_probability_bound,
    overlap_probability_geometric_bound,
    planar_tree_count,
    sample_generic_pair,
    sample_topology_uniform,
    split_size_probability,
    split_size_probability_bound,
    tree_from_topology,
    worst_case_pair,
)

__version__ = "0.1.0"
