"""Constraint-based causal discovery for autocorrelated, non-stationary
multivariate time series.

The library recovers a window graph: lagged and contemporaneous edges over
variables at lags 0..tau_max, plus edges from a surrogate time index C that
mark variables whose causal mechanism changes over time. See ``discover``
for the end-to-end pipeline and the ``ecdans`` command line tool for file
based workflows.
"""

from .citest import (
    CiTester,
    TestConfig,
    ci_test,
    fisher_z,
    hsic_statistic,
    hsic_test,
    partial_correlation,
)
from .datagen import (
    ChangeSpec,
    DivergenceError,
    ScmSpec,
    random_window_graph,
    simulate,
)
from .metrics import (
    EDGE_CLASSES,
    Confusion,
    confusion,
    edge_class,
    fdr,
    shd,
    tpr,
)
from .model import (
    SURROGATE,
    AdjacencySets,
    AlignmentError,
    CITestResult,
    Dataset,
    DegenerateConditioningError,
    DegenerateKernelError,
    Edge,
    InsufficientSampleError,
    InternalConsistencyError,
    NodeRef,
    Orientation,
    SeparationLog,
    WindowGraph,
    lagged_column,
    variable,
)
from .oracle import GraphOracleTester
from .orient import (
    Diagnostic,
    OrientConfig,
    assert_orientation_invariants,
    meek_propagate,
    orient_by_module_independence,
    orient_ctriples,
    orient_lagged,
    orient_surrogate,
)
from .pipeline import DiscoveryResult, PhaseStat, RunReport, discover
from .serialize import (
    ParseError,
    dumps_graph,
    graph_from_dict,
    graph_to_dict,
    graph_to_dot,
    read_dataset_csv,
    read_graph_json,
    write_dataset_csv,
    write_graph_dot,
    write_graph_json,
    write_metrics_csv,
)
from .skeleton import (
    SkeletonConfig,
    build_undirected_graph,
    detect_changing_modules,
    mci_prune,
    pc1_candidates,
    pc1_search,
    refine_contemporaneous,
)

__version__ = "0.1.0"

__all__ = [
    "AdjacencySets",
    "AlignmentError",
    "CITestResult",
    "ChangeSpec",
    "CiTester",
    "Confusion",
    "Dataset",
    "DegenerateConditioningError",
    "DegenerateKernelError",
    "Diagnostic",
    "DiscoveryResult",
    "DivergenceError",
    "EDGE_CLASSES",
    "Edge",
    "GraphOracleTester",
    "InsufficientSampleError",
    "InternalConsistencyError",
    "NodeRef",
    "Orientation",
    "OrientConfig",
    "ParseError",
    "PhaseStat",
    "RunReport",
    "SURROGATE",
    "ScmSpec",
    "SeparationLog",
    "SkeletonConfig",
    "TestConfig",
    "WindowGraph",
    "assert_orientation_invariants",
    "build_undirected_graph",
    "ci_test",
    "confusion",
    "detect_changing_modules",
    "discover",
    "dumps_graph",
    "edge_class",
    "fdr",
    "fisher_z",
    "graph_from_dict",
    "graph_to_dict",
    "graph_to_dot",
    "hsic_statistic",
    "hsic_test",
    "lagged_column",
    "mci_prune",
    "meek_propagate",
    "orient_by_module_independence",
    "orient_ctriples",
    "orient_lagged",
    "orient_surrogate",
    "partial_correlation",
    "pc1_candidates",
    "pc1_search",
    "random_window_graph",
    "read_dataset_csv",
    "read_graph_json",
    "refine_contemporaneous",
    "shd",
    "simulate",
    "tpr",
    "variable",
    "write_dataset_csv",
    "write_graph_dot",
    "write_graph_json",
    "write_metrics_csv",
]
