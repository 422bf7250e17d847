"""Primal graphs, dual construction and graph file formats."""

from dpgcnn.graph.dual import (
    DualEdgeCountReport,
    DualGraph,
    DualMode,
    build_dual,
    count_report,
    sparsify_dual,
)
from dpgcnn.graph.primal import (
    DirectedGraph,
    Neighborhoods,
    add_self_loops,
    connected,
    from_edge_list,
    permute,
    remove_self_loops,
    to_bidirected,
)

__all__ = [
    "DirectedGraph",
    "DualEdgeCountReport",
    "DualGraph",
    "DualMode",
    "Neighborhoods",
    "add_self_loops",
    "build_dual",
    "connected",
    "count_report",
    "from_edge_list",
    "permute",
    "remove_self_loops",
    "sparsify_dual",
    "to_bidirected",
]
