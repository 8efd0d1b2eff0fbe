"""Graph clustering toolkit."""

from graphclust._backend import BACKEND
from graphclust.graph import Graph, GraphError, Partition, build_graph, connected_components, matrix_view

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Graph",
    "GraphError",
    "Partition",
    "build_graph",
    "connected_components",
    "matrix_view",
]
