"""
Utility functions for the solver
"""
import numpy as np

from nepmri.config import FLOAT_FORMAT


def format_float(value: float) -> str:
    """
    Format a float for CSV output

    17 significant digits round-trip every double exactly.
    """
    return format(float(value), FLOAT_FORMAT)


def node_diameter(nodes: np.ndarray) -> float:
    """Largest pairwise distance within a node set (0 for a single node)"""
    nodes = np.asarray(nodes, dtype=complex).ravel()
    if nodes.size < 2:
        return 0.0
    return float(np.max(np.abs(nodes[:, None] - nodes[None, :])))


def segment_distance(z: complex, start: complex, end: complex) -> float:
    """Distance from z to the closed segment [start, end] of the complex plane"""
    direction = end - start
    t = ((z - start) * np.conj(direction)).real / abs(direction) ** 2
    t = min(max(t, 0.0), 1.0)
    return abs(z - (start + t * direction))
