"""Simulation and verification of point-process matchings on graph windows.

The package builds finite windows of transitive graph families, samples
seeded point processes on them, computes per-vertex reach radii with
explicit boundary censoring, connects the two point sets into a bipartite
proximity graph, and matches them with a staged chain-flipping engine.
A statistics layer estimates tail curves and checks the combinatorial
inequalities the construction relies on.
"""

from __future__ import annotations

__version__ = "0.1.0"
