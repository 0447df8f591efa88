"""Desk-scale semantic document portal.

Pipeline: markup parsing -> linked document model -> annotated rendering,
backed by a versioned store, a metadata triple graph, a typed dependency
graph, and user-facing services, all fronted by one HTTP portal and CLI.
"""

__version__ = "0.1.0"
