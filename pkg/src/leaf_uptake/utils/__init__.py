"""Utility modules for leaf_uptake."""
