"""End-to-end tests for leaf_uptake."""
