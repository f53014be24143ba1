"""Tests for leaf_uptake."""
