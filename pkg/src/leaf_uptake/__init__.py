"""Hybrid compartment-membrane model of pesticide uptake through the leaf cuticle."""

__version__ = "0.1.0"
