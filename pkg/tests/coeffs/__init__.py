"""Tests for the coeffs modules."""
