"""Perturbation coefficient integrals, tables and LUT files."""
