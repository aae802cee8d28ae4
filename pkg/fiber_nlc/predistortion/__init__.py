"""Transmitter-side perturbative predistortion."""
