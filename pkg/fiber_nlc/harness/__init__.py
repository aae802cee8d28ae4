"""Experiment specification, runners and result export."""
