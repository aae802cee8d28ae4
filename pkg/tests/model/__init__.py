"""Tests for the model modules."""
