"""Tests for the receiver modules."""
