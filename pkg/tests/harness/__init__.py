"""Tests for the harness modules."""
