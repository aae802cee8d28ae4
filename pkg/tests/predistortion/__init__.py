"""Tests for the predistortion modules."""
