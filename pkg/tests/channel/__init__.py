"""Tests for the channel modules."""
