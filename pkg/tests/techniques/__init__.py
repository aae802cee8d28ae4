"""Tests for the compensation techniques."""
