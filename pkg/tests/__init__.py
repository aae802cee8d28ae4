"""Tests for the fiber-nlc package."""
