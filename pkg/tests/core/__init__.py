"""Tests for the core modules."""