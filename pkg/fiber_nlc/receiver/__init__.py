"""Receiver DSP and quality metrics."""
