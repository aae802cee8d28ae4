"""Compensation technique implementations."""

# Import all technique modules to ensure decorators are processed
from fiber_nlc.techniques import dbp
from fiber_nlc.techniques import edc
from fiber_nlc.techniques import pbnlc
