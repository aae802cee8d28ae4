"""Shared fixtures for the fiber-nlc test suite."""

import pytest

from fiber_nlc.core.config import Config
from fiber_nlc.core.context import RunContext
from fiber_nlc.model.types import LinkConfig, PulseParams


@pytest.fixture
def config():
    """Default configuration with a single worker."""
    return Config.from_overrides({"runtime.workers": 1})


@pytest.fixture
def context(config):
    """Run context over the default configuration."""
    return RunContext(run_id="test-run", config=config)


@pytest.fixture
def short_link():
    """Two 80 km spans of standard fiber."""
    return LinkConfig.from_table_units(n_spans=2)


@pytest.fixture
def pulse():
    """32 GBaud Gaussian model pulse with tau = T/2."""
    return PulseParams.from_symbol_rate(32e9, tau_over_t=0.5, P0=1e-3, rrc_rolloff=0.1)
