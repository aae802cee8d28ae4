"""Core modules for the fiber nonlinearity compensation toolkit."""
