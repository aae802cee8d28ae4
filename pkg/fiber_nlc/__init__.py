"""Fiber nonlinearity compensation toolkit.

Perturbation-based first- and second-order digital predistortion for
polarization-multiplexed coherent links, with split-step channel simulation,
back-propagation and dispersion-compensation baselines, and complexity
accounting.
"""

__version__ = "0.1.0"
