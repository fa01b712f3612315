"""Joint probabilistic scenarios for load, wind and solar power.

Deviations of actuals from day-ahead forecasts are given fitted marginals,
mapped to Gaussian space, coupled through sparse (graphical lasso) precision
models and simulated conditionally so that zonal daily aggregates stay
consistent across quantities.
"""

__version__ = "0.1.0"
