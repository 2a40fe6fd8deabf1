"""Goal-adjusted DEA benchmarking for pay-for-performance incentive plans."""

__version__ = "0.1.0"
