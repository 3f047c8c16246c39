"""Exception-injection resilience experiments with failure-oblivious handler discovery."""

__version__ = "0.1.0"
