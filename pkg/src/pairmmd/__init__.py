"""MMD hypothesis tests for matched pairs with missing observations."""

__version__ = "0.1.0"
