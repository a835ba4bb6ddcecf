"""EV charging-strategy simulator: DAB converter + first-order Thevenin pack."""

__version__ = "0.1.0"
