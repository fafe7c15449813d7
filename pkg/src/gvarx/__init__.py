"""Global VAR toolkit: country VARX* models linked by exposure weights, GIRFs and exogenous-path scenarios."""

__version__ = "0.1.0"
