"""Numerical laboratory for coupling, Girsanov and Harnack-type estimates of
multivalued stochastic evolution equations in R^d."""

__version__ = "0.1.0"

from .errors import HarnackLabError  # noqa: E402,F401
