"""Two-sided assortment optimization on choice-based matching platforms.

Policies, exact small-instance solvers, approximation algorithms,
relaxation-based upper bounds, and an experiment harness.
"""

__version__ = "0.1.0"
