"""skewlab: numerical laboratory for step skew-products with circle fibers."""

__version__ = "0.1.0"
