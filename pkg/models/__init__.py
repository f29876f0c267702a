# Makes 'models' a Python package.
# Numerical core (grid, poisson, dynamics, nls, wkb, diagnostics) and the experiment harness.
