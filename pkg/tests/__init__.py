"""Test suite for batch-bayesian-quadrature."""
