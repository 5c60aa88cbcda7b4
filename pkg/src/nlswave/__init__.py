"""Numerical laboratory for 1D NLS solitary waves."""
