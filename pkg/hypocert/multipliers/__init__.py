"""Pointwise multipliers g(xi) and the certificates measured on them."""
