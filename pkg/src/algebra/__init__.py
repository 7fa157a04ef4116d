"""Exact algebra: finite groups, integral group rings, blocked matrices and graphs."""
