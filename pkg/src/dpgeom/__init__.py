"""Differentially private linear query release through convex geometry."""
