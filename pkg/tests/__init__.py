"""Test package for the annealing dynamics laboratory."""
