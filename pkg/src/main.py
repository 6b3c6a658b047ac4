#!/usr/bin/env python3
"""
Annealing dynamics laboratory

This module provides the main entry point for the experiment runner.
"""

from .cli import main

if __name__ == '__main__':
    main()
