"""Toolkit for building and judging minimal pairs of code-switched text."""

__version__ = "0.1.0"
