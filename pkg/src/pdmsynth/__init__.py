"""Conditional diffusion generator for synthetic run-to-failure data, with evaluation tooling."""

__version__ = "0.1.0"
