"""Command-line interface: simulation runs and verification harnesses."""
