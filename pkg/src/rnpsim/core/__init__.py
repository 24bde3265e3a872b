"""Core numerics - grid, potentials, reactions, time stepping and diagnostics; no file I/O."""
