"""rnpsim test suite."""
