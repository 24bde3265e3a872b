"""Unit tests for rnpsim modules."""
