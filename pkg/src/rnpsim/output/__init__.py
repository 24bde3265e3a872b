"""Run output - CSV and PGM writers, run sinks and the manifest schema."""
