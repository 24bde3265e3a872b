"""Run configurations and logging."""
