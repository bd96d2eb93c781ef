"""Experiment presets, configuration, sharded execution and the CLI."""
