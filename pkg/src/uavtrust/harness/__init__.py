"""Experiment configuration, runs, and metrics output."""
